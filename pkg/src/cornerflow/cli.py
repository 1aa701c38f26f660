"""Experiment runner: config parsing, pipeline dispatch, artifact output.

Pipelines are selected by subcommand; every run writes a JSON report (and
CSV traces where applicable) into the output directory with deterministic
bytes, so repeated runs with the same config, seed, and reduction block
size diff clean.  Exit status: 0 all selected checks passed, 1 a check
failed, 2 the config could not be parsed, 3 a runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, energy, flow, kernel, studies, vorticity
from .geometry import WedgeParams

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    nu: float = 0.75
    eps: float = 0.0
    vorticity_kind: str = "uniform-annular-sector"
    vorticity_params: dict = field(default_factory=dict)
    h: float = 0.03
    blob_delta: float | None = None  # None = h**0.9
    scheme: str = "rk4"
    dt_max: float = 0.05
    cfl_fraction: float = 0.4
    floor_im: float = 1e-14
    blowup_radius: float = 1e3
    horizon: float = 2.0
    eps_fraction: float = 0.5
    lower_bound_tol: float = 0.05
    floor_t1: float = 0.5
    floor_t2: float = 2.0
    floor_min: float = 1e-3
    appendix_nu_grid: tuple = (0.55, 0.75, 0.9)
    appendix_configs: int = 18
    negative_controls: bool = False
    energy_base_h: float = 0.06
    energy_levels: int = 4
    energy_horizon: float = 0.3
    energy_min_ratio: float = 2.0
    model_nu: float = 0.75
    model_alpha: float = 1.0
    model_eps: float = 0.1
    probe_h: float = 0.005
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    sum_block: int = 256

    def wedge(self) -> WedgeParams:
        return WedgeParams(nu=self.nu, eps=self.eps)

    def profile(self) -> vorticity.InitialVorticity:
        p = dict(self.vorticity_params)
        if self.vorticity_kind == "uniform-annular-sector":
            theta_max = p.get("theta_max", "bisector")
            if theta_max == "bisector":
                theta_max = self.nu * np.pi / 2.0
            return vorticity.annular_sector(
                p.get("r_inner", 0.1),
                p.get("r_outer", 0.5),
                p.get("theta_min", 0.0),
                float(theta_max),
                p.get("amplitude", 1.0),
            )
        if self.vorticity_kind == "truncated-gaussian":
            return vorticity.truncated_gaussian(
                complex(p.get("center_re", 0.3), p.get("center_im", 0.1)),
                p.get("sigma", 0.05),
                p.get("cutoff", 0.15),
                p.get("amplitude", 1.0),
            )
        raise ConfigError(f"vorticity/kind: unsupported {self.vorticity_kind!r}")

    def kernel_config(self) -> kernel.KernelConfig:
        delta = kernel.default_blob_delta(self.h) if self.blob_delta is None else self.blob_delta
        return kernel.KernelConfig(blob_delta=delta, sum_block=self.sum_block)

    def controls(self) -> flow.IntegratorControls:
        return flow.IntegratorControls(
            dt_max=self.dt_max,
            cfl_fraction=self.cfl_fraction,
            scheme=self.scheme,
            floor_im=self.floor_im,
            blowup_radius=self.blowup_radius,
        )


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from exc


def load_config(path: str | None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    known = {
        "domain", "vorticity", "discretization", "integrator", "checks", "energy", "run",
    }
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    cfg.nu = _get(parser, "domain", "nu", float, cfg.nu)
    cfg.eps = _get(parser, "domain", "eps", float, cfg.eps)

    cfg.vorticity_kind = _get(parser, "vorticity", "kind", str, cfg.vorticity_kind)
    if parser.has_section("vorticity"):
        for key in parser.options("vorticity"):
            if key == "kind":
                continue
            raw = parser.get("vorticity", key)
            if key == "theta_max" and raw.strip() == "bisector":
                cfg.vorticity_params[key] = "bisector"
                continue
            try:
                cfg.vorticity_params[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"[vorticity] {key}: cannot parse {raw!r}") from exc

    cfg.h = _get(parser, "discretization", "h", float, cfg.h)
    raw_delta = _get(parser, "discretization", "blob_delta", str, "auto")
    if raw_delta != "auto":
        try:
            cfg.blob_delta = float(raw_delta)
        except ValueError as exc:
            raise ConfigError(f"[discretization] blob_delta: cannot parse {raw_delta!r}") from exc

    cfg.scheme = _get(parser, "integrator", "scheme", str, cfg.scheme)
    cfg.dt_max = _get(parser, "integrator", "dt_max", float, cfg.dt_max)
    cfg.cfl_fraction = _get(parser, "integrator", "cfl_fraction", float, cfg.cfl_fraction)
    cfg.floor_im = _get(parser, "integrator", "floor_im", float, cfg.floor_im)
    cfg.blowup_radius = _get(parser, "integrator", "blowup_radius", float, cfg.blowup_radius)
    cfg.horizon = _get(parser, "integrator", "horizon", float, cfg.horizon)

    cfg.eps_fraction = _get(parser, "checks", "eps_fraction", float, cfg.eps_fraction)
    cfg.lower_bound_tol = _get(parser, "checks", "lower_bound_tol", float, cfg.lower_bound_tol)
    cfg.floor_t1 = _get(parser, "checks", "floor_t1", float, cfg.floor_t1)
    cfg.floor_t2 = _get(parser, "checks", "floor_t2", float, cfg.floor_t2)
    cfg.floor_min = _get(parser, "checks", "floor_min", float, cfg.floor_min)
    grid = _get(parser, "checks", "appendix_nu_grid", str, None)
    if grid is not None:
        try:
            cfg.appendix_nu_grid = tuple(float(v) for v in grid.split(","))
        except ValueError as exc:
            raise ConfigError(f"[checks] appendix_nu_grid: cannot parse {grid!r}") from exc
    cfg.appendix_configs = _get(parser, "checks", "appendix_configs", int, cfg.appendix_configs)
    cfg.negative_controls = _get(parser, "checks", "negative_controls", bool, cfg.negative_controls)
    cfg.probe_h = _get(parser, "checks", "probe_h", float, cfg.probe_h)

    cfg.energy_base_h = _get(parser, "energy", "base_h", float, cfg.energy_base_h)
    cfg.energy_levels = _get(parser, "energy", "levels", int, cfg.energy_levels)
    cfg.energy_horizon = _get(parser, "energy", "horizon", float, cfg.energy_horizon)
    cfg.energy_min_ratio = _get(parser, "energy", "min_ratio", float, cfg.energy_min_ratio)
    cfg.model_nu = _get(parser, "energy", "model_nu", float, cfg.model_nu)
    cfg.model_alpha = _get(parser, "energy", "model_alpha", float, cfg.model_alpha)
    cfg.model_eps = _get(parser, "energy", "model_eps", float, cfg.model_eps)

    cfg.out_dir = _get(parser, "run", "out_dir", str, cfg.out_dir)
    cfg.seed = _get(parser, "run", "seed", int, cfg.seed)
    cfg.threads = _get(parser, "run", "threads", int, cfg.threads)
    cfg.sum_block = _get(parser, "run", "sum_block", int, cfg.sum_block)

    try:
        cfg.wedge()
        cfg.controls()
        cfg.kernel_config()
        if cfg.h <= 0:
            raise ValueError("h must be positive")
        if cfg.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not 0 < cfg.eps_fraction < 1:
            raise ValueError("eps_fraction must lie in (0, 1)")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# ----------------------------------------------------------------------
# Deterministic serialization
# ----------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_report(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n")


def write_energy_csv(path: Path, trace: energy.EnergyTrace) -> None:
    with open(path, "w") as fh:
        fh.write("t,e1,e_weighted,alpha\n")
        alpha = trace.alpha
        ew = trace.e_weighted if trace.e_weighted is not None else [float("nan")] * len(trace.times)
        for t, v, w in zip(trace.times, trace.e1, ew):
            fh.write(f"{float(t)!r},{float(v)!r},{float(w)!r},{float(alpha)!r}\n")


# ----------------------------------------------------------------------
# Pipelines
# ----------------------------------------------------------------------


def _run_flow(cfg: ExperimentConfig, out: Path, with_checks: bool):
    p = cfg.wedge()
    w0 = cfg.profile()
    val = vorticity.validate_assumptions(w0, cfg.nu)
    if not val.ok:
        return False, {"vorticity_violations": val.violations, "checks": []}

    ens = vorticity.discretize(w0, cfg.h, cfg.nu)
    kcfg = cfg.kernel_config()
    trace = flow.integrate(ens, cfg.horizon, cfg.controls(), p, kcfg)
    trace.write_csv(out / "trace.csv")

    summary = {
        "nu": cfg.nu,
        "eps_smoothing": cfg.eps,
        "n_particles": len(ens),
        "h": cfg.h,
        "blob_delta": kcfg.blob_delta,
        "horizon": cfg.horizon,
        "clamp_events": trace.clamp_events,
        "min_im_y": trace.min_boundary_clearance(),
        "total_circulation": ens.total_circulation,
    }
    if not with_checks:
        return True, {"summary": summary, "checks": []}

    b0 = kernel.b_zero(w0, cfg.nu)
    eps_t = cfg.eps_fraction * min(b0, 1.0)
    window = flow.corner_probe(trace, w0, eps_target=eps_t, b0=b0)
    summary.update({"b0": b0, "eps": window.eps, "R": window.R, "T_window": window.T_window})

    reports = []
    reports.append(
        flow.trajectory_lower_bound_check(
            trace, window.b0, window.eps, window.R, window.T_window, tol=cfg.lower_bound_tol
        )
    )
    reports.append(
        flow.right_motion_check(trace, window.R ** (1.0 / cfg.nu), T_window=window.T_window)
    )
    reports.append(flow.distance_bound_check(trace))
    t2 = min(cfg.floor_t2, cfg.horizon)
    reports.append(flow.long_time_floor_check(trace, cfg.floor_t1, t2, floor=cfg.floor_min))

    confinement = trace.clamp_events == 0 and trace.min_boundary_clearance() > 0.0
    reports.append(
        analysis.BoundCheckReport(
            check_name="domain-confinement",
            params={"floor_im": cfg.floor_im},
            n_samples=int(trace.positions_h.size),
            max_ratio=0.0 if confinement else float("inf"),
            q99_ratio=float("nan"),
            fitted_constant=trace.min_boundary_clearance(),
            stability_factor=1.0,
            passed=confinement,
            violations=[] if confinement else [f"{trace.clamp_events} clamp event(s)"],
        )
    )
    ok = all(r.passed for r in reports) and window.nonempty
    payload = {"summary": summary, "checks": [r.to_json_dict() for r in reports]}
    if not window.nonempty:
        payload["window_empty"] = True
    return ok, payload


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    ok, payload = _run_flow(cfg, out, with_checks=False)
    write_report(out / "report.json", {"pipeline": "simulate", "pass": ok, **payload})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_flow(cfg: ExperimentConfig, out: Path) -> int:
    ok, payload = _run_flow(cfg, out, with_checks=True)
    write_report(out / "report.json", {"pipeline": "verify-flow", "pass": ok, **payload})
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_ode(cfg: ExperimentConfig, out: Path) -> int:
    nu = cfg.model_nu
    horizon = 1.5
    x1 = energy.model_ode_integrate(nu, 1e-6, horizon)
    x2 = energy.model_ode_integrate(nu, 2e-6, horizon)
    rep = energy.model_energy_demo(nu, cfg.model_alpha, cfg.model_eps, (x1, x2))

    closed = energy.ModelOdeSolution(nu=nu)
    probe = energy.model_ode_integrate(nu, 1e-8, 1.0)
    oracle_rel = abs(probe.at(1.0) - closed.value(1.0)) / closed.value(1.0)

    t = np.geomspace(1e-6 * horizon, horizon, 600)
    diff = np.abs(x1.at(t) - x2.at(t))
    etrace = energy.weighted_energy(
        energy.EnergyTrace(times=t, e1=diff), alpha=cfg.model_alpha
    )
    write_energy_csv(out / "model_energy.csv", etrace)

    ok = rep.all_ok and oracle_rel < 1e-3
    payload = {
        "pipeline": "verify-ode",
        "pass": ok,
        "closed_form_at_1": closed.value(1.0),
        "integrator_rel_error": oracle_rel,
        "steps": {
            "lower_bound": rep.lower_bound_ok,
            "growth_law": {
                "comparison_bound": rep.comparison_bound_ok,
                "slope": rep.growth_slope,
                "constant": rep.growth_constant,
            },
            "weighted_monotone": rep.monotone_ok,
        },
        "alpha": rep.alpha,
        "eps": rep.eps,
        "max_weighted_increment": rep.max_weighted_increment,
    }
    write_report(out / "report.json", payload)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_energy(cfg: ExperimentConfig, out: Path) -> int:
    p = cfg.wedge()
    w0 = cfg.profile()
    study = studies.self_convergence_study(
        w0, p, cfg.energy_base_h, cfg.energy_levels, cfg.energy_horizon, cfg.controls()
    )
    alpha = energy.canonical_alpha(cfg.nu)
    first = energy.weighted_energy(study.pair_energies[0], alpha)
    write_energy_csv(out / "energy.csv", first)

    ok = all(r >= cfg.energy_min_ratio for r in study.ratios)
    slope_window = (study.marker_traces[0].times[1], cfg.energy_horizon)
    payload = {
        "pipeline": "verify-energy",
        "pass": ok,
        "h_levels": study.h_levels,
        "marker_count": study.marker_count,
        "final_e1": study.final_e1,
        "ratios": study.ratios,
        "measured_order": study.measured_order,
        "alpha": alpha,
        "growth_slope_first_pair": energy.e1_growth_fit(study.pair_energies[0], slope_window),
        "min_ratio_required": cfg.energy_min_ratio,
    }
    write_report(out / "report.json", payload)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_appendix(cfg: ExperimentConfig, out: Path) -> int:
    checks = []

    disk = analysis.integral_I(
        analysis.IntegralSpec(nodes=((0.0, 0.0),), weight=analysis.WeightFn(kind="const"), r=0.0, R=1.0)
    )
    inv = analysis.integral_I(
        analysis.IntegralSpec(nodes=((0.0, 1.0),), weight=analysis.WeightFn(kind="const"), r=0.0, R=1.0)
    )
    closed_ok = abs(disk - np.pi) < 1e-6 * np.pi and abs(inv - 2 * np.pi) < 2e-6 * np.pi
    checks.append(
        analysis.BoundCheckReport(
            check_name="integral-closed-forms",
            params={"disk_area": disk, "inverse_distance_disk": inv},
            n_samples=2,
            max_ratio=max(abs(disk - np.pi) / np.pi, abs(inv - 2 * np.pi) / (2 * np.pi)),
            q99_ratio=float("nan"),
            fitted_constant=1.0,
            stability_factor=1.0,
            passed=closed_ok,
        )
    )

    checks.append(analysis.gronwall_phi_check(c=0.8, R_bound=2.0, y0=0.3, T=2.0))
    for nu in cfg.appendix_nu_grid:
        checks.append(analysis.powers_inequality_check(nu, n_samples=20_000, seed=cfg.seed))
        checks.append(analysis.gronwall_phi_check(c=0.5, R_bound=1.5, y0=0.2, T=1.0 + nu))
    checks.append(analysis.itwo_bound_check(n_configs=cfg.appendix_configs, seed=cfg.seed))
    for nu in cfg.appendix_nu_grid:
        checks.append(
            analysis.ithree_bound_check(nu, n_configs=cfg.appendix_configs, seed=cfg.seed)
        )
    checks.append(analysis.iest_reduction_sweep(n_configs=12, seed=cfg.seed))

    if cfg.negative_controls:
        checks.append(
            analysis.itwo_bound_check(n_configs=cfg.appendix_configs, seed=cfg.seed, modulus="identity")
        )
        checks.append(
            analysis.ithree_bound_check(
                0.75, n_configs=cfg.appendix_configs, seed=cfg.seed, corner_weight="none"
            )
        )

    ok = all(c.passed for c in checks)
    payload = {
        "pipeline": "verify-appendix",
        "pass": ok,
        "negative_controls": cfg.negative_controls,
        "checks": [c.to_json_dict() for c in checks],
    }
    write_report(out / "report.json", payload)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_kernel_probe(cfg: ExperimentConfig, out: Path) -> int:
    p = cfg.wedge()
    w0 = cfg.profile()
    ens = vorticity.discretize(w0, cfg.probe_h, cfg.nu)
    kcfg = kernel.KernelConfig(
        blob_delta=kernel.default_blob_delta(cfg.probe_h), sum_block=cfg.sum_block
    )
    checks = [
        kernel.velocity_bound_probe(ens, p, kcfg, n_probes=500, seed=cfg.seed),
        kernel.log_lipschitz_probe(
            ens,
            kernel.PolarRegion(0.2, 0.4, cfg.nu * np.pi / 4, cfg.nu * np.pi / 2),
            p,
            kcfg,
            n_pairs=5000,
            seed=cfg.seed,
        ),
        kernel.decay_probe(ens, p, kcfg),
        kernel.kernel_bound_sweep(WedgeParams(nu=cfg.nu, eps=0.0), seed=cfg.seed),
        kernel.kernel_bound_sweep(WedgeParams(nu=cfg.nu, eps=0.5), seed=cfg.seed),
    ]
    ok = all(c.passed for c in checks)
    payload = {
        "pipeline": "kernel-probe",
        "pass": ok,
        "n_particles": len(ens),
        "checks": [c.to_json_dict() for c in checks],
    }
    write_report(out / "report.json", payload)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


CHECK_CATALOG = [
    ("conformal-round-trip", "forward/inverse map composition is the identity on the domain", "geometry"),
    ("kernel-halfplane-reduction", "angle-factor 1 collapses the kernel to the plain half-plane image kernel", "kernel"),
    ("kernel-pointwise-bound", "kernel magnitude times separation stays bounded", "kernel"),
    ("velocity-uniform-bound", "velocity bounded by the vorticity norms", "kernel"),
    ("velocity-interior-log-lipschitz", "interior velocity modulus of continuity is log-Lipschitz", "kernel"),
    ("velocity-far-field-decay", "circle maxima of the speed decay like 1/R", "kernel"),
    ("corner-probe", "largest ball and time window where b stays within eps of its corner value", "flow"),
    ("trajectory-lower-bound", "corner particles obey the power-law outward bound and stay on the bisector side", "flow"),
    ("right-motion", "half-plane positions never drift left inside the certified window", "flow"),
    ("distance-sandwich", "boundary distance sandwiched between double-exponential powers of its initial value", "flow"),
    ("long-time-floor", "bisector-side particles keep a positive distance from the corner at late times", "flow"),
    ("domain-confinement", "no particle reaches the boundary or triggers the Im floor", "flow"),
    ("model-ode-oracle", "scalar corner model matches its closed-form solution", "energy"),
    ("model-energy-demo", "three-step monotone weighted-energy argument on the scalar model", "energy"),
    ("energy-self-convergence", "pair energy between refinement levels halves per level at least", "energy"),
    ("energy-growth-fit", "log-log growth exponent of the pair energy", "energy"),
    ("integral-closed-forms", "weighted singular integral reproduces disk closed forms", "appendix"),
    ("gronwall-log-modulus-envelope", "log-modulus drivers stay inside the double-exponential envelope", "appendix"),
    ("fractional-power-comparability", "two-sided bound for fractional power differences", "appendix"),
    ("two-pole-log-modulus-bound", "two-pole integral bounded by the log modulus of the separation", "appendix"),
    ("corner-weighted-three-factor-bound", "three-factor integral bounded with the corner weight", "appendix"),
    ("integral-peeling-reduction", "full integral bounded by peeled annuli plus the merged-pole integral", "appendix"),
]


def cmd_list_checks() -> int:
    width = max(len(name) for name, _, _ in CHECK_CATALOG)
    for name, what, module in CHECK_CATALOG:
        print(f"{name:<{width}}  [{module}] {what}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cornerflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
        "simulate",
        "verify-ode",
        "verify-flow",
        "verify-energy",
        "verify-appendix",
        "kernel-probe",
    ):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
    sub.add_parser("list-checks")

    args = parser.parse_args(argv)
    if args.command == "list-checks":
        return cmd_list_checks()

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kernel.set_worker_count(cfg.threads)
    try:
        dispatch = {
            "simulate": cmd_simulate,
            "verify-ode": cmd_verify_ode,
            "verify-flow": cmd_verify_flow,
            "verify-energy": cmd_verify_energy,
            "verify-appendix": cmd_verify_appendix,
            "kernel-probe": cmd_kernel_probe,
        }
        return dispatch[args.command](cfg, out)
    except (ConfigError, vorticity.DiscretizationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 3
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        kernel.set_worker_count(None)


if __name__ == "__main__":
    sys.exit(main())
