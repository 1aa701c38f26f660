"""Batch figure rendering from cornerflow trace/energy/report files.

Three figure kinds are supported, selected by a JSON figure spec:

* ``trajectory``: particle paths inside the wedge (edges and bisector
  drawn), with the corner lower-bound envelope next to the measured
  minimum corner distance of the tracked particles;
* ``energy``: log-log pair energy with the fitted slope annotated, the
  annotation value taken verbatim from the report JSON;
* ``sandwich``: boundary-distance histories in half-plane coordinates
  against the fitted double-exponential envelopes.

Rendering is read-only over its inputs and deterministic: the same inputs
produce byte-identical image files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("trajectory", "energy", "sandwich")

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "cornerflow-plots",
}


class SpecError(ValueError):
    """The figure spec or its referenced files do not match the schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    output: str
    trace_csv: str | None = None
    energy_csv: str | None = None
    report_json: str | None = None
    max_paths: int = 40

    @classmethod
    def from_file(cls, path: str) -> "FigureSpec":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read figure spec {path}: {exc}") from exc
        kind = raw.get("kind")
        if kind not in FIGURE_KINDS:
            raise SpecError(f"kind must be one of {FIGURE_KINDS}, got {kind!r}")
        if "output" not in raw:
            raise SpecError("spec is missing 'output'")
        known = {"kind", "output", "trace_csv", "energy_csv", "report_json", "max_paths"}
        unknown = set(raw) - known
        if unknown:
            raise SpecError(f"unknown spec fields: {sorted(unknown)}")
        base = Path(path).parent
        resolved = {
            key: str(base / raw[key]) if key.endswith(("_csv", "_json")) and raw.get(key) else raw.get(key)
            for key in ("trace_csv", "energy_csv", "report_json")
        }
        return cls(kind=kind, output=str(base / raw["output"]), max_paths=raw.get("max_paths", 40), **resolved)


def read_trace(path: str):
    """Trace CSV -> (times, positions, positions_h) with shape (K, N)."""
    rows = []
    try:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            need = {"t", "particle_id", "re_x", "im_x", "re_y", "im_y"}
            if reader.fieldnames is None or not need.issubset(reader.fieldnames):
                raise SpecError(f"{path}: trace columns must include {sorted(need)}")
            for row in reader:
                rows.append(
                    (float(row["t"]), int(row["particle_id"]),
                     float(row["re_x"]), float(row["im_x"]),
                     float(row["re_y"]), float(row["im_y"]))
                )
    except OSError as exc:
        raise SpecError(f"cannot read trace {path}: {exc}") from exc
    except ValueError as exc:
        raise SpecError(f"{path}: malformed trace row ({exc})") from exc
    if not rows:
        return np.zeros(0), np.zeros((0, 0), complex), np.zeros((0, 0), complex)
    times = sorted({r[0] for r in rows})
    ids = sorted({r[1] for r in rows})
    t_index = {t: k for k, t in enumerate(times)}
    x = np.zeros((len(times), len(ids)), dtype=complex)
    y = np.zeros_like(x)
    for t, pid, rx, ix_, ry, iy in rows:
        x[t_index[t], pid] = rx + 1j * ix_
        y[t_index[t], pid] = ry + 1j * iy
    return np.asarray(times), x, y


def read_energy(path: str):
    """Energy CSV -> (t, e1, e_weighted, alpha)."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise SpecError(f"cannot read energy csv {path}: {exc}") from exc
    for col in ("t", "e1", "e_weighted", "alpha"):
        if data.dtype.names is None or col not in data.dtype.names:
            raise SpecError(f"{path}: energy columns must include t, e1, e_weighted, alpha")
    return data["t"], data["e1"], data["e_weighted"], float(np.atleast_1d(data["alpha"])[0])


def read_report(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read report {path}: {exc}") from exc


def _check_from_report(report: dict, name: str) -> dict | None:
    for check in report.get("checks", []):
        if check.get("check_name") == name:
            return check
    return None


def _render_trajectory(spec: FigureSpec):
    if not spec.trace_csv or not spec.report_json:
        raise SpecError("trajectory figure needs trace_csv and report_json")
    times, x, _ = read_trace(spec.trace_csv)
    report = read_report(spec.report_json)
    summary = report.get("summary", {})
    nu = summary.get("nu", report.get("nu", 0.75))
    b0, eps = summary.get("b0"), summary.get("eps")
    R, t_win = summary.get("R", 0.0), summary.get("T_window", 0.0)

    fig, (ax_plane, ax_env) = plt.subplots(1, 2, figsize=(9.2, 4.2))
    angle = nu * np.pi
    reach = 1.2 * float(np.abs(x).max()) if x.size else 1.0
    ax_plane.plot([0, reach], [0, 0], color="k", lw=1.4)
    ax_plane.plot([0, reach * np.cos(angle)], [0, reach * np.sin(angle)], color="k", lw=1.4)
    ax_plane.plot(
        [0, reach * np.cos(angle / 2)], [0, reach * np.sin(angle / 2)],
        color="gray", lw=1.0, ls="--",
    )
    n_paths = 0
    if x.size:
        step = max(1, x.shape[1] // spec.max_paths)
        for i in range(0, x.shape[1], step):
            ax_plane.plot(x[:, i].real, x[:, i].imag, lw=0.6, color="C0", alpha=0.7)
            n_paths += 1
    ax_plane.set_xlabel("Re x")
    ax_plane.set_ylabel("Im x")
    ax_plane.set_title("trajectories in the wedge")
    ax_plane.set_aspect("equal")

    envelope_drawn = False
    if x.size and b0 is not None and eps is not None and R and t_win:
        tracked = np.abs(x[0]) <= R
        tt = times[(times > 0) & (times <= t_win)]
        if tracked.any() and tt.size:
            rate = (2 * nu - 1) * (b0 - eps) / nu**2
            env = (rate * tt) ** (nu / (2 * nu - 1))
            min_r = np.abs(x[np.ix_(np.isin(times, tt), tracked)]).min(axis=1)
            ax_env.loglog(tt, min_r, color="C0", label="min corner distance (tracked)")
            ax_env.loglog(tt, env, color="C3", ls="--", label="power-law envelope")
            ax_env.legend(loc="best")
            envelope_drawn = True
    ax_env.set_xlabel("t")
    ax_env.set_ylabel("|x|")
    ax_env.set_title("corner lower bound")
    fig.tight_layout()
    return fig, {"kind": "trajectory", "n_paths": n_paths, "envelope_drawn": envelope_drawn}


def _render_energy(spec: FigureSpec):
    if not spec.energy_csv or not spec.report_json:
        raise SpecError("energy figure needs energy_csv and report_json")
    t, e1, _, alpha = read_energy(spec.energy_csv)
    report = read_report(spec.report_json)
    slope = report.get("growth_slope_first_pair", report.get("steps", {}).get("growth_law", {}).get("slope"))
    if slope is None:
        raise SpecError("report carries no fitted slope")
    annotation = f"fitted slope = {slope!r}"

    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    keep = (t > 0) & (e1 > 0)
    ax.loglog(t[keep], e1[keep], marker="o", ms=2.5, lw=0.8, color="C0", label="pair energy")
    if keep.any():
        t_ref = t[keep]
        anchor = e1[keep][-1] / t_ref[-1] ** slope
        ax.loglog(t_ref, anchor * t_ref**slope, ls="--", color="C3", label=annotation)
    ax.set_xlabel("t")
    ax.set_ylabel("E1")
    ax.set_title(f"pair energy (weight exponent {alpha:g})")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig, {"kind": "energy", "slope": slope, "annotation": annotation}


def _render_sandwich(spec: FigureSpec, n_particles: int = 6):
    if not spec.trace_csv or not spec.report_json:
        raise SpecError("sandwich figure needs trace_csv and report_json")
    times, _, y = read_trace(spec.trace_csv)
    report = read_report(spec.report_json)
    check = _check_from_report(report, "distance-sandwich")
    if check is None:
        raise SpecError("report carries no distance-sandwich check")
    consts = check["fitted_constants"]
    c, c1, c2 = consts["c"], consts["C1"], consts["C2"]

    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    n_curves = 0
    if y.size:
        order = np.argsort(y[0].imag)
        picks = order[:: max(1, len(order) // n_particles)][:n_particles]
        grow = np.exp(c * times)
        shrink = np.exp(-c * times)
        for color_idx, i in enumerate(picks):
            y0 = y[0, i].imag
            col = f"C{color_idx % 10}"
            ax.semilogy(times, y[:, i].imag, color=col, lw=1.0)
            ax.semilogy(times, c1 * y0**grow, color=col, lw=0.7, ls="--", alpha=0.7)
            ax.semilogy(times, c2 * y0**shrink, color=col, lw=0.7, ls=":", alpha=0.7)
            n_curves += 1
    ax.set_xlabel("t")
    ax.set_ylabel("Im Y")
    ax.set_title(f"boundary-distance sandwich (c={c:.3g})")
    fig.tight_layout()
    return fig, {"kind": "sandwich", "n_curves": n_curves, "c": c, "C1": c1, "C2": c2}


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns metadata including the output path."""
    with plt.rc_context(_STYLE):
        if spec.kind == "trajectory":
            fig, meta = _render_trajectory(spec)
        elif spec.kind == "energy":
            fig, meta = _render_energy(spec)
        else:
            fig, meta = _render_sandwich(spec)
        try:
            fig.savefig(spec.output, metadata={"Software": "cornerflow-plots"})
        finally:
            plt.close(fig)
    meta["output"] = spec.output
    return meta


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cornerflow-plots", description=__doc__)
    parser.add_argument("--spec", required=True, help="figure spec JSON path")
    args = parser.parse_args(argv)
    try:
        meta = render(FigureSpec.from_file(args.spec))
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(meta, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
