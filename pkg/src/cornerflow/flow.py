"""Particle trajectory integration and the trajectory bound checks.

Time stepping works in half-plane coordinates, where the particle ODE reads

    dY_i/dt = (1/nu^2) * b(Y_i) * |Y_i|**(2 - 2*nu),

with ``b`` the self-consistent pole sum over the ensemble.  The right side
is bounded and vanishes at the corner (the exponent is positive), so the
corner is numerically benign; stepping in wedge coordinates would multiply
by a factor with unbounded derivative at the origin instead.

The checks quantify what the continuum theory asserts about trajectories:
particles on the bisector side of a small corner ball move to the right and
obey a power-law lower bound on their distance from the corner; the
distance to the boundary is sandwiched between double-exponential powers of
its initial value; and for positive vorticity the support never returns to
the corner.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import WedgeParams, distance_to_boundary, map_to_halfplane, sector_power
from .kernel import KernelConfig, b_zero, induced_bfield
from .report import BoundCheckReport
from .vorticity import VortexEnsemble

logger = logging.getLogger(__name__)


class FlowBlowupError(RuntimeError):
    """A particle left the configured safety radius: the run is unstable."""


@dataclass(frozen=True)
class IntegratorControls:
    dt_max: float
    cfl_fraction: float = 0.5
    scheme: str = "rk4"
    floor_im: float = 1e-14
    blowup_radius: float = 1e3

    def __post_init__(self):
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if not 0 < self.cfl_fraction <= 1:
            raise ValueError("cfl_fraction must lie in (0, 1]")
        if self.scheme not in ("rk4", "rk2"):
            raise ValueError("scheme must be 'rk4' or 'rk2'")
        if self.floor_im < 0:
            raise ValueError("floor_im must be nonnegative")


@dataclass
class FlowTrace:
    """Recorded history of one integration run.

    ``positions`` holds wedge coordinates, ``positions_h`` their half-plane
    images; ``b_probe`` samples the pole sum at fixed probe points near the
    corner and ``b_max`` the largest particle-field magnitude per record.
    """

    params: WedgeParams
    kernel: KernelConfig
    cell_size: float
    times: np.ndarray
    positions: np.ndarray
    positions_h: np.ndarray
    probe_points: np.ndarray
    b_probe: np.ndarray
    b_max: np.ndarray
    clamp_events: int = 0

    def __post_init__(self):
        t = self.times
        if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0)):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    def min_boundary_clearance(self) -> float:
        """Smallest Im of any recorded half-plane position."""
        return float(np.min(self.positions_h.imag))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,particle_id,re_x,im_x,re_y,im_y\n")
            for k, t in enumerate(self.times):
                x = self.positions[k]
                y = self.positions_h[k]
                ts = repr(float(t))
                for i in range(x.shape[0]):
                    fh.write(
                        f"{ts},{i},{float(x[i].real)!r},{float(x[i].imag)!r},"
                        f"{float(y[i].real)!r},{float(y[i].imag)!r}\n"
                    )


def default_probe_points(p: WedgeParams, r_lo: float = 0.01, r_hi: float = 1.2, n_radii: int = 20):
    """Corner probe fan: geometric radii at three interior rays."""
    radii = np.geomspace(r_lo, r_hi, n_radii)
    rays = np.array([0.15, 0.5, 0.85]) * p.angle
    return (radii[:, None] * np.exp(1j * rays)[None, :]).ravel()


def output_times(T: float, n_geometric: int = 12, n_linear: int = 16) -> np.ndarray:
    """Geometric grid ``T * 2**(-k)`` near 0, linear afterwards.

    The geometric head gives log-log fits uniform leverage per octave.
    """
    geo = T * 2.0 ** (-np.arange(n_geometric, 0, -1, dtype=float))
    lin = np.linspace(T / 2.0, T, n_linear + 1)[1:]
    return np.concatenate([[0.0], geo, lin])


def _rhs(y, gamma, nu, config):
    b = induced_bfield(y, y, gamma, config, aligned=True)
    speed_factor = np.abs(y) ** (2.0 - 2.0 * nu)
    return b * speed_factor / nu**2, b


def _advance(y, dt, gamma, nu, config, scheme, k1=None, b1=None):
    if k1 is None:
        k1, b1 = _rhs(y, gamma, nu, config)
    if scheme == "rk2":
        k2, _ = _rhs(y + 0.5 * dt * k1, gamma, nu, config)
        return y + dt * k2, b1
    k2, _ = _rhs(y + 0.5 * dt * k1, gamma, nu, config)
    k3, _ = _rhs(y + 0.5 * dt * k2, gamma, nu, config)
    k4, _ = _rhs(y + dt * k3, gamma, nu, config)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), b1


def step(
    ens: VortexEnsemble,
    dt: float,
    p: WedgeParams,
    config: KernelConfig,
    scheme: str = "rk4",
    floor_im: float = 0.0,
    blowup_radius: float = 1e3,
) -> VortexEnsemble:
    """One explicit Runge-Kutta step of the whole ensemble.

    The field is re-evaluated from the stage positions at every stage.
    Particles pushed below ``floor_im`` are clamped there with a warning;
    strict runs treat any clamp as a failure.  A particle beyond
    ``blowup_radius`` raises `FlowBlowupError`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y, _ = _advance(ens.positions_h, dt, ens.circulations, p.nu, config, scheme)
    if floor_im > 0.0:
        low = y.imag < floor_im
        if low.any():
            logger.warning("clamped %d particle(s) at the Im floor %g", int(low.sum()), floor_im)
            y = np.where(low, y.real + 1j * floor_im, y)
    if y.size and np.max(np.abs(y)) > blowup_radius:
        raise FlowBlowupError(f"particle radius exceeded {blowup_radius}")
    return ens.with_halfplane_positions(y)


def integrate(
    ens: VortexEnsemble,
    T: float,
    ctrl: IntegratorControls,
    p: WedgeParams,
    config: KernelConfig,
    record_times=None,
    probe_points=None,
) -> FlowTrace:
    """Integrate to horizon ``T`` recording states at the output times.

    The step size is ``min(dt_max, cfl * h / sup|u|)`` with the velocity
    estimated from the first-stage field (which the step then reuses), cut
    to land exactly on each record time.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    rec = output_times(T) if record_times is None else np.asarray(record_times, dtype=float)
    if rec[0] != 0.0:
        rec = np.concatenate([[0.0], rec])
    probes = default_probe_points(p) if probe_points is None else np.asarray(probe_points, dtype=complex)
    probes_mapped = np.asarray(map_to_halfplane(probes, p), dtype=complex)

    nu = p.nu
    gamma = ens.circulations
    h = ens.cell_size if ens.cell_size > 0 else 1.0
    y = ens.positions_h.copy()
    clamps = 0

    times, xs, ys, bp, bmax = [], [], [], [], []

    def record(t, y_now):
        b_here = induced_bfield(y_now, y_now, gamma, config, aligned=True)
        times.append(t)
        ys.append(y_now.copy())
        xs.append(np.asarray(sector_power(y_now, nu), dtype=complex))
        bp.append(induced_bfield(probes_mapped, y_now, gamma, config))
        bmax.append(float(np.max(np.abs(b_here))) if b_here.size else 0.0)

    t = 0.0
    record(0.0, y)
    for t_next in rec[1:]:
        while t < t_next - 1e-14 * T:
            k1, b1 = _rhs(y, gamma, nu, config)
            wedge_speed = np.abs(b1) * np.abs(y) ** (1.0 - nu) / nu
            sup_u = float(np.max(wedge_speed)) if wedge_speed.size else 0.0
            dt = ctrl.dt_max if sup_u == 0.0 else min(ctrl.dt_max, ctrl.cfl_fraction * h / sup_u)
            dt = min(dt, t_next - t)
            y, _ = _advance(y, dt, gamma, nu, config, ctrl.scheme, k1=k1, b1=b1)
            low = y.imag < ctrl.floor_im
            if low.any():
                n_low = int(low.sum())
                clamps += n_low
                logger.warning("clamped %d particle(s) at the Im floor %g", n_low, ctrl.floor_im)
                y = np.where(low, y.real + 1j * ctrl.floor_im, y)
            if np.max(np.abs(y)) > ctrl.blowup_radius:
                raise FlowBlowupError(f"particle radius exceeded {ctrl.blowup_radius}")
            t += dt
        t = t_next
        record(t, y)

    return FlowTrace(
        params=p,
        kernel=config,
        cell_size=ens.cell_size,
        times=np.asarray(times),
        positions=np.asarray(xs),
        positions_h=np.asarray(ys),
        probe_points=probes,
        b_probe=np.asarray(bp),
        b_max=np.asarray(bmax),
        clamp_events=clamps,
    )


# ----------------------------------------------------------------------
# Trajectory checks
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CornerWindow:
    """Certified corner neighbourhood: |b - b0| < eps on B(0, 2R) up to T_window."""

    b0: float
    eps: float
    R: float
    T_window: float

    @property
    def nonempty(self) -> bool:
        return self.R > 0.0 and self.T_window > 0.0


def corner_probe(trace: FlowTrace, w0, eps_target: float | None = None, b0: float | None = None) -> CornerWindow:
    """Measure the largest (R, T_window) with ``|b - b0| < eps`` near the corner.

    ``eps`` defaults to ``min(b0, 1)/2``; values at or above ``min(b0, 1)``
    are rejected.  Candidates for ``R`` are half the recorded probe radii,
    so the certified ball ``B(0, 2R)`` is always probe-covered.
    """
    nu = trace.params.nu
    if b0 is None:
        b0 = b_zero(w0, nu)
    if b0 <= 0:
        raise ValueError("corner value b0 must be positive")
    eps = 0.5 * min(b0, 1.0) if eps_target is None else float(eps_target)
    if not 0.0 < eps < min(b0, 1.0):
        raise ValueError(f"eps must lie in (0, min(b0, 1)) = (0, {min(b0, 1.0)})")

    radii = np.unique(np.round(np.abs(trace.probe_points), 12))
    deviations = np.abs(trace.b_probe - b0)
    best = CornerWindow(b0=b0, eps=eps, R=0.0, T_window=0.0)
    for r in radii:
        covered = np.abs(trace.probe_points) <= r * (1 + 1e-12)
        ok_t = np.all(deviations[:, covered] < eps, axis=1)
        bad = np.nonzero(~ok_t)[0]
        t_window = trace.times[-1] if bad.size == 0 else float(trace.times[bad[0] - 1]) if bad[0] > 0 else 0.0
        if t_window > 0.0 and r / 2.0 > best.R:
            best = CornerWindow(b0=b0, eps=eps, R=float(r / 2.0), T_window=float(t_window))
    return best


def trajectory_lower_bound_check(
    trace: FlowTrace,
    b0: float,
    eps: float,
    R: float,
    T_window: float,
    nu: float | None = None,
    tol: float = 0.05,
    angular_slack: float = 1e-8,
) -> BoundCheckReport:
    """Corner-ball particles stay on the bisector side and obey the power law.

    For every particle starting in the bisector-side half of ``B(0, R)`` and
    every recorded ``t <= T_window``, the position must remain at argument
    below ``nu*pi/2`` (within slack) and satisfy
    ``|X(t)| >= (1 - tol) * [(2nu-1)(b0-eps) t / nu^2]**(nu/(2nu-1))``.
    """
    nu = trace.params.nu if nu is None else nu
    if not 0.0 < eps < min(b0, 1.0):
        raise ValueError("eps must lie in (0, min(b0, 1))")
    bisector = nu * np.pi / 2.0
    x0 = trace.positions[0]
    ang0 = np.angle(x0)
    tracked = (np.abs(x0) <= R) & (ang0 >= -angular_slack) & (ang0 <= bisector + angular_slack)
    t_mask = trace.times <= T_window * (1 + 1e-12)
    violations: list[str] = []
    if not tracked.any():
        violations.append("no particles start inside the corner ball")
        return BoundCheckReport(
            check_name="trajectory-lower-bound",
            params={"b0": b0, "eps": eps, "R": R, "T_window": T_window, "tol": tol, "n_tracked": 0},
            n_samples=0,
            passed=False,
            violations=violations,
        )

    x = trace.positions[np.ix_(t_mask, tracked)]
    t = trace.times[t_mask]
    rate = (2.0 * nu - 1.0) * (b0 - eps) / nu**2
    envelope = (rate * t) ** (nu / (2.0 * nu - 1.0))

    ang = np.angle(x)
    ang_bad = (ang < -angular_slack) | (ang > bisector + angular_slack)
    for k in np.nonzero(ang_bad.any(axis=1))[0]:
        worst = float(np.max(ang[k][ang_bad[k]]))
        violations.append(f"t={t[k]:.6g}: {int(ang_bad[k].sum())} particle(s) left the half sector (max arg {worst:.6g})")

    radial = np.abs(x)
    lower = (1.0 - tol) * envelope[:, None]
    rad_bad = radial < lower
    for k in np.nonzero(rad_bad.any(axis=1))[0]:
        worst = float(np.min(radial[k] / max(envelope[k], 1e-300)))
        violations.append(f"t={t[k]:.6g}: {int(rad_bad[k].sum())} particle(s) below the envelope (min margin {worst:.4g})")

    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(envelope[:, None] > 0, radial / envelope[:, None], np.inf)
    min_margin = float(np.min(margins))
    return BoundCheckReport(
        check_name="trajectory-lower-bound",
        params={"b0": b0, "eps": eps, "R": R, "T_window": T_window, "tol": tol,
                "n_tracked": int(tracked.sum())},
        n_samples=int(x.size),
        max_ratio=1.0 / min_margin if min_margin > 0 else float("inf"),
        q99_ratio=float("nan"),
        fitted_constant=min_margin,
        stability_factor=1.0,
        passed=not violations,
        fitted_constants={"min_margin": min_margin},
        violations=violations,
    )


def right_motion_check(
    trace: FlowTrace, R_star: float, T_window: float | None = None, slack: float = 1e-12
) -> BoundCheckReport:
    """Re(Y) never decreases while a particle stays right of the bisector
    image and inside ``B(0, R_star)`` within the certified window."""
    t = trace.times
    t_hi = trace.times[-1] if T_window is None else T_window
    y = trace.positions_h
    violations: list[str] = []
    n_checked = 0
    worst = 0.0
    for k in range(len(t) - 1):
        if t[k + 1] > t_hi * (1 + 1e-12):
            break
        a, b = y[k], y[k + 1]
        in_scope = (a.real > 0) & (b.real > 0) & (np.abs(a) < R_star) & (np.abs(b) < R_star)
        n_checked += int(in_scope.sum())
        drop = np.where(in_scope, a.real - b.real, 0.0)
        worst = max(worst, float(np.max(drop, initial=0.0)))
        bad = drop > slack
        if bad.any():
            violations.append(
                f"t={t[k]:.6g}->{t[k + 1]:.6g}: Re(Y) decreased for {int(bad.sum())} particle(s), worst {drop.max():.3e}"
            )
    return BoundCheckReport(
        check_name="right-motion",
        params={"R_star": R_star, "T_window": t_hi, "slack": slack},
        n_samples=n_checked,
        max_ratio=worst,
        q99_ratio=float("nan"),
        fitted_constant=worst,
        stability_factor=1.0,
        passed=not violations,
        violations=violations,
    )


def _gronwall_rate(times, im_y):
    """Largest |d ln Im Y / dt| / max(-ln Im Y, 1) over recorded intervals."""
    logs = np.log(im_y)
    rates = []
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        if dt <= 0:
            continue
        mid = np.maximum(-0.5 * (logs[k] + logs[k + 1]), 1.0)
        rates.append(np.abs(logs[k + 1] - logs[k]) / (dt * mid))
    return np.asarray(rates)


def distance_bound_check(trace: FlowTrace, c_rate: float | None = None) -> BoundCheckReport:
    """Fit the double-exponential sandwich on Im(Y) and the wedge distance.

    The rate ``c`` is fitted from ``|d ln Im Y/dt| <= c max(-ln Im Y, 1)``;
    with it, envelope constants ``C1, C2`` (half-plane) and ``D1, D2``
    (wedge distance, exponents ``1/nu`` and ``nu``) are the extreme sample
    ratios.  Pass requires strictly interior particles throughout, finite
    fits, and rate stability between two disjoint particle subsets.
    """
    t = trace.times
    im = trace.positions_h.imag
    violations: list[str] = []
    if np.min(im) <= 0.0:
        violations.append("a particle reached the boundary (Im Y <= 0)")
    im = np.maximum(im, 1e-300)

    rates = _gronwall_rate(t, im)
    c_fit = float(np.max(rates)) if rates.size else 0.0
    halves = []
    for par in (0, 1):
        sub = _gronwall_rate(t, im[:, par::2]) if im.shape[1] > 1 else rates
        halves.append(float(np.max(sub)) if np.size(sub) else 0.0)
    positive = [v for v in halves if v > 0]
    stability = max(positive) / min(positive) if len(positive) == 2 else 1.0

    c_use = c_fit if c_rate is None else float(c_rate)
    im0 = im[0]
    with np.errstate(over="ignore"):
        grow = im0[None, :] ** np.exp(c_use * t)[:, None]
        shrink = im0[None, :] ** np.exp(-c_use * t)[:, None]
    c1 = float(np.min(im / grow))
    c2 = float(np.max(im / shrink))

    d = np.maximum(distance_to_boundary(trace.positions, trace.params), 1e-300)
    d0 = d[0]
    with np.errstate(over="ignore"):
        d_grow = d0[None, :] ** ((1.0 / trace.params.nu) * np.exp(c_use * t)[:, None])
        d_shrink = d0[None, :] ** (trace.params.nu * np.exp(-c_use * t)[:, None])
    d1 = float(np.min(d / d_grow))
    d2 = float(np.max(d / d_shrink))

    consts = {"c": c_use, "c_fitted": c_fit, "C1": c1, "C2": c2, "D1": d1, "D2": d2}
    finite = all(np.isfinite(v) for v in consts.values()) and c1 > 0 and d1 > 0
    if not finite:
        violations.append("sandwich constants not finite and positive")
    return BoundCheckReport(
        check_name="distance-sandwich",
        params={"c_rate": c_rate, "n_times": len(t), "n_particles": im.shape[1]},
        n_samples=int(im.size),
        max_ratio=c_fit,
        q99_ratio=float(np.quantile(rates, 0.99)) if rates.size else 0.0,
        fitted_constant=c_fit,
        stability_factor=float(stability),
        passed=not violations and stability <= 2.0,
        fitted_constants=consts,
        violations=violations,
    )


def long_time_floor_check(trace: FlowTrace, T1: float, T2: float, floor: float = 1e-6) -> BoundCheckReport:
    """Minimum corner distance of bisector-side particles over [T1, T2]."""
    if not 0 < T1 < T2 <= trace.times[-1] * (1 + 1e-12):
        raise ValueError("need 0 < T1 < T2 <= trace horizon")
    nu = trace.params.nu
    ang0 = np.angle(trace.positions[0])
    started_plus = (ang0 >= -1e-12) & (ang0 <= nu * np.pi / 2.0 + 1e-12)
    t_mask = (trace.times >= T1) & (trace.times <= T2 * (1 + 1e-12))
    if not (started_plus.any() and t_mask.any()):
        return BoundCheckReport(
            check_name="long-time-floor",
            params={"T1": T1, "T2": T2, "floor": floor},
            passed=False,
            violations=["empty particle set or time window"],
        )
    vals = np.abs(trace.positions[np.ix_(t_mask, started_plus)])
    observed = float(np.min(vals))
    ok = observed >= floor
    return BoundCheckReport(
        check_name="long-time-floor",
        params={"T1": T1, "T2": T2, "floor": floor},
        n_samples=int(vals.size),
        max_ratio=floor / observed if observed > 0 else float("inf"),
        q99_ratio=float("nan"),
        fitted_constant=observed,
        stability_factor=1.0,
        passed=ok,
        fitted_constants={"observed_floor": observed},
        violations=[] if ok else [f"floor {observed:.6g} below configured {floor:.6g}"],
    )
