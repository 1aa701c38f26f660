"""Energy functionals and the scalar model-problem bench.

Two kinds of object live here.  First, the distance energies used to compare
a pair of particle runs: the plain energy ``E1(t) = sum_i |X_A,i - X_B,i|
|Gamma_i|`` and its time-weighted variant ``E(t) = t**(-alpha) E1(t)``.
Second, a bench for the scalar caricature of the corner dynamics,

    dx/dt = x**(1/nu - 1),  x(0) = 0,

whose right side is not Lipschitz at 0.  The initial-value problem has a
one-parameter family of delayed solutions; the member that is positive for
positive time is ``x(t) = [((2*nu-1)/nu) t]**(nu/(2*nu-1))``.  The bench
reproduces the weighted-energy monotonicity argument that singles it out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp


def phi(x):
    """Log-Lipschitz modulus ``x * max(-ln x, 1)`` with ``phi(0) = 0``.

    Increasing on [0, inf), concave on [0, 1/10], and ``phi(c*x) <= c*phi(x)``
    for ``c >= 1``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("phi is defined on [0, inf)")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = arr * np.maximum(-np.log(arr), 1.0)
    out = np.where(arr == 0.0, 0.0, out)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


@dataclass(frozen=True)
class EnergyTrace:
    """Sampled distance energy of a run pair, optionally time-weighted."""

    times: np.ndarray
    e1: np.ndarray
    alpha: float = float("nan")
    e_weighted: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if np.any(self.e1 < 0):
            raise ValueError("e1 must be nonnegative")


def e1(trace_a, trace_b, ens) -> EnergyTrace:
    """Circulation-weighted distance between two runs of the same particles.

    Both traces must share output times and particle identities; the weights
    are the absolute circulations of ``ens``.
    """
    ta, tb = np.asarray(trace_a.times), np.asarray(trace_b.times)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0, atol=1e-12):
        raise ValueError("traces do not share output times")
    xa, xb = np.asarray(trace_a.positions), np.asarray(trace_b.positions)
    if xa.shape != xb.shape:
        raise ValueError("traces do not share particle identities")
    w = np.abs(np.asarray(ens.circulations, dtype=float))
    if xa.shape[1] != w.shape[0]:
        raise ValueError("ensemble does not match the traces")
    vals = np.abs(xa - xb) @ w
    return EnergyTrace(times=ta.copy(), e1=vals)


def weighted_energy(e: EnergyTrace, alpha: float) -> EnergyTrace:
    """Attach ``E(t) = t**(-alpha) E1(t)``; the ``t = 0`` sample is NaN."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    t = np.asarray(e.times, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ew = np.where(t > 0, t ** (-alpha) * e.e1, np.nan)
    return EnergyTrace(times=e.times, e1=e.e1, alpha=alpha, e_weighted=ew)


def canonical_alpha(nu: float) -> float:
    """The weight exponent ``1/(2*nu - 1)`` used in the uniqueness argument."""
    return 1.0 / (2.0 * nu - 1.0)


def choose_constants(alpha: float, nu: float, b0: float) -> tuple[float, float]:
    """Exponent pair (p, eps) entering the energy-growth estimate.

    ``p = alpha/(alpha - 1)`` and ``eps`` is half the minimum of three
    margins.  The returned pair satisfies the four side conditions the
    estimate needs; they are asserted here so a bad ``b0`` fails loudly.
    """
    if not 1.0 < alpha < 2.0 * nu / (2.0 * nu - 1.0):
        raise ValueError(f"alpha must lie in (1, 2nu/(2nu-1)), got {alpha}")
    if b0 <= 0:
        raise ValueError("b0 must be positive")
    p = alpha / (alpha - 1.0)
    eps = 0.5 * min(
        (2.0 * nu - alpha * (2.0 * nu - 1.0)) / (2.0 * alpha * (2.0 * nu - 1.0)),
        b0 * (2.0 * nu - 1.0) / (3.0 - 2.0 * nu),
        1.0,
    )
    assert p > 2.0 * nu
    assert 2.0 / p < (1.0 + eps * (1.0 - 2.0 * nu)) / nu
    assert (b0 + eps) / (b0 - eps) < 1.0 / (2.0 * (1.0 - nu))
    assert eps < min(b0, 1.0)
    return p, eps


@dataclass(frozen=True)
class ModelOdeSolution:
    """Member of the delayed-solution family of the scalar model problem.

    ``value(t) = 0`` for ``t <= t0`` and
    ``[((2*nu-1)/nu)(t - t0)]**(nu/(2*nu-1))`` afterwards.  Distinct delays
    give distinct solutions, so uniqueness fails without the positivity
    selection.
    """

    nu: float
    t0: float = 0.0

    def __post_init__(self):
        if not 0.5 < self.nu < 1.0:
            raise ValueError("nu must lie in (1/2, 1)")
        if self.t0 < 0:
            raise ValueError("t0 must be nonnegative")

    @property
    def rate(self) -> float:
        return (2.0 * self.nu - 1.0) / self.nu

    @property
    def exponent(self) -> float:
        return self.nu / (2.0 * self.nu - 1.0)

    def value(self, t):
        tt = np.asarray(t, dtype=float)
        out = np.where(tt > self.t0, (self.rate * np.maximum(tt - self.t0, 0.0)) ** self.exponent, 0.0)
        return float(out) if np.ndim(t) == 0 else out

    def residual(self, t):
        """ODE residual dx/dt - x**(1/nu - 1) away from the kink at t0."""
        tt = np.asarray(t, dtype=float)
        x = self.value(tt)
        deriv = np.where(
            tt > self.t0,
            self.exponent * self.rate * (self.rate * np.maximum(tt - self.t0, 1e-300)) ** (self.exponent - 1.0),
            0.0,
        )
        return deriv - np.where(x > 0, x ** (1.0 / self.nu - 1.0), 0.0)


@dataclass(frozen=True)
class ModelTrajectory:
    """Numerically integrated trajectory with dense evaluation."""

    nu: float
    x0: float
    times: np.ndarray
    values: np.ndarray
    _dense: object = field(repr=False, default=None)

    def at(self, t):
        out = self._dense(np.asarray(t, dtype=float))
        return float(out) if np.ndim(t) == 0 else np.asarray(out)


def model_ode_integrate(nu: float, x0: float, T: float, rtol: float = 1e-12, n_out: int = 512) -> ModelTrajectory:
    """High-accuracy adaptive integration of ``dx/dt = x**(1/nu - 1)``.

    Reference integrator for the bench (eighth-order adaptive RK at
    ``rtol=1e-12``); as ``x0 -> 0+`` the trajectory converges pointwise to
    the zero-delay member of the closed-form family.
    """
    if x0 <= 0:
        raise ValueError("x0 must be strictly positive")
    if T <= 0:
        raise ValueError("T must be positive")
    mu = 1.0 / nu - 1.0

    def rhs(_t, x):
        return np.maximum(x, 0.0) ** mu

    t_eval = np.linspace(0.0, T, n_out)
    sol = solve_ivp(
        rhs, (0.0, T), [x0], method="DOP853", rtol=rtol, atol=1e-14, dense_output=True, t_eval=t_eval
    )
    if not sol.success:
        raise RuntimeError(f"model ODE integration failed: {sol.message}")
    dense = sol.sol
    return ModelTrajectory(nu=nu, x0=x0, times=sol.t, values=sol.y[0], _dense=lambda t: dense(t)[0])


def e1_growth_fit(e: EnergyTrace, window: tuple[float, float]) -> float:
    """Least-squares slope of ``ln E1`` against ``ln t`` on a time window.

    Samples are weighted so every decade of ``t`` carries the same total
    weight, which keeps linear-grid tails from dominating geometric heads.
    """
    t_lo, t_hi = window
    t = np.asarray(e.times, dtype=float)
    v = np.asarray(e.e1, dtype=float)
    keep = (t >= t_lo) & (t <= t_hi) & (t > 0) & (v > 0)
    if keep.sum() < 2:
        raise ValueError("window contains fewer than two usable samples")
    lt, lv = np.log(t[keep]), np.log(v[keep])
    decade = np.floor(lt / np.log(10.0)).astype(int)
    counts = {d: int((decade == d).sum()) for d in np.unique(decade)}
    w = np.array([1.0 / counts[d] for d in decade])
    lt_bar = np.average(lt, weights=w)
    lv_bar = np.average(lv, weights=w)
    denom = np.average((lt - lt_bar) ** 2, weights=w)
    if denom == 0.0:
        raise ValueError("degenerate window: all samples at one time")
    return float(np.average((lt - lt_bar) * (lv - lv_bar), weights=w) / denom)


def _fit_constant_positive_slope(t, v, slope):
    """Smallest C with v <= C * t**slope on the samples."""
    keep = (t > 0) & (v > 0)
    return float(np.max(v[keep] / t[keep] ** slope)) if keep.any() else 0.0


@dataclass(frozen=True)
class ModelEnergyReport:
    """Outcome of the three-step monotone-energy argument on a pair."""

    nu: float
    alpha: float
    eps: float
    lower_bound_ok: bool
    lower_bound_margin: float
    comparison_bound_ok: bool
    growth_slope: float
    growth_constant: float
    monotone_ok: bool
    max_weighted_increment: float

    @property
    def all_ok(self) -> bool:
        return self.lower_bound_ok and self.comparison_bound_ok and self.monotone_ok


def model_energy_demo(
    nu: float,
    alpha: float,
    eps: float,
    pair,
    t_grid: np.ndarray | None = None,
    fit_window: tuple[float, float] | None = None,
    monotone_slack: float = 1e-10,
) -> ModelEnergyReport:
    """Run the three verification steps on a pair of model trajectories.

    Step 1: each trajectory dominates the slowed closed-form envelope
    ``[rate*(1-eps)*t]**(nu/(2nu-1))``.  Step 2: the energy ``|x1 - x2|``
    stays below the exact comparison solution of ``dE/dt = E**(1/nu-1)``
    started at ``E(0)``, and the growth law itself is materialized by the
    log-log slope of the trajectory started nearest zero.  Step 3: the
    weighted energy ``t**(-alpha)|x1 - x2|`` never increases beyond the
    stated slack.

    ``alpha`` must lie in the window where step 3 provably holds,
    ``(1-nu)/((2nu-1)(1-eps)) <= alpha < nu/(2nu-1)``; note this model
    window differs from the weight exponent used for the flow energy.
    """
    lo = (1.0 - nu) / ((2.0 * nu - 1.0) * (1.0 - eps))
    hi = nu / (2.0 * nu - 1.0)
    if not lo <= alpha < hi:
        raise ValueError(f"alpha={alpha} outside the admissible window [{lo:.6g}, {hi:.6g})")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")

    x1, x2 = pair
    if t_grid is None:
        horizon = min(float(np.max(x1.times)), float(np.max(x2.times)))
        t_grid = np.geomspace(1e-6 * horizon, horizon, 600)
    t = np.asarray(t_grid, dtype=float)
    v1 = np.asarray(x1.value(t) if hasattr(x1, "value") else x1.at(t))
    v2 = np.asarray(x2.value(t) if hasattr(x2, "value") else x2.at(t))

    rate = (2.0 * nu - 1.0) / nu
    expo = nu / (2.0 * nu - 1.0)

    # Step 1: slowed-envelope lower bound for both members.
    envelope = (rate * (1.0 - eps) * t) ** expo
    margin = np.min(np.minimum(v1, v2) - envelope)
    lower_ok = bool(margin >= -1e-12 * (1.0 + np.max(envelope)))

    # Step 2: exact comparison bound for the energy, started at E(0).
    diff = np.abs(v1 - v2)
    e0 = float(
        abs(
            (x1.value(0.0) if hasattr(x1, "value") else x1.at(0.0))
            - (x2.value(0.0) if hasattr(x2, "value") else x2.at(0.0))
        )
    )
    comparison = (e0 ** (1.0 / expo) + rate * t) ** expo
    comparison_ok = bool(np.all(diff <= comparison * (1.0 + 1e-9) + 1e-14))

    # Growth law: slope of the trajectory nearest the degenerate start.
    grower = v1 if v1[-1] <= v2[-1] else v2
    growth = EnergyTrace(times=t, e1=grower)
    if fit_window is None:
        fit_window = (float(t[-1]) * 1e-2, float(t[-1]))
    slope = e1_growth_fit(growth, fit_window)
    c_growth = _fit_constant_positive_slope(t, grower, expo)

    # Step 3: the weighted energy must be nonincreasing.
    pos = t > 0
    weighted = t[pos] ** (-alpha) * diff[pos]
    increments = np.diff(weighted)
    max_inc = float(np.max(increments)) if increments.size else 0.0
    monotone_ok = bool(max_inc <= monotone_slack * max(np.max(weighted), 1e-300))

    return ModelEnergyReport(
        nu=nu,
        alpha=alpha,
        eps=eps,
        lower_bound_ok=lower_ok,
        lower_bound_margin=float(margin),
        comparison_bound_ok=comparison_ok,
        growth_slope=float(slope),
        growth_constant=c_growth,
        monotone_ok=monotone_ok,
        max_weighted_increment=max_inc,
    )
