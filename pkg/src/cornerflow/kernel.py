"""Biot-Savart kernels on the corner domain and particle field evaluation.

The Green's function of any conformal image of the half plane gives the
velocity kernel

    K(z1, z2) = (i/2pi) conj(Psi'(z1)) [ 1/(conj(Psi(z1)) - conj(Psi(z2)))
                                       - 1/(conj(Psi(z1)) -      Psi(z2)) ],

a free-space pole plus its boundary image in mapped coordinates.  Particle
sums replace each reciprocal by its blob-regularized form
``1/a -> conj(a)/(|a|^2 + delta^2)``, which desingularizes coincident pairs
while leaving the image structure (and hence wall tangency) intact.

Summation contract: sources are reduced in fixed index order through
fixed-size blocks (plain pairwise inside a block, compensated combination
across blocks), so results are bit-identical for any worker count and a
given block size.  Worker threads only split the *target* axis.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import WedgeParams, map_derivative, map_to_halfplane, sector_power
from .report import BoundCheckReport, ratio_report

WORKER_ENV = "CORNERFLOW_WORKERS"
_TARGET_CHUNK = 512

_worker_override: int | None = None


class SingularEvaluationError(ValueError):
    """Unregularized evaluation exactly at a particle position."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def set_worker_count(n: int | None) -> None:
    """Set the evaluation worker count (None = fall back to the env var)."""
    global _worker_override
    _worker_override = None if n is None else max(int(n), 1)


def worker_count() -> int:
    if _worker_override is not None:
        return _worker_override
    return max(int(os.environ.get(WORKER_ENV, "1")), 1)


@dataclass(frozen=True)
class KernelConfig:
    """Regularization and reduction parameters.

    ``blob_delta`` is the blob scale (0 = singular kernel); when it is 0,
    evaluation points must not coincide with particles.  ``self_interaction``
    controls whether the free-space diagonal term is kept in aligned
    (ensemble-on-itself) evaluations; it is identically zero under the blob
    regularization and undefined without it.  ``sum_block`` is the reduction
    block size entering the determinism contract.
    """

    blob_delta: float = 0.0
    self_interaction: bool = False
    sum_block: int = 256

    def __post_init__(self):
        if self.blob_delta < 0:
            raise ValueError("blob_delta must be nonnegative")
        if self.sum_block < 1:
            raise ValueError("sum_block must be at least 1")


def default_blob_delta(h: float) -> float:
    """Blob scale ``h**0.9``: vanishes slower than the grid spacing."""
    return h**0.9


def _neumaier_add(sum_, comp, term):
    """One compensated accumulation step, componentwise on real/imag."""
    for part in ("real", "imag"):
        s, c, t = getattr(sum_, part), getattr(comp, part), getattr(term, part)
        new = s + t
        big = np.abs(s) >= np.abs(t)
        c += np.where(big, (s - new) + t, (t - new) + s)
        s[...] = new


def _field_chunk(targets, sources, gamma, delta, block, aligned, include_self):
    """b-field partial sums for one chunk of targets."""
    m = targets.shape[0]
    delta2 = delta * delta
    acc = np.zeros(m, dtype=complex)
    comp = np.zeros(m, dtype=complex)
    tbar = np.conj(targets)[:, None]
    n_src = sources.shape[0]
    for j0 in range(0, n_src, block):
        j1 = min(j0 + block, n_src)
        s = sources[j0:j1][None, :]
        a1 = tbar - np.conj(s)
        n1 = a1.real**2 + a1.imag**2 + delta2
        if delta == 0.0:
            hit = n1 == 0.0
            if hit.any():
                if not aligned or include_self:
                    raise SingularEvaluationError(
                        "evaluation point coincides with a particle and blob_delta = 0"
                    )
                n1 = np.where(hit, 1.0, n1)
                term1 = np.where(hit, 0.0, np.conj(a1) / n1)
            else:
                term1 = np.conj(a1) / n1
        else:
            term1 = np.conj(a1) / n1
        a2 = tbar - s
        term2 = np.conj(a2) / (a2.real**2 + a2.imag**2 + delta2)
        contrib = (term1 - term2) * gamma[j0:j1][None, :]
        _neumaier_add(acc, comp, contrib.sum(axis=1))
    return (0.5j / np.pi) * (acc + comp)


def induced_bfield(targets, sources, gamma, config: KernelConfig, aligned: bool = False):
    """The mapped-coordinate field ``b`` at ``targets`` induced by particles.

    ``b(t) = (i/2pi) sum_j Gamma_j [ R(conj(t) - conj(s_j)) - R(conj(t) - s_j) ]``
    with ``R`` the blob-regularized reciprocal.  ``aligned=True`` declares
    that the targets *are* the source particles, which drops the singular
    free-space diagonal when the kernel is unregularized.
    """
    targets = np.asarray(targets, dtype=complex)
    sources = np.asarray(sources, dtype=complex)
    gamma = np.asarray(gamma, dtype=float)
    out = np.empty(targets.shape[0], dtype=complex)
    chunks = [(i, min(i + _TARGET_CHUNK, targets.shape[0])) for i in range(0, targets.shape[0], _TARGET_CHUNK)]

    def run(bounds):
        i0, i1 = bounds
        out[i0:i1] = _field_chunk(
            targets[i0:i1],
            sources,
            gamma,
            config.blob_delta,
            config.sum_block,
            aligned,
            config.self_interaction,
        )

    workers = worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    else:
        for bounds in chunks:
            run(bounds)
    return out


def mapped_positions(ens, p: WedgeParams):
    """Source positions in the half-plane coordinates of the map for ``p``."""
    if p.eps == 0.0:
        return ens.positions_h
    return np.asarray(map_to_halfplane(ens.positions_omega, p), dtype=complex)


def kernel_eval(z1, z2, p: WedgeParams) -> complex:
    """Velocity at ``z1`` induced by a unit point circulation at ``z2``."""
    if np.any(np.asarray(z1) == np.asarray(z2)):
        raise SingularEvaluationError("kernel is singular on the diagonal")
    w1 = map_to_halfplane(z1, p)
    w2 = map_to_halfplane(z2, p)
    pole = 1.0 / (np.conj(w1) - np.conj(w2))
    image = 1.0 / (np.conj(w1) - w2)
    out = (0.5j / np.pi) * np.conj(map_derivative(z1, p)) * (pole - image)
    return complex(out) if np.ndim(z1) == 0 and np.ndim(z2) == 0 else out


def b_eval(ens, z, p: WedgeParams, config: KernelConfig):
    """The circulation-weighted pole sum ``b`` at probe points ``z``."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    targets = np.asarray(map_to_halfplane(arr, p), dtype=complex)
    vals = induced_bfield(targets, mapped_positions(ens, p), ens.circulations, config)
    return complex(vals[0]) if np.ndim(z) == 0 else vals


def velocity(ens, z, p: WedgeParams, config: KernelConfig):
    """Velocity at probe points ``z``: ``u = b(z) * conj(Psi'(z))``."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    vals = b_eval(ens, arr, p, config) * np.conj(np.atleast_1d(map_derivative(arr, p)))
    return complex(vals[0]) if np.ndim(z) == 0 else vals


def bfield_at_particles(ens, p: WedgeParams, config: KernelConfig):
    """Self-consistent ``b`` at the particles themselves (aligned evaluation)."""
    src = mapped_positions(ens, p)
    return induced_bfield(src, src, ens.circulations, config, aligned=True)


# ----------------------------------------------------------------------
# Corner value of b
# ----------------------------------------------------------------------


def _refine_midpoint(values_fn, bounds, rel_tol, max_level, order=2.0, n0=16):
    """Midpoint product rule with dyadic refinement and Richardson stop."""
    (a, b), (c, d) = bounds
    prev = None
    n = n0
    for _ in range(max_level):
        xs = a + (np.arange(n) + 0.5) * (b - a) / n
        ys = c + (np.arange(n) + 0.5) * (d - c) / n
        total = float(np.sum(values_fn(xs[:, None], ys[None, :]))) * (b - a) * (d - c) / (n * n)
        if prev is not None:
            err = abs(total - prev) / (2.0**order - 1.0)
            if err <= rel_tol * max(abs(total), 1e-300):
                return total
        prev = total
        n *= 2
    raise QuadratureError("midpoint refinement stalled before reaching tolerance")


def b_zero(w0, nu: float, rel_tol: float = 1e-6) -> float:
    """Corner value of ``b`` for the initial vorticity, by half-plane quadrature.

    ``b(0) = (nu^2/pi) * integral over the half plane of Im(s) w0(s^nu)
    |s|^(2nu-4) ds``; in polar coordinates the integrand is
    ``rho^(2nu-2) sin(phi) * w0``, integrable at the corner for nu > 1/2.
    Positive whenever the vorticity is nonnegative and not identically zero.
    """
    if w0.l1_norm == 0.0:
        return 0.0
    r_lo, r_hi, th_lo, th_hi = w0.polar_bbox()
    rho = (r_lo ** (1.0 / nu), r_hi ** (1.0 / nu))
    phi_b = (max(th_lo, 0.0) / nu, min(th_hi / nu, np.pi))

    def integrand(rho_g, phi_g):
        s = rho_g * np.exp(1j * phi_g)
        return rho_g ** (2.0 * nu - 2.0) * np.sin(phi_g) * w0.value(sector_power(s, nu))

    val = _refine_midpoint(integrand, (rho, phi_b), rel_tol, max_level=14)
    return (nu * nu / np.pi) * val


def b_zero_wedge_midpoint(w0, nu: float, rel_tol: float = 1e-6) -> float:
    """Corner value of ``b`` by change of variables back to the wedge.

    Independent evaluation route kept for cross-checking `b_zero`:
    ``b(0) = (1/pi) * integral of sin(theta/nu) r^(1 - 1/nu) w0`` in wedge
    polar coordinates.
    """
    if w0.l1_norm == 0.0:
        return 0.0
    r_lo, r_hi, th_lo, th_hi = w0.polar_bbox()

    def integrand(r_g, th_g):
        z = r_g * np.exp(1j * th_g)
        return np.sin(th_g / nu) * r_g ** (1.0 - 1.0 / nu) * w0.value(z)

    val = _refine_midpoint(integrand, ((r_lo, r_hi), (max(th_lo, 0.0), th_hi)), rel_tol, max_level=14)
    return val / np.pi


# ----------------------------------------------------------------------
# Velocity-estimate probes
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PolarRegion:
    """Annular-sector sampling region, compactly inside the open wedge."""

    r_min: float
    r_max: float
    theta_min: float
    theta_max: float

    def sample(self, rng, n: int):
        r = np.sqrt(rng.uniform(self.r_min**2, self.r_max**2, n))
        th = rng.uniform(self.theta_min, self.theta_max, n)
        return r * np.exp(1j * th)


def ensemble_norms(ens) -> tuple[float, float]:
    """(L1, sup) norms of the vorticity as seen by the discretization."""
    l1 = float(np.sum(np.abs(ens.circulations)))
    sup = float(np.max(np.abs(ens.circulations)) / ens.cell_size**2) if len(ens) and ens.cell_size > 0 else 0.0
    return l1, sup


def log_lipschitz_probe(
    ens,
    region: PolarRegion,
    p: WedgeParams,
    config: KernelConfig,
    n_pairs: int = 10_000,
    seed: int = 0,
    norm: float | None = None,
) -> BoundCheckReport:
    """Interior modulus-of-continuity sweep for the induced velocity.

    Ratio of ``|u(z1) - u(z2)|`` against
    ``norm * (phi(|z1-z2|) + |z1-z2| min(|z1|,|z2|)**(1/nu - 2))`` over
    random pairs in the region; two sample densities must give fitted
    constants within a factor 2.
    """
    from .energy import phi as _phi

    if norm is None:
        l1, sup = ensemble_norms(ens)
        norm = l1 + sup
    sets = []
    for k, count in enumerate((n_pairs, 2 * n_pairs)):
        rng = np.random.default_rng(seed + k)
        z1 = region.sample(rng, count)
        z2 = region.sample(rng, count)
        keep = np.abs(z1 - z2) > 0
        z1, z2 = z1[keep], z2[keep]
        u1 = velocity(ens, z1, p, config)
        u2 = velocity(ens, z2, p, config)
        sep = np.abs(z1 - z2)
        weight = _phi(sep) + sep * np.minimum(np.abs(z1), np.abs(z2)) ** (1.0 / p.nu - 2.0)
        denom = norm * weight
        sets.append(np.abs(u1 - u2) / denom if norm > 0 else np.zeros(z1.shape))
    return ratio_report(
        "velocity-interior-log-lipschitz",
        sets,
        params={"n_pairs": n_pairs, "seed": seed, "nu": p.nu, "eps": p.eps,
                "region": [region.r_min, region.r_max, region.theta_min, region.theta_max]},
    )


def velocity_bound_probe(
    ens, p: WedgeParams, config: KernelConfig, n_probes: int = 500, seed: int = 0, norm: float | None = None
) -> BoundCheckReport:
    """Uniform velocity bound sweep: ``sup |u| <= C * (L1 + sup) norm``."""
    if norm is None:
        l1, sup = ensemble_norms(ens)
        norm = l1 + sup
    sets = []
    r_hi = 2.0 * float(np.max(np.abs(ens.positions_omega))) if len(ens) else 1.0
    region = PolarRegion(1e-3 * r_hi, r_hi, 1e-6, p.angle - 1e-6)
    for k in (0, 1):
        rng = np.random.default_rng(seed + k)
        z = region.sample(rng, n_probes)
        u = velocity(ens, z, p, config)
        sets.append(np.abs(u) / norm if norm > 0 else np.zeros(n_probes))
    return ratio_report(
        "velocity-uniform-bound", sets, params={"n_probes": n_probes, "seed": seed, "nu": p.nu, "eps": p.eps}
    )


def decay_probe(
    ens, p: WedgeParams, config: KernelConfig, radii=(5.0, 10.0, 20.0, 40.0), n_angles: int = 64
) -> BoundCheckReport:
    """Far-field decay sweep: circle maxima nonincreasing and O(1/R)."""
    l1 = float(np.sum(np.abs(ens.circulations)))
    sups = []
    for R in radii:
        th = np.linspace(1e-3, p.angle - 1e-3, n_angles)
        z = R * np.exp(1j * th)
        sups.append(float(np.max(np.abs(velocity(ens, z, p, config)))))
    violations = [
        f"circle max increased from R={radii[k]} to R={radii[k + 1]}"
        for k in range(len(radii) - 1)
        if sups[k + 1] > sups[k] * (1 + 1e-12)
    ]
    ratios = np.array([s * R / l1 for s, R in zip(sups, radii)]) if l1 > 0 else np.zeros(len(radii))
    return ratio_report(
        "velocity-far-field-decay",
        [ratios],
        params={"radii": list(radii), "circle_maxima": sups},
        violations=violations,
    )


def kernel_bound_sweep(
    p: WedgeParams, n_pairs: int = 10_000, seed: int = 0, r_lo: float = 1e-3, r_hi: float = 10.0
) -> BoundCheckReport:
    """Pointwise kernel bound sweep: ``|K(z1,z2)| * |z1 - z2|`` bounded.

    Pairs are drawn from the smoothed domain when ``eps > 0``; the fitted
    constant must be stable between two seeds.
    """
    sets = []
    for k in (0, 1):
        rng = np.random.default_rng(seed + k)
        if p.eps == 0.0:
            r = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), (2, n_pairs)))
            th = rng.uniform(1e-9, p.angle - 1e-9, (2, n_pairs))
            z1, z2 = r * np.exp(1j * th)
        else:
            # the smoothed domain is the nu-power image of the half-plane ball
            rad = np.sqrt(rng.uniform(0.0, 1.0, (2, n_pairs))) * p.ball_radius * (1 - 1e-9)
            ang = rng.uniform(0.0, 2 * np.pi, (2, n_pairs))
            w = p.ball_center + rad * np.exp(1j * ang)
            z1 = np.asarray(sector_power(w[0], p.nu), dtype=complex)
            z2 = np.asarray(sector_power(w[1], p.nu), dtype=complex)
        keep = np.abs(z1 - z2) > 1e-12
        z1, z2 = z1[keep], z2[keep]
        kv = kernel_eval(z1, z2, p)
        sets.append(np.abs(kv) * np.abs(z1 - z2))
    return ratio_report(
        "kernel-pointwise-bound", sets, params={"n_pairs": n_pairs, "seed": seed, "nu": p.nu, "eps": p.eps}
    )
