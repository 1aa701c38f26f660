"""Initial vorticity profiles and their particle discretizations.

Admissible initial data is nonnegative, integrable and bounded, with
support on the corner side of the angle bisector (argument between 0 and
``nu*pi/2``).  Construction is permissive so that deliberately
non-compliant profiles can be built for probes and negative tests;
`validate_assumptions` reports violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import sector_power

_KINDS = ("uniform-annular-sector", "truncated-gaussian", "custom-grid")


class EmptyEnsembleError(ValueError):
    """No grid cell intersects the vorticity support."""


class DiscretizationError(ValueError):
    """Particle weights fail the mass-consistency invariant."""


@dataclass(frozen=True)
class InitialVorticity:
    """A parametric vorticity profile with known norms and support box.

    Use the factory functions (`annular_sector`, `half_sector_patch`,
    `truncated_gaussian`, `custom_grid`) rather than the constructor.
    """

    kind: str
    params: dict
    sup_norm: float
    l1_norm: float

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown vorticity kind {self.kind!r}")

    def value(self, z):
        arr = np.asarray(z, dtype=complex)
        pr = self.params
        if self.kind == "uniform-annular-sector":
            r = np.abs(arr)
            theta = np.angle(arr)
            inside = (
                (r >= pr["r_inner"])
                & (r <= pr["r_outer"])
                & (theta >= pr["theta_min"] - 1e-15)
                & (theta <= pr["theta_max"] + 1e-15)
            )
            out = np.where(inside, pr["amplitude"], 0.0)
        elif self.kind == "truncated-gaussian":
            d2 = np.abs(arr - pr["center"]) ** 2
            out = np.where(
                d2 <= pr["cutoff"] ** 2,
                pr["amplitude"] * np.exp(-d2 / (2.0 * pr["sigma"] ** 2)),
                0.0,
            )
        else:  # custom-grid
            vals, origin, cell = pr["values"], pr["origin"], pr["cell"]
            ix = np.floor((arr.real - origin.real) / cell).astype(int)
            iy = np.floor((arr.imag - origin.imag) / cell).astype(int)
            ny, nx = vals.shape
            ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
            out = np.zeros(arr.shape)
            out[ok] = vals[iy[ok], ix[ok]]
        return float(out) if np.ndim(z) == 0 else out

    def bbox(self) -> tuple[float, float, float, float]:
        """Cartesian bounding box (xmin, xmax, ymin, ymax) of the support."""
        pr = self.params
        if self.kind == "uniform-annular-sector":
            thetas = np.linspace(pr["theta_min"], pr["theta_max"], 181)
            corners = np.concatenate(
                [pr["r_inner"] * np.exp(1j * thetas), pr["r_outer"] * np.exp(1j * thetas)]
            )
            return (
                float(corners.real.min()),
                float(corners.real.max()),
                float(corners.imag.min()),
                float(corners.imag.max()),
            )
        if self.kind == "truncated-gaussian":
            c, R = pr["center"], pr["cutoff"]
            return (c.real - R, c.real + R, c.imag - R, c.imag + R)
        vals, origin, cell = pr["values"], pr["origin"], pr["cell"]
        ny, nx = vals.shape
        return (origin.real, origin.real + nx * cell, origin.imag, origin.imag + ny * cell)

    def polar_bbox(self) -> tuple[float, float, float, float]:
        """Polar bounding box (r_min, r_max, theta_min, theta_max) of the support."""
        pr = self.params
        if self.kind == "uniform-annular-sector":
            return (pr["r_inner"], pr["r_outer"], pr["theta_min"], pr["theta_max"])
        xmin, xmax, ymin, ymax = self.bbox()
        corners = np.array([xmin + 1j * ymin, xmin + 1j * ymax, xmax + 1j * ymin, xmax + 1j * ymax])
        r_hi = float(np.abs(corners).max())
        if self.kind == "truncated-gaussian":
            c, R = pr["center"], pr["cutoff"]
            r_lo = max(abs(c) - R, 0.0)
            if abs(c) > R:
                half = np.arcsin(R / abs(c))
                return (r_lo, abs(c) + R, np.angle(c) - half, np.angle(c) + half)
            return (0.0, abs(c) + R, -np.pi, np.pi)
        angles = np.angle(corners[np.abs(corners) > 0])
        r_lo = 0.0 if (xmin <= 0 <= xmax and ymin <= 0 <= ymax) else float(
            max(np.hypot(max(xmin, 0, -xmax), max(ymin, 0, -ymax)), 0.0)
        )
        return (r_lo, r_hi, float(angles.min(initial=0.0)), float(angles.max(initial=np.pi)))


def annular_sector(
    r_inner: float, r_outer: float, theta_min: float, theta_max: float, amplitude: float = 1.0
) -> InitialVorticity:
    if not 0 <= r_inner < r_outer:
        raise ValueError("need 0 <= r_inner < r_outer")
    if theta_min >= theta_max:
        raise ValueError("need theta_min < theta_max")
    l1 = abs(amplitude) * (theta_max - theta_min) * (r_outer**2 - r_inner**2) / 2.0
    return InitialVorticity(
        kind="uniform-annular-sector",
        params=dict(
            r_inner=r_inner, r_outer=r_outer, theta_min=theta_min, theta_max=theta_max, amplitude=amplitude
        ),
        sup_norm=abs(amplitude),
        l1_norm=0.0 if amplitude == 0 else l1,
    )


def half_sector_patch(nu: float, r_inner: float, r_outer: float, amplitude: float = 1.0) -> InitialVorticity:
    """Uniform patch on the bisector side of the corner: arg in [0, nu*pi/2]."""
    return annular_sector(r_inner, r_outer, 0.0, nu * np.pi / 2.0, amplitude)


def truncated_gaussian(center: complex, sigma: float, cutoff: float, amplitude: float = 1.0) -> InitialVorticity:
    if sigma <= 0 or cutoff <= 0:
        raise ValueError("sigma and cutoff must be positive")
    l1 = abs(amplitude) * 2.0 * np.pi * sigma**2 * (1.0 - np.exp(-(cutoff**2) / (2.0 * sigma**2)))
    return InitialVorticity(
        kind="truncated-gaussian",
        params=dict(center=complex(center), sigma=sigma, cutoff=cutoff, amplitude=amplitude),
        sup_norm=abs(amplitude),
        l1_norm=l1,
    )


def custom_grid(values: np.ndarray, origin: complex, cell: float) -> InitialVorticity:
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2:
        raise ValueError("values must be a 2-d array")
    return InitialVorticity(
        kind="custom-grid",
        params=dict(values=vals, origin=complex(origin), cell=float(cell)),
        sup_norm=float(np.abs(vals).max(initial=0.0)),
        l1_norm=float(np.abs(vals).sum() * cell**2),
    )


@dataclass(frozen=True)
class VortexEnsemble:
    """Immutable particle discretization of a vorticity profile.

    Positions are stored both in corner-domain coordinates and in the
    half-plane coordinates used for time stepping; the two are consistent
    under the power map by construction.  Circulations carry the
    vorticity-times-area weights and are never mutated.
    """

    nu: float
    positions_omega: np.ndarray
    positions_h: np.ndarray
    circulations: np.ndarray
    cell_size: float

    def __post_init__(self):
        for name in ("positions_omega", "positions_h", "circulations"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        if not (len(self.positions_omega) == len(self.positions_h) == len(self.circulations)):
            raise ValueError("field lengths disagree")
        err = np.abs(self.positions_h - sector_power(self.positions_omega, 1.0 / self.nu))
        if self.positions_h.size and np.max(err / (1.0 + np.abs(self.positions_h))) > 1e-12:
            raise ValueError("half-plane coordinate cache is inconsistent")

    def __len__(self) -> int:
        return len(self.circulations)

    @property
    def total_circulation(self) -> float:
        return float(np.sum(self.circulations))

    @classmethod
    def from_positions(cls, nu: float, positions, circulations, cell_size: float = 0.0) -> "VortexEnsemble":
        z = np.asarray(positions, dtype=complex).copy()
        return cls(
            nu=nu,
            positions_omega=z,
            positions_h=np.asarray(sector_power(z, 1.0 / nu), dtype=complex),
            circulations=np.asarray(circulations, dtype=float).copy(),
            cell_size=cell_size,
        )

    def with_halfplane_positions(self, y: np.ndarray) -> "VortexEnsemble":
        """Same particles at new half-plane positions (used by the stepper)."""
        y = np.asarray(y, dtype=complex).copy()
        return VortexEnsemble(
            nu=self.nu,
            positions_omega=np.asarray(sector_power(y, self.nu), dtype=complex),
            positions_h=y,
            circulations=self.circulations,
            cell_size=self.cell_size,
        )


def discretize(w0: InitialVorticity, h: float, nu: float) -> VortexEnsemble:
    """Cell-centered midpoint discretization on a grid of spacing ``h``.

    One particle per grid cell whose center carries positive vorticity,
    with circulation ``value * h**2``.  A particle exactly at the corner
    would make the kernel degenerate and is dropped (measure zero).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    xmin, xmax, ymin, ymax = w0.bbox()
    nx = max(int(np.ceil((xmax - xmin) / h)), 1)
    ny = max(int(np.ceil((ymax - ymin) / h)), 1)
    xs = xmin + (np.arange(nx) + 0.5) * h
    ys = ymin + (np.arange(ny) + 0.5) * h
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    vals = w0.value(zz)
    keep = (vals > 0.0) & (zz != 0.0)
    if not np.any(keep):
        raise EmptyEnsembleError("no grid cell intersects the vorticity support")
    ens = VortexEnsemble.from_positions(nu, zz[keep], vals[keep] * h * h, cell_size=h)
    mass = float(np.sum(np.abs(ens.circulations)))
    if w0.l1_norm > 0 and not 0.95 * w0.l1_norm <= mass <= 1.05 * w0.l1_norm:
        raise DiscretizationError(
            f"discrete mass {mass:.6g} outside 5% of the continuum mass {w0.l1_norm:.6g}; refine h"
        )
    return ens


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)
    sup_norm: float = 0.0
    l1_norm: float = 0.0


def validate_assumptions(w0: InitialVorticity, nu: float, n_samples: int = 400) -> ValidationReport:
    """Check nonnegativity, bisector-side support and finite norms.

    Report-style: violations are listed, nothing raises.
    """
    violations = []
    xmin, xmax, ymin, ymax = w0.bbox()
    xs = np.linspace(xmin, xmax, n_samples)
    ys = np.linspace(ymin, ymax, n_samples)
    zz = (xs[None, :] + 1j * ys[:, None]).ravel()
    vals = w0.value(zz)
    if np.any(vals < 0.0):
        violations.append(f"negative values down to {vals.min():.6g}")
    supported = zz[vals > 0.0]
    if supported.size:
        ang = np.angle(supported)
        half = nu * np.pi / 2.0
        bad = (ang < -1e-12) | (ang > half + 1e-12)
        if np.any(bad):
            violations.append(
                f"{int(bad.sum())} sampled support points leave the bisector-side sector [0, {half:.6g}]"
            )
    if not np.isfinite(w0.sup_norm):
        violations.append("sup norm not finite")
    if not np.isfinite(w0.l1_norm):
        violations.append("L1 norm not finite")
    return ValidationReport(ok=not violations, violations=violations, sup_norm=w0.sup_norm, l1_norm=w0.l1_norm)
