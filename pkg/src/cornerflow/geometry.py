"""Conformal maps between the corner domain and the upper half plane.

The physical domain is the infinite sector of opening angle ``nu*pi`` with
``1/2 < nu < 1``, i.e. an obtuse corner at the origin.  For ``eps > 0`` the
corner is replaced by a smooth bounded approximating domain obtained by
pushing a disc through the power map; its Riemann map onto the upper half
plane has a closed form (a Moebius transform composed with the power map)
which is implemented here together with its derivative.

All complex powers use the branch with argument in ``[0, 2*pi)``, which is
continuous on the closed sector and on the closed upper half plane.  The
principal branch would put its cut across the image of the upper wedge edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Angular slack used for containment checks.  Points produced by the maps
# themselves land within a few ulp of the closed sector.
ANGLE_TOL = 1e-9


class DomainError(ValueError):
    """Raised when a point lies outside the domain of a map."""


@dataclass(frozen=True)
class WedgeParams:
    """Corner-domain parameters.

    ``nu`` is the opening-angle factor (angle = ``nu*pi``) and ``eps`` the
    smoothing parameter; ``eps = 0`` is the sharp corner.  The simulator
    requires ``1/2 < nu < 1``; the endpoint ``nu = 1`` (the half plane
    itself) is admitted so the kernel reduction probe can exercise the
    analytic continuation of the formulas.
    """

    nu: float
    eps: float = 0.0

    def __post_init__(self) -> None:
        if not 0.5 < self.nu <= 1.0:
            raise ValueError(f"nu must lie in (1/2, 1], got {self.nu}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")

    @property
    def angle(self) -> float:
        """Opening angle of the sector."""
        return self.nu * np.pi

    @property
    def bisector(self) -> float:
        """Argument of the angle bisector."""
        return 0.5 * self.nu * np.pi

    @property
    def c_eps(self) -> complex:
        """Pole location ``i*(eps + 1/eps)`` of the smoothed map (eps > 0)."""
        if self.eps == 0.0:
            raise ValueError("c_eps is undefined for eps = 0")
        return 1j * (self.eps + 1.0 / self.eps)

    @property
    def ball_center(self) -> complex:
        """Center of the half-plane image ball of the smoothed domain."""
        if self.eps == 0.0:
            raise ValueError("image ball is undefined for eps = 0")
        return 1j * (self.eps + 0.5 / self.eps)

    @property
    def ball_radius(self) -> float:
        if self.eps == 0.0:
            raise ValueError("image ball is undefined for eps = 0")
        return 0.5 / self.eps


def _as_complex(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def sector_power(z, a: float):
    """``z**a`` with the branch ``arg(z) in [0, 2*pi)``.

    Continuous on the closed sector ``0 <= arg(z) <= nu*pi`` and on the
    closed upper half plane for every exponent used here.  ``0**a = 0``
    for ``a > 0``; raises for ``a <= 0`` at the origin.
    """
    arr, scalar = _as_complex(z)
    if a <= 0.0 and np.any(arr == 0.0):
        raise DomainError("sector_power(0, a) undefined for a <= 0")
    arg = np.angle(arr)
    arg = np.where(arg < 0.0, arg + TWO_PI, arg)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(a * (np.log(np.abs(arr)) + 1j * arg))
    if a > 0.0:
        out = np.where(arr == 0.0, 0.0 + 0.0j, out)
    return complex(out) if scalar else out


def in_sector(z, p: WedgeParams, tol: float = ANGLE_TOL) -> np.ndarray:
    """True where ``z`` lies in the closed sector (angular slack ``tol``)."""
    arr, _ = _as_complex(z)
    ang = np.angle(arr)
    ok = (ang >= -tol) & (ang <= p.angle + tol)
    return ok | (arr == 0.0)


def in_smoothed_domain(z, p: WedgeParams, tol: float = 1e-9) -> np.ndarray:
    """True where ``z`` lies in the closed smoothed domain (eps > 0)."""
    arr, _ = _as_complex(z)
    w = sector_power(arr, 1.0 / p.nu)
    return np.abs(w - p.ball_center) <= p.ball_radius * (1.0 + tol) + tol


def map_to_halfplane(z, p: WedgeParams):
    """Riemann map of the (smoothed) corner domain onto the half plane.

    ``eps = 0``: the power map ``z**(1/nu)``.  ``eps > 0``: the power map
    followed by the Moebius transform ``w -> (w - i*eps)/(1 + eps^2 + i*eps*w)``.
    The Moebius-composed form is the best conditioned near the corner; the
    pole form (`map_to_halfplane_pole_form`) is preferable far from it.
    """
    arr, scalar = _as_complex(z)
    if not np.all(in_sector(arr, p)):
        raise DomainError("point outside the closed sector")
    w = sector_power(arr, 1.0 / p.nu)
    if p.eps == 0.0:
        out = w
    else:
        # The formula stays analytic on the whole sector minus the pole
        # preimage, so sector points outside the smoothed ball are allowed
        # (useful for evaluating the map's analytic continuation).
        e = p.eps
        out = (w - 1j * e) / (1.0 + e * e + 1j * e * w)
    return complex(out) if scalar else out


def map_to_halfplane_pole_form(z, p: WedgeParams):
    """Smoothed map written as ``-i/eps + 1/(eps^2 (z**(1/nu) - c(eps)))``.

    Algebraically identical to `map_to_halfplane`; kept as an independent
    evaluation route (cross-validated in tests) and for use far from the
    corner where the difference against the pole dominates.
    """
    if p.eps == 0.0:
        return map_to_halfplane(z, p)
    arr, scalar = _as_complex(z)
    w = sector_power(arr, 1.0 / p.nu)
    e = p.eps
    out = -1j / e + 1.0 / (e * e * (w - p.c_eps))
    return complex(out) if scalar else out


def map_from_halfplane(w, p: WedgeParams):
    """Inverse Riemann map, from the closed half plane into the domain."""
    arr, scalar = _as_complex(w)
    if np.any(np.imag(arr) < -ANGLE_TOL * (1.0 + np.abs(arr))):
        raise DomainError("point outside the closed half plane")
    if p.eps == 0.0:
        out = sector_power(arr, p.nu)
    else:
        e = p.eps
        out = sector_power(arr / (1.0 - 1j * e * arr) + 1j * e, p.nu)
    return complex(out) if scalar else out


def map_derivative(z, p: WedgeParams):
    """Derivative of `map_to_halfplane` at ``z``.

    ``eps = 0``: ``(1/nu) z**(1/nu - 1)``; the exponent lies in (0, 1) so
    the continuous extension at the corner is 0, which is what is returned.
    ``eps > 0``: ``-z**(1/nu - 1) / (nu eps^2 (z**(1/nu) - c(eps))**2)``.
    """
    arr, scalar = _as_complex(z)
    zero = arr == 0.0
    safe = np.where(zero, 1.0, arr)
    pw = sector_power(safe, 1.0 / p.nu - 1.0)
    if p.eps == 0.0:
        out = pw / p.nu
    else:
        w = sector_power(safe, 1.0 / p.nu)
        out = -pw / (p.nu * p.eps**2 * (w - p.c_eps) ** 2)
    out = np.where(zero, 0.0 + 0.0j, out)
    return complex(out) if scalar else out


def distance_to_boundary(z, p: WedgeParams):
    """Euclidean distance from ``z`` to the boundary of the sharp sector.

    The boundary consists of the two edges ``arg = 0`` and ``arg = nu*pi``
    meeting at the origin.  Distance to an edge is ``r*sin(delta)`` for
    angular offset ``delta <= pi/2``, and ``r`` otherwise (nearest boundary
    point is then the corner).
    """
    arr, scalar = _as_complex(z)
    r = np.abs(arr)
    theta = np.angle(arr)
    theta = np.where(theta < 0.0, theta + TWO_PI, theta)
    delta = np.minimum(theta, p.angle - theta)
    d = np.where(delta <= 0.5 * np.pi, r * np.sin(np.maximum(delta, 0.0)), r)
    return float(d) if scalar else d
