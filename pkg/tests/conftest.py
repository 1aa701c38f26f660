import numpy as np
import pytest

from cornerflow.geometry import WedgeParams, map_from_halfplane


def sample_halfplane(rng, n, r_lo=1e-3, r_hi=1e2, closed=False):
    """Log-uniform radii, uniform angles; closed=True includes the real axis."""
    r = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), n))
    lo = 0.0 if closed else 1e-6
    theta = rng.uniform(lo, np.pi - lo, n)
    return r * np.exp(1j * theta)


def sample_domain(rng, n, p: WedgeParams, r_lo=1e-3, r_hi=1e2):
    """Points of the (smoothed) corner domain, pushed forward from the half plane."""
    w = sample_halfplane(rng, n, r_lo, r_hi)
    return map_from_halfplane(w, p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
