import numpy as np
import pytest

from cornerflow.analysis import (
    DivergenceError,
    IntegralSpec,
    WeightFn,
    gronwall_phi_check,
    iest_reduction_check,
    iest_reduction_sweep,
    integral_I,
    integral_I_qmc,
    ithree_bound_check,
    itwo_bound_check,
    powers_inequality_check,
)

CONST = WeightFn(kind="const")


class TestIntegralI:
    def test_disk_area(self):
        spec = IntegralSpec(nodes=((0.0, 0.0),), weight=CONST, r=0.0, R=1.0)
        assert integral_I(spec) == pytest.approx(np.pi, rel=1e-6)

    def test_inverse_distance_disk(self):
        spec = IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=0.0, R=1.0)
        assert integral_I(spec) == pytest.approx(2 * np.pi, rel=1e-6)

    def test_fractional_order_closed_form(self):
        spec = IntegralSpec(nodes=((0.0, 0.5),), weight=CONST, r=0.0, R=2.0)
        want = 2 * np.pi * 2**1.5 / 1.5
        assert integral_I(spec) == pytest.approx(want, rel=1e-6)

    def test_annulus(self):
        spec = IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=0.5, R=1.0)
        assert integral_I(spec) == pytest.approx(np.pi, rel=1e-6)

    def test_monotone_in_outer_radius(self):
        vals = [
            integral_I(IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=0.0, R=R))
            for R in (0.5, 1.0, 2.0)
        ]
        assert vals[0] < vals[1] < vals[2]

    def test_antitone_in_inner_radius(self):
        vals = [
            integral_I(IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=r, R=1.0))
            for r in (0.0, 0.25, 0.5)
        ]
        assert vals[0] > vals[1] > vals[2]

    def test_linear_in_amplitude(self):
        f1 = WeightFn(kind="ball", amplitude=1.0, radius=1.5)
        f2 = WeightFn(kind="ball", amplitude=2.0, radius=1.5)
        spec1 = IntegralSpec(nodes=((0.1, 1.0), (0.3 + 0.2j, 0.7)), weight=f1)
        spec2 = IntegralSpec(nodes=((0.1, 1.0), (0.3 + 0.2j, 0.7)), weight=f2)
        assert integral_I(spec2) == pytest.approx(2 * integral_I(spec1), rel=1e-8)

    def test_qmc_cross_check(self):
        nu = 0.75
        f = WeightFn(kind="ball", amplitude=1.0, center=0.0, radius=2.0)
        spec = IntegralSpec(
            nodes=((0.0, 1 - nu), (0.3 + 0.1j, 1.0), (0.32 + 0.12j, 1.0)), weight=f
        )
        v = integral_I(spec)
        q = integral_I_qmc(spec, n=2_000_000, seed=1)
        assert abs(v - q) / v < 1e-3

    def test_two_scale_configuration(self):
        # close pair far from the corner node: the hierarchical split must
        # still converge and agree with the importance-sampled value
        f = WeightFn(kind="ball", amplitude=1.0, center=0.0, radius=2.0)
        spec = IntegralSpec(
            nodes=((0.0, 0.25), (0.7 + 0.1j, 1.0), (0.7 + 0.100001j, 1.0)), weight=f
        )
        v = integral_I(spec)
        q = integral_I_qmc(spec, n=4_000_000, seed=2)
        assert abs(v - q) / v < 2e-3

    def test_divergent_orders_rejected(self):
        with pytest.raises(DivergenceError):
            integral_I(IntegralSpec(nodes=((0.0, 2.0),), weight=CONST, r=0.0, R=1.0))
        with pytest.raises(DivergenceError):
            integral_I(IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=0.5, R=float("inf")))

    def test_const_weight_tail(self):
        # alpha_total > 2 with unbounded region: compare against the exact
        # radial integral 2*pi*int_r^inf rho^(1-3) drho = 2*pi/r
        spec = IntegralSpec(nodes=((0.0, 3.0),), weight=CONST, r=0.5, R=float("inf"))
        assert integral_I(spec) == pytest.approx(2 * np.pi / 0.5, rel=3e-4)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            IntegralSpec(nodes=((0.0, 1.0), (0.0, 0.5)), weight=CONST)
        with pytest.raises(ValueError):
            IntegralSpec(nodes=((0.0, -1.0),), weight=CONST)
        with pytest.raises(ValueError):
            IntegralSpec(nodes=((0.0, 1.0),), weight=CONST, r=2.0, R=1.0)


class TestGronwall:
    def test_moderate_regime(self):
        rep = gronwall_phi_check(c=0.8, R_bound=2.0, y0=0.3, T=2.0)
        assert rep.passed, rep.violations
        assert rep.max_ratio <= 1.0

    def test_near_exponential_regime(self):
        # -ln(y0) <= 1 and small c: the modulus acts like its linear branch
        rep = gronwall_phi_check(c=0.1, R_bound=3.0, y0=0.8, T=1.5)
        assert rep.passed, rep.violations

    def test_stationary_cap(self):
        rep = gronwall_phi_check(c=1.0, R_bound=1.5, y0=1.5, T=1.0)
        assert rep.passed, rep.violations

    def test_zero_rate(self):
        rep = gronwall_phi_check(c=0.0, R_bound=1.0, y0=0.4, T=1.0)
        assert rep.passed

    def test_deep_decay(self):
        rep = gronwall_phi_check(c=1.0, R_bound=1.0, y0=0.05, T=2.0)
        assert rep.passed, rep.violations


class TestPowers:
    @pytest.mark.parametrize("nu", [0.55, 0.75, 0.9])
    def test_fractional_exponents(self, nu):
        rep = powers_inequality_check(nu, n_samples=20_000, seed=0)
        assert rep.passed
        assert np.isfinite(rep.max_ratio)
        assert rep.stability_factor <= 2.0

    def test_integer_square_case(self):
        # |a^2 - b^2| = |a-b| |a+b| exactly; the max-form ratio is |a+b| over
        # the largest of |a|, |b|, |a-b|, bounded between 1/2 and 2 for
        # arguments confined to [0, pi/2)
        rng = np.random.default_rng(7)
        a = rng.uniform(0.1, 3, 200) * np.exp(1j * rng.uniform(0, np.pi / 2 - 1e-9, 200))
        b = rng.uniform(0.1, 3, 200) * np.exp(1j * rng.uniform(0, np.pi / 2 - 1e-9, 200))
        lhs = np.abs(a**2 - b**2)
        assert np.allclose(lhs, np.abs(a - b) * np.abs(a + b), rtol=1e-12)
        rep = powers_inequality_check(2.0, n_samples=5000, seed=1)
        assert rep.passed

    def test_rejects_trivial_exponent(self):
        with pytest.raises(ValueError):
            powers_inequality_check(1.0)


class TestIntegralBounds:
    def test_itwo_passes(self):
        rep = itwo_bound_check(n_configs=12, seed=3, rel_tol=1e-3)
        assert rep.passed, rep.violations
        assert rep.stability_factor <= 2.0

    def test_itwo_negative_control_fails(self):
        rep = itwo_bound_check(n_configs=12, seed=3, modulus="identity", rel_tol=1e-3)
        assert not rep.passed
        assert not np.isfinite(rep.max_ratio)

    def test_ithree_passes(self):
        rep = ithree_bound_check(0.75, n_configs=12, seed=3, rel_tol=1e-3)
        assert rep.passed, rep.violations

    def test_ithree_negative_control_fails(self):
        rep = ithree_bound_check(0.75, n_configs=12, seed=3, corner_weight="none", rel_tol=1e-3)
        assert not rep.passed
        assert not np.isfinite(rep.max_ratio)

    def test_iest_single_spec(self):
        f = WeightFn(kind="ball", amplitude=1.0, radius=2.0)
        spec = IntegralSpec(nodes=((0.0, 0.8), (0.05 + 0.02j, 0.9)), weight=f, r=0.0)
        rep = iest_reduction_check(spec)
        assert rep.passed
        assert rep.max_ratio <= 1.5  # the peeling bound holds with a modest constant

    def test_iest_log_edge(self):
        # merged order hits exactly 2 with r = d_min/2: the closed-form
        # inner integral is logarithmic and stays finite
        f = WeightFn(kind="ball", amplitude=1.0, radius=2.0)
        spec = IntegralSpec(nodes=((0.0, 1.0), (0.1, 1.0)), weight=f, r=0.05)
        rep = iest_reduction_check(spec)
        assert rep.passed
        assert np.isfinite(rep.max_ratio)

    def test_iest_zero_weight(self):
        f = WeightFn(kind="ball", amplitude=0.0, radius=2.0)
        spec = IntegralSpec(nodes=((0.0, 0.8), (0.1, 0.9)), weight=f, r=0.0)
        rep = iest_reduction_check(spec)
        assert rep.passed
        assert rep.max_ratio == 0.0

    def test_iest_sweep(self):
        rep = iest_reduction_sweep(n_configs=6, seed=1, rel_tol=1e-3)
        assert rep.passed
        assert rep.stability_factor <= 2.0

    def test_iest_ordering_validation(self):
        f = WeightFn(kind="ball", amplitude=1.0, radius=2.0)
        spec = IntegralSpec(nodes=((0.0, 0.8), (1.0, 0.9), (1.05, 0.5)), weight=f, r=0.0)
        with pytest.raises(ValueError):
            iest_reduction_check(spec)
