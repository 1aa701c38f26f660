import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cornerflow.geometry import WedgeParams, sector_power
from cornerflow.kernel import KernelConfig, b_zero, default_blob_delta, induced_bfield
from cornerflow.flow import (
    CornerWindow,
    FlowTrace,
    IntegratorControls,
    corner_probe,
    distance_bound_check,
    integrate,
    long_time_floor_check,
    output_times,
    right_motion_check,
    step,
    trajectory_lower_bound_check,
)
from cornerflow.studies import self_convergence_study
from cornerflow.vorticity import VortexEnsemble, discretize, half_sector_patch

NU = 0.75
P = WedgeParams(nu=NU)


def small_run(h=0.03, T=1.0, delta=None, dt_max=0.05):
    w0 = half_sector_patch(NU, 0.1, 0.5)
    ens = discretize(w0, h, NU)
    cfg = KernelConfig(blob_delta=default_blob_delta(h) if delta is None else delta)
    ctrl = IntegratorControls(dt_max=dt_max, cfl_fraction=0.4)
    return w0, ens, cfg, ctrl, integrate(ens, T, ctrl, P, cfg)


def generous_eps(b0):
    # certifies a corner ball wide enough to cover patch particles; the
    # paper's long-time choice min(b0,1)/2 gives a smaller, stricter ball
    return 0.9 * min(b0, 1.0)


@pytest.fixture(scope="module")
def patch_run():
    return small_run()


class TestStep:
    def test_zero_circulations_freeze(self):
        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j, 0.4 + 0.2j], [0.0, 0.0], 0.01)
        out = step(ens, 0.1, P, KernelConfig(blob_delta=1e-3))
        assert np.array_equal(out.positions_h, ens.positions_h)

    def test_single_particle_against_adaptive_oracle(self):
        # one particle moves only under its own boundary image; the oracle
        # integrates the same law with an independent high-order adaptive
        # integrator
        gamma, delta = 0.8, 1e-3
        y0 = complex(sector_power(0.3 + 0.15j, 1.0 / NU))

        def rhs(_t, s):
            y = s[0] + 1j * s[1]
            a2 = np.conj(y) - y
            b = -(0.5j / np.pi) * gamma * np.conj(a2) / (abs(a2) ** 2 + delta**2)
            f = b * abs(y) ** (2 - 2 * NU) / NU**2
            return [f.real, f.imag]

        sol = solve_ivp(rhs, (0.0, 1.0), [y0.real, y0.imag], method="DOP853", rtol=1e-12, atol=1e-14)
        want = sol.y[0][-1] + 1j * sol.y[1][-1]

        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.15j], [gamma], 0.01)
        ctrl = IntegratorControls(dt_max=5e-3, cfl_fraction=1.0)
        tr = integrate(ens, 1.0, ctrl, P, KernelConfig(blob_delta=delta))
        got = tr.positions_h[-1, 0]
        assert abs(got - want) < 1e-6

    def test_rk4_local_order(self, rng):
        # one dt step vs two dt/2 steps differ at fifth order
        w0 = half_sector_patch(NU, 0.1, 0.5)
        ens = discretize(w0, 0.06, NU)
        cfg = KernelConfig(blob_delta=default_blob_delta(0.06))
        errs = []
        for dt in (0.2, 0.1):
            full = step(ens, dt, P, cfg)
            half = step(step(ens, dt / 2, P, cfg), dt / 2, P, cfg)
            errs.append(np.max(np.abs(full.positions_h - half.positions_h)))
        order = np.log2(errs[0] / errs[1])
        assert 4.0 <= order <= 6.0

    def test_reversibility_two_particle_convention(self):
        # negating circulations exactly reverses the field at a frozen
        # configuration (the field is linear in the weights)
        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j, 0.5 + 0.3j], [0.5, 0.25], 0.01)
        cfg = KernelConfig(blob_delta=1e-3)
        fwd = induced_bfield(ens.positions_h, ens.positions_h, ens.circulations, cfg, aligned=True)
        bwd = induced_bfield(ens.positions_h, ens.positions_h, -ens.circulations, cfg, aligned=True)
        assert np.array_equal(fwd, -bwd)

    def test_time_reversibility(self):
        w0 = half_sector_patch(NU, 0.1, 0.5)
        ens = discretize(w0, 0.06, NU)
        cfg = KernelConfig(blob_delta=default_blob_delta(0.06))
        ctrl = IntegratorControls(dt_max=2e-3, cfl_fraction=1.0)
        fwd = integrate(ens, 0.2, ctrl, P, cfg)
        turned = VortexEnsemble.from_positions(
            NU, fwd.positions[-1], -ens.circulations, ens.cell_size
        )
        back = integrate(turned, 0.2, ctrl, P, cfg)
        err = np.max(np.abs(back.positions_h[-1] - ens.positions_h))
        assert err < 1e-8

    def test_coordinate_consistency(self):
        # stepping in half-plane coordinates agrees with integrating the
        # wedge-coordinate law directly (independent adaptive integrator)
        w0 = half_sector_patch(NU, 0.1, 0.5)
        ens = discretize(w0, 0.06, NU)
        n = len(ens)
        assert 20 <= n <= 80
        cfg = KernelConfig(blob_delta=default_blob_delta(0.06))

        def rhs(_t, s):
            x = s[:n] + 1j * s[n:]
            y = x ** (1.0 / NU)  # interior points stay off the branch cut
            b = induced_bfield(y, y, ens.circulations, cfg, aligned=True)
            dx = b * np.conj(x ** (1.0 / NU - 1.0)) / NU
            return np.concatenate([dx.real, dx.imag])

        x0 = ens.positions_omega
        sol = solve_ivp(
            rhs, (0.0, 0.5), np.concatenate([x0.real, x0.imag]), method="DOP853", rtol=1e-11, atol=1e-13
        )
        want = sol.y[:n, -1] + 1j * sol.y[n:, -1]
        ctrl = IntegratorControls(dt_max=5e-3, cfl_fraction=1.0)
        tr = integrate(ens, 0.5, ctrl, P, cfg)
        assert np.max(np.abs(tr.positions[-1] - want)) < 1e-6

    def test_bad_dt(self):
        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j], [1.0], 0.01)
        with pytest.raises(ValueError):
            step(ens, -0.1, P, KernelConfig(blob_delta=1e-3))

    def test_blowup_guard(self):
        from cornerflow.flow import FlowBlowupError

        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j, 0.5 + 0.3j], [5.0, 5.0], 0.01)
        cfg = KernelConfig(blob_delta=1e-3)
        with pytest.raises(FlowBlowupError):
            step(ens, 0.5, P, cfg, blowup_radius=0.2)
        with pytest.raises(FlowBlowupError):
            integrate(ens, 2.0, IntegratorControls(dt_max=0.5, blowup_radius=0.2), P, cfg)


class TestIntegrate:
    def test_output_grid(self):
        t = output_times(2.0)
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0)
        assert t[-1] == 2.0
        # geometric head: consecutive early times double
        assert t[2] / t[1] == pytest.approx(2.0)

    def test_short_horizon_equals_initial(self):
        w0 = half_sector_patch(NU, 0.1, 0.5)
        ens = discretize(w0, 0.05, NU)
        cfg = KernelConfig(blob_delta=default_blob_delta(0.05))
        tr = integrate(ens, 1e-9, IntegratorControls(dt_max=0.1), P, cfg)
        assert np.max(np.abs(tr.positions[-1] - ens.positions_omega)) < 1e-9

    def test_trace_invariants(self, patch_run):
        *_, tr = patch_run
        assert tr.times[0] == 0.0
        assert np.all(np.diff(tr.times) > 0)
        assert tr.min_boundary_clearance() > 0.0
        assert tr.clamp_events == 0
        # coordinate cache consistent to stated tolerance
        err = np.abs(tr.positions_h - tr.positions ** (1.0 / NU))
        assert np.max(err / (1 + np.abs(tr.positions_h))) < 1e-10

    def test_velocity_boundedness_along_trace(self, patch_run):
        w0, ens, *_ , tr = patch_run
        norm = w0.l1_norm + w0.sup_norm
        assert np.max(tr.b_max) <= 10 * norm  # fitted constant is order one

    def test_csv_round_trip(self, tmp_path, patch_run):
        *_, tr = patch_run
        path = tmp_path / "trace.csv"
        tr.write_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert data.shape[0] == len(tr.times) * tr.n_particles
        row = data[-1]
        assert row["t"] == tr.times[-1]
        assert row["re_x"] == tr.positions[-1, -1].real


class TestChecks:
    def test_corner_probe_window(self, patch_run):
        w0, *_, tr = patch_run
        b0 = b_zero(w0, NU)
        win = corner_probe(tr, w0, eps_target=generous_eps(b0))
        assert win.b0 == pytest.approx(b0)
        assert win.nonempty
        assert win.R > 0.1  # covers some patch particles
        assert win.T_window > 0

    def test_corner_probe_default_eps(self, patch_run):
        w0, *_, tr = patch_run
        win = corner_probe(tr, w0)
        assert win.eps == pytest.approx(0.5 * min(win.b0, 1.0))
        assert win.nonempty

    def test_corner_probe_rejects_large_eps(self, patch_run):
        w0, *_, tr = patch_run
        with pytest.raises(ValueError):
            corner_probe(tr, w0, eps_target=b_zero(w0, NU))

    def test_b_continuity_at_corner(self, patch_run):
        # the probe values at t=0 approach the corner value along the rays
        w0, *_, tr = patch_run
        b0 = b_zero(w0, NU)
        dev = np.abs(tr.b_probe[0] - b0)
        radii = np.abs(tr.probe_points)
        inner = dev[radii <= 0.02 * (1 + 1e-12)]
        outer = dev[radii >= 0.5]
        assert np.max(inner) < np.min(outer)
        assert np.max(inner) < 0.15 * b0  # residual is discretization noise

    def test_trajectory_lower_bound(self, patch_run):
        w0, *_, tr = patch_run
        win = corner_probe(tr, w0, eps_target=generous_eps(b_zero(w0, NU)))
        rep = trajectory_lower_bound_check(tr, win.b0, win.eps, win.R, win.T_window)
        assert rep.params["n_tracked"] > 0
        assert rep.passed, rep.violations
        # arithmetic of the envelope at nu = 3/4
        assert NU / (2 * NU - 1) == pytest.approx(1.5)
        assert (2 * NU - 1) / NU**2 == pytest.approx(8.0 / 9.0)

    def test_wrong_sign_regression(self, patch_run):
        # inflating b0 makes the envelope impossible: the check must fail,
        # proving the 5% slack cannot mask a sign/scale error
        w0, *_, tr = patch_run
        win = corner_probe(tr, w0, eps_target=generous_eps(b_zero(w0, NU)))
        rep = trajectory_lower_bound_check(tr, win.b0 * 200.0, win.eps, win.R, win.T_window)
        assert not rep.passed

    def test_right_motion(self, patch_run):
        w0, *_, tr = patch_run
        win = corner_probe(tr, w0, eps_target=generous_eps(b_zero(w0, NU)))
        rep = right_motion_check(tr, win.R ** (1.0 / NU), T_window=win.T_window)
        assert rep.passed, rep.violations
        assert rep.n_samples > 0

    def test_right_motion_scope_filter(self):
        # a particle outside the half-plane ball is never checked
        times = np.array([0.0, 1.0])
        y = np.array([[5.0 + 1.0j], [4.0 + 1.0j]])  # drifts left, but out of scope
        tr = FlowTrace(
            params=P,
            kernel=KernelConfig(),
            cell_size=0.1,
            times=times,
            positions=np.asarray(y**NU),
            positions_h=y,
            probe_points=np.array([0.1 + 0.05j]),
            b_probe=np.zeros((2, 1), dtype=complex),
            b_max=np.zeros(2),
        )
        rep = right_motion_check(tr, R_star=1.0)
        assert rep.passed and rep.n_samples == 0

    def test_distance_sandwich(self, patch_run):
        *_, tr = patch_run
        rep = distance_bound_check(tr)
        assert rep.passed, rep.violations
        c = rep.fitted_constants
        assert np.isfinite(c["c"]) and c["C1"] > 0 and c["C2"] >= 1.0 - 1e-12
        assert c["D1"] > 0 and np.isfinite(c["D2"])

    def test_distance_sandwich_at_t0(self):
        # with a frozen flow the sandwich holds with unit constants
        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j, 0.2 + 0.2j], [0.0, 0.0], 0.01)
        cfg = KernelConfig(blob_delta=1e-3)
        tr = integrate(ens, 0.5, IntegratorControls(dt_max=0.1), P, cfg)
        rep = distance_bound_check(tr)
        assert rep.passed
        assert rep.fitted_constants["c_fitted"] == 0.0
        assert rep.fitted_constants["C1"] == pytest.approx(1.0)
        assert rep.fitted_constants["C2"] == pytest.approx(1.0)

    def test_long_time_floor(self, patch_run):
        *_, tr = patch_run
        rep = long_time_floor_check(tr, 0.25, 1.0, floor=1e-3)
        assert rep.passed
        assert rep.fitted_constants["observed_floor"] >= 0.05

    def test_long_time_floor_zero_circulation(self):
        ens = VortexEnsemble.from_positions(NU, [0.3 + 0.1j, 0.2 + 0.05j], [0.0, 0.0], 0.01)
        cfg = KernelConfig(blob_delta=1e-3)
        tr = integrate(ens, 1.0, IntegratorControls(dt_max=0.1), P, cfg)
        rep = long_time_floor_check(tr, 0.2, 1.0, floor=1e-6)
        assert rep.fitted_constants["observed_floor"] == pytest.approx(abs(0.2 + 0.05j))

    def test_floor_monotone_in_window(self, patch_run):
        *_, tr = patch_run
        narrow = long_time_floor_check(tr, 0.25, 0.5, floor=0.0)
        wide = long_time_floor_check(tr, 0.25, 1.0, floor=0.0)
        assert wide.fitted_constants["observed_floor"] <= narrow.fitted_constants["observed_floor"] + 1e-15

    def test_floor_window_validation(self, patch_run):
        *_, tr = patch_run
        with pytest.raises(ValueError):
            long_time_floor_check(tr, 0.5, 0.2)


class TestRefinement:
    def test_position_convergence_order(self):
        w0 = half_sector_patch(NU, 0.1, 0.5)
        ctrl = IntegratorControls(dt_max=0.04, cfl_fraction=0.4)
        study = self_convergence_study(w0, P, base_h=0.04, n_levels=3, T=0.4, ctrl=ctrl)
        assert len(study.ratios) == 1
        assert study.measured_order >= 0.9
