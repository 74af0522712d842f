import math

import numpy as np
import pytest

from massren.config import ModelConfig
from massren.kernels import KernelContext
from massren.meanfield import demo_trajectory
from massren.rrforce import (QuadratureError, Trajectory, divergence_scan, memory_term_d2,
                             rr_force_asymptotic, rr_force_exact, tanh_switch)

ALPHAS = np.geomspace(1e3, 1e6, 7)


@pytest.fixture(scope="module")
def traj3():
    return demo_trajectory(ModelConfig(dim=3, charge=0.3))


@pytest.fixture(scope="module")
def traj2():
    return demo_trajectory(ModelConfig(dim=2, charge=0.3))


def test_switch_profile():
    qf, qd = tanh_switch(2.0, 10.0, t_on=5.0)
    assert qf(5.0) == pytest.approx(1.0)
    h = 1e-5
    assert qd(7.0) == pytest.approx((qf(7.0 + h) - qf(7.0 - h)) / (2 * h), rel=1e-8)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(t=np.arange(4.0), v=np.zeros((4, 2)), q=np.ones(4))
    t = np.array([0, 1, 2, 3, 4, 5, 6, 7.5])
    with pytest.raises(ValueError):
        Trajectory(t=t, v=np.zeros((8, 2)), q=np.ones(8))


def test_index_rejects_off_grid_time(traj3):
    traj, _ = traj3
    with pytest.raises(ValueError):
        traj.index(traj.t[3] + 0.3 * traj.dt)


class TestD3:
    def test_divergence_law(self, traj3):
        traj, t = traj3
        fit = divergence_scan(KernelContext(alpha=1e4), traj, 3, ALPHAS, t)
        assert fit.law == "sqrt_alpha"
        assert fit.expected == pytest.approx(-(4 / 3) * 0.09 / math.sqrt(2 * math.pi))
        assert fit.rel_error < 1e-2 and fit.ok

    def test_nested_k_integral_matches_kernel(self, traj3):
        traj, t = traj3
        ctx = KernelContext(alpha=1e4)
        a = rr_force_exact(ctx, traj, 3, t)
        b = rr_force_exact(ctx, traj, 3, t, method="nested")
        assert np.allclose(a, b, rtol=1e-8, atol=1e-16)

    def test_exact_tends_to_asymptotic(self, traj3):
        traj, t = traj3
        ctx = KernelContext(alpha=1e6)
        ex = rr_force_exact(ctx, traj, 3, t)
        asy = rr_force_asymptotic(ctx, traj, 3, t)
        assert abs(ex[0] - asy[0]) < 1e-6 * abs(asy[0])

    def test_error_estimate_and_tolerance(self, traj3):
        traj, t = traj3
        ctx = KernelContext(alpha=1e4)
        _, err = rr_force_exact(ctx, traj, 3, t, return_error=True)
        assert err < 1e-12
        with pytest.raises(QuadratureError):
            rr_force_exact(ctx, traj, 3, t, tol=0.0 if err > 0 else -1.0)

    def test_uncharged_trajectory_feels_no_force(self):
        traj = Trajectory.harmonic([1e-3, 0, 0], 0.05, 0.0, t_start=-200, t_end=0, dt=0.02)
        assert np.all(rr_force_exact(KernelContext(alpha=1e4), traj, 3, 0.0) == 0)

    def test_rejects_bad_inputs(self, traj3):
        traj, t = traj3
        ctx = KernelContext(alpha=1e4)
        with pytest.raises(ValueError):
            rr_force_exact(ctx, traj, 4, t)
        with pytest.raises(ValueError):
            rr_force_exact(ctx, traj, 3, t, method="raw")
        with pytest.raises(ValueError):
            rr_force_exact(ctx, traj, 3, traj.t[-1] + 10)
        with pytest.raises(ValueError):
            divergence_scan(ctx, traj, 3, [1e3, 1e4, 1e5], t)


class TestD2:
    def test_divergence_law(self, traj2):
        traj, t = traj2
        fit = divergence_scan(KernelContext(alpha=1e4), traj, 2, ALPHAS, t)
        assert fit.law == "log_alpha"
        assert fit.expected == pytest.approx(-0.09 / (4 * math.pi))
        assert fit.rel_error < 1e-2 and fit.ok

    def test_raw_kernel_matches_integrated_by_parts(self, traj2):
        traj, t = traj2
        ctx = KernelContext(alpha=1e3)
        a = rr_force_exact(ctx, traj, 2, t)
        b = rr_force_exact(ctx, traj, 2, t, method="raw")
        assert np.allclose(a, b, rtol=1e-6)

    @pytest.mark.parametrize("eta", [0.5, 2.0])
    def test_eta_invariance(self, traj2, eta):
        traj, t = traj2
        ctx = KernelContext(alpha=1e4)
        ref = rr_force_asymptotic(ctx, traj, 2, t)
        got = rr_force_asymptotic(ctx.with_eta(eta), traj, 2, t)
        assert np.max(np.abs(got - ref)) < 1e-6 * np.max(np.abs(ref))

    def test_exact_tends_to_asymptotic(self, traj2):
        traj, t = traj2
        for alpha in (1e4, 1e6):
            ctx = KernelContext(alpha=alpha)
            ex = rr_force_exact(ctx, traj, 2, t)
            asy = rr_force_asymptotic(ctx, traj, 2, t)
            assert abs(ex[0] - asy[0]) < 1e-5 * abs(asy[0])

    def test_memory_term_is_alpha_free(self, traj2):
        traj, t = traj2
        a = memory_term_d2(KernelContext(alpha=1e3), traj, t)
        b = memory_term_d2(KernelContext(alpha=1e7), traj, t)
        assert np.array_equal(a, b)

    def test_memory_needs_history(self, traj2):
        traj, _ = traj2
        with pytest.raises(ValueError):
            rr_force_asymptotic(KernelContext(alpha=1e4), traj, 2, traj.t[1])


def test_zero_acceleration_fit_is_trivial():
    t = np.linspace(-100, 0, 5001)
    traj = Trajectory(t=t, v=np.zeros((t.size, 3)), q=np.full(t.size, 0.3))
    fit = divergence_scan(KernelContext(alpha=1e4), traj, 3, ALPHAS, 0.0)
    assert fit.coefficient == 0.0 and fit.residual == 0.0
