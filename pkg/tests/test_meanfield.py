import math

import numpy as np
import pytest

from massren.config import ModelConfig
from massren.kernels import KernelContext
from massren.memconv import InsufficientHistory, conv_time
from massren.meanfield import (AliasingError, CFLViolation, NormDrift, PulseSpec, RunawayError,
                               VelocityHistory, al_force, default_k_grid, demo_trajectory,
                               direction_set, driven_oscillator_closed_form, ground_state,
                               make_grid, mode_equation_residual, naive_breakdown_demo, propagate,
                               reconstruct_modes, reference_energy_drift)
from massren.rrforce import Trajectory

CFG3 = ModelConfig(dim=3, charge=0.3, omega0=0.05, grid_n=16)
PERIOD = 2 * math.pi / 0.05


def small_pulse(d=3, amp=1e-3):
    return PulseSpec(amp, 400.0, 100.0, 0.05, tuple([1.0] + [0.0] * (d - 1)))


class TestPulse:
    def test_rate_is_derivative(self):
        p = PulseSpec(2.0, 5.0, 3.0, 0.7, (1.0, 1.0), phase=0.4)
        h = 1e-6
        fd = (p.field(6.3 + h) - p.field(6.3 - h)) / (2 * h)
        assert np.allclose(p.field_rate(6.3), fd, rtol=1e-7)
        assert np.linalg.norm(p.pol) == pytest.approx(1.0)

    def test_off(self):
        assert np.all(PulseSpec.off(3).field(1.0) == 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            PulseSpec(1.0, 0.0, 1.0, 1.0, (0.0, 0.0))
        with pytest.raises(ValueError):
            PulseSpec(1.0, 0.0, 0.0, 1.0, (1.0, 0.0))


class TestHistory:
    def test_ring_buffer_order(self):
        h = VelocityHistory(3, 1)
        for k in range(5):
            h.append(float(k), 1.0, [k], [0.0], [0.0])
        assert np.array_equal(h.series("t"), [2.0, 3.0, 4.0])
        assert np.array_equal(h.lagged("v")[:, 0], [4.0, 3.0, 2.0])
        assert h.dt == 1.0 and len(h) == 3

    def test_capacity(self):
        with pytest.raises(ValueError):
            VelocityHistory(1, 2)

    def test_derivative_consistency(self):
        traj = Trajectory.harmonic([1e-3, 0], 0.5, 1.0, t_start=0, t_end=20, dt=0.01)
        h = VelocityHistory.from_trajectory(traj)
        assert h.derivative_consistency() < 1e-3 * 0.25 * 1e-4 + 1e-9

    def test_al_force_d3_is_local(self):
        h = VelocityHistory(4, 3)
        h.append(0.0, 0.3, [0, 0, 0], [0, 0, 0], [1.0, 0, 0])
        F = al_force(3, KernelContext(alpha=1e4), h)
        assert F[0] == pytest.approx((2 / 3) * 0.09)

    def test_al_force_d2_matches_direct_convolution(self):
        traj = Trajectory.harmonic([1e-3, 0], 0.5, 0.2, t_start=0, t_end=50, dt=0.01)
        h = VelocityHistory.from_trajectory(traj)
        ctx = KernelContext(alpha=1e4)
        f = (traj.q[:, None] * traj.deriv_at(2, traj.t))[::-1]
        ref = -(traj.q[-1] / (2 * math.pi)) * conv_time(f, 0.01, ctx.t_c)
        assert np.allclose(al_force(2, ctx, h), ref, rtol=1e-14, atol=0)

    def test_al_force_d2_needs_history(self):
        h = VelocityHistory(4, 2)
        h.append(0.0, 0.3, [0, 0], [0, 0], [0, 0])
        with pytest.raises(InsufficientHistory):
            al_force(2, KernelContext(alpha=1e4), h)


class TestGroundState:
    @pytest.mark.parametrize("cfg", [CFG3, ModelConfig(dim=2, charge=0.3, grid_n=32),
                                     ModelConfig(dim=2, potential="quartic", charge=0.2, omega0=1.0,
                                                 grid_n=48, grid_L=8.0)])
    def test_fixed_point(self, cfg):
        r = propagate(cfg, None, 1000 * 0.5, 0.5, track_density=True, min_steps_per_period=1)
        assert np.max(np.abs(r.v)) < 1e-12
        assert r.density_deviation < 1e-10
        assert np.max(np.abs(r.norm - r.norm[0])) < 1e-10

    def test_ground_state_normalized(self):
        g, psi = ground_state(CFG3)
        assert np.sum(np.abs(psi) ** 2) * g.dV == pytest.approx(1.0, abs=1e-14)


class TestDriven:
    def test_matches_closed_form(self):
        dt = PERIOD / 200
        r = propagate(CFG3, small_pulse(), 20 * PERIOD, dt)
        ref = driven_oscillator_closed_form(CFG3, small_pulse(), r.t)
        err = np.linalg.norm(r.x_mean - ref) / np.linalg.norm(ref)
        assert err < 0.02

    def test_closed_form_against_ode(self):
        from scipy.integrate import solve_ivp
        p = small_pulse()
        q, w0, tau = 0.3, 0.05, (2 / 3) * 0.09

        def rhs(t, y):
            E, Ed = p.field(t)[0], p.field_rate(t)[0]
            return [y[1], -tau * w0**2 * y[1] - w0**2 * y[0] + q * (E + tau * Ed)]

        # start well before the pulse: the closed form integrates the drive from -inf
        ts = np.linspace(0, 2000, 401)
        sol = solve_ivp(rhs, (-600, 2000), [0, 0], t_eval=ts, rtol=1e-11, atol=1e-16, method="DOP853")
        ref = driven_oscillator_closed_form(CFG3, p, ts)[:, 0]
        assert np.max(np.abs(sol.y[0] - ref)) < 1e-7 * np.max(np.abs(ref))

    def test_order_reduction_consistent(self):
        dt = PERIOD / 200
        r = propagate(CFG3, small_pulse(), 5 * PERIOD, dt)
        assert r.jerk_residual < 1e-2

    def test_closed_form_preconditions(self):
        with pytest.raises(ValueError):
            driven_oscillator_closed_form(ModelConfig(dim=2), small_pulse(2), [0.0])


class TestGuards:
    def test_steps_per_period(self):
        with pytest.raises(ValueError):
            propagate(CFG3, None, 100.0, PERIOD / 10)

    def test_runaway(self):
        cfg = ModelConfig(dim=3, charge=0.3, omega0=0.05, grid_n=16, v_max=1e-6)
        with pytest.raises(RunawayError):
            propagate(cfg, small_pulse(amp=1e-2), 3 * PERIOD, PERIOD / 100)

    def test_cfl(self):
        cfg = ModelConfig(dim=2, charge=0.3, omega0=0.05, grid_n=16)
        p = PulseSpec(5e-3, 0.0, 100.0, 0.05, (1.0, 0.0))
        with pytest.raises(CFLViolation):
            propagate(cfg, p, PERIOD, PERIOD / 40, mode="spectral", cfl_safety=1e-6)

    def test_norm_guard(self):
        with pytest.raises(NormDrift):
            propagate(CFG3, None, 10.0, 1.0, norm_tol=-1.0, min_steps_per_period=1)

    def test_spectral_aliasing_is_caught(self):
        cfg = ModelConfig(dim=2, charge=0.3, omega0=0.05, grid_n=32)
        with pytest.raises(AliasingError):
            propagate(cfg, small_pulse(2, amp=1e-3), 40 * PERIOD, PERIOD / 40, mode="spectral")

    def test_spectral_matches_comoving_early(self):
        # without a kinetic term the fixed-grid phase chirps psi towards the Nyquist band,
        # so the spectral path is only usable for a fraction of a period
        cfg = ModelConfig(dim=2, charge=0.3, omega0=0.05, grid_n=128)
        p = PulseSpec(1e-3, 0.0, 100.0, 0.05, (1.0, 0.0))
        a = propagate(cfg, p, PERIOD / 2, PERIOD / 80)
        b = propagate(cfg, p, PERIOD / 2, PERIOD / 80, mode="spectral")
        assert np.max(np.abs(a.x_mean - b.x_mean)) < 1e-10 * np.max(np.abs(a.x_mean))

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            propagate(CFG3, None, 10.0, 1.0, mode="nope", min_steps_per_period=1)


def test_free_energy_drift():
    from massren.atom import PotentialSpec
    g = make_grid(2, 64, 16.0)
    psi = np.exp(-0.5 * ((g.mesh[0] - 1.0) ** 2 + g.mesh[1] ** 2))
    drift = reference_energy_drift(PotentialSpec.harmonic(2, 1.0), g, psi, 0.01, 300)
    assert drift < 1e-8


class TestModes:
    def test_direction_sets(self):
        for d in (2, 3):
            u = direction_set(d)
            assert np.allclose(np.linalg.norm(u, axis=1), 1.0)
        assert direction_set(2).shape == (16, 2) and direction_set(3).shape == (26, 3)

    def test_k_grid_range(self):
        k = np.linalg.norm(default_k_grid(CFG3, n_k=10, alpha=100.0), axis=1)
        assert k.min() == pytest.approx(0.005) and k.max() == pytest.approx(100.0)

    def test_mode_equation_satisfied(self):
        w0 = 0.05
        t = np.linspace(0, 10 * PERIOD, 2001)
        v = 1e-3 * np.sin(w0 * t)[:, None] * np.array([1.0, 0, 0])
        k = default_k_grid(CFG3, n_k=12, alpha=1e2, n_dir=6)
        m = reconstruct_modes(CFG3, t, v, 0.3, k, alpha=1e2, keep_history=True)
        assert mode_equation_residual(m, v, 0.3, 1e2) < 5e-3

    def test_free_evolution(self):
        t = np.linspace(0, 50, 501)
        k = np.array([[0.2, 0.0, 0.0]])
        b0 = np.array([[1.0, 0.5j]])
        m = reconstruct_modes(CFG3, t, np.zeros((t.size, 3)), 0.3, k, beta0=b0)
        assert np.allclose(m.beta, b0 * np.exp(-0.2j * 50))

    def test_resonant_growth_is_linear(self):
        w0 = 0.05
        k = np.array([[0.0, w0, 0.0]])
        amps = []
        for n in (10, 20, 40):
            t = np.linspace(0, n * PERIOD, 200 * n + 1)
            v = 1e-3 * np.sin(w0 * t)[:, None] * np.array([1.0, 0, 0])
            amps.append(np.max(np.abs(reconstruct_modes(CFG3, t, v, 0.3, k).beta)))
        assert amps[1] / amps[0] == pytest.approx(2.0, rel=0.02)
        assert amps[2] / amps[1] == pytest.approx(2.0, rel=0.02)

    def test_filon_exact_for_linear_source(self):
        # constant source: beta = (i/2pi) w^{-1/2} e^{-k^2/4a} q (1 - e^{-iwT})/(iw)
        t = np.linspace(0, 7.0, 8)
        k = np.array([[0.0, 0.0, 0.9]])
        v = np.tile([1.0, 0.0, 0.0], (t.size, 1))
        m = reconstruct_modes(CFG3, t, v, 1.0, k, alpha=4.0)
        w = 0.9
        eps = m.pol[0, :, 0]
        ref = (1j / (2 * math.pi)) / math.sqrt(w) * math.exp(-w * w / 16) * (1 - np.exp(-1j * w * 7)) / (1j * w)
        assert np.allclose(m.beta[0], ref * eps, rtol=1e-12, atol=1e-15)

    def test_rejects_zero_k(self):
        with pytest.raises(ValueError):
            reconstruct_modes(CFG3, np.linspace(0, 1, 5), np.zeros((5, 3)), 0.3, np.zeros((1, 3)))


class TestBreakdown:
    @pytest.mark.parametrize("d", [2, 3])
    def test_naive_grows_renormalized_flat(self, d):
        cfg = ModelConfig(dim=d, charge=0.3)
        rep = naive_breakdown_demo(cfg, np.geomspace(1e3, 1e6, 7))
        assert rep.slope_rel_error < 0.01
        assert rep.renorm_max_dev(1.0) < 0.01
        assert rep.coeff_naive[-1] > rep.coeff_naive[0]

    def test_neutral(self):
        rep = naive_breakdown_demo(ModelConfig(dim=3, charge=0.0), np.geomspace(1e3, 1e6, 5))
        assert np.all(rep.coeff_naive == 1.0) and np.all(rep.coeff_renorm == 1.0)
