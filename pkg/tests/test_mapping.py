import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopflow.colehopf import FluidParams, initial_psi
from hopflow.errors import NotConverged, TimeOffsetTooSmall
from hopflow.fields import Grid, ScalarField, VectorField
from hopflow.mapping import (
    MappingConfig,
    PrescribedReaction,
    ReynoldsSchedule,
    SelfConsistentReaction,
    apply_mapping,
    fixed_point_solve,
    mapping_terms,
    march,
    perturbation_separation,
    psi0,
)
from hopflow.oracles import fd_reaction_diffusion


def ring(n=64, length=2 * np.pi):
    return Grid.periodic_box(n, length)


def config(grid, nu=0.1, window=0.1, **kw):
    return MappingConfig(FluidParams.from_nu(nu), grid, window, **kw)


def sine_velocity(grid, amplitude=1.0):
    return VectorField(grid, amplitude * np.sin(grid.axis_coords(0))[None])


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [dict(window=0.0), dict(substeps=0), dict(fp_tolerance=0.0), dict(fp_max_iters=0), dict(substeps=1.5)],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            MappingConfig(FluidParams.from_nu(0.1), ring(16), **{"window": 0.1, **kw})

    def test_reynolds_schedule_cap(self):
        r = ReynoldsSchedule(50.0, 0.1)
        assert r.coefficient(None, 0.0, None, None) == 1000.0
        assert r.coefficient(None, 2.0, None, None) == 50.0
        with pytest.raises(ValueError):
            ReynoldsSchedule(1.0, 0.0)


class TestPsi0:
    def test_constant_is_fixed(self):
        g = ring()
        cfg = config(g)
        for t in (0.1, 1.0, 10.0):
            np.testing.assert_allclose(psi0(ScalarField.constant(g, 1.0), t, cfg).values, 1.0, atol=1e-14)

    @pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
    def test_mode_decay(self, t):
        L, nu = 4.0, 0.1
        g = ring(128, L)
        k = 2 * np.pi / L
        x = g.axis_coords(0)
        out = psi0(ScalarField(g, 1 + 0.5 * np.cos(k * x)), t, config(g, nu))
        np.testing.assert_allclose(out.values, 1 + 0.5 * np.exp(-nu * k**2 * t) * np.cos(k * x), atol=1e-5)

    def test_semigroup(self):
        g = ring(128)
        cfg = config(g, nu=0.2)
        f = ScalarField.from_function(g, lambda x: np.exp(np.cos(x)))
        np.testing.assert_allclose(
            psi0(psi0(f, 0.3, cfg), 0.4, cfg).values, psi0(f, 0.7, cfg).values, atol=1e-6
        )

    def test_below_floor(self):
        g = ring(64)
        cfg = config(g)
        with pytest.raises(TimeOffsetTooSmall):
            psi0(ScalarField.constant(g, 1.0), 0.5 * cfg.kernel_spec.dt_floor, cfg)

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            psi0(ScalarField.constant(ring(32), 1.0), 0.1, config(ring(64)))


class TestApplyMapping:
    def test_zero_reaction_equals_psi0(self):
        g = ring()
        cfg = config(g)
        init = ScalarField.from_function(g, lambda x: 2 + np.sin(x))
        iterate = ScalarField.from_function(g, lambda x: 3 + np.cos(x))
        assert np.array_equal(apply_mapping(iterate, init, 0.2, cfg).values, psi0(init, 0.2, cfg).values)
        term1, _ = mapping_terms(iterate, init, 0.2, cfg)
        assert np.all(term1.values == 0)

    def test_zero_reaction_is_identity_on_its_output(self):
        g = ring()
        cfg = config(g)
        init = ScalarField.from_function(g, lambda x: 2 + np.sin(x))
        once = apply_mapping(init, init, 0.2, cfg)
        assert np.array_equal(apply_mapping(once, init, 0.2, cfg).values, once.values)

    def test_uniform_reaction_first_application(self):
        g = ring(32)
        gamma, t = 0.8, 0.25
        cfg = config(g, window=t, reaction=PrescribedReaction(gamma))
        one = ScalarField.constant(g, 1.0)
        # trapezoid over the interpolated iterate: 1 + gamma t (1 + psi) / 2
        out = apply_mapping(one, one, t, cfg).values
        np.testing.assert_allclose(out, 1 + gamma * t, rtol=1e-13)


class TestFixedPoint:
    def test_zero_reaction_one_iteration(self):
        g = ring()
        _, trace = fixed_point_solve(ScalarField.constant(g, 1.0), 0.1, config(g))
        assert trace.iterations_used == 1 and trace.differences == [0.0] and trace.converged

    def test_uniform_reaction_single_window_value(self):
        g = ring(16)
        gamma, t = 1.0, 0.5
        cfg = config(g, window=t, reaction=PrescribedReaction(gamma))
        psi, _ = fixed_point_solve(ScalarField.constant(g, 1.0), t, cfg)
        # linear-in-time interpolation makes each window a Crank-Nicolson step
        np.testing.assert_allclose(psi.values, (1 + gamma * t / 2) / (1 - gamma * t / 2), rtol=1e-9)

    @pytest.mark.parametrize("gamma, T", [(1.0, 0.5), (0.4, 1.0), (-1.0, 0.5)])
    def test_uniform_reaction_matches_exponential(self, gamma, T):
        g = ring(16)
        w = 0.025
        cfg = config(g, nu=1.0, window=w, reaction=PrescribedReaction(gamma))
        psi = ScalarField.constant(g, 1.0)
        steps = int(round(T / w))
        for i in range(steps):
            psi, _ = fixed_point_solve(psi, w, cfg, t_start=i * w)
        np.testing.assert_allclose(psi.values, np.exp(gamma * T), rtol=1e-4)

    def test_contractive_window(self):
        g = ring(32)
        cfg = config(g, window=0.4, reaction=PrescribedReaction(1.0), fp_max_iters=30)
        _, trace = fixed_point_solve(ScalarField.constant(g, 1.0), 0.4, cfg)
        assert trace.converged and trace.differences[-1] < 1e-10
        assert np.all(np.diff(trace.differences) < 0)

    def test_large_window_fails_and_halving_restores(self):
        g = ring(32)
        init = ScalarField.constant(g, 1.0)
        cfg = config(g, window=2.0, reaction=PrescribedReaction(1.0), fp_max_iters=50)
        try:
            _, trace = fixed_point_solve(init, 2.0, cfg)
            slow = np.nanmax(trace.ratios()) > 0.9
        except NotConverged as exc:
            slow = True
            assert exc.trace.iterations_used == 50
            assert not exc.trace.converged
        assert slow
        half = config(g, window=1.0, reaction=PrescribedReaction(1.0), fp_max_iters=50)
        _, trace = fixed_point_solve(init, 1.0, half)
        assert trace.converged

    @settings(max_examples=15, deadline=None)
    @given(
        gamma=st.floats(0.0, 2.0),
        amp=st.floats(0.0, 0.9),
        window=st.floats(0.05, 0.4),
    )
    def test_positivity_and_monotone_trace(self, gamma, amp, window):
        g = ring(32)
        x = g.axis_coords(0)
        c = ScalarField(g, gamma * (1 + np.cos(x)) / 2)
        cfg = config(g, window=window, reaction=PrescribedReaction(c), fp_max_iters=200)
        psi, trace = fixed_point_solve(ScalarField(g, 1 + amp * np.sin(x)), window, cfg)
        assert np.all(psi.values > 0)
        d = np.asarray(trace.differences)
        d = d[d > 1e-13]  # below this the differences are rounding noise
        assert np.all(np.diff(d) < 0)

    def test_prescribed_reaction_matches_fd_oracle(self):
        g = ring(64)
        x = g.axis_coords(0)
        nu, T, w = 0.1, 0.5, 0.05
        c = lambda t: ScalarField(g, 0.5 * (1 + np.cos(x)) * np.exp(-t))  # noqa: E731
        cfg = config(g, nu=nu, window=w, reaction=PrescribedReaction(c))
        psi = ScalarField(g, 1 + 0.3 * np.sin(x))
        for i in range(int(round(T / w))):
            psi, _ = fixed_point_solve(psi, w, cfg, t_start=i * w)
        ref = fd_reaction_diffusion(ScalarField(g, 1 + 0.3 * np.sin(x)), c, nu, T, 1e-4).values
        assert np.linalg.norm(psi.values - ref) / np.linalg.norm(ref) < 1e-2

    def test_self_consistent_runs(self):
        g = ring(64)
        cfg = config(g, nu=0.2, window=0.02, reaction=SelfConsistentReaction(), fp_max_iters=100)
        psi_init = initial_psi(sine_velocity(g, 0.3), cfg.params)
        psi, trace = fixed_point_solve(psi_init, 0.02, cfg)
        assert trace.converged and np.all(psi.values > 0)


class TestMarch:
    def test_zero_velocity(self):
        g = ring(32)
        report = march(VectorField(g, np.zeros((1, 32))), 0.3, config(g))
        assert all(e == 0 for e in report.energy)
        assert all(np.all(v.components == 0) for v in report.velocity)

    def test_series_lengths_and_sampling(self):
        g = ring(32)
        report = march(sine_velocity(g, 0.2), 1.0, config(g, window=0.1), sample_every=3)
        assert report.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
        n = len(report.times)
        for series in (report.psi, report.velocity, report.energy, report.term1_norm, report.term2_norm, report.fp_iterations):
            assert len(series) == n
        assert len(report.traces) == 10

    def test_zero_reaction_energy_decays(self):
        g = ring(64)
        report = march(sine_velocity(g), 1.0, config(g, window=0.1))
        assert np.all(np.diff(report.energy) < 0)
        assert all(t == 0 for t in report.term1_norm)

    def test_sliver_window_folded(self):
        g = ring(32)
        cfg = config(g, window=0.1)
        T = 0.3 + 0.1 * cfg.kernel_spec.dt_floor
        report = march(sine_velocity(g, 0.2), T, cfg)
        assert len(report.traces) == 3
        assert report.times[-1] == pytest.approx(T)

    def test_not_converged_carries_partial_report(self):
        g = ring(32)
        cfg = config(g, window=0.1, reaction=PrescribedReaction(1.0), fp_max_iters=1)
        with pytest.raises(NotConverged) as info:
            march(sine_velocity(g, 0.2), 0.5, cfg)
        assert info.value.report.times == [0.0]
        assert info.value.time == 0.0

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            march(sine_velocity(ring(32)), 0.1, config(ring(64)))

    def test_csv_format(self):
        g = ring(32)
        report = march(sine_velocity(g, 0.2), 0.2, config(g, window=0.1))
        lines = report.to_csv().splitlines()
        assert lines[0] == "t,energy,term1_norm,term2_norm,fp_iterations"
        assert len(lines) == 1 + len(report.times)
        assert float(lines[1].split(",")[1]) == report.energy[0]

    def test_reynolds_term_ratio_falls(self):
        g = ring(32)
        cfg = config(g, nu=1.0, window=0.01, reaction=ReynoldsSchedule(2.0, 0.1), fp_max_iters=100)
        report = march(sine_velocity(g), 3.0, cfg, sample_every=50)
        ratio = report.term_ratio()[1:]
        assert ratio[-1] < ratio[0]


class TestSeparation:
    def test_zero_perturbation(self):
        g = ring(32)
        sep = perturbation_separation(sine_velocity(g, 0.5), ScalarField.constant(g, 0.0), 0.3, config(g))
        assert np.all(sep == 0)

    def test_zero_reaction_contracts(self):
        g = ring(64)
        delta = ScalarField.from_function(g, lambda x: 1e-3 * np.cos(2 * x))
        sep = perturbation_separation(sine_velocity(g, 0.5), delta, 1.0, config(g, window=0.1))
        assert sep[-1] < sep[0]

    def test_self_consistent_reports_curve(self):
        g = ring(32)
        delta = ScalarField.from_function(g, lambda x: 1e-3 * np.cos(x))
        cfg = config(g, nu=0.3, window=0.02, reaction=SelfConsistentReaction(), fp_max_iters=200)
        sep = perturbation_separation(sine_velocity(g, 1.0), delta, 0.1, cfg)
        assert sep.shape == (6,) and np.all(np.isfinite(sep))
