import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hopflow.errors import GridMismatch, TimeOffsetTooSmall
from hopflow.fields import Grid, ScalarField, volume_integral
from hopflow.kernel import (
    KernelSpec,
    build_kernel_table,
    convolve,
    free_space_kernel,
    periodic_kernel,
    table_for_offset,
)


def ring(n, length=2 * np.pi):
    return Grid.periodic_box(n, length)


class TestKernelSpec:
    def test_default_floor(self):
        g = ring(64)
        spec = KernelSpec(0.5, g)
        assert spec.dt_floor == pytest.approx(0.1 * g.spacing[0] ** 2 / 0.5)

    @pytest.mark.parametrize("kw", [dict(nu=0.0), dict(nu=1.0, image_tolerance=1.0), dict(nu=1.0, dt_floor=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            KernelSpec(grid=ring(8), **kw)


class TestFreeSpace:
    def test_unit_value(self):
        nu = 0.3
        assert free_space_kernel(0.4, 0.4, 1 / (4 * np.pi * nu), nu, 1) == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("dt, nu", [(0.01, 1.0), (0.5, 0.1), (3.0, 2.0)])
    def test_integrates_to_one(self, dt, nu):
        half = 40 * np.sqrt(nu * dt)
        val, _ = quad(lambda xi: free_space_kernel(0.3, xi, dt, nu, 1), 0.3 - half, 0.3 + half, epsabs=1e-13, points=[0.3])
        assert abs(val - 1) < 1e-8

    def test_2d_factorizes(self):
        x = np.array([0.2, -0.1])
        xi = np.array([0.5, 0.4])
        k2 = free_space_kernel(x, xi, 0.2, 0.7, 2)
        assert k2 == pytest.approx(
            free_space_kernel(x[0], xi[0], 0.2, 0.7, 1) * free_space_kernel(x[1], xi[1], 0.2, 0.7, 1)
        )

    def test_semigroup(self):
        nu, t1, t2 = 0.4, 0.3, 0.5
        for x in (0.0, 0.7, -1.3):
            composed, _ = quad(
                lambda y: free_space_kernel(x, y, t1, nu, 1) * free_space_kernel(y, 0.2, t2, nu, 1),
                -30, 30, epsabs=1e-13, limit=200,
            )
            assert abs(composed - free_space_kernel(x, 0.2, t1 + t2, nu, 1)) < 1e-8

    def test_too_small(self):
        with pytest.raises(TimeOffsetTooSmall):
            free_space_kernel(0, 0, 0.0, 1.0, 1)
        with pytest.raises(TimeOffsetTooSmall):
            free_space_kernel(0, 0, 1e-4, 1.0, 1, dt_floor=1e-3)


class TestPeriodicKernel:
    def test_equilibration(self):
        L = 2.0
        spec = KernelSpec(1.0, ring(16, L))
        xs = np.linspace(0, L, 7)
        vals = periodic_kernel(xs, 0.3, 10.0, spec)
        np.testing.assert_allclose(vals, 1 / L, atol=1e-6)

    def test_cell_integral(self):
        L = 2 * np.pi
        spec = KernelSpec(0.2, ring(16, L))
        val, _ = quad(lambda xi: periodic_kernel(1.0, xi, 0.3, spec), 0, L, epsabs=1e-13, limit=200)
        assert abs(val - 1) < 1e-9

    def test_symmetry_and_periodic_distance(self):
        L = 3.0
        spec = KernelSpec(0.5, ring(16, L))
        rng = np.random.default_rng(3)
        for x, xi in rng.uniform(0, L, (10, 2)):
            a = periodic_kernel(x, xi, 0.05, spec)
            assert a == pytest.approx(periodic_kernel(xi, x, 0.05, spec), rel=1e-14)
            assert a == pytest.approx(periodic_kernel(x + L, xi - 2 * L, 0.05, spec), rel=1e-12)

    def test_below_floor(self):
        spec = KernelSpec(1.0, ring(16), dt_floor=0.1)
        with pytest.raises(TimeOffsetTooSmall):
            periodic_kernel(0, 0, 0.05, spec)


class TestTable:
    def test_weights_nonnegative_and_rows_sum_to_one(self):
        g = Grid.periodic_box((24, 16), (2 * np.pi, 1.0))
        table = build_kernel_table(KernelSpec(0.1, g), 0.05)
        dense = table.dense()
        assert dense.shape == (g.size, g.size)
        assert np.all(dense >= 0)
        np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-12)

    def test_constant_preserved_exactly(self):
        g = ring(128)
        out = convolve(build_kernel_table(KernelSpec(0.1, g), 0.3), ScalarField.constant(g, 1.0))
        assert np.all(out.values == 1.0)

    def test_constant_preserved_exactly_2d(self):
        g = Grid.periodic_box((16, 12), (1.0, 3.0))
        out = convolve(build_kernel_table(KernelSpec(0.2, g), 0.1), ScalarField.constant(g, 1.0))
        assert np.all(out.values == 1.0)

    def test_dense_matches_apply(self):
        g = Grid.periodic_box((12, 10), (1.0, 2.0))
        table = build_kernel_table(KernelSpec(0.3, g), 0.05)
        f = np.random.default_rng(5).standard_normal(g.shape)
        np.testing.assert_allclose(convolve(table, ScalarField(g, f)).values.ravel(), table.dense() @ f.ravel(), atol=1e-14)

    @pytest.mark.parametrize("dt", [0.01, 0.2, 1.0])
    def test_mode_decay(self, dt):
        L, nu, n = 3.0, 0.1, 256
        g = ring(n, L)
        k = 2 * np.pi / L
        f = ScalarField.from_function(g, lambda x: np.cos(k * x))
        out = convolve(build_kernel_table(KernelSpec(nu, g), dt), f)
        np.testing.assert_allclose(out.values, np.exp(-nu * k**2 * dt) * f.values, atol=1e-6)

    def test_semigroup(self):
        g = ring(128)
        spec = KernelSpec(0.2, g)
        f = ScalarField.from_function(g, lambda x: np.exp(np.sin(x)))
        one = build_kernel_table(spec, 0.1)
        twice = convolve(one, convolve(one, f))
        direct = convolve(build_kernel_table(spec, 0.2), f)
        np.testing.assert_allclose(twice.values, direct.values, atol=1e-6)

    def test_below_floor_is_strict(self):
        spec = KernelSpec(1.0, ring(32))
        with pytest.raises(TimeOffsetTooSmall):
            build_kernel_table(spec, 0.5 * spec.dt_floor)

    def test_delta_limit_below_floor(self):
        g = ring(32)
        table = table_for_offset(KernelSpec(1.0, g), 0.0)
        assert table.is_identity
        f = ScalarField.from_function(g, np.sin)
        assert np.array_equal(convolve(table, f).values, f.values)


class TestConvolve:
    def test_zero(self):
        g = ring(64)
        out = convolve(build_kernel_table(KernelSpec(0.1, g), 0.1), ScalarField.constant(g, 0.0))
        assert np.all(out.values == 0)

    def test_constant(self):
        g = Grid.periodic_box((16, 16), 1.0)
        out = convolve(build_kernel_table(KernelSpec(0.05, g), 0.2), ScalarField.constant(g, 3.5))
        np.testing.assert_allclose(out.values, 3.5, rtol=1e-13)

    def test_gaussian_widening_on_open_grid(self):
        nu, dt, s2 = 0.5, 0.3, 0.4
        g = Grid.open_box(801, -20.0, 20.0)
        f = ScalarField.from_function(g, lambda x: np.exp(-(x**2) / (2 * s2)))
        out = convolve(build_kernel_table(KernelSpec(nu, g), dt), f)
        var = s2 + 2 * nu * dt
        x = g.axis_coords(0)
        np.testing.assert_allclose(out.values, np.sqrt(s2 / var) * np.exp(-(x**2) / (2 * var)), atol=1e-5)

    def test_open_boundary_warning(self):
        g = Grid.open_box(64, 0.0, 1.0)
        f = ScalarField.constant(g, 1.0)
        with pytest.warns(RuntimeWarning):
            convolve(build_kernel_table(KernelSpec(0.1, g), 0.01), f)

    def test_no_warning_for_decayed_field(self):
        g = Grid.open_box(201, -10.0, 10.0)
        f = ScalarField.from_function(g, lambda x: np.exp(-(x**2)))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            convolve(build_kernel_table(KernelSpec(0.1, g), 0.1), f)

    def test_grid_mismatch(self):
        table = build_kernel_table(KernelSpec(0.1, ring(32)), 0.1)
        with pytest.raises(GridMismatch):
            convolve(table, ScalarField.constant(ring(64), 1.0))


@pytest.fixture(scope="module")
def table2d():
    g = Grid.periodic_box((12, 10), (1.0, 2.0))
    return g, build_kernel_table(KernelSpec(0.3, g), 0.05)


values2d = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).standard_normal((12, 10)))


@settings(max_examples=30, deadline=None)
@given(a=values2d, b=values2d, alpha=st.floats(-100, 100), beta=st.floats(-100, 100))
def test_linearity(table2d, a, b, alpha, beta):
    g, table = table2d
    lhs = convolve(table, ScalarField(g, alpha * a + beta * b)).values
    rhs = alpha * convolve(table, ScalarField(g, a)).values + beta * convolve(table, ScalarField(g, b)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + abs(alpha) + abs(beta)))


@settings(max_examples=30, deadline=None)
@given(a=values2d)
def test_conservation_and_maximum_principle(table2d, a):
    g, table = table2d
    f = ScalarField(g, a)
    out = convolve(table, f)
    mass = volume_integral(f)
    scale = volume_integral(ScalarField(g, np.abs(a)))
    assert abs(volume_integral(out) - mass) <= 1e-9 * scale
    assert out.values.min() >= a.min() - 1e-12
    assert out.values.max() <= a.max() + 1e-12


@settings(max_examples=30, deadline=None)
@given(a=values2d)
def test_positivity(table2d, a):
    g, table = table2d
    assert np.all(convolve(table, ScalarField(g, np.abs(a))).values >= 0)


def test_resolved_modes_decay_at_analytic_rate():
    n, L, nu, dt = 64, 2 * np.pi, 0.3, 0.1
    g = ring(n, L)
    table = build_kernel_table(KernelSpec(nu, g), dt)
    x = g.axis_coords(0)
    h = g.spacing[0]
    for m in range(1, n // 2):
        k = 2 * np.pi * m / L
        if k * h >= 0.5:
            break
        out = convolve(table, ScalarField(g, np.cos(k * x))).values
        factor = out @ np.cos(k * x) / (np.cos(k * x) @ np.cos(k * x))
        assert abs(factor / np.exp(-nu * k**2 * dt) - 1) < 1e-5
