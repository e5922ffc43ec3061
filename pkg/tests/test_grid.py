import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotcap.errors import GridError, MultiplierError, ProjectionError
from rotcap.grid import (
    Grid,
    SpectralField,
    VecField,
    apply_multiplier,
    const_field,
    curl_h,
    diff,
    div,
    div_h,
    field_from_function,
    grad,
    inner,
    integral,
    inv_d3,
    invert_multiplier,
    jacobian,
    l2_norm,
    l2_norm_spec,
    laplacian,
    lift_horizontal,
    linf_norm,
    lp_norm,
    parity_project,
    parity_residual,
    perp_grad,
    random_band_limited,
    reflect_x3,
    vertical_mean,
    vertical_split,
    zero_field,
)


def rand_field(grid, rng, kmax=None):
    kmax = kmax if kmax is not None else grid.kmax_retained
    return random_band_limited(grid, rng, kmax)


class TestGridBasics:
    def test_sizes_validated(self):
        with pytest.raises(GridError):
            Grid(3)
        with pytest.raises(GridError):
            Grid(8, 6)
        Grid(8, 1, 4)  # inactive middle axis is fine

    def test_coordinates(self):
        g = Grid(8, 8, 4)
        x1, x2, x3 = g.coords()
        assert x1[0, 0, 0] == 0.0
        assert x1[1, 0, 0] == pytest.approx(2.0 * np.pi / 8)
        # the vertical lives on [-1, 1)
        assert x3.min() == pytest.approx(-1.0)
        assert x3[0, 0, 1] - x3[0, 0, 0] == pytest.approx(0.5)

    def test_measure_counts_active_horizontal_axes(self):
        # vertical integration is a normalized average: it contributes no
        # factor to the measure
        assert Grid(8).measure == pytest.approx(2.0 * np.pi)
        assert Grid(8, 8).measure == pytest.approx((2.0 * np.pi) ** 2)
        assert Grid(8, 8, 4).measure == pytest.approx((2.0 * np.pi) ** 2)
        assert integral(const_field(Grid(8, 1, 8), 1.0)) == pytest.approx(2.0 * np.pi)

    def test_grid_equality_and_horizontal(self):
        assert Grid(16, 8) == Grid(16, 8)
        assert Grid(16, 8) != Grid(16, 16)
        gh = Grid(16, 8, 4).horizontal()
        assert gh == Grid(16, 8)


class TestTransforms:
    def test_roundtrip_exact(self, grid2d, rng):
        v = rng.standard_normal(grid2d.shape)
        f = SpectralField.from_phys(grid2d, v)
        back = SpectralField.from_spec(grid2d, f.coeffs)
        assert np.allclose(back.values, v, rtol=0.0, atol=1e-13)

    def test_parseval(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        assert l2_norm(f) == pytest.approx(l2_norm_spec(f), rel=1e-12)

    def test_parseval_3d(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        assert l2_norm(f) == pytest.approx(l2_norm_spec(f), rel=1e-12)

    def test_nonhermitian_coeffs_rejected(self, grid1d):
        c = np.zeros(grid1d.shape, dtype=np.complex128)
        c[3] = 1.0  # no conjugate partner
        f = SpectralField.from_spec(grid1d, c)
        with pytest.raises(GridError):
            f.values

    def test_integral_of_squared_mode(self):
        g = Grid(64, 64)
        f = field_from_function(g, lambda a, b, c: np.cos(a) + 0.0 * (b + c))
        # integral of cos^2 over [0,2pi)^2 = 2 pi^2
        assert integral(f * f) == pytest.approx(2.0 * np.pi**2, rel=1e-12)

    def test_lp_norms_on_constant(self):
        g = Grid(32)
        f = const_field(g, -3.0)
        m = g.measure
        assert l2_norm(f) == pytest.approx(3.0 * np.sqrt(m))
        assert lp_norm(f, 1.0) == pytest.approx(3.0 * m)
        assert linf_norm(f) == pytest.approx(3.0)


class TestDerivatives:
    def test_single_mode_exact(self):
        g = Grid(64)
        k = 5
        f = field_from_function(g, lambda a, b, c: np.cos(k * a) + 0.0 * (b + c))
        df = diff(f, 0)
        x = g.coords()[0]
        assert np.allclose(df.values, -k * np.sin(k * x), atol=1e-12)
        d2 = diff(f, 0, order=2)
        assert np.allclose(d2.values, -k * k * np.cos(k * x), atol=1e-11)

    def test_vertical_mode_exact(self):
        g = Grid(8, 1, 16)
        f = field_from_function(g, lambda a, b, c: np.sin(np.pi * c) + 0.0 * (a + b))
        df = diff(f, 2)
        x3 = g.coords()[2]
        assert np.allclose(df.values, np.pi * np.cos(np.pi * x3), atol=1e-12)

    def test_matches_finite_differences(self, rng):
        g = Grid(256)
        f = rand_field(g, rng, kmax=3)
        df = diff(f, 0)
        h = g.spacings[0]
        v = f.values
        # eighth-order centered stencil; on a smooth band-limited field its
        # truncation error sits below 1e-10 of the derivative scale
        fd = (
            (4.0 / 5.0) * (np.roll(v, -1, 0) - np.roll(v, 1, 0))
            - (1.0 / 5.0) * (np.roll(v, -2, 0) - np.roll(v, 2, 0))
            + (4.0 / 105.0) * (np.roll(v, -3, 0) - np.roll(v, 3, 0))
            - (1.0 / 280.0) * (np.roll(v, -4, 0) - np.roll(v, 4, 0))
        ) / h
        assert np.abs(df.values - fd).max() <= 1e-10 * max(1.0, np.abs(fd).max())

    def test_inactive_axis_derivative_is_zero(self, grid1d, rng):
        f = rand_field(grid1d, rng)
        assert l2_norm(diff(f, 1)) == 0.0
        assert l2_norm(diff(f, 2)) == 0.0

    def test_laplacian_is_divergence_of_gradient(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        assert l2_norm(laplacian(f) - div(grad(f))) <= 1e-12 * max(1.0, l2_norm(laplacian(f)))

    def test_integral_of_derivative_vanishes(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        assert abs(integral(diff(f, 0))) <= 1e-12


class TestMultipliers:
    def test_apply_and_invert_roundtrip(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        m = 1.0 + grid2d.ksq
        g = invert_multiplier(apply_multiplier(f, m), m)
        assert l2_norm(g - f) <= 1e-12 * l2_norm(f)

    def test_invert_refuses_small_symbol(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        with pytest.raises(MultiplierError):
            invert_multiplier(f, grid2d.ksq)  # vanishes at k=0

    def test_callable_multiplier(self, grid1d, rng):
        f = rand_field(grid1d, rng)
        a = apply_multiplier(f, lambda g: 2.0 * np.ones(g.shape))
        assert l2_norm(a - 2.0 * f) <= 1e-13 * l2_norm(f)


class TestDealias:
    def test_cutoffs(self):
        g = Grid(64, 64, 16)
        # floor(64 * (2/3) / 2) = 21, floor(16 * (2/3) / 2) = 5
        assert g.dealias_cutoffs == (21, 21, 5)

    def test_projection_idempotent(self, grid2d, rng):
        f = SpectralField.from_spec(grid2d, rng.standard_normal(grid2d.shape)
                                    + 1j * rng.standard_normal(grid2d.shape))
        once = f.dealias()
        twice = once.dealias()
        assert np.array_equal(once.coeffs, twice.coeffs)

    def test_product_of_band_limited_fields_is_alias_free(self, rng):
        # modes k and l with k + l beyond the cutoff: the dealiased product
        # must match the analytic truncation of cos(kx)cos(lx)
        g = Grid(64)
        k, l = 18, 20
        cut = g.dealias_cutoffs[0]
        assert k + l > cut and k <= cut and l <= cut and abs(k - l) <= cut
        fk = field_from_function(g, lambda a, b, c: np.cos(k * a) + 0.0 * (b + c))
        fl = field_from_function(g, lambda a, b, c: np.cos(l * a) + 0.0 * (b + c))
        prod = (fk * fl).dealias()
        x = g.coords()[0]
        expect = 0.5 * np.cos((k - l) * x)  # the k+l harmonic is cut
        assert np.abs(prod.values - expect).max() <= 1e-12


class TestParity:
    def test_project_idempotent_bitwise(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        even = parity_project(f, "even")
        again = parity_project(even, "even")
        assert np.array_equal(even.coeffs, again.coeffs)

    def test_residual_zero_after_projection(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        for p in ("even", "odd"):
            assert parity_residual(parity_project(f, p), p) == 0.0

    def test_even_plus_odd_recovers_field(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        e = parity_project(f, "even")
        o = parity_project(f, "odd")
        assert l2_norm(e + o - f) <= 1e-12 * max(1.0, l2_norm(f))

    def test_reflect_involution(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        assert np.allclose(reflect_x3(reflect_x3(f)).values, f.values, atol=1e-13)

    def test_reflect_fixes_even_modes(self):
        g = Grid(8, 1, 16)
        f = field_from_function(g, lambda a, b, c: np.cos(np.pi * c) + 0.0 * (a + b))
        assert l2_norm(reflect_x3(f) - f) <= 1e-12


class TestVerticalOps:
    def test_vertical_mean_of_pure_fluctuation(self):
        g = Grid(8, 8, 8)
        f = field_from_function(g, lambda a, b, c: np.cos(a) * np.sin(np.pi * c))
        vm = vertical_mean(f)
        assert vm.grid == g.horizontal()
        assert l2_norm(vm) <= 1e-13

    def test_split_and_lift_reassemble(self, grid3d, rng):
        f = rand_field(grid3d, rng)
        mean2d, fluct = vertical_split(f)
        back = lift_horizontal(mean2d, grid3d) + fluct
        assert l2_norm(back - f) <= 1e-12 * max(1.0, l2_norm(f))
        assert l2_norm(vertical_mean(fluct)) <= 1e-12

    def test_inv_d3_inverts_on_mean_free(self):
        g = Grid(8, 1, 16)
        f = field_from_function(g, lambda a, b, c: np.sin(np.pi * c) + 0.0 * (a + b))
        assert l2_norm(diff(inv_d3(f), 2) - f) <= 1e-12

    def test_inv_d3_refuses_nonzero_mean(self):
        g = Grid(8, 1, 16)
        with pytest.raises(ProjectionError):
            inv_d3(const_field(g, 1.0))


class TestVectorCalculus:
    def test_div_of_perp_grad_vanishes(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        v = perp_grad(f)
        assert l2_norm(div_h(v)) <= 1e-11 * max(1.0, l2_norm(f))

    def test_curl_of_gradient_vanishes(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        v = grad(f, horizontal=True)
        assert l2_norm(curl_h(VecField(v[0], v[1]))) <= 1e-11 * max(1.0, l2_norm(f))

    def test_curl_of_perp_grad_is_laplacian(self, grid2d, rng):
        f = rand_field(grid2d, rng)
        c = curl_h(perp_grad(f))
        assert l2_norm(c - laplacian(f)) <= 1e-11 * max(1.0, l2_norm(laplacian(f)))

    def test_jacobian_antisymmetry(self, grid2d, rng):
        a = rand_field(grid2d, rng, kmax=8)
        b = rand_field(grid2d, rng, kmax=8)
        assert l2_norm(jacobian(a, b) + jacobian(b, a)) <= 1e-11

    def test_jacobian_self_is_zero(self, grid2d, rng):
        a = rand_field(grid2d, rng, kmax=8)
        assert l2_norm(jacobian(a, a)) <= 1e-11

    def test_jacobian_integral_vanishes(self, grid2d, rng):
        a = rand_field(grid2d, rng, kmax=8)
        b = rand_field(grid2d, rng, kmax=8)
        assert abs(integral(jacobian(a, b))) <= 1e-11

    def test_jacobian_two_mode_oracle(self):
        # J(cos x, cos y) = d1(cos x) d2(cos y) - d2(cos x) d1(cos y)
        #                 = sin x sin y
        g = Grid(32, 32)
        a = field_from_function(g, lambda x, y, z: np.cos(x) + 0.0 * (y + z))
        b = field_from_function(g, lambda x, y, z: np.cos(y) + 0.0 * (x + z))
        x, y, _ = g.coords()
        assert np.abs(jacobian(a, b).values - np.sin(x) * np.sin(y)).max() <= 1e-12


class TestRandomFields:
    def test_band_limit_respected(self, grid2d, rng):
        f = random_band_limited(grid2d, rng, kmax=5.0)
        outside = f.coeffs[grid2d.kmag > 5.0]
        assert np.abs(outside).max() == 0.0

    def test_norm_scaling(self, grid2d, rng):
        f = random_band_limited(grid2d, rng, kmax=8.0, norm="l2", scale=3.0)
        assert l2_norm(f) == pytest.approx(3.0, rel=1e-10)

    def test_seeded_reproducibility(self, grid2d):
        f = random_band_limited(grid2d, np.random.default_rng(7), 8.0)
        g = random_band_limited(grid2d, np.random.default_rng(7), 8.0)
        assert np.array_equal(f.coeffs, g.coeffs)


@settings(max_examples=25, deadline=None)
@given(
    k=st.integers(min_value=0, max_value=10),
    amp=st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
)
def test_dealias_keeps_retained_modes(k, amp):
    g = Grid(64)
    f = field_from_function(g, lambda a, b, c: amp * np.cos(k * a) + 0.0 * (b + c))
    kept = f.dealias()
    assert np.allclose(kept.values, f.values, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_parity_split_is_orthogonal(seed):
    g = Grid(8, 1, 8)
    f = random_band_limited(g, np.random.default_rng(seed), g.kmax_retained)
    e = parity_project(f, "even")
    o = parity_project(f, "odd")
    assert abs(inner(e, o)) <= 1e-10 * max(1.0, l2_norm(f) ** 2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_integration_by_parts(seed):
    g = Grid(32, 32)
    rng = np.random.default_rng(seed)
    f = random_band_limited(g, rng, 8.0)
    h = random_band_limited(g, rng, 8.0)
    lhs = inner(diff(f, 0), h)
    rhs = -inner(f, diff(h, 0))
    assert lhs == pytest.approx(rhs, abs=1e-10)
