import math

import numpy as np
import pytest
from scipy.integrate import quad

from guidewave.discretize import (DampingProfile, Grid1D, WeightSpec, gradient_1d,
                                  laplacian_1d, mode_operator, weighted_norm)


def test_grid_geometry():
    g = Grid1D(X=40.0, N=512)
    assert g.h == pytest.approx(80.0 / 513)
    assert np.allclose(g.xs, -g.xs[::-1])
    with pytest.raises(ValueError):
        Grid1D(X=40.0, N=8)


class TestLaplacian:
    def test_symmetric_negative(self, grid40, rng):
        for order in (2, 4):
            lap = laplacian_1d(grid40, order=order)
            dense = lap.as_dense()
            assert np.array_equal(dense, dense.T)
            for _ in range(5):
                u = rng.standard_normal(grid40.N)
                assert np.dot(u, dense @ u) <= 1e-10

    def test_lowest_cap_mode_rayleigh(self):
        g = Grid1D(X=10.0, N=400)
        target = (math.pi / (2 * g.X)) ** 2
        mode = np.sin(math.pi * (g.xs + g.X) / (2 * g.X))
        for order in (2, 4):
            lap = laplacian_1d(g, order=order)
            rq = -np.dot(mode, lap.apply(mode)) / np.dot(mode, mode)
            assert abs(rq - target) <= target * g.h ** 2

    def test_order2_cap_mode_is_exact_eigenvector(self):
        g = Grid1D(X=10.0, N=200)
        lap = laplacian_1d(g, order=2)
        mode = np.sin(math.pi * (g.xs + g.X) / (2 * g.X))
        exact = -(2.0 - 2.0 * math.cos(math.pi / (g.N + 1))) / g.h ** 2
        assert np.allclose(lap.apply(mode), exact * mode, atol=1e-12)

    def test_constant_vector_interior_rows(self, grid40):
        lap = laplacian_1d(grid40, order=4)
        out = lap.apply(np.ones(grid40.N))
        assert np.max(np.abs(out[2:-2])) <= 1e-10 / grid40.h ** 2 * 1e-2

    def test_plane_wave_symbol_order4(self):
        g = Grid1D(X=40.0, N=1599)  # h = 0.05
        lap = laplacian_1d(g, order=4)
        u = np.exp(1j * g.xs)
        mid = g.N // 2
        err = abs((lap.apply(u) / u)[mid] + 1.0)
        assert err <= 1e-4

    def test_order4_dispersion_beats_order2(self):
        g = Grid1D(X=40.0, N=799)
        u = np.exp(1j * 1.0 * g.xs)
        mid = g.N // 2
        errs = {}
        for order in (2, 4):
            lap = laplacian_1d(g, order=order)
            errs[order] = abs((lap.apply(u) / u)[mid] + 1.0)
        assert errs[4] < errs[2] / 50

    def test_rejects_bad_order_and_bc(self, grid40):
        with pytest.raises(ValueError):
            laplacian_1d(grid40, order=6)
        with pytest.raises(ValueError):
            laplacian_1d(grid40, end_bc="pml")


class TestDamping:
    def test_constant(self, grid40):
        a = DampingProfile.build(grid40, "constant", level=1.0)
        assert np.all(a.samples == 1.0)
        assert DampingProfile.build(grid40, "constant", level=0.0).samples.max() == 0.0

    def test_longrange_hypothesis_constants(self):
        g = Grid1D(X=200.0, N=2048)
        for rho in (0.5, 1.0, 2.0):
            a = DampingProfile.build(g, "longrange", rho=rho)
            assert np.all(a.samples >= 0.5 - 1e-14)
            assert np.all(a.samples <= 1.0)
            consts = a.hypothesis_constants(g)
            assert consts["C0"] <= 4.0
            assert consts["C1"] <= 4.0

    def test_hole_geometry(self):
        g = Grid1D(X=200.0, N=2048)
        a = DampingProfile.build(g, "hole", r=5.0, rho=2.0)
        inside = np.abs(g.xs) <= 5.0
        assert np.max(a.samples[inside]) == 0.0
        outside = np.abs(g.xs) >= a.effective_radius()
        assert np.min(a.samples[outside]) >= a.c0 - 1e-12
        # C1 smoothing: a'' stays O(1), not O(1/h), across the ramp edge
        da = np.diff(a.samples) / g.h
        assert np.max(np.abs(np.diff(da) / g.h)) < 5.0

    def test_unknown_kind(self, grid40):
        with pytest.raises(ValueError):
            DampingProfile.build(grid40, "checkerboard")


class TestModeOperator:
    def test_substitution_z_eq_i(self, grid40, damping_const):
        op = mode_operator(grid40, 0.0, damping_const, 1j)
        dense = op.dense()
        assert np.max(np.abs(dense.imag)) <= 1e-14
        lap = laplacian_1d(grid40, order=4)
        assert np.allclose(dense.real, -lap.as_dense() + 2.0 * np.eye(grid40.N))
        u = np.random.default_rng(0).standard_normal(grid40.N)
        assert np.dot(u, dense.real @ u) > 0

    def test_lambda_shift_at_z0(self, grid40, damping_const):
        op = mode_operator(grid40, 9.0, damping_const, 0.0)
        lap = laplacian_1d(grid40, order=4)
        assert np.allclose(op.dense(), -lap.as_dense() + 9.0 * np.eye(grid40.N))

    def test_shift_is_exactly_diagonal(self, grid40, damping_const):
        z = 0.3 + 0.7j
        d = mode_operator(grid40, 4.0, damping_const, z).dense() \
            - mode_operator(grid40, 4.0, damping_const, 0.0).dense()
        expected = np.diag(-1j * z * damping_const.samples - z * z)
        off = d - np.diag(np.diag(d))
        assert np.max(np.abs(off)) == 0.0
        assert np.allclose(np.diag(d), np.diag(expected), rtol=0, atol=1e-14)

    def test_smallest_singular_value_tracks_tau(self):
        # Fourier multiplier oracle: inf_xi |xi^2 - tau^2 - i tau| = |tau|
        g = Grid1D(X=40.0, N=1024)
        a = DampingProfile.build(g, "constant")
        op = mode_operator(g, 0.0, a, 10.0)
        smin = np.linalg.svd(op.dense(), compute_uv=False)[-1]
        assert smin == pytest.approx(10.0, rel=0.05)

    def test_rejects_wrong_shape_damping(self, grid40, damping_const):
        other = Grid1D(X=40.0, N=256)
        with pytest.raises(ValueError):
            mode_operator(other, 0.0, damping_const, 1j)

    def test_solve_residual_and_adjoint(self, grid40, damping_const, rng):
        op = mode_operator(grid40, 1.0, damping_const, 0.5 + 0.2j)
        f = rng.standard_normal(grid40.N) + 1j * rng.standard_normal(grid40.N)
        u = op.solve(f)
        assert np.linalg.norm(op.apply(u) - f) <= 1e-10 * np.linalg.norm(f)
        # adjoint solve consistency: <A^-1 f, g> == <f, (A^H)^-1 g>
        gvec = rng.standard_normal(grid40.N) + 1j * rng.standard_normal(grid40.N)
        lhs = np.vdot(gvec, u)
        rhs = np.vdot(op.solve_adjoint(gvec), f)
        assert abs(lhs - rhs) <= 1e-8 * abs(lhs)


class TestWeightedNorm:
    def test_constant_function(self):
        g = Grid1D(X=200.0, N=4096)
        assert weighted_norm(np.ones(g.N), g, 0.0) == pytest.approx(math.sqrt(2 * g.X), rel=1e-3)

    def test_weight_cancels(self):
        g = Grid1D(X=200.0, N=4096)
        u = (1.0 + g.xs ** 2) ** -0.5
        assert weighted_norm(u, g, 1.0) == pytest.approx(math.sqrt(2 * g.X), rel=1e-3)

    def test_gaussian_against_quadrature_oracle(self):
        g = Grid1D(X=30.0, N=2048)
        u = np.exp(-g.xs ** 2 / 8.0)
        expected = math.sqrt(quad(lambda x: (1 + x * x) ** 2 * math.exp(-x * x / 4.0),
                                  -30.0, 30.0, epsabs=1e-14, epsrel=1e-13)[0])
        assert weighted_norm(u, g, 2.0) == pytest.approx(expected, rel=1e-8)

    def test_flavors(self, rng):
        g = Grid1D(X=30.0, N=1024)
        u = np.exp(-g.xs ** 2 / 4.0)
        v = np.sin(g.xs) * np.exp(-g.xs ** 2 / 8.0)
        l2 = weighted_norm(u, g, -1.0, "L2")
        grad = weighted_norm(u, g, -1.0, "grad+L2", v=v)
        full = weighted_norm(u, g, -1.0, "H1-full", v=v)
        assert full == pytest.approx(math.sqrt(l2 ** 2 + grad ** 2), rel=1e-12)
        with pytest.raises(ValueError):
            weighted_norm(u, g, 0.0, "H2")
        with pytest.raises(ValueError):
            weighted_norm(u[:-1], g, 0.0)

    def test_gradient_order4_accuracy(self):
        g = Grid1D(X=30.0, N=2048)
        u = np.exp(-g.xs ** 2 / 8.0)
        du = gradient_1d(u, g, order=4)
        exact = -g.xs / 4.0 * u
        assert np.max(np.abs(du - exact)) <= 1e-8


class TestWeightSpec:
    def test_valid(self):
        WeightSpec(delta1=1.05, delta2=1.05, s1=0.5, s2=0.5, s=0.5, kappa=1.1) \
            .validate_decay_hypotheses(d=1, rho=2.0)

    def test_violations_are_named(self):
        spec = WeightSpec(delta1=0.0, delta2=0.0, s1=0.0, s2=0.0, s=1.5, kappa=1.1)
        with pytest.raises(ValueError) as err:
            spec.validate_decay_hypotheses(d=1, rho=2.0)
        msg = str(err.value)
        assert "s <= 1" in msg and "min(d, rho)" in msg

    def test_delta_coupling(self):
        spec = WeightSpec(delta1=0.3, delta2=1.0, s1=0.5, s2=0.5, s=0.0, kappa=1.2)
        with pytest.raises(ValueError) as err:
            spec.validate_decay_hypotheses()
        assert "delta1" in str(err.value)
