import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slit_harmonic.analysis import (
    ApproxSystem,
    PolyXR,
    StructureError,
    a_harmonic_companion,
    homogeneity_slope,
    quotient_expand,
    random_system,
    recompute_rhs,
    solve_approx_system,
)
from slit_harmonic.geometry import Params, SlitGeometry, profile_u_a_flat
from slit_harmonic.operator import Field, Grid2D, apply_La, dirichlet_solve
from slit_harmonic.spectral import make_basis, unzip_coords

FLAT = SlitGeometry(mode="flat")


def reflected_grid(n, width=2.0, height=1.0):
    h = width / n
    return Grid2D(nx=n + 1, ny=int(round(height / h)) + 1, h=h,
                  origin=(-width / 2, 0.0), reflection=True)


class TestPolyXR:
    def test_norm_and_degree(self):
        P = PolyXR(1, {((1,), 0): 2.0, ((0,), 3): -4.0})
        assert P.norm() == 4.0
        assert P.degree == 3

    def test_zero_extension(self):
        P = PolyXR(2, {((1, 0), 1): 1.0})
        assert P.get((5, 5), 9) == 0.0

    def test_evaluation(self):
        P = PolyXR(1, {((0,), 0): 1.0, ((1,), 0): 1.0, ((0,), 1): 1.0})
        assert P(np.array([[2.0]]), np.array(3.0)) == pytest.approx(6.0)


class TestSolveSystem:
    def test_hand_eliminated_k0(self):
        # single equation: A = 2 p_{0,1} + 2s p_{1,0}
        p = Params.from_s(0.3)
        sys = ApproxSystem(k=0, params=p, n=1,
                           rhs={((0,), 0): 1.7}, seed={(0,): 0.4, (1,): 0.9,
                                                       (2,): 0.0})
        P = solve_approx_system(sys)
        assert P.get((0,), 1) == pytest.approx((1.7 - 2 * p.s * 0.9) / 2.0, abs=1e-15)

    def test_zero_data_gives_zero(self):
        p = Params.from_s(0.5)
        sys = ApproxSystem(k=2, params=p, n=1, rhs={}, seed={})
        P = solve_approx_system(sys)
        assert P.norm() == 0.0

    @pytest.mark.parametrize("n", [1, 2])
    def test_round_trip_flat(self, n):
        p = Params.from_s(0.25)
        rng = np.random.default_rng(1)
        for _ in range(10):
            sys = random_system(4, p, rng, n=n, flat=True)
            P = solve_approx_system(sys)
            back = recompute_rhs(sys, P)
            defect = max(abs(back[idx] - sys.rhs.get(idx, 0.0)) for idx in back)
            assert defect < 1e-12

    @pytest.mark.parametrize("n", [1, 2])
    def test_round_trip_perturbed(self, n):
        p = Params.from_s(0.75)
        rng = np.random.default_rng(2)
        for _ in range(10):
            sys = random_system(4, p, rng, n=n, c_max=0.1)
            P = solve_approx_system(sys)
            back = recompute_rhs(sys, P)
            defect = max(abs(back[idx] - sys.rhs.get(idx, 0.0)) for idx in back)
            assert defect < 1e-12

    def test_structure_violation_rejected(self):
        p = Params.from_s(0.5)
        with pytest.raises(StructureError):
            ApproxSystem(k=1, params=p, n=1,
                         perturbation={((0,), 0): {((3,), 0): 0.05}})

    @given(st.integers(0, 4), st.floats(0.1, 0.9))
    @settings(max_examples=20, deadline=None)
    def test_round_trip_property(self, k, s):
        rng = np.random.default_rng(k * 100 + int(s * 1000))
        sys = random_system(k, Params.from_s(s), rng, n=1, c_max=0.1)
        P = solve_approx_system(sys)
        back = recompute_rhs(sys, P)
        assert max(abs(back[i] - sys.rhs.get(i, 0.0)) for i in back) < 1e-12


class TestCompanion:
    def test_k0_constant(self):
        p = Params.from_s(0.5)
        P = a_harmonic_companion(0, p, {(0,): 1.0})
        assert P.coeffs == {((0,), 0): 1.0}

    @pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
    def test_zipped_basis_members_reproduced(self, a):
        # ubar_j through the unzip map equals profile * polynomial whose
        # x-only coefficients seed the companion; the companion must then
        # reproduce the whole polynomial
        p = Params.from_a(a)
        for j in (1, 2, 3):
            u = make_basis(j, p)
            # expand prod_i b_i ((r+x)/2)^i ((r-x)/2)^{j-i} into x^mu r^m
            half = np.polynomial.polynomial
            coeffs = {}
            for i, bi in enumerate(u.b):
                # ((r+x)/2)^i ((r-x)/2)^{j-i}: expand via binomials in (x, r)
                for t1 in range(i + 1):
                    for t2 in range(j - i + 1):
                        c = (bi * math.comb(i, t1) * math.comb(j - i, t2)
                             * (-1.0) ** t2 / 2.0 ** j)
                        key = ((t1 + t2,), j - t1 - t2)
                        coeffs[key] = coeffs.get(key, 0.0) + c
            Pj = PolyXR(1, coeffs)
            seed = {mu: v for (mu, m), v in Pj.coeffs.items() if m == 0}
            comp = a_harmonic_companion(j, p, seed)
            diff = max(abs(comp.get(mu, m) - Pj.get(mu, m))
                       for (mu, m) in set(comp.coeffs) | set(Pj.coeffs))
            assert diff < 1e-10

    def test_k2_discrete_residual_refines(self):
        # profile * companion is annihilated by the weighted stencil up to
        # the scheme's own truncation order (refinement oracle)
        p = Params.from_s(0.4)
        comp = a_harmonic_companion(2, p, {(0,): 1.0, (1,): -0.7, (2,): 0.3})
        sups = []
        for n in (64, 128, 256):
            g = reflected_grid(n)
            X, Y = g.mesh()
            r = np.hypot(X, Y)
            vals = profile_u_a_flat(p, X, Y) * comp(X[..., None], r)
            f = Field(g, vals, p)
            res = np.abs(apply_La(f).values)
            dist = np.where(X <= 0, np.abs(Y), r)
            keep = (dist > 0.1) & (np.abs(X) < 0.9) & (Y > 0.05) & (Y < 0.9)
            keep[:, 0] = keep[:, -1] = keep[-1, :] = False
            sups.append(res[keep].max())
        assert sups[2] < sups[1] < sups[0]
        assert math.log2(sups[1] / sups[2]) > 1.5


class TestHomogeneitySlope:
    def test_flat_profile_slope_is_s(self):
        p = Params.from_s(0.6)
        slope = homogeneity_slope(lambda x, y: profile_u_a_flat(p, x, y),
                                  (0.0, 0.0), [2.0 ** -k for k in range(1, 6)])
        assert slope == pytest.approx(p.s, abs=0.02)

    @pytest.mark.parametrize("j,expected_shift", [(1, 1.0), (2, 2.0)])
    def test_zipped_modes(self, j, expected_shift):
        # zipped ubar_j is homogeneous of degree s + j in the slit frame
        p = Params.from_s(0.5)
        u = make_basis(j, p)
        slope = homogeneity_slope(lambda x, y: u.evaluate_slit(x, y),
                                  (0.0, 0.0), [2.0 ** -k for k in range(1, 6)])
        assert slope == pytest.approx(p.s + expected_shift, abs=0.02)

    def test_scalar_invariance(self):
        p = Params.from_s(0.35)
        scales = [2.0 ** -k for k in range(1, 5)]
        s1 = homogeneity_slope(lambda x, y: profile_u_a_flat(p, x, y), (0, 0), scales)
        s2 = homogeneity_slope(lambda x, y: 7.3 * profile_u_a_flat(p, x, y), (0, 0), scales)
        assert s1 == pytest.approx(s2, abs=1e-12)

    def test_field_input(self):
        p = Params.from_s(0.5)
        g = reflected_grid(256)
        f = Field.from_function(g, lambda x, y: profile_u_a_flat(p, x, y), p)
        slope = homogeneity_slope(f, (0.0, 0.0), [0.0625, 0.125, 0.25, 0.5])
        assert slope == pytest.approx(p.s, abs=0.05)

    def test_zero_function_flagged(self):
        g = reflected_grid(32)
        f = Field(g, np.zeros((g.ny, g.nx)))
        with pytest.raises(ValueError):
            homogeneity_slope(f, (0.0, 0.0), [0.25, 0.5])


class TestQuotientExpand:
    def test_exact_polynomial_quotient(self):
        p = Params.from_s(0.5)
        g = reflected_grid(256)
        X, Y = g.mesh()
        r = np.hypot(X, Y)
        U = Field(g, profile_u_a_flat(p, X, Y), p)
        u = Field(g, U.values * (1.0 + X + r), p)
        fit = quotient_expand(u, U, k=1)
        assert fit.poly.get((0,), 0) == pytest.approx(1.0, abs=1e-6)
        assert fit.poly.get((1,), 0) == pytest.approx(1.0, abs=1e-6)
        assert fit.poly.get((0,), 1) == pytest.approx(1.0, abs=1e-6)
        assert all(res < 1e-10 for res in fit.annulus_residuals)

    def test_quotient_of_itself_is_one(self):
        p = Params.from_s(0.3)
        g = reflected_grid(128)
        X, Y = g.mesh()
        U = Field(g, profile_u_a_flat(p, X, Y) + 0.1, p)
        fit = quotient_expand(U, U, k=0, annuli=(0.5, 0.25, 0.125))
        assert fit.poly.get((0,), 0) == pytest.approx(1.0, abs=1e-12)
        assert max(fit.annulus_residuals) < 1e-12

    def test_swap_inverts_constant_term(self):
        p = Params.from_s(0.5)
        g = reflected_grid(256)
        X, Y = g.mesh()
        r = np.hypot(X, Y)
        base = profile_u_a_flat(p, X, Y) + 0.2
        u = Field(g, base * (2.0 + 0.1 * X + 0.05 * r), p)
        U = Field(g, base, p)
        fwd = quotient_expand(u, U, k=1)
        bwd = quotient_expand(U, u, k=1)
        assert bwd.poly.get((0,), 0) == pytest.approx(
            1.0 / fwd.poly.get((0,), 0), abs=1e-4)

    def test_harmonic_pair_residual_decay(self):
        # u with an extra smooth factor against the pure profile: the
        # quotient is C^1-like, so a degree-1 fit leaves residuals decaying
        # faster than scale^1.5
        p = Params.from_s(0.5)
        g = reflected_grid(512, width=2.0, height=1.0)
        X, Y = g.mesh()
        r = np.hypot(X, Y)
        U = Field(g, profile_u_a_flat(p, X, Y), p)
        u = Field(g, U.values * np.exp(0.3 * X + 0.2 * r), p)
        fit = quotient_expand(u, U, k=1, annuli=(0.5, 0.25, 0.125, 0.0625))
        assert fit.residual_exponent > 1.5

    def test_thin_annuli_flagged(self):
        p = Params.from_s(0.5)
        g = reflected_grid(16)
        U = Field.from_function(g, lambda x, y: np.ones_like(x), p)
        with pytest.raises(ValueError):
            quotient_expand(U, U, k=1, annuli=(0.001, 0.0005))
