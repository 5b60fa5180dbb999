import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slit_harmonic.geometry import (
    CutLocusError,
    OutOfDomainError,
    Params,
    Point,
    PowerCurve,
    SlitGeometry,
    geometry_from_json,
    normal_curvature,
    profile_u_a,
    profile_u_a_flat,
    signed_distance,
    slit_distance,
)

CURVE = SlitGeometry(mode="curve", gamma=PowerCurve(0.2, 1.5), holder_exponent=0.5)
FLAT = SlitGeometry(mode="flat")


def brute_force_distance(geom, q, n=10 ** 6):
    """Oracle: exhaustive nearest-point scan over n edge samples."""
    t = np.linspace(-geom.t_max, geom.t_max, n)
    g = geom.gamma.value(t)
    d2 = (t - q[0]) ** 2 + (g - q[1]) ** 2
    dist = math.sqrt(float(np.min(d2)))
    sign = 1.0 if q[1] >= float(geom.gamma.value(q[0])) else -1.0
    return sign * dist


class TestParams:
    def test_from_s(self):
        p = Params.from_s(0.75)
        assert p.a == 1.0 - 2.0 * 0.75
        assert p.s == 0.75

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            Params.from_a(1.0)
        with pytest.raises(ValueError):
            Params.from_a(-1.2)
        with pytest.raises(ValueError):
            Params(a=0.5, s=0.5)

    @given(st.floats(min_value=-0.99, max_value=0.99))
    def test_consistency_roundtrip(self, a):
        p = Params.from_a(a)
        assert abs(p.a - (1.0 - 2.0 * p.s)) < 1e-15


class TestSignedDistance:
    def test_flat_positive(self):
        assert signed_distance(FLAT, 0.3) == pytest.approx(0.3, abs=0)

    def test_flat_negative(self):
        assert signed_distance(FLAT, -0.5) == pytest.approx(-0.5, abs=0)

    def test_curve_above_tip(self):
        # the nearby branches undercut the straight drop by O(1e-6) only
        d = signed_distance(CURVE, (0.0, 0.1))
        assert d == pytest.approx(0.1, abs=1e-5)
        assert d <= 0.1

    def test_curve_matches_brute_force(self):
        q = (0.4, 0.3)
        assert signed_distance(CURVE, q) == pytest.approx(
            brute_force_distance(CURVE, q), abs=1e-6)

    def test_curve_matches_brute_force_random(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(-1.0, 1.0, size=(20, 2))
        for q in pts:
            assert signed_distance(CURVE, q) == pytest.approx(
                brute_force_distance(CURVE, q, n=10 ** 6), abs=1e-6)

    def test_sign_change_across_edge(self):
        assert signed_distance(CURVE, (0.5, 0.5)) > 0
        assert signed_distance(CURVE, (0.5, -0.5)) < 0

    def test_out_of_domain(self):
        with pytest.raises(OutOfDomainError):
            signed_distance(CURVE, (3.0, 0.0))


class TestSlitDistance:
    def test_flat_345(self):
        assert slit_distance(FLAT, Point((0.3,), 0.4)) == pytest.approx(0.5, abs=1e-15)

    def test_flat_on_axis(self):
        assert slit_distance(FLAT, Point((-1.0,), 0.0)) == pytest.approx(1.0, abs=0)

    def test_curve_random_matches_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.uniform(-0.8, 0.8, size=2)
            y = rng.uniform(-0.5, 0.5)
            d = brute_force_distance(CURVE, x)
            assert slit_distance(CURVE, Point(tuple(x), y)) == pytest.approx(
                math.hypot(y, d), abs=1e-6)


class TestNormalCurvature:
    def test_flat_limit(self):
        geom = SlitGeometry(mode="curve", gamma=PowerCurve(0.0, 2.0))
        nu, kappa = normal_curvature(geom, (0.3, 0.2))
        assert np.allclose(nu, [0.0, 1.0], atol=1e-12)
        assert kappa == pytest.approx(0.0, abs=1e-12)

    def test_parabola_vertex_curvature_sign(self):
        # kappa := -Lap d.  For gamma = c t^2, d ~ x2 - c x1^2 near 0, so
        # Lap d = -2c and kappa(0) = +2c; cross-checked against FD below.
        c = 0.3
        geom = SlitGeometry(mode="curve", gamma=PowerCurve(c, 2.0))
        eps = 1e-4
        _, kappa = normal_curvature(geom, (0.0, eps))
        assert kappa == pytest.approx(2 * c, rel=1e-3)

        def d(x1, x2):
            return geom.signed_distance_batch(np.array([[x1, x2]]))[0]

        h = 1e-4
        x0 = (0.02, 0.05)
        lap = (d(x0[0] + h, x0[1]) + d(x0[0] - h, x0[1]) + d(x0[0], x0[1] + h)
               + d(x0[0], x0[1] - h) - 4 * d(*x0)) / h ** 2
        _, kappa0 = normal_curvature(geom, x0)
        assert kappa0 == pytest.approx(-lap, abs=5e-3)

    def test_normal_matches_fd_gradient(self):
        rng = np.random.default_rng(11)
        h = 1e-5
        for _ in range(6):
            q = rng.uniform(-0.7, 0.7, size=2)
            if abs(signed_distance(CURVE, q)) < 0.05 or q[0] * q[1] == 0:
                continue
            if q[1] > 0 and abs(q[0]) < 0.2:
                continue  # stay away from the medial axis over the tip
            nu, _ = normal_curvature(CURVE, q)
            gx = (signed_distance(CURVE, (q[0] + h, q[1]))
                  - signed_distance(CURVE, (q[0] - h, q[1]))) / (2 * h)
            gy = (signed_distance(CURVE, (q[0], q[1] + h))
                  - signed_distance(CURVE, (q[0], q[1] - h))) / (2 * h)
            assert np.allclose(nu, [gx, gy], atol=1e-4)

    def test_cut_locus_flagged(self):
        with pytest.raises(CutLocusError):
            normal_curvature(CURVE, (0.0, 0.4))


class TestProfile:
    def test_flat_unit(self):
        for s in (0.25, 0.5, 0.75):
            assert profile_u_a(FLAT, Params.from_s(s), Point((1.0,), 0.0)) == pytest.approx(1.0)

    def test_flat_on_slit(self):
        assert profile_u_a(FLAT, Params.from_s(0.5), Point((-0.5,), 0.0)) == 0.0

    def test_half_laplacian_closed_form(self):
        # s = 1/2: profile equals Re sqrt(x + i y) (principal branch)
        p = Params.from_s(0.5)
        xs, ys = np.meshgrid(np.linspace(-1, 1, 41), np.linspace(-1, 1, 41))
        got = profile_u_a_flat(p, xs, ys)
        want = np.real(np.sqrt(xs + 1j * ys))
        assert np.max(np.abs(got - want)) < 1e-12

    def test_two_forms_agree(self):
        # ((r+d)/2)^s == |y|^{2s} / (2^s (r-d)^s) wherever y != 0, d < 0
        rng = np.random.default_rng(5)
        for s in (0.3, 0.5, 0.9):
            p = Params.from_s(s)
            x = -rng.uniform(0.01, 1.0, size=200)
            y = rng.uniform(0.01, 1.0, size=200) * rng.choice([-1, 1], size=200)
            r = np.hypot(x, y)
            direct = ((r + x) / 2.0) ** s
            alt = np.abs(y) ** (2 * s) / (2 ** s * (r - x) ** s)
            got = profile_u_a_flat(p, x, y)
            assert np.max(np.abs(got - alt) / alt) < 1e-12
            assert np.max(np.abs(direct - alt) / alt) < 1e-7  # naive form loses digits

    def test_curve_mode_uses_signed_distance(self):
        p = Params.from_s(0.5)
        X = Point((0.4, 0.3), 0.2)
        d = signed_distance(CURVE, X.x)
        r = math.hypot(X.y, d)
        assert profile_u_a(CURVE, p, X) == pytest.approx(((r + d) / 2) ** p.s, rel=1e-12)


class TestGradProperties:
    def test_grad_r_unit_norm(self):
        # |grad r| = 1 off the slit, checked by central differences
        rng = np.random.default_rng(19)
        p_checked = 0
        h = 1e-5
        while p_checked < 100:
            x = rng.uniform(-0.8, 0.8, size=2)
            y = rng.uniform(-0.6, 0.6)
            d = signed_distance(CURVE, x)
            if math.hypot(y, d) < 0.01 or (x[1] > 0 and abs(x[0]) < 0.2):
                continue

            def r(x1, x2, yy):
                dd = signed_distance(CURVE, (x1, x2))
                return math.hypot(yy, dd)

            g = np.array([
                (r(x[0] + h, x[1], y) - r(x[0] - h, x[1], y)) / (2 * h),
                (r(x[0], x[1] + h, y) - r(x[0], x[1] - h, y)) / (2 * h),
                (r(x[0], x[1], y + h) - r(x[0], x[1], y - h)) / (2 * h),
            ])
            assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-4)
            p_checked += 1


class TestJson:
    def test_flat_doc(self):
        geom = geometry_from_json('{"mode": "flat"}')
        assert geom.mode == "flat"
        assert geom.n == 1

    def test_curve_doc(self):
        geom = geometry_from_json(
            '{"mode": "curve", "gamma": {"kind": "power", "amplitude": 0.2,'
            ' "exponent": 1.5}, "alpha": 0.5}')
        assert geom.n == 2
        assert geom.gamma.amplitude == 0.2
        assert geom.holder_exponent == 0.5
