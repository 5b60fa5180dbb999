"""Zip-coordinate machinery for the flat slit in two dimensions.

The square map x = z1^2 - z2^2, y = 2 z1 z2 identifies the right half disk
with the slit disk.  In z-coordinates the weighted operator becomes

    Lbar_a u = (4 |z|^2)^{-1} div(|2 z1 z2|^a grad u),

whose weight wbar_a = |2 z1 z2|^a degenerates on both axes.  The homogeneous
solutions

    ubar_j(z) = |z1|^{-a} z1 * sum_i b_i z1^{2i} z2^{2(j-i)},
    b_i = -((j-i+1)(j-i+1-s)) / (i(i+s)) * b_{i-1},

are odd in z1, even in z2, Lbar_a-harmonic, homogeneous of degree 2s+2j, and
together with the normalized constant form an orthonormal basis of the
weighted L^2 space on the unit circle.  Boundary data expands in this basis
and extends to the interior by homogeneity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma as _gamma

from .geometry import Params
from .operator import Field, Grid2D, SolverSettings, SolveResult, avg_abs_pow, solve_fv

__all__ = [
    "zip_coords",
    "unzip_coords",
    "CircleQuadrature",
    "HomogeneousSolution",
    "make_basis",
    "make_basis_list",
    "SpectralExpansion",
    "boundary_project",
    "extend",
    "phi_functional",
    "green_check",
    "gram_matrix",
    "face_weights_zip",
    "apply_La_bar",
    "gross_flux_zip",
    "offaxis_mask",
    "disk_grid",
    "dirichlet_solve_disk",
    "omega_bar",
    "omega_norm_exact",
    "recursion_coefficients",
]


def zip_coords(z1, z2):
    """Map z = (z1, z2) to (x, y) = (z1^2 - z2^2, 2 z1 z2)."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return z1 * z1 - z2 * z2, 2.0 * z1 * z2


def unzip_coords(x, y):
    """Inverse of zip_coords on the z1 >= 0 branch (principal square root).

    The difference r -+ x cancels catastrophically on the corresponding
    half-axis, so the smaller of z1^2, z2^2 is computed through
    y^2 / (2 (r +- x)) instead.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        z1sq = np.where(x >= 0.0, (r + x) / 2.0,
                        y * y / np.maximum(2.0 * (r - x), 1e-300))
        z2sq = np.where(x >= 0.0, y * y / np.maximum(2.0 * (r + x), 1e-300),
                        (r - x) / 2.0)
    z1 = np.sqrt(np.maximum(z1sq, 0.0))
    z2 = np.sqrt(np.maximum(z2sq, 0.0))
    sgn = np.where(y >= 0.0, 1.0, -1.0)
    return z1, sgn * z2


def omega_bar(theta, a: float):
    """The boundary weight wbar_a on the unit circle: |sin 2 theta|^a."""
    with np.errstate(divide="ignore"):
        return np.abs(np.sin(2.0 * np.asarray(theta, dtype=float))) ** a


def omega_norm_exact(a: float) -> float:
    """Closed form of the total boundary weight int_0^{2pi} |sin 2t|^a dt."""
    return 2.0 * math.sqrt(math.pi) * _gamma((a + 1.0) / 2.0) / _gamma(a / 2.0 + 1.0)


class CircleQuadrature:
    """Composite Gauss-Legendre rule in angle on the unit circle, graded
    geometrically into the four axis crossings where the weight is |t|^a.

    Nodes are built on one octant and replicated by the symmetries of the
    weight, so integrals of functions odd in z1 or z2 vanish exactly.
    """

    def __init__(self, a: float, levels: int | None = None, gl_order: int = 20,
                 ratio: float = 0.1):
        if not (-1.0 < a < 1.0):
            raise ValueError("a must lie in (-1, 1)")
        if levels is None:
            # grade until the uncovered sliver contributes < ~1e-10:
            # its mass is O(delta^{1+a}), delta = (pi/4) ratio^levels
            levels = max(16, int(math.ceil(10.0 / (1.0 + a))) + 2)
        self.a = a
        self.levels = levels
        self.gl_order = gl_order
        edges = (math.pi / 4.0) * ratio ** np.arange(levels + 1)
        edges = np.concatenate([[0.0], edges[::-1]])  # ascending, sliver first
        xg, wg = np.polynomial.legendre.leggauss(gl_order)
        t_oct, w_oct = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
            t_oct.append(mid + half * xg)
            w_oct.append(half * wg)
        t_oct = np.concatenate(t_oct)
        w_oct = np.concatenate(w_oct)
        # Octant [0, pi/4] -> full circle via the 8 dihedral symmetries.
        # All node data is built from the octant parameter t: forming
        # pi/2 - t in floating point would round the deep-graded nodes onto
        # the axis and destroy the weight there.
        ct, st = np.cos(t_oct), np.sin(t_oct)
        self.z1 = np.concatenate([ct, st, -st, -ct, -ct, -st, st, ct])
        self.z2 = np.concatenate([st, ct, ct, st, -st, -ct, -ct, -st])
        self.theta = np.concatenate([
            t_oct, math.pi / 2.0 - t_oct, math.pi / 2.0 + t_oct,
            math.pi - t_oct, math.pi + t_oct, 3.0 * math.pi / 2.0 - t_oct,
            3.0 * math.pi / 2.0 + t_oct, 2.0 * math.pi - t_oct])
        self.weights = np.tile(w_oct, 8)
        self.omega = np.tile(np.abs(np.sin(2.0 * t_oct)) ** a, 8)
        self.norm_omega = float(np.sum(self.weights * self.omega))

    def integrate(self, values) -> float:
        """Integral of f wbar_a dsigma over the unit circle from node values."""
        return float(np.sum(self.weights * self.omega * np.asarray(values)))


@dataclass(frozen=True)
class HomogeneousSolution:
    """The basis element ubar_j: odd in z1, even in z2, homogeneous of degree
    2s + 2j, normalized to unit weighted L^2 norm on the unit circle."""

    j: int
    params: Params
    b: tuple
    normalized: bool = True

    @property
    def degree(self) -> float:
        return 2.0 * self.params.s + 2.0 * self.j

    def evaluate(self, z1, z2):
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        a = self.params.a
        head = np.sign(z1) * np.abs(z1) ** (1.0 - a)
        w1, w2 = z1 * z1, z2 * z2
        q = np.zeros_like(w1)
        for i, bi in enumerate(self.b):
            q = q + bi * w1 ** i * w2 ** (self.j - i)
        return head * q

    def gradient(self, z1, z2):
        """Analytic gradient (d1, d2); valid off the z2-axis for a > 0."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        a = self.params.a
        with np.errstate(divide="ignore", invalid="ignore"):
            head = np.sign(z1) * np.abs(z1) ** (1.0 - a)
            dhead = (1.0 - a) * np.abs(z1) ** (-a)
        w1, w2 = z1 * z1, z2 * z2
        q = np.zeros_like(w1)
        dq1 = np.zeros_like(w1)
        dq2 = np.zeros_like(w1)
        for i, bi in enumerate(self.b):
            k = self.j - i
            q = q + bi * w1 ** i * w2 ** k
            if i > 0:
                dq1 = dq1 + bi * 2 * i * z1 * w1 ** (i - 1) * w2 ** k
            if k > 0:
                dq2 = dq2 + bi * 2 * k * z2 * w1 ** i * w2 ** (k - 1)
        return dhead * q + head * dq1, head * dq2

    def evaluate_slit(self, x, y):
        """The same function in slit coordinates (through the unzip map)."""
        z1, z2 = unzip_coords(x, y)
        return self.evaluate(z1, z2)


def recursion_coefficients(j: int, s: float) -> np.ndarray:
    """b_0..b_j with b_0 = 1 via b_i = -((j-i+1)(j-i+1-s))/(i(i+s)) b_{i-1}."""
    b = np.ones(j + 1)
    for i in range(1, j + 1):
        b[i] = -((j - i + 1) * (j - i + 1 - s)) / (i * (i + s)) * b[i - 1]
    return b


def make_basis(j: int, p: Params, quad: CircleQuadrature | None = None) -> HomogeneousSolution:
    """Build ubar_j with b_0 > 0 scaled so the weighted boundary norm is 1."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    if quad is None:
        quad = CircleQuadrature(p.a)
    b = recursion_coefficients(j, p.s)
    raw = HomogeneousSolution(j, p, tuple(b), normalized=False)
    nrm2 = quad.integrate(raw.evaluate(quad.z1, quad.z2) ** 2)
    if not (nrm2 > 0.0 and math.isfinite(nrm2)):
        raise ArithmeticError(f"quadrature failed to normalize ubar_{j} (a={p.a})")
    return HomogeneousSolution(j, p, tuple(b / math.sqrt(nrm2)), normalized=True)


def make_basis_list(jmax: int, p: Params, quad: CircleQuadrature | None = None):
    if quad is None:
        quad = CircleQuadrature(p.a)
    return [make_basis(j, p, quad) for j in range(jmax + 1)]


@dataclass(frozen=True)
class SpectralExpansion:
    """Coefficients over {const, ubar_0..ubar_J}.

    const_coeff multiplies the constant basis element, the constant function
    of unit weighted L^2 norm on the unit circle (value norm_omega^{-1/2}).
    """

    params: Params
    const_coeff: float
    coeffs: tuple
    basis: tuple
    const_value: float

    @property
    def jmax(self) -> int:
        return len(self.coeffs) - 1

    def evaluate(self, z1, z2):
        z1 = np.asarray(z1, dtype=float)
        out = np.full_like(z1, self.const_coeff * self.const_value, dtype=float)
        for c, u in zip(self.coeffs, self.basis):
            if c != 0.0:
                out = out + c * u.evaluate(z1, z2)
        return out

    def gradient(self, z1, z2):
        z1 = np.asarray(z1, dtype=float)
        g1 = np.zeros_like(z1, dtype=float)
        g2 = np.zeros_like(z1, dtype=float)
        for c, u in zip(self.coeffs, self.basis):
            if c != 0.0:
                d1, d2 = u.gradient(z1, z2)
                g1 = g1 + c * d1
                g2 = g2 + c * d2
        return g1, g2

    def tail_bound(self, radius: float) -> float:
        """Heuristic truncation tail: first dropped homogeneity times the
        largest retained coefficient, geometrically summed inside |z| < 1."""
        s = self.params.s
        rho = float(radius) ** (2.0 * s + 2.0 * (self.jmax + 1))
        top = max((abs(c) for c in self.coeffs), default=0.0)
        return rho * top / max(1.0 - float(radius) ** 2, 1e-12)


def boundary_project(g, p: Params, J: int = 12,
                     quad: CircleQuadrature | None = None,
                     basis=None) -> SpectralExpansion:
    """Project boundary data onto {const, ubar_0..ubar_J} by quadrature.

    g: callable of the angle, or an array of samples at the quadrature nodes.
    """
    if quad is None:
        quad = CircleQuadrature(p.a)
    if J > 64:
        raise ValueError("truncation beyond the quadrature resolution")
    gv = np.asarray(g(quad.theta) if callable(g) else g, dtype=float)
    if gv.shape != quad.theta.shape:
        raise ValueError("boundary samples must match the quadrature nodes")
    if basis is None:
        basis = make_basis_list(J, p, quad)
    iota = 1.0 / math.sqrt(quad.norm_omega)
    const_coeff = quad.integrate(gv * iota)
    coeffs = [quad.integrate(gv * u.evaluate(quad.z1, quad.z2)) for u in basis]
    return SpectralExpansion(p, const_coeff, tuple(coeffs), tuple(basis), iota)


def extend(e: SpectralExpansion, z1, z2, with_tail: bool = False):
    """Evaluate the expansion in the interior (exact homogeneity, no grid)."""
    val = e.evaluate(z1, z2)
    if not with_tail:
        return val
    radius = float(np.max(np.hypot(z1, z2)))
    return val, e.tail_bound(radius)


def phi_functional(u, p: Params, lam: float, quad: CircleQuadrature | None = None) -> float:
    """Weighted boundary average of u^2 on the circle of radius lam.

    The average is taken with respect to wbar_a, so the weight's own scaling
    in lam cancels.  u may be a callable (z1, z2) -> value, an object with an
    .evaluate method, or a Field on a disk-covering grid (bilinear sampling;
    lam below 4h is refused).
    """
    if lam <= 0.0:
        raise ValueError("radius must be positive")
    if quad is None:
        quad = CircleQuadrature(p.a)
    if isinstance(u, Field):
        if lam < 4.0 * u.grid.h:
            raise ValueError("radius under 4h is not grid-resolvable")
        interp = RegularGridInterpolator((u.grid.ys, u.grid.xs), u.values)
        vals = interp(np.column_stack([lam * quad.z2, lam * quad.z1]))
    else:
        fn = u.evaluate if hasattr(u, "evaluate") else u
        vals = fn(lam * quad.z1, lam * quad.z2)
    return quad.integrate(np.asarray(vals) ** 2) / quad.norm_omega


def _radial_panels(lam: float, levels: int = 12, ratio: float = 0.25, order: int = 12):
    edges = lam * ratio ** np.arange(levels + 1)
    edges = np.concatenate([[0.0], edges[::-1]])
    xg, wg = np.polynomial.legendre.leggauss(order)
    rs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
        rs.append(mid + half * xg)
        ws.append(half * wg)
    return np.concatenate(rs), np.concatenate(ws)


def green_check(u, v, p: Params, lam: float = 0.75,
                quad: CircleQuadrature | None = None):
    """Residuals of the two Green identities for a pair of Lbar_a-harmonic
    functions on the disk of radius lam.

    Returns (|volume - boundary| of the first identity, |antisymmetric
    boundary pairing| of the second).  u and v need .evaluate and .gradient.
    """
    if quad is None:
        quad = CircleQuadrature(p.a)
    a = p.a
    z1b, z2b = lam * quad.z1, lam * quad.z2
    uv = u.evaluate(z1b, z2b)
    vv = v.evaluate(z1b, z2b)
    du1, du2 = u.gradient(z1b, z2b)
    dv1, dv2 = v.gradient(z1b, z2b)
    dnu = quad.z1 * du1 + quad.z2 * du2
    dnv = quad.z1 * dv1 + quad.z2 * dv2
    scale = lam ** (1.0 + 2.0 * a)
    bnd_uv = scale * quad.integrate(uv * dnv)
    bnd_vu = scale * quad.integrate(vv * dnu)

    rs, ws = _radial_panels(lam)
    # volume integral of grad u . grad v wbar_a over the disk
    R = rs[:, None]
    W = ws[:, None]
    g1u, g2u = u.gradient(R * quad.z1[None, :], R * quad.z2[None, :])
    g1v, g2v = v.gradient(R * quad.z1[None, :], R * quad.z2[None, :])
    dot = g1u * g1v + g2u * g2v
    radial_factor = W * R ** (1.0 + 2.0 * a)
    vol = float(np.sum(radial_factor * dot * (quad.weights * quad.omega)[None, :]))

    return abs(vol - bnd_uv), abs(bnd_uv - bnd_vu)


def gram_matrix(p: Params, jmax: int = 8, quad: CircleQuadrature | None = None):
    """Gram matrix of {const, ubar_0..ubar_jmax} in the weighted boundary
    inner product (identity when the basis is orthonormal)."""
    if quad is None:
        quad = CircleQuadrature(p.a)
    basis = make_basis_list(jmax, p, quad)
    fns = [np.full_like(quad.theta, 1.0 / math.sqrt(quad.norm_omega))]
    fns += [u.evaluate(quad.z1, quad.z2) for u in basis]
    n = len(fns)
    G = np.empty((n, n))
    for i in range(n):
        for k in range(i, n):
            G[i, k] = G[k, i] = quad.integrate(fns[i] * fns[k])
    return G


def face_weights_zip(grid: Grid2D, a: float):
    """Face weights for the zip weight |2 z1 z2|^a on a disk-covering grid.

    The factor constant along each face is evaluated at the face (exact);
    the transverse factor is averaged exactly across the cell, which keeps
    every weight finite and positive even where a face midpoint lies on an
    axis.
    """
    xs, ys, h = grid.xs, grid.ys, grid.h
    xe = xs[:-1] + h / 2.0
    ave_y = avg_abs_pow(ys - h / 2.0, ys + h / 2.0, a)
    WE = 2.0 ** a * np.abs(xe)[None, :] ** a * ave_y[:, None]
    yn = ys[:-1] + h / 2.0
    ave_x = avg_abs_pow(xs - h / 2.0, xs + h / 2.0, a)
    WN = 2.0 ** a * np.abs(yn)[:, None] ** a * ave_x[None, :]
    return WE, WN


def apply_La_bar(f: Field, p: Params) -> Field:
    """Discrete residual of Lbar_a = (4|z|^2)^{-1} div(wbar_a grad .).

    Boundary entries are zero; nodes on either axis are not meaningful (the
    weight degenerates there) and are zeroed as well -- use offaxis_mask to
    select reportable nodes.
    """
    from .operator import _flux_sum

    g = f.grid
    WE, WN = face_weights_zip(g, p.a)
    R = _flux_sum(f.values, WE, WN, g.h, False)
    X, Y = g.mesh()
    rr2 = 4.0 * (X * X + Y * Y)
    out = np.zeros_like(R)
    inner = np.zeros_like(R, dtype=bool)
    inner[1:-1, 1:-1] = True
    ok = inner & (np.abs(X) > 1e-12) & (np.abs(Y) > 1e-12)
    out[ok] = R[ok] / rr2[ok]
    return Field(g, out, p)


def gross_flux_zip(f: Field, p: Params) -> np.ndarray:
    """Sum of |face flux| / h^2 under the zip weight (unscaled): the
    cancellation scale for apply_La_bar residuals, which carry an extra
    1/(4|z|^2)."""
    g = f.grid
    WE, WN = face_weights_zip(g, p.a)
    G = np.zeros_like(f.values)
    dE = np.abs(WE * (f.values[:, 1:] - f.values[:, :-1]))
    dN = np.abs(WN * (f.values[1:, :] - f.values[:-1, :]))
    G[:, :-1] += dE
    G[:, 1:] += dE
    G[:-1, :] += dN
    G[1:, :] += dN
    return G / g.h ** 2


def offaxis_mask(grid: Grid2D, cells: float = 4.0) -> np.ndarray:
    """Interior nodes at least `cells` grid spacings from both axes."""
    X, Y = grid.mesh()
    m = (np.abs(X) >= cells * grid.h - 1e-12) & (np.abs(Y) >= cells * grid.h - 1e-12)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = False
    return m


def disk_grid(n: int, extent: float = 1.0) -> Grid2D:
    """Square grid over [-extent, extent]^2 with nodes on both axes."""
    if n % 2 != 0:
        raise ValueError("n must be even so the axes carry nodes")
    h = 2.0 * extent / n
    return Grid2D(nx=n + 1, ny=n + 1, h=h, origin=(-extent, -extent))


def dirichlet_solve_disk(p: Params, grid: Grid2D, boundary,
                         pin_radius: float | None = None,
                         settings: SolverSettings = SolverSettings()) -> SolveResult:
    """Solve div(wbar_a grad u) = 0 inside the unit disk, pinning every node
    with |z| >= pin_radius to `boundary` (callable (z1, z2) -> value).

    Solutions of this equation are exactly the Lbar_a-harmonic functions;
    the 1/(4|z|^2) factor only rescales residuals.
    """
    if pin_radius is None:
        pin_radius = 1.0 - 2.0 * grid.h
    X, Y = grid.mesh()
    rr = np.hypot(X, Y)
    pinned = rr >= pin_radius
    pinned[0, :] = pinned[-1, :] = pinned[:, 0] = pinned[:, -1] = True
    pvals = np.where(pinned, boundary(X, Y), 0.0)
    WE, WN = face_weights_zip(grid, p.a)
    rhs = np.zeros_like(pvals)
    return solve_fv(grid, WE, WN, False, pinned, pvals, rhs, settings, p)
