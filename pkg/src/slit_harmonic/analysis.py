"""Regularity analytics: polynomials in the (x, r) frame, the graded linear
systems tying their coefficients to weighted-operator right-hand sides,
blow-up homogeneity slopes, and quotient expansions over annuli.

For a polynomial P = p_{mu m} x^mu r^m multiplied against the slit profile,
the weighted operator produces coefficients

    A_{sig l} = (l+1)(l+2+2 sig_n) p_{sig, l+1} + 2s (sig_n + 1) p_{sig+n, l}
                + (sig_i + 1)(sig_i + 2) p_{sig + 2i, l-1}
                + c^{mu m}_{sig l} p_{mu m},

with the perturbation c supported on |mu| + m <= |sig| + l <= k + 1.  Given
the A's and the r-free seed coefficients p_{mu 0}, the remaining coefficients
follow by graded elimination: ascending total degree, then ascending r-power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Params

__all__ = [
    "PolyXR",
    "ApproxSystem",
    "StructureError",
    "solve_approx_system",
    "recompute_rhs",
    "a_harmonic_companion",
    "homogeneity_slope",
    "quotient_expand",
    "random_system",
]


class StructureError(ValueError):
    """Perturbation coefficients outside the graded structure."""


def _as_mu(mu, n: int) -> tuple:
    mu = (mu,) if isinstance(mu, int) else tuple(int(v) for v in mu)
    if len(mu) != n or any(v < 0 for v in mu):
        raise ValueError(f"bad multi-index {mu} for n={n}")
    return mu


@dataclass(frozen=True)
class PolyXR:
    """Polynomial sum p_{mu m} x^mu r^m; coefficients extend by zero."""

    n: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (mu, m), v in self.coeffs.items():
            mu = _as_mu(mu, self.n)
            if m < 0:
                raise ValueError("negative r-power")
            if v != 0.0:
                clean[(mu, int(m))] = float(v)
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        return max((sum(mu) + m for (mu, m) in self.coeffs), default=0)

    def norm(self) -> float:
        """max |p_{mu m}|."""
        return max((abs(v) for v in self.coeffs.values()), default=0.0)

    def get(self, mu, m: int) -> float:
        return self.coeffs.get((_as_mu(mu, self.n), m), 0.0)

    def __call__(self, x, r):
        x = np.atleast_2d(np.asarray(x, dtype=float))  # (N, n)
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r, dtype=float)
        for (mu, m), v in self.coeffs.items():
            term = np.full_like(r, v)
            for i, e in enumerate(mu):
                if e:
                    term = term * x[..., i] ** e
            if m:
                term = term * r ** m
            out = out + term
        return out


def _indices_upto(n: int, total: int):
    """All (mu, m) with |mu| + m <= total."""
    out = []
    if n == 1:
        for m in range(total + 1):
            for mu1 in range(total - m + 1):
                out.append(((mu1,), m))
    elif n == 2:
        for m in range(total + 1):
            for mu1 in range(total - m + 1):
                for mu2 in range(total - m - mu1 + 1):
                    out.append(((mu1, mu2), m))
    else:
        raise ValueError("only n = 1 or 2 spatial variables are supported")
    return out


def _mus_of_degree(n: int, d: int):
    """All multi-indices mu with |mu| = d."""
    if n == 1:
        return [(d,)]
    return [(d - i, i) for i in range(d + 1)]


@dataclass(frozen=True)
class ApproxSystem:
    """Data of the graded system: degree index k (equations over
    |sig| + l <= k + 1 determine a polynomial of degree k + 2)."""

    k: int
    params: Params
    n: int = 1
    rhs: dict = field(default_factory=dict)
    seed: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)

    def __post_init__(self):
        rhs = {(_as_mu(s, self.n), int(l)): float(v)
               for (s, l), v in self.rhs.items()}
        seed = {_as_mu(m, self.n): float(v) for m, v in self.seed.items()}
        pert = {}
        for (sig, l), row in self.perturbation.items():
            sig = _as_mu(sig, self.n)
            grade = sum(sig) + l
            if grade > self.k + 1:
                raise StructureError(f"equation index {(sig, l)} beyond k+1")
            crow = {}
            for (mu, m), c in row.items():
                mu = _as_mu(mu, self.n)
                if c == 0.0:
                    continue
                if not (sum(mu) + m <= grade):
                    raise StructureError(
                        f"c^{(mu, m)}_{(sig, l)} violates |mu|+m <= |sig|+l")
                crow[(mu, int(m))] = float(c)
            if crow:
                pert[(sig, int(l))] = crow
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "perturbation", pert)


def _equation_terms(sig, l, n, s, coeffs, pert_row):
    """All terms of the (sig, l) relation except the leading p_{sig, l+1}."""
    acc = 0.0
    nbar = tuple(1 if i == n - 1 else 0 for i in range(n))
    sig_up = tuple(a + b for a, b in zip(sig, nbar))
    acc += 2.0 * s * (sig[-1] + 1) * coeffs.get((sig_up, l), 0.0)
    if l >= 1:
        for i in range(n):
            sig2 = tuple(a + (2 if j == i else 0) for j, a in enumerate(sig))
            acc += (sig[i] + 1) * (sig[i] + 2) * coeffs.get((sig2, l - 1), 0.0)
    for (mu, m), c in pert_row.items():
        acc += c * coeffs.get((mu, m), 0.0)
    return acc


def solve_approx_system(sys: ApproxSystem) -> PolyXR:
    """Graded elimination for the degree-(k+2) polynomial given the rhs
    coefficients and the r-free seeds."""
    n, s, deg = sys.n, sys.params.s, sys.k + 2
    coeffs = {}
    for (mu, m) in _indices_upto(n, deg):
        if m == 0:
            coeffs[(mu, 0)] = sys.seed.get(mu, 0.0)
    for grade in range(1, deg + 1):
        for m in range(1, grade + 1):
            l = m - 1
            for sig in _mus_of_degree(n, grade - m):
                lead = (l + 1) * (l + 2 + 2 * sig[-1])
                rest = _equation_terms(sig, l, n, s, coeffs,
                                       sys.perturbation.get((sig, l), {}))
                A = sys.rhs.get((sig, l), 0.0)
                coeffs[(sig, m)] = (A - rest) / lead
    return PolyXR(n, coeffs)


def recompute_rhs(sys: ApproxSystem, P: PolyXR) -> dict:
    """Forward evaluation of every A_{sig l} from a polynomial (oracle for
    the elimination round trip)."""
    n, s = sys.n, sys.params.s
    out = {}
    for (sig, l) in _indices_upto(n, sys.k + 1):
        lead = (l + 1) * (l + 2 + 2 * sig[-1]) * P.coeffs.get((sig, l + 1), 0.0)
        rest = _equation_terms(sig, l, n, s, P.coeffs,
                               sys.perturbation.get((sig, l), {}))
        out[(sig, l)] = lead + rest
    return out


def a_harmonic_companion(k: int, p: Params, seed: dict, n: int = 1) -> PolyXR:
    """Degree-k polynomial with vanishing rhs in the flat frame, so that
    profile * polynomial is annihilated by the weighted operator off the
    slit; determined by the r-free seeds."""
    deg = k
    coeffs = {}
    for (mu, m) in _indices_upto(n, deg):
        if m == 0:
            coeffs[(mu, 0)] = float(seed.get(_as_mu(mu, n), 0.0))
    for grade in range(1, deg + 1):
        for m in range(1, grade + 1):
            l = m - 1
            for sig in _mus_of_degree(n, grade - m):
                lead = (l + 1) * (l + 2 + 2 * sig[-1])
                rest = _equation_terms(sig, l, n, p.s, coeffs, {})
                coeffs[(sig, m)] = -rest / lead
    return PolyXR(n, coeffs)


def random_system(k: int, p: Params, rng, n: int = 1, c_max: float = 0.1,
                  flat: bool = False) -> ApproxSystem:
    """Seeded instance with structure-respecting perturbation |c| <= c_max."""
    rhs = {idx: rng.normal() for idx in _indices_upto(n, k + 1)}
    seed = {mu: rng.normal() for (mu, m) in _indices_upto(n, k + 2) if m == 0}
    pert = {}
    if not flat:
        for (sig, l) in _indices_upto(n, k + 1):
            row = {}
            for (mu, m) in _indices_upto(n, sum(sig) + l):
                if rng.random() < 0.5:
                    row[(mu, m)] = rng.uniform(-c_max, c_max)
            if row:
                pert[(sig, l)] = row
    return ApproxSystem(k=k, params=p, n=n, rhs=rhs, seed=seed, perturbation=pert)


def homogeneity_slope(f, center, scales, grid=None) -> float:
    """Least-squares slope of log sup_{B_lam(center)} |f| against log lam.

    f: a Field (sup over grid nodes in each ball) or a callable (x, y)
    sampled on polar fans around the center.  Scalar multiples of f give
    exactly the same slope.
    """
    from .operator import Field

    scales = np.asarray(sorted(scales), dtype=float)
    sups = []
    if isinstance(f, Field):
        g = f.grid
        if scales[0] < 4.0 * g.h:
            raise ValueError("smallest scale is below 4h")
        X, Y = g.mesh()
        dist = np.hypot(X - center[0], Y - center[1])
        for lam in scales:
            m = dist <= lam
            if not np.any(m):
                raise ValueError(f"no nodes inside radius {lam}")
            sups.append(float(np.max(np.abs(f.values[m]))))
    else:
        ang = np.linspace(0.0, math.pi, 64)
        rad = np.linspace(0.05, 1.0, 32)
        for lam in scales:
            R = lam * rad[:, None]
            xs = center[0] + R * np.cos(ang)[None, :]
            ys = center[1] + R * np.sin(ang)[None, :]
            sups.append(float(np.max(np.abs(f(xs, ys)))))
    sups = np.asarray(sups)
    if sups[-1] == 0.0:
        raise ValueError("function vanishes on the largest ball; slope undefined")
    good = sups > 0.0
    if good.sum() < 2:
        raise ValueError("not enough nonvanishing scales for a slope")
    return float(np.polyfit(np.log(scales[good]), np.log(sups[good]), 1)[0])


@dataclass(frozen=True)
class QuotientFit:
    poly: PolyXR
    residual_exponent: float
    annulus_radii: tuple
    annulus_residuals: tuple


def quotient_expand(u, U, k: int, center=(0.0, 0.0),
                    annuli=(0.5, 0.25, 0.125, 0.0625, 0.03125),
                    positivity_floor: float = 0.0) -> QuotientFit:
    """Weighted least-squares fit of u/U against monomials x^mu r^m over
    nested annuli centered on a slit-edge point, plus the decay exponent of
    the per-annulus residual (95th percentile, robust to slit-edge noise).

    u, U: Fields on the same reflected grid.  x is measured from the center
    along the row, r = hypot(x - cx, y).  Nodes within 2h of the slit
    {x <= cx, y = 0} or where U is not positive are excluded.
    """
    g = u.grid
    if U.grid != g:
        raise ValueError("fields must share a grid")
    X, Y = g.mesh()
    dx = X - center[0]
    r = np.hypot(dx, Y - center[1])
    dist_slit = np.where(dx <= 0, np.abs(Y - center[1]), r)
    base = (dist_slit >= 2.0 * g.h) & (U.values > positivity_floor)

    radii = np.asarray(sorted(annuli, reverse=True), dtype=float)
    masks = [base & (r <= R) & (r > R / 2.0) for R in radii]
    if any(int(m.sum()) < 8 for m in masks):
        raise ValueError("annuli too thin for a stable fit on this grid")

    terms = [idx for idx in _indices_upto(1, k)]
    rows, q, w = [], [], []
    for m, R in zip(masks, radii):
        cnt = int(m.sum())
        xs = dx[m]
        rs = r[m]
        cols = [xs ** mu[0] * rs ** mm for (mu, mm) in terms]
        rows.append(np.column_stack(cols))
        q.append(u.values[m] / U.values[m])
        # equalize annuli and normalize residuals by the target decay
        # R^{k+1}, so the fit tends to the tangent polynomial at the center
        w.append(np.full(cnt, 1.0 / (cnt * R ** (2.0 * (k + 1)))))
    A = np.vstack(rows)
    b = np.concatenate(q)
    ww = np.sqrt(np.concatenate(w))
    sol, _, rank, sv = np.linalg.lstsq(A * ww[:, None], b * ww, rcond=None)
    if rank < len(terms) or (sv[0] > 0 and sv[-1] / sv[0] < 1e-12):
        raise ValueError("normal equations ill-conditioned (annuli too thin)")
    poly = PolyXR(1, {idx: c for idx, c in zip(terms, sol)})

    res = []
    for m, R in zip(masks, radii):
        xs = dx[m][:, None]
        pred = poly(xs, r[m])
        res.append(float(np.percentile(np.abs(u.values[m] / U.values[m] - pred), 95)))
    res = np.asarray(res)
    pos = res > 1e-14
    if pos.sum() >= 2:
        expo = float(np.polyfit(np.log(radii[pos]), np.log(res[pos]), 1)[0])
    else:
        expo = math.inf
    return QuotientFit(poly, expo, tuple(radii), tuple(res))
