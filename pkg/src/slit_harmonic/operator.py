"""Discrete weighted operator div(|y|^a grad u), slit Dirichlet solves, and
the extension flux at {y = 0}.

Discretization: finite volumes on a uniform square grid with face-centered
weights.  Horizontal faces of the row sitting exactly on {y = 0} take the
exact cell average of |y|^a instead of the (singular) midpoint value; every
other face uses the midpoint, which is exact for the faces normal to y.
Reflected grids treat {y = 0} as an even-symmetry row.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Params, SlitGeometry

__all__ = [
    "Grid2D",
    "Field",
    "SolverSettings",
    "SolveResult",
    "SolverConvergenceError",
    "avg_abs_pow",
    "face_weights_y",
    "apply_La",
    "solve_fv",
    "dirichlet_solve",
    "flux_limit",
    "flux_limit_row",
    "weighted_energy",
    "dump_csv",
    "load_csv",
]


class SolverConvergenceError(RuntimeError):
    """Iterative solve failed; carries the residual history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = np.asarray(history)


@dataclass(frozen=True)
class Grid2D:
    """Uniform square-cell grid; node (i, j) sits at origin + (i h, j h).

    Arrays over the grid are indexed [j, i] (rows = y).  With reflection set,
    row j = 0 lies on {y = 0} and fields are understood as even in y.
    """

    nx: int
    ny: int
    h: float
    origin: tuple = (0.0, 0.0)
    reflection: bool = False

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("h must be positive")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid too small: need at least 3 nodes per axis")
        if self.reflection and abs(self.origin[1]) > 1e-15 * max(1.0, self.h):
            raise ValueError("reflected grid must have row j = 0 on y = 0")

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys)

    def column_index(self, x: float) -> int:
        q = (x - self.origin[0]) / self.h
        i = int(round(q))
        if abs(q - i) > 1e-9 or not (0 <= i < self.nx):
            raise ValueError(f"x = {x} is not aligned with a grid column")
        return i


@dataclass(frozen=True)
class Field:
    """Scalar node values on a Grid2D, immutable once constructed."""

    grid: Grid2D
    values: np.ndarray
    params: Params | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(f"values shape {v.shape} != (ny, nx) = "
                             f"({self.grid.ny}, {self.grid.nx})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid2D, fn, params: Params | None = None) -> "Field":
        X, Y = grid.mesh()
        return cls(grid, np.asarray(fn(X, Y), dtype=float), params)


def avg_abs_pow(lo, hi, a: float):
    """Average of |t|^a over [lo, hi] in closed form (lo < hi elementwise).

    Exact for intervals containing 0; this is the face weight that makes the
    tangential flux balance the normal one identically in the leading
    near-axis terms (midpoint weights leave an O(h^a) defect there).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(hi <= lo):
        raise ValueError("empty interval")
    up = np.sign(hi) * np.abs(hi) ** (1.0 + a)
    dn = np.sign(lo) * np.abs(lo) ** (1.0 + a)
    out = (up - dn) / ((1.0 + a) * (hi - lo))
    return out if out.ndim else float(out)


def face_weights_y(grid: Grid2D, a: float):
    """Face weights for the measure |y|^a dy dx.

    Returns (WE, WN): WE[j, i] weights the face between nodes (i, j) and
    (i+1, j); WN[j, i] the face between (i, j) and (i, j+1).  Faces normal
    to y take the (exact) midpoint value; faces parallel to y take the exact
    average of |y|^a over the face, which also handles the row on the axis.
    """
    ys = grid.ys
    h = grid.h
    we_row = avg_abs_pow(ys - h / 2.0, ys + h / 2.0, a)
    WE = np.repeat(we_row[:, None], grid.nx - 1, axis=1)
    wn_col = np.abs(ys[:-1] + h / 2.0) ** a
    WN = np.repeat(wn_col[:, None], grid.nx, axis=1)
    return WE, WN


def _flux_sum(values, WE, WN, h, mirror_row0):
    """Sum of face fluxes divided by h^2: approximates div(w grad u)."""
    ny, nx = values.shape
    R = np.zeros_like(values)
    dE = WE * (values[:, 1:] - values[:, :-1])   # flux through vertical faces
    dN = WN * (values[1:, :] - values[:-1, :])   # flux through horizontal faces
    R[:, :-1] += dE
    R[:, 1:] -= dE
    R[:-1, :] += dN
    R[1:, :] -= dN
    if mirror_row0:
        # even reflection: the south neighbor of row 0 is row 1 again
        R[0, :] += WN[0, :] * (values[1, :] - values[0, :])
    return R / h ** 2


def apply_La(f: Field) -> Field:
    """Discrete residual of L_a u = div(|y|^a grad u) at computable nodes.

    Interior nodes use the four-face stencil; on a reflected grid the row
    y = 0 uses the mirrored south flux.  Outer-boundary entries are zero.
    """
    if f.params is None:
        raise ValueError("field needs params to evaluate the weighted operator")
    g = f.grid
    WE, WN = face_weights_y(g, f.params.a)
    R = _flux_sum(f.values, WE, WN, g.h, g.reflection)
    out = np.zeros_like(R)
    out[1:-1, 1:-1] = R[1:-1, 1:-1]
    if g.reflection:
        out[0, 1:-1] = R[0, 1:-1]
    return Field(g, out, f.params)


def gross_flux(f: Field) -> np.ndarray:
    """Sum of |face flux| / h^2, the scale against which residuals cancel."""
    g = f.grid
    WE, WN = face_weights_y(g, f.params.a)
    ny, nx = f.values.shape
    G = np.zeros((ny, nx))
    dE = np.abs(WE * (f.values[:, 1:] - f.values[:, :-1]))
    dN = np.abs(WN * (f.values[1:, :] - f.values[:-1, :]))
    G[:, :-1] += dE
    G[:, 1:] += dE
    G[:-1, :] += dN
    G[1:, :] += dN
    if g.reflection:
        G[0, :] += np.abs(WN[0, :] * (f.values[1, :] - f.values[0, :]))
    return G / g.h ** 2


@dataclass(frozen=True)
class SolverSettings:
    """Iteration controls; method 'auto' picks sparse-direct for the solve
    and falls back to CG on very large grids."""

    omega: float = 1.8
    tol: float = 1e-10
    max_iter: int | None = None
    method: str = "auto"

    @classmethod
    def from_json(cls, doc) -> "SolverSettings":
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = {"omega", "tol", "max_iter", "method"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown solver settings: {sorted(extra)}")
        return cls(**doc)

    def resolved_max_iter(self, grid: Grid2D) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 200 * max(grid.nx, grid.ny)


@dataclass(frozen=True)
class SolveResult:
    field: Field
    iterations: int
    residual: float
    history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    method: str = ""


def _scaled_weights(WE, WN, rhs, mirror_row0):
    """Half-domain form of the mirrored equations.

    The full-plane row-0 stencil (doubled north flux by even reflection)
    divided by two has single-counted faces and a symmetric matrix: halve
    the row-0 horizontal face weights and the row-0 right-hand side.
    """
    if not mirror_row0:
        return WE, WN, rhs
    WEs = WE.copy()
    WEs[0, :] *= 0.5
    rhs_s = rhs.copy()
    rhs_s[0, :] *= 0.5
    return WEs, WN, rhs_s


def _assemble_sparse(WE, WN, pinned_mask, pinned_values, rhs):
    """Flux-form system A u = b over free nodes (A symmetric M-matrix)."""
    ny, nx = pinned_mask.shape
    free = ~pinned_mask
    index = -np.ones((ny, nx), dtype=np.int64)
    index[free] = np.arange(int(free.sum()))
    u_pin = np.where(pinned_mask, pinned_values, 0.0)

    rows, cols, vals = [], [], []
    diag = np.zeros((ny, nx))
    b = -rhs.copy()

    def couple(ja, ia, jb, ib, w):
        """Face of weight w between node sets a and b (same shapes)."""
        fa = free[ja, ia]
        fb = free[jb, ib]
        np.add.at(diag, (ja, ia), w)
        np.add.at(diag, (jb, ib), w)
        both = fa & fb
        rows.append(index[ja, ia][both])
        cols.append(index[jb, ib][both])
        vals.append(-w[both])
        rows.append(index[jb, ib][both])
        cols.append(index[ja, ia][both])
        vals.append(-w[both])
        a_only = fa & ~fb
        np.add.at(b, (ja[a_only], ia[a_only]), w[a_only] * u_pin[jb, ib][a_only])
        b_only = fb & ~fa
        np.add.at(b, (jb[b_only], ib[b_only]), w[b_only] * u_pin[ja, ia][b_only])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx - 1), indexing="ij")
    couple(jj.ravel(), ii.ravel(), jj.ravel(), ii.ravel() + 1, WE.ravel())
    jj, ii = np.meshgrid(np.arange(ny - 1), np.arange(nx), indexing="ij")
    couple(jj.ravel(), ii.ravel(), jj.ravel() + 1, ii.ravel(), WN.ravel())

    nfree = int(free.sum())
    rows.append(index[free])
    cols.append(index[free])
    vals.append(diag[free])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nfree, nfree)).tocsr()
    return A, b[free], index


def _sor_sweep(u, WE, WN, free, rhs, omega, color):
    ny, nx = u.shape
    num = np.zeros((ny, nx))
    den = np.zeros((ny, nx))
    num[:, :-1] += WE * u[:, 1:]
    den[:, :-1] += WE
    num[:, 1:] += WE * u[:, :-1]
    den[:, 1:] += WE
    num[:-1, :] += WN * u[1:, :]
    den[:-1, :] += WN
    num[1:, :] += WN * u[:-1, :]
    den[1:, :] += WN
    jj, ii = np.indices(u.shape)
    mask = free & (((jj + ii) % 2) == color)
    gs = (num[mask] - rhs[mask]) / den[mask]
    u[mask] = (1.0 - omega) * u[mask] + omega * gs
    return u


def solve_fv(grid: Grid2D, WE, WN, mirror_row0, pinned_mask, pinned_values,
             rhs, settings: SolverSettings = SolverSettings(),
             params: Params | None = None) -> SolveResult:
    """Solve the flux-form equations sum_faces W (u_nbr - u_c) = rhs at every
    free node, with the given nodes pinned.  rhs is in flux units (already
    multiplied by h^2 and the nodal weight)."""
    pinned_mask = np.asarray(pinned_mask, dtype=bool)
    pinned_values = np.asarray(pinned_values, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    WE, WN, rhs = _scaled_weights(WE, WN, rhs, mirror_row0)
    A, b, index = _assemble_sparse(WE, WN, pinned_mask, pinned_values, rhs)
    free = ~pinned_mask
    bnorm = float(np.linalg.norm(b))
    scale = max(bnorm, 1e-300)

    method = settings.method
    if method == "auto":
        method = "direct" if A.shape[0] <= 400_000 else "cg"

    u = np.where(pinned_mask, pinned_values, 0.0)
    history = []
    if method == "direct":
        x = spla.spsolve(A.tocsc(), b)
        res = float(np.linalg.norm(b - A @ x)) / scale
        u[free] = x
        iterations = 1
    elif method == "cg":
        dinv = 1.0 / A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v)
        it = [0]

        def cb(_):
            it[0] += 1

        x, info = spla.cg(A, b, rtol=settings.tol, atol=0.0, M=M,
                          maxiter=settings.resolved_max_iter(grid), callback=cb)
        res = float(np.linalg.norm(b - A @ x)) / scale
        if info != 0:
            raise SolverConvergenceError(
                f"CG failed to converge (info={info}, residual={res:.3e})", [res])
        u[free] = x
        iterations = it[0]
    elif method in ("sor", "gauss-seidel"):
        omega = settings.omega if method == "sor" else 1.0
        max_iter = settings.resolved_max_iter(grid)
        iterations = 0
        res = np.inf
        for iterations in range(1, max_iter + 1):
            _sor_sweep(u, WE, WN, free, rhs, omega, 0)
            _sor_sweep(u, WE, WN, free, rhs, omega, 1)
            res = float(np.linalg.norm(b - A @ u[free])) / scale
            history.append(res)
            if res < settings.tol:
                break
        else:
            raise SolverConvergenceError(
                f"SOR failed: residual {res:.3e} after {max_iter} sweeps",
                history)
    else:
        raise ValueError(f"unknown solver method {settings.method!r}")

    return SolveResult(Field(grid, u, params), iterations, res,
                       np.asarray(history), method)


def _slit_mask(geom: SlitGeometry, grid: Grid2D) -> np.ndarray:
    """Row-0 nodes lying on the slit (d <= 0); flat mode only for 2D grids."""
    if geom.mode != "flat":
        raise ValueError("2D slit solves use the flat geometry mode")
    mask = np.zeros((grid.ny, grid.nx), dtype=bool)
    mask[0, :] = grid.xs <= 1e-14
    return mask


def dirichlet_solve(geom: SlitGeometry, p: Params, grid: Grid2D, boundary,
                    slit_value=0.0, source: Field | None = None,
                    settings: SolverSettings = SolverSettings()) -> SolveResult:
    """Solve L_a u = |y|^a f in the box minus the slit: u is pinned on the
    outer boundary (from `boundary`: callable (x, y) or array) and on slit
    nodes (from `slit_value`: scalar or callable of x)."""
    if not grid.reflection:
        raise ValueError("slit solves need a reflected (y >= 0) grid")
    X, Y = grid.mesh()
    if callable(boundary):
        bvals = np.asarray(boundary(X, Y), dtype=float)
    else:
        bvals = np.asarray(boundary, dtype=float)
    pinned = np.zeros((grid.ny, grid.nx), dtype=bool)
    pinned[:, 0] = pinned[:, -1] = pinned[-1, :] = True
    pvals = np.where(pinned, bvals, 0.0)

    slit = _slit_mask(geom, grid)
    sv = slit_value(grid.xs)[None, :] if callable(slit_value) else slit_value
    pvals = np.where(slit & ~pinned, np.broadcast_to(sv, pvals.shape), pvals)
    pinned |= slit

    WE, WN = face_weights_y(grid, p.a)
    rhs = np.zeros((grid.ny, grid.nx))
    if source is not None:
        # cell average of |y|^a, matching the face quadrature of the scheme
        wy = avg_abs_pow(grid.ys - grid.h / 2, grid.ys + grid.h / 2, p.a)
        rhs = grid.h ** 2 * wy[:, None] * source.values
    return solve_fv(grid, WE, WN, grid.reflection, pinned, pvals, rhs, settings, p)


def flux_limit_row(f: Field) -> np.ndarray:
    """Extrapolated limit of y^a d_y u at (x_i, 0+) for every column.

    Model: u(x, y) = u(x, 0) + L y^{1-a}/(1-a) + (even-power terms).  Raw
    one-row estimates from rows 1 and 2 carry an O(y^{1+a}) error from the
    y^2 term; the Richardson combination with exponent 1 + a removes it.
    """
    if f.params is None:
        raise ValueError("field needs params")
    if not f.grid.reflection:
        raise ValueError("flux extrapolation needs a reflected grid")
    a = f.params.a
    if f.params.s >= 0.95:
        warnings.warn("s >= 0.95: flux extrapolation is ill-conditioned "
                      "(Richardson exponent 1 + a approaches 0)", RuntimeWarning)
    h = f.grid.h
    u0, u1, u2 = f.values[0, :], f.values[1, :], f.values[2, :]
    L1 = (u1 - u0) * (1.0 - a) / h ** (1.0 - a)
    L2 = (u2 - u0) * (1.0 - a) / (2.0 * h) ** (1.0 - a)
    w = 2.0 ** (1.0 + a)
    return (w * L1 - L2) / (w - 1.0)


def flux_limit(f: Field, x: float) -> float:
    """Single-column version of flux_limit_row; x must lie on a column."""
    i = f.grid.column_index(x)
    return float(flux_limit_row(f)[i])


def weighted_energy(f: Field) -> float:
    """Discrete weighted Dirichlet energy 1/2 sum_faces W (du)^2.

    On reflected grids the y = 0 row carries half cells, matching the
    half-domain form the solver assembles; this makes the energy the exact
    quadratic functional the solve minimizes."""
    WE, WN = face_weights_y(f.grid, f.params.a)
    if f.grid.reflection:
        WE, WN, _ = _scaled_weights(WE, WN, np.zeros_like(f.values), True)
    e = 0.5 * float(np.sum(WE * (f.values[:, 1:] - f.values[:, :-1]) ** 2))
    e += 0.5 * float(np.sum(WN * (f.values[1:, :] - f.values[:-1, :]) ** 2))
    return e


def dump_csv(f: Field, path_or_buf, banner: str | None = None) -> None:
    """Write the field as CSV rows "x,y,value", row-major over (j, i)."""
    own = isinstance(path_or_buf, (str, bytes, os.PathLike))
    fh = open(path_or_buf, "w") if own else path_or_buf
    try:
        if banner:
            fh.write(f"# {banner}\n")
        fh.write("x,y,value\n")
        xs, ys = f.grid.xs, f.grid.ys
        for j in range(f.grid.ny):
            for i in range(f.grid.nx):
                fh.write(f"{xs[i]:.17g},{ys[j]:.17g},{f.values[j, i]:.17g}\n")
    finally:
        if own:
            fh.close()


def load_csv(path_or_buf):
    """Read a field CSV back into (xs, ys, values); inverse of dump_csv."""
    own = isinstance(path_or_buf, (str, bytes, os.PathLike))
    fh = open(path_or_buf) if own else path_or_buf
    try:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    finally:
        if own:
            fh.close()
    if not rows or rows[0].replace(" ", "") != "x,y,value":
        raise ValueError("malformed field CSV: missing 'x,y,value' header")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"malformed field CSV: {exc}") from None
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError("malformed field CSV: expected 3 columns")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if len(xs) * len(ys) != len(data):
        raise ValueError("malformed field CSV: not a full tensor grid")
    vals = data[:, 2].reshape(len(ys), len(xs))
    return xs, ys, vals
