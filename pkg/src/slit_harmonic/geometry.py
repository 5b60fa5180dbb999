"""Slit geometry: signed distance, slit distance, normals, curvature, profiles.

The slit lives in the hyperplane {y = 0}.  Two geometric modes are supported:

* ``flat``  -- the model slit {x <= 0, y = 0} with one spatial variable, so a
  point is (x, y) and d(x) = x exactly.
* ``curve`` -- the slit edge is the graph of a curve gamma in the plane, the
  slit is {x2 <= gamma(x1), y = 0}, and a point is (x1, x2, y).

Sign convention used by every module: d > 0 on the side the edge normal e_n
points to, i.e. where x2 > gamma(x1) (flat mode: where x > 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Params",
    "Point",
    "PowerCurve",
    "SlitGeometry",
    "OutOfDomainError",
    "CutLocusError",
    "signed_distance",
    "slit_distance",
    "normal_curvature",
    "profile_u_a",
    "profile_u_a_flat",
    "geometry_from_json",
]


class OutOfDomainError(ValueError):
    """Query point outside the sampled domain of the edge curve."""


class CutLocusError(ValueError):
    """Foot point is not unique (query too close to the cut locus)."""


@dataclass(frozen=True)
class Params:
    """Exponent pair (a, s) with a = 1 - 2s, a in (-1, 1)."""

    a: float
    s: float

    def __post_init__(self):
        if not (-1.0 < self.a < 1.0):
            raise ValueError(f"a must lie in (-1, 1), got {self.a}")
        if not (0.0 < self.s < 1.0):
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if abs(self.a - (1.0 - 2.0 * self.s)) > 1e-14:
            raise ValueError(f"a = 1 - 2s violated: a={self.a}, s={self.s}")

    @classmethod
    def from_a(cls, a: float) -> "Params":
        return cls(a=a, s=(1.0 - a) / 2.0)

    @classmethod
    def from_s(cls, s: float) -> "Params":
        return cls(a=1.0 - 2.0 * s, s=s)


@dataclass(frozen=True)
class Point:
    """A point X = (x, y): spatial part x (1 or 2 coordinates) plus height y."""

    x: tuple
    y: float

    def __post_init__(self):
        xs = tuple(float(v) for v in np.atleast_1d(self.x))
        object.__setattr__(self, "x", xs)
        if not all(math.isfinite(v) for v in xs) or not math.isfinite(self.y):
            raise ValueError("point coordinates must be finite")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def xn(self) -> float:
        """Last spatial coordinate (the direction the edge normal points to)."""
        return self.x[-1]

    @property
    def z(self) -> tuple:
        """The 2-vector (x_n, y) transverse to the edge."""
        return (self.x[-1], self.y)


@dataclass(frozen=True)
class PowerCurve:
    """gamma(t) = amplitude * |t|**exponent, with analytic derivatives.

    exponent = 1 + alpha gives a curve of class C^{1,alpha} at the tip.
    amplitude = 0 degenerates to the flat edge.
    """

    amplitude: float
    exponent: float

    def __post_init__(self):
        if self.exponent <= 1.0:
            raise ValueError("exponent must exceed 1 so that gamma'(0) = 0")

    def value(self, t):
        return self.amplitude * np.abs(t) ** self.exponent

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * self.exponent * np.abs(t) ** (self.exponent - 1.0) * np.sign(t)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        p = self.exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.amplitude * p * (p - 1.0) * np.abs(t) ** (p - 2.0)
        if p < 2.0 and self.amplitude != 0.0:
            out = np.where(t == 0.0, np.inf, out)
        return out


@dataclass(frozen=True)
class SlitGeometry:
    """Immutable slit description; all queries are pure functions of it.

    mode "flat": ignores gamma, d(x) = x.
    mode "curve": gamma must provide value/d1/d2; queries are restricted to
    spatial points whose first coordinate is within [-t_max, t_max].
    """

    mode: str
    gamma: PowerCurve | None = None
    holder_exponent: float = 1.0
    t_max: float = 2.0
    presamples: int = 2 ** 16
    _tgrid: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("flat", "curve"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "curve":
            if self.gamma is None:
                raise ValueError("curve mode needs a gamma curve")
            tg = np.linspace(-self.t_max, self.t_max, self.presamples)
            object.__setattr__(self, "_tgrid", tg)

    @property
    def n(self) -> int:
        """Number of spatial variables (1 flat, 2 curve)."""
        return 1 if self.mode == "flat" else 2

    # -- internal: nearest point on the edge graph ------------------------

    def _foot_candidates(self, qx, qy):
        """Coarse argmin of |(t, gamma(t)) - q|^2 over the presample grid,
        chunked so large query batches stay within memory."""
        tg = self._tgrid
        gv = self.gamma.value(tg)
        out_t = np.empty_like(qx)
        out_d2 = np.empty_like(qx)
        step = max(1, int(2e7) // len(tg))
        for lo in range(0, len(qx), step):
            hi = min(lo + step, len(qx))
            d2 = ((tg[None, :] - qx[lo:hi, None]) ** 2
                  + (gv[None, :] - qy[lo:hi, None]) ** 2)
            idx = np.argmin(d2, axis=1)
            out_t[lo:hi] = tg[idx]
            out_d2[lo:hi] = d2[np.arange(hi - lo), idx]
        return out_t, out_d2

    def _foot_refine(self, t0, qx, qy, steps: int = 5):
        """Newton refinement of the foot-point equation F(t) = 0.

        F(t) = (t - qx) + gamma'(t) (gamma(t) - qy).  Steps are clamped to the
        presample spacing so an exploding gamma'' near the tip cannot throw
        the iterate out of the bracket found by the coarse scan.
        """
        dt_max = self._tgrid[1] - self._tgrid[0]
        t = t0.astype(float).copy()
        for _ in range(steps):
            g = self.gamma.value(t)
            g1 = self.gamma.d1(t)
            g2 = self.gamma.d2(t)
            F = (t - qx) + g1 * (g - qy)
            dF = 1.0 + g1 * g1 + g2 * (g - qy)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = F / dF
            step = np.where(np.isfinite(step), step, 0.0)
            step = np.clip(step, -dt_max, dt_max)
            new_t = np.clip(t - step, -self.t_max, self.t_max)
            # keep the update only where it actually reduces the distance
            old_d2 = (t - qx) ** 2 + (self.gamma.value(t) - qy) ** 2
            new_d2 = (new_t - qx) ** 2 + (self.gamma.value(new_t) - qy) ** 2
            t = np.where(new_d2 <= old_d2, new_t, t)
        return t

    def foot_point(self, x):
        """Foot parameter(s) t* on the edge for spatial query points x (N,2)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        qx, qy = x[:, 0], x[:, 1]
        if np.any(np.abs(qx) > self.t_max):
            raise OutOfDomainError("query outside the sampled domain of gamma")
        t0, _ = self._foot_candidates(qx, qy)
        return self._foot_refine(t0, qx, qy)

    def signed_distance_batch(self, x) -> np.ndarray:
        """Signed distance d for an (N,2) array of spatial points (curve mode)
        or an (N,) array of x values (flat mode)."""
        if self.mode == "flat":
            return np.asarray(x, dtype=float)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = self.foot_point(x)
        dx = x[:, 0] - t
        dy = x[:, 1] - self.gamma.value(t)
        dist = np.hypot(dx, dy)
        sign = np.where(x[:, 1] >= self.gamma.value(x[:, 0]), 1.0, -1.0)
        return sign * dist


def signed_distance(geom: SlitGeometry, x) -> float:
    """Signed distance from a spatial point to the slit edge, d > 0 on the
    e_n side (x2 > gamma side; flat mode: d(x) = x)."""
    if geom.mode == "flat":
        return float(np.asarray(x, dtype=float).reshape(()))
    return float(geom.signed_distance_batch(np.asarray(x, dtype=float).reshape(1, 2))[0])


def slit_distance(geom: SlitGeometry, X: Point) -> float:
    """r = sqrt(y^2 + d^2), the full-space distance to the slit edge."""
    d = signed_distance(geom, X.x if geom.mode == "curve" else X.x[0])
    return math.hypot(X.y, d)


def normal_curvature(geom: SlitGeometry, x, tie_tol: float = 1e-9):
    """Unit normal nu = grad d and curvature kappa = -Lap d at a spatial point.

    Curve mode only.  kappa follows the sign fixed by kappa = -Lap_x d, via
    kappa(x) = kappa_edge(t*) / (1 - d * kappa_edge(t*)) with
    kappa_edge = gamma'' / (1 + gamma'^2)^{3/2} at the foot point.
    Raises CutLocusError when the foot point is ambiguous.
    """
    if geom.mode != "curve":
        raise ValueError("normal_curvature needs curve mode (flat: nu=e_n, kappa=0)")
    q = np.asarray(x, dtype=float).reshape(1, 2)
    if abs(q[0, 0]) > geom.t_max:
        raise OutOfDomainError("query outside the sampled domain of gamma")
    # two-sided scan detects symmetric ties across the tip (cut locus)
    t = float(geom.foot_point(q)[0])
    tm = geom._tgrid
    gv = geom.gamma.value(tm)
    d2 = (tm - q[0, 0]) ** 2 + (gv - q[0, 1]) ** 2
    best = float(np.min(d2))
    far = np.abs(tm - t) > 64.0 * (tm[1] - tm[0])
    if np.any(far) and float(np.min(d2[far])) <= best * (1.0 + tie_tol) + tie_tol ** 2:
        raise CutLocusError("foot point not unique near the cut locus")
    g = float(geom.gamma.value(t))
    g1 = float(geom.gamma.d1(t))
    d = math.copysign(math.hypot(q[0, 0] - t, q[0, 1] - g), q[0, 1] - geom.gamma.value(q[0, 0]))
    if abs(d) < 1e-13:
        nu = np.array([-g1, 1.0]) / math.hypot(g1, 1.0)
    else:
        nu = np.array([q[0, 0] - t, q[0, 1] - g]) / d
    g2 = float(geom.gamma.d2(t))
    kappa_edge = g2 / (1.0 + g1 * g1) ** 1.5
    denom = 1.0 - d * kappa_edge
    kappa = kappa_edge / denom if denom != 0.0 else math.inf
    return nu, kappa


def profile_u_a_flat(p: Params, x, y) -> np.ndarray:
    """Flat-slit profile ((r + x)/2)^s with r = sqrt(x^2 + y^2).

    Evaluated through the off-slit identity |y|^{2s} / (2^s (r - x)^s) where
    x < 0, which avoids the cancellation in r + x near the slit.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    s = p.s
    pos = ((r + x) / 2.0) ** s
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = (y * y / (2.0 * (r - x))) ** s
    out = np.where(x >= 0.0, pos, np.where(r > 0.0, neg, 0.0))
    return np.where((x < 0.0) & (y == 0.0), 0.0, out)


def profile_u_a(geom: SlitGeometry, p: Params, X: Point) -> float:
    """The profile U_a = ((r + d)/2)^s at a point; 0 on the slit itself."""
    if geom.mode == "flat":
        return float(profile_u_a_flat(p, X.x[0], X.y))
    d = signed_distance(geom, X.x)
    return float(profile_u_a_flat(p, d, X.y))


def geometry_from_json(doc) -> SlitGeometry:
    """Build a SlitGeometry from a JSON document (dict, text, or file path).

    Schema: {"mode": "flat"|"curve",
             "gamma": {"kind": "power", "amplitude": A, "exponent": 1+alpha},
             "alpha": alpha}
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError:
            with open(doc) as fh:
                doc = json.load(fh)
    mode = doc["mode"]
    if mode == "flat":
        return SlitGeometry(mode="flat")
    gspec = doc["gamma"]
    if gspec.get("kind", "power") != "power":
        raise ValueError(f"unsupported gamma kind {gspec.get('kind')!r}")
    curve = PowerCurve(amplitude=float(gspec["amplitude"]), exponent=float(gspec["exponent"]))
    alpha = float(doc.get("alpha", curve.exponent - 1.0))
    return SlitGeometry(mode="curve", gamma=curve, holder_exponent=alpha,
                        t_max=float(doc.get("t_max", 2.0)))
