"""Paths of rose length functions, their entropy length and distance upper bounds.

A path is anything exposing ``lengths(t)`` and ``velocity(t)`` for arrays of
parameters in [0, 1] (shape (N,) -> (N, n)) plus ``breakpoints``, the
parameters where it may fail to be smooth. Paths need not have unit entropy;
the integrand composes them with the normalization l -> h(l) l, whose
velocity is h' l + h l' with h' = -h <w, l'> / <w, l>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from ..errors import AccuracyError, DomainError
from .metric import logistic_weights
from .thermo import entropy_batch, normalize_unit_entropy

__all__ = [
    "LinearPath",
    "LogPolygonPath",
    "FunctionPath",
    "ConcatPath",
    "ReversedPath",
    "Quadrature",
    "speed",
    "path_length",
    "DistanceResult",
    "distance_upper",
]


class _PathBase:
    breakpoints: tuple = ()

    def reversed(self) -> "ReversedPath":
        return ReversedPath(self)

    def pieces(self):
        b = sorted({0.0, 1.0, *[float(x) for x in self.breakpoints if 0.0 < x < 1.0]})
        return list(zip(b[:-1], b[1:]))


@dataclass(frozen=True, eq=False)
class LinearPath(_PathBase):
    """Straight segment (1 - t) a + t b in length coordinates."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def lengths(self, t):
        t = np.asarray(t, dtype=float)[:, None]
        return (1 - t) * self.a + t * self.b

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        d = np.where(np.isfinite(self.a), self.b - np.where(np.isfinite(self.a), self.a, 0.0), 0.0)
        return np.broadcast_to(d, (t.size, self.a.size)).copy()


@dataclass(frozen=True, eq=False)
class LogPolygonPath(_PathBase):
    """Piecewise linear in log-length coordinates, vertices equally spaced in t."""

    vertices: np.ndarray  # (K + 2, n) log lengths

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if X.shape[0] < 2:
            raise DomainError("a polygon needs at least two vertices")
        object.__setattr__(self, "vertices", X)
        k = X.shape[0] - 1
        object.__setattr__(self, "breakpoints", tuple(i / k for i in range(1, k)))

    @classmethod
    def from_lengths(cls, points):
        return cls(np.log(np.asarray(points, dtype=float)))

    def _locate(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        k = self.vertices.shape[0] - 1
        idx = np.minimum((t * k).astype(int), k - 1)
        return idx, t * k - idx, k

    def lengths(self, t):
        idx, frac, _ = self._locate(t)
        X = self.vertices
        with np.errstate(invalid="ignore"):
            x = X[idx] + frac[:, None] * (X[idx + 1] - X[idx])
        x = np.where(np.isinf(X[idx]), X[idx], x)
        return np.exp(x)

    def velocity(self, t):
        idx, frac, k = self._locate(t)
        X = self.vertices
        with np.errstate(invalid="ignore"):
            dx = k * (X[idx + 1] - X[idx])
        dx = np.where(np.isfinite(dx), dx, 0.0)
        return self.lengths(t) * dx

    def subdivided(self) -> "LogPolygonPath":
        """Same path with a vertex inserted at every edge midpoint."""
        X = self.vertices
        mid = 0.5 * (X[:-1] + X[1:])
        out = np.empty((2 * X.shape[0] - 1, X.shape[1]))
        out[0::2] = X
        out[1::2] = mid
        return LogPolygonPath(out)


@dataclass(frozen=True, eq=False)
class FunctionPath(_PathBase):
    """User path; the velocity defaults to 4th-order central differences."""

    fun: object
    velocity_fun: object = None
    breakpoints: tuple = ()
    step: float = 1e-4

    def lengths(self, t):
        return np.atleast_2d(np.asarray(self.fun(np.asarray(t, dtype=float)), dtype=float))

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        if self.velocity_fun is not None:
            return np.atleast_2d(np.asarray(self.velocity_fun(t), dtype=float))
        # keep the stencil inside [0, 1]
        room = np.minimum(t, 1.0 - t) / 2.5
        eps = np.where(room > 0, np.minimum(self.step, room), self.step)[:, None]
        f = lambda s: self.lengths(np.ravel(s))
        tt = t[:, None]
        out = (f(tt - 2 * eps) - 8 * f(tt - eps) + 8 * f(tt + eps) - f(tt + 2 * eps)) / (12 * eps)
        return np.where(np.isfinite(out), out, 0.0)


@dataclass(frozen=True, eq=False)
class ConcatPath(_PathBase):
    """Concatenation, each piece given an equal share of [0, 1]."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise DomainError("empty concatenation")
        object.__setattr__(self, "parts", parts)
        k = len(parts)
        bps = []
        for i, p in enumerate(parts):
            bps.append(i / k)
            bps.extend((i + b) / k for b in getattr(p, "breakpoints", ()))
        object.__setattr__(self, "breakpoints", tuple(b for b in bps if 0 < b < 1))

    def _split(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        k = len(self.parts)
        idx = np.minimum((t * k).astype(int), k - 1)
        return idx, t * k - idx, k

    def _eval(self, t, attr, factor):
        idx, local, k = self._split(t)
        out = None
        for i, p in enumerate(self.parts):
            sel = idx == i
            if not sel.any():
                continue
            val = getattr(p, attr)(local[sel]) * (k if factor else 1)
            if out is None:
                out = np.empty((np.size(t), val.shape[1]))
            out[sel] = val
        return out

    def lengths(self, t):
        return self._eval(t, "lengths", False)

    def velocity(self, t):
        return self._eval(t, "velocity", True)


@dataclass(frozen=True, eq=False)
class ReversedPath(_PathBase):
    path: object

    @property
    def breakpoints(self):
        return tuple(1.0 - b for b in getattr(self.path, "breakpoints", ()))

    def lengths(self, t):
        return self.path.lengths(1.0 - np.asarray(t, dtype=float))

    def velocity(self, t):
        return -self.path.velocity(1.0 - np.asarray(t, dtype=float))


def speed(L, Ldot) -> np.ndarray:
    """Entropy-norm speed of the normalized path at stacked samples."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    Ldot = np.atleast_2d(np.asarray(Ldot, dtype=float))
    fin = np.isfinite(L)
    Lz = np.where(fin, L, 0.0)
    Dz = np.where(fin, Ldot, 0.0)
    h = entropy_batch(L)
    Lh = h[:, None] * Lz
    s, w = logistic_weights(np.where(fin, Lh, np.inf))
    gl = (w * Lz).sum(axis=1)
    hdot = -h * (w * Dz).sum(axis=1) / gl
    V = hdot[:, None] * Lz + h[:, None] * Dz
    num = (w * (1 - 2 * s) * V * V).sum(axis=1)
    return np.sqrt(np.maximum(num / (w * Lh).sum(axis=1), 0.0))


@lru_cache(maxsize=None)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@dataclass(frozen=True)
class Quadrature:
    nodes: int = 16
    rtol: float = 1e-10
    atol: float = 1e-13
    max_level: int = 30


def _gl_panels(path, lo, hi, nodes):
    """Gauss-Legendre estimate on each panel [lo_i, hi_i] (vectorized)."""
    x, w = _gl(nodes)
    width = hi - lo
    t = (lo[:, None] + width[:, None] * x[None, :]).ravel()
    vals = speed(path.lengths(t), path.velocity(t)).reshape(lo.size, nodes)
    return width * (vals @ w)


def path_length(path, quad: Quadrature = Quadrature()) -> float:
    """Entropy length of the unit-entropy normalization of ``path``.

    Adaptive composite Gauss-Legendre on each smooth piece: a panel is
    accepted when its estimate agrees with the sum over its two halves
    within its share of the tolerance, otherwise both halves are refined.
    ``max_level`` caps the bisection depth.
    """
    total = 0.0
    for a, b in path.pieces():
        lo = np.linspace(a, b, 5)[:-1]
        hi = np.linspace(a, b, 5)[1:]
        est = _gl_panels(path, lo, hi, quad.nodes)
        scale = abs(est.sum())
        piece, coarse_sum, fine_sum = 0.0, 0.0, 0.0
        for _ in range(quad.max_level + 1):
            mid = 0.5 * (lo + hi)
            left = _gl_panels(path, lo, mid, quad.nodes)
            right = _gl_panels(path, mid, hi, quad.nodes)
            fine = left + right
            budget = (quad.rtol * scale + quad.atol) * (hi - lo) / (b - a)
            ok = np.abs(fine - est) <= budget
            piece += fine[ok].sum()
            coarse_sum += est[ok].sum()
            fine_sum += fine[ok].sum()
            if ok.all():
                break
            bad = ~ok
            lo = np.concatenate([lo[bad], mid[bad]])
            hi = np.concatenate([mid[bad], hi[bad]])
            est = np.concatenate([left[bad], right[bad]])
        else:
            raise AccuracyError(
                f"path_length did not converge on [{a}, {b}]",
                coarse=coarse_sum + est.sum(),
                fine=fine_sum + fine[~ok].sum(),
            )
        total += piece
    return total


@dataclass
class DistanceResult:
    """Upper bound on the entropy distance with the path that realizes it."""

    value: float
    path: object
    history: list = field(default_factory=list)
    stagnated: bool = False
    upper_bound: bool = True

    def __float__(self):
        return float(self.value)


def _fixed_length(X, nodes):
    """Length of a log polygon with fixed Gauss-Legendre nodes per leg (optimizer objective)."""
    x, w = _gl(nodes)
    legs = X[1:] - X[:-1]
    pts = X[:-1, None, :] + x[None, :, None] * legs[:, None, :]
    L = np.exp(pts.reshape(-1, X.shape[1]))
    D = (L.reshape(pts.shape) * legs[:, None, :]).reshape(-1, X.shape[1])
    return float(np.tile(w, legs.shape[0]) @ speed(L, D))


def distance_upper(
    ell0,
    ell1,
    levels: int = 3,
    nodes: int = 8,
    max_iter: int = 200,
    quad: Quadrature = Quadrature(rtol=1e-9),
) -> DistanceResult:
    """Upper bound on the entropy distance between two rose length functions.

    The inputs are normalized to unit entropy. Candidate paths are polygons
    in log-length coordinates; interior vertices move orthogonally to
    (1, ..., 1), the direction killed by normalization. Each level doubles
    the number of legs by midpoint subdivision (the same path, so the bound
    cannot increase) and reoptimizes. Infinite petals must agree and are
    dropped; with two finite petals the locus is a curve and the straight
    polygon is already optimal.
    """
    a = np.asarray(ell0, dtype=float).reshape(-1)
    b = np.asarray(ell1, dtype=float).reshape(-1)
    if a.size != b.size:
        raise DomainError("endpoints live on different roses")
    fa, fb = np.isfinite(a), np.isfinite(b)
    if not np.array_equal(fa, fb):
        raise DomainError("endpoints must share the same finite support")
    a = normalize_unit_entropy(a[fa])
    b = normalize_unit_entropy(b[fb])
    n = a.size
    X = np.log(np.vstack([a, b]))
    path = LogPolygonPath(X)
    if np.allclose(a, b, rtol=0, atol=1e-14):
        return DistanceResult(0.0, path, [0.0])
    best = path_length(path, quad)
    history = [best]
    if n == 2 or levels <= 0:
        return DistanceResult(best, path, history)

    # orthonormal basis of the complement of (1, ..., 1)
    Q, _ = np.linalg.qr(np.eye(n) - 1.0 / n)
    Q = Q[:, : n - 1]
    stagnated = False
    for _ in range(levels):
        path = path.subdivided()
        X = path.vertices
        base = X[1:-1]

        def unpack(z):
            Y = X.copy()
            Y[1:-1] = base + z.reshape(base.shape[0], n - 1) @ Q.T
            return Y

        res = minimize(
            lambda z: _fixed_length(unpack(z), nodes),
            np.zeros(base.shape[0] * (n - 1)),
            method="BFGS",
            options={"maxiter": max_iter, "gtol": 1e-8},
        )
        cand = LogPolygonPath(unpack(res.x))
        val = path_length(cand, quad)
        # status 2 is BFGS precision loss at a flat optimum, not stagnation
        stagnated = res.status not in (0, 2)
        if val < best:
            best, path = val, cand
        history.append(best)
    return DistanceResult(best, path, history, stagnated)
