"""Base and twist length functions of shift-locus points, segments between them,
and upper bounds on the induced distance.

A point with critical heights h_1 >= ... >= h_{D-1} > 0 is sent to the
(2D-2)-petal rose with lengths

    (h_1, h_2/h_1, ..., h_{D-1}/h_1, 1 + t_1/H0, ..., 1 + t_{D-1}/H0),

where t is the normalized twist (0 for the base length) and
H0 = max(h_1, 1/h_{D-1}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..errors import DomainError
from ..polydyn import CriticalHeights
from ..rosemetric import LengthFunction, make_rose, normalize_unit_entropy
from ..rosemetric.paths import ConcatPath, Quadrature, _gl, path_length, speed

__all__ = [
    "BaseLength",
    "base_length",
    "base_lengths_array",
    "twist_H0",
    "TwistState",
    "twist_length",
    "HeightSegment",
    "TwistSegment",
    "height_segment",
    "nongeneric_crossings",
    "segment_entropy_length",
    "RhoResult",
    "rho_upper",
]


def _heights(h) -> np.ndarray:
    if isinstance(h, CriticalHeights):
        arr = h.as_array()
    else:
        arr = np.asarray(h, dtype=float).reshape(-1)
        CriticalHeights(tuple(arr))
    if (arr <= 0).any():
        raise DomainError(f"heights must be positive (shift locus), got {arr.tolist()}")
    return arr


def base_lengths_array(H) -> np.ndarray:
    """Vectorized base lengths for stacked heights of shape (N, D-1)."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    out = np.ones((H.shape[0], 2 * H.shape[1]))
    out[:, 0] = H[:, 0]
    out[:, 1 : H.shape[1]] = H[:, 1:] / H[:, :1]
    return out


@dataclass(frozen=True, eq=False)
class BaseLength:
    D: int
    heights: np.ndarray
    length: LengthFunction

    @property
    def lengths(self) -> np.ndarray:
        return self.length.lengths

    def unit(self) -> LengthFunction:
        return normalize_unit_entropy(self.length)


def base_length(h, D: int | None = None) -> BaseLength:
    arr = _heights(h)
    if D is None:
        D = arr.size + 1
    if arr.size != D - 1:
        raise DomainError(f"degree {D} needs {D - 1} heights, got {arr.size}")
    L = base_lengths_array(arr)[0]
    return BaseLength(int(D), arr, LengthFunction(make_rose(2 * D - 2), L))


def twist_H0(h) -> float:
    arr = _heights(h)
    return float(max(arr[0], 1.0 / arr[-1]))


@dataclass(frozen=True, eq=False)
class TwistState:
    """Heights plus normalized twist ``theta`` in [-1, 1]^{D-1}."""

    heights: np.ndarray
    theta: np.ndarray
    H0: float | None = None

    def __post_init__(self):
        arr = _heights(self.heights)
        th = np.asarray(self.theta, dtype=float).reshape(-1)
        if th.size != arr.size:
            raise DomainError("need one twist coordinate per critical height")
        if (np.abs(th) > 1).any():
            raise DomainError("normalized twists must lie in [-1, 1]")
        H0 = twist_H0(arr) if self.H0 is None else float(self.H0)
        if (1 + th / H0 <= 0).any():
            raise DomainError("twist makes a trailing length nonpositive")
        object.__setattr__(self, "heights", arr)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "H0", H0)


def twist_length(state: TwistState) -> LengthFunction:
    L = base_lengths_array(state.heights)[0]
    k = state.heights.size
    L[k:] = 1 + state.theta / state.H0
    return LengthFunction(make_rose(L.size), L)


def nongeneric_crossings(a, b, D: int, tol: float = 1e-12):
    """Parameters t in (0, 1) where some ratio h_i/h_j of (1-t) a + t b is a power of D.

    Returns ``(crossings, identically_nongeneric)``; the flag is set when a
    ratio stays at a power of D along the whole segment (e.g. equal heights).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ts, ident = set(), False
    logD = math.log(D)
    for i in range(a.size):
        for j in range(i + 1, a.size):
            r0 = math.log(a[i] / a[j]) / logD
            r1 = math.log(b[i] / b[j]) / logD
            if abs(r0 - r1) <= tol and abs(r0 - round(r0)) <= 1e-9:
                ident = True
                continue
            lo, hi = sorted((r0, r1))
            for m in range(math.ceil(lo - tol), math.floor(hi + tol) + 1):
                Dm = float(D) ** m
                den = (a[i] - b[i]) - Dm * (a[j] - b[j])
                if den == 0:
                    continue
                t = (a[i] - Dm * a[j]) / den
                if tol < t < 1 - tol:
                    ts.add(round(t, 15))
    return tuple(sorted(ts)), ident


@dataclass(frozen=True, eq=False)
class HeightSegment:
    """Heights (1 - t) h0 + t h1 with a fixed trailing block (1 by default)."""

    h0: np.ndarray
    h1: np.ndarray
    trailing: np.ndarray | None = None
    breakpoints: tuple = ()
    nongeneric: bool = False

    def __post_init__(self):
        a, b = _heights(self.h0), _heights(self.h1)
        if a.size != b.size:
            raise DomainError("segment endpoints have different degrees")
        D = a.size + 1
        tr = np.ones(a.size) if self.trailing is None else np.asarray(self.trailing, dtype=float)
        if (tr <= 0).any():
            raise DomainError("trailing lengths must be positive")
        cross, ident = nongeneric_crossings(a, b, D) if a.size > 1 else ((), False)
        object.__setattr__(self, "h0", a)
        object.__setattr__(self, "h1", b)
        object.__setattr__(self, "trailing", tr)
        object.__setattr__(self, "breakpoints", cross)
        object.__setattr__(self, "nongeneric", ident)

    @property
    def D(self) -> int:
        return self.h0.size + 1

    def heights(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(-1, 1)
        return (1 - t) * self.h0 + t * self.h1

    def lengths(self, t) -> np.ndarray:
        L = base_lengths_array(self.heights(t))
        L[:, self.h0.size :] = self.trailing
        return L

    def velocity(self, t) -> np.ndarray:
        H = self.heights(t)
        dH = self.h1 - self.h0
        k = self.h0.size
        V = np.zeros((H.shape[0], 2 * k))
        V[:, 0] = dH[0]
        V[:, 1:k] = (dH[1:] * H[:, :1] - H[:, 1:] * dH[0]) / H[:, :1] ** 2
        return V

    def reversed(self) -> "HeightSegment":
        return HeightSegment(self.h1, self.h0, self.trailing)

    def pieces(self):
        b = [0.0, *self.breakpoints, 1.0]
        return list(zip(b[:-1], b[1:]))


def height_segment(h0, h1, trailing=None) -> HeightSegment:
    return HeightSegment(h0, h1, trailing)


@dataclass(frozen=True, eq=False)
class TwistSegment:
    """Twist theta0 -> theta1 at fixed heights; H0 frozen at the start point."""

    heights: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    H0: float | None = None
    breakpoints: tuple = ()

    def __post_init__(self):
        arr = _heights(self.heights)
        t0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        t1 = np.asarray(self.theta1, dtype=float).reshape(-1)
        if t0.size != arr.size or t1.size != arr.size:
            raise DomainError("need one twist coordinate per critical height")
        H0 = twist_H0(arr) if self.H0 is None else float(self.H0)
        # linear in theta, so positivity at the ends suffices
        if (1 + t0 / H0 <= 0).any() or (1 + t1 / H0 <= 0).any():
            raise DomainError("twist makes a trailing length nonpositive")
        object.__setattr__(self, "heights", arr)
        object.__setattr__(self, "theta0", t0)
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "H0", H0)

    def lengths(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(-1, 1)
        k = self.heights.size
        L = np.repeat(base_lengths_array(self.heights), t.shape[0], axis=0)
        L[:, k:] = 1 + ((1 - t) * self.theta0 + t * self.theta1) / self.H0
        return L

    def velocity(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(-1)
        k = self.heights.size
        V = np.zeros((t.size, 2 * k))
        V[:, k:] = (self.theta1 - self.theta0) / self.H0
        return V

    def reversed(self) -> "TwistSegment":
        return TwistSegment(self.heights, self.theta1, self.theta0, self.H0)

    def pieces(self):
        return [(0.0, 1.0)]


def segment_entropy_length(seg, quad: Quadrature = Quadrature()) -> float:
    """Entropy length of the unit-entropy rose image of a segment."""
    return path_length(seg, quad)


@dataclass
class RhoResult:
    value: float
    legs: list
    history: list = field(default_factory=list)
    stagnated: bool = False
    upper_bound: bool = True

    def __float__(self):
        return float(self.value)


def _softplus_inv(r):
    r = np.maximum(r, 1e-12)
    return np.where(r > 30, r, np.log(np.expm1(r)))


def _vertices_to_z(V):
    y1 = np.log(V[:, :1])
    gaps = np.log(V[:, :-1] / V[:, 1:])
    return np.hstack([y1, _softplus_inv(gaps)])


def _z_to_vertices(Z):
    logs = [Z[:, 0]]
    for j in range(1, Z.shape[1]):
        logs.append(logs[-1] - np.logaddexp(0.0, Z[:, j]))
    return np.exp(np.stack(logs, axis=1))


def _polygon_objective(H, trailing, nodes):
    x, w = _gl(nodes)
    legs = H[1:] - H[:-1]
    pts = (H[:-1, None, :] + x[None, :, None] * legs[:, None, :]).reshape(-1, H.shape[1])
    dH = np.repeat(legs, nodes, axis=0)
    L = base_lengths_array(pts)
    k = H.shape[1]
    L[:, k:] = trailing
    V = np.zeros_like(L)
    V[:, 0] = dH[:, 0]
    V[:, 1:k] = (dH[:, 1:] * pts[:, :1] - pts[:, 1:] * dH[:, :1]) / pts[:, :1] ** 2
    return float(np.tile(w, legs.shape[0]) @ speed(L, V))


def _optimize_heights(hA, hB, trailing, levels, nodes, max_iter, quad):
    """Height polygon hA -> hB, refined by midpoint subdivision with a running minimum."""
    H = np.vstack([hA, hB])
    legs = [HeightSegment(hA, hB, trailing)]
    best = path_length(ConcatPath(tuple(legs)), quad)
    history, stagnated = [best], False
    if hA.size == 1 or np.allclose(hA, hB, rtol=0, atol=0):
        # one height: the locus image is a curve, the segment is already optimal
        return best, legs, history, stagnated
    for _ in range(levels):
        mid = 0.5 * (H[:-1] + H[1:])
        Hs = np.empty((2 * H.shape[0] - 1, H.shape[1]))
        Hs[0::2], Hs[1::2] = H, mid
        Z0 = _vertices_to_z(Hs[1:-1])

        def unpack(z, Hs=Hs):
            out = Hs.copy()
            out[1:-1] = _z_to_vertices(z.reshape(Z0.shape))
            return out

        res = minimize(
            lambda z: _polygon_objective(unpack(z), trailing, nodes),
            Z0.ravel(),
            method="BFGS",
            options={"maxiter": max_iter, "gtol": 1e-8},
        )
        stagnated = res.status not in (0, 2)
        cand_H = unpack(res.x)
        cand_legs = [HeightSegment(a, b, trailing) for a, b in zip(cand_H[:-1], cand_H[1:])]
        val = path_length(ConcatPath(tuple(cand_legs)), quad)
        if val < best:
            best, legs = val, cand_legs
            H = cand_H
        else:
            H = Hs
        history.append(best)
    return best, legs, history, stagnated


def rho_upper(
    hA,
    hB,
    twistA=None,
    twistB=None,
    levels: int = 2,
    nodes: int = 8,
    max_iter: int = 200,
    quad: Quadrature = Quadrature(rtol=1e-9),
) -> RhoResult:
    """Upper bound on the shift-locus distance between two height vectors.

    Candidates are height polygons (linear height segments between
    optimized vertices, split at non-generic crossings), with a twist
    segment at either end when twists are given; the smaller total entropy
    length is returned. Every refinement level contains the previous
    polygon, so the bound is nonincreasing in ``levels``.
    """
    a, b = _heights(hA), _heights(hB)
    if a.size != b.size:
        raise DomainError("heights of different degrees")
    k = a.size
    tA = np.zeros(k) if twistA is None else np.asarray(twistA, dtype=float)
    tB = np.zeros(k) if twistB is None else np.asarray(twistB, dtype=float)
    TwistState(a, tA)
    TwistState(b, tB)
    H0A, H0B = twist_H0(a), twist_H0(b)
    cA, cB = 1 + tA / H0A, 1 + tB / H0B
    if np.array_equal(a, b) and np.allclose(cA, cB, rtol=0, atol=1e-15):
        return RhoResult(0.0, [], [0.0])

    options = []
    if np.allclose(cA, cB, rtol=0, atol=1e-15):
        options.append(([], cA, []))
    else:
        # twist first at A (target trailing block cB), or last at B (from cA)
        options.append(([TwistSegment(a, tA, (cB - 1) * H0A, H0A)], cB, []))
        options.append(([], cA, [TwistSegment(b, (cA - 1) * H0B, tB, H0B)]))
    best = None
    for pre, trailing, post in options:
        tw = sum(segment_entropy_length(s, quad) for s in pre + post)
        val, legs, hist, stag = _optimize_heights(a, b, trailing, levels, nodes, max_iter, quad)
        total = tw + val
        if best is None or total < best.value:
            best = RhoResult(total, pre + legs + post, [tw + x for x in hist], stag)
    return best
