"""Entropy metric on the unit-entropy locus of a rose, and completion embeddings.

With s_i = 1 / (1 + exp(l_i)) and w_i = s_i (1 - s_i) at a unit-entropy
point l, the locus is {sum_i s_i = 1/2}, tangent vectors satisfy
sum_i w_i v_i = 0 and

    |v|^2 = sum_i w_i (1 - 2 s_i) v_i^2 / sum_i w_i l_i .

Petals of infinite length have w_i = 0 and drop out of every sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DegenerateBasepointError, DomainError
from .cycles import norm_sq_cycles
from .graph import LengthFunction, as_length_function, make_rose
from .thermo import entropy, entropy_batch

__all__ = [
    "TangentVector",
    "logistic_weights",
    "project_tangent",
    "entropy_norm_sq",
    "entropy_norm_sq_batch",
    "embed_extended",
    "embed_tangent",
    "TANGENCY_TOL",
]

TANGENCY_TOL = 1e-9


def logistic_weights(L):
    """(s, w) for lengths ``L`` (any shape); both vanish on infinite entries."""
    L = np.asarray(L, dtype=float)
    fin = np.isfinite(L)
    s = np.where(fin, expit(-np.where(fin, L, 0.0)), 0.0)
    return s, s * (1.0 - s)


def _unit_basepoint(ell_hat, check: bool = True) -> LengthFunction:
    lf = as_length_function(ell_hat)
    if not lf.graph.is_rose:
        raise DomainError("the entropy metric is implemented for roses")
    if check:
        h = entropy(lf, method="closed")
        if abs(h - 1.0) > 1e-8:
            raise DomainError(f"basepoint must have unit entropy, got {h!r}")
    return lf


def project_tangent(ell_hat, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the tangent space at ``ell_hat``."""
    lf = as_length_function(ell_hat)
    v = np.asarray(v, dtype=float).reshape(-1).copy()
    _, w = logistic_weights(lf.lengths)
    v[~lf.finite_mask] = 0.0
    return v - (w @ v) / (w @ w) * w


@dataclass(frozen=True, eq=False)
class TangentVector:
    basepoint: LengthFunction
    components: np.ndarray

    def __post_init__(self):
        bp = _unit_basepoint(self.basepoint)
        comp = np.array(self.components, dtype=float).reshape(-1)
        if comp.size != bp.lengths.size:
            raise DomainError("tangent vector has the wrong dimension")
        if not np.isfinite(comp).all():
            raise DomainError("tangent components must be finite")
        _, w = logistic_weights(bp.lengths)
        scale = np.linalg.norm(w) * max(1.0, np.linalg.norm(comp))
        if abs(w @ comp) > TANGENCY_TOL * scale:
            raise DomainError(f"vector is not tangent: <w, v> = {w @ comp:.3e}")
        comp.setflags(write=False)
        object.__setattr__(self, "basepoint", bp)
        object.__setattr__(self, "components", comp)

    @classmethod
    def projected(cls, ell_hat, v) -> "TangentVector":
        return cls(as_length_function(ell_hat), project_tangent(ell_hat, v))


def _closed_norm_sq(L, v) -> float:
    s, w = logistic_weights(L)
    fin = np.isfinite(L)
    den = float(np.sum(w[fin] * L[fin]))
    if den <= 0:
        raise DegenerateBasepointError("degenerate basepoint")
    vv = np.where(fin, v, 0.0)
    return float(np.sum(w * (1 - 2 * s) * vv * vv) / den)


def _hessian_norm_sq(L, v, step: float = 1e-3) -> float:
    """Second directional derivative of the entropy function (5-point stencil)."""
    fin = np.isfinite(L)
    vv = np.where(fin, v, 0.0)
    scale = max(1.0, float(np.max(np.abs(vv))))
    eps = step / scale * float(np.min(L[fin]))
    pts = np.array([L + k * eps * vv for k in (-2, -1, 0, 1, 2)])
    h = entropy_batch(pts)
    return float((-h[0] + 16 * h[1] - 30 * h[2] + 16 * h[3] - h[4]) / (12 * eps * eps))


def entropy_norm_sq(ell_hat, v=None, method: str = "closed") -> float:
    """Squared entropy norm of a tangent vector at a unit-entropy rose point.

    ``method`` is ``closed`` (logistic ratio formula), ``cycles`` (cycle
    complex ratio formula, roses with at most 4 petals) or ``hessian``
    (finite-difference Hessian of the entropy function). A ``TangentVector``
    may be passed alone in place of the (basepoint, vector) pair.
    """
    if isinstance(ell_hat, TangentVector) and v is None:
        v = ell_hat
    if isinstance(v, TangentVector):
        ell_hat, v = v.basepoint, v.components
        lf = ell_hat
    else:
        tv = TangentVector(as_length_function(ell_hat), v)
        lf, v = tv.basepoint, tv.components
    L = lf.lengths
    if method == "closed":
        return _closed_norm_sq(L, v)
    if method == "hessian":
        return _hessian_norm_sq(L, v)
    if method == "cycles":
        fin = lf.finite_mask
        sub = LengthFunction(make_rose(int(fin.sum())), L[fin])
        return norm_sq_cycles(sub, np.asarray(v)[fin])
    raise DomainError(f"unknown norm method {method!r}")


def entropy_norm_sq_batch(L, V) -> np.ndarray:
    """Closed-form squared norms for stacked unit-entropy points and tangent vectors."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    fin = np.isfinite(L)
    s, w = logistic_weights(L)
    Lz = np.where(fin, L, 0.0)
    Vz = np.where(fin, V, 0.0)
    return (w * (1 - 2 * s) * Vz * Vz).sum(axis=1) / (w * Lz).sum(axis=1)


def _check_subset(S, n):
    S = [int(i) for i in S]
    if len(set(S)) != len(S) or any(not 0 <= i < n for i in S):
        raise DomainError(f"S must be distinct petal indices in [0, {n})")
    if len(S) < 2:
        raise DomainError("S needs at least 2 petals")
    return S


def embed_extended(ell, S, n: int) -> LengthFunction:
    """Place the lengths of a |S|-petal rose on petals ``S`` (0-based) of an n-petal rose, inf elsewhere."""
    lf = as_length_function(ell)
    S = _check_subset(S, n)
    if lf.lengths.size != len(S):
        raise DomainError("len(S) must match the number of petals of ell")
    out = np.full(n, np.inf)
    out[S] = lf.lengths
    return LengthFunction(make_rose(n), out, extended=bool(len(S) < n))


def embed_tangent(v, S, n: int) -> np.ndarray:
    """Tangent map of ``embed_extended``: zero velocity on the added petals."""
    v = np.asarray(v, dtype=float).reshape(-1)
    S = _check_subset(S, n)
    if v.size != len(S):
        raise DomainError("len(S) must match the dimension of v")
    out = np.zeros(n)
    out[S] = v
    return out
