"""Spectral radius, pressure and topological entropy of metric graphs.

For roses the entropy equation has the equivalent logistic form

    sum_i 1 / (1 + exp(h * l_i)) = 1/2,

obtained from det(I - A_bar(h l)) = prod(1 + x_i) * (1 - 2 sum_i x_i / (1 + x_i))
with x_i = exp(-h l_i). The left-hand side is convex and decreasing in h,
so Newton started left of the root converges monotonically. This is used
by ``entropy_batch``; ``entropy`` exposes three independent algorithms.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from ..errors import DegenerateEntropyError, DomainError, SolverError
from .graph import LengthFunction, MetricGraph, as_length_function, make_rose, weighted_matrix

__all__ = [
    "spectral_radius",
    "pressure",
    "entropy",
    "entropy_batch",
    "normalize_unit_entropy",
    "entropy_gradient",
    "rose_det",
    "rose_closed_sum",
    "ENTROPY_METHODS",
]

ENTROPY_METHODS = ("closed", "spectral", "det")
_EPS = np.finfo(float).eps


def _prune(M: np.ndarray) -> np.ndarray:
    """Drop states with no successors or no predecessors (they carry no Perron mass)."""
    keep = np.ones(M.shape[0], dtype=bool)
    while True:
        sub = M[np.ix_(keep, keep)]
        ok = (sub.sum(axis=1) > 0) & (sub.sum(axis=0) > 0)
        if ok.all():
            return sub
        idx = np.flatnonzero(keep)
        keep[idx[~ok]] = False
        if not keep.any():
            return np.zeros((0, 0))


def spectral_radius(M, tol: float = 1e-13, max_iter: int = 20000) -> float:
    """Perron root of a nonnegative square matrix.

    Power iteration from the all-ones vector, stopped when the
    Collatz-Wielandt bounds min(Mv/v) <= rho <= max(Mv/v) agree to ``tol``
    (relative). Falls back to a dense eigenvalue solve if the bounds do not
    close (e.g. imprimitive matrices).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("spectral_radius needs a square matrix")
    if (M < 0).any() or not np.isfinite(M).all():
        raise DomainError("spectral_radius needs a finite nonnegative matrix")
    M = _prune(M)
    if M.size == 0:
        return 0.0
    v = np.ones(M.shape[0])
    lo, hi = 0.0, np.inf
    for _ in range(max_iter):
        w = M @ v
        if (v > 0).all():
            q = w / v
            lo, hi = q.min(), q.max()
            if hi - lo <= tol * hi:
                return float(0.5 * (lo + hi))
        v = w / w.max()
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def pressure(g: MetricGraph, phi) -> float:
    """log of the spectral radius of A(e, e') exp(phi(e)); -inf if that radius is 0."""
    phi = np.asarray(phi, dtype=float)
    if np.isnan(phi).any() or np.isposinf(phi).any():
        raise DomainError("phi must be < +inf")
    rho = spectral_radius(weighted_matrix(g, -phi))
    return math.log(rho) if rho > 0 else -math.inf


def _finite_lengths(lf: LengthFunction) -> np.ndarray:
    fin = lf.lengths[lf.finite_mask]
    if lf.graph.is_rose and fin.size < 2:
        raise DegenerateEntropyError(
            f"entropy needs at least 2 finite petals, got {fin.size}"
        )
    if not lf.graph.is_rose and fin.size < lf.lengths.size:
        raise DomainError("extended length functions are only supported on roses")
    return fin


def _bracket(L: np.ndarray, degree: float):
    """Entropy bracket from row-sum bounds of the weighted transition matrix."""
    return math.log(degree) / L.max(), math.log(degree) / L.min()


def rose_closed_sum(L, h: float) -> float:
    """sum over nonempty subsets S of (2|S| - 1) exp(-h l(S)), minus 1.

    Grouped by |S| through elementary symmetric polynomials, so the cost is
    O(n^2) instead of O(2^n).
    """
    val, _ = _closed_and_derivative(np.asarray(L, dtype=float), h)
    return val


def _closed_and_derivative(L: np.ndarray, h: float):
    x = np.exp(-h * L)
    dx = -L * x
    n = L.size
    e = np.zeros(n + 1)
    de = np.zeros(n + 1)
    e[0] = 1.0
    for xi, dxi in zip(x, dx):
        # update in place from high degree down
        de[1:] = de[1:] + dxi * e[:-1] + xi * de[:-1]
        e[1:] = e[1:] + xi * e[:-1]
    k = np.arange(1, n + 1)
    w = 2 * k - 1
    return float(w @ e[1:] - 1.0), float(w @ de[1:])


def rose_det(L, h: float = 1.0) -> float:
    """det(I_n - A_bar(h l)) with A_bar(i, j) = (2 - delta_ij) exp(-h l_i)."""
    L = np.asarray(L, dtype=float)
    x = np.exp(-h * L)
    n = L.size
    Abar = np.repeat(2.0 * x[:, None], n, axis=1)
    Abar[np.diag_indices(n)] = x
    return float(np.linalg.det(np.eye(n) - Abar))


def _entropy_closed(L: np.ndarray, tol: float, max_iter: int) -> float:
    lo, hi = _bracket(L, 2 * L.size - 1)
    if hi - lo <= tol * max(1.0, hi):
        return lo
    # convex decreasing in h: Newton from the left endpoint never overshoots
    h = lo
    for _ in range(max_iter):
        val, der = _closed_and_derivative(L, h)
        if der >= 0:
            break
        step = -val / der
        h_new = min(h + max(step, 0.0), hi)
        if abs(h_new - h) <= tol * max(1.0, h) or val <= 0:
            return h_new
        h = h_new
    raise SolverError("closed-form entropy: Newton did not converge", residuals=[val])


def _brent_entropy(fun, lo: float, hi: float, tol: float, max_iter: int) -> float:
    if hi - lo <= tol * max(1.0, hi):
        return lo
    flo, fhi = fun(lo), fun(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        # the analytic bracket is exact; a sign failure here means round-off at a near-double root
        return lo if abs(flo) < abs(fhi) else hi
    return brentq(fun, lo, hi, xtol=tol * max(1.0, lo) * 0.25, rtol=4 * _EPS, maxiter=max_iter)


def entropy(ell, method: str = "spectral", tol: float = 1e-13, max_iter: int = 200) -> float:
    """Topological entropy: the unique h > 0 with pressure(-h l) = 0.

    Parameters
    ----------
    ell : LengthFunction or array_like
        Arrays are read as rose length functions; ``inf`` entries mark
        petals removed in the completion and are dropped.
    method : {"closed", "spectral", "det"}
        ``closed`` solves sum_S (2|S|-1) exp(-h l(S)) = 1, ``det`` finds the
        root of det(I - A_bar(h l)) and ``spectral`` the root of the
        pressure. The first two are rose-only.
    """
    lf = as_length_function(ell)
    if method not in ENTROPY_METHODS:
        raise DomainError(f"unknown entropy method {method!r}")
    L = _finite_lengths(lf)
    g = lf.graph
    if method == "spectral" and not (g.is_rose and L.size < lf.lengths.size):
        A = g.adjacency
        rows = A.sum(axis=1)
        Ld = lf.on_directed_edges()
        lo = math.log(rows.min()) / Ld.max()
        hi = math.log(rows.max()) / Ld.min()
        fun = lambda h: pressure(g, -h * Ld)
        return _brent_entropy(fun, lo, hi, tol, max_iter)
    if not g.is_rose:
        raise DomainError(f"method {method!r} is only available on roses")
    if method == "closed":
        return _entropy_closed(L, tol, max_iter)
    lo, hi = _bracket(L, 2 * L.size - 1)
    if method == "det":
        return _brent_entropy(lambda h: rose_det(L, h), lo, hi, tol, max_iter)
    # spectral on the finite sub-rose (infinite petals have zero rows)
    sub = make_rose(L.size)
    Ld = np.concatenate([L, L])
    return _brent_entropy(lambda h: pressure(sub, -h * Ld), lo, hi, tol, max_iter)


def entropy_batch(L, tol: float = 1e-14, max_iter: int = 100) -> np.ndarray:
    """Vectorized rose entropy for an (N, n) array of lengths (``inf`` allowed)."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if (L <= 0).any() or np.isnan(L).any():
        raise DomainError("lengths must be positive")
    fin = np.isfinite(L)
    nf = fin.sum(axis=1)
    if (nf < 2).any():
        raise DegenerateEntropyError("entropy needs at least 2 finite petals")
    Lz = np.where(fin, L, 0.0)
    Lmax = Lz.max(axis=1)
    h = np.log(2 * nf - 1) / Lmax
    active = np.ones(L.shape[0], dtype=bool)
    for _ in range(max_iter):
        s = np.where(fin, expit(-h[:, None] * Lz), 0.0)
        val = s.sum(axis=1) - 0.5
        der = -(Lz * s * (1 - s)).sum(axis=1)
        step = np.where(active, np.maximum(-val / der, 0.0), 0.0)
        h = h + step
        active &= step > tol * h
        if not active.any():
            return h
    raise SolverError("entropy_batch did not converge", residuals=val[active].tolist())


def normalize_unit_entropy(ell, method: str = "closed"):
    """Rescale ``ell`` to unit entropy; returns the same kind it was given."""
    lf = as_length_function(ell)
    method = method if lf.graph.is_rose else "spectral"
    h = entropy(lf, method=method)
    out = lf.scaled(h)
    if isinstance(ell, LengthFunction):
        return out
    return np.array(out.lengths)


def entropy_gradient(ell) -> np.ndarray:
    """Gradient of the rose entropy function in the lengths.

    dh/dl_j = -h w_j / sum_i w_i l_i with w_i = s_i (1 - s_i),
    s_i = 1 / (1 + exp(h l_i)); infinite petals get 0.
    """
    lf = as_length_function(ell)
    if not lf.graph.is_rose:
        raise DomainError("entropy_gradient is implemented for roses")
    h = float(entropy_batch(lf.lengths[None, :])[0])
    L = lf.lengths
    fin = np.isfinite(L)
    s = np.where(fin, expit(-h * np.where(fin, L, 0.0)), 0.0)
    w = s * (1 - s)
    return -h * w / float(np.sum(w[fin] * L[fin]))
