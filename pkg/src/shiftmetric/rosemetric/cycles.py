"""Cycle complex of the edge digraph and the determinant function F.

F(l) = det(I - A_l) with A_l(e, e') = A(e, e') exp(-l(e)). Expanding the
determinant over disjoint cycle collections gives

    F(l) = 1 + sum_{Delta} (-1)^{|Delta|} exp(-l(Delta)),

the sum running over the nonempty simplices of the cycle complex. The
gradient, the pairing <l, grad F> and the Hessian quadratic form follow by
differentiating term by term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateBasepointError, DomainError, TooLargeError
from .graph import LengthFunction, MetricGraph, as_length_function, weighted_matrix

__all__ = [
    "CycleComplex",
    "simple_cycles",
    "cycle_complex",
    "F_gamma",
    "grad_F",
    "pairing_F",
    "hess_F_quadform",
    "norm_sq_cycles",
]


def simple_cycles(g: MetricGraph, cap: int = 10**6) -> list:
    """Simple cycles of D_Gamma (vertices: directed edges, arcs: allowed transitions).

    Each cycle is listed once, rotated to start at its smallest vertex.
    """
    A = g.adjacency
    n = A.shape[0]
    succ = [np.flatnonzero(A[e]).tolist() for e in range(n)]
    out = []

    for s in range(n):
        path = [s]
        on_path = {s}

        def walk(v):
            for f in succ[v]:
                if f == s:
                    out.append(tuple(path))
                    if len(out) > cap:
                        raise TooLargeError(f"more than {cap} simple cycles")
                elif f > s and f not in on_path:
                    path.append(f)
                    on_path.add(f)
                    walk(f)
                    path.pop()
                    on_path.discard(f)

        walk(s)
    return out


@dataclass(frozen=True, eq=False)
class CycleComplex:
    """Simplices stored as an edge-count matrix (simplex x E+) with signs (-1)^{|Delta|}."""

    graph: MetricGraph
    cycles: tuple
    counts: np.ndarray
    signs: np.ndarray
    sizes: np.ndarray

    @property
    def simplex_count(self) -> int:
        return self.signs.size

    def simplices(self):
        """Regenerate the simplices as tuples of cycle indices (slow; for inspection)."""
        masks = [_mask(c) for c in self.cycles]
        out = []

        def rec(start, used, chosen):
            for i in range(start, len(masks)):
                if not used & masks[i]:
                    chosen.append(i)
                    out.append(tuple(chosen))
                    rec(i + 1, used | masks[i], chosen)
                    chosen.pop()

        rec(0, 0, [])
        return out


def _mask(cycle) -> int:
    m = 0
    for e in cycle:
        m |= 1 << e
    return m


_CACHE: dict = {}


def cycle_complex(g: MetricGraph, max_petals: int = 4, max_simplices: int = 2 * 10**6) -> CycleComplex:
    """Enumerate the cycle complex (exponential in the graph size, hence the caps)."""
    if g.is_rose and g.edge_count > max_petals:
        raise TooLargeError(f"rose with {g.edge_count} petals exceeds max_petals={max_petals}")
    if not g.is_rose and 2 * g.edge_count > 8:
        raise TooLargeError("cycle complex only enumerated for graphs with at most 8 directed edges")
    key = (id(g), max_petals, max_simplices)
    hit = _CACHE.get(key)
    if hit is not None and hit.graph is g:
        return hit
    m = g.edge_count
    cycles = simple_cycles(g)
    masks = [_mask(c) for c in cycles]
    ccounts = np.zeros((len(cycles), m), dtype=np.int8)
    for i, c in enumerate(cycles):
        for e in c:
            ccounts[i, e % m] += 1

    rows, sizes = [], []

    def rec(start, used, acc, size):
        for i in range(start, len(masks)):
            if not used & masks[i]:
                nxt = acc + ccounts[i]
                rows.append(nxt)
                sizes.append(size + 1)
                if len(rows) > max_simplices:
                    raise TooLargeError(f"more than {max_simplices} simplices")
                rec(i + 1, used | masks[i], nxt, size + 1)

    rec(0, 0, np.zeros(m, dtype=np.int8), 0)
    sizes = np.array(sizes, dtype=np.int64)
    cc = CycleComplex(
        graph=g,
        cycles=tuple(cycles),
        counts=np.array(rows, dtype=np.int8).reshape(-1, m),
        signs=np.where(sizes % 2 == 0, 1.0, -1.0),
        sizes=sizes,
    )
    _CACHE[key] = cc
    return cc


def _terms(cc: CycleComplex, L: np.ndarray):
    """Signed weights (-1)^{|Delta|} exp(-l(Delta)), restricted to finite support."""
    fin = np.isfinite(L)
    C = cc.counts.astype(float)
    keep = ~(C[:, ~fin] > 0).any(axis=1)
    C = C[keep][:, fin]
    ellD = C @ L[fin]
    return C, ellD, cc.signs[keep] * np.exp(-ellD), fin


def _lf(ell) -> LengthFunction:
    return as_length_function(ell)


def F_gamma(ell, method: str = "det", cc: CycleComplex | None = None) -> float:
    """F(l) = det(I_{|E|} - A_l), by determinant or by the cycle expansion."""
    lf = _lf(ell)
    if method == "det":
        return float(np.linalg.det(np.eye(2 * lf.graph.edge_count) - weighted_matrix(lf.graph, lf.lengths)))
    if method != "cycles":
        raise DomainError(f"unknown F method {method!r}")
    cc = cc or cycle_complex(lf.graph)
    _, _, t, _ = _terms(cc, lf.lengths)
    return float(1.0 + t.sum())


def grad_F(ell, cc: CycleComplex | None = None) -> np.ndarray:
    """dF/dl_j = -sum (-1)^{|Delta|} Delta(j) exp(-l(Delta)); 0 on infinite petals."""
    lf = _lf(ell)
    cc = cc or cycle_complex(lf.graph)
    C, _, t, fin = _terms(cc, lf.lengths)
    out = np.zeros(lf.lengths.size)
    out[fin] = -(t @ C)
    return out


def pairing_F(ell, cc: CycleComplex | None = None) -> float:
    """<l, grad F(l)> = -sum (-1)^{|Delta|} l(Delta) exp(-l(Delta))."""
    lf = _lf(ell)
    cc = cc or cycle_complex(lf.graph)
    _, ellD, t, _ = _terms(cc, lf.lengths)
    return float(-(t @ ellD))


def hess_F_quadform(ell, v, cc: CycleComplex | None = None) -> float:
    """<v, H[F](l) v> = sum (-1)^{|Delta|} v(Delta)^2 exp(-l(Delta))."""
    lf = _lf(ell)
    v = np.asarray(v, dtype=float).reshape(-1)
    cc = cc or cycle_complex(lf.graph)
    C, _, t, fin = _terms(cc, lf.lengths)
    vD = C @ v[fin]
    return float(t @ (vD * vD))


def norm_sq_cycles(ell_hat, v, cc: CycleComplex | None = None) -> float:
    """Entropy norm squared as -<v, H v> / <l, grad F> from the cycle expansion."""
    den = pairing_F(ell_hat, cc)
    if den == 0 or not np.isfinite(den):
        raise DegenerateBasepointError("<l, grad F> vanishes at the basepoint")
    return -hess_F_quadform(ell_hat, v, cc) / den
