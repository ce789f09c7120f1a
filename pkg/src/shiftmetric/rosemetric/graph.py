"""Finite graphs with an involution on directed edges, and length functions.

Directed edges are numbered ``0 .. 2m-1``; edge ``i < m`` belongs to the
orientation E+ and its reverse is ``i + m``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import DomainError, TooLargeError

__all__ = [
    "MetricGraph",
    "LengthFunction",
    "make_rose",
    "as_length_function",
    "weighted_matrix",
    "circuit_count",
    "enumerate_circuits",
]


@dataclass(frozen=True, eq=False)
class MetricGraph:
    vertex_count: int
    origin: tuple
    terminus: tuple

    def __post_init__(self):
        o, t = tuple(self.origin), tuple(self.terminus)
        if len(o) != len(t) or len(o) % 2:
            raise DomainError("need an even number of directed edges")
        m = len(o) // 2
        for e in range(2 * m):
            if o[e] != t[self.reverse(e)]:
                raise DomainError(f"o(e) != t(rev e) for edge {e}")
            if not 0 <= o[e] < self.vertex_count:
                raise DomainError(f"edge {e} leaves the vertex set")
        valence = [0] * self.vertex_count
        for e in range(m):
            valence[o[e]] += 1
            valence[t[e]] += 1
        if any(v < 3 for v in valence):
            raise DomainError(f"every vertex needs valence >= 3, got {valence}")
        if self.vertex_count - m >= 0:
            raise DomainError("Euler characteristic must be negative")
        # connectivity by union-find over E+
        parent = list(range(self.vertex_count))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in range(m):
            parent[find(o[e])] = find(t[e])
        if len({find(v) for v in range(self.vertex_count)}) != 1:
            raise DomainError("graph must be connected")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "terminus", t)

    @classmethod
    def from_edges(cls, vertex_count: int, edges) -> "MetricGraph":
        """Build from oriented edges ``[(o, t), ...]`` (these become E+)."""
        edges = list(edges)
        o = [a for a, _ in edges] + [b for _, b in edges]
        t = [b for _, b in edges] + [a for a, _ in edges]
        return cls(vertex_count, tuple(o), tuple(t))

    @property
    def edge_count(self) -> int:
        """|E+|."""
        return len(self.origin) // 2

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - self.edge_count

    @property
    def is_rose(self) -> bool:
        return self.vertex_count == 1

    def reverse(self, e: int) -> int:
        m = len(self.origin) // 2
        return e + m if e < m else e - m

    @cached_property
    def adjacency(self) -> np.ndarray:
        """A(e, e') = 1 iff t(e) = o(e') and e' is not the reverse of e."""
        n = len(self.origin)
        A = np.zeros((n, n))
        for e in range(n):
            for f in range(n):
                if self.terminus[e] == self.origin[f] and f != self.reverse(e):
                    A[e, f] = 1.0
        A.setflags(write=False)
        return A

    def __repr__(self):
        return f"MetricGraph(V={self.vertex_count}, E+={self.edge_count})"


_ROSES: dict = {}


def make_rose(n: int) -> MetricGraph:
    """The n-petal rose: one vertex, n loops."""
    if int(n) != n or n < 2:
        raise DomainError(f"rose needs n >= 2 petals, got {n!r}")
    n = int(n)
    if n not in _ROSES:
        _ROSES[n] = MetricGraph.from_edges(1, [(0, 0)] * n)
    return _ROSES[n]


@dataclass(frozen=True, eq=False)
class LengthFunction:
    """Positive lengths on E+; ``inf`` entries only when ``extended``."""

    graph: MetricGraph
    lengths: np.ndarray
    extended: bool = False

    def __post_init__(self):
        arr = np.array(self.lengths, dtype=float).reshape(-1)
        if arr.size != self.graph.edge_count:
            raise DomainError(f"expected {self.graph.edge_count} lengths, got {arr.size}")
        if np.isnan(arr).any() or (arr <= 0).any():
            raise DomainError("lengths must be positive")
        if np.isinf(arr).any() and not self.extended:
            raise DomainError("infinite lengths need extended=True")
        arr.setflags(write=False)
        object.__setattr__(self, "lengths", arr)

    @property
    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.lengths)

    def on_directed_edges(self) -> np.ndarray:
        return np.concatenate([self.lengths, self.lengths])

    def scaled(self, a: float) -> "LengthFunction":
        return LengthFunction(self.graph, a * self.lengths, self.extended)

    def __len__(self):
        return self.lengths.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.lengths, dtype=dtype)


def as_length_function(ell, extended: bool | None = None) -> LengthFunction:
    """Coerce arrays to rose length functions (rose size = array length).

    Wrappers exposing a ``length`` attribute (e.g. base lengths) are unwrapped.
    """
    if isinstance(getattr(ell, "length", None), LengthFunction):
        ell = ell.length
    if isinstance(ell, LengthFunction):
        return ell
    arr = np.asarray(ell, dtype=float).reshape(-1)
    if extended is None:
        extended = bool(np.isinf(arr).any())
    return LengthFunction(make_rose(arr.size), arr, extended)


def weighted_matrix(g: MetricGraph, phi) -> np.ndarray:
    """A(e, e') * exp(-phi(e)); ``phi`` given on E (2m values) or on E+ (m values)."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size == g.edge_count:
        phi = np.concatenate([phi, phi])
    if phi.size != 2 * g.edge_count:
        raise DomainError("phi must be given on E or on E+")
    w = np.exp(-phi)
    return g.adjacency * w[:, None]


def _directed_lengths(g: MetricGraph, ell) -> np.ndarray:
    lf = ell if isinstance(ell, LengthFunction) else LengthFunction(g, ell)
    if not np.isfinite(lf.lengths).all():
        raise DomainError("circuit counting needs finite lengths")
    return lf.on_directed_edges()


def enumerate_circuits(g: MetricGraph, ell, T: float, guard: int = 10**6) -> list:
    """Explicit list of rooted circuits of length <= T (depth-first search).

    Only practical for small T; ``circuit_count`` is the scalable version.
    """
    L = _directed_lengths(g, ell)
    A = g.adjacency
    n = L.size
    out = []

    def extend(path, total):
        first, last = path[0], path[-1]
        if A[last, first] and total <= T:
            out.append(tuple(path))
            if len(out) > guard:
                raise TooLargeError(f"more than {guard} circuits")
        for f in range(n):
            if A[last, f] and total + L[f] <= T:
                path.append(f)
                extend(path, total + L[f])
                path.pop()

    for e in range(n):
        if L[e] <= T:
            extend([e], L[e])
    return out


def circuit_count(g: MetricGraph, ell, T: float, state_guard: int = 10**7) -> int:
    """Exact number of rooted circuits with length <= T.

    A circuit is a reduced closed edge path (e_1, ..., e_k) with
    t(e_k) = o(e_1) and e_k != rev(e_1); each starting edge counts
    separately. Paths are aggregated by (first edge, last edge, multiplicity
    of every edge of E+), so the cost scales with the number of lattice
    points under T rather than with the (exponential) count itself.
    """
    L = _directed_lengths(g, ell)
    if T < 0:
        return 0
    A = g.adjacency
    m = g.edge_count
    n = 2 * m
    slack = 1e-12 * max(1.0, T)
    succ = [[f for f in range(n) if A[e, f]] for e in range(n)]
    # frontier: (first, last, multiplicities) -> path count, grouped by total length
    frontier = defaultdict(int)
    for e in range(n):
        if L[e] <= T + slack:
            mult = [0] * m
            mult[e % m] += 1
            frontier[(e, e, tuple(mult))] += 1
    total = 0
    states = 0
    while frontier:
        nxt = defaultdict(int)
        for (first, last, mult), count in frontier.items():
            if A[last, first]:
                total += count
            base = sum(mu * L[i] for i, mu in enumerate(mult))
            for f in succ[last]:
                if base + L[f] <= T + slack:
                    mm = list(mult)
                    mm[f % m] += 1
                    nxt[(first, f, tuple(mm))] += count
        states += len(nxt)
        if states > state_guard:
            raise TooLargeError(f"circuit_count exceeded {state_guard} states")
        frontier = nxt
    return total
