"""Sequences of shift-locus points indexed by k and their empirical classification.

Families are given by one height expression per critical point, written in
``k`` and named parameters (``a``, ...), e.g. ``["2**k", "a*2**k"]``.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..errors import ClassificationUncertain, DomainError
from ..rosemetric import entropy_batch
from ..rosemetric.paths import FunctionPath, Quadrature, path_length
from .lengths import base_lengths_array, height_segment, segment_entropy_length

__all__ = [
    "compile_expression",
    "SequenceFamily",
    "BUILTIN_FAMILIES",
    "IndexSetReport",
    "index_set",
    "AsymptoticsReport",
    "entropy_asymptotics",
    "sharp_little_o_rate",
    "CauchyReport",
    "cauchy_probe",
    "family_leg",
    "EXCLUDE_RATIO",
    "DEGENERATE_CUT",
    "CAUCHY_Q",
    "DIVERGENT_Q",
]

EXCLUDE_RATIO = 0.05
DEGENERATE_CUT = 1e3
# geometric decay ratio of consecutive leg lengths
CAUCHY_Q = 0.5
DIVERGENT_Q = 0.8
NEGLIGIBLE_LEG = 1e-12

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sqrt": np.sqrt, "log": np.log, "exp": np.exp, "log2": np.log2}
_CONSTS = {"pi": math.pi, "e": math.e}


def compile_expression(src: str, params: dict):
    """Compile an arithmetic expression in ``k`` into a vectorized function.

    Only numbers, ``k``, the given parameters, + - * / ** and a few numpy
    functions are accepted.
    """
    try:
        tree = ast.parse(str(src), mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"bad height expression {src!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return check(node.left) and check(node.right)
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return check(node.operand)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return True
        if isinstance(node, ast.Name):
            if node.id == "k" or node.id in params or node.id in _CONSTS:
                return True
            raise DomainError(f"unknown name {node.id!r} in {src!r}")
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and len(node.args) == 1
            and not node.keywords
        ):
            return check(node.args[0])
        raise DomainError(f"unsupported syntax in height expression {src!r}")

    check(tree)

    def ev(node, k):
        if isinstance(node, ast.Expression):
            return ev(node.body, k)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, k), ev(node.right, k))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](ev(node.operand, k))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "k":
                return k
            return float(params[node.id]) if node.id in params else _CONSTS[node.id]
        return _FUNCS[node.func.id](ev(node.args[0], k))

    def fun(k):
        k = np.asarray(k, dtype=float)
        return np.broadcast_to(np.asarray(ev(tree, k), dtype=float), k.shape)

    return fun


@dataclass(frozen=True, eq=False)
class SequenceFamily:
    D: int
    exprs: tuple
    regime: str = ""
    params: dict = field(default_factory=dict)
    k_grid: tuple = ()
    name: str = ""
    rate: str = ""

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 2:
            raise DomainError("D must be an integer >= 2")
        if len(self.exprs) != self.D - 1:
            raise DomainError(f"degree {self.D} needs {self.D - 1} height expressions")
        funs = tuple(compile_expression(e, self.params) for e in self.exprs)
        object.__setattr__(self, "_funs", funs)
        object.__setattr__(self, "_rate", compile_expression(self.rate, self.params) if self.rate else None)
        object.__setattr__(self, "k_grid", tuple(float(k) for k in self.k_grid))

    def heights(self, k) -> np.ndarray:
        """Heights at (possibly fractional) k, shape (len(k), D-1), sorted nonincreasing."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        H = np.stack([f(k) for f in self._funs], axis=1)
        if not np.isfinite(H).all() or (H <= 0).any():
            raise DomainError(f"family {self.name or self.exprs} leaves the shift locus")
        return -np.sort(-H, axis=1)

    def lengths(self, k) -> np.ndarray:
        return base_lengths_array(self.heights(k))

    def predicted_rate(self, k) -> np.ndarray:
        """Reference entropy rate: the ``rate`` expression, else h_1/h_{D-1} (1/h_1 for D = 2)."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if self._rate is not None:
            return np.asarray(self._rate(k), dtype=float)
        H = self.heights(k)
        return H[:, 0] / H[:, -1] if self.D > 2 else 1.0 / H[:, 0]

    @classmethod
    def from_json(cls, obj) -> "SequenceFamily":
        """Parse ``{"D", "regime", "heights": [...], "kGrid": [...], <params>}``.

        ``{"name": <builtin>}`` loads a built-in family; other keys override it.
        """
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise DomainError("family JSON must be an object")
        obj = dict(obj)
        if "name" in obj and obj["name"] in BUILTIN_FAMILIES:
            base = BUILTIN_FAMILIES[obj["name"]]
            merged = {"D": base.D, "heights": list(base.exprs), "regime": base.regime,
                      "kGrid": list(base.k_grid), "name": base.name, "rate": base.rate,
                      **base.params}
            merged.update(obj)
            obj = merged
        for key in ("D", "heights"):
            if key not in obj:
                raise DomainError(f"family JSON needs {key!r}")
        reserved = {"D", "heights", "regime", "kGrid", "name", "rate"}
        params = {k: float(v) for k, v in obj.items() if k not in reserved}
        return cls(int(obj["D"]), tuple(obj["heights"]), str(obj.get("regime", "")),
                   params, tuple(obj.get("kGrid", ())), str(obj.get("name", "")),
                   str(obj.get("rate", "")))


def _fam(name, D, exprs, regime, grid, rate="", **params):
    return name, SequenceFamily(D, tuple(exprs), regime, params, tuple(grid), name, rate)


_DYADIC = tuple(range(1, 14))
_DECADES = tuple(10 ** (1 + 0.5 * i) for i in range(7))

BUILTIN_FAMILIES = dict(
    [
        # cubic distance regimes; the tag is the expected leg-decay class
        _fam("cubic-1", 3, ["1", "2**-k"], "divergent", _DYADIC),
        _fam("cubic-2a", 3, ["2**k", "2**k/k"], "divergent", _DYADIC),
        _fam("cubic-2b", 3, ["2**k", "a*2**k"], "cauchy", _DYADIC, a=0.5),
        _fam("cubic-3a-fast", 3, ["2**-k", "8**-k"], "divergent", _DYADIC),
        _fam("cubic-3a-slow", 3, ["2**-k", "2**(-1.5*k)"], "divergent", _DYADIC),
        _fam("cubic-3b", 3, ["2**-k", "a*4**-k"], "cauchy", _DYADIC, a=1.0),
        # entropy growth regimes; the tag names the predicted rate class
        _fam("entropy-2a-D4", 4, ["1", "1/k", "1/(2*k)"], "comparable", _DECADES),
        _fam("entropy-2b-D3", 3, ["1/k", "a/k**2"], "comparable", _DECADES, a=0.5),
        _fam("entropy-2b-D4", 4, ["1/k", "1/(2*k)", "a/k**2"], "comparable", _DECADES, a=1.0),
        _fam("entropy-2c-D3", 3, ["1", "1/k"], "little-o", _DECADES),
        _fam("entropy-2c-D4", 4, ["1", "0.5", "1/k"], "little-o", _DECADES),
        _fam("entropy-2d-D3", 3, ["1/k", "1/(2*k)"], "little-o", _DECADES, rate="k"),
        _fam("entropy-2d-D4", 4, ["1/k", "1/(2*k)", "1/(3*k)"], "little-o", _DECADES, rate="k"),
        _fam("quadratic-escape", 2, ["k"], "vanishing", _DECADES),
    ]
)


def _probes(fam: SequenceFamily, k_probe):
    k = np.asarray(fam.k_grid if k_probe is None else k_probe, dtype=float)
    if k.size < 3:
        raise DomainError("need at least 3 probe indices")
    if (np.diff(k) <= 0).any():
        raise DomainError("probe indices must be increasing")
    return k


@dataclass
class IndexSetReport:
    """``petals`` uses 1-based labels e_1, ..., e_{2D-2}."""

    petals: tuple
    singular: bool
    degenerating: bool
    uniformly_divergent: bool
    ratios: np.ndarray
    k: np.ndarray


def index_set(fam: SequenceFamily, k_probe=None) -> IndexSetReport:
    """Empirical index set of asymptotically shortest petals.

    With m_k the shortest length at probe k, petal i is dropped when
    m_k / l_k(e_i) is below ``EXCLUDE_RATIO`` at the last probe and has been
    nonincreasing across the probes; it is kept when the ratio stays above
    the cut without collapsing. Anything else is reported as uncertain.
    """
    k = _probes(fam, k_probe)
    L = fam.lengths(k)
    R = L.min(axis=1, keepdims=True) / L
    petals = []
    for i in range(L.shape[1]):
        r = R[:, i]
        decreasing = bool((np.diff(r) <= 1e-12 * r[:-1]).all())
        if r[-1] < EXCLUDE_RATIO and decreasing:
            continue
        if r[-1] >= EXCLUDE_RATIO and not (decreasing and r[-1] < 0.1 * r[0]):
            petals.append(i + 1)
            continue
        raise ClassificationUncertain(
            f"petal e_{i + 1}: ratio trend inconclusive", table={"k": k.tolist(), "ratios": R.tolist()}
        )
    # every coordinate monotone across probes, hence convergent in [0, inf]
    rel = np.diff(L, axis=0) / L[:-1]
    monotone = bool(((rel >= -1e-12).all(axis=0) | (rel <= 1e-12).all(axis=0)).all())
    return IndexSetReport(
        petals=tuple(petals),
        singular=len(petals) == 1,
        degenerating=bool(L[-1, 0] > DEGENERATE_CUT),
        uniformly_divergent=monotone,
        ratios=R,
        k=k,
    )


@dataclass
class AsymptoticsReport:
    """``C`` is measured against ``rate`` for comparable families and against
    ``sharp_rate`` for little-o families."""

    k: np.ndarray
    entropy: np.ndarray
    rate: np.ndarray
    ratio: np.ndarray
    C: float
    slope: float
    kind: str
    passed: bool
    sharp_rate: np.ndarray | None = None
    decreasing: bool | None = None


def _fitted_C(ratio) -> float:
    G = math.exp(float(np.mean(np.log(ratio))))
    return float(np.max(np.maximum(ratio / G, G / ratio)))


def sharp_little_o_rate(L) -> np.ndarray:
    """log(1/l_min) / l_(2), from the two shortest petals of each row of ``L``.

    With one petal of length eps much shorter than the rest, the unit-entropy
    equation reduces to h eps / 4 ~ sum_j exp(-h l_j), dominated by the second
    shortest petal l_(2); hence h l_(2) ~ log(1 / eps).
    """
    S = np.sort(np.atleast_2d(np.asarray(L, dtype=float)), axis=1)
    return np.log(1.0 / S[:, 0]) / S[:, 1]


def entropy_asymptotics(fam: SequenceFamily, k_probe=None, C_max: float = 10.0) -> AsymptoticsReport:
    """Compare the entropy of the base lengths with the family's predicted rate.

    ``comparable`` families pass when the ratio stays within [G/C, G C]
    around its geometric mean G with C <= ``C_max``. ``little-o`` families
    pass when the ratio to the predicted rate decreases strictly and the
    entropy stays within such a band of ``sharp_little_o_rate``.
    ``vanishing`` (degree 2, h_1 -> infinity) passes when the entropy
    itself decreases strictly to 0.
    """
    k = _probes(fam, k_probe)
    H = fam.heights(k)
    L = base_lengths_array(H)
    h = entropy_batch(L)
    rate = fam.predicted_rate(k)
    ratio = h / rate
    C = _fitted_C(ratio)
    slope = float(np.polyfit(np.log(k), np.log(ratio), 1)[0])
    kind = fam.regime or "comparable"
    sharp, decreasing = None, None
    if kind == "comparable":
        passed = C <= C_max
    elif kind == "little-o":
        sharp = sharp_little_o_rate(L)
        if (sharp <= 0).any():
            raise DomainError("little-o check needs a petal shorter than 1")
        C = _fitted_C(h / sharp)
        decreasing = bool((np.diff(ratio) < 0).all())
        passed = decreasing and C <= C_max
    elif kind == "vanishing":
        passed = bool((np.diff(h) < 0).all() and h[-1] < 0.1 * h[0])
    else:
        raise DomainError(f"no entropy prediction for regime {kind!r}")
    return AsymptoticsReport(k, h, rate, ratio, C, slope, kind, passed, sharp, decreasing)


def _curve_crossings(fam, k0, k1, samples=65):
    """Parameters in (0, 1) where the family crosses a non-generic height ratio."""
    if fam.D < 3:
        return ()
    s = np.linspace(k0, k1, samples)
    H = fam.heights(s)
    logD = math.log(fam.D)
    out = set()
    for i in range(H.shape[1]):
        for j in range(i + 1, H.shape[1]):
            g = lambda kk, i=i, j=j: (lambda hh: math.log(hh[0, i] / hh[0, j]) / logD)(fam.heights([kk]))
            r = np.log(H[:, i] / H[:, j]) / logD
            for a in range(samples - 1):
                lo, hi = sorted((r[a], r[a + 1]))
                for m in range(math.ceil(lo), math.floor(hi) + 1):
                    if r[a] == m or r[a + 1] == m or r[a] == r[a + 1]:
                        continue
                    root = brentq(lambda kk: g(kk) - m, s[a], s[a + 1], xtol=1e-14)
                    out.add(round((root - k0) / (k1 - k0), 14))
    return tuple(sorted(t for t in out if 0 < t < 1))


def family_leg(fam: SequenceFamily, k0: float, k1: float, quad: Quadrature = Quadrature(rtol=1e-9)) -> float:
    """Entropy length of the family's own curve for k in [k0, k1]."""
    path = FunctionPath(
        lambda t: fam.lengths(k0 + np.asarray(t) * (k1 - k0)),
        breakpoints=_curve_crossings(fam, k0, k1),
    )
    return path_length(path, quad)


@dataclass
class CauchyReport:
    k: np.ndarray
    legs: np.ndarray
    tail_sums: np.ndarray
    q: float
    classification: str

    @property
    def bounded_tail(self) -> bool:
        return self.classification == "cauchy"


def cauchy_probe(fam: SequenceFamily, k_probe=None) -> CauchyReport:
    """Upper bounds on the distance between consecutive probes, and their decay.

    Each leg is the shorter of the straight height segment and the family's
    own curve. The decay ratio q is fitted on the second half of the legs
    (per probe step); legs below 1e-12 count as vanished.
    """
    k = _probes(fam, k_probe)
    H = fam.heights(k)
    legs = []
    for j in range(k.size - 1):
        seg = segment_entropy_length(height_segment(H[j], H[j + 1]), Quadrature(rtol=1e-9))
        legs.append(min(seg, family_leg(fam, k[j], k[j + 1])))
    legs = np.array(legs)
    tail_sums = np.cumsum(legs[::-1])[::-1]
    tail = legs[legs.size // 2 :]
    live = tail > NEGLIGIBLE_LEG
    if live.sum() < 2:
        q = 0.0
    else:
        idx = np.arange(tail.size)[live]
        q = float(math.exp(np.polyfit(idx, np.log(tail[live]), 1)[0]))
    if q < CAUCHY_Q:
        cls = "cauchy"
    elif q >= DIVERGENT_Q:
        cls = "divergent"
    else:
        cls = "uncertain"
    return CauchyReport(k, legs, tail_sums, q, cls)
