"""Experiment drivers behind the command line: level-curve sweep in the
quadratic family and regime reports for height families."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ClassificationUncertain, ShiftMetricError
from .polydyn import Polynomial, green_function
from .rosemetric import distance_upper
from .shiftlocus import (
    SequenceFamily,
    cauchy_probe,
    entropy_asymptotics,
    index_set,
    twist_H0,
)

__all__ = [
    "thread_count",
    "parallel_map",
    "trace_level",
    "LevelEstimate",
    "level_length",
    "sweep_s2",
    "regimes_report",
]


def thread_count() -> int:
    raw = os.environ.get("SHIFTMETRIC_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def parallel_map(fun, items):
    """Order-preserving map over a thread pool capped by SHIFTMETRIC_THREADS."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fun, items))


def _escape(c: complex) -> float:
    return green_function(Polynomial.quadratic(c), 0j)


def trace_level(h: float, samples: int = 256):
    """Points c on {G_c(0) = h} along rays of angle 2 pi (j + 1/2) / samples.

    Returns ``(angles, points, ok)``; ``ok`` is False where no sign change
    was found on the ray.
    """
    if h <= 0:
        raise ShiftMetricError("levels must be positive")
    angles = 2 * math.pi * (np.arange(samples) + 0.5) / samples
    # G_c(0) = log|c| / 2 + O(1/|c|); this radius is safely above the level
    r_hi = 4.0 * math.exp(2 * h) + 4.0
    points = np.full(samples, np.nan + 0j)
    ok = np.zeros(samples, dtype=bool)
    for j, a in enumerate(angles):
        u = complex(math.cos(a), math.sin(a))
        g = lambda r: _escape(r * u) - h
        if g(r_hi) <= 0:
            continue
        try:
            # G vanishes at c = 0, which lies in the connectedness locus
            r = brentq(g, 0.0, r_hi, xtol=1e-13, rtol=1e-13)
        except ValueError:
            continue
        points[j], ok[j] = r * u, True
    return angles, points, ok


@dataclass
class LevelEstimate:
    h: float
    length: float
    samples: int
    failed: int


def level_length(h: float, samples: int = 256) -> LevelEstimate:
    """Entropy length of a level curve of the escape rate in the quadratic family.

    Every point of the level has critical height h, so its rose length
    function is (h, 1 + t / H0) with H0 = max(h, 1/h) and twist t in
    (-1, 1); t is read off the argument of c (t = arg c / pi - 1, which
    agrees with the external angle asymptotically for large levels). The
    estimate sums rose distances between consecutive samples along the
    open arc; on the 2-petal rose the unit-entropy locus is a curve, so
    each term is exact.
    """
    angles, points, ok = trace_level(h, samples)
    H0 = twist_H0([h])
    theta = np.angle(points[ok]) % (2 * math.pi) / math.pi - 1.0
    theta.sort()
    pts = [np.array([h, 1.0 + t / H0]) for t in theta]
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        total += distance_upper(p, q).value
    return LevelEstimate(h, total, int(ok.sum()), int((~ok).sum()))


def sweep_s2(levels, samples: int = 256) -> list:
    return parallel_map(lambda h: level_length(float(h), samples), levels)


def regimes_report(fam: SequenceFamily, k_probe=None) -> tuple:
    """Per-probe rows and a summary for one family.

    Each part (index set, entropy rate, leg decay) is reported on its own;
    an inconclusive index-set fit is recorded rather than raised.
    """
    k = np.asarray(fam.k_grid if k_probe is None else k_probe, dtype=float)
    summary = {"family": fam.name or list(fam.exprs), "D": fam.D, "regime": fam.regime}
    try:
        ix = index_set(fam, k)
        summary.update(
            index_set=list(ix.petals),
            singular=ix.singular,
            degenerating=ix.degenerating,
            uniformly_divergent=ix.uniformly_divergent,
        )
    except ClassificationUncertain as exc:
        summary.update(index_set=None, index_set_note=str(exc))
    cp = cauchy_probe(fam, k)
    summary.update(leg_decay=cp.q, classification=cp.classification)
    rows_entropy = None
    if fam.regime in ("comparable", "little-o", "vanishing"):
        ea = entropy_asymptotics(fam, k)
        summary.update(entropy_check=ea.kind, entropy_pass=ea.passed, entropy_C=ea.C)
        rows_entropy = ea
    from .rosemetric import entropy_batch

    ent = entropy_batch(fam.lengths(k)) if rows_entropy is None else rows_entropy.entropy
    rate = fam.predicted_rate(k)
    rows = []
    for j, kk in enumerate(k):
        rows.append(
            {
                "k": float(kk),
                "entropy": float(ent[j]),
                "entropy_ratio": float(ent[j] / rate[j]),
                "leg": float(cp.legs[j]) if j < cp.legs.size else math.nan,
                "tail_sum": float(cp.tail_sums[j]) if j < cp.tail_sums.size else 0.0,
            }
        )
    return rows, summary
