"""Dynamics of monic centered polynomials.

Critical points, the escape-rate (Green's) function, critical heights and
the decomposition of the fundamental annulus into subannuli.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, SolverError

__all__ = [
    "Polynomial",
    "CriticalHeights",
    "SubannulusDecomposition",
    "critical_points",
    "green_function",
    "critical_heights",
    "is_shift_locus",
    "is_generic",
    "subannuli",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Polynomial:
    """f(z) = z^D + a_{D-2} z^{D-2} + ... + a_0.

    ``coeffs`` is ordered (a_{D-2}, ..., a_0), highest power first.
    """

    degree: int
    coeffs: tuple

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 2:
            raise DomainError(f"degree must be an integer >= 2, got {self.degree!r}")
        coeffs = tuple(complex(c) for c in self.coeffs)
        if len(coeffs) != self.degree - 1:
            raise DomainError(
                f"degree {self.degree} needs {self.degree - 1} coefficients, got {len(coeffs)}"
            )
        if any(not (math.isfinite(c.real) and math.isfinite(c.imag)) for c in coeffs):
            raise DomainError("coefficients must be finite")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def monomial(cls, degree: int) -> "Polynomial":
        return cls(degree, (0j,) * (degree - 1))

    @classmethod
    def quadratic(cls, c: complex) -> "Polynomial":
        """z^2 + c."""
        return cls(2, (complex(c),))

    @property
    def full_coeffs(self) -> np.ndarray:
        """All D+1 coefficients, highest power first (numpy.polyval order)."""
        return np.array((1.0 + 0j, 0j) + self.coeffs, dtype=complex)

    @property
    def coeff_mass(self) -> float:
        return float(sum(abs(c) for c in self.coeffs))

    def escape_radius(self) -> float:
        return max(2.0, 2.0 * (1.0 + self.coeff_mass))

    def __call__(self, z: complex) -> complex:
        return _horner(self.full_coeffs, z)

    def derivative_coeffs(self) -> np.ndarray:
        return np.polyder(self.full_coeffs)

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [[c.real, c.imag] for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj) -> "Polynomial":
        """Accept a dict or a JSON string ``{"degree": D, "coeffs": [[re, im], ...]}``."""
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "degree" not in obj or "coeffs" not in obj:
            raise DomainError('polynomial JSON needs "degree" and "coeffs"')
        coeffs = []
        for entry in obj["coeffs"]:
            if isinstance(entry, (int, float)):
                coeffs.append(complex(entry))
            elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                coeffs.append(complex(float(entry[0]), float(entry[1])))
            else:
                raise DomainError(f"bad coefficient entry {entry!r}")
        return cls(int(obj["degree"]), tuple(coeffs))


def _horner(coeffs: np.ndarray, z: complex) -> complex:
    acc = 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


@dataclass(frozen=True)
class CriticalHeights:
    """Nonincreasing vector (h_1 >= ... >= h_{D-1} >= 0)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DomainError("need at least one height")
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise DomainError(f"heights must be finite and >= 0: {vals}")
        if any(a < b for a, b in zip(vals, vals[1:])):
            raise DomainError(f"heights must be nonincreasing: {vals}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "CriticalHeights":
        """Sort arbitrary heights into nonincreasing order."""
        return cls(tuple(sorted((float(v) for v in values), reverse=True)))

    @property
    def degree(self) -> int:
        return len(self.values) + 1

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class SubannulusDecomposition:
    boundaries: tuple
    moduli: tuple

    @property
    def class_count(self) -> int:
        return len(self.moduli)


def _aberth_start(p: np.ndarray) -> np.ndarray:
    m = len(p) - 1
    # Fujiwara-style radius from the coefficient magnitudes
    radius = max(abs(p[k]) ** (1.0 / k) for k in range(1, m + 1)) if m else 0.0
    radius = max(radius, 1e-3)
    k = np.arange(m)
    return radius * np.exp(1j * (2 * np.pi * k / m + 0.4))


def _aberth(p: np.ndarray, max_iter: int = 500):
    """All roots of the monic polynomial ``p`` (highest power first)."""
    m = len(p) - 1
    dp = np.polyder(p)
    absp = np.abs(p)
    z = _aberth_start(p)
    converged = np.zeros(m, dtype=bool)
    for _ in range(max_iter):
        pz = np.polyval(p, z)
        dpz = np.polyval(dp, z)
        noise = 8 * _EPS * np.polyval(absp, np.abs(z))
        converged = np.abs(pz) <= noise
        if converged.all():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dpz != 0, pz / dpz, 0.0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            w = ratio / (1.0 - ratio * s)
        w = np.where(converged | ~np.isfinite(w), 0.0, w)
        z = z - w
        if np.all(np.abs(w) <= 4 * _EPS * (1.0 + np.abs(z))):
            converged = np.ones(m, dtype=bool)
            break
    return z, converged


def critical_points(f: Polynomial, cluster_tol: float = 1e-8) -> list:
    """Roots of f' as a multiset of D-1 complex numbers.

    Roots closer than ``cluster_tol`` (scaled by the root magnitude) are
    merged into one point repeated with its multiplicity.
    """
    if cluster_tol <= 0:
        raise DomainError("cluster_tol must be positive")
    dp = f.derivative_coeffs() / f.degree
    m = f.degree - 1
    if m == 1:
        return [complex(-dp[1])]
    z, converged = _aberth(dp)
    if not converged.all():
        raise SolverError(
            "Aberth iteration did not converge", residuals=np.abs(np.polyval(dp, z)).tolist()
        )
    # Newton polish, kept only where it lowers the residual
    ddp = np.polyder(dp)
    for _ in range(2):
        pz = np.polyval(dp, z)
        dz = np.polyval(ddp, z)
        ok = np.abs(dz) > 0
        cand = np.where(ok, z - np.where(ok, pz / np.where(ok, dz, 1.0), 0.0), z)
        better = np.abs(np.polyval(dp, cand)) < np.abs(pz)
        z = np.where(better, cand, z)

    scale = max(1.0, float(np.max(np.abs(z))))
    labels = list(range(m))
    for i in range(m):
        for j in range(i + 1, m):
            if abs(z[i] - z[j]) <= cluster_tol * scale:
                old, new = labels[j], labels[i]
                labels = [new if lab == old else lab for lab in labels]
    out = []
    for lab in sorted(set(labels)):
        members = [z[i] for i in range(m) if labels[i] == lab]
        centre = complex(np.mean(members))
        out.extend([centre] * len(members))
    return out


def green_function(f: Polynomial, z: complex, tol: float = 1e-12, max_iter: int = 2048) -> float:
    """Escape rate G_f(z) = lim D^-n log max(|f^n(z)|, 1).

    Once |f^n(z)| exceeds the escape radius the remainder of the limit is
    bounded by 2*sum|a_i| / ((D-1) D^n |f^n(z)|^2); iteration stops when
    that bound is below ``tol``. Orbits that stay inside the escape radius
    for ``max_iter`` steps are treated as bounded (G = 0).
    """
    z = complex(z)
    if cmath.isnan(z):
        raise DomainError("green_function: NaN input")
    if tol <= 0 or max_iter < 1:
        raise DomainError("tol must be > 0 and max_iter >= 1")
    D = f.degree
    mass = f.coeff_mass
    R = f.escape_radius()
    overflow = 10.0 ** (300.0 / D)
    coeffs = f.full_coeffs
    scale = 1.0
    for _ in range(max_iter):
        r = abs(z)
        if r > R:
            tail = 2.0 * mass / ((D - 1) * r * r) * scale
            if tail < tol or r > overflow:
                return math.log(r) * scale
        z = _horner(coeffs, z)
        scale /= D
    r = abs(z)
    if r > R:
        # escaped on the last step; finish the tail without the iteration cap
        while True:
            tail = 2.0 * mass / ((D - 1) * r * r) * scale
            if tail < tol or r > overflow:
                return math.log(r) * scale
            z = _horner(coeffs, z)
            scale /= D
            r = abs(z)
    return 0.0


def critical_heights(f: Polynomial, tol: float = 1e-12, cluster_tol: float = 1e-8) -> CriticalHeights:
    crit = critical_points(f, cluster_tol)
    return CriticalHeights.from_values(green_function(f, c, tol) for c in crit)


def is_shift_locus(h: CriticalHeights, eps: float = 1e-12) -> bool:
    if eps < 0:
        raise DomainError("eps must be >= 0")
    return h[len(h) - 1] > eps


def is_generic(h: Sequence[float], D: int, ratio_tol: float = 1e-9, eps: float = 1e-12) -> bool:
    """All heights positive and no ratio h_i/h_j within ``ratio_tol`` of a power of D."""
    vals = [float(v) for v in h]
    if any(v <= eps for v in vals):
        return False
    logD = math.log(D)
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            r = math.log(vals[i] / vals[j]) / logD
            if abs(r - round(r)) <= ratio_tol:
                return False
    return True


def subannuli(h: CriticalHeights, merge_tol: float = 1e-12) -> SubannulusDecomposition:
    """Split (h_1, D h_1) at the heights of the critical foliated classes."""
    vals = list(h)
    D = len(vals) + 1
    if vals[0] <= 0 or vals[-1] <= 0:
        raise DomainError("subannuli: every critical point must escape")
    h1 = vals[0]
    top = D * h1
    tol = merge_tol * h1
    reps = [h1]
    for hj in vals[1:]:
        r = hj * D ** math.ceil(math.log(h1 / hj, D))
        while r < h1 - tol:
            r *= D
        while r >= top - tol * D:
            r /= D
        if abs(r - h1) <= tol:
            r = h1
        reps.append(r)
    reps.sort()
    bounds = [reps[0]]
    for r in reps[1:]:
        if r - bounds[-1] > tol:
            bounds.append(r)
    bounds.append(top)
    moduli = tuple((b - a) / (2 * math.pi) for a, b in zip(bounds, bounds[1:]))
    return SubannulusDecomposition(tuple(bounds), moduli)
