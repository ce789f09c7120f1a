import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftmetric.errors import DegenerateEntropyError, DomainError
from shiftmetric.rosemetric import (
    ENTROPY_METHODS,
    entropy,
    entropy_batch,
    entropy_gradient,
    make_rose,
    normalize_unit_entropy,
    pressure,
    rose_closed_sum,
    rose_det,
    spectral_radius,
)

lengths = st.lists(st.floats(0.05, 20.0), min_size=2, max_size=6).map(np.array)


def brute_closed_sum(L, h):
    n = len(L)
    total = 0.0
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            total += (2 * r - 1) * math.exp(-h * sum(L[i] for i in S))
    return total - 1.0


@pytest.mark.parametrize("seed", range(5))
def test_spectral_radius_vs_eigvals(seed):
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 1, (7, 7)) * (rng.uniform(size=(7, 7)) < 0.6)
    M += np.eye(7) * 0.01
    assert spectral_radius(M) == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), rel=1e-11)


def test_spectral_radius_degenerate():
    assert spectral_radius(np.zeros((3, 3))) == 0.0
    # nilpotent
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0
    # periodic (imprimitive) matrix falls back to a dense solve
    P = np.array([[0.0, 2.0], [0.5, 0.0]])
    assert spectral_radius(P) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        spectral_radius(-np.eye(2))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_pressure_zero_potential(n):
    assert pressure(make_rose(n), np.zeros(2 * n)) == pytest.approx(math.log(2 * n - 1), abs=1e-12)


def test_pressure_vanishes_at_entropy():
    g = make_rose(2)
    ell = np.full(4, math.log(3))
    assert abs(pressure(g, -ell)) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_pressure_constant_shift(seed):
    # P(phi + c) = P(phi) + c: adding c multiplies the matrix by exp(c)
    rng = np.random.default_rng(seed)
    g = make_rose(3)
    phi = rng.normal(size=6)
    c = rng.uniform(-3, 3)
    assert pressure(g, phi + c) == pytest.approx(pressure(g, phi) + c, abs=1e-11)


def test_pressure_extended():
    g = make_rose(2)
    assert pressure(g, [-np.inf, -np.inf, -np.inf, -np.inf]) == -math.inf


@pytest.mark.parametrize("n", [2, 3, 4, 6])
@pytest.mark.parametrize("L", [0.1, 1.0, 7.0])
def test_entropy_constant_lengths(n, L):
    for m in ENTROPY_METHODS:
        assert entropy(np.full(n, L), m) == pytest.approx(math.log(2 * n - 1) / L, rel=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_closed_sum_vs_brute_force(seed):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.1, 3, 5)
    h = rng.uniform(0.2, 2)
    assert rose_closed_sum(L, h) == pytest.approx(brute_closed_sum(L, h), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("seed", range(6))
def test_det_and_closed_share_root(seed):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.1, 3, 4)
    h = entropy(L, "spectral")
    assert abs(rose_det(L, h)) < 1e-10
    assert abs(rose_closed_sum(L, h)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(lengths)
def test_methods_agree(L):
    vals = [entropy(L, m) for m in ENTROPY_METHODS]
    vals.append(float(entropy_batch(L)[0]))
    scale = max(1.0, vals[0])
    assert max(vals) - min(vals) <= 1e-9 * scale


@settings(max_examples=60, deadline=None)
@given(lengths, st.floats(1e-3, 1e3))
def test_homogeneity(L, a):
    assert entropy(a * L) * a == pytest.approx(entropy(L), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(lengths)
def test_normalize(L):
    Lh = normalize_unit_entropy(L)
    assert entropy(Lh, "spectral") == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(normalize_unit_entropy(Lh), Lh, rtol=1e-12)


def test_normalize_constant():
    assert np.allclose(normalize_unit_entropy(np.ones(3)), math.log(5))


def test_extended_entropy():
    assert entropy([2.0, 3.0, np.inf, np.inf]) == pytest.approx(entropy([2.0, 3.0]), rel=1e-13)
    for m in ENTROPY_METHODS:
        assert entropy([np.inf, 1.0, np.inf, 1.0], m) == pytest.approx(math.log(3), rel=1e-12)
    with pytest.raises(DegenerateEntropyError):
        entropy([1.0, np.inf, np.inf])
    with pytest.raises(DegenerateEntropyError):
        entropy_batch([[1.0, np.inf]])


def test_entropy_rejects_unknown_method():
    with pytest.raises(DomainError):
        entropy([1.0, 2.0], "magic")


@pytest.mark.parametrize("seed", range(5))
def test_entropy_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0.3, 2, 4)
    g = entropy_gradient(L)
    eps = 1e-5
    fd = [(entropy(L + eps * e) - entropy(L - eps * e)) / (2 * eps) for e in np.eye(4)]
    assert np.allclose(g, fd, rtol=1e-7)
    # Euler relation for a degree -1 homogeneous function
    assert g @ L == pytest.approx(-entropy(L), rel=1e-12)
