import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftmetric.errors import ClassificationUncertain, DomainError
from shiftmetric.polydyn import CriticalHeights
from shiftmetric.rosemetric import entropy, path_length
from shiftmetric.shiftlocus import (
    BUILTIN_FAMILIES,
    HeightSegment,
    SequenceFamily,
    TwistSegment,
    TwistState,
    base_length,
    base_lengths_array,
    compile_expression,
    index_set,
    nongeneric_crossings,
    rho_upper,
    segment_entropy_length,
    twist_H0,
    twist_length,
)


# --- base and twist lengths -----------------------------------------------

def test_base_length_examples():
    assert base_length([3.0]).lengths.tolist() == [3.0, 1.0]
    b = base_length(CriticalHeights((4.0, 1.0, 0.5)))
    assert b.D == 4
    assert b.lengths.tolist() == [4.0, 0.25, 0.125, 1.0, 1.0, 1.0]
    assert entropy(b.unit()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        base_length([1.0, 2.0])
    with pytest.raises(DomainError):
        base_length([2.0, 0.0])
    with pytest.raises(DomainError):
        base_length([2.0], D=3)


def test_base_lengths_array_matches_scalar():
    H = np.array([[3.0, 2.0], [1.0, 0.1]])
    assert np.array_equal(base_lengths_array(H), [base_length(h).lengths for h in H])


def test_twist_length_example():
    assert twist_H0([2.0, 1.0]) == 2.0
    assert twist_H0([0.5, 0.25]) == 4.0
    L = twist_length(TwistState([2.0, 1.0], [0.1, -0.2])).lengths
    assert L == pytest.approx([2.0, 0.5, 1.05, 0.9], abs=1e-15)
    assert np.array_equal(twist_length(TwistState([2.0, 1.0], [0.0, 0.0])).lengths, base_length([2.0, 1.0]).lengths)
    with pytest.raises(DomainError):
        TwistState([2.0, 1.0], [1.5, 0.0])
    with pytest.raises(DomainError):
        TwistState([0.5, 0.5], [0.0, -1.0], H0=1.0)


# --- segments -------------------------------------------------------------

def test_height_segment_constant_ratio():
    seg = HeightSegment([2.0, 1.0], [4.0, 2.0])
    t = np.linspace(0, 1, 11)
    L = seg.lengths(t)
    assert np.allclose(L[:, 1], 0.5)
    assert np.allclose(L[:, 0], 2 + 2 * t)
    assert seg.breakpoints == () and seg.nongeneric is False


def test_height_segment_endpoints():
    a, b = [5.0, 1.0], [3.0, 2.0]
    seg = HeightSegment(a, b)
    L = seg.lengths([0.0, 1.0])
    assert np.array_equal(L[0], base_length(a).lengths)
    assert np.allclose(L[1], base_length(b).lengths)


def test_nongeneric_crossing():
    # ratio 5 -> 1.5 crosses 3 = D when (5 - 2t) = 3 (1 + t)
    seg = HeightSegment([5.0, 1.0], [3.0, 2.0])
    assert seg.breakpoints == pytest.approx((0.4,))
    h = seg.heights(0.4)[0]
    assert h[0] / h[1] == pytest.approx(3.0)
    ts, ident = nongeneric_crossings([1.0, 1.0], [2.0, 2.0], 3)
    assert ts == () and ident
    ts, _ = nongeneric_crossings([20.0, 1.0], [1.0, 1.0], 3)
    assert ts == pytest.approx(sorted([(20 - 9) / 19, (20 - 3) / 19]))


@pytest.mark.parametrize("seed", range(5))
def test_segment_velocity_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a, b = (np.sort(rng.uniform(0.2, 5, 3))[::-1] for _ in range(2))
    seg = HeightSegment(a, b)
    t = np.array([0.3, 0.61])
    eps = 1e-6
    fd = (seg.lengths(t + eps) - seg.lengths(t - eps)) / (2 * eps)
    assert np.allclose(seg.velocity(t), fd, atol=1e-7)
    # reversal negates the velocity at the mirrored parameter
    r = seg.reversed()
    assert np.allclose(r.velocity(1 - t), -seg.velocity(t), atol=1e-12)
    assert segment_entropy_length(r) == pytest.approx(segment_entropy_length(seg), rel=1e-9)


def test_twist_segment_length_shrinks_with_height():
    # for large h the twist coordinates are scaled by 1/H0 = 1/h, up to log factors
    lens = [segment_entropy_length(TwistSegment([h], [-0.5], [0.5])) for h in (10.0, 100.0, 1000.0)]
    assert lens[0] > lens[1] > lens[2] > 0
    assert 8 < lens[1] / lens[2] < 13
    with pytest.raises(DomainError):
        TwistSegment([1.0, 1.0], [0.0], [0.5])


# --- rho upper bound -------------------------------------------------------

def test_rho_identical_and_symmetric():
    assert rho_upper([2.0, 1.0], [2.0, 1.0]).value == 0.0
    ab = rho_upper([2.0, 0.3], [0.5, 0.4], levels=1)
    ba = rho_upper([0.5, 0.4], [2.0, 0.3], levels=1)
    assert ab.value > 0
    assert ab.value == pytest.approx(ba.value, rel=1e-4)
    assert all(x >= y for x, y in zip(ab.history, ab.history[1:]))
    assert ab.upper_bound


def test_rho_direct_segment_is_an_upper_bound():
    a, b = [3.0, 1.0], [1.0, 0.5]
    direct = segment_entropy_length(HeightSegment(a, b))
    assert rho_upper(a, b, levels=1).value <= direct * (1 + 1e-9)


def test_rho_with_twists():
    r0 = rho_upper([2.0], [2.0], [0.0], [0.5])
    direct = segment_entropy_length(TwistSegment([2.0], [0.0], [0.5]))
    assert r0.value == pytest.approx(direct, rel=1e-9)
    with pytest.raises(DomainError):
        rho_upper([2.0], [1.0, 0.5])


# --- families -------------------------------------------------------------

def _family(exprs, k=(10, 100, 1000, 10000), **params):
    return SequenceFamily(len(exprs) + 1, tuple(exprs), params=params, k_grid=k)


@pytest.mark.parametrize(
    "exprs, params, expected, singular",
    [
        (["k", "k/2"], {}, (2, 3, 4), False),
        (["k", "sqrt(k)"], {}, (2,), True),
        (["1/k", "a/k"], {"a": 0.5}, None, None),
        (["1", "0.5", "1/k"], {}, (3,), True),
    ],
)
def test_index_set_examples(exprs, params, expected, singular):
    fam = _family(exprs, **params)
    rep = index_set(fam)
    if expected is None:
        # lengths (1/k, a, 1, 1): only the first petal shrinks
        expected, singular = (1,), True
    assert rep.petals == expected
    assert rep.singular is singular
    assert rep.uniformly_divergent


def test_index_set_degenerating_flag():
    assert index_set(_family(["k", "k/2"])).degenerating
    assert not index_set(_family(["1", "0.5", "1/k"])).degenerating


def test_index_set_uncertain():
    # slowly collapsing ratio on a short grid
    with pytest.raises(ClassificationUncertain) as exc:
        index_set(BUILTIN_FAMILIES["cubic-2a"])
    assert "ratios" in exc.value.table


def test_index_set_probe_validation():
    with pytest.raises(DomainError):
        index_set(_family(["k"]), [1, 2])
    with pytest.raises(DomainError):
        index_set(_family(["k"]), [3, 2, 1])


@pytest.mark.parametrize(
    "src", ["__import__('os')", "k.real", "open(k)", "lambda: 1", "k if k else 1", "[k]", "x*k"]
)
def test_expression_rejects(src):
    with pytest.raises(DomainError):
        compile_expression(src, {})


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 100), st.floats(0.1, 5))
def test_expression_evaluates(k, a):
    f = compile_expression("a*2**-k + sqrt(k)/(1+log(k+1)) - -pi", {"a": a})
    expected = a * 2**-k + math.sqrt(k) / (1 + math.log(k + 1)) + math.pi
    assert float(f(np.array(k))) == pytest.approx(expected, rel=1e-12)


def test_family_json():
    fam = SequenceFamily.from_json('{"D": 3, "heights": ["k", "b*k"], "b": 0.25, "kGrid": [1, 2, 4]}')
    assert fam.params == {"b": 0.25}
    assert np.allclose(fam.heights([4]), [[4.0, 1.0]])
    over = SequenceFamily.from_json({"name": "cubic-2b", "a": 0.25})
    assert over.params["a"] == 0.25 and over.exprs == BUILTIN_FAMILIES["cubic-2b"].exprs
    for bad in ('{"heights": ["k"]}', "[1, 2]", '{"D": 3, "heights": ["k"]}'):
        with pytest.raises(DomainError):
            SequenceFamily.from_json(bad)
    with pytest.raises(DomainError):
        _family(["k", "-k"]).heights([1.0])


def test_family_heights_sorted_and_rate():
    fam = _family(["1/(2*k)", "1/k"])
    H = fam.heights([1.0, 2.0])
    assert np.all(H[:, 0] >= H[:, 1])
    assert fam.predicted_rate([3.0]) == pytest.approx([2.0])
    assert BUILTIN_FAMILIES["quadratic-escape"].predicted_rate([10.0]) == pytest.approx([0.1])
    assert BUILTIN_FAMILIES["entropy-2d-D3"].predicted_rate([10.0]) == pytest.approx([10.0])


def test_family_leg_vs_path_length():
    from shiftmetric.shiftlocus import family_leg

    fam = BUILTIN_FAMILIES["cubic-2b"]
    leg = family_leg(fam, 3, 4)
    seg = segment_entropy_length(HeightSegment(fam.heights([3])[0], fam.heights([4])[0]))
    assert 0 <= leg <= seg * (1 + 1e-9)


@pytest.mark.parametrize(
    "seg",
    [HeightSegment([5.0, 1.0], [3.0, 2.0]), HeightSegment([2.0, 0.3], [0.5, 0.4]), TwistSegment([2.0, 1.0], [-1, 0], [1, 0.5])],
)
def test_segment_quadrature_doubling(seg):
    from shiftmetric.rosemetric import Quadrature

    a = segment_entropy_length(seg, Quadrature(nodes=8))
    b = segment_entropy_length(seg, Quadrature(nodes=16))
    assert a > 0 and abs(a - b) < 1e-8


def test_base_length_usable_as_length_function():
    b = base_length([3.0, 1.0])
    assert entropy(b) == entropy(b.length)
