import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from largen.correlation_oracle import (
    F_nk_oracle, Matching, MultiIndex, exclusion_count, f_k_oracle, f_nk_oracle, fk_recursion_residual,
    fnk_recursion_residual, g_k_oracle, hermite, kernel_at, perfect_matchings, predict, predict_mean,
)
from largen.oracle_kernels import build_kernels
from largen.torus_spectral import LatticeSpec

KS = build_kernels(LatticeSpec(5, 5.0))
n5 = KS.spec.n


def _G(p, q):
    return float(kernel_at(KS.G, p[0] - q[0], p[1] - q[1]))


def _brute_exclusion(n, pts):
    """Independent enumeration: all permutations of the copy list, keeping valid canonical matchings."""
    labels = [i for i, ni in enumerate(n) for _ in range(ni)]
    k = len(labels)
    if k % 2:
        return 0.0
    seen, total = set(), 0.0
    for perm in itertools.permutations(range(k)):
        pairs = tuple(sorted(tuple(sorted(perm[j:j + 2])) for j in range(0, k, 2)))
        if pairs in seen:
            continue
        seen.add(pairs)
        if any(labels[a] == labels[b] for a, b in pairs):
            continue
        total += math.prod(_G(pts[labels[a]], pts[labels[b]]) for a, b in pairs)
    return total


points = st.tuples(st.integers(0, n5 - 1), st.integers(0, n5 - 1))


@pytest.mark.parametrize("k,count", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105), (10, 945)])
def test_matching_counts(k, count):
    ms = perfect_matchings(k)
    assert len(ms) == count
    assert len({m.pairs for m in ms}) == count


def test_odd_matchings_and_validation():
    assert perfect_matchings(5) == []
    with pytest.raises(ValueError):
        Matching(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        MultiIndex((1, -1))


def test_fk_examples():
    y = [(0, 0), (3, 1)]
    assert f_k_oracle(y, KS.G) == pytest.approx(_G(*y))
    assert f_k_oracle([(0, 0), (1, 0), (2, 0)], KS.G) == 0.0
    same = [(2, 2)] * 4
    assert f_k_oracle(same, KS.G) == pytest.approx(3 * KS.G.values[0, 0] ** 2)


def test_exclusion_examples():
    y = [(0, 0), (2, 1)]
    assert F_nk_oracle((1, 1), y, KS.G) == pytest.approx(_G(*y))
    assert F_nk_oracle((2, 2), y, KS.G) == pytest.approx(2 * _G(*y) ** 2)
    assert F_nk_oracle((2,), [(0, 0)], KS.G) == 0.0
    assert exclusion_count((2, 2)) == 2
    with pytest.raises(ValueError):
        exclusion_count((7, 7))


@given(n=st.lists(st.integers(0, 3), min_size=1, max_size=3), data=st.data())
def test_exclusion_matches_brute_force(n, data):
    pts = [data.draw(points) for _ in n]
    assert F_nk_oracle(tuple(n), pts, KS.G) == pytest.approx(_brute_exclusion(n, pts), rel=1e-12, abs=1e-300)


def test_shifted_closed_forms():
    c1 = KS.c1
    assert f_nk_oracle((2,), [(0, 0)], KS) == pytest.approx(-c1, rel=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(10):
        y1, y2, z1, z2 = [tuple(rng.integers(0, n5, 2)) for _ in range(4)]
        assert f_nk_oracle((2, 2), [y1, y2], KS) == pytest.approx(2 * _G(y1, y2) ** 2 + c1**2, rel=1e-12)
        expect = 2 * _G(z1, y1) * _G(z2, y1) - c1 * _G(z1, z2)
        assert f_nk_oracle((1, 1, 2), [z1, z2, y1], KS) == pytest.approx(expect, rel=1e-12, abs=1e-15)


def test_g_k_examples():
    y = [(0, 0), (1, 2)]
    assert g_k_oracle(y, KS) == pytest.approx(float(kernel_at(KS.C, 1, 2)) * _G(*y))
    assert g_k_oracle([(0, 0)], KS) == 0.0
    same = [(1, 1)] * 4
    assert g_k_oracle(same, KS) == pytest.approx(3 * KS.C.values[0, 0] ** 2 * 3 * KS.G.values[0, 0] ** 2)


def test_hermite():
    x = np.linspace(-3, 3, 7)
    assert np.allclose(hermite(2, x), x**2 - 1)
    for n in range(1, 10):
        assert np.allclose(hermite(n + 1, x), x * hermite(n, x) - n * hermite(n - 1, x))
    with pytest.raises(ValueError):
        hermite(-1, 0.0)


@given(data=st.data())
def test_fk_recursion(data):
    pts = [data.draw(points) for _ in range(4)]
    assert fk_recursion_residual(pts, KS) <= 1e-8


@given(data=st.data(), n=st.sampled_from([(2, 2), (1, 1, 2)]))
def test_fnk_recursion(data, n):
    pts = [data.draw(points) for _ in n]
    assert fnk_recursion_residual(n, pts, KS) <= 1e-8


def test_fnk_recursion_unsupported():
    with pytest.raises(ValueError):
        fnk_recursion_residual((3, 3), [(0, 0), (1, 1)], KS)


@given(data=st.data(), k=st.sampled_from([2, 4, 6]))
def test_fk_permutation_invariant(data, k):
    pts = [data.draw(points) for _ in range(k)]
    perm = data.draw(st.permutations(pts))
    assert f_k_oracle(pts, KS.G) == pytest.approx(f_k_oracle(perm, KS.G), rel=1e-12)


def test_predictions():
    assert predict("Q1", (1, 0), KS) == pytest.approx(_G((0, 0), (1, 0)))
    assert predict("mixed_1", (1, 0), KS) == pytest.approx(float(KS.C.values[1, 0]) * _G((0, 0), (1, 0)))
    assert predict_mean("Q2", KS) == pytest.approx(-KS.c1)
    assert predict_mean("Q1", KS) == 0.0
    with pytest.raises(ValueError):
        predict("fluct_1", (0, 0), KS)
