import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from largen.torus_spectral import (
    LatticeSpec, ScalarLattice, convolve, dft_forward, dft_inverse, fft_forward, fft_inverse,
    green_symbol, greens_function, half_weights, laplacian, lattice_delta, pointwise_square,
    reflect, rfft_forward, rfft_inverse, wick_constant,
)

from reference_values import REFERENCE


def test_constant_transform():
    spec = LatticeSpec(4, 1.0)
    t = dft_forward(ScalarLattice(spec, np.ones(spec.shape))).values
    assert t[0, 0] == pytest.approx(1.0)
    t[0, 0] = 0
    assert np.max(np.abs(t)) < 1e-14


def test_delta_transform_is_one():
    spec = LatticeSpec(4, 1.0)
    t = dft_forward(lattice_delta(spec)).values
    assert np.max(np.abs(t - 1.0)) < 1e-12


def test_round_trip(rng):
    spec = LatticeSpec(4, 1.0)
    f = ScalarLattice(spec, rng.standard_normal(spec.shape))
    assert np.max(np.abs(dft_inverse(dft_forward(f)).values - f.values)) <= 1e-12


def test_real_transform_matches_full(rng):
    spec = LatticeSpec(3, 2.0)
    f = rng.standard_normal((2,) + spec.shape)
    full = fft_forward(f, spec)
    hf = rfft_forward(f, spec)
    assert np.allclose(hf, full[..., : spec.n // 2 + 1], atol=1e-14)
    assert np.allclose(rfft_inverse(hf, spec), f, atol=1e-13)
    # weighted half sum equals the full sum (Parseval)
    assert np.sum(half_weights(spec) * np.abs(hf) ** 2) == pytest.approx(np.sum(np.abs(full) ** 2))


def test_zero_mode_of_green_symbol():
    for M, m in [(0, 1.0), (3, 2.5), (5, 5.0)]:
        assert green_symbol(LatticeSpec(M, m))[0, 0] == pytest.approx(1.0 / m)


def test_green_function_inverts_operator():
    spec = LatticeSpec(4, 1.0)
    C = greens_function(spec)
    lhs = spec.m * C.values - laplacian(C).values
    assert np.max(np.abs(lhs - lattice_delta(spec).values)) <= 1e-10 * spec.eps**-2


def test_green_function_even():
    C = greens_function(LatticeSpec(4, 5.0))
    assert np.array_equal(C.values, reflect(C).values)


@pytest.mark.parametrize("key", sorted(REFERENCE))
def test_frozen_green_values(key):
    spec = LatticeSpec(*key)
    ref = REFERENCE[key]
    assert wick_constant(spec) == pytest.approx(ref["a"], rel=1e-12)
    C = greens_function(spec)
    assert C.values[0, 0] == pytest.approx(ref["a"], rel=1e-12)
    if "C10" in ref:
        assert C.at(1, 0) == pytest.approx(ref["C10"], rel=1e-12)
        assert C.at(1, 1) == pytest.approx(ref["C11"], rel=1e-12)


def test_wick_constant_single_site_and_monotone():
    assert wick_constant(LatticeSpec(0, 3.0)) == pytest.approx(1 / 3)
    vals = [wick_constant(LatticeSpec(M, 5.0)) for M in (3, 4, 5)]
    assert vals[0] < vals[1] < vals[2]


def test_wick_constant_direct_mode_sum():
    spec = LatticeSpec(5, 1.0)
    n, e = spec.n, spec.eps
    ks = [k if k < n // 2 else k - n for k in range(n)]
    total = sum(1.0 / (1.0 + 4 * (np.sin(e * np.pi * a) ** 2 + np.sin(e * np.pi * b) ** 2) / e**2)
                for a in ks for b in ks)
    assert wick_constant(spec) == pytest.approx(total, rel=1e-12)


def test_convolution_brute_force():
    spec = LatticeSpec(4, 5.0)
    C = greens_function(spec)
    cc = convolve(C, C).values
    n, v = spec.n, C.values
    for x in [(0, 0), (1, 0), (3, 7), (15, 2)]:
        direct = spec.eps**2 * sum(v[z1, z2] * v[(x[0] - z1) % n, (x[1] - z2) % n]
                                   for z1 in range(n) for z2 in range(n))
        assert cc[x] == pytest.approx(direct, rel=1e-12)


def test_pointwise_square():
    spec = LatticeSpec(2, 1.0)
    assert np.all(pointwise_square(ScalarLattice(spec, np.full(spec.shape, 2.0))).values == 4.0)


def test_square_transform_is_dual_convolution():
    spec = LatticeSpec(3, 5.0)
    n = spec.n
    ch = green_symbol(spec)
    sq_hat = fft_forward(pointwise_square(greens_function(spec)).values, spec)
    for xi in [(0, 0), (1, 0), (2, 3)]:
        dual = sum(ch[a, b] * ch[(xi[0] - a) % n, (xi[1] - b) % n] for a in range(n) for b in range(n))
        assert sq_hat[xi].real == pytest.approx(dual, rel=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(-1, 1.0)
    with pytest.raises(ValueError):
        LatticeSpec(3, 0.0)
    with pytest.raises(ValueError):
        convolve(greens_function(LatticeSpec(3, 1.0)), greens_function(LatticeSpec(3, 2.0)))


@given(M=st.integers(0, 5), m=st.floats(0.1, 20.0))
def test_green_symbol_positive_and_bounded(M, m):
    ch = green_symbol(LatticeSpec(M, m))
    assert np.all(ch > 0) and np.all(ch <= 1.0 / m + 1e-15)


@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 4))
def test_convolution_commutes(seed, M):
    spec = LatticeSpec(M, 1.0)
    r = np.random.default_rng(seed)
    f = ScalarLattice(spec, r.standard_normal(spec.shape))
    g = ScalarLattice(spec, r.standard_normal(spec.shape))
    assert np.allclose(convolve(f, g).values, convolve(g, f).values, atol=1e-12)
