"""Discrete torus geometry, DFT conventions and the lattice Green's function.

Conventions (torus side 1, spacing eps = 2**-M, n = 2**M sites per side):

    forward   f^(xi) = eps^2 * sum_x f(x) exp(-2 pi i xi.x)
    inverse   f(x)   = sum_xi f^(xi) exp(+2 pi i xi.x)
    convolve  (f*g)(x) = eps^2 * sum_y f(x-y) g(y),   (f*g)^ = f^ g^

Arrays are indexed [i1, i2] with x = eps*(i1, i2).  Spectral arrays use the
numpy FFT ordering; ``momenta`` gives the integer dual momenta for each slot,
which cover {-n/2, ..., n/2-1} per axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class LatticeSpec:
    """Torus discretization: grid exponent M and mass m."""

    M: int
    m: float

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 0:
            raise ValueError(f"grid exponent M must be a nonnegative integer, got {self.M!r}")
        if not self.m > 0:
            raise ValueError(f"mass m must be positive, got {self.m!r}")

    @property
    def n(self) -> int:
        return 2**self.M

    @property
    def eps(self) -> float:
        return 2.0**-self.M

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)


@dataclass(frozen=True)
class ScalarLattice:
    """Real values on the n x n grid (row-major over x = eps*(i1, i2))."""

    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values have shape {vals.shape}, expected {self.spec.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("lattice values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def at(self, i1: int, i2: int) -> float:
        """Value at grid point (i1, i2), periodic."""
        n = self.spec.n
        return float(self.values[i1 % n, i2 % n])

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class SpectralTable:
    """Complex DFT coefficients in numpy FFT ordering."""

    spec: LatticeSpec
    values: np.ndarray

    def at(self, xi1: int, xi2: int) -> complex:
        n = self.spec.n
        return complex(self.values[xi1 % n, xi2 % n])


def _check_same(f: ScalarLattice, g: ScalarLattice) -> None:
    if f.spec != g.spec:
        raise ValueError(f"lattice spec mismatch: {f.spec} vs {g.spec}")


def momenta(spec: LatticeSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer dual momenta (xi1, xi2) as broadcastable column/row arrays."""
    k = np.fft.fftfreq(spec.n) * spec.n
    k = np.rint(k).astype(int)
    return k[:, None], k[None, :]


@lru_cache(maxsize=32)
def laplacian_symbol(spec: LatticeSpec) -> np.ndarray:
    """lambda(xi) = 4 (sin^2(eps pi xi1) + sin^2(eps pi xi2)) / eps^2, the symbol of -Delta_eps."""
    k1, k2 = momenta(spec)
    e = spec.eps
    lam = 4.0 * (np.sin(e * np.pi * k1) ** 2 + np.sin(e * np.pi * k2) ** 2) / e**2
    lam.setflags(write=False)
    return lam


def fft_forward(values: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Array version of the forward transform; acts on the last two axes."""
    return spec.eps**2 * np.fft.fft2(values, axes=(-2, -1))


def fft_inverse(coeffs: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Array version of the inverse transform; returns the real part."""
    return (np.fft.ifft2(coeffs, axes=(-2, -1)) * spec.n**2).real


def rfft_forward(values: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Forward transform of real data on the half spectrum (last axis 0..n/2)."""
    return spec.eps**2 * sfft.rfft2(values, axes=(-2, -1))


def rfft_inverse(coeffs: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    return sfft.irfft2(coeffs, s=spec.shape, axes=(-2, -1)) * spec.n**2


def half(symbol: np.ndarray) -> np.ndarray:
    """Restrict a full-spectrum table to the half spectrum used by the real transforms."""
    return symbol[..., : symbol.shape[-1] // 2 + 1]


@lru_cache(maxsize=32)
def half_weights(spec: LatticeSpec) -> np.ndarray:
    """Multiplicities that turn a half-spectrum sum into a full-spectrum sum."""
    n = spec.n
    w = np.full((n, n // 2 + 1), 2.0)
    w[:, 0] = 1.0
    if n > 1:
        w[:, -1] = 1.0
    w.setflags(write=False)
    return w


def dft_forward(f: ScalarLattice) -> SpectralTable:
    return SpectralTable(f.spec, fft_forward(f.values, f.spec))


def dft_inverse(t: SpectralTable) -> ScalarLattice:
    return ScalarLattice(t.spec, fft_inverse(t.values, t.spec))


def lattice_delta(spec: LatticeSpec) -> ScalarLattice:
    """Lattice delta at the origin: eps^-2 at 0, zero elsewhere."""
    d = np.zeros(spec.shape)
    d[0, 0] = spec.eps**-2
    return ScalarLattice(spec, d)


def laplacian(f: ScalarLattice) -> ScalarLattice:
    """Five-point Laplacian with periodic wrap."""
    v = f.values
    out = (np.roll(v, 1, 0) + np.roll(v, -1, 0) + np.roll(v, 1, 1) + np.roll(v, -1, 1) - 4.0 * v)
    return ScalarLattice(f.spec, out / f.spec.eps**2)


@lru_cache(maxsize=32)
def green_symbol(spec: LatticeSpec) -> np.ndarray:
    """C^(xi) = 1 / (m + lambda(xi))."""
    ch = 1.0 / (spec.m + laplacian_symbol(spec))
    ch.setflags(write=False)
    return ch


def greens_function(spec: LatticeSpec) -> ScalarLattice:
    """C_eps = (m - Delta_eps)^-1 as a lattice function."""
    c = fft_inverse(green_symbol(spec), spec)
    # the symbol is even, so C is even up to rounding; enforce it exactly
    c = 0.5 * (c + _reflect(c))
    return ScalarLattice(spec, c)


def _reflect(v: np.ndarray) -> np.ndarray:
    """v(-x) on the periodic grid."""
    return np.roll(v[::-1, ::-1], 1, axis=(0, 1))


def wick_constant(spec: LatticeSpec) -> float:
    """a_eps = C_eps(0) = sum over dual momenta of C^."""
    return float(np.sum(green_symbol(spec)))


def convolve(f: ScalarLattice, g: ScalarLattice) -> ScalarLattice:
    _check_same(f, g)
    spec = f.spec
    return ScalarLattice(spec, fft_inverse(fft_forward(f.values, spec) * fft_forward(g.values, spec), spec))


def pointwise_square(f: ScalarLattice) -> ScalarLattice:
    return ScalarLattice(f.spec, f.values**2)


def reflect(f: ScalarLattice) -> ScalarLattice:
    """x -> f(-x)."""
    return ScalarLattice(f.spec, _reflect(f.values))
