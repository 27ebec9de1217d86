"""Limiting kernels of the large-N theory on a fixed lattice.

G solves C^2*G + G = 2C^2, K = (I + C^2*)^-1 = delta + L, and the shift
constant c1 = (C^2*G)(0).  All Fourier data of C^2 come from the DFT of the
pointwise square of the real-space C, so every identity closes exactly on
the lattice.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .torus_spectral import (
    LatticeSpec,
    ScalarLattice,
    fft_forward,
    fft_inverse,
    greens_function,
    lattice_delta,
    pointwise_square,
    wick_constant,
)


@dataclass(frozen=True)
class KernelSet:
    spec: LatticeSpec
    C: ScalarLattice
    C_sq: ScalarLattice
    G: ScalarLattice
    L: ScalarLattice
    a_eps: float
    c1: float

    @property
    def C_sq_hat(self) -> np.ndarray:
        return fft_forward(self.C_sq.values, self.spec).real

    @property
    def G_hat(self) -> np.ndarray:
        return fft_forward(self.G.values, self.spec).real

    @property
    def K_full(self) -> ScalarLattice:
        """K = delta + L as a lattice function (delta carries eps^-2 at 0)."""
        return ScalarLattice(self.spec, lattice_delta(self.spec).values + self.L.values)

    def apply_K(self, f: ScalarLattice) -> ScalarLattice:
        """K f = f + L*f."""
        spec = self.spec
        lf = fft_inverse(fft_forward(self.L.values, spec) * fft_forward(f.values, spec), spec)
        return ScalarLattice(spec, f.values + lf)


def _c_sq_hat(C_sq: ScalarLattice) -> np.ndarray:
    # C^2 is real and even, so its transform is real up to rounding
    return fft_forward(C_sq.values, C_sq.spec).real


def build_G(C: ScalarLattice) -> ScalarLattice:
    """G with G^ = 2 C2^ / (1 + C2^)."""
    C_sq = pointwise_square(C)
    h = _c_sq_hat(C_sq)
    return ScalarLattice(C.spec, fft_inverse(2.0 * h / (1.0 + h), C.spec))


def build_K(C_sq: ScalarLattice) -> ScalarLattice:
    """Return L, the regular part of K, with L^ = -C2^ / (1 + C2^)."""
    h = _c_sq_hat(C_sq)
    if np.any(h < -1e-14 * max(1.0, float(np.max(np.abs(h))))):
        raise ValueError("C^2 transform must be nonnegative")
    return ScalarLattice(C_sq.spec, fft_inverse(-h / (1.0 + h), C_sq.spec))


def shift_constant(kernels: KernelSet) -> float:
    """c1 = (C^2*G)(0) = sum_xi C2^(xi) G^(xi)."""
    return float(np.sum(kernels.C_sq_hat * kernels.G_hat))


@lru_cache(maxsize=16)
def build_kernels(spec: LatticeSpec) -> KernelSet:
    C = greens_function(spec)
    C_sq = pointwise_square(C)
    G = build_G(C)
    L = build_K(C_sq)
    partial = KernelSet(spec, C, C_sq, G, L, wick_constant(spec), 0.0)
    return KernelSet(spec, C, C_sq, G, L, partial.a_eps, shift_constant(partial))
