"""Wick-renormalized O(N)-invariant observables as lattice polynomials of Phi.

With S = sum_i Phi_i^2 and a the Wick constant, the radial Wick power is

    :S^n: = (-2a)^n n! L_n^(N/2-1)(S / (2a)),

the unique degree-n polynomial in S orthogonal to all lower powers when
S/a is chi-squared with N degrees of freedom.  It coincides with the
Wick-ordered monomial (sum_i Phi_i^2)^n built from Hermite polynomials of
variance a in every component.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .torus_spectral import LatticeSpec, ScalarLattice

_TAG = re.compile(r"^(?:Q([1-9]\d*)|mixed_([1-9]\d*)|fluct_([1-9]\d*))$")


@dataclass(frozen=True)
class WickContext:
    N: int
    a_eps: float

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.a_eps > 0:
            raise ValueError(f"a_eps must be positive, got {self.a_eps!r}")


@dataclass(frozen=True)
class ObservableSnapshot:
    tag: str
    values: ScalarLattice

    def __post_init__(self):
        parse_tag(self.tag)


def parse_tag(tag: str) -> tuple[str, int]:
    """Split an observable id into (kind, index): Q3 -> ("Q", 3), mixed_1 -> ("mixed", 1)."""
    mt = _TAG.match(tag)
    if mt is None:
        raise ValueError(f"unknown observable id {tag!r}")
    if mt.group(1):
        return "Q", int(mt.group(1))
    if mt.group(2):
        return "mixed", int(mt.group(2))
    return "fluct", int(mt.group(3))


def radial_wick_array(S: np.ndarray, n: int, N: int, a: float) -> np.ndarray:
    """:S^n: by the generalized Laguerre recurrence, on an arbitrary array of S values."""
    if n < 0:
        raise ValueError("n must be >= 0")
    S = np.asarray(S, dtype=float)
    # P_k = (-2a)^k k! L_k(x) with x = S/(2a)
    alpha = 0.5 * N - 1.0
    p_prev = np.ones_like(S)
    if n == 0:
        return p_prev
    p = S - N * a
    for k in range(1, n):
        # (k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}, rescaled by (-2a)^{k+1} (k+1)!
        p_next = (S - 2.0 * a * (2 * k + 1 + alpha)) * p - 4.0 * a * a * k * (k + alpha) * p_prev
        p_prev, p = p, p_next
    return p


def radial_wick_power(S: ScalarLattice, n: int, ctx: WickContext) -> ScalarLattice:
    return ScalarLattice(S.spec, radial_wick_array(S.values, n, ctx.N, ctx.a_eps))


def expanded_wick_power(S, n: int, N: int, a: float):
    """Explicit polynomials for n <= 3, kept separate from the recurrence as a cross-check."""
    if n == 0:
        return np.ones_like(np.asarray(S, dtype=float))
    if n == 1:
        return S - N * a
    if n == 2:
        return S * S - (2 * N + 4) * a * S + N * (N + 2) * a * a
    if n == 3:
        return (S**3 - 3 * (N + 4) * a * S * S + 3 * (N + 2) * (N + 4) * a * a * S
                - N * (N + 2) * (N + 4) * a**3)
    raise ValueError("explicit form only for n <= 3")


def _check_phi(phi: np.ndarray, ctx: WickContext) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 3 or phi.shape[0] != ctx.N:
        raise ValueError(f"phi must have shape (N, n, n) with N={ctx.N}, got {phi.shape}")
    return phi


def _spec_of(phi: np.ndarray, spec: LatticeSpec | None, m: float = 1.0) -> LatticeSpec:
    if spec is not None:
        return spec
    n = phi.shape[-1]
    M = int(round(np.log2(n)))
    if 2**M != n or phi.shape[-2] != n:
        raise ValueError("field side must be a power of two")
    return LatticeSpec(M, m)


def scaled_array(phi: np.ndarray, n: int, ctx: WickContext) -> np.ndarray:
    """N^{-n/2} :S^n: as a bare array; phi has shape (..., N, n, n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    S = np.sum(phi * phi, axis=-3)
    return radial_wick_array(S, n, ctx.N, ctx.a_eps) / ctx.N ** (0.5 * n)


def mixed_array(phi: np.ndarray, ctx: WickContext) -> np.ndarray:
    """N^{-1/2} :Phi_i S: for every component i at once; shape (N, n, n)."""
    S = np.sum(phi * phi, axis=-3)
    return phi * (S - (ctx.N + 2) * ctx.a_eps) / np.sqrt(ctx.N)


def scaled_observable(phi: np.ndarray, n: int, ctx: WickContext, spec: LatticeSpec | None = None) -> ObservableSnapshot:
    """Q_n = N^{-n/2} :(sum_i Phi_i^2)^n:."""
    phi = _check_phi(phi, ctx)
    return ObservableSnapshot(f"Q{n}", ScalarLattice(_spec_of(phi, spec), scaled_array(phi, n, ctx)))


def mixed_observable(phi: np.ndarray, i: int, ctx: WickContext, spec: LatticeSpec | None = None) -> ObservableSnapshot:
    """N^{-1/2} (Phi_i S - (N+2) a Phi_i), components numbered from 1."""
    phi = _check_phi(phi, ctx)
    if not 1 <= i <= ctx.N:
        raise IndexError(f"component index {i} outside 1..{ctx.N}")
    S = np.sum(phi * phi, axis=0)
    p = phi[i - 1]
    vals = p * (S - (ctx.N + 2) * ctx.a_eps) / np.sqrt(ctx.N)
    return ObservableSnapshot(f"mixed_{i}", ScalarLattice(_spec_of(phi, spec), vals))


def fluctuation_field(phi: np.ndarray, z: np.ndarray, i: int, spec: LatticeSpec | None = None) -> ObservableSnapshot:
    """u_i = sqrt(N) (Phi_i - Z_i), components numbered from 1."""
    phi = np.asarray(phi, dtype=float)
    z = np.asarray(z, dtype=float)
    if phi.shape != z.shape or phi.ndim != 3:
        raise ValueError("phi and z must share shape (N, n, n)")
    N = phi.shape[0]
    if not 1 <= i <= N:
        raise IndexError(f"component index {i} outside 1..{N}")
    vals = np.sqrt(N) * (phi[i - 1] - z[i - 1])
    return ObservableSnapshot(f"fluct_{i}", ScalarLattice(_spec_of(phi, spec), vals))


def observable(tag: str, phi: np.ndarray, ctx: WickContext, z: np.ndarray | None = None,
               spec: LatticeSpec | None = None) -> ObservableSnapshot:
    """Dispatch an observable id to its definition."""
    kind, idx = parse_tag(tag)
    if kind == "Q":
        return scaled_observable(phi, idx, ctx, spec)
    if kind == "mixed":
        return mixed_observable(phi, idx, ctx, spec)
    if z is None:
        raise ValueError("fluctuation observables need the free field z")
    return fluctuation_field(phi, z, idx, spec)
