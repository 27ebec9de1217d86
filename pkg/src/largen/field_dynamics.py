"""Stochastic quantization of the lattice O(N) model, coupled to its free field.

Phi solves  d Phi_i = (Delta - m) Phi_i dt + drift_i(Phi) dt + sqrt(2) dW_i  and
Z solves the same equation with the drift removed, driven by the *same*
noise.  Lattice white noise has variance eps^-2 per site per unit time.

Noise order: each step draws one standard-normal array of shape (N, n, n) in
C order (component, row, column), then, for MALA, one uniform.  Nothing else
touches the generator, so a seed fixes the whole trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

from .oracle_kernels import KernelSet
from .torus_spectral import (
    LatticeSpec,
    ScalarLattice,
    green_symbol,
    half,
    half_weights,
    laplacian_symbol,
    rfft_forward,
    rfft_inverse,
)

SCHEMES = ("semi-implicit", "exponential-linear")


class NonFiniteError(FloatingPointError):
    """A field left the finite range during integration."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.01
    scheme: str = "semi-implicit"
    mala_adjust: bool = False
    burn_in_steps: int = 10_000
    thin_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.thin_stride < 1:
            raise ValueError("thin_stride must be >= 1")
        if self.burn_in_steps < 0:
            raise ValueError("burn_in_steps must be >= 0")


@dataclass
class EnsembleState:
    """Current Phi, the coupled free field Z and the generator driving both.

    Z is stored by its half-spectrum coefficients; ``z`` inverts on demand.
    """

    spec: LatticeSpec
    N: int
    phi: np.ndarray
    z_hat: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    steps: int = 0
    accepted: int = 0
    # MALA cache: (phi_hat, drift_hat, energy) of the current phi
    _cache: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        shape = (self.N,) + self.spec.shape
        if self.phi.shape != shape:
            raise ValueError(f"phi must have shape {shape}")
        if self.z_hat.shape != (self.N, self.spec.n, self.spec.n // 2 + 1):
            raise ValueError("z_hat has the wrong shape")

    @property
    def z(self) -> np.ndarray:
        return rfft_inverse(self.z_hat, self.spec)

    @z.setter
    def z(self, values: np.ndarray) -> None:
        self.z_hat = rfft_forward(np.asarray(values, dtype=float), self.spec)

    @property
    def y(self) -> np.ndarray:
        """Phi - Z, computed on demand."""
        return self.phi - self.z

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else float("nan")


def sample_gff_array(spec: LatticeSpec, rng: np.random.Generator, lead: tuple[int, ...] = ()) -> np.ndarray:
    """Independent exact free-field samples with leading shape ``lead``."""
    white = rng.standard_normal(lead + spec.shape) / spec.eps
    return gff_from_noise(spec, white)


def gff_from_noise(spec: LatticeSpec, white: np.ndarray) -> np.ndarray:
    """Colour site noise of variance eps^-2 into a field with covariance C."""
    return rfft_inverse(np.sqrt(half(green_symbol(spec))) * rfft_forward(white, spec), spec)


def sample_gff(spec: LatticeSpec, rng: np.random.Generator) -> ScalarLattice:
    return ScalarLattice(spec, sample_gff_array(spec, rng))


def init_state(spec: LatticeSpec, N: int, seed: int | np.random.SeedSequence) -> EnsembleState:
    """Start Phi = Z = an exact free-field sample."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = sample_gff_array(spec, rng, (N,))
    return EnsembleState(spec, N, z.copy(), rfft_forward(z, spec), rng)


def drift(phi: np.ndarray, N: int, a_eps: float) -> np.ndarray:
    """-(1/N) Phi_i (S - (N+2) a),  S = sum_j Phi_j^2."""
    S = np.sum(phi * phi, axis=0)
    return -(phi * (S - (N + 2) * a_eps)) / N


def potential_density(phi: np.ndarray, N: int, a_eps: float, m: float) -> np.ndarray:
    """Local part of the action density: S^2/(4N) + (m - (N+2)a/N) S / 2."""
    S = np.sum(phi * phi, axis=0)
    return S * S / (4.0 * N) + 0.5 * (m - (N + 2) * a_eps / N) * S


def action(phi: np.ndarray, N: int, kernels: KernelSet) -> float:
    """Lattice action eps^2 sum_x [S^2/(4N) + (m-(N+2)a/N) S/2 + |grad Phi|^2/2], forward differences."""
    spec = kernels.spec
    e = spec.eps
    grad = sum(np.sum(((np.roll(phi, -1, axis=ax) - phi) / e) ** 2) for ax in (1, 2))
    loc = np.sum(potential_density(phi, N, kernels.a_eps, spec.m))
    return float(e**2 * (loc + 0.5 * grad))


def _mu(spec: LatticeSpec) -> np.ndarray:
    """m + lambda on the half spectrum."""
    return spec.m + half(laplacian_symbol(spec))


def _check_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("field values left the finite range")


def step(
    state: EnsembleState,
    config: IntegratorConfig,
    kernels: KernelSet,
    *,
    with_drift: bool = True,
    noise: np.ndarray | None = None,
) -> EnsembleState:
    """Advance Phi and Z by one unadjusted step of size dt (in place).

    ``noise`` overrides the generator draw (standard normal, shape (N, n, n));
    ``with_drift=False`` switches the nonlinearity off.
    """
    spec, dt = state.spec, config.dt
    if noise is None:
        noise = state.rng.standard_normal((state.N,) + spec.shape)
    eta_hat = rfft_forward(noise, spec) / spec.eps
    mu = _mu(spec)
    if config.scheme == "semi-implicit":
        lin = 1.0 / (1.0 + dt * mu)
        dcoef = dt * lin
        ncoef = np.sqrt(2.0 * dt) * lin
    else:
        lin = np.exp(-dt * mu)
        dcoef = (1.0 - lin) / mu
        ncoef = np.sqrt((1.0 - lin * lin) / mu)
    kick = ncoef * eta_hat
    phi_hat = lin * rfft_forward(state.phi, spec) + kick
    if with_drift:
        phi_hat = phi_hat + dcoef * rfft_forward(drift(state.phi, state.N, kernels.a_eps), spec)
    state.z_hat = lin * state.z_hat + kick
    state.phi = rfft_inverse(phi_hat, spec)
    _check_finite(state.phi, state.z_hat)
    state.time += dt
    state.steps += 1
    state._cache = None
    return state


class _MalaOps:
    """Per-mode coefficients of the theta = 1/2 proposal, which leaves the free field exactly invariant."""

    def __init__(self, spec: LatticeSpec, dt: float):
        mu = _mu(spec)
        h = 0.5 * dt * mu
        self.mu = mu
        self.w = half_weights(spec)
        self.A = (1.0 - h) / (1.0 + h)
        self.B = dt / (1.0 + h)
        self.t = np.sqrt(2.0 * dt) / (1.0 + h)
        self.wt = self.w / self.t**2
        self.wmu = 0.5 * self.w * mu


@lru_cache(maxsize=16)
def _mala_ops(spec: LatticeSpec, dt: float) -> _MalaOps:
    return _MalaOps(spec, dt)


def _sq(z: np.ndarray) -> np.ndarray:
    return z.real**2 + z.imag**2


def _energy(phi: np.ndarray, phi_hat: np.ndarray, N: int, kernels: KernelSet, ops: _MalaOps) -> float:
    # eps^2 sum_x f^2 = sum_xi |f^|^2, so the Gaussian part is diagonal in Fourier space
    gauss = np.sum(ops.wmu * _sq(phi_hat))
    inter = kernels.spec.eps**2 * np.sum(interaction_density(phi, N, kernels.a_eps))
    return float(gauss + inter)


def _mala_eval(phi: np.ndarray, N: int, kernels: KernelSet, ops: _MalaOps):
    spec = kernels.spec
    ph = rfft_forward(phi, spec)
    dh = rfft_forward(drift(phi, N, kernels.a_eps), spec)
    return ph, dh, _energy(phi, ph, N, kernels, ops)


def interaction_density(phi: np.ndarray, N: int, a_eps: float) -> np.ndarray:
    """Interaction density S^2/(4N) - (N+2) a S/(2N); the mass term sits in the Gaussian part."""
    S = np.sum(phi * phi, axis=0)
    return S * S / (4.0 * N) - 0.5 * (N + 2) * a_eps / N * S


def mala_log_ratio(x: np.ndarray, y: np.ndarray, N: int, kernels: KernelSet, dt: float) -> float:
    """log of the Metropolis-Hastings ratio for moving x -> y under the theta = 1/2 proposal."""
    ops = _mala_ops(kernels.spec, dt)
    xh, dxh, ux = _mala_eval(x, N, kernels, ops)
    yh, dyh, uy = _mala_eval(y, N, kernels, ops)
    fwd = yh - ops.A * xh - ops.B * dxh
    bwd = xh - ops.A * yh - ops.B * dyh
    lq_fwd = -0.5 * np.sum(ops.wt * _sq(fwd))
    lq_bwd = -0.5 * np.sum(ops.wt * _sq(bwd))
    return float(ux - uy + lq_bwd - lq_fwd)


def mala_step(state: EnsembleState, config: IntegratorConfig, kernels: KernelSet) -> tuple[EnsembleState, bool]:
    """Metropolis-adjusted Langevin step targeting the lattice Gibbs measure exactly.

    Z receives the same noise through the same linear update, so it remains
    an exact free-field chain; the Phi - Z coupling is broken on rejection.
    """
    spec, N = state.spec, state.N
    ops = _mala_ops(spec, config.dt)
    if state._cache is None:
        state._cache = _mala_eval(state.phi, N, kernels, ops)
    xh, dxh, ux = state._cache

    noise = state.rng.standard_normal((N,) + spec.shape)
    eta_hat = rfft_forward(noise, spec) / spec.eps
    kick = ops.t * eta_hat
    yh = ops.A * xh + ops.B * dxh + kick
    y = rfft_inverse(yh, spec)
    _check_finite(y)
    dyh = rfft_forward(drift(y, N, kernels.a_eps), spec)
    uy = _energy(y, yh, N, kernels, ops)
    # every spectral array here comes from real data times even symbols, so it is Hermitian
    bwd = xh - ops.A * yh - ops.B * dyh
    log_alpha = ux - uy - 0.5 * np.sum(ops.wt * (_sq(bwd) - _sq(kick)))
    u = state.rng.random()
    accept = bool(np.log(u) < log_alpha)
    if accept:
        state.phi = y
        state._cache = (yh, dyh, uy)
        state.accepted += 1
    state.z_hat = ops.A * state.z_hat + kick
    state.time += config.dt
    state.steps += 1
    return state, accept


def advance(state: EnsembleState, config: IntegratorConfig, kernels: KernelSet) -> EnsembleState:
    if config.mala_adjust:
        mala_step(state, config, kernels)
    else:
        step(state, config, kernels)
    return state


Observer = Callable[[int, EnsembleState], None]


def run_chain(
    state: EnsembleState,
    config: IntegratorConfig,
    kernels: KernelSet,
    steps: int,
    observers: Sequence[Observer] = (),
) -> Iterator[tuple[int, EnsembleState]]:
    """Burn in, then yield every thin_stride-th state for ``steps`` retained snapshots.

    Observers are called on each retained state before it is yielded; they
    must not modify it.
    """
    for _ in range(config.burn_in_steps):
        advance(state, config, kernels)
    for k in range(steps):
        for _ in range(config.thin_stride):
            advance(state, config, kernels)
        for obs in observers:
            obs(k, state)
        yield k, state
