"""Chain orchestration and per-sample measurements for the comparison layer.

A measurement records, for every retained state, translation-averaged
quantities only (one float per statistic), so memory grows with the number of
samples and not with the lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field_dynamics import IntegratorConfig, init_state, run_chain
from .oracle_kernels import KernelSet, build_kernels
from .torus_spectral import LatticeSpec, half, half_weights, rfft_forward
from .wick_observables import WickContext, parse_tag, radial_wick_array

DEFAULT_DISPLACEMENTS: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (1, 1), (2, 0), (3, 0))


def orbit(r: Sequence[int], n: int) -> list[tuple[int, int]]:
    """Images of a displacement under the symmetries of the square lattice (mod n), without repeats."""
    a, b = int(r[0]), int(r[1])
    imgs = set()
    for x, y in ((a, b), (b, a)):
        for sx in (1, -1):
            for sy in (1, -1):
                imgs.add(((sx * x) % n, (sy * y) % n))
    return sorted(imgs)


def chain_seed(seed: int, N: int, chain: int = 0) -> np.random.SeedSequence:
    """Independent, reproducible stream for each (seed, N, chain)."""
    return np.random.SeedSequence([int(seed) & (2**64 - 1), int(N), int(chain)])


@dataclass
class Measurement:
    """Per-sample series keyed by statistic name, e.g. "Q1:corr:1,0" or "Q2:mean"."""

    spec: LatticeSpec
    N: int
    series: dict[str, list[float]] = field(default_factory=dict)
    acceptance: float = float("nan")
    steps: int = 0

    def add(self, key: str, value: float) -> None:
        self.series.setdefault(key, []).append(float(value))

    def array(self, key: str) -> np.ndarray:
        return np.asarray(self.series[key])


class Recorder:
    """Observer computing the configured statistics on each retained state."""

    def __init__(self, kernels: KernelSet, N: int, observables: Sequence[str],
                 displacements: Sequence[Sequence[int]], phi2_identity: bool = False):
        self.kernels = kernels
        self.spec = kernels.spec
        self.N = N
        self.ctx = WickContext(N, kernels.a_eps)
        self.observables = list(observables)
        self.displacements = [tuple(int(v) for v in d) for d in displacements]
        self.phi2_identity = phi2_identity
        n = self.spec.n
        self._w = half_weights(self.spec)
        self._basis = _orbit_cosines(self.spec, self.displacements)
        self._chat = half(_c_hat(self.spec))
        self.out = Measurement(self.spec, N)

    def _corr_from_hat(self, power_hat: np.ndarray, key: str) -> None:
        # translation average of a(x) a(x+r) is the inverse transform of |a^|^2 (volume one)
        corr = self._basis @ power_hat.ravel()
        for d, c in zip(self.displacements, corr):
            self.out.add(f"{key}:corr:{d[0]},{d[1]}", c)

    def __call__(self, k: int, state) -> None:
        phi = state.phi
        S = np.sum(phi * phi, axis=0)
        N = self.N
        a = self.ctx.a_eps
        mixed_hat = None
        for tag in self.observables:
            kind, idx = parse_tag(tag)
            if kind == "Q":
                q = radial_wick_array(S, idx, N, a) / N ** (0.5 * idx)
                self.out.add(f"{tag}:mean", q.mean())
                qh = rfft_forward(q, self.spec)
                self._corr_from_hat(qh.real**2 + qh.imag**2, tag)
            elif kind == "mixed":
                if mixed_hat is None:
                    mixed_hat = rfft_forward(phi * (S - (N + 2) * a) / np.sqrt(N), self.spec)
                # all components are equal in law, so average them
                self.out.add(f"{tag}:mean", float(mixed_hat[:, 0, 0].real.mean()))
                p = np.mean(mixed_hat.real**2 + mixed_hat.imag**2, axis=0)
                self._corr_from_hat(p, tag)
            else:
                u = np.sqrt(N) * (phi - state.z)
                self.out.add(f"{tag}:mean", float(u.mean()))
                uh = rfft_forward(u, self.spec)
                self._corr_from_hat(np.mean(uh.real**2 + uh.imag**2, axis=0), tag)
        if self.phi2_identity:
            if mixed_hat is None:
                mixed_hat = rfft_forward(phi * (S - (N + 2) * a) / np.sqrt(N), self.spec)
            # spatial mean of sum_i (C * T_i)^2 by Parseval
            ct = self._chat * mixed_hat
            rhs = float(np.sum(self._w * (ct.real**2 + ct.imag**2))) / N
            self.out.add("phi2:lhs", (S - N * a).mean())
            self.out.add("phi2:rhs", rhs)


def _orbit_cosines(spec: LatticeSpec, displacements) -> np.ndarray:
    """Rows B_d with B_d . |a^|^2 = orbit average of the inverse transform at d (half spectrum)."""
    n = spec.n
    k1 = np.rint(np.fft.fftfreq(n) * n)[:, None]
    k2 = np.arange(n // 2 + 1)[None, :]
    w = half_weights(spec)
    rows = []
    for d in displacements:
        orb = orbit(d, n)
        rows.append(np.mean([w * np.cos(2 * np.pi * (k1 * r1 + k2 * r2) / n) for r1, r2 in orb], axis=0).ravel())
    return np.array(rows)


def _c_hat(spec: LatticeSpec) -> np.ndarray:
    from .torus_spectral import green_symbol

    return green_symbol(spec)


def phi2_denominator(kernels: KernelSet, N: int) -> float:
    """1 + (1 + 2/N) C^2^(0), the factor multiplying E[:Phi^2:] in the Phi2 identity."""
    return 1.0 + (1.0 + 2.0 / N) * float(kernels.C_sq_hat[0, 0])


def simulate(spec: LatticeSpec, N: int, config: IntegratorConfig, steps: int, seed: int,
             observables: Sequence[str] = ("Q1",), displacements: Sequence[Sequence[int]] = DEFAULT_DISPLACEMENTS,
             phi2_identity: bool = False, chain: int = 0, interacting: bool = True) -> Measurement:
    """Run one chain and record the statistics of every retained state.

    ``interacting=False`` replaces the chain by independent exact free-field
    samples (the Gaussian baseline).
    """
    kernels = build_kernels(spec)
    rec = Recorder(kernels, N, observables, displacements, phi2_identity)
    ss = chain_seed(seed, N, chain)
    if not interacting:
        from .field_dynamics import EnsembleState, sample_gff_array

        rng = np.random.Generator(np.random.PCG64(ss))
        for i in range(steps):
            z = sample_gff_array(spec, rng, (N,))
            st = EnsembleState(spec, N, z, rfft_forward(z, spec), rng)
            rec(i, st)
        rec.out.steps = steps
        rec.out.acceptance = 1.0
        return rec.out
    state = init_state(spec, N, ss)
    for _ in run_chain(state, config, kernels, steps, observers=(rec,)):
        pass
    rec.out.steps = state.steps
    rec.out.acceptance = state.accepted / state.steps if config.mala_adjust and state.steps else float("nan")
    return rec.out
