"""Estimation layer: translation-averaged correlators, error bars, rate fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .torus_spectral import ScalarLattice


@dataclass(frozen=True)
class SampleSeries:
    values: np.ndarray
    stride: int = 1
    dt: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", v)
        if v.size == 0:
            raise ValueError("empty series")


@dataclass(frozen=True)
class EstimateResult:
    mean: float
    stderr: float
    n_samples: int
    tau_int: float


@dataclass(frozen=True)
class RateFit:
    exponent: float
    amplitude: float
    residual: float
    exponent_stderr: float = float("nan")


def cross_correlate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """c(r) = n^-2 sum_x a(x) b(x+r) over the last two axes, by FFT."""
    n1, n2 = a.shape[-2:]
    fa = np.fft.rfft2(a, axes=(-2, -1))
    fb = np.fft.rfft2(b, axes=(-2, -1))
    return np.fft.irfft2(np.conj(fa) * fb, s=(n1, n2), axes=(-2, -1)) / (n1 * n2)


def translation_correlator(a: ScalarLattice, b: ScalarLattice) -> ScalarLattice:
    if a.spec != b.spec:
        raise ValueError(f"lattice spec mismatch: {a.spec} vs {b.spec}")
    return ScalarLattice(a.spec, cross_correlate(a.values, b.values))


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalized autocorrelation function rho(t), t = 0..len-1, by FFT."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    n = d.size
    f = np.fft.rfft(d, n=2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def integrated_autocorrelation_time(x: np.ndarray, c: float = 5.0) -> float:
    """tau_int = 1/2 + sum_{t=1}^{W} rho(t), with W the first window satisfying W >= c tau_int(W)."""
    rho = autocorrelation(x)
    if rho[0] == 0:
        return 0.5
    tau = 0.5 + np.cumsum(rho[1:])
    for W in range(1, tau.size + 1):
        if W >= c * tau[W - 1]:
            return float(max(tau[W - 1], 0.5))
    return float(max(tau[-1], 0.5))


def batch_estimate(series: SampleSeries | np.ndarray, n_batches: int = 50) -> EstimateResult:
    """Batch-means mean and standard error, with the windowed tau_int reported alongside."""
    if not isinstance(series, SampleSeries):
        series = SampleSeries(series)
    x = series.values
    if n_batches < 2 or x.size < 2 * n_batches:
        raise ValueError(f"series of length {x.size} too short for {n_batches} batches")
    b = x.size // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    stderr = float(np.std(means, ddof=1) / np.sqrt(n_batches))
    return EstimateResult(float(x.mean()), stderr, int(x.size), integrated_autocorrelation_time(x))


def rate_fit(Ns: Sequence[float], deviations: Sequence[float]) -> RateFit:
    """Fit |deviation| = amplitude * N^-exponent by least squares in log-log coordinates."""
    Ns = np.asarray(Ns, dtype=float)
    dev = np.asarray(deviations, dtype=float)
    if Ns.size < 3 or Ns.size != dev.size:
        raise ValueError("need at least 3 (N, deviation) pairs")
    if np.any(dev <= 0) or np.any(Ns <= 0):
        raise ValueError("deviations and N values must be positive")
    X = np.column_stack([np.ones_like(Ns), -np.log(Ns)])
    y = np.log(dev)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(np.sum(resid**2))
    dof = Ns.size - 2
    cov = np.linalg.inv(X.T @ X) * (rss / dof if dof > 0 else 0.0)
    return RateFit(float(coef[1]), float(np.exp(coef[0])), float(np.sqrt(rss / Ns.size)), float(np.sqrt(cov[1, 1])))


def weighted_rate_fit(Ns: Sequence[float], values: Sequence[float], stderrs: Sequence[float]) -> RateFit:
    """Log-log fit weighted by the relative error of each point (delta log|v| ~ stderr/|v|)."""
    Ns = np.asarray(Ns, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    s = np.asarray(stderrs, dtype=float)
    if np.any(v <= 0):
        raise ValueError("values must be nonzero")
    w = v / np.maximum(s, 1e-300)
    X = np.column_stack([np.ones_like(Ns), -np.log(Ns)])
    y = np.log(v)
    Xw = X * w[:, None]
    coef, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
    resid = y - X @ coef
    cov = np.linalg.inv(Xw.T @ Xw)
    chi2 = float(np.sum((resid * w) ** 2))
    return RateFit(float(coef[1]), float(np.exp(coef[0])), float(np.sqrt(np.mean(resid**2))),
                   float(np.sqrt(cov[1, 1])) * max(1.0, np.sqrt(chi2 / max(Ns.size - 2, 1))))


def sigma_test(estimate: EstimateResult, prediction: float) -> float:
    """z-score (mean - prediction) / stderr."""
    diff = estimate.mean - prediction
    if estimate.stderr <= 0:
        if diff == 0:
            return 0.0
        raise ValueError("zero standard error with mean different from the prediction")
    return float(diff / estimate.stderr)
