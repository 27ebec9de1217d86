"""Acceptance criteria 1-15.  Each test prints one PASS/FAIL line.

Criteria 9-12 share one set of MALA chains (M=5, m=5, N in {4, 8, 16, 32},
2e5 retained samples per N) built once per module; expect about half an
hour on one core.
"""
import math
import time

import numpy as np
import pytest

from largen.cli import main
from largen.correlation_oracle import (
    exclusion_count, f_k_oracle, f_nk_oracle, fk_recursion_residual, fnk_recursion_residual, kernel_at,
    perfect_matchings,
)
from largen.field_dynamics import IntegratorConfig
from largen.ibp_engine import expand
from largen.mc_stats import batch_estimate, rate_fit, sigma_test
from largen.oracle_kernels import build_kernels
from largen.runner import DEFAULT_DISPLACEMENTS, phi2_denominator, simulate
from largen.torus_spectral import LatticeSpec, ScalarLattice, convolve, fft_forward, fft_inverse
from largen.wick_observables import expanded_wick_power, radial_wick_array

SPEC = LatticeSpec(5, 5.0)
NS = (4, 8, 16, 32)
MC_SAMPLES = 200_000
MC_CONFIG = IntegratorConfig(dt=0.1, mala_adjust=True, burn_in_steps=2_000)
N_BATCHES = 50


@pytest.fixture
def report(capsys):
    def _report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report


@pytest.fixture(scope="module")
def chains():
    """One MALA chain per N, recording Q1, Q2, mixed_1 and both sides of the Phi2 identity."""
    return {N: simulate(SPEC, N, MC_CONFIG, MC_SAMPLES, seed=2024, observables=["Q1", "Q2", "mixed_1"],
                        displacements=DEFAULT_DISPLACEMENTS, phi2_identity=True)
            for N in NS}


def _est(m, key):
    return batch_estimate(m.array(key), N_BATCHES)


def _kernel(table, d):
    return float(kernel_at(table, d[0], d[1]))


# -- exact identities -----------------------------------------------------------


def test_c01_kernel_identity(report):
    worst, t0 = 0.0, time.perf_counter()
    for M in (4, 5, 6):
        for m in (1.0, 5.0):
            ks = build_kernels(LatticeSpec(M, m))
            s = ks.spec
            lhs = fft_inverse(fft_forward(ks.C_sq.values, s) * fft_forward(ks.G.values, s), s) + ks.G.values
            worst = max(worst, np.max(np.abs(lhs - 2 * ks.C_sq.values)) / np.max(np.abs(ks.C_sq.values)))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-10 and elapsed < 1.0, f"max relative residual {worst:.2e} (tol 1e-10), {elapsed:.2f} s")


def test_c02_resolvent_identity(report):
    worst = 0.0
    rng = np.random.default_rng(2)
    for M, m in [(4, 1.0), (4, 5.0), (5, 5.0)]:
        ks = build_kernels(LatticeSpec(M, m))
        for _ in range(10):
            f = ScalarLattice(ks.spec, rng.standard_normal(ks.spec.shape))
            g = ScalarLattice(ks.spec, f.values + convolve(ks.C_sq, f).values)
            worst = max(worst, float(np.max(np.abs(ks.apply_K(g).values - f.values))))
    report(2, worst <= 1e-10, f"max error {worst:.2e} (tol 1e-10)")


def test_c03_shift_constant(report):
    worst = 0.0
    for M in (3, 4, 5, 6):
        for m in (1.0, 5.0):
            ks = build_kernels(LatticeSpec(M, m))
            worst = max(worst, abs(ks.c1 - (2 * ks.C_sq.values[0, 0] - ks.G.values[0, 0])) / ks.c1)
    report(3, worst <= 1e-12, f"max relative deviation {worst:.2e} (tol 1e-12)")


def test_c04_fk_recursion(report):
    ks = build_kernels(SPEC)
    rng = np.random.default_rng(4)
    worst = max(fk_recursion_residual([tuple(rng.integers(0, SPEC.n, 2)) for _ in range(4)], ks) for _ in range(20))
    report(4, worst <= 1e-8, f"max relative residual over 20 tuples {worst:.2e} (tol 1e-8)")


def test_c05_shifted_recursion_and_closed_forms(report):
    ks = build_kernels(SPEC)
    rng = np.random.default_rng(5)
    G = lambda p, q: _kernel(ks.G, (p[0] - q[0], p[1] - q[1]))
    rec, closed = 0.0, 0.0
    for _ in range(20):
        y1, y2, y3 = [tuple(rng.integers(0, SPEC.n, 2)) for _ in range(3)]
        rec = max(rec, fnk_recursion_residual((2, 2), [y1, y2], ks),
                  fnk_recursion_residual((1, 1, 2), [y1, y2, y3], ks))
        h2 = 2 * G(y1, y2) ** 2 + ks.c1**2
        f21 = 2 * G(y1, y3) * G(y2, y3) - ks.c1 * G(y1, y2)
        closed = max(closed, abs(f_nk_oracle((2, 2), [y1, y2], ks) - h2) / abs(h2),
                     abs(f_nk_oracle((1, 1, 2), [y1, y2, y3], ks) - f21) / max(abs(f21), 1e-300))
    ok = rec <= 1e-8 and closed <= 1e-12
    report(5, ok, f"recursion residual {rec:.2e} (tol 1e-8), closed-form mismatch {closed:.2e} (tol 1e-12)")


def test_c06_combinatorics(report):
    counts = {k: len(perfect_matchings(k)) for k in range(0, 11)}
    ok = all(counts[k] == (math.prod(range(k - 1, 0, -2)) if k % 2 == 0 else 0) for k in counts)
    ex = exclusion_count((2, 2))
    report(6, ok and ex == 2, f"matching counts {[counts[k] for k in range(2, 11, 2)]}, exclusion count (2,2) = {ex}")


def test_c07_wick_equivalence(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 65))
        a = float(rng.uniform(0.05, 3.0))
        S = float(rng.uniform(0.0, 4.0 * N * a))
        for n in range(4):
            x = float(radial_wick_array(S, n, N, a))
            y = float(expanded_wick_power(S, n, N, a))
            worst = max(worst, abs(x - y) / abs(y))
    report(7, worst <= 1e-12, f"max relative error {worst:.2e} over 100 inputs, n <= 3 (tol 1e-12)")


# -- Monte Carlo ---------------------------------------------------------------


def test_c08_free_field_baseline(report):
    ks = build_kernels(SPEC)
    t0 = time.perf_counter()
    m = simulate(SPEC, 4, MC_CONFIG, 10_000, seed=8, observables=["Q1"], interacting=False)
    zs = []
    for d in DEFAULT_DISPLACEMENTS:
        e = _est(m, f"Q1:corr:{d[0]},{d[1]}")
        zs.append(sigma_test(e, 2 * _kernel(ks.C, d) ** 2))
    good = sum(abs(z) <= 3 for z in zs)
    report(8, good >= 4, f"z-scores {np.round(zs, 2).tolist()}, {good}/5 within 3 ({time.perf_counter() - t0:.1f} s)")


def test_c09_interacting_limit_law(report, chains):
    ks = build_kernels(SPEC)
    lines, ok, mono = [], True, True
    devs = {}
    for N in NS:
        for d in DEFAULT_DISPLACEMENTS:
            e = _est(chains[N], f"Q1:corr:{d[0]},{d[1]}")
            devs[N, d] = (abs(e.mean - _kernel(ks.G, d)), e.stderr, e.mean)
    for d in DEFAULT_DISPLACEMENTS:
        g = _kernel(ks.G, d)
        dev, se, est = devs[32, d]
        tol = max(3 * se, 0.1 * abs(g))
        ok &= dev <= tol
        lines.append(f"r={d}: est {est:.4f} G {g:.4f} dev {dev:.4f} tol {tol:.4f}")
        for a, b in zip(NS, NS[1:]):
            da, sa, _ = devs[a, d]
            db, sb, _ = devs[b, d]
            mono &= db <= da + 3 * math.hypot(sa, sb)
    acc = {N: round(chains[N].acceptance, 3) for N in NS}
    trend = "nonincreasing" if mono else "NOT nonincreasing"
    report(9, ok and mono, f"N=32 {'; '.join(lines)}; deviations {trend} in N; acceptance {acc}")


def test_c10_shifted_mean(report, chains):
    ks = build_kernels(SPEC)
    e = _est(chains[32], "Q2:mean")
    tol = max(3 * e.stderr, 0.1 * ks.c1)
    dev = abs(e.mean + ks.c1)
    report(10, dev <= tol, f"E[Q2] = {e.mean:.5f} +- {e.stderr:.5f} vs -c1 = {-ks.c1:.5f}, tol {tol:.5f}")


def test_c11_odd_order_decay(report, chains):
    """|E Q1| through the exact Phi2 identity: E[Q1] = E[(1/N) sum_i (C*T_i)^2] / (D sqrt N)."""
    ks = build_kernels(SPEC)
    vals, errs = [], []
    for N in NS:
        D = phi2_denominator(ks, N)
        e = batch_estimate(chains[N].array("phi2:rhs") / (D * math.sqrt(N)), N_BATCHES)
        vals.append(abs(e.mean))
        errs.append(e.stderr)
    fit = rate_fit(NS, vals)
    detail = ", ".join(f"N={N}: {v:.3e}+-{s:.1e}" for N, v, s in zip(NS, vals, errs))
    report(11, 0.3 <= fit.exponent <= 0.7, f"exponent {fit.exponent:.3f} +- {fit.exponent_stderr:.3f} (need [0.3, 0.7]); {detail}")


def test_c12_fluctuation_marginal(report, chains):
    ks = build_kernels(SPEC)
    m = chains[32]
    lines, ok = [], True
    for d in DEFAULT_DISPLACEMENTS:
        e = _est(m, f"mixed_1:corr:{d[0]},{d[1]}")
        pred = _kernel(ks.C, d) * _kernel(ks.G, d)
        tol = max(3 * e.stderr, 0.1 * abs(pred))
        ok &= abs(e.mean - pred) <= tol
        lines.append(f"r={d}: est {e.mean:.4f} CG {pred:.4f} tol {tol:.4f}")
    e1 = _est(m, "mixed_1:mean")
    ok &= abs(e1.mean) <= 3 * e1.stderr
    report(12, ok, f"{'; '.join(lines)}; one-point {e1.mean:.2e} +- {e1.stderr:.1e}")


def test_c13_ibp_order0(report):
    ks = build_kernels(SPEC)
    rng = np.random.default_rng(13)
    worst = 0.0
    for k in (2, 4):
        res = expand(k, 0)
        for _ in range(10):
            pts = [tuple(rng.integers(0, SPEC.n, 2)) for _ in range(k)]
            exact = f_k_oracle(pts, ks.G)
            worst = max(worst, abs(res.value(ks, pts) - exact) / abs(exact))
    low = {k: expand(k, 0).lowest_power() for k in (1, 3)}
    ok = worst <= 1e-8 and all(v == 0.5 for v in low.values())
    report(13, ok, f"k=2,4 max relative error {worst:.1e}; lowest powers k=1: {low[1]}, k=3: {low[3]}")


def test_c14_phi2_identity(report):
    spec = LatticeSpec(4, 5.0)
    ks = build_kernels(spec)
    N = 8
    m = simulate(spec, N, MC_CONFIG, 100_000, seed=14, observables=[], phi2_identity=True)
    D = phi2_denominator(ks, N)
    lhs = _est(m, "phi2:lhs")
    rhs = _est(m, "phi2:rhs")
    diff = batch_estimate(m.array("phi2:lhs") * D - m.array("phi2:rhs"), N_BATCHES)
    z = diff.mean / diff.stderr
    report(14, abs(z) <= 3, f"D*E[:Phi^2:] = {lhs.mean * D:.4e}, rhs = {rhs.mean:.4e}, z = {z:.2f} (same chain)")


def test_c15_compare_deterministic(report, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("M: 3\nm: 5\nN: [4, 8, 16]\ndt: 0.1\nsteps: 1000\nburn_in: 100\nseed: 15\n"
                   "observables: [Q1, Q2, mixed_1, fluct_1]\n")
    outs = []
    for name in ("a", "b"):
        main(["--config", str(cfg), "--out", str(tmp_path / name), "compare"])
        outs.append((tmp_path / name / "compare.csv").read_bytes())
    report(15, outs[0] == outs[1] and len(outs[0]) > 0, f"two compare runs, {len(outs[0])} bytes each, identical")
