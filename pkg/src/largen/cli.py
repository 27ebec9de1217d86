"""Command line front end: configuration, orchestration and file output.

Subcommands: kernels | simulate | estimate | oracle | expand | verify | compare.
Every command writes CSV tables plus a JSON manifest into --out.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .correlation_oracle import (
    exclusion_count,
    f_k_oracle,
    f_nk_oracle,
    fk_recursion_residual,
    fnk_recursion_residual,
    g_k_oracle,
    perfect_matchings,
)
from .field_dynamics import SCHEMES, IntegratorConfig
from .ibp_engine import GraphError, evaluate, expand
from .mc_stats import batch_estimate, rate_fit, sigma_test
from .oracle_kernels import KernelSet, build_kernels
from .runner import DEFAULT_DISPLACEMENTS, Measurement, phi2_denominator, simulate
from .torus_spectral import LatticeSpec, fft_forward, fft_inverse
from .wick_observables import expanded_wick_power, parse_tag, radial_wick_array

KNOWN_Q = (1, 2, 3, 4)
CHECKS = ("kernel_identity", "resolvent_identity", "shift_constant", "fk_recursion",
          "fnk_recursion", "matchings", "exclusion", "laguerre", "ibp_order0")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class RunConfig(BaseModel):
    """Validated run configuration (flat keys, as written in the config file)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    M: int = Field(5, ge=0, le=8)
    m: float = Field(5.0, gt=0)
    N: list[int] = Field(default_factory=lambda: [8])
    dt: float = Field(0.01, gt=0)
    scheme: str = "semi-implicit"
    mala: bool = True
    steps: int = Field(1000, ge=1)
    burn_in: int = Field(10_000, ge=0)
    thin: int = Field(1, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    chains: int = Field(1, ge=1)
    observables: list[str] = Field(default_factory=lambda: ["Q1"])
    displacements: list[tuple[int, int]] = Field(default_factory=lambda: [tuple(d) for d in DEFAULT_DISPLACEMENTS])
    interacting: bool = True
    n_batches: int = Field(50, ge=2)
    checks: list[str] | None = None
    output_dir: str = "out"

    @field_validator("N", mode="before")
    @classmethod
    def _n_list(cls, v):
        return [v] if isinstance(v, int) else v

    @field_validator("N")
    @classmethod
    def _n_positive(cls, v):
        if not v:
            raise ValueError("at least one N is required")
        for x in v:
            if x < 1:
                raise ValueError(f"N must be >= 1, got {x}")
        return v

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v):
        if v not in SCHEMES:
            raise ValueError(f"unknown scheme {v!r}; expected one of {SCHEMES}")
        return v

    @field_validator("observables")
    @classmethod
    def _observables(cls, v):
        for tag in v:
            try:
                kind, idx = parse_tag(tag)
            except ValueError:
                raise ValueError(f"unknown observable id {tag!r}") from None
            if kind == "Q" and idx not in KNOWN_Q:
                raise ValueError(f"unknown observable id {tag!r}")
        return v

    @field_validator("checks")
    @classmethod
    def _checks(cls, v):
        if v is not None:
            for c in v:
                if c not in CHECKS:
                    raise ValueError(f"unknown check {c!r}")
        return v

    @model_validator(mode="after")
    def _components(self):
        for tag in self.observables:
            kind, idx = parse_tag(tag)
            if kind != "Q" and idx > min(self.N):
                raise ValueError(f"observable {tag!r} needs component {idx} but N = {min(self.N)}")
        if self.mala and self.scheme != "semi-implicit":
            raise ValueError("mala requires scheme 'semi-implicit'")
        return self

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.M, self.m)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(dt=self.dt, scheme=self.scheme, mala_adjust=self.mala,
                                burn_in_steps=self.burn_in, thin_stride=self.thin)

    def digest(self) -> str:
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def parse_config(text: str | None, **overrides) -> RunConfig:
    """Parse a YAML/JSON document into a RunConfig; errors name the key path."""
    data: Any = yaml.safe_load(text) if text else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            path = ".".join(str(p) for p in err["loc"]) or "<root>"
            msgs.append(f"{path}: {err['msg']}")
        raise ConfigError("; ".join(msgs)) from None


# -- output helpers ----------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def write_manifest(out: Path, command: str, cfg: RunConfig, files: Sequence[str], extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config_sha256": cfg.digest(),
        "config": cfg.model_dump(mode="json"),
        "seed": cfg.seed,
        "files": list(files),
        "versions": {
            "largen": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    (out / f"{command}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- kernels -----------------------------------------------------------------


def cmd_kernels(cfg: RunConfig, out: Path) -> int:
    ks = build_kernels(cfg.spec)
    n = cfg.spec.n
    files = []
    for name, table in (("C", ks.C), ("C_sq", ks.C_sq), ("G", ks.G), ("L", ks.L)):
        rows = [(i, j, table.values[i, j]) for i in range(n) for j in range(n)]
        write_csv(out / f"kernel_{name}.csv", ("x1", "x2", "value"), rows)
        files.append(f"kernel_{name}.csv")
    record = {"a_eps": ks.a_eps, "c1": ks.c1, "m": cfg.m, "M": cfg.M}
    (out / "kernels.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "kernels", cfg, files + ["kernels.json"])
    return 0


# -- simulate / estimate -------------------------------------------------------


def _stat_keys(m: Measurement) -> list[str]:
    return sorted(m.series)


def _run_one(args) -> Measurement:
    cfg, N, chain, phi2 = args
    return simulate(cfg.spec, N, cfg.integrator, cfg.steps, cfg.seed, cfg.observables,
                    cfg.displacements, phi2_identity=phi2, chain=chain, interacting=cfg.interacting)


def run_chains(cfg: RunConfig, threads: int = 1, phi2: bool = True) -> dict[int, list[Measurement]]:
    """One measurement per (N, chain); parallel over processes when threads > 1."""
    jobs = [(cfg, N, c, phi2) for N in cfg.N for c in range(cfg.chains)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    out: dict[int, list[Measurement]] = {}
    for (_, N, _, _), m in zip(jobs, results):
        out.setdefault(N, []).append(m)
    return out


def _split_key(key: str) -> tuple[str, str]:
    obs, rest = key.split(":", 1)
    return obs, rest


def cmd_simulate(cfg: RunConfig, out: Path, threads: int) -> int:
    runs = run_chains(cfg, threads)
    rows = []
    for N in cfg.N:
        for c, m in enumerate(runs[N]):
            keys = _stat_keys(m)
            obs_ids = sorted({_split_key(k)[0] for k in keys})
            for obs in obs_ids:
                stats = [k for k in keys if k.startswith(obs + ":")]
                for i in range(len(m.series[stats[0]])):
                    rows.append((N, c, (i + 1) * cfg.thin, obs) + tuple(
                        (_split_key(k)[1], m.series[k][i]) for k in stats))
    # wide layout: one column per statistic of the observable
    stat_names = sorted({name for r in rows for name, _ in r[4:]})
    table = []
    for r in rows:
        d = dict(r[4:])
        table.append(list(r[:4]) + [d.get(s, "") for s in stat_names])
    write_csv(out / "timeseries.csv", ["N", "chain", "step", "observable_id"] + stat_names, table)
    acc = {str(N): [m.acceptance for m in runs[N]] for N in cfg.N}
    write_manifest(out, "simulate", cfg, ["timeseries.csv"], {"acceptance": acc})
    return 0


def load_timeseries(path: Path) -> dict[tuple[int, str, str], list[np.ndarray]]:
    """Read timeseries.csv back into {(N, observable, statistic): [per-chain series]}."""
    data: dict[tuple[int, str, str, int], list[float]] = {}
    with path.open() as fh:
        reader = csv.DictReader(fh)
        stats = [f for f in reader.fieldnames if f not in ("N", "chain", "step", "observable_id")]
        for row in reader:
            for s in stats:
                if row[s] != "":
                    data.setdefault((int(row["N"]), row["observable_id"], s, int(row["chain"])), []).append(float(row[s]))
    out: dict[tuple[int, str, str], list[np.ndarray]] = {}
    for (N, obs, s, c), v in sorted(data.items()):
        out.setdefault((N, obs, s), []).append(np.asarray(v))
    return out


def pooled_estimate(series: Sequence[np.ndarray], n_batches: int):
    """Combine independent chains: inverse-variance weighting of per-chain batch estimates."""
    ests = [batch_estimate(s, n_batches) for s in series]
    if len(ests) == 1:
        return ests[0]
    from .mc_stats import EstimateResult

    w = np.array([1.0 / e.stderr**2 if e.stderr > 0 else 0.0 for e in ests])
    if w.sum() == 0:
        return EstimateResult(float(np.mean([e.mean for e in ests])), 0.0, sum(e.n_samples for e in ests),
                              float(np.mean([e.tau_int for e in ests])))
    mean = float(np.sum(w * [e.mean for e in ests]) / w.sum())
    return EstimateResult(mean, float(1.0 / np.sqrt(w.sum())), sum(e.n_samples for e in ests),
                          float(np.mean([e.tau_int for e in ests])))


def cmd_estimate(cfg: RunConfig, out: Path, threads: int, source: Path | None) -> int:
    if source is not None:
        data = load_timeseries(source)
    else:
        runs = run_chains(cfg, threads)
        data = {}
        for N, ms in runs.items():
            for key in _stat_keys(ms[0]):
                obs, stat = _split_key(key)
                data[(N, obs, stat)] = [m.array(key) for m in ms]
    rows = []
    for (N, obs, stat), series in sorted(data.items()):
        e = pooled_estimate(series, cfg.n_batches)
        rows.append((obs, stat, N, e.mean, e.stderr, e.tau_int, e.n_samples))
    write_csv(out / "estimates.csv", ("observable", "statistic", "N", "estimate", "stderr", "tau_int", "n_samples"), rows)
    write_manifest(out, "estimate", cfg, ["estimates.csv"])
    return 0


# -- oracle ------------------------------------------------------------------


def free_prediction(tag: str, stat: str, kernels: KernelSet, N: int) -> float:
    """Exact free-field values (finite N) for the Gaussian baseline."""
    kind, idx = parse_tag(tag)
    if stat == "mean":
        return 0.0
    d = tuple(int(v) for v in stat.split(":")[1].split(","))
    c = float(kernels.C.values[d[0] % kernels.spec.n, d[1] % kernels.spec.n])
    if kind == "Q" and idx == 1:
        return 2.0 * c * c
    if kind == "mixed":
        return (2.0 * N + 4.0) / N * c**3
    return float("nan")


def large_n_prediction(tag: str, stat: str, kernels: KernelSet) -> float:
    """Large-N limit of the one-point ("mean") or two-point ("corr:r1,r2") raw moments."""
    kind, idx = parse_tag(tag)
    o = (0, 0)
    if stat == "mean":
        if kind == "Q":
            return float(f_nk_oracle((idx,), [o], kernels))
        return 0.0
    d = tuple(int(v) for v in stat.split(":")[1].split(","))
    if kind == "Q":
        return float(f_nk_oracle((idx, idx), [o, d], kernels))
    if kind == "mixed":
        return g_k_oracle([o, d], kernels)
    return float("nan")


def cmd_oracle(cfg: RunConfig, out: Path) -> int:
    ks = build_kernels(cfg.spec)
    rows = []
    for tag in cfg.observables:
        rows.append((tag, "mean", large_n_prediction(tag, "mean", ks)))
        for d in cfg.displacements:
            rows.append((tag, f"{d[0]},{d[1]}", large_n_prediction(tag, f"corr:{d[0]},{d[1]}", ks)))
    write_csv(out / "oracle.csv", ("observable", "displacement", "prediction"), rows)
    write_manifest(out, "oracle", cfg, ["oracle.csv"])
    return 0


# -- expand ------------------------------------------------------------------


def cmd_expand(cfg: RunConfig, out: Path, k: int, order: int, points: Sequence[Sequence[int]] | None) -> int:
    res = expand(k, order)
    ks = build_kernels(cfg.spec)
    if points is None:
        points = [tuple(cfg.displacements[i % len(cfg.displacements)]) for i in range(k)]
    rows, dump = [], []
    for pw in res.powers:
        for t in res.closed_terms[pw]:
            try:
                val = evaluate(t, ks, points)
            except GraphError:
                val = float("nan")
            rows.append((str(pw), str(t.coefficient), t.signature(), val))
            dump.append({"power": str(pw), **t.to_dict()})
    write_csv(out / f"expand_k{k}_p{order}.csv", ("power", "coefficient", "graph", "value"), rows)
    (out / f"expand_k{k}_p{order}.json").write_text(json.dumps(
        {"k": k, "order": order, "points": [list(p) for p in points], "closed": dump,
         "remainder": [t.to_dict() for t in res.remainder_terms]}, indent=1) + "\n")
    write_manifest(out, "expand", cfg, [f"expand_k{k}_p{order}.csv", f"expand_k{k}_p{order}.json"])
    return 0


# -- verify ------------------------------------------------------------------


def _rng(cfg: RunConfig, name: str) -> np.random.Generator:
    """Separate stream per check, so results do not depend on which checks run."""
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, CHECKS.index(name)]))


def check_kernel_identity(ks: KernelSet) -> float:
    spec = ks.spec
    lhs = fft_inverse(fft_forward(ks.C_sq.values, spec) * fft_forward(ks.G.values, spec), spec) + ks.G.values
    return float(np.max(np.abs(lhs - 2 * ks.C_sq.values)) / np.max(np.abs(ks.C_sq.values)))


def check_resolvent_identity(ks: KernelSet, rng: np.random.Generator, count: int = 10) -> float:
    from .torus_spectral import ScalarLattice, convolve

    worst = 0.0
    for _ in range(count):
        f = ScalarLattice(ks.spec, rng.standard_normal(ks.spec.shape))
        g = ScalarLattice(ks.spec, f.values + convolve(ks.C_sq, f).values)
        worst = max(worst, float(np.max(np.abs(ks.apply_K(g).values - f.values))))
    return worst


def check_shift_constant(ks: KernelSet) -> float:
    return abs(ks.c1 - (2 * ks.C_sq.values[0, 0] - ks.G.values[0, 0])) / ks.c1


def _random_points(rng, n, k):
    return [tuple(int(v) for v in rng.integers(0, n, 2)) for _ in range(k)]


def run_verify(cfg: RunConfig, kernels: KernelSet | None = None) -> dict:
    """Deterministic identity suite; returns {"passed": bool, "checks": {name: {...}}}."""
    ks = kernels if kernels is not None else build_kernels(cfg.spec)
    names = CHECKS if cfg.checks is None else cfg.checks
    suite: dict[str, Callable[[], tuple[float, float]]] = {
        "kernel_identity": lambda: (check_kernel_identity(ks), 1e-10),
        "resolvent_identity": lambda: (check_resolvent_identity(ks, _rng(cfg, "resolvent_identity")), 1e-10),
        "shift_constant": lambda: (check_shift_constant(ks), 1e-12),
        "fk_recursion": lambda: _fk_check(ks, _rng(cfg, "fk_recursion")),
        "fnk_recursion": lambda: _fnk_check(ks, _rng(cfg, "fnk_recursion")),
        "matchings": lambda: (float(sum(abs(len(perfect_matchings(k)) - math.prod(range(k - 1, 0, -2)))
                                        for k in range(2, 11, 2))), 0.0),
        "exclusion": lambda: (float(abs(exclusion_count((2, 2)) - 2)), 0.0),
        "laguerre": lambda: (_laguerre_residual(_rng(cfg, "laguerre")), 1e-12),
        "ibp_order0": lambda: (_ibp_residual(ks, _rng(cfg, "ibp_order0")), 1e-8),
    }
    report = {}
    for name in names:
        resid, tol = suite[name]()
        report[name] = {"residual": resid, "tolerance": tol, "passed": bool(resid <= tol)}
    return {"passed": all(r["passed"] for r in report.values()), "checks": report}


def _fk_check(ks: KernelSet, rng) -> tuple[float, float]:
    n = ks.spec.n
    return max(fk_recursion_residual(_random_points(rng, n, 4), ks) for _ in range(20)), 1e-8


def _fnk_check(ks: KernelSet, rng) -> tuple[float, float]:
    n = ks.spec.n
    return max(fnk_recursion_residual(nn, _random_points(rng, n, len(nn)), ks)
               for nn in ((2, 2), (1, 1, 2)) for _ in range(10)), 1e-8


def _laguerre_residual(rng) -> float:
    """Recurrence vs explicit polynomial, relative to the sum of absolute term values.

    The explicit form has alternating coefficients (all roots are positive),
    so that sum is |P(-S)|; plain relative error is ill-conditioned near roots.
    """
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 64))
        a = float(rng.uniform(0.05, 3.0))
        S = float(rng.uniform(0.0, 4.0 * N * a))
        for k in range(4):
            x = float(radial_wick_array(S, k, N, a))
            y = float(expanded_wick_power(S, k, N, a))
            worst = max(worst, abs(x - y) / abs(float(expanded_wick_power(-S, k, N, a))))
    return worst


def _ibp_residual(ks: KernelSet, rng) -> float:
    worst = 0.0
    for k in (2, 4):
        res = expand(k, 0)
        for _ in range(5):
            pts = _random_points(rng, ks.spec.n, k)
            exact = f_k_oracle(pts, ks.G)
            worst = max(worst, abs(res.value(ks, pts) - exact) / abs(exact))
    return worst


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    report = run_verify(cfg)
    (out / "verify.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "verify", cfg, ["verify.json"])
    for name, r in report["checks"].items():
        print(f"{'PASS' if r['passed'] else 'FAIL'} {name}: residual {r['residual']:.3e} (tol {r['tolerance']:.0e})")
    return 0 if report["passed"] else 1


# -- compare -----------------------------------------------------------------


def run_compare(cfg: RunConfig, threads: int = 1) -> dict:
    """Estimates vs predictions for every (observable, statistic, N) plus rate fits over N."""
    runs = run_chains(cfg, threads, phi2=True)
    rows, issues = [], []
    dev_by_stat: dict[str, list[tuple[int, float, float]]] = {}
    for N in cfg.N:
        ks = build_kernels(cfg.spec)
        ms = runs[N]
        for key in _stat_keys(ms[0]):
            obs, stat = _split_key(key)
            if obs == "phi2":
                continue
            e = pooled_estimate([m.array(key) for m in ms], cfg.n_batches)
            if e.n_samples < 50 * e.tau_int:
                issues.append(f"{key} at N={N}: tau_int {e.tau_int:.1f} too large for {e.n_samples} samples")
            pred = (large_n_prediction(obs, stat, ks) if cfg.interacting
                    else free_prediction(obs, stat, ks, N))
            z = sigma_test(e, pred) if e.stderr > 0 and math.isfinite(pred) else float("nan")
            disp = stat.split(":", 1)[1] if stat.startswith("corr:") else stat
            rows.append((obs, disp, N, e.mean, e.stderr, pred, z))
            dev_by_stat.setdefault(f"{obs}:{stat}", []).append((N, abs(e.mean - pred), e.stderr))
        # E[Q1] through the exact Phi2 identity (the naive mean is far noisier)
        D = phi2_denominator(ks, N)
        e = pooled_estimate([m.array("phi2:rhs") / (D * math.sqrt(N)) for m in ms], cfg.n_batches)
        rows.append(("Q1", "mean_phi2", N, e.mean, e.stderr, 0.0, sigma_test(e, 0.0) if e.stderr > 0 else float("nan")))
        dev_by_stat.setdefault("Q1:mean_phi2", []).append((N, abs(e.mean), e.stderr))
    fits = {}
    if len(cfg.N) >= 3:
        for key, vals in dev_by_stat.items():
            Ns = [v[0] for v in vals]
            devs = [v[1] for v in vals]
            if all(d > 0 for d in devs) and all(math.isfinite(d) for d in devs):
                f = rate_fit(Ns, devs)
                fits[key] = {"exponent": f.exponent, "amplitude": f.amplitude, "residual": f.residual}
    return {"rows": rows, "rate_fits": fits, "issues": issues,
            "acceptance": {str(N): [m.acceptance for m in runs[N]] for N in cfg.N}}


def cmd_compare(cfg: RunConfig, out: Path, threads: int) -> int:
    report = run_compare(cfg, threads)
    write_csv(out / "compare.csv", ("observable", "displacement", "N", "estimate", "stderr", "prediction", "z"),
              report["rows"])
    (out / "compare.json").write_text(json.dumps(
        {"rate_fits": report["rate_fits"], "issues": report["issues"], "acceptance": report["acceptance"]},
        indent=2, sort_keys=True) + "\n")
    write_manifest(out, "compare", cfg, ["compare.csv", "compare.json"])
    return 1 if report["issues"] else 0


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="largen", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="YAML or JSON config file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    ap.add_argument("--threads", type=int, default=1, help="parallel chains")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("kernels", help="dump C, C^2, G, L and constants")
    sub.add_parser("simulate", help="run chains and write observable time series")
    p = sub.add_parser("estimate", help="batch-means estimates from a time series")
    p.add_argument("--input", type=Path, help="timeseries.csv from a previous simulate run")
    sub.add_parser("oracle", help="large-N predictions for the configured observables")
    p = sub.add_parser("expand", help="graph expansion of the k-point function")
    p.add_argument("k", type=int)
    p.add_argument("order", type=int)
    p.add_argument("--points", type=str, help="semicolon-separated grid points, e.g. '0,0;1,2'")
    sub.add_parser("verify", help="deterministic identity checks")
    sub.add_parser("compare", help="Monte Carlo estimates against predictions")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else None
        cfg = parse_config(text, seed=args.seed)
    except (ConfigError, OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    cmd = args.command
    if cmd == "kernels":
        return cmd_kernels(cfg, out)
    if cmd == "simulate":
        return cmd_simulate(cfg, out, args.threads)
    if cmd == "estimate":
        return cmd_estimate(cfg, out, args.threads, args.input)
    if cmd == "oracle":
        return cmd_oracle(cfg, out)
    if cmd == "expand":
        pts = None
        if args.points:
            pts = [tuple(int(c) for c in s.split(",")) for s in args.points.split(";")]
        try:
            return cmd_expand(cfg, out, args.k, args.order, pts)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if cmd == "verify":
        return cmd_verify(cfg, out)
    return cmd_compare(cfg, out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
