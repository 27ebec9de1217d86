"""Exact large-N correlation functions on a fixed lattice.

Points are integer grid indices (i1, i2); kernels are looked up with periodic
wrap, so every formula here is a finite sum of products of kernel values.

    f_k(y)        sum over perfect matchings of prod G(y_a - y_b)   (0 for odd k)
    F_{n,k}(y)    same, over copies of each y_i repeated n_i times, never pairing two copies of one site
    f_{n,k}(y)    sum_l (-c1)^{|l|} prod_i n_i! / ((n_i-2l_i)! l_i! 2^{l_i}) F_{n-2l,k}(y)
    g_k(y)        C_k(y) f_k(y), C_k the matching sum over C
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .oracle_kernels import KernelSet
from .torus_spectral import ScalarLattice

MAX_EXCLUSION_SIZE = 12


@dataclass(frozen=True)
class Matching:
    """Perfect matching of {0, ..., k-1} as sorted pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = [v for p in self.pairs for v in p]
        if len(seen) != len(set(seen)) or sorted(seen) != list(range(len(seen))):
            raise ValueError("pairs must partition {0, ..., k-1}")

    @property
    def k(self) -> int:
        return 2 * len(self.pairs)


@dataclass(frozen=True)
class MultiIndex:
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if any(v < 0 for v in self.n):
            raise ValueError("multi-index entries must be >= 0")

    @property
    def total(self) -> int:
        return sum(self.n)


Point = tuple[int, int]


@lru_cache(maxsize=None)
def _matchings(items: tuple[int, ...]) -> tuple[tuple[tuple[int, int], ...], ...]:
    if not items:
        return ((),)
    first, rest = items[0], items[1:]
    out = []
    for j, partner in enumerate(rest):
        remaining = rest[:j] + rest[j + 1:]
        for sub in _matchings(remaining):
            out.append(((first, partner),) + sub)
    return tuple(out)


def perfect_matchings(k: int) -> list[Matching]:
    """All (k-1)!! matchings of k labels; empty for odd k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k % 2:
        return []
    return [Matching(p) for p in _matchings(tuple(range(k)))]


def _points(points: Sequence) -> np.ndarray:
    arr = np.asarray(points, dtype=int)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("points must be a sequence of (i1, i2) grid indices")
    return arr


def kernel_at(table: ScalarLattice | np.ndarray, d1, d2):
    """Kernel value at displacement (d1, d2), periodic; broadcasts over arrays."""
    vals = table.values if isinstance(table, ScalarLattice) else table
    n = vals.shape[0]
    return vals[np.mod(d1, n), np.mod(d2, n)]


def _pair_value(table, pts, a: int, b: int):
    return kernel_at(table, pts[a][0] - pts[b][0], pts[a][1] - pts[b][1])


def matching_sum(points: Sequence, table) -> float:
    """sum over matchings of prod table(y_a - y_b); 0 for odd k.  Coordinates may be arrays."""
    k = len(points)
    if k % 2:
        return 0.0
    total = 0.0
    for pairs in _matchings(tuple(range(k))):
        term = 1.0
        for a, b in pairs:
            term = term * _pair_value(table, points, a, b)
        total = total + term
    return total


def f_k_oracle(points: Sequence, G: ScalarLattice) -> float:
    """Limiting k-point function of Q1 = N^{-1/2} :Phi^2:."""
    return float(matching_sum([tuple(p) for p in _points(points)], G)) if len(points) else 1.0


def hermite(n: int, x):
    """Probabilists' Hermite polynomial: sum_j (-1)^j n!/((n-2j)! j! 2^j) x^{n-2j}."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for j in range(n // 2 + 1):
        c = (-1) ** j * math.factorial(n) / (math.factorial(n - 2 * j) * math.factorial(j) * 2**j)
        total = total + c * x ** (n - 2 * j)
    return total if total.ndim else float(total)


@lru_cache(maxsize=None)
def exclusion_pair_types(n: tuple[int, ...]) -> tuple[tuple[tuple[tuple[int, int], ...], int], ...]:
    """Group the exclusion matchings of replicated labels by their multiset of site pairs.

    Returns (pairs, multiplicity) with pairs a sorted tuple of site-index pairs.
    """
    if sum(n) > MAX_EXCLUSION_SIZE:
        raise ValueError(f"exclusion pairing size {sum(n)} exceeds the guard {MAX_EXCLUSION_SIZE}")
    labels = tuple(i for i, ni in enumerate(n) for _ in range(ni))
    if len(labels) % 2:
        return ()
    counts: Counter = Counter()
    for pairs in _matchings(tuple(range(len(labels)))):
        sites = []
        for a, b in pairs:
            sa, sb = labels[a], labels[b]
            if sa == sb:
                break
            sites.append((min(sa, sb), max(sa, sb)))
        else:
            counts[tuple(sorted(sites))] += 1
    return tuple(sorted(counts.items()))


def exclusion_count(n: Sequence[int]) -> int:
    """Number of exclusion matchings for the replication vector n."""
    return sum(c for _, c in exclusion_pair_types(tuple(int(v) for v in n)))


def F_nk_oracle(n: Sequence[int], points: Sequence, G: ScalarLattice):
    """Exclusion-pairing sum F_{n,k}; coordinates of the points may be arrays (vectorised)."""
    n = MultiIndex(tuple(n)).n
    if len(n) != len(points):
        raise ValueError("need one multiplicity per point")
    total = 0.0
    for pairs, mult in exclusion_pair_types(n):
        term = float(mult)
        for a, b in pairs:
            term = term * _pair_value(G, points, a, b)
        total = total + term
    return total


def f_nk_oracle(n: Sequence[int], points: Sequence, kernels: KernelSet):
    """k-point function of the shifted Wick powers :Q^{n_i}:_c at the given points."""
    n = MultiIndex(tuple(n)).n
    if len(n) != len(points):
        raise ValueError("need one multiplicity per point")
    c1 = kernels.c1
    total = 0.0
    for ls in itertools.product(*(range(ni // 2 + 1) for ni in n)):
        w = (-c1) ** sum(ls)
        for ni, li in zip(n, ls):
            w *= math.factorial(ni) / (math.factorial(ni - 2 * li) * math.factorial(li) * 2**li)
        rest = tuple(ni - 2 * li for ni, li in zip(n, ls))
        total = total + w * F_nk_oracle(rest, points, kernels.G)
    return total


def g_k_oracle(points: Sequence, kernels: KernelSet) -> float:
    """Limiting k-point function of N^{-1/2} :Phi_1 Phi^2:, i.e. C_k f_k."""
    pts = [tuple(p) for p in _points(points)]
    if len(pts) % 2:
        return 0.0
    return float(matching_sum(pts, kernels.C) * matching_sum(pts, kernels.G))


# -- recursion residuals ----------------------------------------------------

def _grid(n: int):
    i1, i2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return i1, i2


def fk_recursion_residual(points: Sequence, kernels: KernelSet) -> float:
    """Relative residual of f_k(y) + int C^2(y1-z) f_k(z, y2..) dz - 2 sum_m C^2(y1-y_m) f_{k-2}(rest).

    The integral is a direct lattice sum of the pairing oracle over z, which is
    independent of the Fourier construction of G.
    """
    pts = [tuple(int(c) for c in p) for p in _points(points)]
    k = len(pts)
    spec = kernels.spec
    i1, i2 = _grid(spec.n)
    y1 = pts[0]
    zpts = [(i1, i2)] + pts[1:]
    fz = matching_sum(zpts, kernels.G)
    csq = kernel_at(kernels.C_sq, y1[0] - i1, y1[1] - i2)
    conv = spec.eps**2 * float(np.sum(csq * fz))
    lhs = f_k_oracle(pts, kernels.G) + conv
    rhs = 0.0
    for m in range(1, k):
        rest = [p for j, p in enumerate(pts) if j not in (0, m)]
        rhs += 2.0 * float(kernel_at(kernels.C_sq, y1[0] - pts[m][0], y1[1] - pts[m][1])) * f_k_oracle(rest, kernels.G)
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def fnk_recursion_residual(n: Sequence[int], points: Sequence, kernels: KernelSet) -> float:
    """Relative residual of the shifted recursion for n in {(2,2), (1,1,2)}.

    (2,2):    f(y1,y2) + int C^2(y1-z) f_{(1,1,2)}(z,y1,y2) dz = 4 C^2(y1-y2) G(y1-y2)
    (1,1,2):  f(y1,y2,y3) + int C^2(y1-z) f_{(1,1,2)}(z,y2,y3) dz
                  = -2 c1 C^2(y1-y2) + 4 C^2(y1-y3) G(y2-y3)
    """
    n = tuple(int(v) for v in n)
    pts = [tuple(int(c) for c in p) for p in _points(points)]
    spec = kernels.spec
    i1, i2 = _grid(spec.n)
    C2 = kernels.C_sq
    c1 = kernels.c1

    def c2(p, q):
        return float(kernel_at(C2, p[0] - q[0], p[1] - q[1]))

    def g(p, q):
        return float(kernel_at(kernels.G, p[0] - q[0], p[1] - q[1]))

    if n == (2, 2):
        y1, y2 = pts
        fz = f_nk_oracle((1, 1, 2), [(i1, i2), y1, y2], kernels)
        lhs = float(f_nk_oracle(n, pts, kernels))
        rhs = 4.0 * c2(y1, y2) * g(y1, y2)
    elif n == (1, 1, 2):
        y1, y2, y3 = pts
        fz = f_nk_oracle((1, 1, 2), [(i1, i2), y2, y3], kernels)
        lhs = float(f_nk_oracle(n, pts, kernels))
        rhs = -2.0 * c1 * c2(y1, y2) + 4.0 * c2(y1, y3) * g(y2, y3)
    else:
        raise ValueError(f"recursion check implemented for (2,2) and (1,1,2) only, got {n}")
    conv = spec.eps**2 * float(np.sum(kernel_at(C2, y1[0] - i1, y1[1] - i2) * fz))
    lhs += conv
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


# -- predictions for the comparison layer -------------------------------------

def predict(tag: str, displacement: Sequence[int], kernels: KernelSet) -> float:
    """Large-N prediction for the observable two-point function E[A(0) A(r)] (raw second moment)."""
    from .wick_observables import parse_tag

    kind, idx = parse_tag(tag)
    r = tuple(int(v) for v in displacement)
    o = (0, 0)
    if kind == "Q":
        # f_{(n,n)} already includes the squared mean of the shifted power
        return float(f_nk_oracle((idx, idx), [o, r], kernels))
    if kind == "mixed":
        return g_k_oracle([o, r], kernels)
    raise ValueError(f"no large-N prediction for {tag!r}")


def predict_mean(tag: str, kernels: KernelSet) -> float:
    """Large-N one-point function of an observable."""
    from .wick_observables import parse_tag

    kind, idx = parse_tag(tag)
    if kind == "Q":
        return float(f_nk_oracle((idx,), [(0, 0)], kernels))
    return 0.0
