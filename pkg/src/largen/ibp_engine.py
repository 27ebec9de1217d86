"""Dyson-Schwinger graph expansion of the k-point function of Q1 = N^{-1/2} :Phi^2:.

A term is a multigraph with a rational coefficient and a power h of N^{-1/2}.
Vertices are external (fixed points y_1..y_k), internal (integrated, carrying
Wick powers of the field) or resolvent vertices (integrated, created when the
kernel K is applied).  Edges carry the kernels C, K or G.

The field at a vertex is fixed by its effective degree d = (#C edges)
+ 2 (#K edges it sends) + 2 (#G edges):

    external   d=0  X = N^{-1/2}:Phi^2:     d=1  Phi_i        d=2  none
    internal   d=1  T_i = N^{-1/2}:Phi_i Phi^2:   d=2  X   d=3  Phi_i   d=4  none

Every graph has zero or two odd vertices (one-component fields Phi_i or T_i);
a pair of odd vertices x1, x2 stands for (1/N) sum_i A_i(x1) A_i(x2).  The
value of a term is coefficient * N^{-h/2} * integral of the kernels times the
expectation of the fields.

Rewrite rules (both exact lattice identities of the Gibbs measure):

class 1, at a vertex v carrying X, with W the other X vertices,

    I + C^2 *_v I = sum_{w in W} 2 [v=C^2=w]  -  (2/N) [v=C^2=z, z new X]
                    + N^{-1/2} ( 8 sum_{w<u} [v-C-w, v-C-u]
                                 - 4 sum_w [v-C-w, v-C-z]  +  [v-C-z, v-C-z'] )

(z, z' new internal vertices); K = (1 + C^2*)^{-1} then moves the emitted
edges onto a new resolvent vertex y joined to v by a K edge.

class 2, at the first odd vertex x1 with partner x2,

    I = (1 + 2 m2/N) [x1-C-x2]  +  N^{-1/2} ( 2 sum_{w X vertex} [x1-C-w]  -  [x1-C-z] ),

m2 = 1 when x2 carries T, 0 when it carries Phi.  Since G = 2 K*C^2, a chain
u-K-y=C^2=w with y touching nothing else folds into G(u - w)/2.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .oracle_kernels import KernelSet

EXT, INT, KV = "ext", "int", "kv"
_FIELDS = {
    EXT: {0: "sq", 1: "phi", 2: None},
    INT: {1: "tri", 2: "sq", 3: "phi", 4: None},
}
_FIELD_COUNT = {"sq": 2, "phi": 1, "tri": 3, None: 0}
MAX_TERMS = 20_000
MAX_RESIDUAL_VERTICES = 3


class GraphError(ValueError):
    """The graph violates the structural rules of the expansion."""


@dataclass(frozen=True)
class IbpGraph:
    """One term of the expansion.

    roles[v] is "ext", "int" or "kv"; external vertices come first and vertex
    v < k is attached to the point y_{v+1}.  c_edges and g_edges are sorted
    vertex pairs (a multiset); k_edges are (v, y) with y a resolvent vertex.
    half_power h means the term carries N^{-h/2}.
    """

    roles: tuple[str, ...]
    c_edges: tuple[tuple[int, int], ...] = ()
    k_edges: tuple[tuple[int, int], ...] = ()
    g_edges: tuple[tuple[int, int], ...] = ()
    coefficient: Fraction = Fraction(1)
    half_power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c_edges", tuple(sorted(tuple(sorted(e)) for e in self.c_edges)))
        object.__setattr__(self, "g_edges", tuple(sorted(tuple(sorted(e)) for e in self.g_edges)))
        object.__setattr__(self, "k_edges", tuple(sorted(tuple(e) for e in self.k_edges)))
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))

    # -- structure -----------------------------------------------------------

    @property
    def k(self) -> int:
        return sum(1 for r in self.roles if r == EXT)

    @property
    def power(self) -> Fraction:
        """Exponent of 1/N (a half-integer)."""
        return Fraction(self.half_power, 2)

    @property
    def special_vertices(self) -> list[int]:
        return [v for v, r in enumerate(self.roles) if r == EXT]

    @property
    def internal_vertices(self) -> list[int]:
        return [v for v, r in enumerate(self.roles) if r == INT]

    def degrees(self) -> list[int]:
        d = [0] * len(self.roles)
        for a, b in self.c_edges:
            d[a] += 1
            d[b] += 1
        for a, b in self.g_edges:
            d[a] += 2
            d[b] += 2
        for v, _ in self.k_edges:
            d[v] += 2
        return d

    def fields(self) -> list[str | None]:
        out = []
        for role, d in zip(self.roles, self.degrees()):
            if role == KV:
                out.append(None)
            else:
                out.append(_FIELDS[role].get(d, "invalid"))
        return out

    @property
    def n_phi(self) -> int:
        """Number of field legs; 4 l + 2 k - sum of effective degrees over non-resolvent vertices."""
        return sum(_FIELD_COUNT.get(f, 0) for f in self.fields())

    @property
    def n_g(self) -> int:
        """Number of :Phi^2: factors, counting :Phi_i Phi^2: as one."""
        return sum(1 for f in self.fields() if f in ("sq", "tri"))

    def odd_vertices(self) -> list[int]:
        return [v for v, f in enumerate(self.fields()) if f in ("phi", "tri")]

    @property
    def parity_class(self) -> str:
        n = len(self.odd_vertices())
        return "class1" if n == 0 else "class2" if n == 2 else "invalid"

    @property
    def closed(self) -> bool:
        return self.n_phi == 0

    def with_term(self, coefficient, half_power: int) -> "IbpGraph":
        return replace(self, coefficient=Fraction(coefficient), half_power=half_power)

    def signature(self) -> str:
        """Readable description, stable for isomorphic graphs only up to vertex order."""
        parts = [f"{''.join(r[0] for r in self.roles)}"]
        parts += [f"C{a}-{b}" for a, b in self.c_edges]
        parts += [f"K{a}>{b}" for a, b in self.k_edges]
        parts += [f"G{a}-{b}" for a, b in self.g_edges]
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "roles": list(self.roles),
            "c_edges": [list(e) for e in self.c_edges],
            "k_edges": [list(e) for e in self.k_edges],
            "g_edges": [list(e) for e in self.g_edges],
            "coefficient": str(self.coefficient),
            "half_power": self.half_power,
        }


def start_graph(k: int) -> IbpGraph:
    """k external vertices and no edges: the graph of E[prod Q1(y_j)]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return IbpGraph(roles=(EXT,) * k)


def validate(g: IbpGraph) -> bool:
    """Degree bounds, no self-loops, resolvent vertices well formed, zero or two odd vertices."""
    try:
        _check(g)
    except GraphError:
        return False
    return True


def _check(g: IbpGraph) -> None:
    nv = len(g.roles)
    for r in g.roles:
        if r not in (EXT, INT, KV):
            raise GraphError(f"unknown role {r!r}")
    ext = [v for v, r in enumerate(g.roles) if r == EXT]
    if ext != list(range(len(ext))):
        raise GraphError("external vertices must come first")
    for a, b in g.c_edges + g.g_edges + g.k_edges:
        if not (0 <= a < nv and 0 <= b < nv):
            raise GraphError("edge endpoint out of range")
        if a == b:
            raise GraphError("self-loop")
    for v, y in g.k_edges:
        if g.roles[y] != KV or g.roles[v] == KV:
            raise GraphError("K edges run from a field vertex to a resolvent vertex")
    kin = Counter(y for _, y in g.k_edges)
    cdeg = Counter()
    for a, b in g.c_edges:
        cdeg[a] += 1
        cdeg[b] += 1
    for v, r in enumerate(g.roles):
        if r == KV and (kin[v] != 1 or cdeg[v] != 2 or any(v in e for e in g.g_edges)):
            raise GraphError(f"resolvent vertex {v} must have one incoming K edge and two C edges")
    if any(f == "invalid" for f in g.fields()):
        raise GraphError("vertex degree out of range")
    if g.parity_class == "invalid":
        raise GraphError("a valid graph has zero or two odd-degree vertices")


# -- rewriting ---------------------------------------------------------------


def _add_vertex(roles: tuple[str, ...], role: str) -> tuple[tuple[str, ...], int]:
    return roles + (role,), len(roles)


def _distinguished_sq(g: IbpGraph) -> int:
    fields = g.fields()
    sq = [v for v, f in enumerate(fields) if f == "sq"]
    if not sq:
        raise GraphError("no :Phi^2: vertex to expand")
    ext = [v for v in sq if g.roles[v] == EXT]
    return (ext or sq)[0]


def class1_identity(g: IbpGraph) -> list[tuple[str, IbpGraph, tuple[tuple[int, int], ...]]]:
    """Terms of the class-1 identity before K is applied, tagged by branch.

    Each entry is (tag, graph, emitted) where emitted lists the C edges added
    at the distinguished vertex v.  Tags: "lhs" (the C^2 convolution term on
    the left side), "pair", "conv", "q1", "q2", "q4".  Coefficients and powers
    already include those of g.
    """
    _check(g)
    if g.parity_class != "class1" or g.n_phi == 0:
        raise GraphError("class-1 rewrite needs a class-1 graph with fields")
    v = _distinguished_sq(g)
    fields = g.fields()
    W = [w for w, f in enumerate(fields) if f == "sq" and w != v]
    c, h = g.coefficient, g.half_power
    out = []

    def emit(tag, roles, extra, coef, dh):
        extra = tuple(extra)
        out.append((tag, replace(g, roles=roles, c_edges=g.c_edges + extra,
                                 coefficient=c * coef, half_power=h + dh), extra))

    roles, z = _add_vertex(g.roles, INT)
    emit("lhs", roles, [(v, z), (v, z)], 1, 0)
    for w in W:
        emit("pair", g.roles, [(v, w), (v, w)], 2, 0)
    emit("conv", roles, [(v, z), (v, z)], -2, 2)
    for i, w in enumerate(W):
        for u in W[i + 1:]:
            emit("q1", g.roles, [(v, w), (v, u)], 8, 1)
    for w in W:
        emit("q2", roles, [(v, w), (v, z)], -4, 1)
    roles2, z2 = _add_vertex(roles, INT)
    emit("q4", roles2, [(v, z), (v, z2)], 1, 1)
    return out


def rewrite_class1(g: IbpGraph) -> list[IbpGraph]:
    """Expand a class-1 graph at its distinguished X vertex and resolve with K.

    The edges emitted at v move to a new resolvent vertex y and v gains the
    K edge (v, y).
    """
    v = _distinguished_sq(g)
    out = []
    for tag, t, emitted in class1_identity(g):
        if tag == "lhs":
            continue
        roles, y = _add_vertex(t.roles, KV)
        moved = tuple((y, b if a == v else a) for a, b in emitted)
        out.append(replace(t, roles=roles, c_edges=g.c_edges + moved, k_edges=t.k_edges + ((v, y),)))
    return [fold(x) for x in out]


def rewrite_class2(g: IbpGraph) -> list[IbpGraph]:
    """Integration by parts at the first odd vertex of a class-2 graph."""
    _check(g)
    if g.parity_class != "class2":
        raise GraphError("class-2 rewrite needs exactly two odd vertices")
    x1, x2 = g.odd_vertices()
    fields = g.fields()
    c, h = g.coefficient, g.half_power
    out = []
    sigma = replace(g, c_edges=g.c_edges + ((x1, x2),))
    out.append(sigma)
    if fields[x2] == "tri":
        out.append(sigma.with_term(2 * c, h + 2))
    for w, f in enumerate(fields):
        if f == "sq" and w != x1:
            out.append(replace(g, c_edges=g.c_edges + ((x1, w),), coefficient=2 * c, half_power=h + 1))
    roles, z = _add_vertex(g.roles, INT)
    out.append(replace(g, roles=roles, c_edges=g.c_edges + ((x1, z),), coefficient=-c, half_power=h + 1))
    return [fold(x) for x in out]


def sigma(g: IbpGraph) -> IbpGraph:
    """Join the two odd vertices of a class-2 graph by a C edge."""
    _check(g)
    if g.parity_class != "class2":
        raise GraphError("sigma is defined on class-2 graphs")
    x1, x2 = g.odd_vertices()
    return replace(g, c_edges=g.c_edges + ((x1, x2),))


def tadpole_substitute(g: IbpGraph) -> list[IbpGraph]:
    """Replace the lone X factor of a graph with n_Phi = 2 by the Phi2 identity.

    E[X] (1 + (1 + 2/N) C^2^(0)) = N^{-1/2} E[(C*T)^2]; applying K gives the
    two-triple graph at one extra power of N^{-1/2} plus a -2/N copy of g.
    """
    _check(g)
    fields = g.fields()
    if g.parity_class != "class1" or [f for f in fields if f is not None] != ["sq"]:
        raise GraphError("no isolated :Phi^2: factor present")
    return rewrite_class1(g)


def fold(g: IbpGraph) -> IbpGraph:
    """Replace every chain u-K-y=C^2=w by a G edge u-w with half the coefficient."""
    changed = True
    while changed:
        changed = False
        for v, y in g.k_edges:
            cy = [e for e in g.c_edges if y in e]
            if len(cy) == 2 and cy[0] == cy[1]:
                w = cy[0][0] if cy[0][1] == y else cy[0][1]
                if w == v:
                    continue
                c_edges = list(g.c_edges)
                c_edges.remove(cy[0])
                c_edges.remove(cy[1])
                k_edges = [e for e in g.k_edges if e != (v, y)]
                g = _drop_vertex(replace(g, c_edges=tuple(c_edges), k_edges=tuple(k_edges),
                                         g_edges=g.g_edges + ((v, w),), coefficient=g.coefficient / 2), y)
                changed = True
                break
    return g


def _drop_vertex(g: IbpGraph, y: int) -> IbpGraph:
    def m(a):
        return a - 1 if a > y else a

    roles = g.roles[:y] + g.roles[y + 1:]
    return replace(g, roles=roles,
                   c_edges=tuple((m(a), m(b)) for a, b in g.c_edges),
                   k_edges=tuple((m(a), m(b)) for a, b in g.k_edges),
                   g_edges=tuple((m(a), m(b)) for a, b in g.g_edges))


# -- canonicalisation --------------------------------------------------------


def _nx(g: IbpGraph) -> nx.Graph:
    G = nx.Graph()
    for v, r in enumerate(g.roles):
        G.add_node(v, lab=f"ext{v}" if r == EXT else r)
    kinds: dict[tuple[int, int], list[str]] = defaultdict(list)
    for a, b in g.c_edges:
        kinds[(a, b)].append("C")
    for a, b in g.g_edges:
        kinds[(a, b)].append("G")
    for a, b in g.k_edges:
        kinds[tuple(sorted((a, b)))].append("K")
    for (a, b), ks in kinds.items():
        G.add_edge(a, b, kinds=",".join(sorted(ks)))
    return G


def graph_hash(g: IbpGraph) -> str:
    return nx.weisfeiler_lehman_graph_hash(_nx(g), node_attr="lab", edge_attr="kinds", iterations=4)


def isomorphic(g1: IbpGraph, g2: IbpGraph) -> bool:
    if len(g1.roles) != len(g2.roles) or Counter(g1.roles) != Counter(g2.roles):
        return False
    return nx.is_isomorphic(_nx(g1), _nx(g2),
                            node_match=lambda a, b: a["lab"] == b["lab"],
                            edge_match=lambda a, b: a["kinds"] == b["kinds"])


def merge_terms(terms: Iterable[IbpGraph]) -> list[IbpGraph]:
    """Add the coefficients of isomorphic graphs at equal power; drop cancelled terms."""
    buckets: dict[tuple[int, str], list[IbpGraph]] = defaultdict(list)
    order: list[tuple[int, str]] = []
    for t in terms:
        key = (t.half_power, graph_hash(t))
        bucket = buckets[key]
        if not bucket:
            order.append(key)
        for i, rep in enumerate(bucket):
            if isomorphic(rep, t):
                bucket[i] = rep.with_term(rep.coefficient + t.coefficient, rep.half_power)
                break
        else:
            bucket.append(t)
    out = [t for key in order for t in buckets[key] if t.coefficient != 0]
    return out


# -- expansion ---------------------------------------------------------------


@dataclass
class ExpansionResult:
    k: int
    order: int
    closed_terms: dict[Fraction, list[IbpGraph]] = field(default_factory=dict)
    remainder_terms: list[IbpGraph] = field(default_factory=list)

    @property
    def powers(self) -> list[Fraction]:
        return sorted(self.closed_terms)

    def lowest_power(self) -> Fraction | None:
        return min(self.closed_terms) if self.closed_terms else None

    def value(self, kernels: KernelSet, points: Sequence, power: Fraction | None = None,
              max_residual: int = MAX_RESIDUAL_VERTICES) -> float:
        """Sum of the closed terms (at one power, or all) evaluated at the points; N factors excluded."""
        total = 0.0
        for p, terms in self.closed_terms.items():
            if power is not None and p != power:
                continue
            total += sum(float(t.coefficient) * evaluate(t, kernels, points, max_residual) for t in terms)
        return total


def expand(k: int, p: int) -> ExpansionResult:
    """Closed graphs of f_k up to N^{-p} (even k) or N^{-p-1/2} (odd k), plus the open remainder."""
    if k < 1 or k > 4 or p not in (0, 1):
        raise ValueError(f"expansion supported for 1 <= k <= 4 and p in {{0, 1}}, got k={k}, p={p}")
    target = 2 * p + (k % 2)
    result = ExpansionResult(k, p)
    open_terms = [start_graph(k)]
    closed: list[IbpGraph] = []
    remainder: list[IbpGraph] = []
    while open_terms:
        children: list[IbpGraph] = []
        for t in open_terms:
            if t.closed:
                (closed if t.half_power <= target else remainder).append(t)
            elif t.half_power > target:
                remainder.append(t)
            elif t.parity_class == "class1":
                children.extend(rewrite_class1(t))
            else:
                children.extend(rewrite_class2(t))
        open_terms = merge_terms(children)
        if len(open_terms) + len(closed) + len(remainder) > MAX_TERMS:
            raise ValueError(f"term count exceeded the guard {MAX_TERMS} for k={k}, p={p}")
    for t in merge_terms(closed):
        result.closed_terms.setdefault(t.power, []).append(t)
    result.remainder_terms = merge_terms(remainder)
    want_odd = k % 2 == 1
    for pw in result.closed_terms:
        if (pw.denominator == 2) != want_odd:
            raise AssertionError(f"parity violated: closed term at power {pw} for k={k}")
    return result


# -- evaluation --------------------------------------------------------------


def _tables(kernels: KernelSet) -> dict[str, np.ndarray]:
    return {"C": kernels.C.values, "K": kernels.K_full.values, "G": kernels.G.values}


def _conv(f: np.ndarray, g: np.ndarray, eps: float) -> np.ndarray:
    # (f*g)(x) = eps^2 sum_y f(x-y) g(y)
    return np.real(np.fft.ifft2(np.fft.fft2(f) * np.fft.fft2(g))) * eps**2


def evaluate(g: IbpGraph, kernels: KernelSet, points: Sequence, max_residual: int = MAX_RESIDUAL_VERTICES) -> float:
    """Integrate the kernel product of a graph with external vertices at the given grid points.

    Integrated vertices of degree <= 2 are removed by kernel composition;
    whatever remains (at most ``max_residual`` vertices) is summed directly.
    The returned value excludes the coefficient, the power of N and, for
    graphs that are not closed, the expectation of the remaining fields.
    """
    _check(g)
    pts = [tuple(int(c) for c in p) for p in points]
    if len(pts) != g.k:
        raise ValueError(f"graph has {g.k} external vertices, got {len(pts)} points")
    spec = kernels.spec
    n, eps = spec.n, spec.eps
    tabs = _tables(kernels)
    # simple weighted graph: (a, b) -> pointwise product of edge kernels, as a function of x_a - x_b
    edges: dict[tuple[int, int], np.ndarray] = {}

    def add(a, b, t):
        key = (a, b) if a < b else (b, a)
        edges[key] = edges[key] * t if key in edges else t.copy()

    for a, b in g.c_edges:
        add(a, b, tabs["C"])
    for a, b in g.g_edges:
        add(a, b, tabs["G"])
    for a, b in g.k_edges:
        add(a, b, tabs["K"])
    scalar = 1.0
    alive = set(v for v, r in enumerate(g.roles) if r != EXT)

    def nbrs(v):
        return [(key, key[1] if key[0] == v else key[0]) for key in edges if v in key]

    progress = True
    while progress:
        progress = False
        for v in sorted(alive):
            nb = nbrs(v)
            if len(nb) == 0:
                alive.discard(v)
                progress = True
            elif len(nb) == 1:
                key, _ = nb[0]
                scalar *= eps**2 * float(np.sum(edges.pop(key)))
                alive.discard(v)
                progress = True
            elif len(nb) == 2:
                (k1, a), (k2, b) = nb
                f = edges.pop(k1)
                h = edges.pop(k2)
                # f(x_a - x_v) h(x_v - x_b) integrated over x_v; kernels are even
                add(a, b, _conv(f, h, eps))
                alive.discard(v)
                progress = True
            if progress:
                break
    ext_edges = [(key, t) for key, t in edges.items() if key[0] not in alive and key[1] not in alive]
    for (a, b), t in ext_edges:
        d = (pts[a][0] - pts[b][0]) % n, (pts[a][1] - pts[b][1]) % n
        scalar *= float(t[d])
        del edges[(a, b)]
    if not alive:
        return scalar
    residual = sorted(alive)
    if len(residual) > max_residual:
        raise GraphError(f"{len(residual)} residual vertices exceed the guard {max_residual}")
    idx = {v: i for i, v in enumerate(residual)}
    grid = np.stack(np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1).reshape(-1, 2)
    operands, subs = [], []
    letters = "abcdefgh"
    for (a, b), t in edges.items():
        if a in idx and b in idx:
            d = (grid[:, None, :] - grid[None, :, :]) % n
            operands.append(t[d[..., 0], d[..., 1]])
            subs.append(letters[idx[a]] + letters[idx[b]])
        else:
            e, z = (a, b) if b in idx else (b, a)
            d = (np.asarray(pts[e]) - grid) % n
            operands.append(t[d[:, 0], d[:, 1]])
            subs.append(letters[idx[z]])
    expr = ",".join(subs) + "->"
    val = np.einsum(expr, *operands, optimize=True) if operands else float(n * n) ** len(residual)
    return scalar * float(val) * eps ** (2 * len(residual))
