"""Test graphs, graph monomials and injective traces.

A test graph is a finite multi-digraph whose edges carry a variable label and
a star flag.  Loops and parallel edges are allowed.  Evaluating a monomial
``g`` in a family of matrices sums, over vertex maps ``phi``, the product of
``X_label(phi(tar), phi(src))`` over the edges; the injective trace restricts
the sum to injective maps.

Colored components are the maximal connected single-family subgraphs with at
least one edge.  The graph of colored components (GCC) is the bipartite
graph between colored components and the vertices shared by several of
them; whether it is a tree drives everything in :mod:`freediag.freesum`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceeded, ParameterError

__all__ = [
    "Edge",
    "TestGraph",
    "GraphMonomial",
    "VertexPartition",
    "Amalgamation",
    "ColoredComponent",
    "GccView",
    "colored_components",
    "gcc",
    "eta",
    "eta_gcc",
    "gcc_is_tree",
    "quotient",
    "enumerate_partitions",
    "enumerate_constrained_partitions",
    "enumerate_amalgamations",
    "eval_monomial",
    "injective_trace",
    "normalized_injective_trace_multi",
    "glue_at_root",
    "cycle_monomial",
    "parse_graph",
    "format_graph",
    "DEFAULT_VERTEX_CAP",
    "DEFAULT_MAP_CAP",
]

DEFAULT_VERTEX_CAP = 10
DEFAULT_MAP_CAP = 10**8

Vertex = Hashable


@dataclass(frozen=True)
class Edge:
    src: Vertex
    tar: Vertex
    label: str
    star: bool = False

    @property
    def is_loop(self) -> bool:
        return self.src == self.tar


class TestGraph:
    """Finite labeled multi-digraph.

    Parameters
    ----------
    vertices : iterable
        Vertex ids (any hashable); order is kept.
    edges : iterable of Edge or tuples ``(src, tar, label[, star])``
    families : mapping label -> family, optional
        Labels sharing a family form common colored components.  By default
        every label is its own family.
    """

    __test__ = False  # not a pytest class

    def __init__(self, vertices: Iterable[Vertex], edges: Iterable = (), families: Optional[Mapping[str, str]] = None):
        self.vertices: Tuple[Vertex, ...] = tuple(dict.fromkeys(vertices))
        es = []
        for e in edges:
            if not isinstance(e, Edge):
                e = Edge(*e)
            es.append(e)
        self.edges: Tuple[Edge, ...] = tuple(es)
        vs = set(self.vertices)
        for e in self.edges:
            if e.src not in vs or e.tar not in vs:
                raise ParameterError(f"edge {e} has an undeclared endpoint")
        self.families: Dict[str, str] = dict(families or {})

    def family(self, label: str) -> str:
        return self.families.get(label, label)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(e.label for e in self.edges))

    def connected_components(self) -> List[frozenset]:
        uf = _UnionFind(self.vertices)
        for e in self.edges:
            uf.union(e.src, e.tar)
        return uf.groups()

    def is_connected(self) -> bool:
        return len(self.connected_components()) <= 1

    def relabel(self, mapping: Mapping[Vertex, Vertex]) -> "TestGraph":
        return TestGraph((mapping[v] for v in self.vertices),
                         (Edge(mapping[e.src], mapping[e.tar], e.label, e.star) for e in self.edges),
                         self.families)

    def __repr__(self) -> str:
        return f"TestGraph(|V|={len(self.vertices)}, |E|={len(self.edges)})"


@dataclass(frozen=True)
class GraphMonomial:
    graph: TestGraph
    v_in: Vertex
    v_out: Vertex
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.check:
            vs = set(self.graph.vertices)
            if self.v_in not in vs or self.v_out not in vs:
                raise ParameterError("roots must be vertices of the graph")
            if not self.graph.is_connected():
                raise ParameterError("a graph monomial must be connected")

    @property
    def vertices(self):
        return self.graph.vertices

    @property
    def edges(self):
        return self.graph.edges


@dataclass(frozen=True)
class VertexPartition:
    blocks: Tuple[frozenset, ...]

    @classmethod
    def from_blocks(cls, blocks) -> "VertexPartition":
        bl = tuple(frozenset(b) for b in blocks)
        if any(len(b) == 0 for b in bl):
            raise ParameterError("partition blocks must be nonempty")
        if bl and sum(len(b) for b in bl) != len(frozenset().union(*bl)):
            raise ParameterError("partition blocks overlap")
        return cls(bl)

    @classmethod
    def from_labels(cls, vertices: Sequence[Vertex], labels: Sequence[int]) -> "VertexPartition":
        k = max(labels) + 1 if len(labels) else 0
        groups = [[] for _ in range(k)]
        for v, l in zip(vertices, labels):
            groups[l].append(v)
        return cls(tuple(frozenset(g) for g in groups))

    @classmethod
    def singletons(cls, vertices) -> "VertexPartition":
        return cls(tuple(frozenset([v]) for v in vertices))

    def block_of(self) -> Dict[Vertex, int]:
        return {v: i for i, b in enumerate(self.blocks) for v in b}

    def covers(self, vertices) -> bool:
        return frozenset().union(*self.blocks) == frozenset(vertices) if self.blocks else not list(vertices)

    def is_identity(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class Amalgamation:
    partition: VertexPartition
    monomial: GraphMonomial = field(repr=False, compare=False)

    @property
    def blocks(self):
        return self.partition.blocks


@dataclass(frozen=True)
class ColoredComponent:
    family: str
    vertices: frozenset
    edges: Tuple[int, ...]


@dataclass(frozen=True)
class GccView:
    cc_nodes: Tuple[ColoredComponent, ...]
    connector_nodes: Tuple[Vertex, ...]
    bip_edges: Tuple[Tuple[Vertex, int], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.cc_nodes) + len(self.connector_nodes)

    def degree(self, v: Vertex) -> int:
        return sum(1 for c, _ in self.bip_edges if c == v)


class _UnionFind:
    def __init__(self, items=()):
        self.parent = {x: x for x in items}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return root

    def union(self, x, y) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True

    def groups(self) -> List[frozenset]:
        out: Dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return [frozenset(v) for v in out.values()]


# ---------------------------------------------------------------------------
# colored components and the GCC
# ---------------------------------------------------------------------------

def colored_components(T: TestGraph) -> List[ColoredComponent]:
    """Maximal connected single-family subgraphs with at least one edge."""
    by_family: Dict[str, List[int]] = {}
    for k, e in enumerate(T.edges):
        by_family.setdefault(T.family(e.label), []).append(k)
    out = []
    for fam, idx in by_family.items():
        uf = _UnionFind()
        for k in idx:
            e = T.edges[k]
            uf.add(e.src)
            uf.add(e.tar)
            uf.union(e.src, e.tar)
        comp_edges: Dict = {}
        for k in idx:
            comp_edges.setdefault(uf.find(T.edges[k].src), []).append(k)
        for root, ks in comp_edges.items():
            vs = frozenset(x for x in uf.parent if uf.find(x) == root)
            out.append(ColoredComponent(fam, vs, tuple(ks)))
    return out


def gcc(T) -> GccView:
    """Graph of colored components of a connected test graph."""
    if isinstance(T, GraphMonomial):
        T = T.graph
    if not T.edges:
        raise ParameterError("a graph without edges has no colored component")
    if not T.is_connected():
        raise ParameterError("the GCC is defined for connected test graphs")
    ccs = colored_components(T)
    member: Dict[Vertex, List[int]] = {}
    for i, c in enumerate(ccs):
        for v in c.vertices:
            member.setdefault(v, []).append(i)
    connectors = tuple(v for v in T.vertices if len(member.get(v, ())) >= 2)
    bip = tuple((v, i) for v in connectors for i in member[v])
    return GccView(tuple(ccs), connectors, bip)


def eta(V_count: int, E_count: int) -> int:
    """Euler defect ``|V| - |E| - 1`` of a connected graph."""
    return V_count - E_count - 1


def eta_gcc(G: GccView) -> int:
    """``eta`` of the bipartite GCC: ``|V_cc| + |V_co| - |bip edges| - 1``."""
    return eta(len(G.cc_nodes) + len(G.connector_nodes), len(G.bip_edges))


def gcc_is_tree(T) -> bool:
    """Tree test of the GCC by connectivity and edge count."""
    G = gcc(T)
    nodes = [("cc", i) for i in range(len(G.cc_nodes))] + [("co", v) for v in G.connector_nodes]
    uf = _UnionFind(nodes)
    for v, i in G.bip_edges:
        uf.union(("co", v), ("cc", i))
    connected = len(uf.groups()) == 1
    return connected and len(G.bip_edges) == len(nodes) - 1


# ---------------------------------------------------------------------------
# quotients and partitions
# ---------------------------------------------------------------------------

def quotient(g, pi) -> GraphMonomial:
    """Identify the vertices in each block of ``pi``.

    New vertices are the block indices ``0..len(pi)-1`` in block order.  Edge
    labels, stars and multiplicities are kept.
    """
    if not isinstance(pi, VertexPartition):
        pi = VertexPartition.from_blocks(pi)
    graph = g.graph if isinstance(g, GraphMonomial) else g
    where = pi.block_of()
    if set(where) != set(graph.vertices):
        raise ParameterError("partition does not cover the vertex set")
    T = TestGraph(range(len(pi.blocks)),
                  [Edge(where[e.src], where[e.tar], e.label, e.star) for e in graph.edges],
                  graph.families)
    if isinstance(g, GraphMonomial):
        return GraphMonomial(T, where[g.v_in], where[g.v_out], check=False)
    return T


def _rgs(n: int) -> Iterator[List[int]]:
    """Restricted growth strings of length ``n``."""
    if n == 0:
        yield []
        return
    a = [0] * n
    m = [0] * n  # m[i] = max(a[:i+1])

    def rec(i):
        if i == n:
            yield a
            return
        for x in range(m[i - 1] + 2):
            a[i] = x
            m[i] = max(m[i - 1], x)
            yield from rec(i + 1)

    a[0] = 0
    m[0] = 0
    yield from rec(1)


def enumerate_partitions(vertex_set, cap: int = DEFAULT_VERTEX_CAP) -> Iterator[VertexPartition]:
    """All set partitions of ``vertex_set`` (Bell-number many)."""
    vs = list(vertex_set)
    if len(vs) > cap:
        raise BudgetExceeded(f"{len(vs)} vertices exceed the partition cap {cap}")
    for labels in _rgs(len(vs)):
        yield VertexPartition.from_labels(vs, labels)


def enumerate_constrained_partitions(vertex_set, groups, cap: int = DEFAULT_VERTEX_CAP,
                                     include_identity: bool = True) -> Iterator[VertexPartition]:
    """Partitions whose every block meets each group in at most one vertex.

    Generated by restricted growth with conflict pruning, so rejected
    partitions are never materialized.
    """
    vs = list(vertex_set)
    if len(vs) > cap:
        raise BudgetExceeded(f"{len(vs)} vertices exceed the partition cap {cap}")
    idx = {v: k for k, v in enumerate(vs)}
    conflict = [set() for _ in vs]
    for grp in groups:
        gi = [idx[v] for v in grp if v in idx]
        for a in gi:
            for b in gi:
                if a != b:
                    conflict[a].add(b)
    n = len(vs)
    labels = [0] * n
    blocks: List[List[int]] = []

    def rec(i):
        if i == n:
            if include_identity or len(blocks) != n:
                yield VertexPartition.from_labels(vs, labels)
            return
        for b, members in enumerate(blocks):
            if conflict[i].isdisjoint(members):
                members.append(i)
                labels[i] = b
                yield from rec(i + 1)
                members.pop()
        blocks.append([i])
        labels[i] = len(blocks) - 1
        yield from rec(i + 1)
        blocks.pop()

    yield from rec(0)


def enumerate_amalgamations(g, include_identity: bool = True, cap: int = DEFAULT_VERTEX_CAP) -> Iterator[Amalgamation]:
    """Partitions taking at most one vertex from each colored component per block."""
    graph = g.graph if isinstance(g, GraphMonomial) else g
    groups = [c.vertices for c in colored_components(graph)]
    for pi in enumerate_constrained_partitions(graph.vertices, groups, cap, include_identity):
        yield Amalgamation(pi, g)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _as_array(X):
    from .models import HermitianMatrix

    if isinstance(X, HermitianMatrix):
        return X.data
    return X


def _edge_matrix(assignment, e: Edge):
    X = _as_array(assignment[e.label])
    if e.star:
        X = X.conj().T
    return X


def _dense(X):
    return X.toarray() if sp.issparse(X) else np.asarray(X)


_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def eval_monomial(g: GraphMonomial, assignment: Mapping, i: int, j: int,
                  budget: int = DEFAULT_MAP_CAP) -> complex:
    """Unrestricted evaluation ``g(X)(i, j)`` with ``phi(v_out) = i`` and ``phi(v_in) = j``."""
    vs = list(g.vertices)
    if not g.edges:
        # a connected monomial without edges is a single vertex
        return complex(1.0 if i == j else 0.0)
    N = _as_array(assignment[g.edges[0].label]).shape[0]
    free = len(set(vs) - {g.v_in, g.v_out})
    if N ** free > budget:
        raise BudgetExceeded(f"N^{free} = {N ** free} maps exceed the budget {budget}")
    if len(vs) > len(_LETTERS):
        raise BudgetExceeded("too many vertices for einsum evaluation")
    if g.v_in == g.v_out and i != j:
        return 0j
    letter = {v: _LETTERS[k] for k, v in enumerate(vs)}
    ops, subs = [], []
    for e in g.edges:
        X = _dense(_edge_matrix(assignment, e))
        if e.is_loop:
            ops.append(np.diagonal(X))
            subs.append(letter[e.src])
        else:
            ops.append(X)
            subs.append(letter[e.tar] + letter[e.src])
    ei = np.zeros(N)
    ei[i] = 1.0
    ops.append(ei)
    subs.append(letter[g.v_out])
    if g.v_in != g.v_out:
        ej = np.zeros(N)
        ej[j] = 1.0
        ops.append(ej)
        subs.append(letter[g.v_in])
    expr = ",".join(subs) + "->"
    return complex(np.einsum(expr, *ops, optimize=True))


@lru_cache(maxsize=256)
def _injective_table(pool: Tuple[int, ...], k: int) -> np.ndarray:
    """All ordered k-tuples of distinct elements of ``pool`` as an array."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.intp)
    return np.array(list(itertools.permutations(pool, k)), dtype=np.intp)


def _falling(n: int, k: int) -> int:
    out = 1
    for t in range(k):
        out *= max(n - t, 0)
    return out


_VECTORIZE_LIMIT = 200_000


def _infer_N(graph: TestGraph, assignment) -> int:
    for e in graph.edges:
        return _as_array(assignment[e.label]).shape[0]
    for X in assignment.values():
        return _as_array(X).shape[0]
    raise ParameterError("cannot infer N")


def _injective_sum(graph: TestGraph, assignment, fixed: Mapping[Vertex, int], budget: int,
                   method: str = "auto") -> complex:
    """Sum over injective ``phi`` extending ``fixed`` of the edge product."""
    N = _infer_N(graph, assignment)
    fixed_vals = list(fixed.values())
    if len(set(fixed_vals)) != len(fixed_vals):
        return 0j
    free = [v for v in graph.vertices if v not in fixed]
    count = _falling(N - len(fixed), len(free))
    if count == 0:
        return 0j
    if method == "auto":
        method = "vector" if count <= _VECTORIZE_LIMIT else "dfs"
    if method == "vector":
        if count > budget:
            raise BudgetExceeded(f"{count} injective maps exceed the budget {budget}")
        return _injective_sum_vector(graph, assignment, fixed, free, N)
    return _injective_sum_dfs(graph, assignment, fixed, free, N, budget, count)


def _injective_sum_vector(graph, assignment, fixed, free, N) -> complex:
    pool = tuple(x for x in range(N) if x not in set(fixed.values()))
    table = _injective_table(pool, len(free))
    cols = {v: table[:, k] for k, v in enumerate(free)}
    for v, x in fixed.items():
        cols[v] = np.full(table.shape[0], x, dtype=np.intp)
    prod = np.ones(table.shape[0], dtype=complex)
    dense_cache = {}
    for e in graph.edges:
        key = (e.label, e.star)
        if key not in dense_cache:
            dense_cache[key] = _dense(_edge_matrix(assignment, e))
        X = dense_cache[key]
        prod *= X[cols[e.tar], cols[e.src]]
    return complex(prod.sum())


def _injective_sum_dfs(graph, assignment, fixed, free, N, budget, count) -> complex:
    # order free vertices so that each one is adjacent to an earlier one when possible
    placed = set(fixed)
    order = []
    remaining = list(free)
    adj: Dict[Vertex, List[int]] = {v: [] for v in graph.vertices}
    for k, e in enumerate(graph.edges):
        adj[e.src].append(k)
        adj[e.tar].append(k)
    while remaining:
        pick = None
        for v in remaining:
            if any((graph.edges[k].src in placed) or (graph.edges[k].tar in placed) for k in adj[v]):
                pick = v
                break
        if pick is None:
            pick = remaining[0]
        remaining.remove(pick)
        placed.add(pick)
        order.append(pick)

    mats = {}
    for e in graph.edges:
        key = (e.label, e.star)
        if key not in mats:
            X = _edge_matrix(assignment, e)
            mats[key] = sp.csr_matrix(X) if sp.issparse(X) else np.asarray(X)
    sparse_keys = {k for k, X in mats.items() if sp.issparse(X)}
    if not sparse_keys and count > budget:
        raise BudgetExceeded(f"{count} injective maps exceed the budget {budget}")
    # neighbor structures: out[key][x] = {y: X[y, x]}, inn[key][y] = {x: X[y, x]}
    col_nz = {}
    row_nz = {}
    for key, X in mats.items():
        csr = sp.csr_matrix(X)
        csc = sp.csc_matrix(X)
        row_nz[key] = [dict(zip(csr.indices[csr.indptr[y]:csr.indptr[y + 1]].tolist(),
                                csr.data[csr.indptr[y]:csr.indptr[y + 1]].tolist())) for y in range(N)]
        col_nz[key] = [dict(zip(csc.indices[csc.indptr[x]:csc.indptr[x + 1]].tolist(),
                                csc.data[csc.indptr[x]:csc.indptr[x + 1]].tolist())) for x in range(N)]

    phi = dict(fixed)
    used = set(fixed.values())
    # edges become checkable once both endpoints are placed
    pos = {v: -1 for v in fixed}
    for t, v in enumerate(order):
        pos[v] = t
    ready: List[List[Edge]] = [[] for _ in order]
    base = 1.0 + 0j
    for e in graph.edges:
        t = max(pos[e.src], pos[e.tar])
        if t < 0:
            base *= mats[(e.label, e.star)][phi[e.tar], phi[e.src]]
        else:
            ready[t].append(e)
    if base == 0:
        return 0j
    visited = [0]
    total = [0j]

    def candidates(t):
        v = order[t]
        best = None
        for e in ready[t]:
            key = (e.label, e.star)
            if key not in sparse_keys or e.is_loop:
                continue
            if e.src == v and e.tar in phi:
                cand = row_nz[key][phi[e.tar]].keys()
            elif e.tar == v and e.src in phi:
                cand = col_nz[key][phi[e.src]].keys()
            else:
                continue
            if best is None or len(cand) < len(best):
                best = cand
        return range(N) if best is None else best

    def rec(t, acc):
        if t == len(order):
            total[0] += acc
            return
        v = order[t]
        for x in candidates(t):
            if x in used:
                continue
            visited[0] += 1
            if visited[0] > budget:
                raise BudgetExceeded(f"injective enumeration visited more than {budget} maps")
            phi[v] = x
            val = acc
            for e in ready[t]:
                key = (e.label, e.star)
                X = mats[key]
                if key in sparse_keys:
                    w = row_nz[key][phi[e.tar]].get(phi[e.src], 0.0)
                else:
                    w = X[phi[e.tar], phi[e.src]]
                val = val * w
                if val == 0:
                    break
            if val != 0:
                used.add(x)
                rec(t + 1, val)
                used.discard(x)
            del phi[v]

    rec(0, base)
    return complex(total[0])


def injective_trace(g: GraphMonomial, assignment: Mapping, i: int, budget: int = DEFAULT_MAP_CAP,
                    method: str = "auto") -> complex:
    """Rooted injective trace ``tr0_i(g)``: injective maps with ``phi(v_in) = i``.

    Returns 0 when ``v_in != v_out``.
    """
    if g.v_in != g.v_out:
        return 0j
    return _injective_sum(g.graph, assignment, {g.v_in: int(i)}, budget, method)


def normalized_injective_trace_multi(T: TestGraph, assignment: Mapping, budget: int = DEFAULT_MAP_CAP,
                                     method: str = "auto") -> complex:
    """``N^{-K}`` times the sum over globally injective maps; ``K`` = #components."""
    if isinstance(T, GraphMonomial):
        T = T.graph
    N = _infer_N(T, assignment)
    K = len(T.connected_components())
    return _injective_sum(T, assignment, {}, budget, method) / N ** K


def glue_at_root(h: GraphMonomial, h2: GraphMonomial) -> GraphMonomial:
    """Disjoint union with the two roots identified.

    Vertices of ``h`` become ``(0, v)``, non-root vertices of ``h2`` become
    ``(1, v)``; the shared root is ``(0, h.v_in)``.
    """
    if h.v_in != h.v_out or h2.v_in != h2.v_out:
        raise ParameterError("glue_at_root needs monomials with v_in == v_out")
    root = (0, h.v_in)

    def m2(v):
        return root if v == h2.v_in else (1, v)

    verts = [(0, v) for v in h.vertices] + [(1, v) for v in h2.vertices if v != h2.v_in]
    edges = [Edge((0, e.src), (0, e.tar), e.label, e.star) for e in h.edges]
    edges += [Edge(m2(e.src), m2(e.tar), e.label, e.star) for e in h2.edges]
    fam = dict(h.graph.families)
    fam.update(h2.graph.families)
    return GraphMonomial(TestGraph(verts, edges, fam), root, root)


def cycle_monomial(m: int, f: Sequence[str]) -> GraphMonomial:
    """Directed m-cycle ``0 -> 1 -> ... -> m-1 -> 0``; edge k carries ``f[k]``."""
    if m < 1:
        raise ParameterError("cycle_monomial needs m >= 1")
    if len(f) != m:
        raise ParameterError("coloring length must equal m")
    edges = [Edge(k, (k + 1) % m, f[k]) for k in range(m)]
    return GraphMonomial(TestGraph(range(m), edges), 0, 0, check=False)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def _parse_id(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def parse_graph(text: str):
    """Parse the line format ``v <id>``, ``e <src> <tar> <label> <star>``, ``root <in> <out>``.

    ``star`` is ``1`` or ``*``.  Blank lines and ``#`` comments are ignored.
    Returns a :class:`GraphMonomial` when a ``root`` line is present, else a
    :class:`TestGraph`.
    """
    verts, edges, root = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v" and len(tok) == 2:
            verts.append(_parse_id(tok[1]))
        elif tok[0] == "e" and len(tok) in (4, 5):
            star = tok[4] if len(tok) == 5 else "1"
            if star not in ("1", "*"):
                raise ParameterError(f"line {lineno}: star must be 1 or *")
            edges.append(Edge(_parse_id(tok[1]), _parse_id(tok[2]), tok[3], star == "*"))
        elif tok[0] == "root" and len(tok) == 3:
            root = (_parse_id(tok[1]), _parse_id(tok[2]))
        else:
            raise ParameterError(f"line {lineno}: cannot parse {raw!r}")
    T = TestGraph(verts, edges)
    if root is None:
        return T
    return GraphMonomial(T, root[0], root[1])


def format_graph(g) -> str:
    graph = g.graph if isinstance(g, GraphMonomial) else g
    lines = [f"v {v}" for v in graph.vertices]
    lines += [f"e {e.src} {e.tar} {e.label} {'*' if e.star else '1'}" for e in graph.edges]
    if isinstance(g, GraphMonomial):
        lines.append(f"root {g.v_in} {g.v_out}")
    return "\n".join(lines) + "\n"
