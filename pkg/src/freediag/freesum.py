"""The amalgamated free sum of two matrices as a lazy rooted graph.

For a root ``x`` in ``[N]`` the vertices are alternating tuples
``(j1, ..., jn, tag)`` with ``x != j1``, ``j_k != j_{k+1}`` and
``tag in {'a', 'b'}``; the root itself is the empty tuple.  Tuples are stored
relative to the root (a vertex ``v`` is the python tuple ``v[:-1] + (tag,)``),
so moving the root is a pure relabeling.

Each vertex lies in exactly one a-component and one b-component, both of
size ``N``.  For a vertex ``w = (..., j_n, j_{n+1}, t)`` the t-component is
made of its parent ``(..., j_n, t')`` (or the root) and the siblings
``(..., j_n, k, t)`` with ``k != j_n``; the other component is the one
hanging below ``w`` itself.  The operator ``a`` acts inside a-components as
``<a delta_v, delta_w> = A(j(w), j(v))`` where ``j`` is the last index
(``Phi``), and ``b`` acts likewise inside b-components.  Diagonal entries
become loops at every vertex.

Everything is expanded lazily: neighbor lists are materialized on first
use and memoized per vertex.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceeded, ParameterError
from .models import HermitianMatrix
from . import traffic as tr

__all__ = [
    "FreeSumOperator",
    "DiagonalOperator",
    "Factor",
    "Ball",
    "component_a",
    "component_b",
    "component",
    "amplitude",
    "phi_project",
    "rooted_moments",
    "rooted_moment_walk",
    "rooted_moment_combinatorial",
    "moment_structure",
    "colored_girth",
    "colored_girths",
    "count_tree_vertices",
    "embed_diagonal",
    "check_centered_alternating",
    "injective_trace_freesum",
    "build_ball",
    "ROOT",
]

ROOT: Tuple = ()
DEFAULT_REACH_BUDGET = 5_000_000
_OTHER = {"a": "b", "b": "a"}


def _matrix(X):
    if isinstance(X, HermitianMatrix):
        return X.data
    return X


def _column_lists(X, tol: float = 0.0):
    """Per column j: python lists (rows, values) of the nonzero entries X[k, j]."""
    X = _matrix(X)
    csc = sp.csc_matrix(X)
    csc.eliminate_zeros()
    out = []
    ind, dat, ptr = csc.indices, csc.data, csc.indptr
    for j in range(csc.shape[0]):
        lo, hi = ptr[j], ptr[j + 1]
        rows = ind[lo:hi].tolist()
        vals = dat[lo:hi].tolist()
        if tol:
            keep = [(r, v) for r, v in zip(rows, vals) if abs(v) > tol]
            rows = [r for r, _ in keep]
            vals = [v for _, v in keep]
        out.append((rows, vals))
    return out


class _Shared:
    """Matrix data shared by the operators at every root."""

    def __init__(self, A, B):
        a, b = _matrix(A), _matrix(B)
        if a.shape != b.shape or a.shape[0] != a.shape[1]:
            raise ParameterError(f"A and B must be square of the same size, got {a.shape} and {b.shape}")
        self.N = a.shape[0]
        self.A, self.B = a, b
        self.cols = {"a": _column_lists(a), "b": _column_lists(b)}
        self.hermitian = _is_hermitian(a) and _is_hermitian(b)
        self.symmetric = _is_symmetric(a) and _is_symmetric(b)


def _is_hermitian(X) -> bool:
    if sp.issparse(X):
        d = X - X.conj().T
        return d.nnz == 0 or np.abs(d.data).max() == 0
    return bool(np.array_equal(X, np.conj(X).T))


def _is_symmetric(X) -> bool:
    if sp.issparse(X):
        d = X - X.T
        return d.nnz == 0 or np.abs(d.data).max() == 0
    return bool(np.array_equal(X, X.T))


class FreeSumOperator:
    """Lazy adjacency operator of the free sum ``a + b`` rooted at ``x``.

    Parameters
    ----------
    A, B : HermitianMatrix, ndarray or sparse matrix
        Same size ``N``.  Non-Hermitian inputs (e.g. diagonally rescaled
        matrices) are accepted; moments then fall back to the general walk.
    x : int
        Root index, 0-based.
    """

    def __init__(self, A, B, x: int = 0, _shared: Optional[_Shared] = None):
        self._s = _shared if _shared is not None else _Shared(A, B)
        if not (0 <= x < self._s.N):
            raise ParameterError(f"root {x} out of range for N={self._s.N}")
        self.x = int(x)
        self._cache: Dict[Tuple, List] = {}
        self._color_cache: Dict[Tuple, List] = {}
        self._lock = threading.Lock()

    @property
    def N(self) -> int:
        return self._s.N

    @property
    def A(self):
        return self._s.A

    @property
    def B(self):
        return self._s.B

    @property
    def hermitian(self) -> bool:
        return self._s.hermitian

    @property
    def symmetric(self) -> bool:
        return self._s.symmetric

    def with_root(self, y: int) -> "FreeSumOperator":
        """Operator at another root sharing the matrix data (the bijection Psi_{x->y})."""
        return FreeSumOperator(None, None, y, _shared=self._s)

    # -- vertex structure --------------------------------------------------
    def j(self, v: Tuple) -> int:
        return v[-2] if v else self.x

    def is_vertex(self, v: Tuple) -> bool:
        if v == ROOT:
            return True
        if len(v) < 2 or v[-1] not in ("a", "b"):
            return False
        idx = v[:-1]
        prev = self.x
        for k in idx:
            if not (0 <= k < self.N) or k == prev:
                return False
            prev = k
        return True

    def component(self, v: Tuple, color: str) -> Tuple[Tuple, Tuple]:
        """``(base, prefix)`` of the ``color``-component containing ``v``.

        Members are ``base`` and ``prefix + (k, color)`` for ``k != j(base)``.
        """
        if v == ROOT:
            return ROOT, ROOT
        if v[-1] == color:
            prefix = v[:-2]
            base = prefix + (_OTHER[color],) if prefix else ROOT
            return base, prefix
        return v, v[:-1]

    def member(self, base: Tuple, prefix: Tuple, color: str, k: int) -> Tuple:
        return base if k == self.j(base) else prefix + (k, color)

    def component_vertices(self, v: Tuple, color: str) -> List[Tuple]:
        base, prefix = self.component(v, color)
        return [self.member(base, prefix, color, k) for k in range(self.N)]

    # -- action --------------------------------------------------------------
    def color_neighbors(self, v: Tuple, color: str) -> List[Tuple[Tuple, complex]]:
        """Nonzero amplitudes ``(w, <color delta_v, delta_w>)``."""
        key = (v, color)
        got = self._color_cache.get(key)
        if got is not None:
            return got
        base, prefix = self.component(v, color)
        jb = self.j(base)
        rows, vals = self._s.cols[color][self.j(v)]
        out = [((base if k == jb else prefix + (k, color)), val) for k, val in zip(rows, vals)]
        with self._lock:
            self._color_cache.setdefault(key, out)
        return out

    def neighbors(self, v: Tuple) -> List[Tuple[Tuple, complex]]:
        """Nonzero amplitudes of ``a + b`` out of ``v`` (loops merged)."""
        got = self._cache.get(v)
        if got is not None:
            return got
        acc: Dict[Tuple, complex] = {}
        for color in ("a", "b"):
            for w, val in self.color_neighbors(v, color):
                acc[w] = acc.get(w, 0.0) + val
        out = [(w, val) for w, val in acc.items() if val != 0]
        with self._lock:
            self._cache.setdefault(v, out)
        return out

    def apply(self, vec: Dict[Tuple, complex], color: Optional[str] = None) -> Dict[Tuple, complex]:
        """Apply ``a + b`` (or a single color) to a finitely supported vector."""
        out: Dict[Tuple, complex] = {}
        get = out.get
        for v, c in vec.items():
            nb = self.neighbors(v) if color is None else self.color_neighbors(v, color)
            for w, amp in nb:
                out[w] = get(w, 0.0) + amp * c
        return out

    def amplitude(self, v: Tuple, w: Tuple) -> complex:
        return amplitude(self, v, w)


def component_a(op: FreeSumOperator, v: Tuple) -> List[Tuple]:
    """Vertex set of the a-component containing ``v``."""
    return op.component_vertices(v, "a")


def component_b(op: FreeSumOperator, v: Tuple) -> List[Tuple]:
    return op.component_vertices(v, "b")


def component(op: FreeSumOperator, v: Tuple, color: str) -> List[Tuple]:
    return op.component_vertices(v, color)


def amplitude(op: FreeSumOperator, v: Tuple, w: Tuple) -> complex:
    """``<(a + b) delta_v, delta_w>``."""
    total = 0j
    for color, X in (("a", op.A), ("b", op.B)):
        if op.component(v, color) == op.component(w, color):
            total += X[op.j(w), op.j(v)]
    return complex(total)


def phi_project(v: Tuple, x: int) -> int:
    """Last index of ``v``; the root maps to ``x``."""
    return v[-2] if v else x


# ---------------------------------------------------------------------------
# moments by walks
# ---------------------------------------------------------------------------

def rooted_moments(op: FreeSumOperator, m: int, mode: str = "auto",
                   budget: int = DEFAULT_REACH_BUDGET) -> np.ndarray:
    """``<(a+b)^n delta_root, delta_root>`` for ``n = 0..m`` by lazy walks.

    ``mode='hermitian'`` uses ``m_n = <u_{n-k}, u_k>`` with ``u_k = (a+b)^k delta``,
    ``mode='symmetric'`` the bilinear analogue for complex-symmetric inputs
    and ``mode='general'`` applies the operator ``m`` times.
    """
    if m < 0:
        raise ParameterError("m must be >= 0")
    if mode == "auto":
        mode = "hermitian" if op.hermitian else ("symmetric" if op.symmetric else "general")
    out = np.zeros(m + 1, dtype=complex)
    u = [{ROOT: 1.0 + 0j}]
    steps = m if mode == "general" else (m + 1) // 2
    for _ in range(steps):
        nxt = op.apply(u[-1])
        if len(nxt) > budget:
            raise BudgetExceeded(f"walk support {len(nxt)} exceeds the budget {budget}")
        u.append(nxt)
    if mode == "general":
        for n in range(m + 1):
            out[n] = u[n].get(ROOT, 0.0)
        return out
    conj = mode == "hermitian"
    for n in range(m + 1):
        k = n // 2
        left, right = u[n - k], u[k]
        s = 0j
        if len(left) <= len(right):
            for w, c in left.items():
                d = right.get(w)
                if d is not None:
                    s += c * (d.conjugate() if conj else d)
        else:
            for w, d in right.items():
                c = left.get(w)
                if c is not None:
                    s += c * (d.conjugate() if conj else d)
        out[n] = s
    return out


def rooted_moment_walk(op: FreeSumOperator, m: int, mode: str = "auto",
                       budget: int = DEFAULT_REACH_BUDGET) -> complex:
    """``<(a+b)^m delta_root, delta_root>``."""
    return complex(rooted_moments(op, m, mode, budget)[m])


# ---------------------------------------------------------------------------
# moments by traffic combinatorics
# ---------------------------------------------------------------------------

def _canonical_labels(labels: Sequence[int]) -> Tuple[int, ...]:
    seen: Dict[int, int] = {}
    out = []
    for l in labels:
        if l not in seen:
            seen[l] = len(seen)
        out.append(seen[l])
    return tuple(out)


@lru_cache(maxsize=16)
def moment_structure(m: int, cap: int = 6) -> Tuple[Tuple[Tuple[str, ...], Tuple[int, ...], int], ...]:
    """Combinatorial skeleton of the m-th rooted moment of the free sum.

    Returns triples ``(f, tau, count)``: ``f`` a coloring of the m-cycle,
    ``tau`` a partition of its vertices (as a canonical label tuple) and
    ``count`` the number of pairs ``(pi, sigma)`` with ``GCC(g_f^pi)`` a tree,
    ``sigma`` in ``P_#(CC(g_f^pi))`` (identity included) and
    ``(g_f^pi)^sigma = g_f^tau``.  It depends on ``m`` only.
    """
    if m > cap:
        raise BudgetExceeded(f"m = {m} exceeds the combinatorial guard {cap}")
    if m == 0:
        return ()
    out = []
    for f in itertools.product("ab", repeat=m):
        g = tr.cycle_monomial(m, f)
        counts: Dict[Tuple[int, ...], int] = {}
        for pi in tr.enumerate_partitions(g.vertices):
            gp = tr.quotient(g, pi)
            if not tr.gcc_is_tree(gp):
                continue
            where = pi.block_of()
            for sig in tr.enumerate_amalgamations(gp, include_identity=True):
                swhere = sig.partition.block_of()
                tau = _canonical_labels([swhere[where[v]] for v in g.vertices])
                counts[tau] = counts.get(tau, 0) + 1
        out.extend((f, tau, c) for tau, c in sorted(counts.items()))
    return tuple(out)


def rooted_moment_combinatorial(A, B, rho: int, m: int, cap: int = 6,
                                budget: int = tr.DEFAULT_MAP_CAP) -> complex:
    """m-th rooted moment of the free sum from injective traces of A and B.

    Sums over colorings ``f``, partitions ``pi`` with a tree GCC and
    amalgamations ``sigma`` of ``tr0_rho((g_f^pi)^sigma(A, B))``.
    """
    if m == 0:
        return 1.0 + 0j
    assignment = {"a": _matrix(A), "b": _matrix(B)}
    total = 0j
    struct = moment_structure(m, cap)
    for f, tau, count in struct:
        g = tr.cycle_monomial(m, f)
        gt = tr.quotient(g, tr.VertexPartition.from_labels(g.vertices, tau))
        total += count * tr.injective_trace(gt, assignment, rho, budget)
    return complex(total)


# ---------------------------------------------------------------------------
# injective morphisms into the free-sum graph
# ---------------------------------------------------------------------------

def injective_trace_freesum(g: tr.GraphMonomial, op: FreeSumOperator,
                            budget: int = tr.DEFAULT_MAP_CAP, count_only: bool = False):
    """``tr0_root(g(a, b))`` by enumerating injective morphisms into the lazy graph.

    Labels ``'a'`` and ``'b'`` act through the corresponding operator.  An edge
    ``u -> w`` labeled ``t`` needs ``phi(u)`` and ``phi(w)`` in one
    t-component with a nonzero amplitude.  With ``count_only`` the number of
    morphisms is returned instead of the weighted sum.
    """
    if g.v_in != g.v_out:
        return 0
    graph = g.graph
    for e in graph.edges:
        if e.label not in ("a", "b"):
            raise ParameterError("free-sum monomials must be labeled by 'a' and 'b'")
        if e.star and not op.hermitian:
            raise ParameterError("starred edges need Hermitian inputs")
    # BFS order from the root
    order = [g.v_in]
    adj: Dict = {v: [] for v in graph.vertices}
    for e in graph.edges:
        adj[e.src].append(e)
        adj[e.tar].append(e)
    seen = {g.v_in}
    k = 0
    while k < len(order):
        for e in adj[order[k]]:
            for u in (e.src, e.tar):
                if u not in seen:
                    seen.add(u)
                    order.append(u)
        k += 1
    pos = {v: t for t, v in enumerate(order)}
    ready = [[] for _ in order]
    for e in graph.edges:
        ready[max(pos[e.src], pos[e.tar])].append(e)
    # amplitude lookup within a color: dict per source vertex
    amp_cache: Dict = {}

    def amp(color, v, w):
        key = (color, v)
        d = amp_cache.get(key)
        if d is None:
            d = dict(op.color_neighbors(v, color))
            amp_cache[key] = d
        return d.get(w, 0.0)

    phi = {g.v_in: ROOT}
    used = {ROOT}
    visited = [0]
    total = [0j if not count_only else 0]

    def candidates(t):
        v = order[t]
        for e in ready[t]:
            if e.src == v and e.tar in phi and e.tar != v:
                return [w for w, _ in op.color_neighbors(phi[e.tar], e.label)]
            if e.tar == v and e.src in phi and e.src != v:
                return [w for w, _ in op.color_neighbors(phi[e.src], e.label)]
        raise ParameterError("monomial must be connected")

    def rec(t, acc):
        if t == len(order):
            total[0] += acc
            return
        v = order[t]
        for w in candidates(t):
            if w in used:
                continue
            visited[0] += 1
            if visited[0] > budget:
                raise BudgetExceeded("morphism enumeration exceeded the budget")
            phi[v] = w
            val = acc
            for e in ready[t]:
                if e.star:
                    a = np.conj(amp(e.label, phi[e.tar], phi[e.src]))
                else:
                    a = amp(e.label, phi[e.src], phi[e.tar])
                if a == 0:
                    val = 0
                    break
                val = val if count_only else val * a
            if val != 0:
                used.add(w)
                rec(t + 1, val)
                used.discard(w)
            del phi[v]

    base = 1 if count_only else 1.0 + 0j
    for e in ready[0]:  # loops at the root
        a = amp(e.label, ROOT, ROOT)
        if e.star:
            a = np.conj(a)
        if a == 0:
            return 0 if count_only else 0j
        if not count_only:
            base *= a
    rec(1, base)
    return total[0]


# ---------------------------------------------------------------------------
# truncated balls
# ---------------------------------------------------------------------------

@dataclass
class Ball:
    """Finite section of the free-sum graph around the root."""

    vertices: List[Tuple]
    depth: List[int]
    matrix: sp.csr_matrix  # matrix[w, v] = <(a+b) delta_v, delta_w>
    phi: np.ndarray

    @property
    def size(self) -> int:
        return len(self.vertices)


def build_ball(op: FreeSumOperator, depth: int, budget: int = DEFAULT_REACH_BUDGET,
               scale: Optional[np.ndarray] = None) -> Ball:
    """Vertices within graph distance ``depth`` of the root and the induced operator.

    One pass: each vertex's neighbor list is computed once (bypassing the
    operator cache), used for discovery while below ``depth`` and for the
    matrix entries among ball vertices.
    """
    cols = op._s.cols
    x = op.x
    index = {ROOT: 0}
    verts = [ROOT]
    dep = [0]
    src, dst, vals = [], [], []
    pos = 0
    while pos < len(verts):
        v = verts[pos]
        d = dep[pos]
        jv = v[-2] if v else x
        acc: Dict[Tuple, complex] = {}
        for color in ("a", "b"):
            if v and v[-1] == color:
                prefix = v[:-2]
                if prefix:
                    base = prefix + ("b" if color == "a" else "a",)
                    jb = prefix[-1]
                else:
                    base, jb = ROOT, x
            else:
                base, prefix, jb = v, (v[:-1] if v else ROOT), jv
            rows, rv_ = cols[color][jv]
            for k, val in zip(rows, rv_):
                w = base if k == jb else prefix + (k, color)
                acc[w] = acc.get(w, 0.0) + val
        for w, val in acc.items():
            if val == 0:
                continue
            iw = index.get(w)
            if iw is None:
                if d >= depth:
                    continue
                iw = len(verts)
                index[w] = iw
                verts.append(w)
                dep.append(d + 1)
                if len(verts) > budget:
                    raise BudgetExceeded(f"ball of depth {depth} exceeds {budget} vertices")
            src.append(pos)
            dst.append(iw)
            vals.append(val)
        pos += 1
    n = len(verts)
    H = sp.csr_matrix((np.asarray(vals, dtype=complex), (dst, src)), shape=(n, n))
    phi = np.array([v[-2] if v else x for v in verts], dtype=np.intp)
    return Ball(verts, dep, H, phi)


# ---------------------------------------------------------------------------
# colored girth on the matrices
# ---------------------------------------------------------------------------

class _Support:
    """Off-diagonal neighbor sets and loop flags of A and B."""

    def __init__(self, A, B):
        self.N = _matrix(A).shape[0]
        self.nb = {}
        self.loop = {}
        for c, X in (("a", A), ("b", B)):
            m = sp.csr_matrix(_matrix(X))
            m.eliminate_zeros()
            ptr, ind = m.indptr, m.indices
            nb, lp = [], []
            for i in range(self.N):
                row = ind[ptr[i]:ptr[i + 1]].tolist()
                lp.append(i in row)
                nb.append([j for j in row if j != i])
            self.nb[c] = nb
            self.loop[c] = lp
        self.both = [sorted(set(self.nb["a"][i]) | set(self.nb["b"][i])) for i in range(self.N)]


def _ball_eta(sup: _Support, ball: Iterable[int]) -> int:
    """``eta`` of the GCC of the induced ball; 0 means tree (or no edge)."""
    inball = set(ball)
    ncc = 0
    covered = {}
    for c in ("a", "b"):
        parent = {}

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        nb, lp = sup.nb[c], sup.loop[c]
        for u in inball:
            touched = lp[u]
            for v in nb[u]:
                if v in inball:
                    touched = True
                    break
            if touched:
                parent[u] = u
        for u in parent:
            for v in nb[u]:
                if v in parent and v > u:
                    ru, rv = find(u), find(v)
                    if ru != rv:
                        parent[rv] = ru
        ncc += len({find(u) for u in parent})
        covered[c] = set(parent)
    nco = len(covered["a"] & covered["b"])
    if ncc == 0:
        return 0
    return ncc - nco - 1


def colored_girth(A, B, x: int, k_max: int, _support: Optional[_Support] = None) -> int:
    """Largest ``k <= k_max`` such that the GCC of the induced ball ``B(x, k)`` is a tree.

    Tree-ness can only be lost as the ball grows, so the scan stops at the
    first failure.
    """
    sup = _support or _Support(A, B)
    ball = {x}
    frontier = [x]
    for k in range(1, k_max + 1):
        nxt = []
        for u in frontier:
            for v in sup.both[u]:
                if v not in ball:
                    ball.add(v)
                    nxt.append(v)
        if not nxt:
            return k_max
        frontier = nxt
        if _ball_eta(sup, ball) != 0:
            return k - 1
    return k_max


def colored_girths(A, B, k_max: int) -> np.ndarray:
    """``R(x)`` capped at ``k_max`` for every root."""
    sup = _Support(A, B)
    return np.array([colored_girth(A, B, x, k_max, sup) for x in range(sup.N)], dtype=int)


def count_tree_vertices(A, B, n: int) -> int:
    """``|F_N(n)| = #{x : R(x) >= n}``."""
    if n <= 0:
        return _matrix(A).shape[0]
    return int(np.sum(colored_girths(A, B, n) >= n))


# ---------------------------------------------------------------------------
# diagonal embedding and freeness checks
# ---------------------------------------------------------------------------

class DiagonalOperator:
    """``D delta_v = D[Phi(v)] delta_v`` on the free-sum graph."""

    def __init__(self, entries, x: int = 0):
        self.entries = np.asarray(entries)
        self.x = x

    def value(self, v: Tuple) -> complex:
        return self.entries[v[-2] if v else self.x]

    def apply(self, vec: Dict[Tuple, complex]) -> Dict[Tuple, complex]:
        return {v: self.value(v) * c for v, c in vec.items()}

    def compose(self, other: "DiagonalOperator") -> "DiagonalOperator":
        return DiagonalOperator(self.entries * other.entries, self.x)


def embed_diagonal(D, x: int = 0) -> DiagonalOperator:
    entries = getattr(D, "entries", D)
    return DiagonalOperator(np.asarray(entries), x)


@dataclass(frozen=True)
class Factor:
    """Element of the algebra generated by one operator and diagonal matrices.

    ``terms`` is a sequence of ``(coefficient, items)`` where ``items`` is a
    tuple of ``'x'`` (the operator of ``color``) and 1-D arrays (embedded
    diagonals), read left to right as an operator product.
    """

    color: str
    terms: Tuple

    @classmethod
    def poly(cls, color: str, coeffs: Sequence[complex]) -> "Factor":
        """``sum_k coeffs[k] x^k``."""
        return cls(color, tuple((c, ("x",) * k) for k, c in enumerate(coeffs) if c != 0))

    @property
    def degree(self) -> int:
        return max((sum(1 for it in items if isinstance(it, str)) for _, items in self.terms), default=0)


def _apply_factor(op: FreeSumOperator, fac: Factor, vec: Dict) -> Dict:
    out: Dict[Tuple, complex] = {}
    for coef, items in fac.terms:
        u = vec
        for it in reversed(items):
            if isinstance(it, str):
                u = op.apply(u, color=fac.color)
            else:
                d = np.asarray(it)
                u = {v: d[op.j(v)] * c for v, c in u.items()}
        for v, c in u.items():
            out[v] = out.get(v, 0.0) + coef * c
    return out


def factor_expectation(op: FreeSumOperator, fac: Factor) -> np.ndarray:
    """``Delta(fac)``: the root diagonal ``<fac delta_i, delta_i>`` for every root ``i``."""
    vals = np.zeros(op.N, dtype=complex)
    for i in range(op.N):
        opi = op.with_root(i)
        vals[i] = _apply_factor(opi, fac, {ROOT: 1.0 + 0j}).get(ROOT, 0.0)
    return vals


def check_centered_alternating(A, B, x: int, word: Sequence[Factor]) -> complex:
    """Root entry of ``(y_1 - Delta(y_1)) ... (y_k - Delta(y_k)) delta_x``.

    Consecutive factors must have different colors.  The value vanishes for
    operators that are free with amalgamation over the diagonal.
    """
    op = FreeSumOperator(A, B, x)
    for f1, f2 in zip(word, word[1:]):
        if f1.color == f2.color:
            raise ParameterError("factors must alternate between 'a' and 'b'")
    centers = [factor_expectation(op, f) for f in word]
    vec = {ROOT: 1.0 + 0j}
    for fac, cen in zip(reversed(word), reversed(centers)):
        raw = _apply_factor(op, fac, vec)
        for v, c in vec.items():
            raw[v] = raw.get(v, 0.0) - cen[op.j(v)] * c
        vec = raw
    return complex(vec.get(ROOT, 0.0))
