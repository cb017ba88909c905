"""Empirical checks of the modelling assumptions, the combinatorial lemmas and
the Stirling-type asymptotics.

Every check returns a plain report object that serializes to JSON through
``to_dict``.  Exact identities are asserted per realization at floating
tolerance; statements that hold only in expectation or asymptotically are
reported as estimates with their sample sizes and seed ranges.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from . import freesum as fs
from . import traffic as tr
from .errors import BudgetExceeded, ParameterError
from .models import HermitianMatrix, ModelSpec, generate, make_rng, permute_conjugate

__all__ = [
    "AssumptionReport",
    "LemmaResult",
    "LemmaReport",
    "MarkovReport",
    "AsymptoticRatio",
    "frobenius_power",
    "check_frobenius",
    "exact_injective_expectation",
    "sample_double_tree",
    "check_injective_growth",
    "check_entrywise_product",
    "stirling_ratio",
    "gamma_ratio",
    "merge_monotonicity",
    "morphism_bijection",
    "trace_identity",
    "tree_gcc_family",
    "glue_product_identity",
    "factorization_identity",
    "lemma_suite",
    "complement_counts",
    "markov_bound_check",
]

REL_TOL = 1e-10


def _rel_close(x, y, tol: float = REL_TOL, floor: float = 1e-300) -> bool:
    scale = max(abs(x), abs(y))
    if scale < floor:
        return True
    return abs(x - y) <= tol * scale


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _spec_dict(spec: Optional[ModelSpec]):
    if spec is None:
        return None
    return {k: v for k, v in spec.__dict__.items()}


# ---------------------------------------------------------------------------
# assumption checks
# ---------------------------------------------------------------------------

@dataclass
class AssumptionReport:
    """Outcome of an assumption check.

    ``estimates`` maps a name to a value; ``samples`` and ``seeds`` record
    how many realizations went into them and which seeds were used.
    """

    check: str
    model: Optional[ModelSpec]
    speed: str
    graph_family: str
    estimates: Dict[str, object]
    threshold: Optional[float]
    passed: bool
    samples: int
    seeds: Tuple[int, int]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "check": self.check,
            "model": _spec_dict(self.model),
            "speed": self.speed,
            "graph_family": self.graph_family,
            "estimates": self.estimates,
            "threshold": self.threshold,
            "passed": bool(self.passed),
            "samples": int(self.samples),
            "seeds": list(self.seeds),
            "notes": list(self.notes),
        }
        return _jsonable(d)


def _seed_range(base: int, trials: int) -> Tuple[int, int]:
    return (int(base), int(base) + int(trials) - 1)


def frobenius_power(X, M: int) -> float:
    """``(1/N) ||X^M||_F^2`` by repeated multiplication."""
    data = X.data if isinstance(X, HermitianMatrix) else X
    N = data.shape[0]
    if M < 0:
        raise ParameterError("M must be nonnegative")
    if M == 0:
        return 1.0
    if sp.issparse(data):
        P = sp.identity(N, format="csr", dtype=data.dtype)
        for _ in range(M):
            P = P @ data
        val = float(np.sum(np.abs(P.data) ** 2))
    else:
        P = np.linalg.matrix_power(np.asarray(data), M)
        val = float(np.sum(np.abs(P) ** 2))
    return val / N


def check_frobenius(model: ModelSpec, M: int, trials: int, C: Optional[float] = None,
                    norm_bound: bool = True) -> AssumptionReport:
    """Monte Carlo estimate of ``E (1/N) ||X^M||_F^2`` and ``C_hat = estimate^(1/M)``.

    Seeds ``model.seed .. model.seed + trials - 1`` are used.  With
    ``norm_bound`` each sample is also compared with ``||X||_op^(2M)``.
    Passes when ``C_hat <= C`` (or unconditionally when ``C`` is None).
    """
    M = int(M)
    if M < 1:
        raise ParameterError("M must be >= 1")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    vals = []
    bound_violations = 0
    for k in range(trials):
        X = generate(model.replace(seed=model.seed + k))
        nrm = X.op_norm
        if nrm > 0 and 2 * M * math.log(nrm) > 690.0:
            raise ParameterError(
                f"||X||_op^(2M) = exp({2 * M * math.log(nrm):.1f}) overflows double precision; lower M",
                offending=M)
        v = frobenius_power(X, M)
        vals.append(v)
        if norm_bound and v > nrm ** (2 * M) * (1 + 1e-9) + 1e-300:
            bound_violations += 1
    vals = np.asarray(vals)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    c_hat = mean ** (1.0 / M) if mean > 0 else 0.0
    passed = (C is None or c_hat <= C) and bound_violations == 0
    notes = ["finite-N estimate; the assumption is asymptotic"]
    if bound_violations:
        notes.append(f"{bound_violations} samples exceeded ||X||_op^(2M)")
    return AssumptionReport(
        check="frobenius",
        model=model,
        speed=f"M = {M}",
        graph_family="none",
        estimates={"mean": mean, "stderr": se, "C_hat": c_hat, "max_sample": float(vals.max()),
                   "norm_bound_violations": bound_violations},
        threshold=C,
        passed=bool(passed),
        samples=trials,
        seeds=_seed_range(model.seed, trials),
        notes=notes,
    )


def _entry_law(model: ModelSpec):
    """Moment function ``k -> E x^k`` of an off-diagonal entry, or None."""
    N = model.N
    if model.family == "erdos_renyi":
        p = model.p
        s = math.sqrt(N * p * (1 - p))
        hi, lo = (1 - p) / s, -p / s
        return lambda k: p * hi ** k + (1 - p) * lo ** k
    if model.family == "diluted_wigner":
        t = model.atom if model.atom is not None else math.log(N) ** model.h
        a = t / math.sqrt(N)
        q = 1.0 / (t * t)
        return lambda k: 0.0 if k % 2 else q * a ** k
    return None


def exact_injective_expectation(T: tr.TestGraph, N: int, moment: Callable[[int], float]) -> float:
    """``E[N^-K Tr0(T(X))]`` for a real symmetric matrix with i.i.d. entries
    above a zero diagonal.

    Injective maps send distinct unordered vertex pairs to independent
    entries, so each term factorizes over the edge multiset of the graph.
    """
    if any(e.is_loop for e in T.edges):
        return 0.0
    mult: Dict[frozenset, int] = {}
    for e in T.edges:
        key = frozenset((e.src, e.tar))
        mult[key] = mult.get(key, 0) + 1
    prod = 1.0
    for m in mult.values():
        prod *= moment(m)
        if prod == 0.0:
            return 0.0
    V = len(T.vertices)
    K = len(T.connected_components())
    count = 1.0
    for t in range(V):
        count *= (N - t)
    return count * prod / N ** K


def sample_double_tree(rng: np.random.Generator, n_vertices: int, label: str = "x") -> tr.TestGraph:
    """Uniform labeled tree (Pruefer code) with every edge traversed both ways."""
    n = int(n_vertices)
    if n < 2:
        raise ParameterError("a double tree needs at least 2 vertices")
    if n == 2:
        pairs = [(0, 1)]
    else:
        code = rng.integers(0, n, size=n - 2).tolist()
        degree = [1] * n
        for c in code:
            degree[c] += 1
        pairs = []
        for c in code:
            leaf = min(i for i in range(n) if degree[i] == 1)
            pairs.append((leaf, c))
            degree[leaf] -= 1
            degree[c] -= 1
        u, w = [i for i in range(n) if degree[i] == 1]
        pairs.append((u, w))
    edges = []
    for u, w in pairs:
        edges.append(tr.Edge(u, w, label))
        edges.append(tr.Edge(w, u, label))
    return tr.TestGraph(range(n), edges)


def check_injective_growth(model: ModelSpec, graph_sampler, M: float, c: float, trials: int,
                           Ns: Optional[Sequence[int]] = None, h_max: Optional[float] = None,
                           graphs_per_trial: int = 1, budget: int = 2_000_000) -> AssumptionReport:
    """Growth of ``N^-K Tr0(T(X))`` on sampled test graphs.

    ``graph_sampler`` is a callable ``rng -> TestGraph`` (single label) or a
    fixed sequence of test graphs.  For each ``N`` the maximum observed
    modulus gives ``h_hat = log(max) / (c log N)``.  Test graphs must have at
    most ``c M`` vertices and edges.  When the entry law is known in closed
    form the exact expectation is reported next to the Monte Carlo mean.
    """
    Ns = list(Ns) if Ns is not None else [model.N]
    size_cap = c * M
    per_N = {}
    h_hats = []
    for N in Ns:
        spec = model.replace(N=int(N))
        law = _entry_law(spec)
        rng = make_rng([int(spec.seed), int(N), 7])
        values, exact = [], []
        for k in range(trials):
            X = generate(spec.replace(seed=spec.seed + k))
            if callable(graph_sampler):
                graphs = [graph_sampler(rng) for _ in range(graphs_per_trial)]
            else:
                graphs = list(graph_sampler)
            for T in graphs:
                if len(T.vertices) > size_cap or len(T.edges) > size_cap:
                    raise ParameterError(
                        f"test graph with |V|={len(T.vertices)}, |E|={len(T.edges)} exceeds c*M = {size_cap:.3g}")
                assignment = {lab: X for lab in T.labels}
                val = tr.normalized_injective_trace_multi(T, assignment, budget=budget)
                values.append(val)
                if law is not None and k == 0:
                    exact.append(exact_injective_expectation(T, N, law))
        mods = np.abs(np.asarray(values))
        mx = float(mods.max()) if len(mods) else 0.0
        h_hat = math.log(mx) / (c * math.log(N)) if mx > 0 else -math.inf
        h_hats.append(h_hat)
        per_N[str(N)] = {"max_abs": mx, "mean": complex(np.mean(values)) if values else 0j,
                         "h_hat": h_hat, "exact_expectation": exact if exact else None,
                         "n_values": len(values)}
    worst = max(h_hats) if h_hats else -math.inf
    passed = h_max is None or worst <= h_max
    fam = getattr(graph_sampler, "__name__", "fixed list") if callable(graph_sampler) else "fixed list"
    return AssumptionReport(
        check="injective_growth",
        model=model,
        speed=f"M = {M}, c = {c}",
        graph_family=fam,
        estimates={"per_N": per_N, "h_hat_max": worst},
        threshold=h_max,
        passed=bool(passed),
        samples=trials * len(Ns),
        seeds=_seed_range(model.seed, trials),
        notes=["fixed-size graphs at desk N: a plausibility check, not an asymptotic statement"],
    )


def _abs_sum(T: tr.TestGraph, X, budget: int) -> float:
    data = X.data if isinstance(X, HermitianMatrix) else X
    absX = abs(data) if sp.issparse(data) else np.abs(np.asarray(data))
    val = tr.normalized_injective_trace_multi(T, {lab: absX for lab in T.labels}, budget=budget)
    return float(val.real)


def check_entrywise_product(X_spec: ModelSpec, Gamma, C_bound: float, M: float, c: float = 1.0,
                            graphs: Optional[Sequence[tr.TestGraph]] = None, trials: int = 1,
                            budget: int = 2_000_000) -> AssumptionReport:
    """Check ``|value(X o Gamma)| <= value-bound(X) * C^|E|`` on test graphs.

    ``value-bound`` is the injective sum of ``|X|`` entries (the triangle
    inequality bound), so the check is deterministic per realization.
    ``Gamma`` is an ``N x N`` array or a callable ``N -> array``.
    """
    if graphs is None:
        rng = make_rng([X_spec.seed, 11])
        graphs = [sample_double_tree(rng, 3), sample_double_tree(rng, 3)]
        graphs.append(tr.TestGraph(range(3), [(0, 1, "x"), (1, 2, "x"), (2, 0, "x")]))
    size_cap = c * M
    ratios, rows = [], []
    ok = True
    for k in range(trials):
        Xm = generate(X_spec.replace(seed=X_spec.seed + k))
        X = Xm.to_dense()
        G = Gamma(X.shape[0]) if callable(Gamma) else np.asarray(Gamma)
        if np.max(np.abs(G)) > C_bound * (1 + 1e-12):
            raise ParameterError("Gamma entries exceed the declared bound")
        W = X * G
        for T in graphs:
            if len(T.edges) > size_cap:
                raise ParameterError(f"test graph has {len(T.edges)} edges > c*M = {size_cap:.3g}")
            vw = tr.normalized_injective_trace_multi(T, {lab: W for lab in T.labels}, budget=budget)
            vx = tr.normalized_injective_trace_multi(T, {lab: X for lab in T.labels}, budget=budget)
            bound = _abs_sum(T, X, budget) * C_bound ** len(T.edges)
            good = abs(vw) <= bound * (1 + 1e-10) + 1e-300
            ok &= good
            ratio = abs(vw) / abs(vx) if abs(vx) > 0 else math.nan
            ratios.append(ratio)
            rows.append({"n_edges": len(T.edges), "value_W": vw, "value_X": vx, "bound": bound, "ok": bool(good)})
    return AssumptionReport(
        check="entrywise_product",
        model=X_spec,
        speed=f"M = {M}, c = {c}",
        graph_family="double trees and a triangle" if graphs is None else "given",
        estimates={"rows": rows, "max_ratio": float(np.nanmax(ratios)) if ratios else math.nan},
        threshold=C_bound,
        passed=bool(ok),
        samples=trials,
        seeds=_seed_range(X_spec.seed, trials),
    )


# ---------------------------------------------------------------------------
# Stirling-type ratios
# ---------------------------------------------------------------------------

class AsymptoticRatio(NamedTuple):
    value: float
    leading: float
    rel_error: float


def stirling_ratio(N: int, V_size: int) -> AsymptoticRatio:
    """``N! / (N - |V|)!`` against ``N^|V|``.

    The relative error ``prod_{k<|V|} (1 - k/N) - 1`` is computed with
    ``log1p``/``expm1`` so it stays accurate when it is tiny.
    """
    N, V = int(N), int(V_size)
    if V < 0 or V > N:
        raise ParameterError("need 0 <= |V| <= N")
    if V * V >= N and V > 1:
        raise ParameterError(f"|V|^2 = {V * V} >= N = {N}: outside the validity regime", offending=(N, V))
    s = math.fsum(math.log1p(-k / N) for k in range(V))
    leading = float(N) ** V
    return AsymptoticRatio(leading * math.exp(s), leading, -math.expm1(s))


def gamma_ratio(N: int, V: int, V1: int, V2: int, K1: int, K2: int) -> AsymptoticRatio:
    """``Gamma_N = N (N-V1)! (N-V2)! / ((N-V)! N!) N^(K1-1) N^(K2-1)`` against ``N^eta``.

    ``eta = K1 + K2 - 1 - V1 - V2 + V`` must be nonpositive.  The ratio
    ``Gamma_N / N^eta`` equals ``prod_{V2<=k<V} (1-k/N) / prod_{k<V1} (1-k/N)``.
    """
    N, V, V1, V2, K1, K2 = map(int, (N, V, V1, V2, K1, K2))
    e = K1 + K2 - 1 - V1 - V2 + V
    if e > 0:
        raise ParameterError(f"eta = {e} > 0 violates the lemma's hypothesis", offending=(V, V1, V2, K1, K2))
    if not (max(V1, V2) <= V <= V1 + V2):
        raise ParameterError("need max(V1, V2) <= V <= V1 + V2")
    if min(V1, V2, K1, K2) < 1:
        raise ParameterError("vertex and component counts must be >= 1")
    if V * V >= N:
        raise ParameterError(f"|V|^2 = {V * V} >= N = {N}: outside the validity regime", offending=(N, V))
    s = math.fsum(math.log1p(-k / N) for k in range(V2, V)) - math.fsum(math.log1p(-k / N) for k in range(V1))
    leading = float(N) ** e
    return AsymptoticRatio(leading * math.exp(s), leading, abs(math.expm1(s)))


# ---------------------------------------------------------------------------
# lemma suite
# ---------------------------------------------------------------------------

@dataclass
class LemmaResult:
    name: str
    passed: bool
    checked: int
    details: Dict[str, object] = field(default_factory=dict)
    counterexample: Optional[object] = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class LemmaReport:
    results: List[LemmaResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> LemmaResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "results": [r.to_dict() for r in self.results]}


# -- (i) merge monotonicity --------------------------------------------------

_FRAME = 6
_FRAME_PAIRS = list(itertools.combinations(range(_FRAME), 2))
_PAIR_INDEX = {p: k for k, p in enumerate(_FRAME_PAIRS)}


def _frame_lut():
    """Per 15-bit edge mask on 6 vertices: number of components with an edge, covered-vertex mask."""
    n = 1 << len(_FRAME_PAIRS)
    comps = np.zeros(n, dtype=np.int8)
    cover = np.zeros(n, dtype=np.int8)
    for mask in range(n):
        parent = list(range(_FRAME))

        def find(u):
            while parent[u] != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        cov = 0
        for k, (u, w) in enumerate(_FRAME_PAIRS):
            if mask >> k & 1:
                cov |= (1 << u) | (1 << w)
                ru, rw = find(u), find(w)
                if ru != rw:
                    parent[rw] = ru
        comps[mask] = len({find(u) for u in range(_FRAME) if cov >> u & 1})
        cover[mask] = cov
    return comps, cover


_LUT = None
_POPCOUNT6 = np.array([bin(i).count("1") for i in range(1 << _FRAME)], dtype=np.int8)


def _lut():
    global _LUT
    if _LUT is None:
        _LUT = _frame_lut()
    return _LUT


def _pattern_eta(ea, eb, la, lb):
    """Vectorized GCC defect of support patterns in the 6-vertex frame."""
    comps, cover = _lut()
    ca, cb = cover[ea].astype(np.int64), cover[eb].astype(np.int64)
    ncc_a = comps[ea] + _POPCOUNT6[la & ~ca & 63]
    ncc_b = comps[eb] + _POPCOUNT6[lb & ~cb & 63]
    nco = _POPCOUNT6[(ca | la) & (cb | lb)]
    return ncc_a.astype(np.int64) + ncc_b - nco - 1


def _side_patterns(n: int):
    """Connected support patterns on ``n`` vertices up to isomorphism.

    A pattern is ``(ea, eb, la, lb)``: for each color the set of vertex pairs
    joined by at least one edge of that color and the set of vertices with a
    loop of that color, encoded as frame bitmasks.
    """
    pairs = list(itertools.combinations(range(n), 2))
    perms = list(itertools.permutations(range(n)))

    def encode(ea_set, eb_set, la_set, lb_set):
        ea = sum(1 << _PAIR_INDEX[p] for p in ea_set)
        eb = sum(1 << _PAIR_INDEX[p] for p in eb_set)
        la = sum(1 << v for v in la_set)
        lb = sum(1 << v for v in lb_set)
        return (ea, eb, la, lb)

    seen = set()
    out = []
    for choice in itertools.product(range(4), repeat=len(pairs) + n):
        pc, lc = choice[:len(pairs)], choice[len(pairs):]
        ea_set = [p for p, c in zip(pairs, pc) if c & 1]
        eb_set = [p for p, c in zip(pairs, pc) if c & 2]
        la_set = [v for v, c in enumerate(lc) if c & 1]
        lb_set = [v for v, c in enumerate(lc) if c & 2]
        if not (ea_set or eb_set or la_set or lb_set):
            continue
        # connectivity of the underlying graph
        parent = list(range(n))

        def find(u):
            while parent[u] != u:
                u = parent[u]
            return u

        for u, w in set(ea_set) | set(eb_set):
            parent[find(w)] = find(u)
        if len({find(u) for u in range(n)}) != 1:
            continue
        canon = None
        for pm in perms:
            def mp(p):
                a, b = pm[p[0]], pm[p[1]]
                return (min(a, b), max(a, b))
            code = encode([mp(p) for p in ea_set], [mp(p) for p in eb_set],
                          [pm[v] for v in la_set], [pm[v] for v in lb_set])
            if canon is None or code < canon:
                canon = code
        if canon not in seen:
            seen.add(canon)
            out.append(canon)
    return out


def _pattern_graph(ea: int, eb: int, la: int, lb: int) -> tr.TestGraph:
    edges = []
    used = set()
    for k, (u, w) in enumerate(_FRAME_PAIRS):
        if ea >> k & 1:
            edges.append(tr.Edge(u, w, "a"))
            used |= {u, w}
        if eb >> k & 1:
            edges.append(tr.Edge(w, u, "b"))
            used |= {u, w}
    for v in range(_FRAME):
        if la >> v & 1:
            edges.append(tr.Edge(v, v, "a"))
            used.add(v)
        if lb >> v & 1:
            edges.append(tr.Edge(v, v, "b"))
            used.add(v)
    return tr.TestGraph(sorted(used), edges)


def _matchings(n1: int, n2: int):
    """Partial matchings (side-1 vertex, side-2 vertex) with at least one pair."""
    for k in range(1, min(n1, n2) + 1):
        for left in itertools.combinations(range(n1), k):
            for right in itertools.permutations(range(n2), k):
                yield tuple(zip(left, right))


def _remap_side2(arr_e, arr_l, n1: int, n2: int, matching):
    """Move side-2 patterns (on vertices 0..n2-1) into the merged frame."""
    slot = {}
    matched = {r: l for l, r in matching}
    nxt = n1
    for v in range(n2):
        if v in matched:
            slot[v] = matched[v]
        else:
            slot[v] = nxt
            nxt += 1
    e_out = np.zeros_like(arr_e)
    for (u, w) in itertools.combinations(range(n2), 2):
        a, b = slot[u], slot[w]
        bit_in = 1 << _PAIR_INDEX[(u, w)]
        bit_out = 1 << _PAIR_INDEX[(min(a, b), max(a, b))]
        e_out |= np.where(arr_e & bit_in, bit_out, 0).astype(arr_e.dtype)
    l_out = np.zeros_like(arr_l)
    for v in range(n2):
        l_out |= np.where(arr_l & (1 << v), 1 << slot[v], 0).astype(arr_l.dtype)
    return e_out, l_out


def merge_monotonicity(max_vertices: int = 3, cross_check: int = 200, seed: int = 0) -> LemmaResult:
    """Exhaustive check of ``eta(GCC(merge)) <= min(eta(GCC(S1)), eta(GCC(S2)))``.

    Sides range over all connected two-color support patterns with at most
    ``max_vertices`` vertices; merges over all partial matchings with at
    least one pair.  A random subsample is recomputed with
    :func:`freediag.traffic.gcc` on explicit test graphs.
    """
    if 2 * max_vertices > _FRAME:
        raise BudgetExceeded(f"at most {_FRAME // 2} vertices per side are supported")
    t0 = time.perf_counter()
    sides = {n: np.array(_side_patterns(n), dtype=np.int64) for n in range(1, max_vertices + 1)}
    etas = {n: _pattern_eta(s[:, 0], s[:, 1], s[:, 2], s[:, 3]) for n, s in sides.items()}
    checked = 0
    violations = 0
    first = None
    rng = make_rng(seed)
    samples = []
    for n1 in sides:
        s1, e1 = sides[n1], etas[n1]
        for n2 in sides:
            s2, e2 = sides[n2], etas[n2]
            bound = np.minimum(e1[:, None], e2[None, :])
            for mt in _matchings(n1, n2):
                ea2, la2 = _remap_side2(s2[:, 0], s2[:, 2], n1, n2, mt)
                eb2, lb2 = _remap_side2(s2[:, 1], s2[:, 3], n1, n2, mt)
                ea = s1[:, 0][:, None] | ea2[None, :]
                eb = s1[:, 1][:, None] | eb2[None, :]
                la = s1[:, 2][:, None] | la2[None, :]
                lb = s1[:, 3][:, None] | lb2[None, :]
                em = _pattern_eta(ea, eb, la, lb)
                bad = em > bound
                checked += em.size
                nb = int(bad.sum())
                if nb and first is None:
                    i, j = map(int, np.argwhere(bad)[0])
                    first = {"side1": tr.format_graph(_pattern_graph(*s1[i])),
                             "side2": tr.format_graph(_pattern_graph(*s2[j])),
                             "matching": mt, "eta_merge": int(em[i, j]), "bound": int(bound[i, j])}
                violations += nb
                # keep a few random instances for the explicit cross-check
                for _ in range(8):
                    i = int(rng.integers(len(s1)))
                    j = int(rng.integers(len(s2)))
                    samples.append(((ea[i, j], eb[i, j], la[i, j], lb[i, j]), int(em[i, j])))
    mismatches = 0
    pick = rng.permutation(len(samples))[:cross_check] if samples else []
    for k in pick:
        pat, e = samples[k]
        T = _pattern_graph(*map(int, pat))
        if tr.eta_gcc(tr.gcc(T)) != e:
            mismatches += 1
    passed = violations == 0 and mismatches == 0
    return LemmaResult(
        name="merge_monotonicity",
        passed=passed,
        checked=checked,
        details={"violations": violations, "side_classes": {n: len(s) for n, s in sides.items()},
                 "cross_checked": len(pick), "cross_check_mismatches": mismatches},
        counterexample=first,
        seconds=time.perf_counter() - t0,
    )


# -- (ii) morphism bijection -------------------------------------------------

def _component_injective_count(g: tr.GraphMonomial, N: int, x: int) -> int:
    """Maps ``V -> [N]`` fixing the root at ``x``, injective on every colored component."""
    comps = [sorted(c.vertices, key=repr) for c in tr.colored_components(g.graph)]
    others = [v for v in g.vertices if v != g.v_in]
    count = 0
    for vals in itertools.product(range(N), repeat=len(others)):
        phi = dict(zip(others, vals))
        phi[g.v_in] = x
        if all(len({phi[v] for v in c}) == len(c) for c in comps):
            count += 1
    return count


def morphism_bijection(graphs: Optional[Sequence[tr.GraphMonomial]] = None, N: int = 3,
                       x: int = 0) -> LemmaResult:
    """Count injective morphisms into the free-sum graph two ways.

    Both matrices are all-ones so every amplitude is nonzero: the number of
    injective morphisms from the root then equals the number of vertex maps
    injective on each colored component.
    """
    t0 = time.perf_counter()
    if graphs is None:
        graphs = [
            tr.GraphMonomial(tr.TestGraph(range(3), [(0, 1, "a"), (1, 2, "b")]), 0, 0),
            tr.GraphMonomial(tr.TestGraph(range(3), [(0, 1, "a"), (1, 2, "b")]), 1, 1),
            tr.GraphMonomial(tr.TestGraph(range(4), [(0, 1, "a"), (1, 2, "b"), (2, 3, "a")]), 0, 0),
            tr.GraphMonomial(tr.TestGraph(range(4), [(0, 1, "a"), (0, 2, "a"), (2, 3, "b")]), 0, 0),
            tr.GraphMonomial(tr.TestGraph(range(3), [(0, 1, "a"), (1, 0, "a"), (0, 2, "b"), (2, 2, "a")]), 0, 0),
        ]
    J = np.ones((N, N))
    op = fs.FreeSumOperator(J, J, x)
    rows = []
    ok = True
    bad = None
    for g in graphs:
        if not tr.gcc_is_tree(g):
            raise ParameterError("the bijection needs monomials whose GCC is a tree")
        m = fs.injective_trace_freesum(g, op, count_only=True)
        c = _component_injective_count(g, N, x)
        rows.append({"graph": tr.format_graph(g), "morphisms": m, "maps": c})
        if m != c:
            ok = False
            bad = bad or rows[-1]
    return LemmaResult("morphism_bijection", ok, len(rows), {"rows": rows, "N": N},
                       bad, time.perf_counter() - t0)


# -- (iii) trace identity ------------------------------------------------------

def _canonical_monomial(g: tr.GraphMonomial):
    """Isomorphism-invariant key of a rooted monomial on few vertices."""
    vs = list(g.vertices)
    others = [v for v in vs if v != g.v_in]
    best = None
    for perm in itertools.permutations(range(1, len(vs))):
        idx = {g.v_in: 0}
        idx.update({v: p for v, p in zip(others, perm)})
        key = tuple(sorted((idx[e.src], idx[e.tar], e.label, e.star) for e in g.edges))
        if best is None or key < best:
            best = key
    return (len(vs), best)


def tree_gcc_family(max_vertices: int = 5, max_cycle: int = 5, simple_vertices: int = 4) -> List[tr.GraphMonomial]:
    """Rooted two-color monomials with a tree GCC, deduplicated up to isomorphism.

    Two sources: quotients of colored cycles of length ``<= max_cycle`` (the
    graphs met by the moment expansion) and simple two-colored graphs on at
    most ``simple_vertices`` vertices with every vertex tried as the root.
    """
    seen = set()
    out = []

    def add(g):
        if len(g.vertices) > max_vertices or not g.edges:
            return
        if not tr.gcc_is_tree(g):
            return
        key = _canonical_monomial(g)
        if key not in seen:
            seen.add(key)
            out.append(g)

    for m in range(1, max_cycle + 1):
        for f in itertools.product("ab", repeat=m):
            g = tr.cycle_monomial(m, f)
            for pi in tr.enumerate_partitions(g.vertices):
                add(tr.quotient(g, pi))
    for n in range(2, simple_vertices + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for choice in itertools.product(range(3), repeat=len(pairs)):
            edges = [tr.Edge(u, w, "ab"[c - 1]) for (u, w), c in zip(pairs, choice) if c]
            T = tr.TestGraph(range(n), edges)
            if not edges or not T.is_connected():
                continue
            for r in range(n):
                add(tr.GraphMonomial(T, r, r, check=False))
    return out


def _random_hermitian(rng: np.random.Generator, N: int, density: float = 1.0) -> np.ndarray:
    X = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    if density < 1.0:
        X = X * (rng.random((N, N)) < density)
    return (X + X.conj().T) / 2


def trace_identity(seeds: Iterable[int] = range(50), graphs: Optional[Sequence[tr.GraphMonomial]] = None,
                   N: int = 5, tol: float = REL_TOL) -> LemmaResult:
    """``tr0_rho(g(a, b)) = sum_{sigma in P#} tr0_rho(g^sigma(A, B))`` per realization.

    The left side enumerates injective morphisms into the free-sum graph; the
    right side sums matrix injective traces over the amalgamations of ``g``.
    """
    t0 = time.perf_counter()
    graphs = list(graphs) if graphs is not None else tree_gcc_family()
    amalg = []
    for g in graphs:
        amalg.append([tr.quotient(g, s.partition) for s in tr.enumerate_amalgamations(g, include_identity=True)])
    checked = 0
    worst = 0.0
    bad = None
    for s in seeds:
        rng = make_rng([int(s), 3])
        A = _random_hermitian(rng, N)
        B = _random_hermitian(rng, N)
        rho = int(rng.integers(N))
        op = fs.FreeSumOperator(A, B, rho)
        assignment = {"a": A, "b": B}
        for g, qs in zip(graphs, amalg):
            lhs = fs.injective_trace_freesum(g, op)
            rhs = sum(tr.injective_trace(q, assignment, rho) for q in qs)
            checked += 1
            scale = max(abs(lhs), abs(rhs), 1e-300)
            err = abs(lhs - rhs) / scale
            worst = max(worst, err)
            if err > tol and bad is None:
                bad = {"seed": int(s), "graph": tr.format_graph(g), "lhs": lhs, "rhs": rhs}
    return LemmaResult("trace_identity", bad is None, checked,
                       {"graphs": len(graphs), "N": N, "max_rel_error": worst},
                       bad, time.perf_counter() - t0)


# -- (iv) product of traces and glued sums -----------------------------------

def _glued_amalgamations(h: tr.GraphMonomial, h2: tr.GraphMonomial):
    """``P_#(h, h')``: partial matchings of non-root vertices of ``h`` with those of ``h'``."""
    glued = tr.glue_at_root(h, h2)
    left = [(0, v) for v in h.vertices if v != h.v_in]
    right = [(1, v) for v in h2.vertices if v != h2.v_in]
    for k in range(0, min(len(left), len(right)) + 1):
        for ls in itertools.combinations(left, k):
            for rs in itertools.permutations(right, k):
                pairs = {a: b for a, b in zip(ls, rs)}
                blocks = []
                taken = set(rs)
                for v in glued.vertices:
                    if v in taken:
                        continue
                    blocks.append({v, pairs[v]} if v in pairs else {v})
                yield tr.quotient(glued, tr.VertexPartition.from_blocks(blocks))


def glue_product_identity(seeds: Iterable[int] = range(20), N: int = 5, tol: float = REL_TOL,
                          pairs: Optional[Sequence[Tuple[tr.GraphMonomial, tr.GraphMonomial]]] = None) -> LemmaResult:
    """``tr0(h) tr0(h') = sum_{sigma in P#(h,h')} tr0((h.h')^sigma)`` on random matrices."""
    t0 = time.perf_counter()
    if pairs is None:
        g1 = tr.GraphMonomial(tr.TestGraph(range(2), [(0, 1, "a"), (1, 0, "b")]), 0, 0)
        g2 = tr.GraphMonomial(tr.TestGraph(range(3), [(0, 1, "a"), (1, 2, "b"), (2, 0, "a", True)]), 0, 0)
        g3 = tr.GraphMonomial(tr.TestGraph(range(2), [(0, 1, "b"), (1, 1, "a")]), 0, 0)
        g4 = tr.cycle_monomial(3, "aab")
        pairs = [(g1, g2), (g2, g3), (g1, g1), (g4, g3), (g2, g4)]
    checked = 0
    bad = None
    worst = 0.0
    for s in seeds:
        rng = make_rng([int(s), 4])
        assignment = {"a": _random_hermitian(rng, N), "b": _random_hermitian(rng, N)}
        rho = int(rng.integers(N))
        for h, h2 in pairs:
            lhs = tr.injective_trace(h, assignment, rho) * tr.injective_trace(h2, assignment, rho)
            rhs = sum(tr.injective_trace(q, assignment, rho) for q in _glued_amalgamations(h, h2))
            checked += 1
            err = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
            worst = max(worst, err)
            if err > tol and bad is None:
                bad = {"seed": int(s), "h": tr.format_graph(h), "h2": tr.format_graph(h2), "lhs": lhs, "rhs": rhs}
    return LemmaResult("glue_product_identity", bad is None, checked, {"N": N, "max_rel_error": worst},
                       bad, time.perf_counter() - t0)


# -- (v) factorization -------------------------------------------------------

def _color_part(g: tr.GraphMonomial, color: str) -> tr.TestGraph:
    edges = [e for e in g.edges if e.label == color]
    vs = sorted({e.src for e in edges} | {e.tar for e in edges}, key=repr)
    return tr.TestGraph(vs, edges)


def factorization_identity(graphs: Optional[Sequence[tr.GraphMonomial]] = None, N: int = 5,
                           seeds: Iterable[int] = range(3), tol: float = REL_TOL) -> LemmaResult:
    """Exact finite-N factorization under uniform conjugation of ``B``.

    Averaging over all of ``S_N``,
    ``(1/N) E Tr0(g(A, U B U*)) = (N-Va)! (N-Vb)! / ((N-V)! (N-1)!) N^(Ka+Kb-2) t(g_a(A)) t(g_b(B))``
    where ``g_a``, ``g_b`` are the single-color parts with ``Va``, ``Vb``
    vertices and ``Ka``, ``Kb`` components and ``t = N^-K Tr0``.
    """
    t0 = time.perf_counter()
    if N > 6:
        raise BudgetExceeded("the exact average over S_N is limited to N <= 6")
    if graphs is None:
        graphs = [
            tr.cycle_monomial(2, "ab"),
            tr.cycle_monomial(4, "abab"),
            tr.GraphMonomial(tr.TestGraph(range(3), [(0, 1, "a"), (1, 2, "b")]), 0, 0),
            tr.GraphMonomial(tr.TestGraph(range(4), [(0, 1, "a"), (1, 0, "a"), (1, 2, "b"), (2, 3, "a")]), 0, 0),
            tr.cycle_monomial(3, "aab"),
        ]
    perms = list(itertools.permutations(range(N)))
    checked = 0
    worst = 0.0
    bad = None
    for s in seeds:
        rng = make_rng([int(s), 5])
        A = _random_hermitian(rng, N)
        B = _random_hermitian(rng, N)
        for g in graphs:
            ga, gb = _color_part(g, "a"), _color_part(g, "b")
            if not ga.edges or not gb.edges:
                raise ParameterError("factorization needs both colors present")
            V, Va, Vb = len(g.vertices), len(ga.vertices), len(gb.vertices)
            Ka, Kb = len(ga.connected_components()), len(gb.connected_components())
            ta = tr.normalized_injective_trace_multi(ga, {"a": A})
            tb = tr.normalized_injective_trace_multi(gb, {"b": B})
            coef = (math.factorial(N - Va) * math.factorial(N - Vb)
                    / (math.factorial(N - V) * math.factorial(N - 1))) * float(N) ** (Ka + Kb - 2)
            rhs = coef * ta * tb
            total = 0j
            for p in perms:
                inv = np.argsort(p)
                Bp = B[np.ix_(inv, inv)]
                total += tr.normalized_injective_trace_multi(g.graph, {"a": A, "b": Bp}) * N  # Tr0
            lhs = total / len(perms) / N
            checked += 1
            err = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
            worst = max(worst, err)
            if err > tol and bad is None:
                bad = {"seed": int(s), "graph": tr.format_graph(g), "lhs": lhs, "rhs": rhs}
    return LemmaResult("factorization_identity", bad is None, checked,
                       {"N": N, "permutations": len(perms), "max_rel_error": worst},
                       bad, time.perf_counter() - t0)


def lemma_suite(seed: int = 0, trace_seeds: int = 50, N: int = 5) -> LemmaReport:
    """Run the five exact lemma checks; seeds are offset by ``seed``."""
    base = int(seed)
    results = [
        merge_monotonicity(seed=base),
        morphism_bijection(),
        trace_identity(seeds=range(base, base + trace_seeds), N=N),
        glue_product_identity(seeds=range(base, base + 20), N=N),
        factorization_identity(seeds=range(base, base + 2), N=N),
    ]
    return LemmaReport(results)


# ---------------------------------------------------------------------------
# Markov bound on the non-tree vertices
# ---------------------------------------------------------------------------

def complement_counts(A, B, ns: Sequence[int]) -> Dict[int, int]:
    """``|F_N(n)^c| = #{x : R(x) < n}`` for each ``n``."""
    ns = [int(n) for n in ns]
    kmax = max(ns) if ns else 0
    N = (A.N if isinstance(A, HermitianMatrix) else A.shape[0])
    if kmax <= 0:
        return {n: 0 for n in ns}
    R = fs.colored_girths(A, B, kmax)
    return {n: (0 if n <= 0 else int(np.sum(R < n))) for n in ns}


@dataclass
class MarkovReport:
    family: str
    C: int
    kappa: float
    rows: List[Dict[str, object]]
    seeds: Tuple[int, int]
    samples: int
    passed: bool
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _bootstrap_upper(x: np.ndarray, rng, n_boot: int = 2000, level: float = 0.95) -> float:
    if len(x) < 2:
        return float(x.mean()) if len(x) else 0.0
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    means = x[idx].mean(axis=1)
    return float(np.quantile(means, level))


def markov_bound_check(family: str = "sparse_bounded", C: int = 1, Ns: Sequence[int] = (500, 1000),
                       kappa: Optional[float] = None, ns: Optional[Sequence[int]] = None, seeds: int = 200,
                       seed0: int = 0, n_boot: int = 2000, weights: str = "unit") -> MarkovReport:
    """Monte Carlo ``E|F_N(n)^c|`` against ``(e C^2)^n``.

    ``A`` and ``B`` are independent draws of ``family`` with parameter ``C``
    (each row has at most ``C`` nonzeros for ``sparse_bounded``); ``B`` is
    additionally conjugated by a uniform permutation.  ``n`` ranges over
    ``ns`` or ``0..floor(kappa log N)``.  A row passes when the 95% bootstrap
    upper confidence limit of the mean is below the bound.
    """
    C = int(C)
    if family not in ("sparse_bounded", "permutation_sum"):
        raise ParameterError("markov_bound_check needs a sparse family")
    sparsity = C if family == "sparse_bounded" else 2 * C
    limit = math.inf if sparsity <= 1 else 1.0 / (2.0 * math.log(sparsity))
    if kappa is not None and not (0 < kappa < limit):
        raise ParameterError(f"kappa must lie in (0, 1/(2 log C)) = (0, {limit:.4g})", offending=kappa)
    if ns is None and kappa is None:
        raise ParameterError("give kappa or an explicit list of n")
    rows = []
    ok = True
    rng = make_rng([seed0, 99])
    for N in Ns:
        nlist = list(ns) if ns is not None else list(range(0, int(math.floor(kappa * math.log(N))) + 1))
        if kappa is not None:
            over = [n for n in nlist if n > kappa * math.log(N)]
            if over:
                raise ParameterError(f"n = {over} exceed kappa log N = {kappa * math.log(N):.3g}")
        counts = {n: [] for n in nlist}
        for s in range(seeds):
            ss = np.random.SeedSequence([int(seed0), int(N), int(s)]).generate_state(3)
            A = generate(ModelSpec(family, int(N), seed=int(ss[0]), C=C, weights=weights))
            B = permute_conjugate(generate(ModelSpec(family, int(N), seed=int(ss[1]), C=C, weights=weights)),
                                  int(ss[2]))
            got = complement_counts(A, B, nlist)
            for n in nlist:
                counts[n].append(got[n])
        for n in nlist:
            x = np.asarray(counts[n], dtype=float)
            bound = (math.e * sparsity ** 2) ** n
            upper = _bootstrap_upper(x, rng, n_boot)
            good = upper < bound if n > 0 else float(x.max(initial=0)) == 0.0
            ok &= bool(good)
            rows.append({"N": int(N), "n": int(n), "mean": float(x.mean()), "upper95": upper,
                         "bound": bound, "passed": bool(good)})
    return MarkovReport(family, C, float(kappa) if kappa is not None else math.nan, rows,
                        (0, int(seeds) - 1), seeds, bool(ok),
                        notes=["radius-n balls are induced subgraphs of A + B",
                               "per-trial seeds derive from SeedSequence([seed0, N, trial])"])
