import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from freediag import BudgetExceeded, ModelSpec, ParameterError, generate
from freediag import freesum as fs
from freediag import traffic as tr
from freediag.models import conjugate_by, power_iteration_norm

from conftest import random_hermitian

ROOT = fs.ROOT


def sparse_pair(N, C, seed, weights="signs"):
    A = generate(ModelSpec("sparse_bounded", N, seed=2 * seed, C=C, weights=weights))
    B = generate(ModelSpec("sparse_bounded", N, seed=2 * seed + 1, C=C, weights=weights))
    return A, B


def with_diag(X, rng):
    d = X.to_dense() + np.diag(rng.standard_normal(X.N))
    return d


# -- vertex structure ------------------------------------------------------------

def test_component_of_root_hand_example():
    # root 2 of 3 in 1-based form is index 1
    op = fs.FreeSumOperator(np.zeros((3, 3)), np.zeros((3, 3)), x=1)
    assert set(fs.component_a(op, ROOT)) == {ROOT, (0, "a"), (2, "a")}


def test_component_b_of_a_vertex():
    op = fs.FreeSumOperator(np.zeros((3, 3)), np.zeros((3, 3)), x=1)
    v = (2, "a")
    assert set(fs.component_b(op, v)) == {(2, "a"), (2, 0, "b"), (2, 1, "b")}


@given(st.lists(st.integers(0, 4), min_size=0, max_size=5), st.sampled_from("ab"))
def test_components_have_N_vertices_and_distinct_phi(path, color):
    N, x = 5, 0
    op = fs.FreeSumOperator(np.zeros((N, N)), np.zeros((N, N)), x)
    v = ROOT
    prev = x
    tags = itertools.cycle("ab")
    for k in path:
        if k == prev:
            continue
        v = (v[:-1] if v else ()) + (k, next(tags))
        prev = k
    assert op.is_vertex(v)
    comp = fs.component(op, v, color)
    assert len(comp) == N and v in comp
    phis = [fs.phi_project(w, x) for w in comp]
    assert sorted(phis) == list(range(N))
    # every member reports the same component
    keys = {op.component(w, color) for w in comp}
    assert len(keys) == 1


def test_phi_project_examples():
    assert fs.phi_project(ROOT, 6) == 6
    assert fs.phi_project((2, 4, "b"), 0) == 4


def test_is_vertex():
    op = fs.FreeSumOperator(np.zeros((4, 4)), np.zeros((4, 4)), 1)
    assert op.is_vertex(ROOT)
    assert op.is_vertex((2, 3, "b"))
    assert not op.is_vertex((1, "a"))
    assert not op.is_vertex((2, 2, "a"))
    assert not op.is_vertex((7, "a"))


# -- amplitudes -----------------------------------------------------------------------

def test_amplitude_examples(rng):
    N = 4
    A, B = random_hermitian(rng, N), random_hermitian(rng, N)
    op = fs.FreeSumOperator(A, B, x=1)
    assert np.isclose(fs.amplitude(op, ROOT, ROOT), A[1, 1] + B[1, 1])
    for j in (0, 2, 3):
        assert np.isclose(fs.amplitude(op, ROOT, (j, "a")), A[j, 1])
        assert np.isclose(fs.amplitude(op, ROOT, (j, "b")), B[j, 1])
    op0 = fs.FreeSumOperator(A, B, x=0)
    assert fs.amplitude(op0, (1, "a"), (2, "b")) == 0


def _random_vertex(op, rng, length):
    v, prev = ROOT, op.x
    tags = "ab" if rng.random() < 0.5 else "ba"
    for s in range(length):
        k = int(rng.integers(op.N - 1))
        k = k if k < prev else k + 1
        v = (v[:-1] if v else ()) + (k, tags[s % 2])
        prev = k
    return v


@given(st.integers(0, 2**32 - 1))
def test_self_adjoint_amplitudes(seed):
    rng = np.random.default_rng(seed)
    N = 4
    A, B = random_hermitian(rng, N), random_hermitian(rng, N)
    op = fs.FreeSumOperator(A, B, 0)
    v = _random_vertex(op, rng, int(rng.integers(0, 4)))
    for w, amp in op.neighbors(v):
        assert np.isclose(amp, np.conj(fs.amplitude(op, w, v)))
        assert np.isclose(amp, fs.amplitude(op, v, w))
    w = _random_vertex(op, rng, int(rng.integers(0, 4)))
    assert np.isclose(fs.amplitude(op, v, w), np.conj(fs.amplitude(op, w, v)))


@given(st.integers(0, 2**32 - 1), st.sampled_from("ab"))
def test_color_steps_stay_in_component(seed, color):
    rng = np.random.default_rng(seed)
    N = 5
    op = fs.FreeSumOperator(random_hermitian(rng, N), random_hermitian(rng, N), 2)
    v = _random_vertex(op, rng, int(rng.integers(0, 4)))
    comp = set(fs.component(op, v, color))
    for w, _ in op.color_neighbors(v, color):
        assert w in comp


# -- moments --------------------------------------------------------------------------

def test_walk_low_orders(rng):
    N, x = 6, 2
    A, B = random_hermitian(rng, N), random_hermitian(rng, N)
    op = fs.FreeSumOperator(A, B, x)
    m = fs.rooted_moments(op, 2)
    assert m[0] == 1
    assert np.isclose(m[1], A[x, x] + B[x, x])
    off = sum(abs(A[x, j]) ** 2 + abs(B[x, j]) ** 2 for j in range(N) if j != x)
    assert np.isclose(m[2], off + (A[x, x] + B[x, x]) ** 2)
    full = ((A + B) @ (A + B))[x, x]
    cross = 2 * sum((A[x, j] * B[j, x]).real for j in range(N) if j != x)
    assert np.isclose(full - m[2], cross)


def test_two_point_path_gives_central_binomials():
    # N = 2 with A = B = swap: the free sum is the bi-infinite path
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    op = fs.FreeSumOperator(S, S, 0)
    m = fs.rooted_moments(op, 10)
    for k in range(6):
        assert m[2 * k] == math.comb(2 * k, k)
        if 2 * k + 1 <= 10:
            assert m[2 * k + 1] == 0


@pytest.mark.parametrize("mode", ["hermitian", "general"])
def test_walk_modes_agree(rng, mode):
    A, B = sparse_pair(12, 2, 3)
    op = fs.FreeSumOperator(A, B, 4)
    ref = fs.rooted_moments(op, 7, mode="general")
    assert np.allclose(fs.rooted_moments(op, 7, mode=mode), ref, atol=1e-12)


def test_walk_symmetric_mode_complex_symmetric(rng):
    N = 5
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    A = (A + A.T) / 2
    B = A[::-1, ::-1].copy()
    op = fs.FreeSumOperator(A, B, 1)
    assert not op.hermitian and op.symmetric
    assert np.allclose(fs.rooted_moments(op, 5), fs.rooted_moments(op, 5, mode="general"), atol=1e-12)


def test_walk_budget():
    A = np.ones((30, 30))
    with pytest.raises(BudgetExceeded):
        fs.rooted_moments(fs.FreeSumOperator(A, A, 0), 6, budget=1000)
    with pytest.raises(ParameterError):
        fs.rooted_moments(fs.FreeSumOperator(A, A, 0), -1)


def test_combinatorial_first_moment(rng):
    A, B = random_hermitian(rng, 5), random_hermitian(rng, 5)
    assert np.isclose(fs.rooted_moment_combinatorial(A, B, 3, 1), A[3, 3] + B[3, 3])
    assert fs.rooted_moment_combinatorial(A, B, 3, 0) == 1


def test_combinatorial_diagonal_case(rng):
    A, B = np.diag(rng.standard_normal(6)), np.diag(rng.standard_normal(6))
    for m in (2, 3, 4):
        assert np.isclose(fs.rooted_moment_combinatorial(A, B, 2, m), (A[2, 2] + B[2, 2]) ** m)


def test_combinatorial_guard():
    with pytest.raises((BudgetExceeded, ParameterError)):
        fs.rooted_moment_combinatorial(np.eye(3), np.eye(3), 0, 7)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_walk_equals_combinatorial_dense(seed, m):
    rng = np.random.default_rng(seed)
    N = 5
    A, B = random_hermitian(rng, N, density=0.7), random_hermitian(rng, N, density=0.7)
    rho = int(rng.integers(N))
    w = fs.rooted_moment_walk(fs.FreeSumOperator(A, B, rho), m)
    c = fs.rooted_moment_combinatorial(A, B, rho, m)
    assert abs(w - c) <= 1e-10 * max(1.0, abs(w))


@given(st.integers(0, 2**32 - 1))
def test_root_independence(seed):
    rng = np.random.default_rng(seed)
    N = 6
    A, B = random_hermitian(rng, N, density=0.5), random_hermitian(rng, N, density=0.5)
    x, y = 0, int(rng.integers(1, N))
    perm = np.arange(N)
    perm[x], perm[y] = y, x
    P = np.eye(N)[:, perm]
    m1 = fs.rooted_moments(fs.FreeSumOperator(A, B, x), 6)
    m2 = fs.rooted_moments(fs.FreeSumOperator(P @ A @ P.T, P @ B @ P.T, y), 6)
    assert np.allclose(m1, m2, atol=1e-10)
    # the relabelled operator at another root shares the data
    op = fs.FreeSumOperator(A, B, x)
    assert np.allclose(fs.rooted_moments(op.with_root(y), 4), fs.rooted_moments(fs.FreeSumOperator(A, B, y), 4))


def test_girth_agreement_sparse():
    rng = np.random.default_rng(5)
    for seed in range(10):
        A, B = sparse_pair(40, 1, seed)
        Ad, Bd = with_diag(A, rng) * 0.5, B.to_dense()
        girths = fs.colored_girths(Ad, Bd, 6)
        S = Ad + Bd
        P = [np.eye(40)]
        for _ in range(6):
            P.append(P[-1] @ S)
        for x in range(40):
            mom = fs.rooted_moments(fs.FreeSumOperator(Ad, Bd, x), 6)
            for m in range(1, int(girths[x]) + 1):
                assert abs(mom[m] - P[m][x, x]) <= 1e-12


def test_girth_agreement_with_diagonal_scaling():
    rng = np.random.default_rng(8)
    A, B = sparse_pair(50, 1, 2)
    d = 1.0 / np.sqrt(rng.uniform(1, 3, 50))
    S = np.diag(d)
    At, Bt = S @ A.to_dense() @ S, S @ B.to_dense() @ S
    g = fs.colored_girths(At, Bt, 5)
    P = np.linalg.matrix_power
    for x in range(50):
        mom = fs.rooted_moments(fs.FreeSumOperator(At, Bt, x), 5)
        for m in range(1, int(g[x]) + 1):
            assert abs(mom[m] - P(At + Bt, m)[x, x]) <= 1e-12


def test_ball_norm_bound():
    A, B = sparse_pair(60, 2, 1)
    ball = fs.build_ball(fs.FreeSumOperator(A, B, 0), 4)
    H = ball.matrix
    assert abs(H - H.conj().T).max() == 0
    est = power_iteration_norm(H)
    assert est <= A.op_norm + B.op_norm + 1e-6


def test_ball_depths_and_phi():
    A, B = sparse_pair(30, 1, 4)
    op = fs.FreeSumOperator(A, B, 3)
    ball = fs.build_ball(op, 3)
    assert ball.vertices[0] == ROOT and ball.depth[0] == 0
    assert max(ball.depth) <= 3
    assert all(ball.phi[k] == op.j(v) for k, v in enumerate(ball.vertices))
    with pytest.raises(BudgetExceeded):
        fs.build_ball(op, 8, budget=5)


# -- colored girth -----------------------------------------------------------------------

def _girth_oracle(A, B, x, k_max):
    """GCC of the induced ball built as a TestGraph and checked by traffic.gcc."""
    A, B = np.asarray(A), np.asarray(B)
    both = (A != 0) | (B != 0)
    ball = {x}
    for k in range(1, k_max + 1):
        new = set(ball)
        for u in ball:
            new |= set(np.nonzero(both[u])[0].tolist())
        if new == ball:
            return k_max
        ball = new
        edges = []
        for lab, X in (("a", A), ("b", B)):
            for u in ball:
                for v in ball:
                    if u <= v and X[u, v] != 0:
                        edges.append((u, v, lab))
        T = tr.TestGraph(sorted(ball), edges)
        if edges and not tr.gcc_is_tree(T):
            return k - 1
    return k_max


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_colored_girth_matches_gcc_oracle(seed, C):
    A, B = sparse_pair(14, C, seed % 10**6)
    Ad, Bd = A.to_dense(), B.to_dense()
    x = seed % 14
    assert fs.colored_girth(Ad, Bd, x, 5) == _girth_oracle(Ad, Bd, x, 5)


def test_girth_loops_only_at_root():
    N = 6
    A, B = np.zeros((N, N)), np.zeros((N, N))
    A[2, 2] = B[2, 2] = 1.0
    assert fs.colored_girth(A, B, 2, 7) == 7


def test_girth_mixed_two_cycle():
    N = 6
    A, B = np.zeros((N, N)), np.zeros((N, N))
    A[0, 3] = A[3, 0] = 1.0
    B[0, 3] = B[3, 0] = 1.0
    assert fs.colored_girth(A, B, 0, 5) == 0


def test_girth_grows_for_large_N():
    A, B = sparse_pair(1000, 1, 7, weights="unit")
    g = fs.colored_girths(A, B, 6)
    assert np.median(g) >= 2


def test_count_tree_vertices_examples():
    A, B = sparse_pair(30, 1, 1)
    assert fs.count_tree_vertices(A, B, 0) == 30
    N = 20
    Ae, Bo = np.zeros((N, N)), np.zeros((N, N))
    ev, od = list(range(0, N, 2)), list(range(1, N, 2))
    for k in range(0, len(ev), 2):
        i, j = ev[k], ev[k + 1]
        Ae[i, j] = Ae[j, i] = 1
        i, j = od[k], od[k + 1]
        Bo[i, j] = Bo[j, i] = 1
    for n in range(5):
        assert fs.count_tree_vertices(Ae, Bo, n) == N


# -- diagonals and freeness ----------------------------------------------------------------------

def test_embed_diagonal_examples():
    N = 7
    z = 2 + 3j
    D = fs.embed_diagonal(np.full(N, z), x=1)
    vec = {ROOT: 1.0, (2, 4, "b"): 2.0}
    out = D.apply(vec)
    assert out[ROOT] == z and out[(2, 4, "b")] == 2 * z
    D2 = fs.embed_diagonal(np.arange(1, N + 1), x=0)
    # D = diag(1..N): vertex (3,5,b) in 1-based form multiplies by 5
    assert D2.value((2, 4, "b")) == 5
    D1 = fs.embed_diagonal(np.arange(N) + 1j, x=0)
    comp = D1.compose(D2)
    for v in [ROOT, (3, "a"), (1, 6, "b")]:
        assert comp.value(v) == D1.value(v) * D2.value(v)


def test_centered_single_factor():
    A, B = sparse_pair(30, 2, 2)
    val = fs.check_centered_alternating(A, B, 0, [fs.Factor.poly("a", [0, 1])])
    assert abs(val) <= 1e-12


def test_centered_alternating_words():
    rng = np.random.default_rng(4)
    A, B = sparse_pair(40, 2, 3)
    a1 = fs.Factor.poly("a", [0, 1])
    b1 = fs.Factor.poly("b", [0, 1])
    a2 = fs.Factor.poly("a", [0, 0, 1])
    d = rng.standard_normal(40)
    ad = fs.Factor("a", ((1.0, ("x", d, "x")),))
    for word in ([a1, b1], [a2, b1, a1], [b1, ad, b1]):
        assert abs(fs.check_centered_alternating(A, B, 5, word)) <= 1e-10


def test_centered_words_must_alternate():
    A, B = sparse_pair(10, 1, 0)
    a1 = fs.Factor.poly("a", [0, 1])
    with pytest.raises(ParameterError):
        fs.check_centered_alternating(A, B, 0, [a1, a1])


def test_uncentered_product_is_not_zero():
    # control: the same product without centering is generically nonzero
    A, B = sparse_pair(30, 2, 1)
    op = fs.FreeSumOperator(A, B, 0)
    a2b2 = fs._apply_factor(op, fs.Factor.poly("a", [0, 0, 1]),
                            fs._apply_factor(op, fs.Factor.poly("b", [0, 0, 1]), {ROOT: 1.0}))
    assert abs(a2b2.get(ROOT, 0)) > 0.1


# -- morphisms -------------------------------------------------------------------------

def test_injective_trace_freesum_tree_monomial(rng):
    N = 4
    A, B = random_hermitian(rng, N), random_hermitian(rng, N)
    g = tr.cycle_monomial(2, "aa")
    op = fs.FreeSumOperator(A, B, 1)
    # a single colored component sees only A
    assert np.isclose(fs.injective_trace_freesum(g, op), tr.injective_trace(g, {"a": A, "b": B}, 1))


@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_ball_matches_operator_neighbors(seed, depth):
    rng = np.random.default_rng(seed)
    N = 7
    A, B = random_hermitian(rng, N, density=0.4), random_hermitian(rng, N, density=0.4)
    op = fs.FreeSumOperator(A, B, int(rng.integers(N)))
    ball = fs.build_ball(op, depth)
    index = {v: k for k, v in enumerate(ball.vertices)}
    # reference BFS distances from the cached neighbor lists
    dist = {ROOT: 0}
    frontier = [ROOT]
    for d in range(1, depth + 1):
        nxt = []
        for v in frontier:
            for w, _ in op.neighbors(v):
                if w not in dist:
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    assert set(index) == set(dist)
    assert all(ball.depth[index[v]] == d for v, d in dist.items())
    H = ball.matrix.toarray()
    ref = np.zeros_like(H)
    for v, iv in index.items():
        for w, amp in op.neighbors(v):
            if w in index:
                ref[index[w], iv] = amp
    assert np.allclose(H, ref, atol=1e-14)
