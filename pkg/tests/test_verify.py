import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freediag import BudgetExceeded, ModelSpec, ParameterError, generate
from freediag import traffic as tr
from freediag import verify as vf


# -- Frobenius assumption ----------------------------------------------------------

def test_frobenius_power_zero_and_identity():
    assert vf.frobenius_power(np.zeros((5, 5)), 3) == 0
    assert vf.frobenius_power(np.eye(5), 4) == 1
    assert vf.frobenius_power(np.zeros((5, 5)), 0) == 1


def test_frobenius_power_sparse_matches_dense():
    X = generate(ModelSpec("sparse_bounded", 40, seed=3, C=3, weights="signs"))
    assert math.isclose(vf.frobenius_power(X, 5), vf.frobenius_power(X.to_dense(), 5), rel_tol=1e-12)


def test_bounded_model_never_exceeds_norm_power():
    spec = ModelSpec("sparse_bounded", 60, seed=10, C=2, weights="signs")
    rep = vf.check_frobenius(spec, 6, 20, C=None)
    assert rep.estimates["norm_bound_violations"] == 0
    assert rep.estimates["max_sample"] <= 2 ** 12
    assert rep.samples == 20 and rep.seeds == (10, 29)


def test_frobenius_er_log_squared_bounded():
    chats = []
    for N in (100, 200, 400):
        Np = math.log(N) ** 2
        M = max(1, round(math.log(Np) / math.log(math.log(Np))))
        rep = vf.check_frobenius(ModelSpec("erdos_renyi", N, seed=1, p=Np / N), M, 5, C=4.0)
        assert rep.passed
        chats.append(rep.estimates["C_hat"])
    assert max(chats) - min(chats) < 0.5


def test_frobenius_sparse_er_flagged():
    rep = vf.check_frobenius(ModelSpec("erdos_renyi", 200, seed=1, p=1 / 200), 16, 3, C=4.0)
    assert not rep.passed


def test_frobenius_overflow_refused():
    with pytest.raises(ParameterError, match="overflow"):
        vf.check_frobenius(ModelSpec("diluted_wigner", 50, atom=40.0), 400, 1)


def test_assumption_report_json():
    rep = vf.check_frobenius(ModelSpec("sparse_bounded", 20, C=1), 2, 2, C=2.0)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["check"] == "frobenius" and d["samples"] == 2 and d["seeds"] == [0, 1]


# -- injective growth ------------------------------------------------------------------

def test_double_tree_shape():
    rng = np.random.default_rng(0)
    for n in (2, 3, 5, 7):
        T = vf.sample_double_tree(rng, n)
        assert len(T.vertices) == n and len(T.edges) == 2 * (n - 1)
        assert T.is_connected()
    with pytest.raises(ParameterError):
        vf.sample_double_tree(rng, 1)


def test_exact_expectation_matches_brute_monte_carlo():
    # N = 4 ER: enumerate the law of one entry exactly and average Tr0 over draws
    N, p = 6, 0.4
    spec = ModelSpec("erdos_renyi", N, seed=0, p=p)
    law = vf._entry_law(spec)
    T = tr.TestGraph(range(3), [(0, 1, "x"), (1, 0, "x"), (1, 2, "x"), (2, 1, "x")])
    exact = vf.exact_injective_expectation(T, N, law)
    # every pair has second moment 1/N: N(N-1)(N-2) * N^-2 / N
    assert math.isclose(exact, (N - 1) * (N - 2) / N ** 2, rel_tol=1e-12)
    vals = [tr.normalized_injective_trace_multi(T, {"x": generate(spec.replace(seed=s)).to_dense()})
            for s in range(3000)]
    vals = np.real(vals)
    assert abs(vals.mean() - exact) <= 4 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_injective_growth_er_is_order_one():
    spec = ModelSpec("erdos_renyi", 50, seed=0, p=0.3)
    rng0 = np.random.default_rng(1)
    graphs = [vf.sample_double_tree(rng0, 3) for _ in range(2)]
    rep = vf.check_injective_growth(spec, graphs, M=6, c=1.0, trials=4, Ns=[30, 60], h_max=0.2)
    assert rep.passed
    for row in rep.estimates["per_N"].values():
        assert row["max_abs"] < 3


def test_injective_growth_sparse_bounded():
    C, c, M = 2, 1.0, 4
    spec = ModelSpec("sparse_bounded", 40, seed=0, C=C, weights="signs")
    graphs = [tr.TestGraph(range(2), [(0, 1, "x"), (1, 0, "x")]),
              tr.TestGraph(range(3), [(0, 1, "x"), (1, 2, "x"), (2, 0, "x")])]
    rep = vf.check_injective_growth(spec, graphs, M=M, c=c, trials=3)
    assert rep.estimates["per_N"]["40"]["max_abs"] <= C ** (2 * c * M)


def test_single_edge_expectation_is_zero():
    spec = ModelSpec("erdos_renyi", 20, seed=0, p=0.3)
    T = tr.TestGraph(range(3), [(0, 1, "x"), (1, 0, "x"), (1, 2, "x")])
    assert vf.exact_injective_expectation(T, 20, vf._entry_law(spec)) == 0.0
    spec = ModelSpec("diluted_wigner", 20, seed=0)
    assert vf.exact_injective_expectation(T, 20, vf._entry_law(spec)) == 0.0


def test_injective_growth_size_cap():
    spec = ModelSpec("erdos_renyi", 20, seed=0, p=0.3)
    big = tr.TestGraph(range(4), [(0, 1, "x"), (1, 2, "x"), (2, 3, "x")])
    with pytest.raises(ParameterError, match="exceeds"):
        vf.check_injective_growth(spec, [big], M=2, c=1.0, trials=1)


def test_injective_growth_callable_sampler():
    spec = ModelSpec("diluted_wigner", 30, seed=0)

    def trees(rng):
        return vf.sample_double_tree(rng, 3)

    rep = vf.check_injective_growth(spec, trees, M=6, c=1.0, trials=2, graphs_per_trial=2)
    assert rep.graph_family == "trees"
    assert rep.estimates["per_N"]["30"]["n_values"] == 4


# -- entrywise products --------------------------------------------------------------------

def test_entrywise_ones_gives_same_value():
    spec = ModelSpec("erdos_renyi", 12, seed=0, p=0.5)
    rep = vf.check_entrywise_product(spec, np.ones((12, 12)), 1.0, M=6)
    assert rep.passed
    assert math.isclose(rep.estimates["max_ratio"], 1.0, rel_tol=1e-12)


def test_entrywise_scaled_by_epsilon_power():
    eps = 0.1
    spec = ModelSpec("erdos_renyi", 10, seed=2, p=0.5)
    rep = vf.check_entrywise_product(spec, eps * np.ones((10, 10)), eps, M=6)
    for row in rep.estimates["rows"]:
        assert abs(row["value_W"] - eps ** row["n_edges"] * row["value_X"]) <= 1e-12 * max(1.0, abs(row["value_X"]))


def test_entrywise_random_signs_keep_term_moduli():
    rng = np.random.default_rng(5)
    N = 8
    S = rng.choice([-1.0, 1.0], size=(N, N))
    S = np.triu(S) + np.triu(S, 1).T
    X = generate(ModelSpec("erdos_renyi", N, seed=1, p=0.5)).to_dense()
    W = X * S
    T = tr.TestGraph(range(3), [(0, 1, "x"), (1, 2, "x"), (2, 0, "x")])
    absW = tr.normalized_injective_trace_multi(T, {"x": np.abs(W)})
    absX = tr.normalized_injective_trace_multi(T, {"x": np.abs(X)})
    assert math.isclose(absW.real, absX.real, rel_tol=1e-12)
    rep = vf.check_entrywise_product(ModelSpec("erdos_renyi", N, seed=1, p=0.5), S, 1.0, M=6)
    assert rep.passed


def test_entrywise_rejects_large_gamma():
    with pytest.raises(ParameterError):
        vf.check_entrywise_product(ModelSpec("erdos_renyi", 6, p=0.5), 3 * np.ones((6, 6)), 1.0, M=6)


# -- Stirling ratios --------------------------------------------------------------------------

def _falling_fraction(N, V):
    out = Fraction(1)
    for k in range(V):
        out *= Fraction(N - k, N)
    return out


def test_stirling_small_cases():
    r = vf.stirling_ratio(1000, 1)
    assert r.value == r.leading == 1000 and r.rel_error == 0
    r = vf.stirling_ratio(1000, 2)
    assert math.isclose(r.rel_error, 1 / 1000, rel_tol=1e-12)


def test_stirling_large_V():
    N, V = 10**4, 20
    r = vf.stirling_ratio(N, V)
    want = float(1 - _falling_fraction(N, V))
    assert math.isclose(r.rel_error, want, rel_tol=1e-12)
    assert r.rel_error <= V * V / N


def test_stirling_monotone_in_N():
    errs = [vf.stirling_ratio(N, 8).rel_error for N in (100, 1000, 10**4, 10**5)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_stirling_regime():
    with pytest.raises(ParameterError):
        vf.stirling_ratio(100, 10)


def _gamma_fraction(N, V, V1, V2, K1, K2):
    e = K1 + K2 - 1 - V1 - V2 + V
    num = math.factorial(N - V1) * math.factorial(N - V2) * N * N ** (K1 + K2 - 2)
    den = math.factorial(N - V) * math.factorial(N)
    return Fraction(num, den) / Fraction(N) ** e


@given(st.sampled_from([400, 1000, 5000]), st.data())
def test_gamma_ratio_exact_oracle(N, data):
    V1 = data.draw(st.integers(1, 8))
    V2 = data.draw(st.integers(1, 8))
    V = data.draw(st.integers(max(V1, V2), min(V1 + V2, 19)))
    K1 = data.draw(st.integers(1, V1))
    K2 = data.draw(st.integers(1, V2))
    if K1 + K2 - 1 - V1 - V2 + V > 0 or V * V >= N:
        with pytest.raises(ParameterError):
            vf.gamma_ratio(N, V, V1, V2, K1, K2)
        return
    r = vf.gamma_ratio(N, V, V1, V2, K1, K2)
    exact = _gamma_fraction(N, V, V1, V2, K1, K2)
    assert math.isclose(r.rel_error, abs(float(exact - 1)), rel_tol=1e-9, abs_tol=1e-15)
    assert math.isclose(r.value / r.leading, float(exact), rel_tol=1e-9)


def test_gamma_ratio_rejects_positive_eta():
    with pytest.raises(ParameterError, match="eta"):
        vf.gamma_ratio(1000, 4, 2, 2, 2, 2)


# -- lemma suite -------------------------------------------------------------------------------

def test_merge_monotonicity_small():
    res = vf.merge_monotonicity(max_vertices=2, cross_check=50)
    assert res.passed and res.checked > 0
    with pytest.raises(BudgetExceeded):
        vf.merge_monotonicity(max_vertices=4)


def test_morphism_bijection_default():
    res = vf.morphism_bijection()
    assert res.passed
    assert all(r["morphisms"] == r["maps"] for r in res.details["rows"])


def test_morphism_bijection_rejects_non_tree():
    g = tr.cycle_monomial(2, "ab")
    with pytest.raises(ParameterError):
        vf.morphism_bijection([g])


def test_tree_gcc_family_is_tree_and_bounded():
    fam = vf.tree_gcc_family()
    assert len(fam) > 100
    for g in fam:
        assert tr.gcc_is_tree(g) and len(g.vertices) <= 5 and g.v_in == g.v_out


def test_trace_identity_few_seeds():
    assert vf.trace_identity(seeds=range(3)).passed


def test_trace_identity_detects_non_tree_gcc():
    # control: the mixed 2-cycle has a non-tree GCC and the identity must break
    g = tr.cycle_monomial(2, "ab")
    res = vf.trace_identity(seeds=range(2), graphs=[g])
    assert not res.passed and res.counterexample is not None


def test_glue_product_identity():
    res = vf.glue_product_identity(seeds=range(5))
    assert res.passed and res.details["max_rel_error"] < 1e-12


def test_factorization_identity():
    res = vf.factorization_identity(seeds=range(1), N=4)
    assert res.passed
    with pytest.raises(BudgetExceeded):
        vf.factorization_identity(N=7)


def test_lemma_report_serializes():
    rep = vf.LemmaReport([vf.morphism_bijection()])
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["passed"] and rep["morphism_bijection"].passed
    with pytest.raises(KeyError):
        rep["nope"]


# -- Markov bound -------------------------------------------------------------------------------

def test_complement_counts_examples():
    A = generate(ModelSpec("sparse_bounded", 50, seed=0, C=1))
    B = generate(ModelSpec("sparse_bounded", 50, seed=1, C=1))
    got = vf.complement_counts(A, B, [0, 1, 2])
    assert got[0] == 0 and got[1] <= got[2]
    N = 20
    Ae, Bo = np.zeros((N, N)), np.zeros((N, N))
    for k in range(0, N, 4):
        Ae[k, k + 2] = Ae[k + 2, k] = 1
        Bo[k + 1, k + 3] = Bo[k + 3, k + 1] = 1
    assert vf.complement_counts(Ae, Bo, [1, 2, 3]) == {1: 0, 2: 0, 3: 0}


def test_markov_small_run():
    rep = vf.markov_bound_check(C=1, Ns=(200,), ns=[0, 1], seeds=20)
    assert rep.passed
    assert rep.rows[0]["n"] == 0 and rep.rows[0]["mean"] == 0
    assert math.isclose(rep.rows[1]["bound"], math.e)
    json.dumps(rep.to_dict())


def test_markov_kappa_validation():
    with pytest.raises(ParameterError):
        vf.markov_bound_check(C=2, kappa=1.0, Ns=(100,), seeds=1)
    with pytest.raises(ParameterError):
        vf.markov_bound_check(C=2, Ns=(100,), seeds=1)
    with pytest.raises(ParameterError):
        vf.markov_bound_check(C=2, kappa=0.5, ns=[5], Ns=(100,), seeds=1)
    rep = vf.markov_bound_check(C=2, kappa=0.7, Ns=(100,), seeds=3)
    assert [r["n"] for r in rep.rows] == list(range(0, int(0.7 * math.log(100)) + 1))
