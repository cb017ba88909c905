import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from freediag import HermitianMatrix, ModelSpec, ParameterError, generate
from freediag.models import (
    check_diluted_moments,
    conjugate_by,
    diluted_wigner_abs_moment,
    permute_conjugate,
    power_iteration_norm,
    sparsity_degree,
)


def test_erdos_renyi_two_by_two():
    for seed in range(5):
        X = generate(ModelSpec("erdos_renyi", 2, seed=seed, p=0.5)).to_dense()
        assert np.all(np.diag(X) == 0)
        assert X[0, 1] in (1 / math.sqrt(2), -1 / math.sqrt(2))
        assert X[0, 1] == X[1, 0]


def test_erdos_renyi_values_and_symmetry():
    N, p = 40, 0.3
    X = generate(ModelSpec("erdos_renyi", N, seed=3, p=p)).to_dense()
    s = math.sqrt(N * p * (1 - p))
    off = X[~np.eye(N, dtype=bool)]
    assert set(np.round(off, 12)) <= {round((1 - p) / s, 12), round(-p / s, 12)}
    assert np.array_equal(X, X.T)


def test_erdos_renyi_normalization_monte_carlo():
    N, p = 6, 0.3
    vals = np.array([generate(ModelSpec("erdos_renyi", N, seed=s, p=p)).to_dense()[0, 1]
                     for s in range(20000)])
    y = N * vals ** 2
    assert abs(y.mean() - 1.0) <= 4 * y.std(ddof=1) / math.sqrt(len(y))
    assert abs(vals.mean()) <= 4 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_seed_determinism_bitwise():
    spec = ModelSpec("erdos_renyi", 100, seed=7, p=0.3)
    assert generate(spec).to_bytes() == generate(spec).to_bytes()
    assert generate(spec).to_bytes() != generate(spec.replace(seed=8)).to_bytes()


@pytest.mark.parametrize("family,kw", [
    ("erdos_renyi", {"p": 0.2}),
    ("diluted_wigner", {"h": 1.0}),
    ("sparse_bounded", {"C": 2}),
    ("permutation_sum", {"C": 2, "weights": "signs"}),
])
def test_every_family_is_exactly_hermitian_and_deterministic(family, kw):
    spec = ModelSpec(family, 60, seed=11, **kw)
    X = generate(spec)
    d = X.to_dense()
    assert np.array_equal(d, d.conj().T)
    assert X.to_bytes() == generate(spec).to_bytes()


def test_diluted_wigner_second_moment():
    N = 100
    samples = []
    seed = 0
    while sum(len(s) for s in samples) < 100_000:
        X = generate(ModelSpec("diluted_wigner", N, seed=seed)).to_dense()
        samples.append(X[np.triu_indices(N, 1)])
        seed += 1
    x = np.concatenate(samples)[:100_000]
    y = N * np.abs(x) ** 2
    assert abs(y.mean() - 1.0) <= 3 * y.std(ddof=1) / math.sqrt(len(y))
    assert np.all(np.diag(X) == 0)


@pytest.mark.parametrize("N,t,K", [(100, 2.0, 2), (100, 2.0, 4), (50, 3.5, 6), (1000, 6.9, 8)])
def test_diluted_abs_moment_closed_form(N, t, K):
    # direct expectation over the three-point law
    q = 1.0 / (2 * t * t)
    direct = N * 2 * q * (t / math.sqrt(N)) ** K
    assert math.isclose(diluted_wigner_abs_moment(N, t, K), direct, rel_tol=1e-12)


def test_moment_check_skipped_at_first_order():
    # c*M < 2 means no pair with 2 <= k1,k2 is checked
    check_diluted_moments(100, 1e6, 1.0, 0.0, M=2.0, c=0.5)
    ModelSpec("diluted_wigner", 100, atom=1e6, moment_M=2.0, moment_c=0.5)


def test_huge_atom_rejected():
    N, h = 100, 1.0
    t = 10 * math.log(N) ** 2
    assert N * diluted_wigner_abs_moment(N, t, 4) / N > math.log(N) ** (4 * h) / N
    with pytest.raises(ParameterError, match=r"\(2, 2\)|k1"):
        generate(ModelSpec("diluted_wigner", N, atom=t, h=h, moment_M=8.0, moment_c=0.5))


def test_sparse_bounded_involution():
    X = generate(ModelSpec("sparse_bounded", 200, seed=1, C=1))
    d = X.to_dense()
    assert np.all(np.count_nonzero(d - np.diag(np.diag(d)), axis=1) <= 1)
    assert np.abs(d).sum(axis=1).max() <= 2


@given(st.integers(1, 4), st.integers(0, 10**6))
def test_sparse_bounded_row_count(C, seed):
    X = generate(ModelSpec("sparse_bounded", 30, seed=seed, C=C))
    assert sparsity_degree(X) <= C
    assert np.abs(X.to_dense()).max() <= C
    assert X.op_norm <= C + 1e-9


def test_sparse_bounded_rejects_large_C():
    with pytest.raises(ParameterError):
        generate(ModelSpec("sparse_bounded", 3, C=3))


def test_permutation_sum_norm():
    X = generate(ModelSpec("permutation_sum", 50, seed=4, C=3))
    assert power_iteration_norm(X) <= 6 + 1e-6
    assert sparsity_degree(X) <= 6


def test_invalid_specs():
    with pytest.raises(ParameterError):
        ModelSpec("erdos_renyi", 10, p=1.0)
    with pytest.raises(ParameterError):
        ModelSpec("sparse_bounded", 10, C=0)
    with pytest.raises(ParameterError):
        ModelSpec("gaussian", 10)
    with pytest.raises(ParameterError):
        generate(ModelSpec("erdos_renyi", 1, p=0.5))


def test_permute_conjugate_identity():
    I = HermitianMatrix(np.eye(7))
    assert np.array_equal(permute_conjugate(I, 3).to_dense(), np.eye(7))


def test_conjugate_by_hand_example():
    X = np.zeros((3, 3))
    X[0, 1] = X[1, 0] = 1.0
    # the cycle 1 -> 2 -> 3 -> 1 in 0-based form
    Y = conjugate_by(HermitianMatrix(X), [1, 2, 0]).to_dense()
    want = np.zeros((3, 3))
    want[1, 2] = want[2, 1] = 1.0
    assert np.array_equal(Y, want)


@given(st.integers(0, 10**6), st.integers(2, 20))
def test_permute_conjugate_spectrum_and_traces(seed, N):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    X = HermitianMatrix((A + A.T) / 2)
    Y = permute_conjugate(X, seed)
    assert np.allclose(np.linalg.eigvalsh(X.to_dense()), np.linalg.eigvalsh(Y.to_dense()), atol=1e-10)
    assert np.array_equal(np.sort(np.diag(X.to_dense())), np.sort(np.diag(Y.to_dense())))
    Pk, Qk = np.eye(N), np.eye(N)
    for _ in range(6):
        Pk, Qk = Pk @ X.to_dense(), Qk @ Y.to_dense()
        assert math.isclose(np.trace(Pk), np.trace(Qk), rel_tol=1e-9, abs_tol=1e-9)


def test_permute_conjugate_sparse_keeps_storage():
    X = generate(ModelSpec("sparse_bounded", 40, seed=2, C=2))
    Y = permute_conjugate(X, 5)
    assert Y.is_sparse
    assert sparsity_degree(Y) == sparsity_degree(X)


def test_sparsity_degree_examples():
    assert sparsity_degree(np.zeros((4, 4))) == 0
    assert sparsity_degree(np.eye(4)) == 1
    P = np.zeros((4, 4))
    for i, j in [(0, 1), (2, 3)]:
        P[i, j] = P[j, i] = 1
    assert sparsity_degree(P) == 1
    assert sparsity_degree(sp.csr_matrix(P)) == 1


def test_hermitian_matrix_rejects_asymmetric():
    with pytest.raises(ParameterError):
        HermitianMatrix(np.array([[0, 1], [0, 0]], dtype=float))


@given(st.integers(0, 10**6), st.booleans())
def test_bytes_roundtrip(seed, sparse):
    spec = ModelSpec("sparse_bounded" if sparse else "erdos_renyi", 12, seed=seed, C=2, p=0.4)
    X = generate(spec)
    Y = HermitianMatrix.from_bytes(X.to_bytes())
    assert np.array_equal(X.to_dense(), Y.to_dense())
    assert Y.is_sparse == X.is_sparse


def test_save_load(tmp_path):
    X = generate(ModelSpec("diluted_wigner", 20, seed=9))
    X.save(tmp_path / "x.bin")
    assert np.array_equal(HermitianMatrix.load(tmp_path / "x.bin").to_dense(), X.to_dense())
