"""Random Hermitian matrix models.

Every generator is a pure function of a :class:`ModelSpec`.  Randomness comes
from numpy's counter-based Philox bit generator, seeded directly with the
spec's 64-bit seed, so a (family, parameters, seed) triple pins the matrix
down byte for byte.

Families
--------
erdos_renyi
    Centered, normalized adjacency matrix of G(N, p).
diluted_wigner
    Symmetric three-point entry law ``{-t, 0, t} / sqrt(N)`` with
    ``P(+-t/sqrt(N)) = 1/(2 t^2)`` and ``t = log(N)**h``.
sparse_bounded
    Sum of ``C`` independent uniform random involutions (random matchings).
    Each row carries at most ``C`` nonzeros and the operator norm is at most
    ``C``.
permutation_sum
    ``sum_k w_k (P_k + P_k^T)`` over ``C`` independent uniform permutations.
    At most ``2C`` nonzeros per row, operator norm at most ``2C``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError

__all__ = [
    "HermitianMatrix",
    "ModelSpec",
    "FAMILIES",
    "make_rng",
    "generate",
    "gen_erdos_renyi",
    "gen_diluted_wigner",
    "gen_sparse_bounded",
    "gen_permutation_sum",
    "permute_conjugate",
    "conjugate_by",
    "sparsity_degree",
    "power_iteration_norm",
    "diluted_wigner_abs_moment",
    "check_diluted_moments",
]

FAMILIES = ("erdos_renyi", "diluted_wigner", "sparse_bounded", "permutation_sum")

_MAGIC = b"HMX1"
_KIND_DENSE = 0
_KIND_SPARSE = 1


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator for ``seed`` (int or SeedSequence)."""
    return np.random.Generator(np.random.Philox(seed))


ArrayLike = Union[np.ndarray, sp.spmatrix, sp.sparray]


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """An N x N Hermitian matrix with dense or sparse (CSR) storage.

    Parameters
    ----------
    data : ndarray or scipy sparse matrix
        Square array.  Sparse inputs are converted to canonical CSR with
        explicit zeros removed.
    check : bool
        Verify ``X == X^H`` exactly (default).  Generators construct exactly
        symmetric arrays, so no tolerance is needed.
    atol : float
        Tolerance for the Hermitian check of hand-built inputs.
    """

    data: ArrayLike
    check: bool = field(default=True, repr=False)
    atol: float = field(default=0.0, repr=False)

    def __post_init__(self):
        d = self.data
        if sp.issparse(d):
            d = sp.csr_matrix(d)
            d.sum_duplicates()
            d.eliminate_zeros()
            d.sort_indices()
        else:
            d = np.asarray(d)
            if d.dtype.kind not in "fc":
                d = d.astype(float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise ParameterError(f"expected a nonempty square matrix, got shape {d.shape}")
        object.__setattr__(self, "data", d)
        if self.check and not self._is_hermitian(self.atol):
            raise ParameterError("matrix is not Hermitian")

    # -- basic accessors -------------------------------------------------
    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    @property
    def storage(self) -> str:
        return "sparse" if self.is_sparse else "dense"

    @property
    def dtype(self):
        return self.data.dtype

    def entry(self, i: int, j: int) -> complex:
        if self.is_sparse:
            return self.data[i, j]
        return self.data[i, j]

    def to_dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.data.toarray()
        return self.data

    def to_sparse(self) -> sp.csr_matrix:
        if self.is_sparse:
            return self.data
        m = sp.csr_matrix(self.data)
        m.eliminate_zeros()
        return m

    def _is_hermitian(self, atol: float) -> bool:
        d = self.data
        if sp.issparse(d):
            diff = d - d.conj().T
            if diff.nnz == 0:
                return True
            return bool(np.abs(diff.data).max() <= atol)
        if atol == 0.0:
            return bool(np.array_equal(d, d.conj().T))
        return bool(np.abs(d - d.conj().T).max() <= atol)

    @cached_property
    def columns(self) -> list:
        """Per column ``j``: (row indices, values) of the nonzeros ``X[k, j]``."""
        csc = sp.csc_matrix(self.to_sparse())
        out = []
        for j in range(self.N):
            lo, hi = csc.indptr[j], csc.indptr[j + 1]
            out.append((csc.indices[lo:hi].copy(), csc.data[lo:hi].copy()))
        return out

    @cached_property
    def op_norm(self) -> float:
        """Spectral norm (largest eigenvalue modulus)."""
        n = self.N
        if not self.is_sparse or n <= 1500:
            w = np.linalg.eigvalsh(self.to_dense())
            return float(np.max(np.abs(w)))
        if self.data.nnz == 0:
            return 0.0
        w = spla.eigsh(self.data, k=1, which="LM", return_eigenvectors=False, tol=1e-12)
        return float(np.abs(w).max())

    def row_nnz(self) -> np.ndarray:
        if self.is_sparse:
            return np.diff(self.data.indptr)
        return np.count_nonzero(self.data, axis=1)

    def __array__(self, dtype=None, copy=None):
        a = self.to_dense()
        return a.astype(dtype) if dtype is not None else a

    # -- serialization ---------------------------------------------------
    def to_bytes(self) -> bytes:
        """Binary form: ``HMX1``, <q N, <B kind, then the payload.

        Dense payload: N*N row-major (re, im) float64 pairs.  Sparse payload:
        <q nnz followed by nnz records (<q i, <q j, <d re, <d im).  All fields
        little-endian.
        """
        buf = io.BytesIO()
        buf.write(_MAGIC)
        if self.is_sparse:
            coo = self.data.tocoo()
            buf.write(struct.pack("<qB", self.N, _KIND_SPARSE))
            buf.write(struct.pack("<q", coo.nnz))
            rec = np.zeros(coo.nnz, dtype=[("i", "<i8"), ("j", "<i8"), ("re", "<f8"), ("im", "<f8")])
            rec["i"], rec["j"] = coo.row, coo.col
            rec["re"], rec["im"] = np.real(coo.data), np.imag(coo.data)
            buf.write(rec.tobytes())
        else:
            buf.write(struct.pack("<qB", self.N, _KIND_DENSE))
            c = np.ascontiguousarray(self.data, dtype=np.complex128)
            buf.write(c.astype("<c16").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "HermitianMatrix":
        if raw[:4] != _MAGIC:
            raise ParameterError("not a HermitianMatrix stream (bad magic)")
        n, kind = struct.unpack_from("<qB", raw, 4)
        off = 4 + 9
        if kind == _KIND_DENSE:
            c = np.frombuffer(raw, dtype="<c16", count=n * n, offset=off).reshape(n, n)
            arr = np.array(c, dtype=np.complex128)
            if not np.any(arr.imag):
                arr = arr.real.copy()
            return cls(arr)
        if kind == _KIND_SPARSE:
            (nnz,) = struct.unpack_from("<q", raw, off)
            off += 8
            rec = np.frombuffer(raw, dtype=[("i", "<i8"), ("j", "<i8"), ("re", "<f8"), ("im", "<f8")],
                                count=nnz, offset=off)
            vals = rec["re"] + 1j * rec["im"]
            if not np.any(rec["im"]):
                vals = rec["re"].astype(float)
            m = sp.csr_matrix((vals, (rec["i"], rec["j"])), shape=(n, n))
            return cls(m)
        raise ParameterError(f"unknown storage kind {kind}")

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "HermitianMatrix":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a random matrix model.

    ``C`` is the degree/bound for the sparse families.  ``h``, ``eps`` and the
    optional ``atom`` describe the diluted Wigner law; when ``moment_M`` and
    ``moment_c`` are both given the generator enforces the moment condition
    for ``2 <= k1, k2 <= c*M``.
    """

    family: str
    N: int
    seed: int = 0
    p: Optional[float] = None
    h: float = 1.0
    eps: float = 0.0
    atom: Optional[float] = None
    C: int = 1
    weights: str = "unit"
    moment_M: Optional[float] = None
    moment_c: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        if self.family == "erdos_renyi":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ParameterError(f"erdos_renyi needs 0 < p < 1, got p={self.p!r}")
        if self.family in ("sparse_bounded", "permutation_sum"):
            if not isinstance(self.C, (int, np.integer)) or self.C < 1:
                raise ParameterError(f"C must be an integer >= 1, got {self.C!r}")
        if self.weights not in ("unit", "signs"):
            raise ParameterError(f"weights must be 'unit' or 'signs', got {self.weights!r}")

    def replace(self, **kw) -> "ModelSpec":
        d = dict(self.__dict__)
        d.update(kw)
        return ModelSpec(**d)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _symmetric_from_upper(n: int, vals: np.ndarray) -> np.ndarray:
    x = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    x[iu] = vals
    return x + x.T


def gen_erdos_renyi(spec: ModelSpec) -> HermitianMatrix:
    """Centered normalized Erdos-Renyi matrix ``(B - p(J - I)) / sqrt(N p (1-p))``."""
    n, p = spec.N, spec.p
    if n < 2:
        raise ParameterError("erdos_renyi needs N >= 2")
    if p is None or not (0.0 < p < 1.0):
        raise ParameterError(f"erdos_renyi needs 0 < p < 1, got {p!r}")
    rng = make_rng(spec.seed)
    bern = rng.random(n * (n - 1) // 2) < p
    scale = math.sqrt(n * p * (1.0 - p))
    vals = np.where(bern, (1.0 - p) / scale, -p / scale)
    return HermitianMatrix(_symmetric_from_upper(n, vals))


def diluted_wigner_atom(spec: ModelSpec) -> float:
    n = spec.N
    if spec.atom is not None:
        return float(spec.atom)
    return math.log(n) ** spec.h


def diluted_wigner_abs_moment(N: int, t: float, K: int) -> float:
    """``N * E|x|^K`` for the three-point law with atom ``t``.

    The law puts mass ``1/(2 t^2)`` on each of ``+-t/sqrt(N)``, so
    ``N E|x|^K = t^(K-2) / N^(K/2 - 1)``.  ``K = 2`` gives exactly 1.
    """
    return t ** (K - 2) / N ** (K / 2.0 - 1.0)


def check_diluted_moments(N: int, t: float, h: float, eps: float, M: float, c: float) -> None:
    """Enforce ``N |E x^k1 conj(x)^k2| <= log(N)^(h(k1+k2)) / N^eps``.

    Only ``2 <= k1, k2 <= c M`` are checked; odd ``k1 + k2`` vanish by symmetry.
    Raises :class:`ParameterError` naming the first offending pair.
    """
    kmax = int(math.floor(c * M))
    if kmax < 2:
        return
    logn = math.log(N)
    for k1 in range(2, kmax + 1):
        for k2 in range(2, kmax + 1):
            K = k1 + k2
            if K % 2:
                continue
            lhs = diluted_wigner_abs_moment(N, t, K)
            rhs = logn ** (h * K) / N ** eps
            if lhs > rhs * (1.0 + 1e-12):
                raise ParameterError(
                    f"moment condition violated at (k1, k2) = ({k1}, {k2}): "
                    f"N E|x|^{K} = {lhs:.6g} > {rhs:.6g}",
                    offending=(k1, k2),
                )


def gen_diluted_wigner(spec: ModelSpec) -> HermitianMatrix:
    """Diluted Wigner matrix with the three-point law and zero diagonal."""
    n = spec.N
    if n < 2:
        raise ParameterError("diluted_wigner needs N >= 2")
    t = diluted_wigner_atom(spec)
    if not (t >= 1.0):
        raise ParameterError(f"atom t = {t:.6g} < 1 gives P(x != 0) = 1/t^2 > 1 (increase N or h)")
    if spec.moment_M is not None and spec.moment_c is not None:
        check_diluted_moments(n, t, spec.h, spec.eps, spec.moment_M, spec.moment_c)
    rng = make_rng(spec.seed)
    m = n * (n - 1) // 2
    u = rng.random(m)
    q = 1.0 / (t * t)
    a = t / math.sqrt(n)
    vals = np.where(u < q / 2, a, np.where(u < q, -a, 0.0))
    return HermitianMatrix(_symmetric_from_upper(n, vals))


def _random_involution(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform random matching as an involution; one fixed point when n is odd."""
    perm = rng.permutation(n)
    inv = np.arange(n)
    pairs = perm[: 2 * (n // 2)].reshape(-1, 2)
    inv[pairs[:, 0]] = pairs[:, 1]
    inv[pairs[:, 1]] = pairs[:, 0]
    return inv


def _weights(rng, spec: ModelSpec, size: int) -> np.ndarray:
    if spec.weights == "unit":
        return np.ones(size)
    return rng.choice(np.array([-1.0, 1.0]), size=size)


def gen_sparse_bounded(spec: ModelSpec) -> HermitianMatrix:
    """Sum of ``C`` independent uniform random involutions.

    Each involution is a symmetric permutation matrix, so every row gets at
    most ``C`` nonzeros and ``||X||_op <= C``.  With ``weights='signs'`` each
    matched pair carries an independent sign.
    """
    n, c = spec.N, int(spec.C)
    if c >= n:
        raise ParameterError(f"sparse_bounded needs C < N, got C={c}, N={n}")
    rng = make_rng(spec.seed)
    rows, cols, vals = [], [], []
    for _ in range(c):
        inv = _random_involution(rng, n)
        i = np.arange(n)
        upper = i <= inv
        w = _weights(rng, spec, int(upper.sum()))
        wfull = np.empty(n)
        wfull[i[upper]] = w
        wfull[inv[i[upper]]] = w
        rows.append(i)
        cols.append(inv)
        vals.append(wfull)
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return HermitianMatrix(m)


def gen_permutation_sum(spec: ModelSpec) -> HermitianMatrix:
    """``sum_k w_k (P_k + P_k^T)`` over ``C`` uniform permutations."""
    n, c = spec.N, int(spec.C)
    if c >= n:
        raise ParameterError(f"permutation_sum needs C < N, got C={c}, N={n}")
    rng = make_rng(spec.seed)
    rows, cols, vals = [], [], []
    i = np.arange(n)
    for _ in range(c):
        perm = rng.permutation(n)
        w = _weights(rng, spec, n)
        rows += [perm, i]
        cols += [i, perm]
        vals += [w, w]
    m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return HermitianMatrix(m)


_GENERATORS = {
    "erdos_renyi": gen_erdos_renyi,
    "diluted_wigner": gen_diluted_wigner,
    "sparse_bounded": gen_sparse_bounded,
    "permutation_sum": gen_permutation_sum,
}


def generate(spec: ModelSpec) -> HermitianMatrix:
    return _GENERATORS[spec.family](spec)


# ---------------------------------------------------------------------------
# conjugation and diagnostics
# ---------------------------------------------------------------------------

def conjugate_by(X: HermitianMatrix, perm) -> HermitianMatrix:
    """Return ``V X V^{-1}`` where ``V e_i = e_{perm[i]}``.

    Entry ``(perm[i], perm[j])`` of the result is ``X(i, j)``.
    """
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    if X.is_sparse:
        m = X.data[inv][:, inv]
        return HermitianMatrix(m, check=False)
    return HermitianMatrix(X.data[np.ix_(inv, inv)], check=False)


def permute_conjugate(X: HermitianMatrix, seed) -> HermitianMatrix:
    """Conjugate by a seeded uniform permutation."""
    perm = make_rng(seed).permutation(X.N)
    return conjugate_by(X, perm)


def sparsity_degree(X) -> int:
    """Maximum number of nonzeros in a row."""
    if isinstance(X, HermitianMatrix):
        r = X.row_nnz()
    elif sp.issparse(X):
        m = sp.csr_matrix(X)
        m.eliminate_zeros()
        r = np.diff(m.indptr)
    else:
        r = np.count_nonzero(np.asarray(X), axis=1)
    return int(r.max()) if len(r) else 0


def power_iteration_norm(X, iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Operator norm estimate of a Hermitian matrix by power iteration on ``X^2``."""
    op = X.data if isinstance(X, HermitianMatrix) else X
    n = op.shape[0]
    v = make_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = op @ (op @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * max(nw, 1.0):
            lam = nw
            break
        lam = nw
    return math.sqrt(lam)
