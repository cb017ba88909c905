"""Diagonal-valued Cauchy transforms.

``G_X(D) = Delta((D - X)^{-1})`` for a Hermitian matrix ``X`` and a diagonal
point ``D`` with positive imaginary part, and three independent routes to
the transform of the free sum ``a + b``:

* :func:`cauchy_freesum_series` sums rooted moments of the lazy graph and
  attaches the geometric tail bound;
* :func:`cauchy_freesum_truncated` solves the resolvent on a finite ball of
  the graph around each root;
* :func:`cauchy_freesum_subordination` iterates the subordination map
  ``omega -> h_B(h_A(omega) + D) + D`` where ``h_X(b) = F_X(b) - b`` and
  ``F_X = 1 / G_X`` entrywise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, FreediagError, ParameterError
from .models import HermitianMatrix
from . import freesum as fs

__all__ = [
    "DiagonalPoint",
    "CauchyValue",
    "cauchy_matrix",
    "cauchy_freesum_series",
    "cauchy_freesum_truncated",
    "cauchy_freesum_subordination",
    "frobenius_metric",
    "truncation_bound",
    "series_bound",
    "operator_norm",
]

log = logging.getLogger(__name__)

SOLVE_TOL = 1e-10
FIXED_POINT_TOL = 1e-8
MAX_ITER = 10_000


@dataclass(frozen=True)
class DiagonalPoint:
    """Diagonal matrix with strictly positive imaginary part."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex).ravel()
        if e.size == 0:
            raise ParameterError("empty diagonal point")
        if not np.all(e.imag > 0):
            raise ParameterError("a diagonal point needs Im(D_i) > 0 for every i")
        object.__setattr__(self, "entries", e)

    @classmethod
    def scalar(cls, z: complex, N: int) -> "DiagonalPoint":
        return cls(np.full(N, complex(z)))

    @property
    def N(self) -> int:
        return self.entries.size

    @property
    def min_imag(self) -> float:
        return float(self.entries.imag.min())

    @property
    def min_abs(self) -> float:
        return float(np.abs(self.entries).min())


@dataclass
class CauchyValue:
    """Diagonal of a resolvent, optionally with an a-posteriori error bound."""

    entries: np.ndarray
    bound: float = 0.0
    info: Dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __len__(self):
        return self.entries.size


def _as_point(D, N: Optional[int] = None) -> DiagonalPoint:
    if isinstance(D, DiagonalPoint):
        return D
    if np.isscalar(D):
        if N is None:
            raise ParameterError("scalar point needs N")
        return DiagonalPoint.scalar(D, N)
    return DiagonalPoint(np.asarray(D))


def _mat(X):
    return X.data if isinstance(X, HermitianMatrix) else X


def operator_norm(X) -> float:
    if isinstance(X, HermitianMatrix):
        return X.op_norm
    return HermitianMatrix(X, check=False).op_norm


def cauchy_matrix(X, D, check: bool = True, tol: float = SOLVE_TOL, block: int = 512) -> CauchyValue:
    """``Delta((D - X)^{-1})`` by one factorization.

    Dense inputs use an LU-based inverse; sparse inputs use a sparse LU and
    solve against identity columns in blocks.  With ``check`` every column
    residual ``||(D - X) y - e_i||`` is verified against ``tol``.
    """
    M = _mat(X)
    N = M.shape[0]
    D = _as_point(D, N)
    if D.N != N:
        raise ParameterError(f"D has {D.N} entries, X is {N} x {N}")
    worst = 0.0
    if sp.issparse(M):
        S = sp.csc_matrix(sp.diags(D.entries) - M.astype(complex))
        lu = spla.splu(S)
        out = np.empty(N, dtype=complex)
        for lo in range(0, N, block):
            hi = min(N, lo + block)
            rhs = np.zeros((N, hi - lo), dtype=complex)
            rhs[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
            Y = lu.solve(rhs)
            out[lo:hi] = Y[np.arange(lo, hi), np.arange(hi - lo)]
            if check:
                R = S @ Y - rhs
                worst = max(worst, float(np.abs(R).sum(axis=0).max()))
    else:
        S = np.diag(D.entries) - M
        Y = np.linalg.inv(S)
        out = np.diagonal(Y).copy()
        if check:
            R = S @ Y
            R[np.diag_indices(N)] -= 1.0
            worst = float(np.linalg.norm(R, axis=0).max())
    if check and worst > tol:
        raise FreediagError(f"resolvent residual {worst:.3e} exceeds {tol:.1e}")
    return CauchyValue(out, 0.0, {"residual": worst if check else None})


# ---------------------------------------------------------------------------
# series route
# ---------------------------------------------------------------------------

def series_bound(norm_sum: float, z_abs: float, M_terms: int) -> float:
    """Tail ``((||A|| + ||B||) / |z|)^M / (|z| - ||A|| - ||B||)``."""
    if z_abs <= norm_sum:
        return math.inf
    return (norm_sum / z_abs) ** M_terms / (z_abs - norm_sum)


def _roots(N, roots):
    return list(range(N)) if roots is None else [int(r) for r in roots]


def cauchy_freesum_series(A, B, z, M_terms: int, roots: Optional[Sequence[int]] = None,
                          norms: Optional[Sequence[float]] = None, moments: Optional[Dict[int, np.ndarray]] = None):
    """Partial moment sum ``sum_{n < M} m_n(i) / z^{n+1}`` at each root ``i``.

    ``z`` may be a scalar or a sequence of scalars (the moments are reused).
    Refuses when ``|z| <= ||A|| + ||B||``.  Returns a :class:`CauchyValue`
    (or a list of them) whose ``bound`` is the tail estimate.
    """
    zs = [complex(z)] if np.isscalar(z) else [complex(w) for w in z]
    N = _mat(A).shape[0]
    na, nb = norms if norms is not None else (operator_norm(A), operator_norm(B))
    s = na + nb
    for w in zs:
        if abs(w) <= s:
            raise ParameterError(f"|z| = {abs(w):.4g} <= ||A|| + ||B|| = {s:.4g}; the series diverges")
    rs = _roots(N, roots)
    op = fs.FreeSumOperator(A, B, rs[0] if rs else 0)
    mom = {} if moments is None else moments
    for r in rs:
        if r not in mom:
            mom[r] = fs.rooted_moments(op.with_root(r), M_terms - 1) if M_terms > 0 else np.zeros(0)
    out = []
    for w in zs:
        powers = w ** -(np.arange(M_terms) + 1.0)
        vals = np.array([np.dot(mom[r][:M_terms], powers) for r in rs])
        out.append(CauchyValue(vals, series_bound(s, abs(w), M_terms),
                               {"method": "series", "M_terms": M_terms, "z": w, "roots": rs}))
    return out[0] if np.isscalar(z) else out


# ---------------------------------------------------------------------------
# finite-section route
# ---------------------------------------------------------------------------

def truncation_bound(norm_sum: float, d: float, depth: int) -> float:
    """Hard-truncation error at the root: ``2 (s/d)^(2L+2) / (d - s)``.

    Closed walks of length ``<= 2L + 1`` never leave the ball of radius ``L``,
    so the full and truncated Neumann series agree up to that order; both
    operators have norm at most ``s``.
    """
    if d <= norm_sum:
        return math.inf
    return 2.0 * (norm_sum / d) ** (2 * depth + 2) / (d - norm_sum)


def cauchy_freesum_truncated(A, B, D, depth: int, roots: Optional[Sequence[int]] = None,
                             norms: Optional[Sequence[float]] = None, balls: Optional[Dict[int, fs.Ball]] = None):
    """Root diagonal of ``(D - H_L)^{-1}`` on the depth-``L`` ball around each root.

    ``D`` may be a :class:`DiagonalPoint`, a scalar, or a list of either; the
    balls are built once and reused.  Pass a dict as ``balls`` to keep them
    across calls.
    """
    N = _mat(A).shape[0]
    single = not isinstance(D, (list, tuple))
    Ds = [_as_point(d, N) for d in ([D] if single else D)]
    na, nb = norms if norms is not None else (operator_norm(A), operator_norm(B))
    rs = _roots(N, roots)
    op = fs.FreeSumOperator(A, B, rs[0] if rs else 0)
    cache = {} if balls is None else balls
    vals = np.zeros((len(Ds), len(rs)), dtype=complex)
    sizes = []
    for t, r in enumerate(rs):
        key = (r, depth)
        ball = cache.get(key)
        if ball is None:
            ball = fs.build_ball(op.with_root(r), depth)
            cache[key] = ball
        sizes.append(ball.size)
        H = ball.matrix
        for q, Dp in enumerate(Ds):
            d_v = Dp.entries[ball.phi]
            S = sp.csc_matrix(sp.diags(d_v) - H)
            rhs = np.zeros(ball.size, dtype=complex)
            rhs[0] = 1.0
            if ball.size == 1:
                y = rhs / S.toarray()[0, 0]
            else:
                y = spla.splu(S).solve(rhs)
            vals[q, t] = y[0]
    out = [CauchyValue(vals[q], truncation_bound(na + nb, Dp.min_abs, depth),
                       {"method": "truncated", "depth": depth, "roots": rs, "max_ball": max(sizes, default=0)})
           for q, Dp in enumerate(Ds)]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# subordination route
# ---------------------------------------------------------------------------

def cauchy_freesum_subordination(A, B, D, tol: float = FIXED_POINT_TOL, max_iter: int = MAX_ITER,
                                 damping=None, norms: Optional[Sequence[float]] = None,
                                 check: bool = False, record: bool = False) -> CauchyValue:
    """Fixed point of ``omega -> h_B(h_A(omega) + D) + D``; returns ``G_A(omega*)``.

    Starts from ``omega_0 = D``.  ``damping`` is the weight of the new iterate;
    by default it is 1 when ``min Im D >= 2 (||A|| + ||B||)`` and 0.5
    otherwise.  ``damping='adaptive'`` starts undamped and drops to 0.5 for
    the rest of the run at the first step that fails to contract or leaves
    the upper half-plane.  Stops when ``max |omega_{k+1} - omega_k| < tol``.  The
    minimum of ``Im F(b) - Im b`` seen over all iterates is reported in
    ``info['min_im_gap']``; it must stay nonnegative.
    """
    N = _mat(A).shape[0]
    D = _as_point(D, N)
    d = D.entries
    if damping is None:
        na, nb = norms if norms is not None else (operator_norm(A), operator_norm(B))
        damping = 1.0 if D.min_imag >= 2.0 * (na + nb) else 0.5
    adaptive = damping == "adaptive"
    if adaptive:
        damping = 1.0
    elif isinstance(damping, str) or not (0.0 < damping <= 1.0):
        raise ParameterError("damping must lie in (0, 1] or be 'adaptive'")
    gap = math.inf
    omega = d.copy()
    history = []
    prev_step = math.inf
    for it in range(1, max_iter + 1):
        ga = cauchy_matrix(A, omega, check=check).entries
        fa = 1.0 / ga
        gap = min(gap, float(np.min(fa.imag - omega.imag)))
        b_pt = fa - omega + d
        gb = cauchy_matrix(B, b_pt, check=check).entries
        fb = 1.0 / gb
        gap = min(gap, float(np.min(fb.imag - b_pt.imag)))
        new = fb - b_pt + d
        if damping != 1.0:
            new = (1.0 - damping) * omega + damping * new
        step = float(np.max(np.abs(new - omega)))
        if adaptive and damping == 1.0 and (step > prev_step or np.any(new.imag <= 0)):
            damping = 0.5
            new = 0.5 * (omega + new)
            step = float(np.max(np.abs(new - omega)))
        prev_step = step
        if record:
            history.append(step)
        omega = new
        if np.any(omega.imag <= 0):
            raise ConvergenceError("iterate left the upper half-plane", residual=step, iterations=it)
        if step < tol:
            ga = cauchy_matrix(A, omega, check=check).entries
            info = {"method": "subordination", "iterations": it, "residual": step,
                    "damping": damping, "adaptive": adaptive, "min_im_gap": gap, "omega": omega}
            if record:
                info["history"] = history
            return CauchyValue(ga, 0.0, info)
    raise ConvergenceError(f"subordination did not converge in {max_iter} iterations (last step {step:.3e})",
                           residual=step, iterations=max_iter)


def frobenius_metric(G1, G2) -> float:
    """``(1/N) sum_i |G1_i - G2_i|^2``."""
    a = np.asarray(getattr(G1, "entries", G1))
    b = np.asarray(getattr(G2, "entries", G2))
    if a.shape != b.shape:
        raise ParameterError("Cauchy values of different sizes")
    return float(np.mean(np.abs(a - b) ** 2))
