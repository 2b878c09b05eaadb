"""Approximate extreme eigenvector computation for symmetric operators.

The workhorse is the shifted power method: for an additive accuracy eps and a
bound L on the spectral range, run ceil(c * log(n) / gamma) iterations with
gamma = eps / L on the PSD-shifted operator.  A hand-rolled Lanczos variant
(ceil(c * log(n) / sqrt(gamma)) iterations) is available behind a flag.

Operators are matvec-closures so gradients never have to be materialized;
when the trace is known the operator is centered by trace/dim first, which
makes the returned iterates invariant to diagonal shifts M -> M + c*Id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import make_rng

DEFAULT_POWER_C = 8.0


@dataclass
class SymmetricOperator:
    """Symmetric linear operator given by a matvec closure.

    fro_norm and row_abs_max, when available, feed the spectral range bound;
    trace enables shift-invariant centering; nnz is a cost hint (entries
    touched per matvec).
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    trace: Optional[float] = None
    fro_norm: Optional[float] = None
    row_abs_max: Optional[float] = None
    nnz: Optional[int] = None

    def __call__(self, v):
        return self.matvec(v)

    @staticmethod
    def from_dense(M: np.ndarray) -> "SymmetricOperator":
        M = np.asarray(M, dtype=float)
        assert M.ndim == 2 and M.shape[0] == M.shape[1]
        assert np.allclose(M, M.T, atol=1e-10), "operator must be symmetric"
        return SymmetricOperator(
            dim=M.shape[0],
            matvec=lambda v, _M=M: _M @ v,
            trace=float(np.trace(M)),
            fro_norm=float(np.linalg.norm(M)),
            row_abs_max=float(np.abs(M).sum(axis=1).max()),
            nnz=int(M.size),
        )

    def negated(self) -> "SymmetricOperator":
        return SymmetricOperator(
            dim=self.dim,
            matvec=lambda v, mv=self.matvec: -mv(v),
            trace=None if self.trace is None else -self.trace,
            fro_norm=self.fro_norm,
            row_abs_max=self.row_abs_max,
            nnz=self.nnz,
        )


class EigResult(NamedTuple):
    vector: np.ndarray
    rayleigh: float          # v^T M v for the returned unit vector
    iterations: int
    matvecs: int
    history: tuple           # rayleigh after each iteration (original units)


def spectral_range_bound(op: SymmetricOperator) -> float:
    """Upper bound on lambda_max - lambda_min: 2 * min(Frobenius norm,
    max absolute row sum), whichever ingredients the operator exposes."""
    cands = []
    if op.fro_norm is not None:
        cands.append(op.fro_norm)
    if op.row_abs_max is not None:
        cands.append(op.row_abs_max)
    if not cands:
        raise ValueError("operator exposes no norm information; pass range_bound explicitly")
    return 2.0 * min(cands)


def _start_vector(op, start, rng):
    if isinstance(start, np.ndarray):
        v = start.astype(float).copy()
    elif start == "ones":
        v = np.ones(op.dim)
    else:
        v = rng.standard_normal(op.dim)
    nrm = np.linalg.norm(v)
    assert nrm > 0, "zero start vector"
    return v / nrm


def approx_largest_ev(op: SymmetricOperator, eps: float, range_bound: Optional[float] = None,
                      seed=0, rng=None, iterations: Optional[int] = None,
                      start=None, shift: Optional[float] = None,
                      c: float = DEFAULT_POWER_C, method: str = "power") -> EigResult:
    """Unit v with v^T M v >= lambda_max(M) - eps, with high probability.

    The iteration count follows the power-method guarantee ceil(c*log(n)/gamma)
    with gamma = eps/L unless an explicit budget is given.  shift overrides the
    internal PSD shift (the caller promises M + shift*Id is PSD enough to make
    the top eigenvalue dominant in magnitude).
    """
    assert eps >= 0
    if rng is None:
        rng = make_rng(seed)
    L = spectral_range_bound(op) if range_bound is None else float(range_bound)
    assert L >= 0
    v = _start_vector(op, start, rng)
    matvecs = 0

    if L == 0.0 and iterations is None:
        # spectral range zero: every unit vector is an eigenvector
        ray = float(v @ op(v))
        return EigResult(v, ray, 0, 1, (ray,))

    if shift is not None:
        center, t = 0.0, float(shift)
    elif op.trace is not None:
        center, t = op.trace / op.dim, L
    else:
        center, t = 0.0, L
    offset = t - center  # shifted operator is M + offset*Id

    if iterations is None:
        gamma = eps / L
        if gamma <= 0:
            raise ValueError("eps must be positive when no iteration budget is given")
        denom = math.sqrt(gamma) if method == "lanczos" else gamma
        iterations = max(1, math.ceil(c * math.log(max(op.dim, 2)) / denom))
    iterations = int(iterations)

    if method == "lanczos":
        return _lanczos_largest(op, v, iterations, offset)
    assert method == "power", f"unknown method {method!r}"

    history = []
    for _ in range(iterations):
        w = op(v) + offset * v
        matvecs += 1
        ray_shift = float(v @ w)
        history.append(ray_shift - offset)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            # v is in the kernel of the shifted operator; it is an exact eigenvector
            return EigResult(v, history[-1], len(history), matvecs, tuple(history))
        v = w / nrm
    ray = float(v @ op(v))
    matvecs += 1
    history.append(ray)
    return EigResult(v, ray, iterations, matvecs, tuple(history))


def approx_smallest_ev(op: SymmetricOperator, eps: float, **kw) -> EigResult:
    """Unit v with v^T M v <= lambda_min(M) + eps (whp); power method on -M."""
    res = approx_largest_ev(op.negated(), eps, **kw)
    return EigResult(res.vector, -res.rayleigh, res.iterations, res.matvecs,
                     tuple(-r for r in res.history))


def _lanczos_largest(op, v0, iterations, offset) -> EigResult:
    """Lanczos with full reorthogonalization; fine at the budgets used here."""
    n = op.dim
    m = min(iterations, n)
    Q = np.zeros((n, m))
    alphas, betas = [], []
    q = v0
    beta = 0.0
    q_prev = np.zeros(n)
    matvecs = 0
    history = []
    for j in range(m):
        Q[:, j] = q
        w = op(q) + offset * q
        matvecs += 1
        a = float(q @ w)
        alphas.append(a)
        w = w - a * q - beta * q_prev
        w -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        T = np.diag(alphas)
        if len(betas):
            T += np.diag(betas, 1) + np.diag(betas, -1)
        vals, vecs = np.linalg.eigh(T)
        history.append(vals[-1] - offset)
        beta = float(np.linalg.norm(w))
        if beta < 1e-14:
            m = j + 1
            break
        q_prev = q
        q = w / beta
        betas.append(beta)
    ritz = Q[:, :len(alphas)] @ vecs[:, -1]
    ritz /= np.linalg.norm(ritz)
    ray = float(ritz @ op(ritz))
    matvecs += 1
    return EigResult(ritz, ray, len(alphas), matvecs, tuple(history))


def dense_eig_oracle(M: np.ndarray):
    """Full eigendecomposition test oracle: eigenvalues sorted descending,
    orthonormal eigenvectors as columns, reconstruction residual <= 1e-9."""
    M = np.asarray(M, dtype=float)
    assert np.allclose(M, M.T, atol=1e-10), "oracle needs a symmetric matrix"
    vals, vecs = np.linalg.eigh(M)
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    resid = np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - M)
    assert resid <= 1e-9 * max(1.0, np.linalg.norm(M)), "eigh reconstruction failed"
    return vals, vecs
