"""Reductions between rectangular-matrix problems and PSD problems.

A rectangular variable Z (m x n) sits in the off-diagonal block of a
symmetric (m+n) x (m+n) matrix X = [[V, Z], [Z^T, W]].  Constraining X to
the trace-t spectahedron constrains ||Z||_nuc <= t/2; constraining X to the
diagonal-bounded PSD box constrains ||Z||_max <= t.  Solving the embedded
problem with rank-1 atoms yields a factorization L R^T of Z for free.

Convention: with the full Frobenius inner product on the embedding space,
the gradient of f_hat(X) := f(Z-block) is (1/2) [[0, G], [G^T, 0]] for
G = grad f(Z); the 1/2 makes directional derivatives along symmetric
directions match finite differences (the off-diagonal block appears twice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ObjectiveOracle, make_rng
from .domains.matrices import FactoredPSD
from .eigen import dense_eig_oracle

GRADIENT_BLOCK_SCALE = 0.5


@dataclass(frozen=True)
class BlockEmbedding:
    """Index bookkeeping for the [[V, Z], [Z^T, W]] embedding."""

    m: int
    n: int

    @property
    def total(self) -> int:
        return self.m + self.n

    def z_block(self, X: np.ndarray) -> np.ndarray:
        assert X.shape == (self.total, self.total)
        return X[:self.m, self.m:]

    def embed_z(self, Z: np.ndarray) -> np.ndarray:
        """Symmetric matrix with Z in the off-diagonal blocks, zero diagonal blocks."""
        Z = np.asarray(Z, dtype=float)
        assert Z.shape == (self.m, self.n)
        X = np.zeros((self.total, self.total))
        X[:self.m, self.m:] = Z
        X[self.m:, :self.m] = Z.T
        return X

    def embed_gradient(self, G: np.ndarray) -> np.ndarray:
        return GRADIENT_BLOCK_SCALE * self.embed_z(G)


def nuclear_to_spect(objective: ObjectiveOracle, m: int, n: int, t: float):
    """Objective over the (m+n) embedding whose trace-t spectahedron solutions
    carry Z = X[:m, m:] with ||Z||_nuc <= t/2.

    Returns (embedded ObjectiveOracle, BlockEmbedding).  Line-search hooks and
    the curvature bound pass through unchanged (both depend only on f along
    segments, and the Z block moves affinely with X).
    """
    assert t > 0
    emb = BlockEmbedding(m, n)

    def ev(X):
        return float(objective.eval(emb.z_block(X)))

    def gr(X):
        return emb.embed_gradient(np.asarray(objective.grad(emb.z_block(X)), dtype=float))

    hook = None
    if objective.alpha_hook is not None:
        def hook(X, S):
            return objective.alpha_hook(emb.z_block(X), emb.z_block(S))

    hat = ObjectiveOracle(eval=ev, grad=gr,
                          curvature_bound=objective.curvature_bound,
                          nnz_hint=objective.nnz_hint,
                          name=f"embed({objective.name})", alpha_hook=hook)
    return hat, emb


def extract_factorization(X: FactoredPSD, m: int, n: int,
                          t: Optional[float] = None):
    """Columns L_j = sqrt(t a_j) v_j[:m], R_j = sqrt(t a_j) v_j[m:], so that
    L R^T equals the Z block of the dense iterate and
    (||L||_F^2 + ||R||_F^2)/2 <= t/2 (trace split across the blocks)."""
    if t is not None:
        assert abs(t - X.scale) <= 1e-12 * max(1.0, abs(t))
    t = X.scale
    assert X.n == m + n
    k = X.rank()
    L = np.zeros((m, k))
    R = np.zeros((n, k))
    for j, (w, v) in enumerate(zip(X.weights, X.vectors)):
        c = math.sqrt(t * w)
        L[:, j] = c * v[:m]
        R[:, j] = c * v[m:]
    return L, R


def maxnorm_to_boundeddiag(objective: ObjectiveOracle, m: int, n: int, t: float):
    """Same embedding, targeted at the diagonal-bounded PSD box: feasibility
    of X with X_ii <= t and Z in the off-diagonal block is equivalent to
    ||Z||_max <= t."""
    return nuclear_to_spect(objective, m, n, t)


def weighted_nuclear_wrap(objective: ObjectiveOracle, p, q):
    """Change of variable Zbar = P Z Q (P = diag(sqrt(p)), Q = diag(sqrt(q)))
    turning a weighted nuclear-norm constraint on Z into a plain one on Zbar.

    Returns (objective over Zbar, to_original) with gradient
    P^-1 G Q^-1 by the chain rule; unit weights reduce to the identity."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    assert np.all(p > 0) and np.all(q > 0)
    sp = np.sqrt(p)
    sq = np.sqrt(q)

    def to_original(Zbar):
        return Zbar / np.outer(sp, sq)

    def ev(Zbar):
        return float(objective.eval(to_original(Zbar)))

    def gr(Zbar):
        G = np.asarray(objective.grad(to_original(Zbar)), dtype=float)
        return G / np.outer(sp, sq)

    hook = None
    if objective.alpha_hook is not None:
        def hook(x, s):
            return objective.alpha_hook(to_original(x), to_original(s))

    return ObjectiveOracle(eval=ev, grad=gr,
                           curvature_bound=objective.curvature_bound,
                           name=f"wnuc({objective.name})",
                           alpha_hook=hook), to_original


def weighted_nuclear_norm(Z, p, q) -> float:
    """||P Z Q||_nuc for P = diag(sqrt(p)), Q = diag(sqrt(q)) (test oracle)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return nuclear_norm_oracle(np.asarray(Z, dtype=float)
                               * np.outer(np.sqrt(p), np.sqrt(q)))


# ---------------------------------------------------------------------------
# small-scale norm oracles and the SDP characterizations (test support)

def nuclear_norm_oracle(Z) -> float:
    """Sum of singular values via the eigenvalues of Z^T Z."""
    Z = np.asarray(Z, dtype=float)
    vals, _ = dense_eig_oracle(Z.T @ Z)
    return float(np.sqrt(np.clip(vals, 0.0, None)).sum())


def _sqrtm_psd(M: np.ndarray) -> np.ndarray:
    vals, vecs = dense_eig_oracle(M)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def nuclear_sdp_feasible(Z, t: float, probe_tol: float = 1e-9):
    """||Z||_nuc <= t/2 decided through the PSD characterization: the minimal
    completion V = (ZZ^T)^1/2, W = (Z^T Z)^1/2 makes [[V, Z], [Z^T, W]] PSD
    with the smallest possible trace, so feasibility reduces to an eigen
    probe of the assembled block matrix plus its trace against t."""
    Z = np.asarray(Z, dtype=float)
    m, n = Z.shape
    M = np.zeros((m + n, m + n))
    M[:m, :m] = _sqrtm_psd(Z @ Z.T)
    M[m:, m:] = _sqrtm_psd(Z.T @ Z)
    M[:m, m:] = Z
    M[m:, :m] = Z.T
    scale = max(1.0, float(np.abs(M).max()))
    psd_ok = bool(np.linalg.eigvalsh(M).min() >= -probe_tol * scale)
    return psd_ok and float(np.trace(M)) <= t + probe_tol * max(1.0, t)


def _project_rows(V: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(V, axis=1)
    scale = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
    return V * scale[:, None]


def maxnorm_sdp_feasible(Z, t: float, restarts: int = 4, iterations: int = 400,
                         seed=0, resid_tol: float = 1e-6) -> bool:
    """||Z||_max <= t decided through the factored PSD characterization:
    search L (m x d), R (n x d) with rows in the sqrt(t) ball and L R^T = Z
    by alternating least squares with row projection; the assembled
    [[LL^T, Z], [Z^T, RR^T]] is the eigen-probed completion.  Approximate:
    nonconvex search, trust it only with a tolerance band (tests use 1e-3)."""
    Z = np.asarray(Z, dtype=float)
    m, n = Z.shape
    d = m + n
    radius = math.sqrt(t)
    rng = make_rng(seed)
    lam = 1e-10
    best = math.inf
    for r in range(max(1, restarts)):
        if r == 0:
            # balanced SVD factors, the natural candidate
            U, s, Vt = np.linalg.svd(Z, full_matrices=False)
            L = np.zeros((m, d))
            R = np.zeros((n, d))
            L[:, :len(s)] = U * np.sqrt(s)
            R[:, :len(s)] = Vt.T * np.sqrt(s)
            L, R = _project_rows(L, radius), _project_rows(R, radius)
        else:
            L = _project_rows(rng.standard_normal((m, d)), radius)
            R = _project_rows(rng.standard_normal((n, d)), radius)
        for _ in range(iterations):
            G = R.T @ R + lam * np.eye(d)
            L = _project_rows(np.linalg.solve(G, R.T @ Z.T).T, radius)
            G = L.T @ L + lam * np.eye(d)
            R = _project_rows(np.linalg.solve(G, L.T @ Z).T, radius)
        resid = float(np.abs(L @ R.T - Z).max())
        best = min(best, resid)
        if best <= resid_tol * max(1.0, float(np.abs(Z).max())):
            return True
    return best <= resid_tol * max(1.0, float(np.abs(Z).max()))


def max_norm_oracle(Z, tol: float = 1e-4, seed=0) -> float:
    """Factorization norm min max(||L||_{2,inf}^2, ||R||_{2,inf}^2) over
    L R^T = Z, by bisection on t with the factored feasibility check.
    Approximate (nonconvex inner search); intended for <= 6x6 test sizes."""
    Z = np.asarray(Z, dtype=float)
    if not np.any(Z):
        return 0.0
    lo = float(np.abs(Z).max())  # ||Z||_max >= max |Z_ij|
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    L = U * np.sqrt(s)
    R = Vt.T * np.sqrt(s)
    hi = float(max((L ** 2).sum(axis=1).max(), (R ** 2).sum(axis=1).max()))
    if hi <= lo * (1.0 + 1e-12):
        return lo
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if maxnorm_sdp_feasible(Z, mid, seed=seed):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
