"""Matrix domains: trace-t spectahedron, sparse-PSD atom hull, and the
bounded-diagonal PSD box, with their linear oracles and gap formulas.

Iterates are dense symmetric arrays at solver level; the spectahedron
additionally keeps a factored (sum of weighted rank-1) representation so
low-rank structure survives the run.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..core import (Atom, IterateLedger, LmoResult, ObjectiveOracle, RunClock,
                    RunTrace, StepSchedule, StopRule, make_rng)
from ..eigen import SymmetricOperator, approx_smallest_ev, dense_eig_oracle
from ..solver import RunResult, fw_run, line_search_alpha


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Fix the sign ambiguity of an eigenvector so v and -v label equally."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _digest_label(prefix: str, arr: np.ndarray) -> str:
    h = hashlib.blake2b(np.ascontiguousarray(arr).tobytes(), digest_size=6)
    return prefix + h.hexdigest()


def rank_one_atom(v: np.ndarray, t: float = 1.0) -> Atom:
    v = _canonical_sign(np.asarray(v, dtype=float))
    nrm = np.linalg.norm(v)
    assert nrm > 0
    v = v / nrm
    return Atom(point=t * np.outer(v, v), label=_digest_label("v", v), vector=v)


# ---------------------------------------------------------------------------
# factored representation

@dataclass
class FactoredPSD:
    """X = t * sum_j alpha_j v_j v_j^T with unit v_j and convex weights.

    PSD with trace exactly t by construction; rank at most the atom count.
    """

    n: int
    scale: float
    weights: list
    vectors: list

    def __post_init__(self):
        assert self.scale > 0
        assert len(self.weights) == len(self.vectors)
        assert abs(sum(self.weights) - 1.0) <= 1e-12
        for w, v in zip(self.weights, self.vectors):
            assert w >= 0 and len(v) == self.n
            assert abs(np.linalg.norm(v) - 1.0) <= 1e-12

    @staticmethod
    def from_ledger(ledger: IterateLedger, n: int, t: float) -> "FactoredPSD":
        vs = []
        for a in ledger.atoms:
            assert a.vector is not None, "ledger atom lacks a rank-1 factor"
            vs.append(np.asarray(a.vector, dtype=float))
        return FactoredPSD(n=n, scale=float(t), weights=list(ledger.weights), vectors=vs)

    def dense(self) -> np.ndarray:
        X = np.zeros((self.n, self.n))
        for w, v in zip(self.weights, self.vectors):
            X += w * np.outer(v, v)
        return self.scale * X

    def rank(self) -> int:
        return len(self.vectors)

    def inner(self, op) -> float:
        """X . M from the factors: t * sum_j alpha_j v_j^T (M v_j)."""
        mv = op.matvec if isinstance(op, SymmetricOperator) else (lambda u: op @ u)
        return self.scale * float(sum(w * float(v @ mv(v))
                                      for w, v in zip(self.weights, self.vectors)))


# ---------------------------------------------------------------------------
# spectahedron {X PSD, tr X = t}

def _as_operator(grad) -> SymmetricOperator:
    if isinstance(grad, SymmetricOperator):
        return grad
    return SymmetricOperator.from_dense(grad)


def spect_lmo(grad, eps: float, t: float = 1.0, rng=None, seed=0,
              method: str = "power", iterations: Optional[int] = None,
              start=None, shift: Optional[float] = None) -> LmoResult:
    """Best rank-1 atom t*vv^T for a linear objective: v is an approximate
    smallest eigenvector of grad, so the atom value is within t*eps of the
    true domain minimum t*lambda_min(grad).

    eps <= 0 requests the exact (dense-eigensolver) oracle and needs a dense
    gradient.
    """
    if eps <= 0.0:
        assert not isinstance(grad, SymmetricOperator), \
            "exact spectahedron oracle needs a dense gradient"
        vals, vecs = dense_eig_oracle(grad)
        return LmoResult(rank_one_atom(vecs[:, -1], t),
                         matvecs=np.asarray(grad).shape[0], slack=0.0)
    op = _as_operator(grad)
    res = approx_smallest_ev(op, eps, rng=rng, seed=seed, method=method,
                             iterations=iterations, start=start, shift=shift)
    return LmoResult(rank_one_atom(res.vector, t), matvecs=res.matvecs,
                     slack=t * eps)


def spect_gap(X: FactoredPSD, grad, eps: float, rng=None, seed=0,
              method: str = "power") -> tuple:
    """(gap_estimate, tolerance): X.grad - t*lambda_min(grad) with lambda_min
    measured to eps, so the true gap lies in estimate +- t*eps and
    estimate + t*eps certifies the primal error."""
    op = _as_operator(grad)
    xg = X.inner(op)
    if eps <= 0.0:
        assert not isinstance(grad, SymmetricOperator), \
            "exact gap evaluation needs a dense gradient"
        vals, _ = dense_eig_oracle(grad)
        return xg - X.scale * float(vals[-1]), 0.0
    res = approx_smallest_ev(op, eps, rng=rng, seed=seed, method=method)
    return xg - X.scale * res.rayleigh, X.scale * eps


class SpectrahedronDomain:
    """PSD matrices with trace exactly t; atoms are rank-1 t*vv^T.

    lmo eps is in objective-value units (the additive suboptimality of the
    atom value); the eigensolver tolerance is eps/t.
    """

    def __init__(self, n, t=1.0, eig_method="power"):
        assert n >= 1 and t > 0
        self.n = n
        self.t = float(t)
        self.eig_method = eig_method
        self.name = f"spectahedron(n={n},t={self.t:g})"
        self.diam_sq = 2.0 * self.t ** 2 if n >= 2 else 0.0

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        return spect_lmo(grad, eps / self.t if eps > 0 else 0.0, t=self.t,
                         rng=rng, method=self.eig_method)

    def gap_formula(self, x, grad, eps=0.0, rng=None):
        vals, _ = dense_eig_oracle(grad)
        return float(np.vdot(x, grad)) - self.t * float(vals[-1]), 0.0

    def start_atom(self) -> Atom:
        e0 = np.zeros(self.n)
        e0[0] = 1.0
        return rank_one_atom(e0, self.t)

    def contains(self, X, tol=1e-9) -> bool:
        X = np.asarray(X, dtype=float)
        if not np.allclose(X, X.T, atol=1e-10):
            return False
        if abs(np.trace(X) - self.t) > tol * max(1.0, self.t):
            return False
        return bool(np.linalg.eigvalsh(X).min() >= -tol * max(1.0, self.t))


class HazanResult(NamedTuple):
    factored: FactoredPSD
    trace: RunTrace
    point: np.ndarray
    ledger: IterateLedger
    matvecs: int


def hazan_run(objective: ObjectiveOracle, n: int, t: float = 1.0,
              stop: Optional[StopRule] = None, variant: str = "plain",
              lmo_mode: str = "approx", seed=0,
              curvature_bound: Optional[float] = None,
              eig_method: str = "power", start_vector=None) -> HazanResult:
    """Greedy rank-1 solver on the trace-t spectahedron.

    Starts from the deterministic e1 e1^T atom; after k steps the iterate has
    rank at most k+1 and, in approx mode, primal error at most 8 C_f/(k+2).
    variant line_search replaces the harmonic step, grad_averaging feeds the
    eigensolver the averaged matrix (grad f(X) + grad f(Xbar))/2 instead of
    the gradient (a heuristic without the rate guarantee; the traced gap is
    still measured against the true gradient at extra eigensolver cost).
    """
    assert variant in ("plain", "line_search", "grad_averaging")
    assert lmo_mode in ("exact", "approx")
    C = curvature_bound if curvature_bound is not None else objective.curvature_bound
    if lmo_mode == "approx":
        assert C is not None, "approximate eigensolves need a curvature bound"
    stop = stop or StopRule(max_iters=100)
    schedule = StepSchedule.line_search() if variant == "line_search" else StepSchedule.harmonic()
    rng = make_rng(seed)
    clock = RunClock()

    if start_vector is None:
        start_vector = np.zeros(n)
        start_vector[0] = 1.0
    atom0 = rank_one_atom(start_vector, t)
    ledger = IterateLedger()
    ledger.seed(atom0)
    X = atom0.point.copy()
    prev_v = atom0.vector
    trace = RunTrace(seed=seed)
    matvecs = 0

    k = 0
    while True:
        fx = float(objective.eval(X))
        G = objective.grad(X)
        if not math.isfinite(fx) or not np.all(np.isfinite(G)):
            raise FloatingPointError(f"non-finite objective value or gradient at step {k}")
        eps_val = schedule.alpha_at(k) * C if lmo_mode == "approx" else 0.0
        eps_eig = eps_val / t if eps_val > 0 else 0.0

        if variant == "grad_averaging" and k >= 1:
            Xbar = (1.0 - 1.0 / k) * X + (1.0 / k) * t * np.outer(prev_v, prev_v)
            M = 0.5 * (G + objective.grad(Xbar))
        else:
            M = G
        res = spect_lmo(M, eps_eig, t=t, rng=rng, method=eig_method)
        matvecs += res.matvecs
        s = res.atom.point

        if M is G:
            gap_est = float(np.vdot(X, G) - np.vdot(s, G))
            gap_slack = res.slack
        else:
            gap_res = spect_lmo(G, eps_eig, t=t, rng=rng, method=eig_method)
            matvecs += gap_res.matvecs
            gap_est = float(np.vdot(X, G) - np.vdot(gap_res.atom.point, G))
            gap_slack = gap_res.slack
        gap_cert = gap_est + gap_slack

        hit_gap = stop.target_gap is not None and gap_cert <= stop.target_gap
        hit_f = stop.target_f is not None and fx <= stop.target_f
        hit_iters = stop.max_iters is not None and k >= stop.max_iters
        if hit_gap or hit_f or hit_iters:
            trace.append(k, fx, gap_cert, 0.0, res.atom.label, matvecs, clock.millis())
            break

        if variant == "line_search":
            alpha = line_search_alpha(objective, X, s)
            a_fix = 2.0 / (k + 2.0)
            if objective.eval(X + a_fix * (s - X)) < objective.eval(X + alpha * (s - X)):
                alpha = a_fix
        else:
            alpha = schedule.alpha_at(k)

        trace.append(k, fx, gap_cert, alpha, res.atom.label, matvecs, clock.millis())
        X += alpha * (s - X)
        ledger.step(res.atom, alpha)
        prev_v = res.atom.vector
        k += 1

    factored = FactoredPSD.from_ledger(ledger, n, t)
    return HazanResult(factored=factored, trace=trace, point=X, ledger=ledger,
                       matvecs=matvecs)


def random_low_rank_psd(n: int, k: int, rng, trace: float = 1.0) -> np.ndarray:
    """Random PSD matrix of rank <= k with the given trace."""
    B = rng.standard_normal((n, k))
    X = B @ B.T
    return X * (trace / np.trace(X))


def spect_lowrank_lowerbound_suite(n: int, k: int, seed=0, samples: int = 200) -> dict:
    """Rank-vs-error floor for f(X) = ||X||_F^2 on the spectahedron.

    The uniform rank-k iterate diag(1/k,...,1/k,0,...) attains the rank-k
    minimum 1/k (exact in rational arithmetic); random rank<=k samples never
    beat it; orthogonal rank-1 vertices realize the squared diameter 2.
    """
    assert 1 <= k <= n
    Xk = np.zeros((n, n))
    idx = np.arange(k)
    Xk[idx, idx] = 1.0 / k
    f_unif = float(np.vdot(Xk, Xk))
    assert k * Fraction(1, k) ** 2 == Fraction(1, k)
    assert abs(f_unif - 1.0 / k) <= 4e-16 * max(1, k)

    rng = make_rng(seed)
    worst = math.inf
    for _ in range(samples):
        X = random_low_rank_psd(n, k, rng)
        fX = float(np.vdot(X, X))
        assert fX >= 1.0 / k - 1e-10
        worst = min(worst, fX)

    u = np.zeros(n); u[0] = 1.0
    v = np.zeros(n); v[min(1, n - 1)] = 1.0
    d2 = float(np.vdot(np.outer(u, u) - np.outer(v, v),
                       np.outer(u, u) - np.outer(v, v)))
    if n >= 2:
        assert abs(d2 - 2.0) <= 1e-12
    return {"n": n, "k": k, "uniform_value": f_unif, "sample_min": worst,
            "diameter_sq": d2}


# ---------------------------------------------------------------------------
# sparse-PSD atom hull

@dataclass(frozen=True)
class SparsePsdAtom:
    """(e_i +- e_j)(e_i +- e_j)^T: ones at (i,i),(j,j), sign at (i,j),(j,i).

    PSD with trace 2 and diagonally dominant with equality.
    """

    i: int
    j: int
    sign: int  # +1 or -1

    def __post_init__(self):
        assert 0 <= self.i < self.j and self.sign in (1, -1)

    @property
    def label(self) -> str:
        return f"{'P' if self.sign > 0 else 'N'}({self.i},{self.j})"

    def matrix(self, n: int) -> np.ndarray:
        A = np.zeros((n, n))
        A[self.i, self.i] = A[self.j, self.j] = 1.0
        A[self.i, self.j] = A[self.j, self.i] = float(self.sign)
        return A

    def inner(self, G) -> float:
        return float(G[self.i, self.i] + G[self.j, self.j]
                     + 2.0 * self.sign * G[self.i, self.j])

    def atom(self, n: int) -> Atom:
        return Atom(point=self.matrix(n), label=self.label)


def sparsepsd_lmo(G, mode: str = "both") -> SparsePsdAtom:
    """Linear pass over the 2*C(n,2) atoms: minimize G_ii+G_jj +- 2G_ij.

    Ties break to the lexicographically smallest (i,j), plus-sign first.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if n < 2:
        raise ValueError("sparse-PSD atoms need n >= 2")
    assert mode in ("both", "plus", "minus")
    iu, ju = np.triu_indices(n, 1)  # lexicographic order
    d = np.diag(G)
    base = d[iu] + d[ju]
    off = G[iu, ju]
    best = None
    if mode in ("both", "plus"):
        vals = base + 2.0 * off
        a = int(np.argmin(vals))
        best = (float(vals[a]), int(iu[a]), int(ju[a]), 0, 1)
    if mode in ("both", "minus"):
        vals = base - 2.0 * off
        a = int(np.argmin(vals))
        cand = (float(vals[a]), int(iu[a]), int(ju[a]), 1, -1)
        if best is None or (cand[0], cand[1], cand[2], cand[3]) < best[:4]:
            best = cand
    _, i, j, _, sign = best
    return SparsePsdAtom(i=i, j=j, sign=sign)


class SparsePsdDomain:
    """Convex hull of the trace-2 sparse atoms P(i,j), N(i,j)."""

    def __init__(self, n, mode: str = "both"):
        assert n >= 2 and mode in ("both", "plus", "minus")
        self.n = n
        self.mode = mode
        self.name = f"sparsepsd(n={n},mode={mode})"
        self.diam_sq = 8.0

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        return LmoResult(sparsepsd_lmo(grad, self.mode).atom(self.n))

    def gap_formula(self, x, grad):
        s = sparsepsd_lmo(grad, self.mode)
        return float(np.vdot(x, grad)) - s.inner(np.asarray(grad, dtype=float)), 0.0

    def start_atom(self) -> Atom:
        return SparsePsdAtom(0, 1, 1).atom(self.n)

    def atoms(self):
        for i in range(self.n):
            for j in range(i + 1, self.n):
                for sign in (1, -1):
                    yield SparsePsdAtom(i, j, sign)

    def contains(self, X, tol=1e-9) -> bool:
        X = np.asarray(X, dtype=float)
        return bool(abs(np.trace(X) - 2.0) <= tol
                    and np.linalg.eigvalsh(0.5 * (X + X.T)).min() >= -tol)


def sparsepsd_run(objective: ObjectiveOracle, n: int, mode: str = "both",
                  stop: Optional[StopRule] = None, schedule=None, seed=0) -> RunResult:
    """Greedy run over the sparse-atom hull; the step-k iterate touches at
    most 4(k+1) matrix entries (4 new ones per atom)."""
    dom = SparsePsdDomain(n, mode)
    return fw_run(objective, dom, stop=stop or StopRule(max_iters=50),
                  schedule=schedule, seed=seed)


# ---------------------------------------------------------------------------
# bounded-diagonal PSD box  {X PSD, X_ii <= t}

def _project_rows(V: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(V, axis=1)
    scale = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
    return V * scale[:, None]


class BoundedDiagLmo(NamedTuple):
    result: LmoResult
    value: float
    flagged: bool  # descent went nonmonotone before the budget ran out


def boundeddiag_lmo(G, t: float = 1.0, eps: float = 0.0, rng=None, seed=0,
                    restarts: int = 5, iterations: int = 500) -> BoundedDiagLmo:
    """min <Y, G> over Y PSD with Y_ii <= t, via projected gradient descent
    on the full-rank factor Y = V V^T (rows of V in the sqrt(t) ball).

    Step size 1/(2||G||_F) bounds the factor-gradient Lipschitz constant, so
    descent is monotone in exact arithmetic; the first two restarts are the
    deterministic V = 0 (optimal for PSD G) and V = sqrt(t)*Id, the rest are
    seeded Gaussians.  The additive-error contract (value within t*eps of
    the optimum) is validated against a grid oracle at n <= 3; at larger n
    certificates derived from this oracle are conditional on it.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    assert G.shape == (n, n) and np.allclose(G, G.T, atol=1e-10)
    if rng is None:
        rng = make_rng(seed)
    gnorm = float(np.linalg.norm(G))
    radius = math.sqrt(t)
    if gnorm == 0.0:
        Y = np.zeros((n, n))
        return BoundedDiagLmo(LmoResult(Atom(Y, _digest_label("bd", Y)), slack=t * eps),
                              0.0, False)
    step = 1.0 / (2.0 * gnorm)

    best_V, best_val = None, math.inf
    flagged = False
    for r in range(max(1, restarts)):
        if r == 0:
            V = np.zeros((n, n))
        elif r == 1:
            V = radius * np.eye(n)
        else:
            V = _project_rows(rng.standard_normal((n, n)), radius)
        val = float(np.einsum("ij,ik,jk->", G, V, V))
        for _ in range(iterations):
            V = _project_rows(V - step * 2.0 * (G @ V), radius)
            new_val = float(np.einsum("ij,ik,jk->", G, V, V))
            if new_val > val + 1e-9 * max(1.0, abs(val)):
                flagged = True
            val = new_val
        if val < best_val:
            best_val, best_V = val, V
    Y = best_V @ best_V.T
    Y = 0.5 * (Y + Y.T)
    atom = Atom(point=Y, label=_digest_label("bd", Y))
    return BoundedDiagLmo(LmoResult(atom, matvecs=max(1, restarts) * iterations,
                                    slack=t * eps), best_val, flagged)


def boundeddiag_grid_oracle_2x2(G, t: float = 1.0, grid_step: float = 1e-3) -> float:
    """Exhaustive reference for n = 2: Y = [[a, c], [c, b]] with the optimal
    off-diagonal c = -sign(G_01)*sqrt(ab) closed-form, grid over (a, b)."""
    G = np.asarray(G, dtype=float)
    assert G.shape == (2, 2)
    ax = np.arange(0.0, t + grid_step / 2, grid_step)
    A, B = np.meshgrid(ax, ax, indexing="ij")
    root = np.sqrt(A * B)
    vals = A * G[0, 0] + B * G[1, 1] - 2.0 * abs(G[0, 1]) * root
    return float(vals.min())


class BoundedDiagDomain:
    """PSD matrices with diagonal entries at most t (no trace constraint)."""

    def __init__(self, n, t=1.0, restarts: int = 5, iterations: int = 500):
        assert n >= 1 and t > 0
        self.n = n
        self.t = float(t)
        self.restarts = restarts
        self.iterations = iterations
        self.name = f"boundeddiag(n={n},t={self.t:g})"
        # provable cap ||X - Y||_F <= tr(X) + tr(Y) <= 2nt; see measure below
        self.diam_sq = 4.0 * (n * self.t) ** 2
        self.oracle_conditional = n > 3
        self.last_flagged = False

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        out = boundeddiag_lmo(grad, t=self.t, eps=eps, rng=rng,
                              restarts=self.restarts, iterations=self.iterations)
        self.last_flagged = out.flagged
        return out.result

    def gap_formula(self, x, grad, rng=None):
        out = boundeddiag_lmo(grad, t=self.t, rng=rng,
                              restarts=self.restarts, iterations=self.iterations)
        return float(np.vdot(x, grad)) - out.value, 0.0

    def start_atom(self) -> Atom:
        Y = np.zeros((self.n, self.n))
        return Atom(point=Y, label="0")

    def contains(self, X, tol=1e-9) -> bool:
        X = np.asarray(X, dtype=float)
        if not np.allclose(X, X.T, atol=1e-10):
            return False
        if np.diag(X).max() > self.t * (1.0 + 1e-12) + tol:
            return False
        return bool(np.linalg.eigvalsh(X).min() >= -1e-10 * max(1.0, self.t))


def measure_bounded_diag_diam_sq(n: int, t: float = 1.0, samples: int = 200,
                                 seed=0) -> float:
    """Empirical squared Frobenius diameter of the bounded-diagonal box.

    Scans all +-1 sign-pattern rank-1 members t*ss^T (for n <= 10) plus random
    PSD members; a lower bound on the true diameter, used only to calibrate
    empirical curvature estimates.
    """
    rng = make_rng(seed)
    pts = []
    if n <= 10:
        for mask in range(1 << (n - 1)):  # global sign is irrelevant
            s = np.array([1.0] + [1.0 if (mask >> i) & 1 else -1.0
                                  for i in range(n - 1)])
            pts.append(t * np.outer(s, s))
    for _ in range(samples):
        B = rng.standard_normal((n, n))
        X = B @ B.T
        d = np.diag(X).max()
        if d > 0:
            pts.append(X * (t / d))
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            D = pts[i] - pts[j]
            best = max(best, float(np.vdot(D, D)))
    return best


def maxdiag_run(objective: ObjectiveOracle, n: int, t: float = 1.0,
                stop: Optional[StopRule] = None, schedule=None, seed=0,
                lmo_mode: str = "exact", curvature_bound: Optional[float] = None,
                check_membership: bool = True) -> RunResult:
    """Greedy run over the bounded-diagonal box.

    Each iterate is membership-checked (PSD probe, diagonal bound).  Gap
    certificates inherit the inner oracle's conditional status above n = 3.
    """
    dom = BoundedDiagDomain(n, t)

    def on_iterate(k, x, fx, gap):
        if check_membership:
            assert dom.contains(x), f"iterate left the domain at step {k}"

    return fw_run(objective, dom, stop=stop or StopRule(max_iters=50),
                  schedule=schedule, seed=seed, lmo_mode=lmo_mode,
                  curvature_bound=curvature_bound, on_iterate=on_iterate)
