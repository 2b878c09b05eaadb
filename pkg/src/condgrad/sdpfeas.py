"""Epsilon-feasibility for bounded-trace SDPs.

Feasibility of {A_i . X <= b_i, X PSD, tr X = t} is reduced to minimizing
the soft-max potential f(X) = (1/sigma) log sum_i exp(sigma (A_i.X - b_i)),
which sandwiches the maximum violation within log(m)/sigma.  Minimizing f
over the spectahedron with sigma = log(m)/eps either drives f (hence every
violation) below eps, or a certified duality gap proves min f > eps, which
rules out any exactly-feasible point.

Linear SDP objectives reduce to feasibility by bisecting a guessed value
gamma with the extra constraint -C.X <= -gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ObjectiveOracle, RunTrace, StopRule
from .domains.matrices import FactoredPSD, SpectrahedronDomain
from .eigen import dense_eig_oracle
from .solver import fw_run, gap_certified_run


@dataclass
class FeasibilitySDP:
    """Constraints A_i . X <= b_i over {X PSD, tr X = t}."""

    n: int
    A: list
    b: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        self.A = [np.asarray(Ai, dtype=float) for Ai in self.A]
        self.b = np.asarray(self.b, dtype=float)
        assert len(self.A) == len(self.b) >= 1 and self.t > 0
        for Ai in self.A:
            assert Ai.shape == (self.n, self.n)
            assert np.allclose(Ai, Ai.T, atol=1e-10), "constraint matrix not symmetric"

    @property
    def m(self):
        return len(self.A)


def constraint_values(sdp: FeasibilitySDP, X: np.ndarray) -> np.ndarray:
    return np.array([float(np.vdot(Ai, X)) for Ai in sdp.A]) - sdp.b


def max_violation(sdp: FeasibilitySDP, X: np.ndarray) -> float:
    return float(constraint_values(sdp, X).max())


def softmax_eval_grad(sdp: FeasibilitySDP, sigma: float, X):
    """(f, grad, weights) of the soft-max potential at X (dense or factored).

    f uses the max-shifted log-sum-exp, grad = sum_i w_i A_i with the softmax
    weights w summing to one; f always lies between the max violation and
    max violation + log(m)/sigma.
    """
    assert sigma > 0
    if isinstance(X, FactoredPSD):
        X = X.dense()
    z = sigma * constraint_values(sdp, X)
    zmax = float(z.max())
    e = np.exp(z - zmax)
    s = float(e.sum())
    f = (zmax + math.log(s)) / sigma
    w = e / s
    grad = np.zeros((sdp.n, sdp.n))
    for wi, Ai in zip(w, sdp.A):
        grad += wi * Ai
    return f, grad, w


def softmax_objective(sdp: FeasibilitySDP, sigma: float,
                      curvature_bound: Optional[float] = None) -> ObjectiveOracle:
    return ObjectiveOracle(
        eval=lambda X: softmax_eval_grad(sdp, sigma, X)[0],
        grad=lambda X: softmax_eval_grad(sdp, sigma, X)[1],
        curvature_bound=curvature_bound,
        name=f"softmax(m={sdp.m},sigma={sigma:g})")


def _lambda_max(Ai: np.ndarray) -> float:
    vals, _ = dense_eig_oracle(Ai)
    return float(vals[0])


def curvature_estimate(sdp: FeasibilitySDP, sigma: float) -> float:
    """sigma * t^2 * max_i lambda_max(A_i)^2, the budget constant for the
    soft-max potential; lambda_max values come from one upfront dense
    eigensolve per constraint (residual <= 1e-9, well inside the 1e-6 ask)."""
    lam = max(abs(_lambda_max(Ai)) for Ai in sdp.A)
    return sigma * (sdp.t * lam) ** 2


@dataclass
class FeasibilityOutcome:
    status: str  # feasible | infeasible | undetermined
    X: Optional[np.ndarray]
    f: float
    max_violation: float
    iterations: int
    matvecs: int
    trace: RunTrace
    sigma: float
    curvature: float
    f_lower: Optional[float] = None  # certified lower bound on min f, if computed
    gap_bound: Optional[float] = None


def solve_eps_feasible(sdp: FeasibilitySDP, eps: float, seed=0,
                       max_iters: Optional[int] = None,
                       lmo_mode: str = "approx",
                       certify_infeasible: bool = True) -> FeasibilityOutcome:
    """Drive the soft-max potential below eps (every violation <= eps then),
    or certify min f > eps (no exactly feasible X exists).

    sigma = log(m)/eps; the default iteration cap is the 8 C_f/eps primal
    budget, O(log(m)/eps^2) eigensolver calls for unit-norm constraints.
    Infeasibility is only ever reported with a certified gap; otherwise the
    outcome is undetermined at this budget.
    """
    assert eps > 0
    sigma = math.log(max(sdp.m, 2)) / eps
    C = curvature_estimate(sdp, sigma)
    objective = softmax_objective(sdp, sigma, curvature_bound=C)
    domain = SpectrahedronDomain(sdp.n, sdp.t)
    if max_iters is None:
        max_iters = int(math.ceil(8.0 * C / eps)) + 2
    run = fw_run(objective, domain, stop=StopRule(max_iters=max_iters, target_f=eps),
                 lmo_mode=lmo_mode, seed=seed)
    X = run.point
    f = float(objective.eval(X))
    viol = max_violation(sdp, X)
    if f <= eps:
        return FeasibilityOutcome("feasible", X, f, viol, run.trace.final().k,
                                  run.matvecs, run.trace, sigma, C)

    if certify_infeasible:
        cert = gap_certified_run(objective, domain, eps / 2.0, lmo_mode=lmo_mode,
                                 seed=seed)
        f_hat = float(objective.eval(cert.point))
        f_lower = f_hat - cert.gap_bound
        if cert.certified and f_lower > eps:
            return FeasibilityOutcome("infeasible", cert.point, f_hat,
                                      max_violation(sdp, cert.point),
                                      run.trace.final().k, run.matvecs,
                                      run.trace, sigma, C,
                                      f_lower=f_lower, gap_bound=cert.gap_bound)
        return FeasibilityOutcome("undetermined", X, f, viol,
                                  run.trace.final().k, run.matvecs, run.trace,
                                  sigma, C, f_lower=f_lower,
                                  gap_bound=cert.gap_bound)
    return FeasibilityOutcome("undetermined", X, f, viol, run.trace.final().k,
                              run.matvecs, run.trace, sigma, C)


@dataclass
class BinarySearchResult:
    X: Optional[np.ndarray]
    lo: float
    hi: float
    objective_value: float
    rounds: int
    outcomes: list = field(default_factory=list)

    @property
    def bracket(self):
        return self.hi - self.lo


def binary_search_objective(C: np.ndarray, sdp: Optional[FeasibilitySDP],
                            eps: float, value_range=None, n: Optional[int] = None,
                            t: float = 1.0, rounds: Optional[int] = None,
                            seed=0, lmo_mode: str = "approx") -> BinarySearchResult:
    """Maximize C . X over the eps-feasible region by bisecting the guess
    gamma with the extra constraint -C.X <= -gamma.

    sdp = None means no side constraints (pure spectral problem).  The value
    range defaults to +-2 ||C||_F t; each round halves the bracket, keeping
    the best eps-feasible X with C.X >= lo.
    """
    C = np.asarray(C, dtype=float)
    if sdp is not None:
        n, t = sdp.n, sdp.t
    assert n is not None
    if value_range is None:
        span = 2.0 * float(np.linalg.norm(C)) * t
        lo, hi = -span, span
    else:
        lo, hi = map(float, value_range)
    assert hi >= lo
    if rounds is None:
        rounds = max(1, int(math.ceil(math.log2(max((hi - lo) / max(eps, 1e-12), 2.0)))))

    best_X = None
    best_val = -math.inf
    outcomes = []
    for _ in range(rounds):
        gamma = 0.5 * (lo + hi)
        A = ([] if sdp is None else list(sdp.A)) + [-C]
        b = ([] if sdp is None else list(sdp.b)) + [-gamma]
        aug = FeasibilitySDP(n=n, A=A, b=b, t=t)
        out = solve_eps_feasible(aug, eps, seed=seed, certify_infeasible=False,
                                 lmo_mode=lmo_mode)
        outcomes.append((gamma, out.status))
        if out.status == "feasible":
            lo = gamma
            val = float(np.vdot(C, out.X))
            if val > best_val:
                best_val, best_X = val, out.X
        else:
            hi = gamma
    return BinarySearchResult(X=best_X, lo=lo, hi=hi, objective_value=best_val,
                              rounds=rounds, outcomes=outcomes)


# ---------------------------------------------------------------------------
# plain-text problem files
#
#   # comment
#   n 6
#   t 1.0
#   constraint b=0.5
#   0 0 1.0
#   0 3 -2.0        (i j value, 0-based; value mirrored to (j,i))
#   constraint b=-1
#   ...

def parse_problem(text: str) -> FeasibilitySDP:
    n = None
    t = 1.0
    A, b = [], []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "n":
                n = int(parts[1])
            elif parts[0] == "t":
                t = float(parts[1])
            elif parts[0] == "constraint":
                assert n is not None, "n must precede constraints"
                kv = dict(p.split("=", 1) for p in parts[1:])
                b.append(float(kv["b"]))
                cur = np.zeros((n, n))
                A.append(cur)
            else:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
                assert cur is not None, "entry before any constraint header"
                cur[i, j] = v
                cur[j, i] = v
        except (IndexError, KeyError, ValueError, AssertionError) as e:
            raise ValueError(f"problem file line {lineno}: {raw!r}: {e}") from None
    if n is None or not A:
        raise ValueError("problem file needs an `n` header and at least one constraint")
    return FeasibilitySDP(n=n, A=A, b=np.array(b), t=t)


def load_problem(path) -> FeasibilitySDP:
    with open(path) as fh:
        return parse_problem(fh.read())
