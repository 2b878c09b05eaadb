"""Domain-agnostic greedy solver on convex hulls.

One iteration: linearize f at x, ask the domain oracle for the best atom s,
step x := x + alpha (s - x).  The same linearization yields the duality gap
<x - s, grad>, a free certificate that upper-bounds the primal error.  With
an approximate oracle the gap estimate carries an explicit slack; every gap
written to a trace already includes that slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (Atom, IterateLedger, ObjectiveOracle, RunClock, RunTrace,
                   StepSchedule, StopRule, make_rng)

LINE_SEARCH_DERIV_TOL = 1e-10
LINE_SEARCH_MAX_ITERS = 60


@dataclass
class RunResult:
    point: np.ndarray
    ledger: IterateLedger
    trace: RunTrace
    stopped_on: str  # max_iters | gap | f_target
    matvecs: int
    best: Optional[tuple] = None  # (gap, k, point, atoms, weights) when tracked


@dataclass
class CertifiedRun:
    point: np.ndarray
    ledger: IterateLedger
    trace: RunTrace
    gap_bound: float
    k_hat: int
    certified: bool


def curvature_from_hessian(sup_hessian_eig: float, diameter_sq: float) -> float:
    """Curvature upper bound (1/2) * diam(D)^2 * sup lambda_max(Hessian)."""
    assert sup_hessian_eig >= 0 and diameter_sq >= 0
    return 0.5 * diameter_sq * sup_hessian_eig


def line_search_alpha(objective: ObjectiveOracle, x, s) -> float:
    """argmin over alpha in [0,1] of f(x + alpha (s - x)).

    Uses the objective's closed-form hook when present, otherwise bisects the
    directional derivative (convex and nondecreasing in alpha) to
    |phi'(alpha)| <= 1e-10 or a boundary.
    """
    d = s - x
    if not np.any(d):
        return 0.0
    if objective.alpha_hook is not None:
        a = float(objective.alpha_hook(x, s))
        assert 0.0 <= a <= 1.0
        return a

    def dphi(a):
        return float(np.vdot(d, objective.grad(x + a * d)))

    lo_d = dphi(0.0)
    if not math.isfinite(lo_d):
        raise FloatingPointError("non-finite directional derivative")
    if lo_d >= 0.0:
        return 0.0
    if dphi(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(LINE_SEARCH_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        dm = dphi(mid)
        if abs(dm) <= LINE_SEARCH_DERIV_TOL:
            return mid
        if dm < 0.0:
            lo = mid
        else:
            hi = mid
    return mid


def duality_gap(x, grad, domain, eps_inner: float = 0.0, rng=None) -> float:
    """<x - s, grad> for the domain's best atom s; exact oracles give the true
    gap, approximate ones an estimate no more than their slack below it."""
    res = domain.lmo(grad, eps_inner, rng)
    return float(np.vdot(x, grad) - np.vdot(res.atom.point, grad))


def fw_run(objective: ObjectiveOracle, domain, stop: StopRule,
           schedule: Optional[StepSchedule] = None, start: Optional[Atom] = None,
           lmo_mode: str = "exact", seed=0, rng=None,
           curvature_bound: Optional[float] = None,
           inner_tol: Optional[Callable[[int], float]] = None,
           track_best_gap: bool = False,
           on_iterate: Optional[Callable] = None) -> RunResult:
    """Run the greedy iteration until the stop rule fires.

    Every visited iterate gets a trace row (f, certified gap, step taken);
    the final iterate's row has alpha = 0.  In approx mode the oracle is
    called with inner accuracy eps' = alpha_k * C_f unless inner_tol
    overrides it.
    """
    assert lmo_mode in ("exact", "approx")
    schedule = schedule or StepSchedule.harmonic()
    C = curvature_bound if curvature_bound is not None else objective.curvature_bound
    if lmo_mode == "approx" and inner_tol is None:
        assert C is not None, "approximate LMO mode needs a curvature bound"
    if getattr(domain, "requires_line_search", False):
        assert schedule.kind == "line_search", \
            "randomized oracles need line search so failed samples cannot hurt"
    if rng is None:
        rng = make_rng(seed)
    clock = RunClock()

    start_atom = start if start is not None else domain.start_atom()
    ledger = IterateLedger()
    ledger.seed(start_atom)
    x = np.array(start_atom.point, dtype=float, copy=True)
    trace = RunTrace(seed=seed if not isinstance(seed, np.random.Generator) else None)
    matvecs = 0
    best = None  # (gap, k, x copy, ledger atoms, ledger weights)

    k = 0
    while True:
        fx = float(objective.eval(x))
        grad = objective.grad(x)
        if not math.isfinite(fx) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite objective value or gradient at step {k}")

        if inner_tol is not None:
            eps_in = float(inner_tol(k))
        elif lmo_mode == "approx":
            eps_in = schedule.alpha_at(k) * C
        else:
            eps_in = 0.0
        res = domain.lmo(grad, eps_in, rng)
        matvecs += res.matvecs
        s = res.atom.point

        if getattr(domain, "requires_line_search", False):
            # sampled atoms underestimate the gap; use the exact formula
            gap_est, gap_slack = domain.gap_formula(x, grad)
        else:
            gap_est = float(np.vdot(x, grad) - np.vdot(s, grad))
            gap_slack = res.slack
        gap_cert = gap_est + gap_slack

        if track_best_gap and (best is None or gap_cert < best[0]):
            best = (gap_cert, k, x.copy(), list(ledger.atoms), list(ledger.weights))
        if on_iterate is not None:
            on_iterate(k, x, fx, gap_cert)

        hit_gap = stop.target_gap is not None and gap_cert <= stop.target_gap
        hit_f = stop.target_f is not None and fx <= stop.target_f
        hit_iters = stop.max_iters is not None and k >= stop.max_iters
        if hit_gap or hit_f or hit_iters:
            trace.append(k, fx, gap_cert, 0.0, res.atom.label, matvecs, clock.millis())
            stopped = "gap" if hit_gap else ("f_target" if hit_f else "max_iters")
            break

        if schedule.kind == "line_search":
            alpha = line_search_alpha(objective, x, s)
            a_fix = schedule.alpha_at(k)
            # the searched step must be at least as good as the scheduled one
            if objective.eval(x + a_fix * (s - x)) < objective.eval(x + alpha * (s - x)):
                alpha = a_fix
        else:
            alpha = schedule.alpha_at(k)

        trace.append(k, fx, gap_cert, alpha, res.atom.label, matvecs, clock.millis())
        x += alpha * (s - x)
        ledger.step(res.atom, alpha)
        k += 1

    return RunResult(point=x, ledger=ledger, trace=trace,
                     stopped_on=stopped, matvecs=matvecs,
                     best=best if track_best_gap else None)


def certified_iteration_count(curvature_bound: float, eps: float, lmo_mode: str) -> int:
    """K such that some iterate in [K, 2K+1] has duality gap <= eps."""
    scale = 4.0 if lmo_mode == "exact" else 8.0
    return int(math.ceil(scale * curvature_bound / eps))


def gap_certified_run(objective: ObjectiveOracle, domain, eps: float,
                      lmo_mode: str = "exact", start: Optional[Atom] = None,
                      seed=0, curvature_bound: Optional[float] = None) -> CertifiedRun:
    """Two-phase schedule (K harmonic steps, then K+1 at fixed alpha=2/(K+2))
    guaranteeing an iterate with duality gap <= eps; returns the iterate with
    the smallest measured certified gap.

    For approximate oracles the gap of the window iterates is measured at a
    tolerance below the slack margin the schedule leaves, so a true-gap
    guarantee turns into a certified (estimate + slack) one.
    """
    assert eps > 0
    C = curvature_bound if curvature_bound is not None else objective.curvature_bound
    assert C is not None and C >= 0, "certified runs need a curvature bound"
    K = certified_iteration_count(C, eps, lmo_mode)
    schedule = StepSchedule.two_phase(K)
    inner_tol = None
    if lmo_mode == "approx":
        # the proof's true-gap bound on the window [K, 2K+1]; measure tighter
        # than the leftover margin so slack cannot spoil certification
        bound_true = 4.0 * C * (2 * K + 3) / ((K + 1) * (K + 2))
        margin = eps - bound_true
        eps_meas = margin / 2.0 if margin > 0 else eps / 10.0

        def inner_tol(k, _K=K, _C=C, _s=schedule, _m=eps_meas):
            step_tol = _s.alpha_at(k) * _C
            return min(step_tol, _m) if k >= _K else step_tol

    run = fw_run(objective, domain, stop=StopRule(max_iters=2 * K + 1),
                 schedule=schedule, start=start, lmo_mode=lmo_mode, seed=seed,
                 curvature_bound=C, inner_tol=inner_tol, track_best_gap=True)
    gap_bound, k_hat, x_best, atoms, weights = run.best
    ledger = IterateLedger(atoms=atoms, weights=weights)
    return CertifiedRun(point=x_best, ledger=ledger, trace=run.trace,
                        gap_bound=gap_bound, k_hat=k_hat,
                        certified=bool(gap_bound <= eps))


class RandomizedLMO:
    """Wraps a domain with a sampling oracle that hits the exact atom with
    probability at least success_prob; the run must use line search."""

    requires_line_search = True

    def __init__(self, domain, sampler, success_prob: float):
        assert 0.0 < success_prob <= 1.0
        self.inner = domain
        self.sampler = sampler
        self.success_prob = success_prob
        self.name = f"randomized({domain.name},p={success_prob:g})"
        self.diam_sq = domain.diam_sq

    def lmo(self, grad, eps=0.0, rng=None):
        assert rng is not None, "sampling oracle needs the run's generator"
        from .core import LmoResult
        return LmoResult(self.sampler(rng))

    def gap_formula(self, x, grad):
        return self.inner.gap_formula(x, grad)

    def start_atom(self):
        return self.inner.start_atom()

    def contains(self, x, tol=1e-12):
        return self.inner.contains(x, tol)


def randomized_lmo(domain, sampler, success_prob: float, seed=0) -> Atom:
    """One draw from the sampling oracle (the solver path uses RandomizedLMO)."""
    return RandomizedLMO(domain, sampler, success_prob).lmo(None, rng=make_rng(seed)).atom


def uniform_simplex_sampler(n):
    """Uniform coordinate sampling on the simplex: success probability 1/n."""
    def sample(rng):
        i = int(rng.integers(n))
        e = np.zeros(n)
        e[i] = 1.0
        return Atom(point=e, label=f"e{i}")
    return sample
