"""Shared types for the greedy (projection-free) solvers.

Points live in a real inner-product space: 1-d arrays for vector domains,
dense symmetric 2-d arrays for matrix domains.  The inner product is always
the full Euclidean/Frobenius one, np.vdot.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

WEIGHT_PRUNE_TOL = 1e-15

TRACE_HEADER = "k,f,gap,alpha,atom,matvecs,millis"


@dataclass
class ObjectiveOracle:
    """Convex objective exposed through value and gradient callables.

    curvature_bound is an upper bound on the curvature constant over the
    intended domain (needed for approximate linear oracles and for gap
    certification schedules).  nnz_hint tells eigensolvers how expensive one
    gradient matvec is.  alpha_hook, when present, returns the exact
    line-search step for a segment [x, s] in closed form.
    """

    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    curvature_bound: Optional[float] = None
    nnz_hint: Optional[int] = None
    name: str = "f"
    alpha_hook: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class Atom:
    """Extreme point of a domain with a compact label.

    point is the ambient representation used by the solver arithmetic.
    label identifies the atom for ledger merging and trace output; two atoms
    with equal labels must be the same point.  vector optionally keeps the
    low-rank factor (unit vector v with point = scale * outer(v, v)).
    """

    point: np.ndarray
    label: str
    vector: Optional[np.ndarray] = None


class LmoResult(NamedTuple):
    atom: Atom
    matvecs: int = 0
    slack: float = 0.0  # guaranteed additive error of <s, grad> vs the true min


@dataclass
class IterateLedger:
    """Convex-combination bookkeeping for the current iterate.

    Invariants: weights nonnegative, sum to 1 (within float error); atoms are
    unique by label; entries with weight below WEIGHT_PRUNE_TOL are dropped.
    """

    atoms: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def seed(self, atom: Atom):
        self.atoms = [atom]
        self.weights = [1.0]

    def step(self, atom: Atom, alpha: float):
        assert 0.0 <= alpha <= 1.0
        self.weights = [w * (1.0 - alpha) for w in self.weights]
        for i, a in enumerate(self.atoms):
            if a.label == atom.label:
                self.weights[i] += alpha
                break
        else:
            self.atoms.append(atom)
            self.weights.append(alpha)
        keep = [i for i, w in enumerate(self.weights) if w >= WEIGHT_PRUNE_TOL]
        if len(keep) != len(self.weights):
            self.atoms = [self.atoms[i] for i in keep]
            self.weights = [self.weights[i] for i in keep]

    def reconstruct(self) -> np.ndarray:
        assert self.atoms, "empty ledger"
        out = np.zeros_like(self.atoms[0].point, dtype=float)
        for a, w in zip(self.atoms, self.weights):
            out += w * a.point
        return out

    def support_size(self) -> int:
        return len(self.atoms)

    def weight_sum(self) -> float:
        return float(sum(self.weights))


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule: harmonic 2/(k+2), line search, or two-phase.

    two_phase(K) runs harmonic steps for k < K and the fixed alpha = 2/(K+2)
    afterwards (the schedule of the gap-certified run).
    """

    kind: str = "harmonic"  # harmonic | line_search | two_phase
    fix_after: Optional[int] = None

    @staticmethod
    def harmonic() -> "StepSchedule":
        return StepSchedule("harmonic")

    @staticmethod
    def line_search() -> "StepSchedule":
        return StepSchedule("line_search")

    @staticmethod
    def two_phase(K: int) -> "StepSchedule":
        assert K >= 0
        return StepSchedule("two_phase", fix_after=K)

    def alpha_at(self, k: int) -> float:
        """Scheduled step size at iteration k (line search consults this too,
        as the fallback the searched step must beat)."""
        if self.kind == "two_phase" and k >= self.fix_after:
            a = 2.0 / (self.fix_after + 2.0)
        else:
            a = 2.0 / (k + 2.0)
        assert 0.0 <= a <= 1.0
        return a


@dataclass
class StopRule:
    max_iters: Optional[int] = None
    target_gap: Optional[float] = None
    target_f: Optional[float] = None

    def __post_init__(self):
        if self.max_iters is None and self.target_gap is None and self.target_f is None:
            raise ValueError("StopRule needs max_iters, target_gap or target_f")


class TraceRow(NamedTuple):
    k: int
    f: float
    gap: float
    alpha: float
    atom: str
    matvecs: int
    millis: int


@dataclass
class RunTrace:
    """Per-iterate history; serializes to CSV with a fixed header.

    gap holds the certified estimate (inner-oracle slack already added, so
    each row's gap upper-bounds the true duality gap and hence the primal
    error).  matvecs is cumulative.  millis is wall time since run start and
    is the one column excluded from byte-level determinism checks.
    """

    rows: list = field(default_factory=list)
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def append(self, k, f, gap, alpha, atom, matvecs, millis):
        if self.rows:
            assert k > self.rows[-1].k, "trace rows must be monotone in k"
        self.rows.append(TraceRow(int(k), float(f), float(gap), float(alpha),
                                  str(atom), int(matvecs), int(millis)))

    def __len__(self):
        return len(self.rows)

    def final(self) -> TraceRow:
        return self.rows[-1]

    def best_gap_row(self) -> TraceRow:
        return min(self.rows, key=lambda r: (r.gap, r.k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        for r in self.rows:
            buf.write("%d,%r,%r,%r,%s,%d,%d\n"
                      % (r.k, r.f, r.gap, r.alpha, r.atom, r.matvecs, r.millis))
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @staticmethod
    def from_csv(text: str) -> "RunTrace":
        lines = [ln for ln in text.strip().splitlines() if ln]
        assert lines and lines[0] == TRACE_HEADER, "bad trace header"
        tr = RunTrace()
        for ln in lines[1:]:
            k, f, gap, alpha, atom, mv, ms = ln.split(",")
            tr.append(int(k), float(f), float(gap), float(alpha), atom, int(mv), int(ms))
        return tr


class RunClock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def millis(self) -> int:
        return int(round((time.perf_counter() - self.t0) * 1000.0))


def make_rng(seed) -> np.random.Generator:
    """Counter-based splittable generator; all randomized paths go through
    this so a config seed pins every stream."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n) -> list:
    seqs = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(s)) for s in seqs]
