"""Vector domains: unit simplex, l1-ball of radius t, unit sup-norm cube.

Each domain exposes the linear minimization oracle (always exact here), the
closed-form duality-gap formula, vertex enumeration for brute-force tests,
and a deterministic start atom.  Tie-breaks are lowest-index; sign(0) := +1.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..core import Atom, LmoResult, make_rng


def _sign_pos(v):
    """Elementwise sign with sign(0) := +1."""
    return np.where(np.asarray(v) >= 0.0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# oracles as free functions (domain objects below delegate to these)

def simplex_lmo(c) -> Atom:
    """Best simplex vertex for the linearization c: e_i at i = argmin c_i."""
    c = np.asarray(c, dtype=float)
    assert np.all(np.isfinite(c)), "non-finite linearization"
    i = int(np.argmin(c))  # np.argmin takes the first (lowest-index) minimum
    point = np.zeros(c.shape[0])
    point[i] = 1.0
    return Atom(point=point, label=f"e{i}")


def simplex_gap(x, grad) -> float:
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    return float(x @ grad - grad.min())


def l1_lmo(c, t=1.0) -> Atom:
    """Signed scaled basis vector: i = argmax |c_i|, sign(-c_i), radius t."""
    c = np.asarray(c, dtype=float)
    assert np.all(np.isfinite(c)), "non-finite linearization"
    i = int(np.argmax(np.abs(c)))
    sgn = float(_sign_pos(-c[i]))
    point = np.zeros(c.shape[0])
    point[i] = sgn * t
    return Atom(point=point, label=("+e%d" % i) if sgn > 0 else ("-e%d" % i))


def l1_gap(x, grad, t=1.0) -> float:
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    return float(t * np.abs(grad).max() + x @ grad)


def cube_lmo(c) -> Atom:
    """Sign vertex of the unit cube: s_i = sign(-c_i), with sign(0) := +1."""
    c = np.asarray(c, dtype=float)
    assert np.all(np.isfinite(c)), "non-finite linearization"
    point = _sign_pos(-c)
    mask = 0
    for i in range(point.shape[0]):
        if point[i] > 0:
            mask |= 1 << i
    return Atom(point=point, label="c%x" % mask)


def cube_gap(x, grad) -> float:
    x = np.asarray(x, dtype=float)
    grad = np.asarray(grad, dtype=float)
    return float(np.abs(grad).sum() + x @ grad)


# ---------------------------------------------------------------------------
# domain objects

class SimplexDomain:
    """Unit simplex: x >= 0, sum(x) = 1."""

    def __init__(self, n):
        assert n >= 1
        self.n = n
        self.name = f"simplex(n={n})"
        self.diam_sq = 2.0 if n >= 2 else 0.0

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        return LmoResult(simplex_lmo(grad))

    def gap_formula(self, x, grad):
        return simplex_gap(x, grad), 0.0

    def start_atom(self) -> Atom:
        e0 = np.zeros(self.n)
        e0[0] = 1.0
        return Atom(point=e0, label="e0")

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.min() >= -tol and abs(x.sum() - 1.0) <= tol * max(1.0, self.n))

    def vertices(self):
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = 1.0
            yield Atom(point=e, label=f"e{i}")


class L1BallDomain:
    """l1-ball of radius t: ||x||_1 <= t; vertices are +-t*e_i, start is 0."""

    def __init__(self, n, t=1.0):
        assert n >= 1 and t > 0
        self.n = n
        self.t = float(t)
        self.name = f"l1ball(n={n},t={self.t:g})"
        self.diam_sq = 4.0 * self.t ** 2

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        return LmoResult(l1_lmo(grad, self.t))

    def gap_formula(self, x, grad):
        return l1_gap(x, grad, self.t), 0.0

    def start_atom(self) -> Atom:
        return Atom(point=np.zeros(self.n), label="0")

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.abs(x).sum() <= self.t * (1.0 + tol))

    def vertices(self):
        for i in range(self.n):
            for sgn, tag in ((1.0, "+"), (-1.0, "-")):
                e = np.zeros(self.n)
                e[i] = sgn * self.t
                yield Atom(point=e, label=f"{tag}e{i}")


class CubeDomain:
    """Unit sup-norm cube: ||x||_inf <= 1; vertices are sign vectors, start 0."""

    def __init__(self, n):
        assert n >= 1
        self.n = n
        self.name = f"cube(n={n})"
        self.diam_sq = 4.0 * n

    def lmo(self, grad, eps=0.0, rng=None) -> LmoResult:
        return LmoResult(cube_lmo(grad))

    def gap_formula(self, x, grad):
        return cube_gap(x, grad), 0.0

    def start_atom(self) -> Atom:
        return Atom(point=np.zeros(self.n), label="0")

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.abs(x).max() <= 1.0 + tol)

    def vertices(self):
        assert self.n <= 20, "vertex enumeration is exponential"
        for mask in range(1 << self.n):
            s = np.array([1.0 if (mask >> i) & 1 else -1.0 for i in range(self.n)])
            yield Atom(point=s, label="c%x" % mask)


# ---------------------------------------------------------------------------
# lower-bound test suites (sparsity vs approximation quality)

def uniform_k_vector(n, k):
    """k coordinates set to 1/k: attains the cardinality-k minimum of ||x||^2."""
    assert 1 <= k <= n
    x = np.zeros(n)
    x[:k] = 1.0 / k
    return x


def sparse_lowerbound_suite(n, k, seed=0, samples=200) -> dict:
    """Checks for min_{x in simplex, card<=k} ||x||^2 = 1/k and gap >= 2/k.

    (a) the uniform-k construction attains 1/k exactly (verified in rational
    arithmetic, since floats cannot represent 1/k for most k); (b) random
    sparse feasible points never beat 1/k - 1e-12 and, for k < n, have
    duality gap >= 2/k - 1e-12.
    """
    assert 1 <= k <= n
    exact = sum(Fraction(1, k) ** 2 for _ in range(k))
    assert exact == Fraction(1, k), "uniform-k construction must attain 1/k"
    x_uni = uniform_k_vector(n, k)
    f_uni = float(x_uni @ x_uni)
    assert abs(f_uni - 1.0 / k) <= 4e-16 * max(1, k)

    rng = make_rng(seed)
    worst_f, worst_gap = np.inf, np.inf
    for _ in range(samples):
        support = rng.choice(n, size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        x = np.zeros(n)
        x[support] = w
        f = float(x @ x)
        assert f >= 1.0 / k - 1e-12, f"sample beat the cardinality bound: {f} < 1/{k}"
        worst_f = min(worst_f, f)
        if k < n:
            g = simplex_gap(x, 2.0 * x)
            assert g >= 2.0 / k - 1e-12, f"gap below 2/k: {g}"
            worst_gap = min(worst_gap, g)
    return {"n": n, "k": k, "f_uniform": f_uni, "min_sample_f": worst_f,
            "min_sample_gap": worst_gap, "samples": samples}


def l1_lowerbound_suite(n, k, seed=0, samples=200) -> dict:
    """Mirrored-instance lower bound on the l1-ball: f(x) = ||x - r||^2 with
    r = (2/n, ..., 2/n).

    On the positive facet (the simplex) f coincides with ||x||^2, so primal
    error >= 1/k - 1/n there.  Over the whole ball the cardinality-k minimum
    is 4(n-k)/n^2 for k <= n/2 (per-support closed form), which still forces
    support Omega(1/eps) when n is chosen ~ 1/eps.  f* = 1/n at x = (1/n,...).
    """
    assert 1 <= k <= n // 2, "closed form needs k <= n/2"
    r = np.full(n, 2.0 / n)
    f_star = 1.0 / n
    card_min = 4.0 * (n - k) / n ** 2

    def f(x):
        return float((x - r) @ (x - r))

    # the per-support optimum: x_i = 2/n on any size-k support (feasible since 2k/n <= 1)
    x_opt = np.zeros(n)
    x_opt[:k] = 2.0 / n
    assert abs(f(x_opt) - card_min) <= 1e-12

    rng = make_rng(seed)
    for _ in range(samples):
        support = rng.choice(n, size=k, replace=False)
        # random feasible sparse point in the ball
        mass = rng.uniform(0, 1)
        w = rng.dirichlet(np.ones(k)) * mass * rng.choice([-1.0, 1.0], size=k)
        x = np.zeros(n)
        x[support] = w
        assert f(x) - f_star >= card_min - f_star - 1e-12
        # facet-restricted sample: error >= 1/k - 1/n (simplex argument verbatim)
        xf = np.zeros(n)
        xf[support] = rng.dirichlet(np.ones(k))
        assert f(xf) - f_star >= 1.0 / k - 1.0 / n - 1e-12
    return {"n": n, "k": k, "f_star": f_star, "card_min": card_min}
