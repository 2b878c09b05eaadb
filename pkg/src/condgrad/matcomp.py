"""Matrix completion over a nuclear-norm ball, solved in the PSD embedding.

The rectangular unknown Z (m users x n items) is the off-diagonal block of a
symmetric (m+n) matrix on the trace-t spectahedron, so ||Z||_nuc <= t/2.  The
solver state is factored: a list of (weight, unit vector) rank-1 atoms plus a
PredictionStore holding X_ij only at observed and test positions, so memory
and per-step cost are O(|entries| + (m+n) * rank).

Gradient of the embedded loss f(Z) = 1/2 sum_{ij in Omega} (Z_ij - y_ij)^2 is
(1/2) [[0, G], [G^T, 0]] with G the sparse residual (see transforms for the
1/2 convention); its spectrum is symmetric (+-lambda pairs via (v; w) ->
(v; -w)), which is why the previous-eigenvalue/2 diagonal shift helps the
power method separate the two extremes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ObjectiveOracle, RunClock, RunTrace, WEIGHT_PRUNE_TOL
from .domains.matrices import FactoredPSD, _canonical_sign, _digest_label
from .eigen import SymmetricOperator, approx_smallest_ev
from .transforms import GRADIENT_BLOCK_SCALE, extract_factorization

RATING_SPAN = 4.0  # NMAE denominator: 5 - 1 for 1..5 star ratings


# ---------------------------------------------------------------------------
# data handling

@dataclass
class RatingDataset:
    """Observed ratings split into train and test triples (user, item, y)."""

    m: int
    n: int
    train_i: np.ndarray
    train_j: np.ndarray
    train_y: np.ndarray
    test_i: np.ndarray
    test_j: np.ndarray
    test_y: np.ndarray

    @staticmethod
    def from_triples(m, n, train, test=()):
        def cols(rows):
            if len(rows) == 0:
                return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                        np.zeros(0))
            a = np.asarray(rows)
            return (a[:, 0].astype(np.int64), a[:, 1].astype(np.int64),
                    a[:, 2].astype(float))

        ti, tj, ty = cols(train)
        si, sj, sy = cols(test)
        return RatingDataset(m, n, ti, tj, ty, si, sj, sy)

    def __post_init__(self):
        for i, j in ((self.train_i, self.train_j), (self.test_i, self.test_j)):
            if len(i):
                assert i.min() >= 0 and i.max() < self.m, "user index out of range"
                assert j.min() >= 0 and j.max() < self.n, "item index out of range"
            keys = i.astype(np.int64) * self.n + j
            assert len(np.unique(keys)) == len(keys), "duplicate (user,item) in split"

    @property
    def n_train(self):
        return len(self.train_y)

    @property
    def n_test(self):
        return len(self.test_y)


def load_movielens(path, fmt: str = "tab_100k") -> RatingDataset:
    """Read a ratings file into a dataset (everything lands in the train
    split; use split_train_test afterwards).

    tab_100k lines are `user<TAB>item<TAB>rating<TAB>timestamp`; dat_1m lines
    use `::` separators.  1-based sparse ids are remapped to dense 0-based.
    """
    assert fmt in ("tab_100k", "dat_1m")
    sep = "\t" if fmt == "tab_100k" else "::"
    users, items, ys = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(sep)
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                u, it, y = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: {e}") from None
            users.append(u)
            items.append(it)
            ys.append(y)
    if not users:
        raise ValueError(f"{path}: no ratings found")
    u_ids = sorted(set(users))
    i_ids = sorted(set(items))
    u_map = {u: k for k, u in enumerate(u_ids)}
    i_map = {i: k for k, i in enumerate(i_ids)}
    ti = np.array([u_map[u] for u in users], dtype=np.int64)
    tj = np.array([i_map[i] for i in items], dtype=np.int64)
    return RatingDataset(len(u_ids), len(i_ids), ti, tj, np.array(ys, dtype=float),
                         np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                         np.zeros(0))


def split_train_test(ds: RatingDataset, policy: str, rho: float = 0.5,
                     r: int = 1, seed=0) -> RatingDataset:
    """Disjoint train/test split of the train triples.

    random_fraction keeps a rho fraction (rounded) for training;
    per_user_holdout moves r random ratings of every user having more than r
    ratings into the test split.
    """
    from .core import make_rng
    rng = make_rng(seed)
    i, j, y = ds.train_i, ds.train_j, ds.train_y
    if policy == "random_fraction":
        assert 0.0 <= rho <= 1.0
        perm = rng.permutation(len(y))
        n_tr = int(round(rho * len(y)))
        tr, te = perm[:n_tr], perm[n_tr:]
    elif policy == "per_user_holdout":
        assert r >= 1
        te_mask = np.zeros(len(y), dtype=bool)
        for u in range(ds.m):
            idx = np.flatnonzero(i == u)
            if len(idx) > r:
                te_mask[rng.choice(idx, size=r, replace=False)] = True
        tr, te = np.flatnonzero(~te_mask), np.flatnonzero(te_mask)
    else:
        raise ValueError(f"unknown split policy {policy!r}")
    return RatingDataset(ds.m, ds.n, i[tr], j[tr], y[tr], i[te], j[te], y[te])


@dataclass
class MeanDenormalizer:
    """Adds back the (mu_user + mu_item)/2 baseline removed by normalize_means."""

    mu_user: np.ndarray
    mu_item: np.ndarray
    global_mean: float

    def baseline(self, i, j):
        return 0.5 * (self.mu_user[i] + self.mu_item[j])

    def __call__(self, i, j, value):
        return value + self.baseline(i, j)


def normalize_means(ds: RatingDataset):
    """Subtract the simple average (mu_user + mu_item)/2 from every rating,
    with means computed on the train split only; users/items unseen in train
    fall back to the global train mean.  Returns (residual dataset,
    denormalizer)."""
    g = float(ds.train_y.mean()) if ds.n_train else 0.0
    mu_u = np.full(ds.m, g)
    mu_i = np.full(ds.n, g)
    cnt_u = np.bincount(ds.train_i, minlength=ds.m)
    sum_u = np.bincount(ds.train_i, weights=ds.train_y, minlength=ds.m)
    seen = cnt_u > 0
    mu_u[seen] = sum_u[seen] / cnt_u[seen]
    cnt_i = np.bincount(ds.train_j, minlength=ds.n)
    sum_i = np.bincount(ds.train_j, weights=ds.train_y, minlength=ds.n)
    seen = cnt_i > 0
    mu_i[seen] = sum_i[seen] / cnt_i[seen]
    den = MeanDenormalizer(mu_u, mu_i, g)
    out = RatingDataset(
        ds.m, ds.n,
        ds.train_i, ds.train_j, ds.train_y - den.baseline(ds.train_i, ds.train_j),
        ds.test_i, ds.test_j,
        ds.test_y - den.baseline(ds.test_i, ds.test_j) if ds.n_test else ds.test_y,
    )
    return out, den


# ---------------------------------------------------------------------------
# factored state

class PredictionStore:
    """Current predictions X_ij at observed-and-test positions only.

    A rank-1 step with weight alpha and embedded unit vector v updates every
    stored entry as X_ij <- (1-alpha) X_ij + alpha * t * v_i * v_{m+j}.
    """

    def __init__(self, ds: RatingDataset):
        self.m, self.n = ds.m, ds.n
        self.i_all = np.concatenate([ds.train_i, ds.test_i])
        self.j_all = np.concatenate([ds.train_j, ds.test_j])
        self.n_train = ds.n_train
        self.x = np.zeros(len(self.i_all))

    def update(self, alpha: float, v: np.ndarray, t: float):
        assert 0.0 <= alpha <= 1.0 and len(v) == self.m + self.n
        vt, vb = v[:self.m], v[self.m:]
        self.x *= (1.0 - alpha)
        self.x += alpha * t * vt[self.i_all] * vb[self.j_all]

    @property
    def train_values(self):
        return self.x[:self.n_train]

    @property
    def test_values(self):
        return self.x[self.n_train:]

    def recompute(self, factored: FactoredPSD) -> np.ndarray:
        """Reference values from the factors (for the sync invariant)."""
        out = np.zeros(len(self.x))
        for w, v in zip(factored.weights, factored.vectors):
            out += w * factored.scale * v[:self.m][self.i_all] * v[self.m:][self.j_all]
        return out


def residual_operator(ds: RatingDataset, resid: np.ndarray) -> SymmetricOperator:
    """The embedded gradient as a matvec: (1/2)[[0, G],[G^T, 0]] with
    G_ij = resid at train positions; trace 0, Frobenius norm ||resid||/sqrt(2),
    nnz touched per matvec = 2|train|."""
    m, n = ds.m, ds.n
    i, j = ds.train_i, ds.train_j

    def mv(u, _s=GRADIENT_BLOCK_SCALE):
        top = _s * np.bincount(i, weights=resid * u[m:][j], minlength=m)
        bot = _s * np.bincount(j, weights=resid * u[:m][i], minlength=n)
        return np.concatenate([top, bot])

    return SymmetricOperator(
        dim=m + n, matvec=mv, trace=0.0,
        fro_norm=float(np.linalg.norm(resid)) * math.sqrt(0.5),
        nnz=2 * len(resid))


def squared_loss_objective(ds: RatingDataset, t: float):
    """(ObjectiveOracle, PredictionStore) for f = 1/2 sum (X_ij - y_ij)^2.

    The oracle's callables ignore their argument and read the store, which
    complete() keeps in sync with the factored iterate; grad returns the
    sparse SymmetricOperator.  curvature_bound is the t^2 upper bound for the
    scaled embedding.
    """
    store = PredictionStore(ds)
    y = ds.train_y

    def ev(_x=None):
        r = store.train_values - y
        return 0.5 * float(r @ r)

    def gr(_x=None):
        return residual_operator(ds, store.train_values - y)

    oracle = ObjectiveOracle(eval=ev, grad=gr, curvature_bound=t * t,
                             nnz_hint=2 * ds.n_train, name="completion")
    return oracle, store


def rect_squared_loss(ds: RatingDataset, m=None, n=None) -> ObjectiveOracle:
    """Dense rectangular view f(Z) = 1/2 sum_{ij in train} (Z_ij - y_ij)^2
    (test-scale reference; compose with transforms.nuclear_to_spect)."""
    m = ds.m if m is None else m
    n = ds.n if n is None else n
    i, j, y = ds.train_i, ds.train_j, ds.train_y

    def ev(Z):
        r = Z[i, j] - y
        return 0.5 * float(r @ r)

    def gr(Z):
        G = np.zeros((m, n))
        np.add.at(G, (i, j), Z[i, j] - y)
        return G

    def hook(Zx, Zs):
        rx = Zx[i, j] - y
        d = Zs[i, j] - Zx[i, j]
        den = float(d @ d)
        if den <= 0.0:
            return 0.0
        return float(min(1.0, max(0.0, -float(rx @ d) / den)))

    return ObjectiveOracle(eval=ev, grad=gr, name="completion-dense",
                           alpha_hook=hook)


def closed_form_alpha(store: PredictionStore, ratings: np.ndarray,
                      v: np.ndarray, t: float) -> float:
    """Exact line-search step for the squared loss:
    alpha = sum (X-y)(X-s) / sum (X-s)^2 over train entries, clamped to
    [0,1], where s_ij = t v_i v_{m+j} is the new atom's prediction; a zero
    denominator means s = x along the observed entries, so step 0."""
    X = store.train_values
    s = t * v[:store.m][store.i_all[:store.n_train]] \
        * v[store.m:][store.j_all[:store.n_train]]
    d = X - s
    den = float(d @ d)
    if den <= 0.0:
        return 0.0
    num = float((X - ratings) @ d)
    return float(min(1.0, max(0.0, num / den)))


def metrics(predictions, ratings):
    """(RMSE, NMAE): root mean squared error and mean absolute error scaled
    by the 1..5 rating span (5-1)."""
    predictions = np.asarray(predictions, dtype=float)
    ratings = np.asarray(ratings, dtype=float)
    assert predictions.shape == ratings.shape
    if len(ratings) == 0:
        return float("nan"), float("nan")
    err = predictions - ratings
    rmse = float(np.sqrt(np.mean(err ** 2)))
    nmae = float(np.mean(np.abs(err)) / RATING_SPAN)
    return rmse, nmae


def default_power_budget(k: int) -> int:
    """ceil(0.2 k) + 3 power iterations at step k; the floor keeps the very
    first steps from running on one or two iterations."""
    return int(math.ceil(0.2 * k)) + 3


@dataclass
class CompletionResult:
    L: np.ndarray
    R: np.ndarray
    factored: FactoredPSD
    store: PredictionStore
    trace: RunTrace
    history: list
    final: dict
    matvecs: int
    denormalizer: Optional[MeanDenormalizer] = None


def complete(ds: RatingDataset, t: float, steps: Optional[int] = None,
             eps: Optional[float] = None, line_search: bool = True,
             grad_averaging: bool = False, normalize: bool = False,
             seed=0, power_budget: Optional[Callable[[int], int]] = None,
             shift_heuristic: bool = True, eig_start="ones") -> CompletionResult:
    """Greedy rank-1 completion run.

    Per step: one approximate smallest-eigenvector of the sparse residual
    gradient (budget ceil(0.2k)+3 with the previous-eigenvalue/2 diagonal
    shift, both overridable), closed-form line search (or harmonic step), a
    PredictionStore update, and RMSE bookkeeping.  The trace gap column is
    X.grad - t*rayleigh, an uncertified estimate under fixed eigensolver
    budgets.  grad_averaging feeds the eigensolver the averaged gradient at
    the cost of a second eigensolve for the honest gap estimate (heuristic,
    no rate guarantee).
    """
    assert steps is not None or eps is not None
    raw = ds
    denorm = None
    if normalize:
        ds, denorm = normalize_means(ds)
    oracle, store = squared_loss_objective(ds, t)
    y = ds.train_y
    budget = power_budget or default_power_budget
    clock = RunClock()
    trace = RunTrace(seed=seed)
    mn = ds.m + ds.n

    v0 = np.zeros(mn)
    v0[0] = 1.0
    weights, vectors = [1.0], [v0]
    labels = [_digest_label("v", v0)]
    prev_low_ray = None
    prev_v = None
    matvecs = 0
    history = []

    def raw_metrics():
        """Metrics in original rating units on both splits."""
        pt = store.train_values
        ps = store.test_values
        if denorm is not None:
            pt = denorm(ds.train_i, ds.train_j, pt)
            ps = denorm(ds.test_i, ds.test_j, ps)
        rmse_tr, nmae_tr = metrics(pt, raw.train_y)
        rmse_te, nmae_te = metrics(ps, raw.test_y)
        return {"rmse_train": rmse_tr, "nmae_train": nmae_tr,
                "rmse_test": rmse_te, "nmae_test": nmae_te}

    k = 0
    while True:
        resid = store.train_values - y
        fx = 0.5 * float(resid @ resid)
        if not math.isfinite(fx):
            raise FloatingPointError(f"non-finite loss at step {k}")
        history.append({"k": k, "f": fx, **raw_metrics()})

        shift = None
        if shift_heuristic and prev_low_ray is not None and prev_low_ray < 0.0:
            # half the previous eigenvalue estimate; an estimate that is not
            # negative carries no information (the spectrum is symmetric), so
            # fall back to the generic range-bound shift rather than running
            # the power method unshifted on a +/- paired spectrum
            shift = 0.5 * (-prev_low_ray)
        if grad_averaging and prev_v is not None and k >= 1:
            pred_bar = (1.0 - 1.0 / k) * store.x + (1.0 / k) * t \
                * prev_v[:ds.m][store.i_all] * prev_v[ds.m:][store.j_all]
            resid_bar = pred_bar[:store.n_train] - y
            op_step = residual_operator(ds, 0.5 * (resid + resid_bar))
        else:
            op_step = residual_operator(ds, resid)
        res = approx_smallest_ev(op_step, 0.0, iterations=budget(k),
                                 start=eig_start, shift=shift, seed=seed)
        matvecs += res.matvecs
        v = _canonical_sign(res.vector)

        if grad_averaging and prev_v is not None and k >= 1:
            gap_res = approx_smallest_ev(residual_operator(ds, resid), 0.0,
                                         iterations=budget(k), start=eig_start,
                                         shift=shift, seed=seed)
            matvecs += gap_res.matvecs
            low_ray = gap_res.rayleigh
        else:
            low_ray = res.rayleigh
        gap_est = float(store.train_values @ resid) - t * low_ray

        hit_iters = steps is not None and k >= steps
        hit_gap = eps is not None and gap_est <= eps
        if hit_iters or hit_gap:
            trace.append(k, fx, gap_est, 0.0, _digest_label("v", v), matvecs,
                         clock.millis())
            break

        if line_search:
            alpha = closed_form_alpha(store, y, v, t)
        else:
            alpha = 2.0 / (k + 2.0)

        trace.append(k, fx, gap_est, alpha, _digest_label("v", v), matvecs,
                     clock.millis())
        store.update(alpha, v, t)
        weights = [w * (1.0 - alpha) for w in weights]
        weights.append(alpha)
        vectors.append(v)
        labels.append(_digest_label("v", v))
        keep = [idx for idx, w in enumerate(weights) if w >= WEIGHT_PRUNE_TOL]
        if len(keep) != len(weights):
            weights = [weights[idx] for idx in keep]
            vectors = [vectors[idx] for idx in keep]
            labels = [labels[idx] for idx in keep]
        prev_low_ray = low_ray
        prev_v = v
        k += 1

    factored = FactoredPSD(n=mn, scale=float(t), weights=weights, vectors=vectors)
    L, R = extract_factorization(factored, ds.m, ds.n)
    final = {"k": k, "f": history[-1]["f"], **raw_metrics(),
             "gap_estimate": trace.final().gap, "matvecs": matvecs}
    return CompletionResult(L=L, R=R, factored=factored, store=store,
                            trace=trace, history=history, final=final,
                            matvecs=matvecs, denormalizer=denorm)
