"""Proportion-matching solvers.

train_alter_psvm is the workhorse: alternating minimization over latent
instance labels and a linear large-margin separator, penalized by the l1
distance between predicted and observed bag proportions.  train_mean_map
and train_inv_cal are the two closed-form-flavored initializers (class-mean
least squares and inverse calibration); train_baseline is the per-group
majority rule used as the reference point in the census experiments.

Bags may overlap (sampling with replacement), so the latent labels live on
bag *slots*: one latent label per (bag, member) position.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baggen import make_rng
from .core import (
    BagDataset,
    DataError,
    LinearHypothesis,
    LossKind,
    empirical_bag_error,
    feature_dim,
    hypothesis_from_array,
    to_dense,
)

SOLVERS = ("alter-psvm", "mean-map", "inv-cal", "baseline")
INITS = ("mean-map", "inv-cal", "random")


@dataclass(frozen=True)
class TrainConfig:
    solver: str = "alter-psvm"
    C: float = 1.0
    C_p: float = 0.1
    init: str = "mean-map"
    max_outer_iters: int = 50
    inner_iters: int = 300
    inner_tolerance: float = 1e-4
    seed: int = 0
    restarts: int = 4

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise DataError(f"unknown solver {self.solver!r}")
        if self.init not in INITS:
            raise DataError(f"unknown init {self.init!r}")
        if self.C <= 0 or self.C_p <= 0:
            raise DataError("C and C_p must be positive")


@dataclass(frozen=True)
class TrainResult:
    hypothesis: LinearHypothesis
    final_bag_error: float
    objective_trace: Tuple[float, ...]
    latent_labels: Optional[Tuple[int, ...]]  # per bag slot, alter-psvm only
    wall_time: float
    warnings: Tuple[str, ...] = ()
    init_used: str = ""


# ---------------------------------------------------------------------------
# dense views

class _Arrays:
    """Dense view of a BagDataset for the numeric solvers."""

    def __init__(self, data: BagDataset, dim: Optional[int] = None):
        self.data = data
        self.dim = dim if dim is not None else max(feature_dim(data.instances), 1)
        self.X = to_dense(data.instances, self.dim)
        self.bags = [np.asarray(b.members, dtype=np.int64) for b in data.bags]
        self.props = np.array([b.observed_proportion for b in data.bags])
        self.sizes = np.array([len(b) for b in self.bags], dtype=np.int64)
        # slot layout: concatenation of all bag members
        self.slot_rows = np.concatenate(self.bags) if self.bags else np.empty(0, np.int64)
        self.slot_bag = np.repeat(np.arange(len(self.bags)), self.sizes)
        self.Xs = self.X[self.slot_rows]
        self.bag_slices = []
        start = 0
        for s in self.sizes:
            self.bag_slices.append(slice(start, start + int(s)))
            start += int(s)

    def bag_means(self) -> np.ndarray:
        means = np.empty((len(self.bags), self.dim))
        for k, rows in enumerate(self.bags):
            means[k] = self.X[rows].mean(axis=0)
        return means


def _predicted_props(w: np.ndarray, b: float, arr: _Arrays) -> np.ndarray:
    scores = arr.Xs @ w + b
    pred = np.where(scores >= 0, 1.0, 0.0)
    sums = np.add.reduceat(pred, np.r_[0, np.cumsum(arr.sizes)[:-1]])
    return sums / arr.sizes


def _bag_error(w: np.ndarray, b: float, arr: _Arrays) -> float:
    return float(np.mean(np.abs(_predicted_props(w, b, arr) - arr.props)))


# ---------------------------------------------------------------------------
# mean map

def train_mean_map(data: BagDataset, config: TrainConfig = TrainConfig(solver="mean-map")) -> TrainResult:
    """Class means from bag means and proportions, by least squares.

    Solves bag_mean_k ~ p_k mu_plus + (1-p_k) mu_minus, sets w = mu_plus -
    mu_minus, and picks the bias so the training-slot positive rate matches
    the proportion-weighted average of the bag proportions.
    """
    t0 = time.perf_counter()
    arr = _Arrays(data)
    if len(arr.bags) < 2 or arr.props.max() - arr.props.min() < 1e-12:
        raise DataError("degenerate proportions for mean-map")
    A = np.column_stack([arr.props, 1.0 - arr.props])
    M, *_ = np.linalg.lstsq(A, arr.bag_means(), rcond=None)
    w = M[0] - M[1]
    b = _match_prior_bias(w, arr)
    err = _bag_error(w, b, arr)
    return TrainResult(hypothesis=hypothesis_from_array(w, b), final_bag_error=err,
                       objective_trace=(err,), latent_labels=None,
                       wall_time=time.perf_counter() - t0, init_used="mean-map")


def _match_prior_bias(w: np.ndarray, arr: _Arrays) -> float:
    """Bias such that the fraction of positive slot predictions matches the
    proportion-weighted average of the observed proportions."""
    target = float(np.sum(arr.props * arr.sizes) / np.sum(arr.sizes))
    scores = np.sort(arr.Xs @ w)[::-1]
    n = len(scores)
    k = int(round(target * n))
    if k <= 0:
        return -float(scores[0]) - 1e-9 if n else 0.0
    if k >= n:
        return -float(scores[-1]) + 1e-9
    return -0.5 * (float(scores[k - 1]) + float(scores[k]))


# ---------------------------------------------------------------------------
# inverse calibration

def train_inv_cal(data: BagDataset, config: TrainConfig = TrainConfig(solver="inv-cal"),
                  insensitivity: float = 0.01) -> TrainResult:
    """Epsilon-insensitive large-margin regression of bag mean vectors onto
    soft labels 2p - 1, solved by deterministic subgradient descent."""
    t0 = time.perf_counter()
    arr = _Arrays(data)
    if not arr.bags:
        raise DataError("dataset has no bags")
    means = arr.bag_means()
    targets = 2.0 * arr.props - 1.0
    m = len(arr.bags)
    lam = 1.0 / (config.C * m)
    w = np.zeros(arr.dim)
    b = 0.0
    best = (np.inf, w.copy(), b)
    for t in range(1, config.inner_iters + 1):
        eta = 1.0 / (lam * t)
        resid = means @ w + b - targets
        active = np.abs(resid) > insensitivity
        sign = np.sign(resid) * active
        grad_w = lam * w + (means.T @ sign) / m
        grad_b = float(np.sum(sign)) / m
        w -= eta * grad_w
        b -= eta * grad_b
        if t % 10 == 0 or t == config.inner_iters:
            obj = 0.5 * lam * w @ w + np.mean(np.maximum(np.abs(means @ w + b - targets)
                                                         - insensitivity, 0.0))
            if obj < best[0]:
                best = (obj, w.copy(), b)
    _, w, b = best
    err = _bag_error(w, b, arr)
    return TrainResult(hypothesis=hypothesis_from_array(w, b), final_bag_error=err,
                       objective_trace=(err,), latent_labels=None,
                       wall_time=time.perf_counter() - t0, init_used="inv-cal")


# ---------------------------------------------------------------------------
# alternating proportion SVM

def _hinge_objective(w: np.ndarray, b: float, y: np.ndarray, arr: _Arrays, C: float) -> float:
    margins = y * (arr.Xs @ w + b)
    return 0.5 * float(w @ w) + C * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def _joint_objective(w: np.ndarray, b: float, y: np.ndarray, arr: _Arrays,
                     C: float, C_p: float) -> float:
    pos = np.add.reduceat((y > 0).astype(float), np.r_[0, np.cumsum(arr.sizes)[:-1]])
    prop_pen = float(np.sum(np.abs(pos / arr.sizes - arr.props)))
    return _hinge_objective(w, b, y, arr, C) + C_p * prop_pen


def _solve_weighted_hinge(arr: _Arrays, y: np.ndarray, C: float, w0: np.ndarray,
                          b0: float, iters: int, tol: float) -> Tuple[np.ndarray, float]:
    """Deterministic full-batch subgradient descent on the hinge objective,
    step 1/(lambda t), keeping the best iterate seen (the start included)."""
    n = len(y)
    lam = 1.0 / (C * n)
    w, b = w0.copy(), b0
    best_obj = _hinge_objective(w, b, y, arr, C)
    best = (w.copy(), b)
    prev_check = best_obj
    for t in range(1, iters + 1):
        eta = 1.0 / (lam * (t + 1))
        margins = y * (arr.Xs @ w + b)
        viol = margins < 1.0
        coef = (y * viol) / n
        w = (1.0 - eta * lam) * w + eta * (arr.Xs.T @ coef)
        b = b + eta * float(np.sum(coef))
        if t % 10 == 0 or t == iters:
            obj = _hinge_objective(w, b, y, arr, C)
            if obj < best_obj:
                best_obj = obj
                best = (w.copy(), b)
            if abs(prev_check - obj) <= tol * max(1.0, abs(prev_check)) and t > 50:
                break
            prev_check = obj
    return best[0], best[1]


def _assign_labels(w: np.ndarray, b: float, arr: _Arrays, C: float, C_p: float) -> np.ndarray:
    """Per-bag optimal latent labels for fixed (w, b).

    For each candidate positive count k', the best assignment puts the k'
    largest decision values on +1; k' is searched in {k-1, k, k+1} around
    k = round_half_up(p * r).  Ties prefer k' closest to k, then smaller k'.
    """
    scores = arr.Xs @ w + b
    y = np.empty(len(scores))
    for k_bag, sl in enumerate(arr.bag_slices):
        s = scores[sl]
        r = len(s)
        order = np.argsort(-s, kind="stable")
        s_sorted = s[order]
        hinge_pos = np.maximum(0.0, 1.0 - s_sorted)   # cost when labeled +1
        hinge_neg = np.maximum(0.0, 1.0 + s_sorted)   # cost when labeled -1
        cum_pos = np.r_[0.0, np.cumsum(hinge_pos)]
        cum_neg = np.r_[0.0, np.cumsum(hinge_neg)]
        total_neg = cum_neg[-1]
        p = arr.props[k_bag]
        k = int(np.floor(p * r + 0.5))
        best_k, best_cost = k, np.inf
        for kp in (k, k - 1, k + 1):
            if not 0 <= kp <= r:
                continue
            hinge_cost = cum_pos[kp] + (total_neg - cum_neg[kp])
            cost = C * hinge_cost + C_p * abs(kp / r - p)
            if cost < best_cost - 1e-12 or (
                    abs(cost - best_cost) <= 1e-12 and (abs(kp - k), kp) < (abs(best_k - k), best_k)):
                best_cost, best_k = cost, kp
        labels = np.full(r, -1.0)
        labels[order[:best_k]] = 1.0
        y[sl] = labels
    return y


def _init_hypothesis(data: BagDataset, arr: _Arrays, init: str, config: TrainConfig,
                     random_seed: int) -> Tuple[np.ndarray, float, List[str]]:
    warnings: List[str] = []
    if init == "mean-map":
        try:
            res = train_mean_map(data, config)
            w = np.zeros(arr.dim)
            for idx, val in res.hypothesis.weights.items():
                w[idx - 1] = val
            return w, res.hypothesis.bias, warnings
        except DataError as exc:
            warnings.append(f"mean-map init unavailable ({exc}); falling back to random")
            init = "random"
    if init == "inv-cal":
        res = train_inv_cal(data, config)
        w = np.zeros(arr.dim)
        for idx, val in res.hypothesis.weights.items():
            w[idx - 1] = val
        return w, res.hypothesis.bias, warnings
    rng = make_rng(random_seed)
    return rng.normal(scale=0.1, size=arr.dim), 0.0, warnings


def _alter_psvm_single(data: BagDataset, arr: _Arrays, config: TrainConfig,
                       init: str, random_seed: int):
    w, b, warnings = _init_hypothesis(data, arr, init, config, random_seed)
    y = _assign_labels(w, b, arr, config.C, config.C_p)
    trace = [_joint_objective(w, b, y, arr, config.C, config.C_p)]
    for _ in range(config.max_outer_iters):
        w_new, b_new = _solve_weighted_hinge(arr, y, config.C, w, b,
                                             config.inner_iters, config.inner_tolerance)
        # accept only non-increasing hinge cost; the inner solver keeps its
        # start iterate, so this cannot raise the joint objective
        if _hinge_objective(w_new, b_new, y, arr, config.C) <= _hinge_objective(w, b, y, arr, config.C):
            w, b = w_new, b_new
        y_new = _assign_labels(w, b, arr, config.C, config.C_p)
        trace.append(_joint_objective(w, b, y_new, arr, config.C, config.C_p))
        if np.array_equal(y_new, y):
            y = y_new
            break
        y = y_new
    else:
        warnings.append("outer loop hit max_outer_iters without label stabilization")
    return w, b, y, trace, warnings


def train_alter_psvm(data: BagDataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Alternating minimization of the joint large-margin + l1 proportion
    objective, best of `restarts` initializations by training bag error.

    The first two restarts use the mean-map and inverse-calibration
    initializers; the rest are random with seeds derived from config.seed.
    """
    t0 = time.perf_counter()
    arr = _Arrays(data)
    if not arr.bags:
        raise DataError("dataset has no bags")
    inits = ["mean-map", "inv-cal"] + ["random"] * max(config.restarts - 2, 0)
    inits = inits[: max(config.restarts, 1)]
    best = None
    for j, init in enumerate(inits):
        w, b, y, trace, warnings = _alter_psvm_single(
            data, arr, config, init, random_seed=config.seed * 1000 + j)
        err = _bag_error(w, b, arr)
        key = (err, j)
        if best is None or key < best[0]:
            best = (key, w, b, y, trace, warnings, init)
    _, w, b, y, trace, warnings, init = best
    return TrainResult(hypothesis=hypothesis_from_array(w, b),
                       final_bag_error=_bag_error(w, b, arr),
                       objective_trace=tuple(trace),
                       latent_labels=tuple(int(v) for v in y),
                       wall_time=time.perf_counter() - t0,
                       warnings=tuple(warnings), init_used=init)


# ---------------------------------------------------------------------------
# baseline

@dataclass(frozen=True)
class BaselinePredictor:
    """Per-group constant rule: +1 iff the group's training proportion > 0.5."""

    rule: Dict[object, int]
    fallback: int
    used_fallback: Tuple[object, ...] = ()

    def predict_group(self, group_id: object) -> int:
        return self.rule.get(group_id, self.fallback)


def train_baseline(data: BagDataset) -> BaselinePredictor:
    """Constant per-group predictor from whole-group bags.

    Requires group bags (gen_group_bags output); the fallback for unseen
    groups is the instance-weighted global majority label.
    """
    group_ids = data.metadata.get("group_ids")
    if group_ids is None or len(group_ids) != data.n_bags:
        raise DataError("train_baseline requires whole-group bags with group_ids metadata")
    rule = {}
    total_pos = 0.0
    total = 0
    for gid, bag in zip(group_ids, data.bags):
        rule[gid] = 1 if bag.observed_proportion > 0.5 else -1
        total_pos += bag.observed_proportion * bag.size
        total += bag.size
    fallback = 1 if total_pos / total > 0.5 else -1
    return BaselinePredictor(rule=rule, fallback=fallback)


# ---------------------------------------------------------------------------
# cross validation

def cross_validate(data: BagDataset, c_grid: Sequence[float], cp_grid: Sequence[float],
                   folds: int, seed: int, base: TrainConfig = TrainConfig()) -> TrainConfig:
    """Pick (C, C_p) minimizing mean held-out bag proportion error (absolute
    loss) over a k-fold split of the bags; ties break to smaller C then
    smaller C_p."""
    if data.n_bags < folds:
        raise DataError("fewer bags than folds")
    rng = make_rng(seed)
    order = rng.permutation(data.n_bags)
    fold_of = np.empty(data.n_bags, dtype=int)
    for pos, bag_idx in enumerate(order):
        fold_of[bag_idx] = pos % folds
    scores: Dict[Tuple[float, float], float] = {}
    for C in c_grid:
        for C_p in cp_grid:
            cfg = TrainConfig(solver=base.solver, C=C, C_p=C_p, init=base.init,
                              max_outer_iters=base.max_outer_iters,
                              inner_iters=base.inner_iters,
                              inner_tolerance=base.inner_tolerance,
                              seed=base.seed, restarts=base.restarts)
            errs = []
            for f in range(folds):
                train_bags = [data.bags[i] for i in range(data.n_bags) if fold_of[i] != f]
                test_bags = [data.bags[i] for i in range(data.n_bags) if fold_of[i] == f]
                if not train_bags or not test_bags:
                    continue
                train_ds = BagDataset(instances=data.instances, bags=train_bags,
                                      metadata=data.metadata)
                res = train_alter_psvm(train_ds, cfg)
                test_ds = BagDataset(instances=data.instances, bags=test_bags,
                                     metadata=data.metadata)
                errs.append(empirical_bag_error(res.hypothesis, test_ds, LossKind.ABSOLUTE))
            scores[(C, C_p)] = float(np.mean(errs)) if errs else np.inf
    best_C, best_Cp = min(scores, key=lambda k: (scores[k], k[0], k[1]))
    return TrainConfig(solver=base.solver, C=best_C, C_p=best_Cp, init=base.init,
                       max_outer_iters=base.max_outer_iters, inner_iters=base.inner_iters,
                       inner_tolerance=base.inner_tolerance, seed=base.seed,
                       restarts=base.restarts)
