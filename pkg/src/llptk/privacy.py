"""Laplace-perturbed release of label proportions.

Per-bag positive/negative counts have sensitivity 1, so adding Laplace
noise of scale k/eta to each count gives eta-differential-privacy across k
disjoint bags by simple composition.  Note the convention: the Laplace
density here is parameterized by *scale* (mean absolute deviation), the
reciprocal of the rate lambda in the pdf (lambda/2) exp(-|x| lambda).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .baggen import make_rng
from .core import Bag, BagDataset, DataError, Instance


@dataclass(frozen=True)
class PrivacyBudget:
    """Total privacy parameter eta split evenly across k disjoint count
    queries (two counts per bag share one per-bag query budget)."""

    eta_total: float
    k: int

    def __post_init__(self):
        if self.eta_total <= 0:
            raise DataError("eta_total must be positive")
        if self.k < 1:
            raise DataError("k must be >= 1")

    @property
    def per_query_epsilon(self) -> float:
        return self.eta_total / self.k

    @property
    def noise_scale(self) -> float:
        # sensitivity 1 divided by the per-query epsilon
        return self.k / self.eta_total


@dataclass(frozen=True)
class PerturbedCounts:
    n_plus_true: int
    n_minus_true: int
    n_plus_released: float
    n_minus_released: float
    released_proportion: float
    unclamped_proportion: float
    degenerate: bool
    seed: int


def laplace_sample(scale: float, rng_or_seed) -> float:
    """One Laplace(0, scale) draw via the inverse CDF of a uniform draw.

    The uniform value 0.5 maps exactly to 0.
    """
    if scale <= 0:
        raise DataError("scale must be positive")
    rng = rng_or_seed if isinstance(rng_or_seed, np.random.Generator) else make_rng(rng_or_seed)
    u = rng.random() - 0.5
    if u == 0.0:
        return 0.0
    return -scale * float(np.sign(u)) * float(np.log1p(-2.0 * abs(u)))


def perturb_counts(n_plus: int, n_minus: int, budget: PrivacyBudget, seed: int) -> PerturbedCounts:
    """Release both label counts of one bag with independent Laplace noise.

    A non-positive perturbed total is released as proportion 0.5 and
    flagged; the unclamped ratio is kept for deviation analysis.
    """
    if n_plus < 0 or n_minus < 0:
        raise DataError("counts must be nonnegative")
    rng = make_rng(seed)
    scale = budget.noise_scale
    released_plus = n_plus + laplace_sample(scale, rng)
    released_minus = n_minus + laplace_sample(scale, rng)
    total = released_plus + released_minus
    if total <= 0:
        return PerturbedCounts(n_plus, n_minus, released_plus, released_minus,
                               released_proportion=0.5, unclamped_proportion=np.nan,
                               degenerate=True, seed=seed)
    unclamped = released_plus / total
    return PerturbedCounts(n_plus, n_minus, released_plus, released_minus,
                           released_proportion=float(np.clip(unclamped, 0.0, 1.0)),
                           unclamped_proportion=float(unclamped),
                           degenerate=False, seed=seed)


def release_private_proportions(data: BagDataset, budget: PrivacyBudget, seed: int) -> BagDataset:
    """Copy of the dataset with released proportions and true labels stripped.

    Bags must be pairwise disjoint (the composition argument assumes it);
    the per-bag noise draws are independent, with sub-seeds derived from
    `seed` by bag index.
    """
    seen = set()
    for bag in data.bags:
        for i in bag.members:
            if i in seen:
                raise DataError("disjointness required for stated budget")
            seen.add(i)
    if budget.k != data.n_bags:
        budget = PrivacyBudget(eta_total=budget.eta_total, k=data.n_bags)
    new_bags = []
    released = []
    for j, bag in enumerate(data.bags):
        n_plus = int(round(bag.observed_proportion * bag.size))
        n_minus = bag.size - n_plus
        pc = perturb_counts(n_plus, n_minus, budget, seed=seed * 100_003 + j)
        released.append(pc)
        new_bags.append(Bag(members=bag.members, observed_proportion=pc.released_proportion))
    stripped = [Instance(features=inst.features, true_label=None) for inst in data.instances]
    meta = dict(data.metadata)
    meta.update({"privacy_eta_total": budget.eta_total, "privacy_k": budget.k,
                 "privacy_seed": seed,
                 "degenerate_bags": [j for j, pc in enumerate(released) if pc.degenerate]})
    return BagDataset(instances=stripped, bags=new_bags, metadata=meta)


def deviation_check(n: int, proportion: float, budget: PrivacyBudget, theta: float,
                    trials: int, seed: int) -> float:
    """Empirical P(X > theta) where X is the released-vs-true proportion gap.

    Simulates X = |(n_plus + g1)/(n + g1 + g2) - n_plus/n| on the unclamped
    ratio; degenerate draws (perturbed total <= 0) count as exceedances.
    """
    if n < 1:
        raise DataError("n must be >= 1")
    if trials < 1000:
        raise DataError("trials must be >= 1000")
    if not 0.0 <= proportion <= 1.0:
        raise DataError("proportion out of range")
    n_plus = round(proportion * n)
    rng = make_rng(seed)
    scale = budget.noise_scale
    u = rng.random((trials, 2)) - 0.5
    g = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    totals = n + g[:, 0] + g[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (n_plus + g[:, 0]) / totals
    x = np.abs(ratio - n_plus / n)
    exceed = (totals <= 0) | (x > theta)
    return float(np.mean(exceed))
