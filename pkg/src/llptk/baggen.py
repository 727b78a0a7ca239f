"""Bag dataset generators.

Each generator is a deterministic function of its inputs and seed.  The
random source is a counter-based Philox generator (numpy's Philox4x64-10),
recorded in the dataset metadata so that a dataset can be reproduced from
(seed, algorithm name) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    Bag,
    BagDataset,
    DataError,
    Instance,
    LinearHypothesis,
    proportion,
)

RNG_ALGORITHM = "philox4x64-10"


def make_rng(seed: int) -> np.random.Generator:
    """The toolkit-wide counter-based generator for a given seed."""
    return np.random.Generator(np.random.Philox(seed))


def _require_labels(pool: Sequence[Instance]):
    for inst in pool:
        if inst.true_label is None:
            raise DataError("unlabeled instance in pool")


def _bag_from_members(members: Sequence[int], pool: Sequence[Instance]) -> Bag:
    labels = [pool[i].true_label for i in members]
    return Bag(members=tuple(members), observed_proportion=proportion(labels))


def gen_iid_bags(pool: Sequence[Instance], m: int, r: int, seed: int,
                 replace: bool = True) -> BagDataset:
    """m bags of r instances each, sampled uniformly from the pool.

    Sampling is with replacement by default, matching the census protocol
    where each instance is drawn by randomly sampling the training set.
    """
    pool = list(pool)
    if not pool:
        raise DataError("empty pool")
    if m < 1 or r < 1:
        raise DataError("m and r must be >= 1")
    _require_labels(pool)
    if not replace and r > len(pool):
        raise DataError("bag size exceeds pool for without-replacement sampling")
    rng = make_rng(seed)
    bags = []
    for _ in range(m):
        members = rng.choice(len(pool), size=r, replace=replace)
        bags.append(_bag_from_members(members.tolist(), pool))
    meta = {"generator": "iid", "rng": RNG_ALGORITHM, "seed": seed,
            "m": m, "r": r, "replace": replace}
    return BagDataset(instances=pool, bags=bags, metadata=meta)


@dataclass(frozen=True)
class MixtureConfig:
    """Mixture bag generation: pick a component, then draw r iid members."""

    components: Tuple[Tuple[float, Tuple[Instance, ...]], ...]
    bag_size: int
    bag_count: int
    seed: int

    def __post_init__(self):
        comps = tuple((float(z), tuple(pool)) for z, pool in self.components)
        object.__setattr__(self, "components", comps)
        priors = [z for z, _ in comps]
        if any(z < 0 for z in priors):
            raise DataError("negative component prior")
        if abs(sum(priors) - 1.0) > 1e-9:
            raise DataError(f"component priors must sum to 1, got {sum(priors)}")
        if any(not pool for _, pool in comps):
            raise DataError("empty component pool")
        if self.bag_size < 1 or self.bag_count < 1:
            raise DataError("bag_size and bag_count must be >= 1")


def gen_mixture_bags(config: MixtureConfig) -> BagDataset:
    """Hierarchical generation from a mixture of components.

    The instance list of the output is the concatenation of the component
    pools; per-bag component indices are recorded in the metadata.
    """
    for _, pool in config.components:
        _require_labels(pool)
    rng = make_rng(config.seed)
    pools = [pool for _, pool in config.components]
    priors = np.array([z for z, _ in config.components])
    offsets = np.cumsum([0] + [len(p) for p in pools[:-1]])
    instances: List[Instance] = [inst for p in pools for inst in p]
    bags = []
    which = []
    for _ in range(config.bag_count):
        comp = int(rng.choice(len(pools), p=priors))
        which.append(comp)
        local = rng.choice(len(pools[comp]), size=config.bag_size, replace=True)
        members = (local + offsets[comp]).tolist()
        bags.append(_bag_from_members(members, instances))
    meta = {"generator": "mixture", "rng": RNG_ALGORITHM, "seed": config.seed,
            "m": config.bag_count, "r": config.bag_size,
            "component_of_bag": which}
    return BagDataset(instances=instances, bags=bags, metadata=meta)


@dataclass(frozen=True)
class KappaConfig:
    """Independent-Bernoulli bag generation over a finite instance universe.

    coverage_constant records the assumed min_i p_i >= R/n; it is
    documentation only and does not affect generation.
    """

    pick_probabilities: Tuple[float, ...]
    bag_count: int
    seed: int
    coverage_constant: float = 1.0

    def __post_init__(self):
        ps = tuple(float(p) for p in self.pick_probabilities)
        object.__setattr__(self, "pick_probabilities", ps)
        if any(not 0.0 < p < 1.0 for p in ps):
            raise DataError("pick probabilities must lie in (0, 1)")
        if self.bag_count < 1:
            raise DataError("bag_count must be >= 1")
        if self.coverage_constant <= 0:
            raise DataError("coverage_constant must be positive")


def gen_kappa_bags(pool: Sequence[Instance], config: KappaConfig) -> BagDataset:
    """Bags from independent per-instance Bernoulli inclusion draws.

    Bag sizes are variable.  Empty draws are rejected and redrawn; the
    rejection count lands in the metadata so heavy distortion (tiny sum of
    p_i) is visible to the caller.
    """
    pool = list(pool)
    if len(pool) != len(config.pick_probabilities):
        raise DataError("pool size and pick_probabilities length differ")
    _require_labels(pool)
    rng = make_rng(config.seed)
    ps = np.array(config.pick_probabilities)
    bags = []
    rejected = 0
    while len(bags) < config.bag_count:
        mask = rng.random(len(pool)) < ps
        if not mask.any():
            rejected += 1
            continue
        members = np.flatnonzero(mask).tolist()
        bags.append(_bag_from_members(members, pool))
    meta = {"generator": "kappa", "rng": RNG_ALGORITHM, "seed": config.seed,
            "m": config.bag_count, "rejected_empty_draws": rejected,
            "expected_bag_size": float(ps.sum())}
    return BagDataset(instances=pool, bags=bags, metadata=meta)


def gen_group_bags(instances: Sequence[Instance],
                   group_of: Dict[int, object]) -> BagDataset:
    """One bag per distinct group id, containing exactly its members."""
    instances = list(instances)
    if not group_of:
        raise DataError("empty group map")
    _require_labels(instances)
    groups: Dict[object, List[int]] = {}
    for i, inst in enumerate(instances):
        if i not in group_of:
            raise DataError(f"instance {i} has no group assignment")
        groups.setdefault(group_of[i], []).append(i)
    group_ids = sorted(groups, key=repr)
    bags = [_bag_from_members(groups[g], instances) for g in group_ids]
    meta = {"generator": "group", "group_ids": group_ids}
    return BagDataset(instances=instances, bags=bags, metadata=meta)


def gen_population_bags(pools: Sequence[Sequence[Instance]],
                        population_proportions: Sequence[float],
                        m: int, r: int, seed: int) -> BagDataset:
    """Bags sampled iid from location pools, labeled with released proportions.

    observed_proportion is the released population proportion of the bag's
    location, not the realized sample proportion; both are recorded in the
    metadata so the concentration claim is directly testable.
    """
    pools = [list(p) for p in pools]
    pstars = [float(p) for p in population_proportions]
    if len(pools) != len(pstars):
        raise DataError("pool list and proportion list lengths differ")
    if any(not pool for pool in pools):
        raise DataError("empty location pool")
    if any(not 0.0 <= p <= 1.0 for p in pstars):
        raise DataError("population proportion out of range")
    for pool in pools:
        _require_labels(pool)
    if m < 1 or r < 1:
        raise DataError("m and r must be >= 1")
    rng = make_rng(seed)
    offsets = np.cumsum([0] + [len(p) for p in pools[:-1]])
    instances = [inst for pool in pools for inst in pool]
    bags = []
    locations = []
    sample_props = []
    for _ in range(m):
        loc = int(rng.integers(len(pools)))
        local = rng.choice(len(pools[loc]), size=r, replace=True)
        members = (local + offsets[loc]).tolist()
        realized = proportion([instances[i].true_label for i in members])
        bags.append(Bag(members=tuple(members), observed_proportion=pstars[loc]))
        locations.append(loc)
        sample_props.append(realized)
    meta = {"generator": "population", "rng": RNG_ALGORITHM, "seed": seed,
            "m": m, "r": r, "location_of_bag": locations,
            "sample_proportions": sample_props,
            "population_proportions": pstars}
    return BagDataset(instances=instances, bags=bags, metadata=meta)


@dataclass(frozen=True)
class AdversarialConstruction:
    """The tightness construction: a dataset plus a fixed prediction table.

    Every bag is (1-eta)-pure, the predictions match every bag proportion
    exactly, yet a 2*eta fraction of each bag is misclassified.
    """

    dataset: BagDataset
    predictions: Tuple[int, ...]  # per-instance fixed predictions

    def hypothesis(self) -> LinearHypothesis:
        """A linear h realizing the table on a one-hot embedding.

        Instance i carries the single feature (i+1); weight sign equals the
        tabled prediction.
        """
        return LinearHypothesis(
            weights={i + 1: float(p) for i, p in enumerate(self.predictions)},
            bias=-0.5,  # keeps sign(0) tie-breaking out of the picture
        )


def gen_adversarial_pure_bags(r: int, eta: float, m: int) -> AdversarialConstruction:
    """Bags on which proportion error is zero but 2*eta of members are wrong.

    Per bag: the first eta*r instances are labeled +1 and predicted -1, the
    next eta*r are labeled -1 and predicted +1, the remaining (1-2*eta)*r
    are labeled +1 and predicted +1.  eta*r must be integral.
    """
    if r < 1 or m < 1:
        raise DataError("r and m must be >= 1")
    if eta < 0 or 2 * eta >= 1:
        raise DataError("require 0 <= 2*eta < 1")
    k = eta * r
    if abs(k - round(k)) > 1e-9:
        raise DataError("infeasible purity: eta*r is not an integer")
    k = int(round(k))
    instances: List[Instance] = []
    predictions: List[int] = []
    bags = []
    for _ in range(m):
        start = len(instances)
        labels = [1] * k + [-1] * k + [1] * (r - 2 * k)
        preds = [-1] * k + [1] * k + [1] * (r - 2 * k)
        for j, y in enumerate(labels):
            instances.append(Instance(features={start + j + 1: 1.0}, true_label=y))
        predictions.extend(preds)
        bags.append(_bag_from_members(list(range(start, start + r)), instances))
    meta = {"generator": "adversarial-pure", "r": r, "eta": eta, "m": m}
    dataset = BagDataset(instances=instances, bags=bags, metadata=meta)
    return AdversarialConstruction(dataset=dataset, predictions=tuple(predictions))
