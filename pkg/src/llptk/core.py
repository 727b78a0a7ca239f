"""Domain types and loss/error functionals shared by the whole toolkit.

Everything here is immutable and pure: instances, bags, datasets, linear
hypotheses, the proportion operator and the 1-Lipschitz proportion losses.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

PROPORTION_ATOL = 1e-9


class LLPError(Exception):
    """Base class for toolkit errors."""


class DataError(LLPError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Instance:
    """A sparse feature vector with an optional hidden ground-truth label.

    Feature indices are 1-based and strictly positive; the label, when
    present, is used only for evaluation and for computing bag proportions.
    """

    features: Mapping[int, float]
    true_label: Optional[int] = None

    def __post_init__(self):
        for idx in self.features:
            if not isinstance(idx, int) or idx <= 0:
                raise DataError(f"feature index must be a positive integer, got {idx!r}")
        if self.true_label is not None and self.true_label not in (-1, 1):
            raise DataError(f"true_label must be -1 or +1, got {self.true_label!r}")
        object.__setattr__(self, "features", dict(self.features))


@dataclass(frozen=True)
class Bag:
    """An ordered set of instance references plus an observed label proportion."""

    members: tuple
    observed_proportion: float

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        if len(members) < 1:
            raise DataError("empty bag")
        if not 0.0 <= self.observed_proportion <= 1.0:
            raise DataError(f"proportion out of range: {self.observed_proportion}")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class BagDataset:
    """A list of instances together with bags referencing them by index.

    Bags may overlap in members; the kappa model and sampling with
    replacement both allow it.
    """

    instances: tuple
    bags: tuple
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "bags", tuple(self.bags))
        object.__setattr__(self, "metadata", dict(self.metadata))
        n = len(self.instances)
        for bag in self.bags:
            for i in bag.members:
                if not 0 <= i < n:
                    raise DataError(f"dangling bag member: {i}")

    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_bags(self) -> int:
        return len(self.bags)


@dataclass(frozen=True)
class LinearHypothesis:
    """h(x) = sign(w.x + b) with the tie sign(0) broken to +1."""

    weights: Mapping[int, float]
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", dict(self.weights))

    def decision_value(self, instance: Instance) -> float:
        acc = self.bias
        w = self.weights
        for idx, val in instance.features.items():
            acc += w.get(idx, 0.0) * val
        return acc

    def predict(self, instance: Instance) -> int:
        return 1 if self.decision_value(instance) >= 0.0 else -1


class LossKind(enum.Enum):
    """Proportion losses; both variants are 1-Lipschitz on [-1, 1]."""

    ABSOLUTE = "absolute"
    SQUARED_CLAMPED = "squared-clamped"


def proportion(labels: Sequence[int]) -> float:
    """Fraction of +1 labels: (1/r) * sum (y_i + 1) / 2."""
    labels = list(labels)
    if not labels:
        raise DataError("empty bag")
    for y in labels:
        if y not in (-1, 1):
            raise DataError(f"label must be -1 or +1, got {y!r}")
    return sum((y + 1) // 2 for y in labels) / len(labels)


def predict_proportion(h: LinearHypothesis, bag: Bag, data: BagDataset) -> float:
    """Predicted bag proportion: the proportion operator applied to h's labels."""
    n = data.n_instances
    preds = []
    for i in bag.members:
        if not 0 <= i < n:
            raise DataError(f"dangling bag member: {i}")
        preds.append(h.predict(data.instances[i]))
    return proportion(preds)


def proportion_loss(predicted: float, observed: float, kind: LossKind = LossKind.ABSOLUTE) -> float:
    """Loss between a predicted and an observed bag proportion.

    absolute        |predicted - observed|
    squared-clamped (predicted - observed)^2 / 2
    """
    for v in (predicted, observed):
        if not 0.0 <= v <= 1.0:
            raise DataError(f"proportion out of range: {v}")
    diff = predicted - observed
    if kind is LossKind.ABSOLUTE:
        return abs(diff)
    if kind is LossKind.SQUARED_CLAMPED:
        return diff * diff / 2.0
    raise DataError(f"unknown loss kind: {kind!r}")


def empirical_bag_error(h: LinearHypothesis, data: BagDataset,
                        kind: LossKind = LossKind.ABSOLUTE) -> float:
    """Mean proportion loss of h over all bags of the dataset."""
    if data.n_bags == 0:
        raise DataError("dataset has no bags")
    total = 0.0
    for bag in data.bags:
        total += proportion_loss(predict_proportion(h, bag, data), bag.observed_proportion, kind)
    return total / data.n_bags


def instance_error(h: LinearHypothesis, instances: Sequence[Instance]) -> float:
    """Fraction of instances whose predicted label disagrees with the true one."""
    instances = list(instances)
    if not instances:
        raise DataError("no instances")
    wrong = 0
    for inst in instances:
        if inst.true_label is None:
            raise DataError("unlabeled instance")
        if h.predict(inst) != inst.true_label:
            wrong += 1
    return wrong / len(instances)


# ---------------------------------------------------------------------------
# dense helpers used by the solvers; 123 binary census features make dense
# matrices the cheap representation

def feature_dim(instances: Sequence[Instance]) -> int:
    dim = 0
    for inst in instances:
        if inst.features:
            dim = max(dim, max(inst.features))
    return dim


def to_dense(instances: Sequence[Instance], dim: Optional[int] = None) -> np.ndarray:
    """Instances as a dense (n, dim) float array; column j is feature j+1."""
    if dim is None:
        dim = feature_dim(instances)
    X = np.zeros((len(instances), dim))
    for row, inst in enumerate(instances):
        for idx, val in inst.features.items():
            if idx <= dim:
                X[row, idx - 1] = val
    return X


def labels_array(instances: Sequence[Instance]) -> np.ndarray:
    y = np.empty(len(instances), dtype=np.int64)
    for row, inst in enumerate(instances):
        if inst.true_label is None:
            raise DataError("unlabeled instance")
        y[row] = inst.true_label
    return y


def hypothesis_from_array(w: np.ndarray, bias: float) -> LinearHypothesis:
    weights = {j + 1: float(w[j]) for j in range(len(w)) if w[j] != 0.0}
    return LinearHypothesis(weights=weights, bias=float(bias))


def hypothesis_to_array(h: LinearHypothesis, dim: int) -> np.ndarray:
    w = np.zeros(dim)
    for idx, val in h.weights.items():
        if idx <= dim:
            w[idx - 1] = val
    return w
