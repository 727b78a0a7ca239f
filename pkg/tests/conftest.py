import numpy as np
import pytest

from llptk.baggen import make_rng
from llptk.core import Instance

# census one-hot layout: (attribute, first index, last index)
CENSUS_RANGES = [
    ("age", 1, 5), ("workclass", 6, 13), ("fnlwgt", 14, 18),
    ("education", 19, 34), ("education-num", 35, 39),
    ("marital-status", 40, 46), ("occupation", 47, 60),
    ("relationship", 61, 66), ("race", 67, 71), ("sex", 72, 73),
    ("capital-gain", 74, 75), ("capital-loss", 76, 77),
    ("hours-per-week", 78, 82), ("native-country", 83, 123),
]


def gaussian_pool(n_per_class=200, seed=42, sep=1.5):
    """Two separated 2-feature clouds, labels +1 / -1."""
    rng = make_rng(seed)
    pool = []
    for label, center in ((1, (sep, 1.0)), (-1, (-sep, -1.0))):
        pts = rng.normal(loc=center, scale=0.5, size=(n_per_class, 2))
        pool += [Instance(features={1: float(p[0]), 2: float(p[1])}, true_label=label)
                 for p in pts]
    return pool


@pytest.fixture(scope="session")
def separable_pool():
    return gaussian_pool()


def synthetic_census_lines(n=1200, seed=5):
    """Census-shaped sparse lines: one active one-hot index per attribute,
    label from a sparse linear rule so the data is learnable."""
    rng = make_rng(seed)
    lines = []
    for _ in range(n):
        active = []
        for _, lo, hi in CENSUS_RANGES:
            active.append(int(rng.integers(lo, hi + 1)))
        score = sum(((idx * 2654435761) % 97) / 97.0 - 0.5 for idx in active)
        noise = rng.normal(scale=0.4)
        label = 1 if score + noise > 0 else -1
        lines.append(f"{'+1' if label == 1 else '-1'} "
                     + " ".join(f"{idx}:1" for idx in sorted(active)))
    return lines


@pytest.fixture(scope="session")
def census_like_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "census_like.libsvm"
    path.write_text("\n".join(synthetic_census_lines()) + "\n")
    return path
