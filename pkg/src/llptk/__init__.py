"""Learning-from-label-proportions toolkit.

Bag generators, proportion-matching solvers, bound calculators with
Monte-Carlo verifiers, a differentially-private proportion release
mechanism, and the census-income experiment harness.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Bag,
    BagDataset,
    DataError,
    Instance,
    LLPError,
    LinearHypothesis,
    LossKind,
    empirical_bag_error,
    instance_error,
    predict_proportion,
    proportion,
    proportion_loss,
)
