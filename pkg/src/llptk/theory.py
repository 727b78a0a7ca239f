"""Closed-form bound calculators and Monte-Carlo verifiers.

Covers the bag sample-complexity bound, the purity results (per-bag and
aggregated), the matched-prior closed form relating instance error to the
bag-proportion match probability (with its numerical inverse and the
monotonicity threshold), the mixture Chernoff purity bound, the kappa-model
misclassification bound and its qualitative trend verifier, and the small
population/variable-bag-size conversions.

All calculators are pure; verifiers are deterministic given their seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from .baggen import KappaConfig, make_rng
from .core import DataError, Instance, LinearHypothesis


class ParameterError(DataError):
    """A bound parameter outside its valid domain."""


# ---------------------------------------------------------------------------
# bag sample complexity

def bag_sample_complexity_exact(vc: int, r: float, epsilon: float, delta: float) -> float:
    """The bag sample-complexity expression before rounding up:
    (64/eps^2) * (2*vc*ln(12*r/eps) + ln(4/delta))."""
    if not 0.0 < epsilon < 1.0:
        raise ParameterError("epsilon must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    if vc < 1:
        raise ParameterError("vc must be >= 1")
    if r < 1:
        raise ParameterError("r must be >= 1")
    return (64.0 / epsilon**2) * (2.0 * vc * math.log(12.0 * r / epsilon)
                                  + math.log(4.0 / delta))


def bag_sample_complexity(vc: int, r: float, epsilon: float, delta: float) -> int:
    """Bags sufficient for the proportion generalization gap to be <= epsilon.

    ceil((64/eps^2) * (2*vc*ln(12*r/eps) + ln(4/delta))); r may be the
    average bag size when sizes vary.
    """
    return math.ceil(bag_sample_complexity_exact(vc, r, epsilon, delta))


# ---------------------------------------------------------------------------
# purity bounds

@dataclass(frozen=True)
class PurityQuery:
    epsilon: float
    delta: float
    eta: float
    rho: float
    tau: float
    n_bags: int
    r: float  # fixed or expected bag size

    def __post_init__(self):
        for name in ("epsilon", "delta", "eta", "rho", "tau"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1), got {v}")
        if self.n_bags < 1 or self.r < 1:
            raise ParameterError("n_bags and r must be >= 1")


@dataclass(frozen=True)
class PurityResult:
    fraction: float
    confidence: float
    vacuous: bool


def purity_per_bag(epsilon: float, delta: float, eta: float, rho: float) -> PurityResult:
    """Per-bag guarantee: a (1 - 2*eta - epsilon) correct fraction with
    probability at least 1 - delta - rho."""
    for name, v in (("epsilon", epsilon), ("delta", delta), ("eta", eta), ("rho", rho)):
        if not 0.0 <= v <= 1.0:
            raise ParameterError(f"{name} must lie in [0, 1], got {v}")
    fraction = 1.0 - 2.0 * eta - epsilon
    confidence = 1.0 - delta - rho
    return PurityResult(fraction, confidence, vacuous=(fraction <= 0 or confidence <= 0))


def purity_multi_bag(q: PurityQuery) -> PurityResult:
    """Aggregate guarantee over n bags of (expected) size r.

    fraction  = (1-tau)(1-delta-rho)(1-2*eta-epsilon)
    confidence = 1 - exp(-(tau^2/2) * n*r * (1-delta-rho)(1-2*eta-epsilon))
    """
    base = purity_per_bag(q.epsilon, q.delta, q.eta, q.rho)
    fraction = (1.0 - q.tau) * base.confidence * base.fraction
    exponent = (q.tau**2 / 2.0) * q.n_bags * q.r * base.confidence * base.fraction
    confidence = 1.0 - math.exp(-exponent) if exponent > 0 else 0.0
    return PurityResult(fraction, confidence, vacuous=(fraction <= 0 or confidence <= 0))


def purity_multi_bag_mc(q: PurityQuery, trials: int, seed: int) -> float:
    """Share of simulated dataset draws meeting the aggregate guarantee.

    Simulates the boundary case of the per-bag lemma: each bag independently
    yields exactly (1-2*eta-epsilon)*r correctly classified instances with
    probability (1-delta-rho) and zero otherwise, which is the worst case
    consistent with the lemma's hypotheses.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    bound = purity_multi_bag(q)
    per_bag = purity_per_bag(q.epsilon, q.delta, q.eta, q.rho)
    rng = make_rng(seed)
    good_bags = rng.binomial(q.n_bags, per_bag.confidence, size=trials)
    correct_fraction = good_bags * per_bag.fraction / q.n_bags
    return float(np.mean(correct_fraction >= bound.fraction - 1e-12))


def mixture_purity_bound(r: int, c: float, alphas: Sequence[float]) -> Tuple[float, float]:
    """Chernoff purity of mixture bags.

    Returns (eta, prob_lower) with eta = max_i min(alpha_i, 1-alpha_i) + c
    and prob_lower = 1 - exp(-2*r*c^2).
    """
    if c <= 0:
        raise ParameterError("c must be positive")
    alphas = [float(a) for a in alphas]
    if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ParameterError("each alpha must lie in [0, 1]")
    eta = max(min(a, 1.0 - a) for a in alphas) + c
    prob_lower = 1.0 - math.exp(-2.0 * r * c * c)
    return eta, prob_lower


# ---------------------------------------------------------------------------
# matched-prior closed form and its inversion

@dataclass(frozen=True)
class MatchProbQuery:
    r: int
    beta: float
    epsilon: float

    def __post_init__(self):
        if self.r < 1:
            raise ParameterError("r must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ParameterError("beta must lie in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError("epsilon must lie in [0, 1]")

    @property
    def theta1(self) -> float:
        return (2.0 - self.beta) / 2.0

    @property
    def theta2(self) -> float:
        return self.beta / (2.0 - self.beta)


def _binom_cdf(k, n, p):
    """Binomial CDF with the n = 0 convention F(k;0,.) = [k >= 0]."""
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    out = stats.binom.cdf(np.minimum(k, n), n, p)
    return np.where(k < 0, 0.0, out)


def binom_match_prob_grid(r: int, betas: np.ndarray, epsilon: float) -> np.ndarray:
    """Vectorized P(|predicted - true proportion| <= epsilon) over betas.

    Evaluates theta1^r * sum_i C(r,i) theta2^i (F(i+e; r-i, theta2)
    - F(i-e-1; r-i, theta2)) with e = floor(epsilon * r).  The i-th term
    equals the Binomial(r, beta/2) mass at i times the conditional window
    probability, which is the numerically stable form used here.
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if np.any((betas < 0) | (betas > 1)):
        raise ParameterError("beta must lie in [0, 1]")
    if not 0.0 <= epsilon <= 1.0:
        raise ParameterError("epsilon must lie in [0, 1]")
    e = math.floor(epsilon * r + 1e-12)
    i = np.arange(r + 1)
    half = betas[:, None] / 2.0                       # (B, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta2 = np.where(betas < 2.0, betas / (2.0 - betas), 1.0)[:, None]
    pmf = stats.binom.pmf(i[None, :], r, half)        # mass of |A1| = i
    n_rest = (r - i)[None, :] * np.ones_like(half)
    hi = _binom_cdf(i[None, :] + e, n_rest, theta2)
    lo = _binom_cdf(i[None, :] - e - 1, n_rest, theta2)
    return np.clip(np.sum(pmf * (hi - lo), axis=1), 0.0, 1.0)


def binom_match_prob(q: MatchProbQuery) -> float:
    """Scalar matched-prior closed form; see binom_match_prob_grid."""
    if q.beta == 0.0:
        return 1.0
    return float(binom_match_prob_grid(q.r, np.array([q.beta]), q.epsilon)[0])


_SCAN_POINTS = 10_000


def _monotone_breakpoint(r: int, epsilon: float) -> Tuple[float, np.ndarray, np.ndarray]:
    """Largest beta* such that P(beta) is decreasing on (0, beta*].

    Scans a uniform grid, finds the first genuinely increasing step from
    the beta -> 0 side (plateaus where P is flat to machine precision do
    not count), then refines the local minimum with a bounded scalar
    minimizer.  Returns (beta*, grid, P(grid)); beta* = 1.0 when P never
    turns back up.
    """
    from scipy import optimize

    grid = np.linspace(0.0, 1.0, _SCAN_POINTS + 1)
    values = binom_match_prob_grid(r, grid, epsilon)
    increases = np.flatnonzero(np.diff(values) > 1e-12)
    if len(increases) == 0:
        return 1.0, grid, values
    j = int(increases[0])
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 2, len(grid) - 1)]
    res = optimize.minimize_scalar(
        lambda b: float(binom_match_prob_grid(r, np.array([b]), epsilon)[0]),
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x), grid, values


def u_threshold(r: int, epsilon: float) -> float:
    """Match-probability threshold above which beta is invertible.

    Operationally: P evaluated at the point where monotone decrease from
    beta = 0 first breaks; 0 when P is strictly decreasing on all of (0, 1).
    """
    if r < 1:
        raise ParameterError("r must be >= 1")
    if not 0.0 <= epsilon < 1.0:
        raise ParameterError("epsilon must lie in [0, 1)")
    breakpoint_, _, values = _monotone_breakpoint(r, epsilon)
    if breakpoint_ >= 1.0:
        return float(values[-1])
    return float(binom_match_prob_grid(r, np.array([breakpoint_]), epsilon)[0])


def invert_match_prob(r: int, epsilon: float, target_prob: float) -> float:
    """The unique beta with match probability target_prob, on the monotone
    branch; bisection to 1e-10 in beta."""
    if not 0.0 < target_prob <= 1.0:
        raise ParameterError("target_prob must lie in (0, 1]")
    breakpoint_, _, _ = _monotone_breakpoint(r, epsilon)
    u = u_threshold(r, epsilon)
    if target_prob <= u:
        raise ParameterError(
            f"outside invertible region: target {target_prob} <= u(r, eps) = {u:.6g}")
    lo, hi = 0.0, breakpoint_
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-10:
            break
        val = binom_match_prob_grid(r, np.array([mid]), epsilon)[0]
        if val > target_prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# kappa model

@dataclass(frozen=True)
class KappaBound:
    q: float
    qn: float
    r_hat: float
    uniform: bool
    corollary_qn: float  # epsilon^2 * r_hat * n, the uniform-case scaling


def kappa_misclassification_bound(epsilon: float,
                                  pick_probabilities: Sequence[float]) -> KappaBound:
    """q = eps^2 (sum p_i)^2 / (n * min_i p_i (1-p_i)); the model's h
    misclassifies at most O(q*n) instances."""
    ps = np.asarray([float(p) for p in pick_probabilities])
    if ps.size == 0 or np.any((ps <= 0) | (ps >= 1)):
        raise ParameterError("pick probabilities must lie in (0, 1)")
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    n = ps.size
    r_hat = float(ps.sum())
    q = epsilon**2 * r_hat**2 / (n * float(np.min(ps * (1.0 - ps))))
    uniform = bool(np.allclose(ps, ps[0]))
    return KappaBound(q=q, qn=q * n, r_hat=r_hat, uniform=uniform,
                      corollary_qn=epsilon**2 * r_hat * n)


@dataclass(frozen=True)
class KappaTrendReport:
    violation_rate: float
    n_misclassified: int
    q: float
    qn: float
    epsilon: float
    trials: int


def kappa_trend_verifier(pool: Sequence[Instance], config: KappaConfig,
                         h: LinearHypothesis, epsilon: float, trials: int,
                         seed: int) -> KappaTrendReport:
    """Empirical rate of |sum kappa_i (y_i - h_i)| > eps * sum kappa_i.

    Labels are treated as 0/1 here.  Only the qualitative contrapositive of
    the kappa theorem is checked by callers: many misclassifications force a
    violation rate bounded away from zero.  Empty draws count as
    non-violations (no proportion is defined for them).
    """
    pool = list(pool)
    if len(pool) != len(config.pick_probabilities):
        raise DataError("pool size and pick_probabilities length differ")
    y01 = np.array([(inst.true_label + 1) // 2 for inst in pool], dtype=float)
    h01 = np.array([(h.predict(inst) + 1) // 2 for inst in pool], dtype=float)
    diff = y01 - h01
    ps = np.asarray(config.pick_probabilities)
    rng = make_rng(seed)
    violations = 0
    block = max(1, int(2e7 // max(len(pool), 1)))
    done = 0
    while done < trials:
        t = min(block, trials - done)
        kappa = rng.random((t, len(pool))) < ps
        sums = kappa.sum(axis=1)
        dev = np.abs(kappa @ diff)
        violations += int(np.sum((sums > 0) & (dev > epsilon * sums)))
        done += t
    n_wrong = int(np.sum(diff != 0))
    bound = kappa_misclassification_bound(max(epsilon, 0.0), config.pick_probabilities)
    return KappaTrendReport(violation_rate=violations / trials,
                            n_misclassified=n_wrong, q=bound.q, qn=bound.qn,
                            epsilon=epsilon, trials=trials)


# ---------------------------------------------------------------------------
# population proportions and variable bag size

def population_sample_size(epsilon: float, delta: float) -> int:
    """Samples per bag so the sample proportion concentrates to the released
    population proportion: ceil(ln(2/delta) / (2*eps^2))."""
    if not 0.0 < epsilon < 1.0:
        raise ParameterError("epsilon must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    return math.ceil(math.log(2.0 / delta) / (2.0 * epsilon**2))


def expected_bag_size_bound(avg_training_size: float, m: int, t: float) -> Tuple[float, float]:
    """Chernoff bound on the expected bag size from the training average:
    r_hat > r_bar - t with probability at least 1 - exp(-2*m*t^2)."""
    if t <= 0:
        raise ParameterError("t must be positive")
    if m < 1:
        raise ParameterError("m must be >= 1")
    return avg_training_size - t, 1.0 - math.exp(-2.0 * m * t * t)


def markov_epsilon_conversion(er_d: float, delta: float) -> float:
    """Markov step: generalization error er_D gives
    P(|phi - f| <= er_D/delta) >= 1 - delta."""
    if er_d < 0:
        raise ParameterError("er_d must be >= 0")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    return er_d / delta
