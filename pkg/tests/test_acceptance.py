"""Acceptance suite: one test per release criterion, each printing an
explicit PASS/FAIL/SKIP line on the real terminal (bypassing capture).

Criteria needing the census income dataset look for data/census.libsvm at
the repository root (see scripts/fetch_census.sh) and skip when it is
absent.
"""

import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from llptk.baggen import MixtureConfig, gen_adversarial_pure_bags, gen_iid_bags, gen_mixture_bags, make_rng
from llptk.core import Instance, LossKind, empirical_bag_error, instance_error, labels_array, to_dense
from llptk.data import assign_groups, default_group_map, load_sparse_dataset
from llptk.experiments import (
    ExperimentConfig,
    GROUPING_ATTRIBUTES,
    run_bound_sweep,
    run_group_table,
    run_learning_curve,
)
from llptk.privacy import PrivacyBudget, deviation_check, release_private_proportions
from llptk.solvers import TrainConfig, train_alter_psvm, train_baseline
from llptk.theory import (
    MatchProbQuery,
    PurityQuery,
    bag_sample_complexity,
    bag_sample_complexity_exact,
    binom_match_prob,
    binom_match_prob_grid,
    invert_match_prob,
    mixture_purity_bound,
    purity_multi_bag,
    purity_multi_bag_mc,
    u_threshold,
)

CENSUS_PATH = Path(__file__).resolve().parents[1] / "data" / "census.libsvm"
CENSUS_SKIP = ("census income dataset not present at data/census.libsvm "
               "(no network in this environment; see scripts/fetch_census.sh)")


def report(criterion: str, status: str) -> None:
    sys.__stdout__.write(f"ACCEPTANCE {criterion}: {status}\n")
    sys.__stdout__.flush()


class _Criterion:
    """Context manager printing the PASS/FAIL line for one criterion."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            report(self.name, "PASS")
        elif issubclass(exc_type, pytest.skip.Exception):
            report(self.name, f"SKIP ({exc})")
        else:
            report(self.name, "FAIL")
        return False


def test_criterion_01_closed_form_vs_enumeration():
    """Closed-form proportion-match probability equals exhaustive
    enumeration over all 3^r outcome sequences, r <= 12, to 1e-10."""
    with _Criterion("1 closed-form vs exhaustive enumeration"):
        t0 = time.perf_counter()
        betas = np.arange(0.05, 1.0, 0.05)
        for r in range(1, 13):
            counts = {}
            for seq in itertools.product((0, 1, 2), repeat=r):
                key = (seq.count(0), seq.count(1))  # (#false pos, #false neg)
                counts[key] = counts.get(key, 0) + 1
            for eps in (0.0, 0.1, 0.3):
                e = math.floor(eps * r + 1e-12)
                for beta in betas:
                    oracle = sum(c * (beta / 2) ** (i + j) * (1 - beta) ** (r - i - j)
                                 for (i, j), c in counts.items() if abs(i - j) <= e)
                    got = binom_match_prob(MatchProbQuery(r=r, beta=float(beta),
                                                          epsilon=eps))
                    assert abs(got - oracle) <= 1e-10, (r, beta, eps)
        assert time.perf_counter() - t0 < 60.0


def test_criterion_02_bound_sweep_panels(tmp_path):
    """The bound-sweep experiment reproduces the qualitative shape of the
    four match-probability panels in under two minutes."""
    with _Criterion("2 bound sweep panel properties"):
        t0 = time.perf_counter()
        cfg = ExperimentConfig(experiment="bound-sweep", output_dir=str(tmp_path))
        rows = run_bound_sweep(cfg)
        betas = np.linspace(0.0, 1.0, 201)
        by_panel = {}
        for row in rows:
            by_panel.setdefault(row[0], []).append(row)
        # panels a/b: P(0) = 1, values in [0, 1], non-increasing in beta down
        # to the invertibility threshold, and pointwise decreasing in r
        for panel, eps in (("a", 0.0), ("b", 0.1)):
            curves = {}
            for r in (1, 5, 10, 50):
                vals = np.array([row[4] for row in by_panel[panel] if row[1] == r])
                assert vals[0] == pytest.approx(1.0, abs=1e-12)
                assert np.all((vals >= 0.0) & (vals <= 1.0))
                # non-increasing down to its minimum, which sits at or
                # below the invertibility threshold
                lowest = int(np.argmin(vals))
                assert np.all(np.diff(vals[:lowest + 1]) <= 1e-9), (panel, r)
                assert vals[lowest] <= u_threshold(r, eps) + 1e-6, (panel, r)
                curves[r] = vals
            if eps == 0.0:
                # with an exact-match window, larger bags match less often
                mid = slice(20, 120)  # beta in (0.1, 0.6)
                assert np.all(curves[1][mid] >= curves[5][mid])
                assert np.all(curves[5][mid] >= curves[10][mid])
                assert np.all(curves[10][mid] >= curves[50][mid])
        # panel c: at r = 50 the probability grows pointwise with eps
        c_curves = {eps: np.array([row[4] for row in by_panel["c"] if row[2] == eps])
                    for eps in (0.0, 0.05, 0.1, 0.2)}
        for lo, hi in ((0.0, 0.05), (0.05, 0.1), (0.1, 0.2)):
            assert np.all(c_curves[hi] >= c_curves[lo] - 1e-12)
        # panel d: the threshold grows with r at eps = 0.1 and with eps at r = 50
        d = {(row[1], row[2]): row[5] for row in by_panel["d"]}
        seq_r = [d[(r, 0.1)] for r in (10, 20, 50)]
        assert seq_r == sorted(seq_r)
        seq_e = [d[(50, eps)] for eps in (0.0, 0.05, 0.1)]
        assert seq_e == sorted(seq_e)
        # inversion round-trips inside the invertible region
        beta = invert_match_prob(50, 0.1, 0.9)
        assert binom_match_prob(MatchProbQuery(50, beta, 0.1)) == pytest.approx(0.9, abs=1e-8)
        assert time.perf_counter() - t0 < 120.0


def test_criterion_03_adversarial_construction_exact():
    """The adversarial bag construction achieves exactly zero proportion
    error, instance error exactly 2*eta, and (1-eta)-pure bags."""
    with _Criterion("3 adversarial construction machine-exact"):
        for r, eta in ((10, 0.1), (10, 0.2), (20, 0.05), (50, 0.1), (100, 0.25)):
            for m in (1, 5):
                con = gen_adversarial_pure_bags(r=r, eta=eta, m=m)
                h = con.hypothesis()
                assert empirical_bag_error(h, con.dataset, LossKind.ABSOLUTE) == 0.0
                assert empirical_bag_error(h, con.dataset, LossKind.SQUARED_CLAMPED) == 0.0
                err = instance_error(h, con.dataset.instances)
                assert err == 2 * eta, (r, eta, m)
                for bag in con.dataset.bags:
                    labels = [con.dataset.instances[i].true_label for i in bag.members]
                    majority = max(labels.count(1), labels.count(-1))
                    assert majority >= (1 - eta) * r


def test_criterion_04_multi_bag_purity_monte_carlo():
    """Monte Carlo at the boundary of the multi-bag purity guarantee
    respects the stated confidence (eps=0.1, delta=0.05, eta=0.1, rho=0.05,
    tau=0.1, 1000 bags of size 10, 1000 draws)."""
    with _Criterion("4 multi-bag purity bound vs Monte Carlo"):
        q = PurityQuery(epsilon=0.1, delta=0.05, eta=0.1, rho=0.05,
                        tau=0.1, n_bags=1000, r=10)
        bound = purity_multi_bag(q)
        assert bound.fraction == pytest.approx(0.9 * 0.9 * 0.7)
        share = purity_multi_bag_mc(q, trials=1000, seed=2024)
        se = math.sqrt(max(bound.confidence * (1 - bound.confidence), 1e-9) / 1000)
        assert share >= bound.confidence - 3 * se


def test_criterion_05_mixture_purity_chernoff():
    """Bags mixed from a 10%-positive and a 90%-positive component pool
    (r=100, m=5000, slack c=0.2) are (1-eta)-pure at least as often as the
    Chernoff lower bound predicts."""
    with _Criterion("5 mixture purity Chernoff bound"):
        r, m, c = 100, 5000, 0.2
        alphas = (0.1, 0.9)
        pools = []
        for alpha in alphas:
            n_pos = int(round(alpha * 1000))
            pools.append(tuple(
                Instance(features={1: 1.0}, true_label=1 if i < n_pos else -1)
                for i in range(1000)))
        cfg = MixtureConfig(components=((0.5, pools[0]), (0.5, pools[1])),
                            bag_size=r, bag_count=m, seed=77)
        ds = gen_mixture_bags(cfg)
        eta, prob_lower = mixture_purity_bound(r, c, alphas)
        assert eta == pytest.approx(0.3)
        assert prob_lower == pytest.approx(1 - math.exp(-2 * r * c * c))
        pure = 0
        for bag in ds.bags:
            pos = round(bag.observed_proportion * r)
            if max(pos, r - pos) >= (1 - eta) * r:
                pure += 1
        frac = pure / m
        se = math.sqrt(max(prob_lower * (1 - prob_lower), 1e-9) / m)
        assert frac >= prob_lower - 3 * se - 1e-9


def test_criterion_06_sample_complexity_formula():
    """The bag sample-complexity calculator agrees with a 60-digit
    reference on 100 random parameter tuples, reduces to the supervised
    formula at r=1, and is exactly affine in ln r."""
    with _Criterion("6 sample complexity vs high-precision reference"):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 60
        rng = make_rng(2718)
        for _ in range(100):
            vc = int(rng.integers(1, 500))
            r = float(rng.uniform(1.0, 5000.0))
            eps = float(rng.uniform(0.005, 0.99))
            delta = float(rng.uniform(0.005, 0.99))
            exact = (mpmath.mpf(64) / mpmath.mpf(eps) ** 2) * (
                2 * vc * mpmath.log(12 * mpmath.mpf(r) / eps)
                + mpmath.log(4 / mpmath.mpf(delta)))
            assert bag_sample_complexity(vc, r, eps, delta) == int(mpmath.ceil(exact))
        # r = 1 supervised case
        vc, eps, delta = 30, 0.1, 0.05
        supervised = (64 / eps**2) * (2 * vc * math.log(12 / eps) + math.log(4 / delta))
        assert bag_sample_complexity(vc, 1.0, eps, delta) == math.ceil(supervised)
        # affine in ln r: zero second difference on a geometric grid
        for t in (0.5, 1.5, 3.0):
            vals = [bag_sample_complexity_exact(vc, math.exp(t + k), eps, delta)
                    for k in (-0.25, 0.0, 0.25)]
            assert vals[2] - 2 * vals[1] + vals[0] == pytest.approx(0.0, abs=1e-6)


def test_criterion_07_census_group_table(tmp_path):
    """Per-attribute test errors on the census income task fall within the
    reference ranges, and the proportion solver beats the per-group
    majority baseline on the fine groupings."""
    with _Criterion("7 census group table"):
        if not CENSUS_PATH.exists():
            pytest.skip(CENSUS_SKIP)
        expected_solver = {"native-country": 18.75, "education": 19.61,
                           "occupation": 18.19, "relationship": 18.59,
                           "race": 24.02}
        expected_baseline = {"native-country": 24.02, "education": 22.29,
                             "occupation": 24.28, "relationship": 24.19,
                             "race": 24.28}
        for attr in GROUPING_ATTRIBUTES:
            cfg = ExperimentConfig(experiment="group-table",
                                   dataset_path=str(CENSUS_PATH),
                                   grouping_attribute=attr, runs=5, seed=0,
                                   output_dir=str(tmp_path / attr))
            rows = run_group_table(cfg)
            mean = next(r for r in rows if r[5] == "mean")
            solver_pct = 100.0 * mean[7]
            baseline_pct = 100.0 * mean[8]
            assert abs(solver_pct - expected_solver[attr]) <= 3.0, attr
            assert abs(baseline_pct - expected_baseline[attr]) <= 2.0, attr
            if attr != "race":
                assert solver_pct < baseline_pct, attr


def test_criterion_08_census_learning_curve(tmp_path):
    """Learning curves on the census income task improve with the instance
    budget and degrade gracefully with the bag size."""
    with _Criterion("8 census learning curve"):
        if not CENSUS_PATH.exists():
            pytest.skip(CENSUS_SKIP)
        cfg = ExperimentConfig(experiment="learning-curve",
                               dataset_path=str(CENSUS_PATH),
                               generator="iid", bag_sizes=(10, 50),
                               instance_budgets=(500, 5000, 50_000),
                               runs=3, seed=0, output_dir=str(tmp_path))
        rows = run_learning_curve(cfg)
        means = {(r[3] * r[4], r[4]): r[7] for r in rows if r[5] == "mean"}
        for r in (10, 50):
            errs = [means[(b, r)] for b in (500, 5000, 50_000)
                    if (b, r) in means]
            assert errs[-1] < errs[0], r
        for budget in (5000, 50_000):
            assert means[(budget, 10)] <= means[(budget, 50)] + 0.02, budget


def test_criterion_09_privacy_deviation():
    """With n=100000 instances per release unit and a total budget of 1
    split over 10 queries, released proportions deviate by more than 0.01
    in under 5% of 10000 simulated releases."""
    name = "9 private release deviation"
    try:
        budget = PrivacyBudget(eta_total=1.0, k=10)
        rate = deviation_check(100_000, 0.6, budget, theta=0.01,
                               trials=10_000, seed=99)
        assert rate < 0.05
    except Exception:
        report(name, "FAIL")
        raise
    if not CENSUS_PATH.exists():
        report(name, "PASS (deviation bound; census end-to-end half SKIPPED: "
                     "dataset absent)")
        pytest.skip(CENSUS_SKIP)
    with _Criterion(name):
        # end-to-end: training on a private release of the occupation bags
        # costs fewer than 5 points of test error
        instances = load_sparse_dataset(CENSUS_PATH)
        cfg = ExperimentConfig(experiment="privacy-sweep",
                               dataset_path=str(CENSUS_PATH),
                               grouping_attribute="occupation",
                               eta_grid=(1.0,), runs=3, seed=0,
                               output_dir="/tmp/llptk-acceptance-privacy")
        from llptk.experiments import run_privacy_sweep
        rows = run_privacy_sweep(cfg)
        assert all(row[7] < 0.05 for row in rows)
        del instances


def test_criterion_10_deterministic_outputs(census_like_file, tmp_path):
    """Re-running an experiment with the same config yields byte-identical
    delimited output apart from the trailing wall-time column."""
    with _Criterion("10 deterministic experiment outputs"):
        def strip_time(csv_path):
            lines = Path(csv_path).read_text().splitlines()
            return ["," .join(ln.split(",")[:-1]) for ln in lines]

        solver = TrainConfig(restarts=2, inner_iters=80, max_outer_iters=8)
        outs = []
        for tag in ("first", "second"):
            out = tmp_path / tag
            cfg = ExperimentConfig(experiment="group-table",
                                   dataset_path=str(census_like_file),
                                   grouping_attribute="education", runs=2,
                                   seed=5, output_dir=str(out),
                                   c_grid=(1.0,), cp_grid=(0.1,),
                                   solver=solver, render_figures=False)
            run_group_table(cfg)
            outs.append(strip_time(out / "group_table.csv"))
        assert outs[0] == outs[1]
        # and the bound sweep, which has no timing column at all
        sweeps = []
        for tag in ("s1", "s2"):
            out = tmp_path / tag
            run_bound_sweep(ExperimentConfig(experiment="bound-sweep",
                                             output_dir=str(out),
                                             render_figures=False))
            sweeps.append([(out / f"match_prob_panel_{p}.csv").read_bytes()
                           for p in "abcd"])
        assert sweeps[0] == sweeps[1]
