"""Experiment orchestration: learning curves, the census group table, bound
sweeps, privacy sweeps, and result persistence.

Every experiment is a deterministic function of (config, seed): rerunning
with the same config produces byte-identical CSVs apart from the trailing
wall_time column.  Each run writes a JSON manifest recording the config
hash, seed, and library versions, and (unless disabled) renders summary
figures next to the delimited output.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .baggen import MixtureConfig, gen_group_bags, gen_iid_bags, gen_mixture_bags, make_rng
from .core import (
    BagDataset,
    DataError,
    Instance,
    LinearHypothesis,
    hypothesis_to_array,
    labels_array,
    to_dense,
)
from .data import assign_groups, default_group_map, load_sparse_dataset
from .privacy import PrivacyBudget, deviation_check, release_private_proportions
from .solvers import TrainConfig, cross_validate, train_alter_psvm, train_baseline
from .theory import binom_match_prob_grid, u_threshold

EXPERIMENTS = ("learning-curve", "group-table", "bound-sweep", "privacy-sweep")

GROUPING_ATTRIBUTES = ("native-country", "education", "occupation", "relationship", "race")

RESULT_COLUMNS = ("experiment", "generator", "grouping", "bag_count", "bag_size",
                  "run", "train_bag_error", "test_instance_error", "baseline_error",
                  "wall_time")


@dataclass
class ExperimentConfig:
    experiment: str = "group-table"
    dataset_path: str = ""
    grouping_attribute: Optional[str] = None
    bag_sizes: Tuple[int, ...] = (50,)
    instance_budgets: Tuple[int, ...] = ()
    split_fraction: float = 0.8
    runs: int = 5
    seed: int = 0
    output_dir: str = "results"
    generator: str = "iid"
    c_grid: Tuple[float, ...] = (0.1, 1.0, 10.0)
    cp_grid: Tuple[float, ...] = (0.01, 0.1, 1.0)
    folds: int = 5
    eta_grid: Tuple[float, ...] = (0.1, 1.0, 10.0)
    theta: float = 0.01
    render_figures: bool = True
    solver: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DataError(f"unknown experiment {self.experiment!r}")
        if self.runs < 1:
            raise DataError("runs must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise DataError("split_fraction must lie in (0, 1)")
        if not self.instance_budgets:
            # 7 log-spaced budgets from 500 to 50,000
            budgets = np.unique(np.round(np.logspace(np.log10(500), np.log10(50_000), 7))
                                .astype(int))
            self.instance_budgets = tuple(int(b) for b in budgets)


def load_experiment_config(path) -> ExperimentConfig:
    """Plain-text key = value config with [experiment] and [solver] sections."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DataError(f"cannot read config {path}")
    exp = dict(parser["experiment"]) if "experiment" in parser else {}
    kwargs: Dict[str, object] = {}
    simple = {"experiment": str, "dataset_path": str, "grouping_attribute": str,
              "split_fraction": float, "runs": int, "seed": int,
              "output_dir": str, "generator": str, "folds": int,
              "theta": float}
    for key, cast in simple.items():
        if key in exp:
            kwargs[key] = cast(exp[key])
    lists = {"bag_sizes": int, "instance_budgets": int, "c_grid": float,
             "cp_grid": float, "eta_grid": float}
    for key, cast in lists.items():
        if key in exp:
            kwargs[key] = tuple(cast(tok) for tok in exp[key].replace(",", " ").split())
    if "render_figures" in exp:
        kwargs["render_figures"] = exp["render_figures"].lower() in ("1", "true", "yes")
    solver_kwargs: Dict[str, object] = {}
    if "solver" in parser:
        sv = dict(parser["solver"])
        casts = {"solver": str, "c": float, "c_p": float, "init": str,
                 "max_outer_iters": int, "inner_iters": int,
                 "inner_tolerance": float, "seed": int, "restarts": int}
        rename = {"c": "C", "c_p": "C_p"}
        for key, cast in casts.items():
            if key in sv:
                solver_kwargs[rename.get(key, key)] = cast(sv[key])
    kwargs["solver"] = TrainConfig(**solver_kwargs)
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# shared machinery

def split_train_test(n: int, split_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = make_rng(seed)
    order = rng.permutation(n)
    cut = int(round(split_fraction * n))
    return np.sort(order[:cut]), np.sort(order[cut:])


def instance_error_dense(h: LinearHypothesis, X: np.ndarray, y: np.ndarray) -> float:
    w = hypothesis_to_array(h, X.shape[1])
    pred = np.where(X @ w + h.bias >= 0, 1, -1)
    return float(np.mean(pred != y))


def _tune(data: BagDataset, cfg: ExperimentConfig, run_seed: int) -> TrainConfig:
    base = TrainConfig(solver=cfg.solver.solver, C=cfg.solver.C, C_p=cfg.solver.C_p,
                       init=cfg.solver.init, max_outer_iters=cfg.solver.max_outer_iters,
                       inner_iters=cfg.solver.inner_iters,
                       inner_tolerance=cfg.solver.inner_tolerance,
                       seed=run_seed, restarts=cfg.solver.restarts)
    if len(cfg.c_grid) == 1 and len(cfg.cp_grid) == 1:
        return TrainConfig(**{**asdict(base), "C": cfg.c_grid[0], "C_p": cfg.cp_grid[0]})
    folds = min(cfg.folds, data.n_bags)
    return cross_validate(data, cfg.c_grid, cfg.cp_grid, folds, seed=run_seed, base=base)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return "" if v is None else str(v)


def write_csv(path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(out_dir, cfg: ExperimentConfig, outputs: Sequence[str]) -> None:
    out_dir = Path(out_dir)
    payload = asdict(cfg)
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()
    manifest = {
        "experiment": cfg.experiment,
        "config": payload,
        "config_hash": digest,
        "seed": cfg.seed,
        "versions": {
            "python": sys.version.split()[0],
            "llptk": __version__,
            "numpy": np.__version__,
        },
        "outputs": list(outputs),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _summarize(rows: List[list], group_cols: Sequence[int], value_cols: Sequence[int]) -> List[list]:
    """Mean/std summary rows computed from per-run rows; the run column is
    set to 'mean'/'std'."""
    groups: Dict[tuple, List[list]] = {}
    for row in rows:
        key = tuple(row[c] for c in group_cols)
        groups.setdefault(key, []).append(row)
    summary = []
    for key, members in groups.items():
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            row = list(members[0])
            row[5] = stat
            for c in value_cols:
                vals = [m[c] for m in members if m[c] is not None]
                row[c] = float(fn(vals)) if vals else None
            row[-1] = None  # timing column excluded from summaries
            summary.append(row)
    return summary


# ---------------------------------------------------------------------------
# census group table: per-attribute whole-group bags vs a majority baseline

def run_group_table(cfg: ExperimentConfig) -> List[list]:
    if cfg.grouping_attribute is None:
        raise DataError("group-table requires grouping_attribute")
    instances = load_sparse_dataset(cfg.dataset_path)
    group_map = default_group_map()
    assignment = assign_groups(instances, cfg.grouping_attribute, group_map)
    train_idx, test_idx = split_train_test(len(instances), cfg.split_fraction, cfg.seed)
    train_insts = [instances[i] for i in train_idx]
    train_groups = {j: assignment[i] for j, i in enumerate(train_idx)}
    bags = gen_group_bags(train_insts, train_groups)
    X_test = to_dense([instances[i] for i in test_idx])
    y_test = labels_array([instances[i] for i in test_idx])
    test_gids = [assignment[i] for i in test_idx]

    baseline = train_baseline(bags)
    base_pred = np.array([baseline.predict_group(g) for g in test_gids])
    baseline_err = float(np.mean(base_pred != y_test))

    rows = []
    for run in range(cfg.runs):
        t0 = time.perf_counter()
        run_seed = cfg.seed * 10_000 + run
        tuned = _tune(bags, cfg, run_seed)
        res = train_alter_psvm(bags, tuned)
        test_err = instance_error_dense(res.hypothesis, X_test, y_test)
        rows.append(["group-table", "group", cfg.grouping_attribute, bags.n_bags,
                     None, run, res.final_bag_error, test_err, baseline_err,
                     time.perf_counter() - t0])
    rows += _summarize(rows, group_cols=(0, 1, 2, 3), value_cols=(6, 7, 8))
    _persist(cfg, "group_table", rows)
    return rows


# ---------------------------------------------------------------------------
# learning curve: test error vs instance budget and bag size

def _mixture_from_groups(train_insts: List[Instance], assignment: Dict[int, str],
                         r: int, m: int, seed: int) -> BagDataset:
    pools: Dict[str, List[Instance]] = {}
    for j, inst in enumerate(train_insts):
        pools.setdefault(assignment[j], []).append(inst)
    gids = sorted(pools)
    zeta = 1.0 / len(gids)
    comps = tuple((zeta, tuple(pools[g])) for g in gids)
    return gen_mixture_bags(MixtureConfig(components=comps, bag_size=r,
                                          bag_count=m, seed=seed))


def run_learning_curve(cfg: ExperimentConfig) -> List[list]:
    if cfg.generator not in ("iid", "mixture"):
        raise DataError("learning-curve generator must be 'iid' or 'mixture'")
    instances = load_sparse_dataset(cfg.dataset_path)
    assignment = None
    if cfg.generator == "mixture":
        if cfg.grouping_attribute is None:
            raise DataError("mixture generator requires grouping_attribute")
        assignment = assign_groups(instances, cfg.grouping_attribute, default_group_map())
    train_idx, test_idx = split_train_test(len(instances), cfg.split_fraction, cfg.seed)
    train_insts = [instances[i] for i in train_idx]
    train_assign = ({j: assignment[i] for j, i in enumerate(train_idx)}
                    if assignment else None)
    X_all = to_dense(instances)
    X_test = X_all[test_idx]
    y_test = labels_array([instances[i] for i in test_idx])

    rows = []
    for budget in cfg.instance_budgets:
        for r in cfg.bag_sizes:
            m = budget // r
            if m < 1:
                raise DataError(f"budget {budget} smaller than one bag of size {r}")
            for run in range(cfg.runs):
                t0 = time.perf_counter()
                gen_seed = cfg.seed * 1_000_003 + budget * 101 + r * 7 + run
                if cfg.generator == "iid":
                    bags = gen_iid_bags(train_insts, m=m, r=r, seed=gen_seed)
                else:
                    bags = _mixture_from_groups(train_insts, train_assign, r, m, gen_seed)
                tuned = _tune(bags, cfg, gen_seed)
                res = train_alter_psvm(bags, tuned)
                test_err = instance_error_dense(res.hypothesis, X_test, y_test)
                rows.append(["learning-curve", cfg.generator,
                             cfg.grouping_attribute or "", m, r, run,
                             res.final_bag_error, test_err, None,
                             time.perf_counter() - t0])
    rows += _summarize(rows, group_cols=(0, 1, 2, 3, 4), value_cols=(6, 7))
    _persist(cfg, "learning_curve", rows)
    return rows


# ---------------------------------------------------------------------------
# bound sweep: match-probability curves and invertibility thresholds

BOUND_COLUMNS = ("panel", "r", "epsilon", "beta", "match_prob", "u_threshold")


def run_bound_sweep(cfg: ExperimentConfig) -> List[list]:
    betas = np.linspace(0.0, 1.0, 201)
    rows = []
    panels = {"a": (0.0, (1, 5, 10, 50)), "b": (0.1, (1, 5, 10, 50))}
    for panel, (eps, r_values) in panels.items():
        for r in r_values:
            probs = binom_match_prob_grid(r, betas, eps)
            for beta, p in zip(betas, probs):
                rows.append([panel, r, eps, float(beta), float(p), None])
    for eps in (0.0, 0.05, 0.1, 0.2):
        probs = binom_match_prob_grid(50, betas, eps)
        for beta, p in zip(betas, probs):
            rows.append(["c", 50, eps, float(beta), float(p), None])
    for r in (1, 2, 5, 10, 20, 50):
        for eps in (0.0, 0.02, 0.05, 0.1):
            rows.append(["d", r, eps, None, None, u_threshold(r, eps)])
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for panel in ("a", "b", "c", "d"):
        path = out_dir / f"match_prob_panel_{panel}.csv"
        write_csv(path, BOUND_COLUMNS, [row for row in rows if row[0] == panel])
        outputs.append(path.name)
    write_manifest(out_dir, cfg, outputs)
    if cfg.render_figures:
        from . import plots
        plots.render_bound_sweep(out_dir)
    return rows


# ---------------------------------------------------------------------------
# privacy sweep

PRIVACY_COLUMNS = ("experiment", "grouping", "eta", "run", "train_bag_error",
                   "test_instance_error", "nonprivate_error", "utility_loss",
                   "mean_exceedance", "wall_time")


def run_privacy_sweep(cfg: ExperimentConfig) -> List[list]:
    if cfg.grouping_attribute is None:
        raise DataError("privacy-sweep requires grouping_attribute")
    instances = load_sparse_dataset(cfg.dataset_path)
    assignment = assign_groups(instances, cfg.grouping_attribute, default_group_map())
    train_idx, test_idx = split_train_test(len(instances), cfg.split_fraction, cfg.seed)
    train_insts = [instances[i] for i in train_idx]
    train_groups = {j: assignment[i] for j, i in enumerate(train_idx)}
    bags = gen_group_bags(train_insts, train_groups)
    X_test = to_dense([instances[i] for i in test_idx])
    y_test = labels_array([instances[i] for i in test_idx])

    tuned = _tune(bags, cfg, cfg.seed)
    ref = train_alter_psvm(bags, tuned)
    ref_err = instance_error_dense(ref.hypothesis, X_test, y_test)
    rows = []
    for eta in cfg.eta_grid:
        budget = PrivacyBudget(eta_total=eta, k=bags.n_bags)
        for run in range(cfg.runs):
            t0 = time.perf_counter()
            run_seed = cfg.seed * 10_000 + run
            released = release_private_proportions(bags, budget, seed=run_seed)
            # reattach labels for bag-error bookkeeping only on our side
            released = BagDataset(instances=bags.instances, bags=released.bags,
                                  metadata=released.metadata)
            res = train_alter_psvm(released, TrainConfig(**{**asdict(tuned), "seed": run_seed}))
            test_err = instance_error_dense(res.hypothesis, X_test, y_test)
            exceed = np.mean([
                deviation_check(b.size, b.observed_proportion, budget, cfg.theta,
                                trials=1000, seed=run_seed * 97 + j)
                for j, b in enumerate(bags.bags)])
            rows.append(["privacy-sweep", cfg.grouping_attribute, eta, run,
                         res.final_bag_error, test_err, ref_err, test_err - ref_err,
                         float(exceed), time.perf_counter() - t0])
    out_dir = Path(cfg.output_dir)
    write_csv(out_dir / "privacy_sweep.csv", PRIVACY_COLUMNS, rows)
    write_manifest(out_dir, cfg, ["privacy_sweep.csv"])
    if cfg.render_figures:
        from . import plots
        plots.render_privacy_sweep(out_dir)
    return rows


def _persist(cfg: ExperimentConfig, name: str, rows: List[list]) -> None:
    out_dir = Path(cfg.output_dir)
    write_csv(out_dir / f"{name}.csv", RESULT_COLUMNS, rows)
    write_manifest(out_dir, cfg, [f"{name}.csv"])
    if cfg.render_figures:
        from . import plots
        if name == "learning_curve":
            plots.render_learning_curve(out_dir)
        elif name == "group_table":
            plots.render_group_table(out_dir)


def run_experiment(cfg: ExperimentConfig) -> List[list]:
    runner = {"learning-curve": run_learning_curve,
              "group-table": run_group_table,
              "bound-sweep": run_bound_sweep,
              "privacy-sweep": run_privacy_sweep}[cfg.experiment]
    return runner(cfg)
