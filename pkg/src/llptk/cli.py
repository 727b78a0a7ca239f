"""Command line interface.

Subcommands: generate, train, evaluate, theory <calculator>, privacy,
experiment <name>.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, baggen, data as datamod, privacy as privmod, theory
from .core import DataError, LinearHypothesis, instance_error
from .experiments import ExperimentConfig, load_experiment_config, run_experiment
from .solvers import TrainConfig, train_alter_psvm, train_baseline, train_inv_cal, train_mean_map

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="llptk", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a bag dataset")
    gen.add_argument("model", choices=["iid", "mixture", "kappa", "group",
                                       "population", "adversarial"])
    gen.add_argument("--input", help="sparse instance file (pool)")
    gen.add_argument("--attribute", help="grouping attribute (group/mixture models)")
    gen.add_argument("-m", "--bags", type=int, default=100)
    gen.add_argument("-r", "--bag-size", type=int, default=10)
    gen.add_argument("--eta", type=float, default=0.1, help="adversarial purity slack")
    gen.add_argument("--pick-prob", type=float, default=0.01, help="kappa uniform p")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="train a solver on a bag dataset")
    tr.add_argument("dataset", help="dataset JSON produced by generate")
    tr.add_argument("--solver", default="alter-psvm",
                    choices=["alter-psvm", "mean-map", "inv-cal"])
    tr.add_argument("-C", type=float, default=1.0)
    tr.add_argument("--Cp", type=float, default=0.1)
    tr.add_argument("--restarts", type=int, default=4)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", required=True, help="model JSON path")

    ev = sub.add_parser("evaluate", help="evaluate a trained model")
    ev.add_argument("model", help="model JSON from train")
    ev.add_argument("--instances", required=True, help="labeled sparse instance file")

    th = sub.add_parser("theory", help="evaluate a bound calculator")
    th_sub = th.add_subparsers(dest="calculator", required=True)
    sc = th_sub.add_parser("sample-complexity")
    sc.add_argument("--vc", type=int, required=True)
    sc.add_argument("-r", type=float, required=True)
    sc.add_argument("--epsilon", type=float, required=True)
    sc.add_argument("--delta", type=float, required=True)
    pb = th_sub.add_parser("purity")
    for flag in ("--epsilon", "--delta", "--eta", "--rho"):
        pb.add_argument(flag, type=float, required=True)
    pb.add_argument("--tau", type=float)
    pb.add_argument("-n", "--bags", type=int)
    pb.add_argument("-r", type=float)
    mp = th_sub.add_parser("match-prob")
    mp.add_argument("-r", type=int, required=True)
    mp.add_argument("--beta", type=float)
    mp.add_argument("--epsilon", type=float, required=True)
    mp.add_argument("--invert", type=float, metavar="TARGET",
                    help="invert: report beta reaching this match probability")
    ut = th_sub.add_parser("u-threshold")
    ut.add_argument("-r", type=int, required=True)
    ut.add_argument("--epsilon", type=float, required=True)
    mx = th_sub.add_parser("mixture-purity")
    mx.add_argument("-r", type=int, required=True)
    mx.add_argument("-c", type=float, required=True)
    mx.add_argument("--alphas", type=float, nargs="+", required=True)
    kp = th_sub.add_parser("kappa-bound")
    kp.add_argument("--epsilon", type=float, required=True)
    kp.add_argument("--pick-probs", type=float, nargs="+", required=True)
    ps = th_sub.add_parser("population-size")
    ps.add_argument("--epsilon", type=float, required=True)
    ps.add_argument("--delta", type=float, required=True)
    eb = th_sub.add_parser("expected-size")
    eb.add_argument("--avg", type=float, required=True)
    eb.add_argument("-m", type=int, required=True)
    eb.add_argument("-t", type=float, required=True)
    mk = th_sub.add_parser("markov")
    mk.add_argument("--er", type=float, required=True)
    mk.add_argument("--delta", type=float, required=True)

    pv = sub.add_parser("privacy", help="private proportion release")
    pv_sub = pv.add_subparsers(dest="action", required=True)
    rel = pv_sub.add_parser("release")
    rel.add_argument("dataset")
    rel.add_argument("--eta", type=float, required=True)
    rel.add_argument("--seed", type=int, default=0)
    rel.add_argument("--out", required=True)
    dev = pv_sub.add_parser("deviation-check")
    dev.add_argument("-n", type=int, required=True)
    dev.add_argument("--proportion", type=float, required=True)
    dev.add_argument("--eta", type=float, required=True)
    dev.add_argument("-k", type=int, required=True)
    dev.add_argument("--theta", type=float, required=True)
    dev.add_argument("--trials", type=int, default=10_000)
    dev.add_argument("--seed", type=int, default=0)

    ex = sub.add_parser("experiment", help="run a harness experiment")
    ex.add_argument("name", choices=["learning-curve", "group-table",
                                     "bound-sweep", "privacy-sweep"])
    ex.add_argument("--config", help="experiment config file")
    ex.add_argument("--dataset", help="sparse instance file")
    ex.add_argument("--attribute")
    ex.add_argument("--seed", type=int)
    ex.add_argument("--out", help="output directory")
    return parser


def _cmd_generate(args) -> int:
    if args.model == "adversarial":
        construction = baggen.gen_adversarial_pure_bags(args.bag_size, args.eta, args.bags)
        datamod.save_dataset(construction.dataset, args.out)
        print(f"wrote {args.out}: {construction.dataset.n_bags} adversarial bags")
        return EXIT_OK
    if not args.input:
        raise DataError("this model requires --input")
    pool = datamod.load_sparse_dataset(args.input)
    if args.model == "iid":
        ds = baggen.gen_iid_bags(pool, m=args.bags, r=args.bag_size, seed=args.seed)
    elif args.model == "kappa":
        cfg = baggen.KappaConfig(pick_probabilities=(args.pick_prob,) * len(pool),
                                 bag_count=args.bags, seed=args.seed)
        ds = baggen.gen_kappa_bags(pool, cfg)
    elif args.model in ("group", "mixture"):
        if not args.attribute:
            raise DataError(f"{args.model} model requires --attribute")
        assignment = datamod.assign_groups(pool, args.attribute, datamod.default_group_map())
        if args.model == "group":
            ds = baggen.gen_group_bags(pool, assignment)
        else:
            pools = {}
            for i, inst in enumerate(pool):
                pools.setdefault(assignment[i], []).append(inst)
            zeta = 1.0 / len(pools)
            comps = tuple((zeta, tuple(pools[g])) for g in sorted(pools))
            ds = baggen.gen_mixture_bags(baggen.MixtureConfig(
                components=comps, bag_size=args.bag_size, bag_count=args.bags,
                seed=args.seed))
    else:  # population
        assignment = {i: 0 for i in range(len(pool))}
        props = [sum(1 for x in pool if x.true_label == 1) / len(pool)]
        ds = baggen.gen_population_bags([pool], props, m=args.bags,
                                        r=args.bag_size, seed=args.seed)
    datamod.save_dataset(ds, args.out)
    print(f"wrote {args.out}: {ds.n_bags} bags over {ds.n_instances} instances")
    return EXIT_OK


def _cmd_train(args) -> int:
    ds = datamod.load_dataset(args.dataset)
    cfg = TrainConfig(solver=args.solver, C=args.C, C_p=args.Cp,
                      restarts=args.restarts, seed=args.seed)
    trainer = {"alter-psvm": train_alter_psvm, "mean-map": train_mean_map,
               "inv-cal": train_inv_cal}[args.solver]
    res = trainer(ds, cfg)
    model = {"weights": res.hypothesis.weights, "bias": res.hypothesis.bias,
             "solver": args.solver, "final_bag_error": res.final_bag_error,
             "init_used": res.init_used, "warnings": list(res.warnings)}
    Path(args.out).write_text(json.dumps(model))
    print(f"final bag error: {res.final_bag_error:.6f} (init: {res.init_used})")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model = json.loads(Path(args.model).read_text())
    h = LinearHypothesis(weights={int(k): v for k, v in model["weights"].items()},
                         bias=model["bias"])
    instances = datamod.load_sparse_dataset(args.instances)
    err = instance_error(h, instances)
    print(f"instance error: {err:.6f} over {len(instances)} instances")
    return EXIT_OK


def _cmd_theory(args) -> int:
    calc = args.calculator
    if calc == "sample-complexity":
        print(theory.bag_sample_complexity(args.vc, args.r, args.epsilon, args.delta))
    elif calc == "purity":
        if args.tau is not None and args.bags and args.r:
            res = theory.purity_multi_bag(theory.PurityQuery(
                epsilon=args.epsilon, delta=args.delta, eta=args.eta, rho=args.rho,
                tau=args.tau, n_bags=args.bags, r=args.r))
        else:
            res = theory.purity_per_bag(args.epsilon, args.delta, args.eta, args.rho)
        print(f"fraction={res.fraction:.6g} confidence={res.confidence:.6g} "
              f"vacuous={res.vacuous}")
    elif calc == "match-prob":
        if args.invert is not None:
            print(theory.invert_match_prob(args.r, args.epsilon, args.invert))
        else:
            if args.beta is None:
                raise DataError("match-prob requires --beta or --invert")
            print(theory.binom_match_prob(theory.MatchProbQuery(
                r=args.r, beta=args.beta, epsilon=args.epsilon)))
    elif calc == "u-threshold":
        print(theory.u_threshold(args.r, args.epsilon))
    elif calc == "mixture-purity":
        eta, prob = theory.mixture_purity_bound(args.r, args.c, args.alphas)
        print(f"eta={eta:.6g} prob_lower={prob:.6g}")
    elif calc == "kappa-bound":
        b = theory.kappa_misclassification_bound(args.epsilon, args.pick_probs)
        print(f"q={b.q:.6g} qn={b.qn:.6g} r_hat={b.r_hat:.6g} uniform={b.uniform}")
    elif calc == "population-size":
        print(theory.population_sample_size(args.epsilon, args.delta))
    elif calc == "expected-size":
        lower, conf = theory.expected_bag_size_bound(args.avg, args.m, args.t)
        print(f"lower_bound={lower:.6g} confidence={conf:.6g}")
    elif calc == "markov":
        print(theory.markov_epsilon_conversion(args.er, args.delta))
    return EXIT_OK


def _cmd_privacy(args) -> int:
    if args.action == "release":
        ds = datamod.load_dataset(args.dataset)
        budget = privmod.PrivacyBudget(eta_total=args.eta, k=ds.n_bags)
        out = privmod.release_private_proportions(ds, budget, seed=args.seed)
        datamod.save_dataset(out, args.out)
        print(f"wrote {args.out}: {out.n_bags} bags, eta={args.eta}")
    else:
        budget = privmod.PrivacyBudget(eta_total=args.eta, k=args.k)
        rate = privmod.deviation_check(args.n, args.proportion, budget, args.theta,
                                       trials=args.trials, seed=args.seed)
        print(f"exceedance={rate:.6g}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    if args.config:
        cfg = load_experiment_config(args.config)
        cfg.experiment = args.name
    else:
        cfg = ExperimentConfig(experiment=args.name)
    if args.dataset:
        cfg.dataset_path = args.dataset
    if args.attribute:
        cfg.grouping_attribute = args.attribute
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    run_experiment(cfg)
    print(f"results written to {cfg.output_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"generate": _cmd_generate, "train": _cmd_train,
                "evaluate": _cmd_evaluate, "theory": _cmd_theory,
                "privacy": _cmd_privacy, "experiment": _cmd_experiment}
    try:
        return handlers[args.command](args)
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
