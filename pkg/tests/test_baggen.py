import math

import numpy as np
import pytest

from llptk.baggen import (
    AdversarialConstruction,
    KappaConfig,
    MixtureConfig,
    gen_adversarial_pure_bags,
    gen_group_bags,
    gen_iid_bags,
    gen_kappa_bags,
    gen_mixture_bags,
    gen_population_bags,
)
from llptk.core import DataError, Instance, proportion
from llptk.theory import population_sample_size


def inst(label, idx=1):
    return Instance(features={idx: 1.0}, true_label=label)


def balanced_pool(n=200):
    return [inst(1 if i % 2 == 0 else -1) for i in range(n)]


class TestIidBags:
    def test_degenerate_pool(self):
        ds = gen_iid_bags([inst(1)], m=3, r=5, seed=0)
        assert ds.n_bags == 3
        assert all(b.observed_proportion == 1.0 for b in ds.bags)

    def test_r1_reduces_to_supervised(self):
        ds = gen_iid_bags(balanced_pool(), m=100, r=1, seed=1)
        assert all(b.observed_proportion in (0.0, 1.0) for b in ds.bags)

    def test_mean_proportion_matches_pool_rate(self):
        # binomial oracle: mean of bag proportions ~ 0.5, se = sqrt(p(1-p)/(m*r))
        m, r = 10_000, 10
        ds = gen_iid_bags(balanced_pool(), m=m, r=r, seed=2)
        props = np.array([b.observed_proportion for b in ds.bags])
        se = math.sqrt(0.25 / (m * r))
        assert abs(props.mean() - 0.5) < 3 * se

    def test_deterministic_given_seed(self):
        a = gen_iid_bags(balanced_pool(), m=20, r=4, seed=9)
        b = gen_iid_bags(balanced_pool(), m=20, r=4, seed=9)
        assert [bag.members for bag in a.bags] == [bag.members for bag in b.bags]

    def test_proportions_consistent_with_labels(self):
        ds = gen_iid_bags(balanced_pool(), m=50, r=7, seed=3)
        for bag in ds.bags:
            labels = [ds.instances[i].true_label for i in bag.members]
            assert bag.observed_proportion == proportion(labels)

    def test_unlabeled_pool_rejected(self):
        with pytest.raises(DataError):
            gen_iid_bags([Instance(features={1: 1.0})], m=1, r=1, seed=0)


class TestMixtureBags:
    def test_single_component_collapse(self):
        pool = tuple(balanced_pool(50))
        cfg = MixtureConfig(components=((1.0, pool),), bag_size=5, bag_count=30, seed=4)
        ds = gen_mixture_bags(cfg)
        assert ds.n_bags == 30
        assert all(b.size == 5 for b in ds.bags)

    def test_pure_components_give_pure_bags(self):
        pos = tuple(inst(1) for _ in range(20))
        neg = tuple(inst(-1) for _ in range(20))
        cfg = MixtureConfig(components=((0.5, pos), (0.5, neg)),
                            bag_size=8, bag_count=100, seed=5)
        ds = gen_mixture_bags(cfg)
        assert all(b.observed_proportion in (0.0, 1.0) for b in ds.bags)

    def test_invalid_priors(self):
        pool = tuple(balanced_pool(4))
        with pytest.raises(DataError):
            MixtureConfig(components=((0.7, pool), (0.7, pool)),
                          bag_size=2, bag_count=2, seed=0)

    def test_component_metadata_recorded(self):
        pos = tuple(inst(1) for _ in range(5))
        neg = tuple(inst(-1) for _ in range(5))
        cfg = MixtureConfig(components=((0.5, pos), (0.5, neg)),
                            bag_size=3, bag_count=40, seed=6)
        ds = gen_mixture_bags(cfg)
        comps = ds.metadata["component_of_bag"]
        assert len(comps) == 40
        for bag, c in zip(ds.bags, comps):
            assert bag.observed_proportion == (1.0 if c == 0 else 0.0)


class TestKappaBags:
    def test_near_certain_inclusion(self):
        pool = balanced_pool(30)
        cfg = KappaConfig(pick_probabilities=(1 - 1e-12,) * 30, bag_count=1, seed=0)
        ds = gen_kappa_bags(pool, cfg)
        assert ds.bags[0].members == tuple(range(30))

    def test_mean_bag_size(self):
        n, r_hat, m = 1000, 20, 5000
        pool = balanced_pool(n)
        cfg = KappaConfig(pick_probabilities=(r_hat / n,) * n, bag_count=m, seed=7)
        ds = gen_kappa_bags(pool, cfg)
        sizes = np.array([b.size for b in ds.bags])
        # sum of Bernoullis: var = n p (1-p)
        se = math.sqrt(n * (r_hat / n) * (1 - r_hat / n) / m)
        assert abs(sizes.mean() - r_hat) < 4 * se

    def test_consecutive_bag_overlap(self):
        n, m = 500, 4000
        p = 0.05
        pool = balanced_pool(n)
        cfg = KappaConfig(pick_probabilities=(p,) * n, bag_count=m, seed=8)
        ds = gen_kappa_bags(pool, cfg)
        overlaps = []
        for a, b in zip(ds.bags[:-1], ds.bags[1:]):
            overlaps.append(len(set(a.members) & set(b.members)))
        expected = n * p * p
        se = math.sqrt(n * p * p * (1 - p * p) / len(overlaps))
        assert abs(np.mean(overlaps) - expected) < 3 * se

    def test_probability_domain(self):
        with pytest.raises(DataError):
            KappaConfig(pick_probabilities=(0.5, 1.0), bag_count=1, seed=0)


class TestGroupBags:
    def test_one_bag_per_group(self):
        instances = balanced_pool(60)
        group_of = {i: f"g{i % 15}" for i in range(60)}
        ds = gen_group_bags(instances, group_of)
        assert ds.n_bags == 15
        members = sorted(i for b in ds.bags for i in b.members)
        assert members == list(range(60))

    def test_single_group_global_rate(self):
        instances = balanced_pool(40)
        ds = gen_group_bags(instances, {i: "all" for i in range(40)})
        assert ds.n_bags == 1
        assert ds.bags[0].observed_proportion == 0.5

    def test_empty_map_rejected(self):
        with pytest.raises(DataError):
            gen_group_bags(balanced_pool(3), {})


class TestPopulationBags:
    def test_pure_location(self):
        pool = [inst(1) for _ in range(10)]
        ds = gen_population_bags([pool], [1.0], m=5, r=4, seed=0)
        assert all(b.observed_proportion == 1.0 for b in ds.bags)
        assert ds.metadata["sample_proportions"] == [1.0] * 5

    def test_grid_property(self):
        pool = balanced_pool(100)
        ds = gen_population_bags([pool], [0.5], m=50, r=10, seed=1)
        for p in ds.metadata["sample_proportions"]:
            assert abs(p * 10 - round(p * 10)) < 1e-9

    def test_concentration_at_prescribed_r(self):
        eps = delta = 0.05
        r = population_sample_size(eps, delta)
        assert r == 738
        pool = balanced_pool(2000)
        m = 2000
        ds = gen_population_bags([pool], [0.5], m=m, r=r, seed=2)
        sample = np.array(ds.metadata["sample_proportions"])
        exceed = np.mean(np.abs(sample - 0.5) > eps)
        mc_se = math.sqrt(delta * (1 - delta) / m)
        assert exceed <= delta + 3 * mc_se

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            gen_population_bags([balanced_pool(5)], [0.5, 0.5], m=1, r=1, seed=0)


class TestAdversarialBags:
    @pytest.mark.parametrize("r,eta", [(10, 0.2), (10, 0.0), (20, 0.25), (8, 0.125)])
    def test_construction_properties(self, r, eta):
        cons = gen_adversarial_pure_bags(r=r, eta=eta, m=5)
        ds = cons.dataset
        k = int(round(eta * r))
        for bag in ds.bags:
            labels = [ds.instances[i].true_label for i in bag.members]
            preds = [cons.predictions[i] for i in bag.members]
            # zero proportion error, exactly, per bag
            assert proportion(preds) == bag.observed_proportion
            assert bag.observed_proportion == proportion(labels)
            wrong = sum(1 for y, p in zip(labels, preds) if y != p)
            assert wrong == 2 * k
            # the bag is (1 - eta)-pure
            pos = sum(1 for y in labels if y == 1)
            assert max(pos, r - pos) >= (1 - eta) * r - 1e-12

    def test_linear_embedding_realizes_table(self):
        cons = gen_adversarial_pure_bags(r=10, eta=0.2, m=3)
        h = cons.hypothesis()
        for i, instance in enumerate(cons.dataset.instances):
            assert h.predict(instance) == cons.predictions[i]

    def test_infeasible_purity(self):
        with pytest.raises(DataError, match="infeasible purity"):
            gen_adversarial_pure_bags(r=10, eta=0.15, m=1)
