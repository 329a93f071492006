import io

import numpy as np
import pytest

from dante.clustering import ClusterCategory
from dante.concepts import (
    ConceptRegistry,
    DecisionTree,
    ForestParams,
    RandomForest,
    Severity,
    forest_predict,
    forest_train,
    recover_or_discover,
    score_cluster,
)
from dante.embedding import SequenceVector


def vectors(center, count, spread=0.05, seed=0, window=0, prefix="h"):
    rng = np.random.default_rng(seed)
    center = np.asarray(center, float)
    return [
        SequenceVector(
            key=f"{prefix}{i}", window_index=window,
            vector=center + rng.normal(scale=spread, size=center.shape),
        )
        for i in range(count)
    ]


class TestForest:
    def test_separable_classes_high_accuracy(self):
        d = 6
        pos_train = vectors([1.0] + [0.0] * (d - 1), 120, seed=1)
        neg_train = vectors([-1.0] + [0.0] * (d - 1), 120, seed=2)
        forest = forest_train(pos_train, neg_train, ForestParams(n_trees=25, seed=3))
        pos_test = vectors([1.0] + [0.0] * (d - 1), 100, seed=4)
        neg_test = vectors([-1.0] + [0.0] * (d - 1), 100, seed=5)
        correct = sum(forest_predict(forest, v) > 0.5 for v in pos_test)
        correct += sum(forest_predict(forest, v) <= 0.5 for v in neg_test)
        assert correct / 200 >= 0.95

    def test_identical_distributions_predict_half(self):
        pos = vectors([0.0, 0.0, 0.0], 300, spread=1.0, seed=7)
        neg = vectors([0.0, 0.0, 0.0], 300, spread=1.0, seed=8)
        forest = forest_train(pos, neg, ForestParams(n_trees=30, seed=9))
        probe = vectors([0.0, 0.0, 0.0], 200, spread=1.0, seed=10)
        mean = float(np.mean([forest_predict(forest, v) for v in probe]))
        assert abs(mean - 0.5) <= 0.1

    def test_pure_leaves_on_duplicated_points(self):
        pos = vectors([1.0, 0.0], 30, spread=0.0)
        neg = vectors([-1.0, 0.0], 30, spread=0.0)
        forest = forest_train(pos, neg, ForestParams(n_trees=10, min_leaf=1, seed=0))
        assert forest_predict(forest, pos[0]) == 1.0
        assert forest_predict(forest, neg[0]) == 0.0

    def test_empty_class_rejected(self):
        with pytest.raises(ValueError):
            forest_train([], vectors([0.0, 0.0], 5), ForestParams())

    def test_deterministic_given_seed(self):
        pos = vectors([1.0, 0.0, 0.0], 50, seed=1)
        neg = vectors([0.0, 1.0, 0.0], 50, seed=2)
        f1 = forest_train(pos, neg, ForestParams(n_trees=7, seed=42))
        f2 = forest_train(pos, neg, ForestParams(n_trees=7, seed=42))
        assert f1.equals(f2)

    def test_predict_is_mean_of_trees(self):
        ones = DecisionTree([-1], [0.0], [-1], [-1], [1.0])
        zeros = DecisionTree([-1], [0.0], [-1], [-1], [0.0])
        forest = RandomForest(dim=3, trees=[ones, zeros])
        assert forest_predict(forest, np.zeros(3)) == 0.5
        stump = RandomForest(dim=3, trees=[ones])
        assert forest_predict(stump, np.zeros(3)) == 1.0

    def test_predictions_bounded(self):
        pos = vectors([0.5, 0.5], 40, seed=3)
        neg = vectors([-0.5, -0.5], 40, seed=4)
        forest = forest_train(pos, neg, ForestParams(n_trees=15, seed=5))
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = forest_predict(forest, rng.normal(size=2) * 10)
            assert 0.0 <= p <= 1.0

    def test_dim_mismatch_raises(self):
        forest = forest_train(vectors([1.0, 0.0], 10), vectors([0.0, 1.0], 10), ForestParams(n_trees=3))
        with pytest.raises(ValueError):
            forest_predict(forest, np.zeros(5))

    def test_round_trip_via_dict(self):
        pos = vectors([1.0, 0.0], 30, seed=1)
        neg = vectors([0.0, 1.0], 30, seed=2)
        forest = forest_train(pos, neg, ForestParams(n_trees=5, seed=3))
        clone = RandomForest.from_dict(forest.to_dict())
        assert clone.equals(forest)


class TestScoreCluster:
    def test_mean_of_member_scores(self):
        ones = DecisionTree([-1], [0.0], [-1], [-1], [1.0])
        # tree that returns 1 for x0 <= 0, else 0
        gate = DecisionTree([0, -1, -1], [0.0, 0.0, 0.0], [1, -1, -1], [2, -1, -1], [0.0, 1.0, 0.0])
        forest = RandomForest(dim=2, trees=[ones, gate])
        low = SequenceVector("a", 0, np.array([-1.0, 0.0]))   # scores 1.0
        high = SequenceVector("b", 0, np.array([1.0, 0.0]))   # scores 0.5
        assert score_cluster([low, high], forest) == pytest.approx(0.75)

    def test_order_invariant(self):
        pos = vectors([1.0, 0.0], 20, seed=1)
        neg = vectors([0.0, 1.0], 20, seed=2)
        forest = forest_train(pos, neg, ForestParams(n_trees=5, seed=3))
        probe = vectors([0.6, 0.4], 15, seed=4)
        assert score_cluster(probe, forest) == score_cluster(list(reversed(probe)), forest)

    def test_empty_cluster_raises(self):
        forest = RandomForest(dim=2, trees=[DecisionTree([-1], [0.0], [-1], [-1], [1.0])])
        with pytest.raises(ValueError):
            score_cluster([], forest)


class TestRecoverOrDiscover:
    def test_empty_registry_always_novel(self):
        registry = ConceptRegistry()
        cluster = vectors([1.0, 0.0], 40, seed=1)
        rest = vectors([0.0, 1.0], 40, seed=2, prefix="r")
        decision = recover_or_discover(
            cluster, rest, registry, 0, ClusterCategory.BASIC_ATTACK, [(23,)], seed=5
        )
        assert decision.kind == "novel"
        assert len(registry) == 1

    def test_same_population_recovered_later(self):
        registry = ConceptRegistry()
        camp = [1.0, 0.0, 0.0, 0.0]
        other = [0.0, 1.0, 0.0, 0.0]
        first = recover_or_discover(
            vectors(camp, 50, seed=1), vectors(other, 50, seed=2, prefix="r"),
            registry, 1, ClusterCategory.COMPLEX_ATTACK, [(23, 2323)], seed=11,
        )
        assert first.kind == "novel"
        # same campaign shape shows up again three windows later
        again = recover_or_discover(
            vectors(camp, 60, seed=3, window=4, prefix="z"),
            vectors(other, 60, seed=4, window=4, prefix="q"),
            registry, 4, ClusterCategory.COMPLEX_ATTACK, [(23, 2323)], seed=12,
        )
        assert again.kind == "recovered"
        assert again.concept_id == first.concept_id
        assert again.score > 0.7
        assert len(registry) == 1
        model = registry.get(first.concept_id)
        assert model.last_seen == 4
        assert model.occurrence_count == 2

    def test_fresh_pattern_is_novel(self):
        registry = ConceptRegistry()
        recover_or_discover(
            vectors([1.0, 0.0, 0.0], 50, seed=1),
            vectors([0.0, 1.0, 0.0], 50, seed=2, prefix="r"),
            registry, 0, ClusterCategory.BASIC_ATTACK, [(445,)], seed=5,
        )
        decision = recover_or_discover(
            vectors([0.0, 0.0, 1.0], 50, seed=3, prefix="z"),
            vectors([0.0, 1.0, 0.0], 50, seed=4, prefix="q"),
            registry, 1, ClusterCategory.BASIC_ATTACK, [(5060,)], seed=6,
        )
        assert decision.kind == "novel"
        assert len(registry) == 2

    def test_score_at_beta_not_recovered(self):
        registry = ConceptRegistry(beta=0.7)
        ones = DecisionTree([-1], [0.0], [-1], [-1], [0.7])
        forest = RandomForest(dim=2, trees=[ones])
        registry.register(forest, 0, ClusterCategory.BASIC_ATTACK, [(445,)])
        decision = recover_or_discover(
            vectors([0.2, 0.2], 10, seed=1),
            vectors([0.9, 0.9], 10, seed=2, prefix="r"),
            registry, 1, ClusterCategory.BASIC_ATTACK, [(80,)], seed=3,
        )
        # classifier says exactly 0.7 everywhere; strict comparison says new
        assert decision.kind == "novel"
        assert decision.score == pytest.approx(0.7)

    def test_no_negatives_in_window_still_trains(self):
        registry = ConceptRegistry()
        decision = recover_or_discover(
            vectors([1.0, 0.0], 40, seed=1), [], registry, 0,
            ClusterCategory.BASIC_ATTACK, [(23,)], seed=2,
        )
        assert decision.kind == "novel"
        model = registry.get(decision.concept_id)
        # self-recognition: the cluster scores high on its own model
        assert score_cluster(vectors([1.0, 0.0], 40, seed=1), model) > 0.7

    def test_unrelated_weak_model_does_not_flip_decision(self):
        registry = ConceptRegistry()
        camp = vectors([1.0, 0.0, 0.0], 50, seed=1)
        rest = vectors([0.0, 1.0, 0.0], 50, seed=2, prefix="r")
        first = recover_or_discover(
            camp, rest, registry, 0, ClusterCategory.BASIC_ATTACK, [(23,)], seed=3
        )
        # an unrelated concept whose score on this cluster is low
        far = forest_train(
            vectors([0.0, 0.0, 9.0], 30, seed=4), vectors([0.0, 9.0, 0.0], 30, seed=5),
            ForestParams(n_trees=5, seed=6),
        )
        registry.register(far, 0, ClusterCategory.BASIC_ATTACK, [(99,)])
        again = recover_or_discover(
            vectors([1.0, 0.0, 0.0], 50, seed=7, window=1, prefix="z"),
            vectors([0.0, 1.0, 0.0], 50, seed=8, window=1, prefix="q"),
            registry, 1, ClusterCategory.BASIC_ATTACK, [(23,)], seed=9,
        )
        assert again.kind == "recovered"
        assert again.concept_id == first.concept_id

    def test_window_vectors_must_exclude_members(self):
        registry = ConceptRegistry()
        camp = vectors([1.0, 0.0], 10, seed=1)
        with pytest.raises(ValueError):
            recover_or_discover(
                camp, camp, registry, 0, ClusterCategory.BASIC_ATTACK, [], seed=2
            )


class TestRegistry:
    def _populated(self):
        registry = ConceptRegistry()
        forest = forest_train(
            vectors([1.0, 0.0], 30, seed=1), vectors([0.0, 1.0], 30, seed=2),
            ForestParams(n_trees=4, seed=3),
        )
        registry.register(forest, 0, ClusterCategory.COMPLEX_ATTACK, [(23, 23, 2323)])
        registry.register(forest, 2, ClusterCategory.BASIC_ATTACK, [(445,)])
        return registry

    def test_ids_are_stable_and_unique(self):
        registry = self._populated()
        assert [m.concept_id for m in registry.ordered()] == ["c0001", "c0002"]

    def test_annotate_updates_and_appends_history(self):
        registry = self._populated()
        registry.annotate("c0001", Severity.MALICIOUS, note="mirai", ts="t1")
        registry.annotate("c0001", Severity.BENIGN, note="actually censys", ts="t2")
        model = registry.get("c0001")
        assert model.severity is Severity.BENIGN
        assert len(model.history) == 2
        assert model.history[-1]["note"] == "actually censys"

    def test_annotate_unknown_concept_raises(self):
        registry = self._populated()
        with pytest.raises(KeyError):
            registry.annotate("c9999", Severity.MALICIOUS)

    def test_annotate_idempotency_key(self):
        registry = self._populated()
        registry.annotate("c0001", Severity.MALICIOUS, ts="t1", key="k1")
        registry.annotate("c0001", Severity.MALICIOUS, ts="t2", key="k1")
        assert len(registry.get("c0001").history) == 1

    def test_save_load_round_trip(self):
        registry = self._populated()
        registry.annotate("c0002", Severity.MALICIOUS, note="conficker", ts="t0")
        buf = io.StringIO()
        registry.save(buf)
        buf.seek(0)
        loaded = ConceptRegistry.load(buf)
        assert len(loaded) == len(registry)
        assert loaded.beta == registry.beta
        assert loaded.next_index == registry.next_index
        for mid in ("c0001", "c0002"):
            a, b = registry.get(mid), loaded.get(mid)
            assert a.to_dict() == b.to_dict()
            assert a.forest.equals(b.forest)
        # a second save is byte-identical
        buf2 = io.StringIO()
        loaded.save(buf2)
        assert buf2.getvalue() == buf.getvalue()

    def test_eviction_prefers_unlabeled_low_occurrence(self):
        registry = ConceptRegistry(max_concepts=2)
        forest = forest_train(
            vectors([1.0, 0.0], 10, seed=1), vectors([0.0, 1.0], 10, seed=2),
            ForestParams(n_trees=2, seed=3),
        )
        a = registry.register(forest, 0, ClusterCategory.BASIC_ATTACK, [(1,)])
        b = registry.register(forest, 1, ClusterCategory.BASIC_ATTACK, [(2,)])
        registry.annotate(a.concept_id, Severity.MALICIOUS, ts="t")
        registry.register(forest, 2, ClusterCategory.BASIC_ATTACK, [(3,)])
        assert a.concept_id in registry  # labeled concepts survive
        assert b.concept_id not in registry
