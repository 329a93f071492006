"""Concept registry: one-vs-all random-forest classifiers that let the
pipeline tell a returning attack pattern from a genuinely new one once
Jaccard tracking loses the thread."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Sequence

import numpy as np

from dante.clustering import ClusterCategory
from dante.embedding import SequenceVector

REGISTRY_FORMAT = "dante-registry"
REGISTRY_VERSION = 1


class Severity(Enum):
    UNLABELED = "unlabeled"
    BENIGN = "benign"
    SUSPICIOUS = "suspicious"
    MALICIOUS = "malicious"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 12
    min_leaf: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("forest parameters must be positive")


class DecisionTree:
    """Binary CART tree stored as flat node arrays. Leaves hold the
    positive-class fraction of their training samples."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int32)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            rows = np.nonzero(internal)[0]
            cur = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTree":
        return cls(data["feature"], data["threshold"], data["left"], data["right"], data["value"])

    def equals(self, other: "DecisionTree") -> bool:
        return (
            np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.value, other.value)
        )


@dataclass
class RandomForest:
    dim: int
    trees: list[DecisionTree]

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) inputs, got {X.shape}")
        acc = np.zeros(len(X))
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, data: dict) -> "RandomForest":
        return cls(dim=data["dim"], trees=[DecisionTree.from_dict(t) for t in data["trees"]])

    def equals(self, other: "RandomForest") -> bool:
        return (
            self.dim == other.dim
            and len(self.trees) == len(other.trees)
            and all(a.equals(b) for a, b in zip(self.trees, other.trees))
        )


class _TreeBuilder:
    def __init__(self, X, y, max_depth, min_leaf, n_feats, rng):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n_feats = n_feats
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        y = self.y[idx]
        pos = float(y.mean())
        self.value[node] = pos
        if depth >= self.max_depth or len(idx) < 2 * self.min_leaf or pos in (0.0, 1.0):
            return node
        split = self._best_split(idx)
        if split is None:
            return node
        feat, thr, left_idx, right_idx = split
        self.feature[node] = feat
        self.threshold[node] = thr
        self.left[node] = self.build(left_idx, depth + 1)
        self.right[node] = self.build(right_idx, depth + 1)
        return node

    def _best_split(self, idx: np.ndarray):
        d = self.X.shape[1]
        # inspect a random subset of features, but keep drawing past the
        # subset size until at least one valid split shows up
        feat_order = self.rng.permutation(d)
        y = self.y[idx]
        n = len(idx)
        total_pos = y.sum()
        best = None  # (impurity, feat, thr)
        for inspected, feat in enumerate(feat_order):
            if inspected >= self.n_feats and best is not None:
                break
            values = self.X[idx, feat]
            order = np.argsort(values, kind="stable")
            sv = values[order]
            sy = y[order]
            cum_pos = np.cumsum(sy)
            # candidate split after position i (1-based count to the left)
            counts_left = np.arange(1, n)
            distinct = sv[1:] != sv[:-1]
            lo, hi = self.min_leaf, n - self.min_leaf
            valid = distinct & (counts_left >= lo) & (counts_left <= hi)
            if not valid.any():
                continue
            pos_left = cum_pos[:-1][valid]
            nl = counts_left[valid].astype(np.float64)
            nr = n - nl
            pos_right = total_pos - pos_left
            gini_l = 1.0 - (pos_left / nl) ** 2 - (1.0 - pos_left / nl) ** 2
            gini_r = 1.0 - (pos_right / nr) ** 2 - (1.0 - pos_right / nr) ** 2
            impurity = (nl * gini_l + nr * gini_r) / n
            k = int(np.argmin(impurity))
            score = float(impurity[k])
            if best is None or score < best[0] - 1e-12:
                cut = np.nonzero(valid)[0][k]
                thr = float((sv[cut] + sv[cut + 1]) / 2.0)
                best = (score, int(feat), thr)
        if best is None:
            return None
        _, feat, thr = best
        mask = self.X[idx, feat] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        if len(left_idx) < self.min_leaf or len(right_idx) < self.min_leaf:
            return None
        return feat, thr, left_idx, right_idx


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    rows = [v.vector if isinstance(v, SequenceVector) else np.asarray(v) for v in vectors]
    return np.stack(rows).astype(np.float64)


def forest_train(
    positives, negatives, params: ForestParams = ForestParams()
) -> RandomForest:
    """Train the one-vs-all forest: cluster members are the ones, everything
    else the zeros. Bootstrap per tree, sqrt(d) features per split,
    reproducible for a fixed seed."""
    pos = _as_matrix(positives)
    neg = _as_matrix(negatives)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be non-empty")
    if pos.shape[1] != neg.shape[1]:
        raise ValueError("positive/negative dimensionality mismatch")
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    d = X.shape[1]
    n = len(X)
    n_feats = max(1, int(round(math.sqrt(d))))

    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        sample = rng.integers(0, n, size=n)
        builder = _TreeBuilder(X, y, params.max_depth, params.min_leaf, n_feats, rng)
        builder.build(sample, 0)
        trees.append(
            DecisionTree(builder.feature, builder.threshold, builder.left, builder.right, builder.value)
        )
    return RandomForest(dim=d, trees=trees)


def forest_predict(forest: RandomForest, x) -> float:
    """Probability the point belongs to the forest's positive class: the
    mean of the trees' leaf fractions."""
    vec = x.vector if isinstance(x, SequenceVector) else np.asarray(x, dtype=np.float64)
    if vec.shape != (forest.dim,):
        raise ValueError(f"expected dim {forest.dim}, got shape {vec.shape}")
    return float(forest.predict_batch(vec[None, :])[0])


@dataclass
class ConceptModel:
    concept_id: str
    forest: RandomForest
    first_seen: int
    last_seen: int
    occurrence_count: int
    category: ClusterCategory
    exemplars: tuple[tuple[int, ...], ...]
    severity: Severity = Severity.UNLABELED
    note: str = ""
    history: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.concept_id,
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
            "occurrences": self.occurrence_count,
            "category": self.category.value,
            "exemplars": [list(e) for e in self.exemplars],
            "severity": self.severity.value,
            "note": self.note,
            "history": self.history,
            "forest": self.forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConceptModel":
        return cls(
            concept_id=data["id"],
            forest=RandomForest.from_dict(data["forest"]),
            first_seen=data["first_seen"],
            last_seen=data["last_seen"],
            occurrence_count=data["occurrences"],
            category=ClusterCategory(data["category"]),
            exemplars=tuple(tuple(e) for e in data["exemplars"]),
            severity=Severity(data["severity"]),
            note=data.get("note", ""),
            history=list(data.get("history", [])),
        )


def score_cluster(cluster_vectors, model: ConceptModel | RandomForest) -> float:
    """Mean positive-class probability of a cluster's members under one
    concept's classifier."""
    forest = model.forest if isinstance(model, ConceptModel) else model
    X = _as_matrix(cluster_vectors)
    if len(X) == 0:
        raise ValueError("cluster must be non-empty")
    # summing in sorted order makes the mean exactly member-order-invariant
    preds = np.sort(forest.predict_batch(X))
    return float(preds.sum() / len(preds))


MAX_EXEMPLARS = 10


class ConceptRegistry:
    """All known concepts, keyed by a stable id. Single-writer: the pipeline
    is the only mutator; readers work from persisted snapshots."""

    def __init__(self, beta: float = 0.7, max_concepts: int = 10_000):
        if not 0.0 < beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        self.beta = beta
        self.max_concepts = max_concepts
        self.models: dict[str, ConceptModel] = {}
        self.next_index = 1

    def __len__(self) -> int:
        return len(self.models)

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self.models

    def get(self, concept_id: str) -> ConceptModel:
        try:
            return self.models[concept_id]
        except KeyError:
            raise KeyError(f"unknown concept {concept_id!r}") from None

    def ordered(self) -> list[ConceptModel]:
        return [self.models[k] for k in sorted(self.models)]

    def _evict_if_full(self) -> None:
        while len(self.models) >= self.max_concepts:
            unlabeled = [
                m for m in self.models.values() if m.severity is Severity.UNLABELED
            ]
            if not unlabeled:
                return
            victim = min(unlabeled, key=lambda m: (m.occurrence_count, m.concept_id))
            del self.models[victim.concept_id]

    def register(
        self,
        forest: RandomForest,
        window_index: int,
        category: ClusterCategory,
        exemplars: Sequence[Sequence[int]],
    ) -> ConceptModel:
        self._evict_if_full()
        concept_id = f"c{self.next_index:04d}"
        self.next_index += 1
        model = ConceptModel(
            concept_id=concept_id,
            forest=forest,
            first_seen=window_index,
            last_seen=window_index,
            occurrence_count=1,
            category=category,
            exemplars=tuple(tuple(e) for e in exemplars)[:MAX_EXEMPLARS],
        )
        self.models[concept_id] = model
        return model

    def annotate(
        self,
        concept_id: str,
        severity: Severity | str,
        note: str = "",
        author: str = "analyst",
        ts: str | None = None,
        key: str | None = None,
    ) -> ConceptModel:
        """Replace a concept's annotation and append to its history. A
        repeated idempotency key is a no-op."""
        model = self.get(concept_id)
        if isinstance(severity, str):
            severity = Severity(severity)
        if key is not None and model.history and model.history[-1].get("key") == key:
            return model
        if ts is None:
            ts = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        model.severity = severity
        model.note = note
        entry = {"severity": severity.value, "note": note, "author": author, "ts": ts}
        if key is not None:
            entry["key"] = key
        model.history.append(entry)
        return model

    def save(self, sink: IO[str] | str) -> None:
        if isinstance(sink, str):
            with open(sink, "w", encoding="utf-8") as fh:
                self.save(fh)
            return
        head = {
            "format": REGISTRY_FORMAT,
            "v": REGISTRY_VERSION,
            "beta": self.beta,
            "max_concepts": self.max_concepts,
            "next_index": self.next_index,
        }
        sink.write(json.dumps(head, sort_keys=True) + "\n")
        for model in self.ordered():
            sink.write(json.dumps(model.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, source: IO[str] | str) -> "ConceptRegistry":
        if isinstance(source, str):
            with open(source, "r", encoding="utf-8") as fh:
                return cls.load(fh)
        lines = [line for line in source if line.strip()]
        if not lines:
            raise ValueError("registry file is empty")
        head = json.loads(lines[0])
        if head.get("format") != REGISTRY_FORMAT or head.get("v") != REGISTRY_VERSION:
            raise ValueError(f"not a v{REGISTRY_VERSION} registry file")
        registry = cls(beta=head["beta"], max_concepts=head.get("max_concepts", 10_000))
        registry.next_index = head["next_index"]
        for line in lines[1:]:
            model = ConceptModel.from_dict(json.loads(line))
            registry.models[model.concept_id] = model
        return registry


@dataclass(frozen=True)
class Decision:
    kind: str  # "recovered" | "novel"
    concept_id: str
    score: float  # best classifier score seen (0.0 when registry empty)


def _synthetic_negatives(
    positives: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Random directions at the positives' typical radius. These surround the
    cluster's region so the one-vs-all model stays tight even when the window
    offers only a handful of distinct negative points."""
    d = positives.shape[1]
    raw = rng.standard_normal((count, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    radius = float(np.linalg.norm(positives, axis=1).mean())
    if radius == 0.0:
        radius = 1.0
    return raw * radius


def _training_negatives(
    positives: np.ndarray, pool: np.ndarray, seed
) -> np.ndarray:
    """The window's non-members (downsampled to 10x the positives), padded
    with synthetic sphere negatives. Without the padding, a window holding
    only one or two other behaviors yields a half-space model that later
    swallows unrelated clusters."""
    rng = np.random.default_rng(seed)
    cap = 10 * len(positives)
    if len(pool) > cap:
        pick = np.sort(rng.choice(len(pool), size=cap, replace=False))
        pool = pool[pick]
    synth_count = min(max(2 * len(positives), 200), 2000)
    synth = _synthetic_negatives(positives, synth_count, rng)
    if len(pool) == 0:
        return synth
    return np.vstack([pool, synth])


def recover_or_discover(
    cluster_vectors: Sequence[SequenceVector],
    window_vectors: Sequence[SequenceVector],
    registry: ConceptRegistry,
    window_index: int,
    category: ClusterCategory,
    exemplars: Sequence[Sequence[int]] = (),
    seed: int = 0,
    forest_params: ForestParams = ForestParams(),
) -> Decision:
    """Decide whether an unmapped cluster is a returning concept or a new one.

    Every stored classifier scores the cluster; if the best mean probability
    strictly exceeds beta the concept is recovered (lifecycle updated, model
    retrained on this window). Otherwise the cluster becomes a new concept
    trained against the rest of the window, noise included.

    `window_vectors` must hold the window's non-member sequences only.
    """
    cluster_keys = {v.key for v in cluster_vectors}
    for v in window_vectors:
        if v.key in cluster_keys:
            raise ValueError("window_vectors must exclude the cluster's own members")

    pos = _as_matrix(cluster_vectors)
    pool = _as_matrix(window_vectors) if len(window_vectors) else np.empty((0, pos.shape[1]))
    neg = _training_negatives(pos, pool, seed)
    params = ForestParams(
        n_trees=forest_params.n_trees,
        max_depth=forest_params.max_depth,
        min_leaf=forest_params.min_leaf,
        seed=seed,
    )

    best_model = None
    best_score = 0.0
    for model in registry.ordered():
        score = score_cluster(pos, model)
        if best_model is None or score > best_score or (
            score == best_score and model.first_seen < best_model.first_seen
        ):
            best_model = model
            best_score = score

    if best_model is not None and best_score > registry.beta:
        best_model.last_seen = window_index
        best_model.occurrence_count += 1
        best_model.forest = forest_train(pos, neg, params)
        merged = list(best_model.exemplars)
        for e in exemplars:
            e = tuple(e)
            if e not in merged:
                merged.append(e)
        best_model.exemplars = tuple(merged)[:MAX_EXEMPLARS]
        return Decision(kind="recovered", concept_id=best_model.concept_id, score=best_score)

    forest = forest_train(pos, neg, params)
    model = registry.register(forest, window_index, category, exemplars)
    return Decision(kind="novel", concept_id=model.concept_id, score=best_score)
