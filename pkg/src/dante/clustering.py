"""Per-window batch clustering of sequence vectors.

DBSCAN is the default; the clusterer slot is a plain function so any batch
algorithm with the same signature plugs in (a small k-means ships to prove
it). Every cluster also gets the four-way behavior category derived from
how many distinct ports its member sequences touch.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from statistics import median_low
from typing import Mapping, Sequence

import numpy as np

from dante.embedding import SequenceVector
from dante.windows import PortSequence

_NEIGHBOR_BLOCK = 512


class ClusterCategory(Enum):
    SERVICE_RECON = "ServiceRecon"
    BASIC_ATTACK = "BasicAttack"
    COMPLEX_ATTACK = "ComplexAttack"
    NOISE_OUTLIERS = "NoiseOutliers"


@dataclass(frozen=True)
class ClustererConfig:
    eps: float = 0.3
    min_pts: int = 30
    metric: str = "euclidean-on-normalized"  # or "euclidean-raw"
    algorithm: str = "dbscan"  # or "kmeans"
    kmeans_k: int = 8
    seed: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 2:
            raise ValueError("min_pts must be >= 2")
        if self.metric not in ("euclidean-on-normalized", "euclidean-raw"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.algorithm not in ("dbscan", "kmeans"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass(frozen=True)
class ClusterSummary:
    size: int
    unique_ports: int  # median over member sequences' distinct-port counts
    exemplars: tuple[tuple[int, ...], ...]  # most common sequences first
    category: ClusterCategory


@dataclass(frozen=True)
class Cluster:
    id: int
    members: frozenset[str]
    summary: ClusterSummary | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    def members_sorted(self) -> list[str]:
        return sorted(self.members)


@dataclass(frozen=True)
class WindowClustering:
    window_index: int
    clusters: tuple[Cluster, ...]
    noise: frozenset[str]

    @property
    def total(self) -> int:
        return sum(c.size for c in self.clusters) + len(self.noise)

    def cluster_by_id(self, cluster_id: int) -> Cluster:
        return self.clusters[cluster_id]


def categorize_cluster(unique_ports: int) -> ClusterCategory:
    """Six or more distinct ports looks like service recon; one port is a
    basic single-vulnerability attack or host scan; two to five is a
    multi-step (complex) attack."""
    if unique_ports >= 6:
        return ClusterCategory.SERVICE_RECON
    if unique_ports == 1:
        return ClusterCategory.BASIC_ATTACK
    return ClusterCategory.COMPLEX_ATTACK


def summarize_cluster(
    member_keys: Sequence[str],
    sequences: Mapping[str, PortSequence],
    max_exemplars: int = 10,
) -> ClusterSummary:
    distinct_counts = []
    seq_counter: Counter[tuple[int, ...]] = Counter()
    for key in member_keys:
        seq = sequences.get(key)
        if seq is None:
            continue
        distinct_counts.append(seq.unique_ports)
        seq_counter[seq.ports] += 1
    unique_ports = median_low(distinct_counts) if distinct_counts else 1
    ranked = sorted(seq_counter.items(), key=lambda kv: (-kv[1], kv[0]))
    exemplars = tuple(ports for ports, _ in ranked[:max_exemplars])
    return ClusterSummary(
        size=len(member_keys),
        unique_ports=unique_ports,
        exemplars=exemplars,
        category=categorize_cluster(unique_ports),
    )


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows stay zero."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


def _neighbor_lists(points: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices within eps (inclusive) of each point, computed blockwise."""
    n = len(points)
    sq_norms = np.einsum("ij,ij->i", points, points)
    eps2 = eps * eps
    neighbors: list[np.ndarray] = []
    for start in range(0, n, _NEIGHBOR_BLOCK):
        block = points[start : start + _NEIGHBOR_BLOCK]
        d2 = (
            sq_norms[start : start + _NEIGHBOR_BLOCK][:, None]
            + sq_norms[None, :]
            - 2.0 * (block @ points.T)
        )
        np.maximum(d2, 0.0, out=d2)
        for row in d2:
            neighbors.append(np.nonzero(row <= eps2)[0])
    return neighbors


def dbscan_labels(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN labels: -1 noise, otherwise cluster ids numbered by the input
    order of each cluster's first core point.

    Core point: at least min_pts points (itself included) within eps.
    Border points (non-core within eps of a core) attach to the
    lowest-numbered qualifying cluster. Duplicate coordinates are collapsed
    before neighbor search; that changes nothing — identical points always
    share a fate in DBSCAN.
    """
    n = len(points)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    unique, inverse, counts = np.unique(
        points, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    u = len(unique)
    # order unique points by first appearance so cluster numbering matches a
    # plain scan over the raw input
    first_pos = np.full(u, n, dtype=np.int64)
    np.minimum.at(first_pos, inverse, np.arange(n, dtype=np.int64))
    scan_order = np.argsort(first_pos, kind="stable")

    neighbors = _neighbor_lists(unique, eps)
    weight_within = np.array(
        [counts[nb].sum() for nb in neighbors], dtype=np.int64
    )
    core = weight_within >= min_pts

    labels_u = np.full(u, -1, dtype=np.int64)
    cid = 0
    for seed in scan_order:
        if not core[seed] or labels_u[seed] != -1:
            continue
        stack = [int(seed)]
        labels_u[seed] = cid
        while stack:
            node = stack.pop()
            for nb in neighbors[node]:
                if core[nb] and labels_u[nb] == -1:
                    labels_u[nb] = cid
                    stack.append(int(nb))
        cid += 1

    for idx in range(u):
        if core[idx] or labels_u[idx] != -1:
            continue
        candidates = [int(labels_u[nb]) for nb in neighbors[idx] if core[nb]]
        if candidates:
            labels_u[idx] = min(candidates)

    return labels_u[inverse]


def kmeans_labels(
    points: np.ndarray, k: int, seed: int = 1, iters: int = 50
) -> np.ndarray:
    """Plain Lloyd's k-means with seeded k-means++ init. Exists to show the
    window clusterer is not tied to DBSCAN; labels are compacted so every
    id in [0, #clusters) is used."""
    n = len(points)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    k = min(k, n)
    rng = np.random.default_rng(seed)

    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.full(n, np.inf)
    for j in range(1, k):
        d2 = np.minimum(d2, ((points - centers[j - 1]) ** 2).sum(axis=1))
        total = d2.sum()
        if total <= 0:
            centers[j:] = points[rng.integers(n, size=k - j)]
            break
        centers[j] = points[np.searchsorted(np.cumsum(d2 / total), rng.random())]

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dists.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)

    # compact ids in order of first appearance
    remap: dict[int, int] = {}
    out = np.empty(n, dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = remap.setdefault(int(lab), len(remap))
    return out


def cluster_window(
    vectors: Sequence[SequenceVector],
    config: ClustererConfig = ClustererConfig(),
    sequences: Mapping[str, PortSequence] | None = None,
    window_index: int | None = None,
) -> WindowClustering:
    """Partition one window's sequence vectors into clusters plus noise.

    With `sequences` provided, each cluster carries a summary (size, median
    distinct ports, exemplar sequences, category).
    """
    if window_index is None:
        window_index = vectors[0].window_index if vectors else 0
    if not vectors:
        return WindowClustering(window_index, (), frozenset())

    dims = {v.dim for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"mixed vector dimensions in window: {sorted(dims)}")
    matrix = np.stack([v.vector for v in vectors])
    if config.metric == "euclidean-on-normalized":
        matrix = normalize_rows(matrix)

    if config.algorithm == "kmeans":
        labels = kmeans_labels(matrix, config.kmeans_k, config.seed)
    else:
        labels = dbscan_labels(matrix, config.eps, config.min_pts)

    keys = [v.key for v in vectors]
    groups: dict[int, list[str]] = {}
    noise: list[str] = []
    for key, label in zip(keys, labels):
        if label == -1:
            noise.append(key)
        else:
            groups.setdefault(int(label), []).append(key)

    clusters = []
    for cid in sorted(groups):
        members = groups[cid]
        summary = summarize_cluster(members, sequences) if sequences is not None else None
        clusters.append(Cluster(id=cid, members=frozenset(members), summary=summary))
    return WindowClustering(
        window_index=window_index, clusters=tuple(clusters), noise=frozenset(noise)
    )
