"""Map a window's clusters onto the previous window's by member-set Jaccard
overlap. Only member keys matter here; vectors never enter the comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import AbstractSet

from dante.clustering import WindowClustering


def jaccard(a: AbstractSet, b: AbstractSet) -> float:
    """|A∩B| / |A∪B|, with 0.0 for two empty sets."""
    if not a and not b:
        return 0.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


@dataclass
class ClusterMapping:
    """Result of matching current clusters to the previous window's.

    entries maps current-cluster id -> previous-cluster id; ids absent from
    entries are in unmapped and are candidates for recovery or discovery.
    """

    window_index: int
    entries: dict[int, int] = field(default_factory=dict)
    unmapped: frozenset[int] = frozenset()
    scores: dict[int, float] = field(default_factory=dict)  # accepted Jaccard per mapped id


def map_clusters(
    prev: WindowClustering, curr: WindowClustering, threshold: float = 0.3
) -> ClusterMapping:
    """Greedy one-to-one matching on descending Jaccard similarity.

    A pair qualifies only when its Jaccard strictly exceeds the threshold.
    Each previous cluster is consumed at most once; ties break toward the
    lower previous-cluster id, then the lower current id. Noise sets never
    participate.
    """
    if prev.window_index + 1 != curr.window_index:
        raise ValueError(
            f"windows not adjacent: prev={prev.window_index}, curr={curr.window_index}"
        )
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")

    scored = []
    for p in prev.clusters:
        for k in curr.clusters:
            sim = jaccard(p.members, k.members)
            if sim > threshold:
                scored.append((sim, p.id, k.id))
    # independent pairwise scores; the greedy pass below is the only
    # order-sensitive step and it sorts first, so evaluation order is free
    scored.sort(key=lambda item: (-item[0], item[1], item[2]))

    entries: dict[int, int] = {}
    scores: dict[int, float] = {}
    used_prev: set[int] = set()
    for sim, p_id, k_id in scored:
        if k_id in entries or p_id in used_prev:
            continue
        entries[k_id] = p_id
        scores[k_id] = sim
        used_prev.add(p_id)

    unmapped = frozenset(c.id for c in curr.clusters) - entries.keys()
    return ClusterMapping(
        window_index=curr.window_index,
        entries=entries,
        unmapped=frozenset(unmapped),
        scores=scores,
    )
