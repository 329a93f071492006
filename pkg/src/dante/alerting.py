"""Alert rules over a processed window: novel clusters above a size floor,
recurrences of analyst-flagged concepts, and volume spikes on tracked ones."""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from dante.clustering import ClusterCategory
from dante.concepts import ConceptRegistry, Severity


class AlertKind(Enum):
    NOVEL_CLUSTER = "NovelCluster"
    MALICIOUS_RECURRENCE = "MaliciousRecurrence"
    SIZE_SPIKE = "SizeSpike"


@dataclass(frozen=True)
class AlertRules:
    min_cluster_size: int = 100  # NovelCluster floor
    spike_factor: float = 3.0  # SizeSpike: current > factor * trailing mean
    trailing_windows: int = 24

    def __post_init__(self):
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if self.spike_factor <= 1.0:
            raise ValueError("spike_factor must exceed 1")
        if self.trailing_windows < 1:
            raise ValueError("trailing_windows must be >= 1")


@dataclass(frozen=True)
class ClusterOutcome:
    """What the pipeline decided for one cluster of one window."""

    window_index: int
    cluster_id: int
    concept_id: str
    decision: str  # "mapped" | "recovered" | "novel"
    size: int
    category: ClusterCategory
    exemplars: tuple[tuple[int, ...], ...] = ()
    members: frozenset[str] = frozenset()
    score: float | None = None  # classifier score (recovered/novel)
    jaccard: float | None = None  # tracker overlap (mapped)


@dataclass(frozen=True)
class Alert:
    window_index: int
    kind: AlertKind
    concept_id: str
    size: int
    category: ClusterCategory
    exemplars: tuple[tuple[int, ...], ...]
    emitted_at: str  # event time (window end), keeps replays byte-identical
    countries: dict[str, int] | None = None

    def to_json_line(self) -> str:
        obj = {
            "window": self.window_index,
            "kind": self.kind.value,
            "concept": self.concept_id,
            "size": self.size,
            "category": self.category.value,
            "exemplars": [list(e) for e in self.exemplars],
            "ts": self.emitted_at,
        }
        if self.countries is not None:
            obj["countries"] = self.countries
        return json.dumps(obj, sort_keys=True)


class CountryTable:
    """Static IP-prefix -> country map for optional alert enrichment."""

    def __init__(self, entries: Iterable[tuple[str, str]]):
        nets = []
        for prefix, country in entries:
            nets.append((ipaddress.ip_network(prefix), country))
        # longest prefix wins
        self._nets = sorted(nets, key=lambda item: -item[0].prefixlen)

    @classmethod
    def load(cls, path: str) -> "CountryTable":
        entries = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                prefix, country = line.split()
                entries.append((prefix, country))
        return cls(entries)

    def lookup(self, ip: str) -> str | None:
        addr = ipaddress.ip_address(ip)
        for net, country in self._nets:
            if addr in net:
                return country
        return None

    def histogram(self, ips: Iterable[str]) -> dict[str, int]:
        hist: dict[str, int] = {}
        for ip in ips:
            country = self.lookup(ip) or "??"
            hist[country] = hist.get(country, 0) + 1
        return dict(sorted(hist.items()))


SizeHistory = Mapping[str, Sequence[tuple[int, int]]]  # concept -> [(window, size)]


def trailing_mean_size(
    history: SizeHistory, concept_id: str, window_index: int, trailing: int
) -> float | None:
    """Mean size over the concept's appearances in the preceding `trailing`
    windows; None when it never appeared there."""
    sizes = [
        size
        for w, size in history.get(concept_id, ())
        if window_index - trailing <= w < window_index
    ]
    if not sizes:
        return None
    return sum(sizes) / len(sizes)


def evaluate_rules(
    outcomes: Sequence[ClusterOutcome],
    registry: ConceptRegistry,
    rules: AlertRules,
    history: SizeHistory,
    window_end_iso: str,
    countries: CountryTable | None = None,
) -> list[Alert]:
    """Evaluate all alert rules for one fully processed window.

    Pure given its inputs; re-running on the same window yields the same
    alerts. At most one alert per (rule, concept) fires per window.
    `history` must not yet include the current window's sizes.
    """
    alerts: list[Alert] = []
    seen: set[tuple[AlertKind, str]] = set()

    def emit(kind: AlertKind, outcome: ClusterOutcome) -> None:
        if (kind, outcome.concept_id) in seen:
            return
        if outcome.concept_id not in registry:
            return
        seen.add((kind, outcome.concept_id))
        hist = countries.histogram(outcome.members) if countries is not None else None
        alerts.append(
            Alert(
                window_index=outcome.window_index,
                kind=kind,
                concept_id=outcome.concept_id,
                size=outcome.size,
                category=outcome.category,
                exemplars=outcome.exemplars,
                emitted_at=window_end_iso,
                countries=hist,
            )
        )

    for outcome in outcomes:
        if outcome.decision == "novel" and outcome.size >= rules.min_cluster_size:
            emit(AlertKind.NOVEL_CLUSTER, outcome)

    for outcome in outcomes:
        if outcome.decision in ("mapped", "recovered"):
            model = registry.models.get(outcome.concept_id)
            if model is not None and model.severity is Severity.MALICIOUS:
                emit(AlertKind.MALICIOUS_RECURRENCE, outcome)

    for outcome in outcomes:
        if outcome.decision not in ("mapped", "recovered"):
            continue
        mean = trailing_mean_size(
            history, outcome.concept_id, outcome.window_index, rules.trailing_windows
        )
        if mean is not None and outcome.size > rules.spike_factor * mean:
            emit(AlertKind.SIZE_SPIKE, outcome)

    return alerts
