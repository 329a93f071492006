"""Pipeline configuration: one JSON file tying together every stage's knobs
plus the state directory layout."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

from dante.alerting import AlertRules
from dante.clustering import ClustererConfig
from dante.windows import WindowConfig


@dataclass(frozen=True)
class PipelineConfig:
    embedding_table: str
    state_dir: str
    window: WindowConfig = field(default_factory=WindowConfig)
    clusterer: ClustererConfig = field(default_factory=ClustererConfig)
    rules: AlertRules = field(default_factory=AlertRules)
    jaccard_threshold: float = 0.3
    beta: float = 0.7
    input_format: str = "csv"
    min_packets: int = 3
    lateness_min: int = 5
    sequence_key: str = "src"
    max_seq_len: int = 100_000
    seed: int = 1
    country_table: str | None = None

    def __post_init__(self):
        if not 0.0 < self.jaccard_threshold < 1.0:
            raise ValueError("jaccard_threshold must be in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.min_packets < 1:
            raise ValueError("min_packets must be >= 1")
        if self.input_format not in ("csv", "jsonl"):
            raise ValueError("input_format must be csv or jsonl")
        if self.sequence_key not in ("src", "src-dst"):
            raise ValueError("sequence_key must be src or src-dst")

    def validate_paths(self) -> None:
        if not os.path.exists(self.embedding_table):
            raise FileNotFoundError(
                f"embedding table {self.embedding_table!r} not found; "
                "run `dante train-embeddings` first"
            )
        if self.country_table is not None and not os.path.exists(self.country_table):
            raise FileNotFoundError(f"country table {self.country_table!r} not found")

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "embedding_table": self.embedding_table,
            "state_dir": self.state_dir,
            "window": {"length_min": self.window.length_min, "step_min": self.window.step_min},
            "clusterer": {
                "eps": self.clusterer.eps,
                "min_pts": self.clusterer.min_pts,
                "metric": self.clusterer.metric,
                "algorithm": self.clusterer.algorithm,
                "kmeans_k": self.clusterer.kmeans_k,
                "seed": self.clusterer.seed,
            },
            "rules": {
                "min_cluster_size": self.rules.min_cluster_size,
                "spike_factor": self.rules.spike_factor,
                "trailing_windows": self.rules.trailing_windows,
            },
            "jaccard_threshold": self.jaccard_threshold,
            "beta": self.beta,
            "input_format": self.input_format,
            "min_packets": self.min_packets,
            "lateness_min": self.lateness_min,
            "sequence_key": self.sequence_key,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
            "country_table": self.country_table,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        window = WindowConfig(**data.get("window", {}))
        clusterer = ClustererConfig(**data.get("clusterer", {}))
        rules = AlertRules(**data.get("rules", {}))
        kwargs = {
            k: data[k]
            for k in (
                "embedding_table",
                "state_dir",
                "jaccard_threshold",
                "beta",
                "input_format",
                "min_packets",
                "lateness_min",
                "sequence_key",
                "max_seq_len",
                "seed",
                "country_table",
            )
            if k in data
        }
        return cls(window=window, clusterer=clusterer, rules=rules, **kwargs)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def digest(self) -> str:
        """Identifies the decision-relevant configuration; resuming under a
        different digest is refused."""
        payload = {k: v for k, v in self.to_dict().items() if k != "state_dir"}
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)
