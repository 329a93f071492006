"""End-to-end pipeline: ingest -> windows -> embed -> cluster -> track ->
recover/discover -> alerts, with a checkpoint after every window so a killed
run resumes to byte-identical outputs."""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator

import numpy as np

from dante.alerting import ClusterOutcome, CountryTable, evaluate_rules
from dante.clustering import Cluster, WindowClustering, cluster_window
from dante.concepts import ConceptRegistry, Severity, recover_or_discover
from dante.config import PipelineConfig
from dante.embedding import EmbeddingTable, embed_sequence
from dante.flows import FlowRecord, RejectLog, filter_low_volume_sources, merge_streams, parse_flow_log
from dante.tracking import ClusterMapping, map_clusters
from dante.windows import Window, WindowerStats, assign_windows, extract_sequences

log = logging.getLogger("dante.pipeline")

STATE_FILE = "state.json"
REGISTRY_FILE = "registry.jsonl"
ALERTS_FILE = "alerts.jsonl"
TIMELINE_FILE = "timeline.jsonl"
REPORTS_DIR = "reports"


def _utc_iso(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def report_path(state_dir: str, window_index: int) -> str:
    return os.path.join(state_dir, REPORTS_DIR, f"window_{window_index:06d}.json")


@dataclass
class RunSummary:
    windows: int = 0
    records: int = 0
    filtered_records: int = 0
    sequences: int = 0
    concepts: int = 0
    alerts: int = 0
    rejected_lines: int = 0
    late_dropped: int = 0

    def format(self) -> str:
        return (
            f"windows={self.windows} records={self.records} "
            f"kept={self.filtered_records} sequences={self.sequences} "
            f"concepts={self.concepts} alerts={self.alerts} "
            f"rejects={self.rejected_lines} late_dropped={self.late_dropped}"
        )


class Pipeline:
    """Single-writer pipeline over one state directory.

    API readers only ever see committed files; label submissions queue up
    and apply at the next window boundary.
    """

    def __init__(self, config: PipelineConfig):
        config.validate_paths()
        self.config = config
        self.table = EmbeddingTable.load(config.embedding_table)
        self.countries = (
            CountryTable.load(config.country_table) if config.country_table else None
        )
        self.state_dir = config.state_dir
        os.makedirs(os.path.join(self.state_dir, REPORTS_DIR), exist_ok=True)

        self.registry = ConceptRegistry(beta=config.beta)
        self.last_window = -1
        self.base_ms: int | None = None
        self.prev_members: dict[int, frozenset[str]] = {}
        self.prev_concepts: dict[int, str] = {}
        self.size_history: dict[str, list[tuple[int, int]]] = {}
        self.alerts_bytes = 0
        self.timeline_bytes = 0
        self.summary = RunSummary()

        self._labels: list[dict] = []
        self._labels_lock = threading.Lock()

        self._load_state()

    # -- state persistence --------------------------------------------------

    def _state_path(self) -> str:
        return os.path.join(self.state_dir, STATE_FILE)

    def _load_state(self) -> None:
        path = self._state_path()
        if not os.path.exists(path):
            return
        with open(path, "r", encoding="utf-8") as fh:
            state = json.load(fh)
        if state.get("config_digest") != self.config.digest():
            raise RuntimeError(
                "state directory was produced by a different configuration; "
                "use a fresh --state-dir or restore the old config"
            )
        self.last_window = state["last_window"]
        self.base_ms = state["base_ms"]
        self.prev_members = {
            int(cid): frozenset(members)
            for cid, members in state["prev_clusters"].items()
        }
        self.prev_concepts = {int(c): cid for c, cid in state["prev_concepts"].items()}
        self.size_history = {
            cid: [(int(w), int(s)) for w, s in pairs]
            for cid, pairs in state["size_history"].items()
        }
        self.alerts_bytes = state["alerts_bytes"]
        self.timeline_bytes = state["timeline_bytes"]
        registry_path = os.path.join(self.state_dir, REGISTRY_FILE)
        if os.path.exists(registry_path):
            self.registry = ConceptRegistry.load(registry_path)
        # drop any partially written lines from an interrupted window
        self._truncate(os.path.join(self.state_dir, ALERTS_FILE), self.alerts_bytes)
        self._truncate(os.path.join(self.state_dir, TIMELINE_FILE), self.timeline_bytes)
        log.info("resuming after window %d", self.last_window)

    @staticmethod
    def _truncate(path: str, size: int) -> None:
        if os.path.exists(path) and os.path.getsize(path) > size:
            with open(path, "r+b") as fh:
                fh.truncate(size)

    def _checkpoint(self) -> None:
        self.registry.save(os.path.join(self.state_dir, REGISTRY_FILE) + ".tmp")
        os.replace(
            os.path.join(self.state_dir, REGISTRY_FILE) + ".tmp",
            os.path.join(self.state_dir, REGISTRY_FILE),
        )
        state = {
            "v": 1,
            "config_digest": self.config.digest(),
            "last_window": self.last_window,
            "base_ms": self.base_ms,
            "prev_clusters": {
                str(cid): sorted(members) for cid, members in self.prev_members.items()
            },
            "prev_concepts": {str(c): cid for c, cid in self.prev_concepts.items()},
            "size_history": {
                cid: [[w, s] for w, s in pairs]
                for cid, pairs in self.size_history.items()
            },
            "alerts_bytes": self.alerts_bytes,
            "timeline_bytes": self.timeline_bytes,
        }
        write_atomic(self._state_path(), json.dumps(state, sort_keys=True))

    def _append(self, filename: str, lines: list[str]) -> int:
        """Append lines and return the resulting byte size of the file."""
        path = os.path.join(self.state_dir, filename)
        with open(path, "a", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return os.path.getsize(path)

    # -- labels -------------------------------------------------------------

    def submit_label(
        self, concept_id: str, severity: str, note: str = "", author: str = "analyst",
        key: str | None = None,
    ) -> None:
        """Queue an annotation; it takes effect at the next window boundary."""
        Severity(severity)  # validate early
        with self._labels_lock:
            self._labels.append(
                {"concept": concept_id, "severity": severity, "note": note,
                 "author": author, "key": key}
            )

    def _apply_labels(self) -> None:
        with self._labels_lock:
            pending, self._labels = self._labels, []
        if not pending:
            return
        for item in pending:
            try:
                self.registry.annotate(
                    item["concept"],
                    item["severity"],
                    note=item["note"],
                    author=item["author"],
                    key=item["key"],
                )
            except KeyError:
                log.warning("label for unknown concept %s dropped", item["concept"])
        self._checkpoint()

    # -- core ---------------------------------------------------------------

    def _seed_for(self, window_index: int, ordinal: int) -> int:
        seq = np.random.SeedSequence((self.config.seed, window_index, ordinal))
        return int(seq.generate_state(1)[0])

    def process_window(self, window: Window, records: list[FlowRecord]) -> dict:
        """Run one window through the full stack and commit its outputs."""
        cfg = self.config
        kept = filter_low_volume_sources(records, cfg.min_packets)
        sequences = extract_sequences(
            kept, window.index, key_mode=cfg.sequence_key, max_seq_len=cfg.max_seq_len
        )
        seq_by_key = {s.key: s for s in sequences}
        vectors = [embed_sequence(s, self.table) for s in sequences]
        clustering = cluster_window(
            vectors, cfg.clusterer, sequences=seq_by_key, window_index=window.index
        )

        if self.prev_members and window.index > 0:
            prev = WindowClustering(
                window_index=window.index - 1,
                clusters=tuple(
                    Cluster(id=cid, members=members)
                    for cid, members in sorted(self.prev_members.items())
                ),
                noise=frozenset(),
            )
            mapping = map_clusters(prev, clustering, cfg.jaccard_threshold)
        else:
            mapping = ClusterMapping(
                window_index=window.index,
                unmapped=frozenset(c.id for c in clustering.clusters),
            )

        vec_by_key = {v.key: v for v in vectors}
        outcomes: list[ClusterOutcome] = []
        concept_of: dict[int, str] = {}
        for cluster in clustering.clusters:
            summary = cluster.summary
            if cluster.id in mapping.entries:
                concept_id = self.prev_concepts[mapping.entries[cluster.id]]
                model = self.registry.get(concept_id)
                model.last_seen = window.index
                model.occurrence_count += 1
                decision = "mapped"
                score = None
                jacc = mapping.scores.get(cluster.id)
            else:
                members = cluster.members
                cluster_vecs = [vec_by_key[k] for k in cluster.members_sorted()]
                rest = [v for v in vectors if v.key not in members]
                result = recover_or_discover(
                    cluster_vecs,
                    rest,
                    self.registry,
                    window.index,
                    category=summary.category,
                    exemplars=summary.exemplars,
                    seed=self._seed_for(window.index, cluster.id),
                )
                concept_id = result.concept_id
                decision = result.kind
                score = result.score
                jacc = None
            concept_of[cluster.id] = concept_id
            outcomes.append(
                ClusterOutcome(
                    window_index=window.index,
                    cluster_id=cluster.id,
                    concept_id=concept_id,
                    decision=decision,
                    size=cluster.size,
                    category=summary.category,
                    exemplars=summary.exemplars,
                    members=cluster.members,
                    score=score,
                    jaccard=jacc,
                )
            )

        window_end_iso = _utc_iso(window.end_ms)
        alerts = evaluate_rules(
            outcomes, self.registry, cfg.rules, self.size_history, window_end_iso,
            countries=self.countries,
        )

        for outcome in outcomes:
            self.size_history.setdefault(outcome.concept_id, []).append(
                (window.index, outcome.size)
            )
        horizon = window.index - max(cfg.rules.trailing_windows * 4, 96)
        for cid in list(self.size_history):
            trimmed = [(w, s) for w, s in self.size_history[cid] if w >= horizon]
            if trimmed:
                self.size_history[cid] = trimmed
            else:
                del self.size_history[cid]

        report = {
            "v": 1,
            "window": window.index,
            "start_ms": window.start_ms,
            "end_ms": window.end_ms,
            "records": len(records),
            "filtered_records": len(kept),
            "sequences": len(sequences),
            "noise": {"size": len(clustering.noise)},
            "clusters": [
                {
                    "cluster": o.cluster_id,
                    "concept": o.concept_id,
                    "decision": o.decision,
                    "size": o.size,
                    "category": o.category.value,
                    "unique_ports": clustering.clusters[o.cluster_id].summary.unique_ports,
                    "score": o.score,
                    "jaccard": o.jaccard,
                    "exemplars": [list(e) for e in o.exemplars[:10]],
                }
                for o in outcomes
            ],
        }

        # commit order matters for resume: report, logs, registry, state last
        write_atomic(
            report_path(self.state_dir, window.index),
            json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n",
        )
        self.alerts_bytes = self._append(
            ALERTS_FILE, [a.to_json_line() for a in alerts]
        )
        timeline_line = json.dumps(
            {
                "window": window.index,
                "noise": len(clustering.noise),
                "sizes": {o.concept_id: o.size for o in outcomes},
            },
            sort_keys=True,
        )
        self.timeline_bytes = self._append(TIMELINE_FILE, [timeline_line])

        self.prev_members = {c.id: c.members for c in clustering.clusters}
        self.prev_concepts = concept_of
        self.last_window = window.index
        self._checkpoint()

        self.summary.windows += 1
        self.summary.records += len(records)
        self.summary.filtered_records += len(kept)
        self.summary.sequences += len(sequences)
        self.summary.alerts += len(alerts)
        self.summary.concepts = len(self.registry)
        log.info(
            "window %d: %d records, %d sequences, %d clusters, %d alerts",
            window.index, len(records), len(sequences), len(clustering.clusters), len(alerts),
        )
        return report

    def run(
        self,
        sources: list[IO | Iterable[str]],
        stop_after: int | None = None,
    ) -> RunSummary:
        """Process input streams until exhausted (or stop_after windows).

        With persisted state present, already-committed windows are skipped
        and processing continues from the next index.
        """
        rejects = RejectLog()
        streams = [
            parse_flow_log(src, self.config.input_format, rejects) for src in sources
        ]
        merged: Iterator[FlowRecord] = (
            merge_streams(streams) if len(streams) > 1 else streams[0]
        )
        wstats = WindowerStats()
        processed = 0
        for window, records in assign_windows(
            merged,
            self.config.window,
            lateness_min=self.config.lateness_min,
            base_ms=self.base_ms,
            stats=wstats,
        ):
            if self.base_ms is None:
                self.base_ms = window.start_ms
            if window.index <= self.last_window:
                continue
            self.process_window(window, records)
            self._apply_labels()
            processed += 1
            if stop_after is not None and processed >= stop_after:
                break
        self.summary.rejected_lines = rejects.total
        self.summary.late_dropped = wstats.late_dropped
        return self.summary
