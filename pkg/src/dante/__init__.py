"""Darknet traffic mining: embed port sequences, cluster them per time
window, track clusters across windows, and alert on novel or recurring
attack concepts."""

__version__ = "0.1.0"

from dante.flows import FlowRecord, Protocol, filter_low_volume_sources, parse_flow_log
from dante.windows import PortSequence, Window, WindowConfig, assign_windows, extract_sequences
from dante.embedding import EmbeddingTable, SequenceVector, TrainConfig, embed_sequence, train
from dante.clustering import ClusterCategory, ClustererConfig, WindowClustering, cluster_window
from dante.tracking import ClusterMapping, jaccard, map_clusters
from dante.concepts import ConceptModel, ConceptRegistry, recover_or_discover
from dante.alerting import Alert, AlertRules, evaluate_rules

__all__ = [
    "FlowRecord",
    "Protocol",
    "parse_flow_log",
    "filter_low_volume_sources",
    "WindowConfig",
    "Window",
    "PortSequence",
    "assign_windows",
    "extract_sequences",
    "TrainConfig",
    "EmbeddingTable",
    "SequenceVector",
    "train",
    "embed_sequence",
    "ClustererConfig",
    "ClusterCategory",
    "WindowClustering",
    "cluster_window",
    "jaccard",
    "map_clusters",
    "ClusterMapping",
    "ConceptModel",
    "ConceptRegistry",
    "recover_or_discover",
    "AlertRules",
    "Alert",
    "evaluate_rules",
]
