"""Port embeddings: skip-gram training with negative sampling over port
sequences, sequence vectors as the mean of port vectors, and a plain-text
table format so the trained model itself never needs to be kept."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from dante.flows import MAX_PORT
from dante.windows import PortSequence

RARE_TOKEN = "__RARE__"
TABLE_HEADER = "dante-embeddings v1"


class CorpusError(ValueError):
    """Corpus unusable for training (empty, or no co-occurrence signal)."""


class TableFormatError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 32
    context_window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 5
    seed: int = 1
    # sequences longer than this contribute a sampled subset of center
    # positions per epoch; sequence averaging is unaffected
    long_sequence_cap: int = 1000

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        for name in ("context_window", "negative_samples", "epochs", "min_count", "long_sequence_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def digest(self) -> str:
        text = (
            f"dim={self.dim} window={self.context_window} neg={self.negative_samples} "
            f"epochs={self.epochs} lr={self.learning_rate!r} min_count={self.min_count} "
            f"seed={self.seed} cap={self.long_sequence_cap}"
        )
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SequenceVector:
    key: str
    window_index: int
    vector: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


class EmbeddingTable:
    """Immutable port -> vector map; the only artifact kept after training."""

    def __init__(
        self,
        dim: int,
        vectors: dict[int, np.ndarray],
        rare: np.ndarray | None,
        trained_on: str = "",
    ):
        if len(vectors) > MAX_PORT + 1:
            raise ValueError("more entries than there are ports")
        self.dim = dim
        self._vectors = {}
        for port, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dim,):
                raise ValueError(f"port {port}: vector has shape {arr.shape}, want ({dim},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"port {port}: vector has non-finite components")
            arr.flags.writeable = False
            self._vectors[port] = arr
        if rare is not None:
            rare = np.asarray(rare, dtype=np.float64)
            if rare.shape != (dim,):
                raise ValueError("rare-port vector has wrong dimension")
            rare.flags.writeable = False
        self.rare = rare
        self.trained_on = trained_on
        self._ports: list[int] | None = None
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, port: int) -> bool:
        return port in self._vectors

    @property
    def ports(self) -> list[int]:
        if self._ports is None:
            self._ports = sorted(self._vectors)
        return self._ports

    def vector_for(self, port: int) -> np.ndarray:
        """Vector for a port, falling back to the shared rare-port vector."""
        vec = self._vectors.get(port)
        if vec is not None:
            return vec
        if self.rare is None:
            raise KeyError(f"port {port} not in table and no rare-port vector present")
        return self.rare

    def _dense(self) -> tuple[list[int], np.ndarray]:
        if self._matrix is None:
            ports = self.ports
            self._matrix = np.stack([self._vectors[p] for p in ports]) if ports else np.zeros((0, self.dim))
        return self.ports, self._matrix

    def entries_equal(self, other: "EmbeddingTable") -> bool:
        if self.dim != other.dim or set(self._vectors) != set(other._vectors):
            return False
        if (self.rare is None) != (other.rare is None):
            return False
        if self.rare is not None and not np.array_equal(self.rare, other.rare):
            return False
        return all(np.array_equal(self._vectors[p], other._vectors[p]) for p in self._vectors)

    def save(self, sink: IO[str] | str) -> None:
        if isinstance(sink, str):
            with open(sink, "w", encoding="utf-8") as fh:
                self.save(fh)
            return
        header = f"{TABLE_HEADER} dim={self.dim}"
        if self.trained_on:
            header += f" trained={self.trained_on}"
        sink.write(header + "\n")
        for port in self.ports:
            values = " ".join(repr(float(x)) for x in self._vectors[port])
            sink.write(f"{port} {values}\n")
        if self.rare is not None:
            values = " ".join(repr(float(x)) for x in self.rare)
            sink.write(f"{RARE_TOKEN} {values}\n")

    @classmethod
    def load(cls, source: IO[str] | str) -> "EmbeddingTable":
        if isinstance(source, str):
            with open(source, "r", encoding="utf-8") as fh:
                return cls.load(fh)
        lines = iter(enumerate(source, start=1))
        try:
            _, header = next(lines)
        except StopIteration:
            raise TableFormatError("empty file, expected header") from None
        tokens = header.split()
        if tokens[:2] != TABLE_HEADER.split():
            raise TableFormatError(f"bad header {header.strip()!r}", 1)
        dim = None
        trained_on = ""
        for tok in tokens[2:]:
            if tok.startswith("dim="):
                try:
                    dim = int(tok[4:])
                except ValueError:
                    raise TableFormatError(f"bad dim token {tok!r}", 1) from None
            elif tok.startswith("trained="):
                trained_on = tok[8:]
        if dim is None or dim < 1:
            raise TableFormatError("header missing dim=<n>", 1)

        vectors: dict[int, np.ndarray] = {}
        rare = None
        for line_no, line in lines:
            if not line.strip():
                continue
            parts = line.split()
            token, values = parts[0], parts[1:]
            if len(values) != dim:
                raise TableFormatError(
                    f"expected {dim} components, got {len(values)}", line_no
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise TableFormatError("non-numeric vector component", line_no) from None
            if token == RARE_TOKEN:
                if rare is not None:
                    raise TableFormatError(f"duplicate {RARE_TOKEN} entry", line_no)
                rare = vec
                continue
            try:
                port = int(token)
            except ValueError:
                raise TableFormatError(f"bad port {token!r}", line_no) from None
            if not 0 <= port <= MAX_PORT:
                raise TableFormatError(f"port {port} out of range", line_no)
            if port in vectors:
                raise TableFormatError(f"duplicate port {port}", line_no)
            vectors[port] = vec
        return cls(dim=dim, vectors=vectors, rare=rare, trained_on=trained_on)


def _as_port_lists(corpus: Iterable) -> list[list[int]]:
    out = []
    for seq in corpus:
        ports = list(seq.ports) if isinstance(seq, PortSequence) else list(seq)
        if ports:
            out.append(ports)
    return out


def corpus_fingerprint(sequences: Sequence[Sequence[int]]) -> str:
    h = hashlib.sha256()
    for seq in sequences:
        h.update(" ".join(str(p) for p in seq).encode())
        h.update(b"\n")
    return h.hexdigest()[:12]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def train(corpus: Iterable, config: TrainConfig = TrainConfig()) -> EmbeddingTable:
    """Train port embeddings with skip-gram + negative sampling.

    Single-threaded on purpose: a fixed seed reproduces the table bit for
    bit. Ports below min_count train as one shared rare token.
    """
    sequences = _as_port_lists(corpus)
    if not sequences:
        raise CorpusError("empty corpus")
    fingerprint = corpus_fingerprint(sequences)

    counts: dict[int, int] = {}
    for seq in sequences:
        for p in seq:
            if not 0 <= p <= MAX_PORT:
                raise ValueError(f"port {p} out of range in corpus")
            counts[p] = counts.get(p, 0) + 1

    vocab_ports = sorted(p for p, c in counts.items() if c >= config.min_count)
    rare_total = sum(c for p, c in counts.items() if c < config.min_count)
    index = {p: i for i, p in enumerate(vocab_ports)}
    # the rare slot always exists in the output table; it only trains when
    # rare ports actually occur
    rare_index = len(vocab_ports)
    n_rows = rare_index + 1

    distinct_tokens = len(vocab_ports) + (1 if rare_total > 0 else 0)
    if distinct_tokens < 2:
        raise CorpusError(
            "corpus has fewer than two distinct tokens; no context pairs to train on"
        )

    token_seqs = [
        np.array([index.get(p, rare_index) for p in seq], dtype=np.int64)
        for seq in sequences
    ]

    # negative-sampling distribution: unigram ^ 0.75 over tokens
    freqs = np.zeros(n_rows, dtype=np.float64)
    for p, c in counts.items():
        freqs[index.get(p, rare_index)] += c
    noise = freqs ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())

    rng = np.random.default_rng(config.seed)
    dim = config.dim
    syn0 = (rng.random((n_rows, dim)) - 0.5) / dim
    syn1 = np.zeros((n_rows, dim), dtype=np.float64)

    centers_per_epoch = sum(min(len(s), config.long_sequence_cap) for s in token_seqs)
    total_centers = max(config.epochs * centers_per_epoch, 1)
    lr0 = config.learning_rate
    neg = config.negative_samples
    win = config.context_window
    labels = np.zeros(neg + 1)
    labels[0] = 1.0

    processed = 0
    for _ in range(config.epochs):
        for seq in token_seqs:
            k = len(seq)
            if k > config.long_sequence_cap:
                positions = np.sort(
                    rng.choice(k, size=config.long_sequence_cap, replace=False)
                )
            else:
                positions = range(k)
            for i in positions:
                lr = lr0 * max(1.0 - processed / total_centers, 1e-4)
                processed += 1
                center = seq[i]
                b = int(rng.integers(1, win + 1))
                lo = i - b if i - b > 0 else 0
                hi = i + b + 1 if i + b + 1 < k else k
                for j in range(lo, hi):
                    if j == i:
                        continue
                    context = seq[j]
                    negatives = np.searchsorted(noise_cdf, rng.random(neg))
                    targets = np.empty(neg + 1, dtype=np.int64)
                    targets[0] = context
                    targets[1:] = negatives
                    v = syn0[center]
                    u = syn1[targets]
                    g = (labels - _sigmoid(u @ v)) * lr
                    # a sampled negative equal to the true context would get
                    # both labels; skip its update
                    g[1:][negatives == context] = 0.0
                    np.add.at(syn1, targets, g[:, None] * v[None, :])
                    syn0[center] += g @ u

    vectors = {p: syn0[index[p]].copy() for p in vocab_ports}
    rare_vec = syn0[rare_index].copy()
    trained_on = f"{fingerprint}:{config.digest()}"
    return EmbeddingTable(dim=dim, vectors=vectors, rare=rare_vec, trained_on=trained_on)


def embed_sequence(seq: PortSequence, table: EmbeddingTable) -> SequenceVector:
    """Sequence vector: the arithmetic mean of the ports' embedding vectors.

    Rare or unseen ports contribute the shared rare-port vector. Always uses
    the full sequence, however long.
    """
    rows = np.stack([table.vector_for(p) for p in seq.ports])
    return SequenceVector(
        key=seq.key, window_index=seq.window_index, vector=rows.mean(axis=0)
    )


def nearest_ports(
    port: int, table: EmbeddingTable, k: int = 10
) -> list[tuple[int, float]]:
    """Top-k ports by cosine similarity to the query port, descending;
    similarity ties break toward the lower port number."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if port not in table:
        raise KeyError(f"port {port} not in table")
    ports, matrix = table._dense()
    query = table.vector_for(port)
    qn = float(np.linalg.norm(query))
    norms = np.linalg.norm(matrix, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = (matrix @ query) / (norms * qn)
    sims = np.nan_to_num(sims, nan=0.0)
    scored = [
        (p, float(s)) for p, s in zip(ports, sims) if p != port
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
