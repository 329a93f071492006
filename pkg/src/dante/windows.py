"""Overlapping sliding windows over the record stream and per-source port
sequence extraction."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from typing import Iterable, Iterator

from dante.flows import FlowRecord

MS_PER_MIN = 60_000
MS_PER_HOUR = 3_600_000

DEFAULT_MAX_SEQ_LEN = 100_000


@dataclass(frozen=True)
class WindowConfig:
    """Window length L and step S, both in minutes.

    Adjacent windows overlap by L - S minutes; the overlap ratio
    (L - S) / L must land in [0.2, 0.8] or cluster tracking degrades.
    """

    length_min: int = 240
    step_min: int = 60

    def __post_init__(self):
        if self.step_min <= 0 or self.length_min <= 0:
            raise ValueError("window length and step must be positive")
        if self.step_min >= self.length_min:
            raise ValueError("step must be smaller than window length")
        r = self.overlap_ratio
        if not 0.2 <= r <= 0.8:
            raise ValueError(
                f"overlap ratio {r:.3f} outside [0.2, 0.8]; adjust L or S"
            )

    @property
    def overlap_ratio(self) -> float:
        return (self.length_min - self.step_min) / self.length_min

    @property
    def length_ms(self) -> int:
        return self.length_min * MS_PER_MIN

    @property
    def step_ms(self) -> int:
        return self.step_min * MS_PER_MIN


def overlap_ratio(config: WindowConfig) -> float:
    """Fraction of observation time shared by two adjacent windows."""
    return config.overlap_ratio


@dataclass(frozen=True)
class Window:
    index: int
    start_ms: int
    end_ms: int  # exclusive

    def contains(self, ts_ms: int) -> bool:
        return self.start_ms <= ts_ms < self.end_ms


@dataclass(frozen=True)
class PortSequence:
    """Time-ordered destination ports of one source within one window."""

    key: str  # src_ip, or "src|dst" in src-dst mode
    window_index: int
    ports: tuple[int, ...]
    truncated: bool = False

    def __post_init__(self):
        if not self.ports:
            raise ValueError("port sequence must be non-empty")

    @property
    def unique_ports(self) -> int:
        return len(set(self.ports))


@dataclass
class WindowerStats:
    late_dropped: int = 0  # (record, window) assignments lost to lateness


def floor_to_hour(ts_ms: int) -> int:
    return (ts_ms // MS_PER_HOUR) * MS_PER_HOUR


def assign_windows(
    records: Iterable[FlowRecord],
    config: WindowConfig,
    lateness_min: int = 5,
    base_ms: int | None = None,
    stats: WindowerStats | None = None,
) -> Iterator[tuple[Window, list[FlowRecord]]]:
    """Assign each record to every window whose [start, end) contains it and
    emit windows in index order.

    A window closes once the stream's max timestamp passes its end plus the
    lateness bound. Records targeting already-closed windows are dropped for
    those windows (counted in stats). Gaps produce empty windows so indices
    stay unbroken. Window 0 starts at the first record's timestamp floored
    to the hour unless base_ms pins it explicitly.
    """
    length = config.length_ms
    step = config.step_ms
    late_ms = lateness_min * MS_PER_MIN

    open_windows: dict[int, list[FlowRecord]] = {}
    next_emit = 0
    max_index = -1
    max_seen: int | None = None
    base = base_ms

    def make_window(index: int) -> Window:
        start = base + index * step
        return Window(index, start, start + length)

    for rec in records:
        t = rec.ts_ms
        if base is None:
            base = floor_to_hour(t)
        if max_seen is None or t > max_seen:
            max_seen = t
        # close every window whose lateness horizon has passed
        while next_emit <= max_index and base + next_emit * step + length + late_ms <= max_seen:
            yield make_window(next_emit), open_windows.pop(next_emit, [])
            next_emit += 1

        i_max = (t - base) // step
        i_min = (t - base - length) // step + 1
        if i_min < 0:
            i_min = 0
        if i_max < next_emit:
            if stats is not None:
                stats.late_dropped += max(i_max - i_min + 1, 0)
            continue
        for i in range(i_min, i_max + 1):
            if i < next_emit:
                if stats is not None:
                    stats.late_dropped += 1
                continue
            open_windows.setdefault(i, []).append(rec)
        if i_max > max_index:
            max_index = i_max

    for i in range(next_emit, max_index + 1):
        yield make_window(i), open_windows.pop(i, [])


def _ip_sort_key(ip: str) -> int:
    return int(ipaddress.IPv4Address(ip))


def extract_sequences(
    window_records: Iterable[FlowRecord],
    window_index: int,
    key_mode: str = "src",
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> list[PortSequence]:
    """Group one window's records into per-source port sequences.

    Ports are ordered by timestamp; equal timestamps break ties by
    (dst_ip, dst_port) ascending so extraction is deterministic. Sequences
    longer than max_seq_len are cut and flagged.
    """
    if key_mode not in ("src", "src-dst"):
        raise ValueError(f"unknown sequence key mode {key_mode!r}")
    ordered = sorted(
        window_records, key=lambda r: (r.ts_ms, _ip_sort_key(r.dst_ip), r.dst_port)
    )
    groups: dict[str, list[int]] = {}
    for rec in ordered:
        key = rec.src_ip if key_mode == "src" else f"{rec.src_ip}|{rec.dst_ip}"
        groups.setdefault(key, []).append(rec.dst_port)

    sequences = []
    for key in sorted(groups):
        ports = groups[key]
        truncated = len(ports) > max_seq_len
        if truncated:
            ports = ports[:max_seq_len]
        sequences.append(
            PortSequence(key=key, window_index=window_index, ports=tuple(ports), truncated=truncated)
        )
    return sequences
