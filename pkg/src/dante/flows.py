"""Flow-log ingest: parse CSV/JSONL darknet logs into FlowRecords, merge
multiple input streams by timestamp, and drop low-volume sources."""

from __future__ import annotations

import heapq
import ipaddress
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator, Sequence

MAX_PORT = 65535


class Protocol(Enum):
    TCP = "TCP"
    UDP = "UDP"


class FlowParseError(ValueError):
    """A single malformed input line. `reason` is a short stable tag used
    for reject accounting."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class FlowRecord:
    """One darknet packet-header observation."""

    ts_ms: int  # epoch milliseconds, UTC
    src_ip: str
    dst_ip: str
    dst_port: int
    protocol: Protocol
    size: int | None = None  # payload bytes; absent in some feeds

    def __post_init__(self):
        if not 0 <= self.dst_port <= MAX_PORT:
            raise ValueError(f"dst_port {self.dst_port} outside [0, {MAX_PORT}]")
        if self.size is not None and self.size < 0:
            raise ValueError(f"packet size {self.size} is negative")


@dataclass
class SourceStats:
    src_ip: str
    packet_count: int
    first_seen: int  # epoch ms
    last_seen: int


@dataclass
class RejectLog:
    """Counts of skipped input lines, with a bounded sample for diagnostics."""

    total: int = 0
    by_reason: Counter = field(default_factory=Counter)
    samples: list[tuple[int, str]] = field(default_factory=list)
    max_samples: int = 20

    def add(self, line_no: int, reason: str) -> None:
        self.total += 1
        self.by_reason[reason] += 1
        if len(self.samples) < self.max_samples:
            self.samples.append((line_no, reason))


def _parse_ipv4(text: str) -> str:
    text = text.strip()
    if ":" in text:
        raise FlowParseError("ipv6", f"IPv6 address not supported: {text!r}")
    try:
        return str(ipaddress.IPv4Address(text))
    except (ipaddress.AddressValueError, ValueError):
        raise FlowParseError("ipv4", f"not an IPv4 address: {text!r}") from None


def _parse_ts(text) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise FlowParseError("timestamp", f"bad timestamp: {text!r}") from None


def _parse_port(text) -> int:
    try:
        port = int(text)
    except (TypeError, ValueError):
        raise FlowParseError("port", f"bad port: {text!r}") from None
    if not 0 <= port <= MAX_PORT:
        raise FlowParseError("port", f"port {port} outside [0, {MAX_PORT}]")
    return port


def _parse_protocol(text) -> Protocol:
    try:
        return Protocol[str(text).strip().upper()]
    except KeyError:
        raise FlowParseError("protocol", f"unknown protocol: {text!r}") from None


def _parse_size(value) -> int | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = value.strip()
        if value == "":
            return None
    try:
        size = int(value)
    except (TypeError, ValueError):
        raise FlowParseError("size", f"bad packet size: {value!r}") from None
    if size < 0:
        raise FlowParseError("size", f"negative packet size: {size}")
    return size


def parse_csv_line(line: str) -> FlowRecord:
    """Parse `timestamp_ms,src_ip,dst_ip,dst_port,protocol,packet_size`."""
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != 6:
        raise FlowParseError("fields", f"expected 6 CSV fields, got {len(fields)}")
    ts, src, dst, port, proto, size = fields
    return FlowRecord(
        ts_ms=_parse_ts(ts),
        src_ip=_parse_ipv4(src),
        dst_ip=_parse_ipv4(dst),
        dst_port=_parse_port(port),
        protocol=_parse_protocol(proto),
        size=_parse_size(size),
    )


def parse_jsonl_line(line: str) -> FlowRecord:
    """Parse `{"ts":..,"src":..,"dst":..,"dport":..,"proto":..,"size":..}`."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FlowParseError("json", f"bad JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise FlowParseError("json", "JSONL line is not an object")
    missing = {"ts", "src", "dst", "dport", "proto"} - obj.keys()
    if missing:
        raise FlowParseError("fields", f"missing keys: {sorted(missing)}")
    return FlowRecord(
        ts_ms=_parse_ts(obj["ts"]),
        src_ip=_parse_ipv4(str(obj["src"])),
        dst_ip=_parse_ipv4(str(obj["dst"])),
        dst_port=_parse_port(obj["dport"]),
        protocol=_parse_protocol(obj["proto"]),
        size=_parse_size(obj.get("size")),
    )


def to_csv_line(record: FlowRecord) -> str:
    """Canonical CSV form; parse_csv_line(to_csv_line(r)) == r."""
    size = "" if record.size is None else str(record.size)
    return (
        f"{record.ts_ms},{record.src_ip},{record.dst_ip},"
        f"{record.dst_port},{record.protocol.value},{size}"
    )


def _iter_lines(source: IO | Iterable[str]) -> Iterator[str]:
    for raw in source:
        if isinstance(raw, bytes):
            yield raw.decode("utf-8", errors="replace")
        else:
            yield raw


def parse_flow_log(
    source: IO | Iterable[str],
    fmt: str = "csv",
    rejects: RejectLog | None = None,
) -> Iterator[FlowRecord]:
    """Stream FlowRecords out of a flow log.

    Malformed lines are counted in `rejects` and skipped; an unreadable
    source raises the underlying I/O error.
    """
    if fmt == "csv":
        parse_line = parse_csv_line
    elif fmt == "jsonl":
        parse_line = parse_jsonl_line
    else:
        raise ValueError(f"unknown format {fmt!r} (expected 'csv' or 'jsonl')")
    for line_no, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        try:
            yield parse_line(line)
        except FlowParseError as exc:
            if rejects is not None:
                rejects.add(line_no, exc.reason)
        except ValueError:
            # invariant violation raised by FlowRecord itself
            if rejects is not None:
                rejects.add(line_no, "invalid")


def merge_streams(streams: Sequence[Iterable[FlowRecord]]) -> Iterator[FlowRecord]:
    """Merge independently parsed streams into one timestamp-ordered stream.

    Ties are broken by stream position, so the merge is deterministic for
    a fixed stream list.
    """
    iters = [
        (((rec.ts_ms, idx), rec) for rec in stream) for idx, stream in enumerate(streams)
    ]
    for _, rec in heapq.merge(*iters, key=lambda pair: pair[0]):
        yield rec


def source_stats(records: Iterable[FlowRecord]) -> dict[str, SourceStats]:
    """Per-source packet counts and first/last timestamps."""
    stats: dict[str, SourceStats] = {}
    for rec in records:
        cur = stats.get(rec.src_ip)
        if cur is None:
            stats[rec.src_ip] = SourceStats(rec.src_ip, 1, rec.ts_ms, rec.ts_ms)
        else:
            cur.packet_count += 1
            cur.first_seen = min(cur.first_seen, rec.ts_ms)
            cur.last_seen = max(cur.last_seen, rec.ts_ms)
    return stats


def filter_low_volume_sources(
    records: Sequence[FlowRecord], min_packets: int = 3
) -> list[FlowRecord]:
    """Drop all records of sources that sent fewer than min_packets packets
    within the given scope (one window). Order is preserved."""
    if min_packets < 1:
        raise ValueError("min_packets must be >= 1")
    if min_packets == 1:
        return list(records)
    counts = Counter(rec.src_ip for rec in records)
    return [rec for rec in records if counts[rec.src_ip] >= min_packets]
