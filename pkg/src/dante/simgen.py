"""Deterministic synthetic darknet traffic with known ground truth.

Campaigns emit fixed port templates (optionally split across weighted
variants) from pools of reserved-range source addresses; background noise
comes from fresh one-shot sources. Same scenario + seed => byte-identical
output, which makes generated streams usable as test oracles.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from typing import IO

import numpy as np

from dante.flows import FlowRecord, Protocol, to_csv_line
from dante.windows import MS_PER_MIN, WindowConfig

# 2021-01-01T00:00:00Z
DEFAULT_START_MS = 1_609_459_200_000

# reserved ranges so generated sources never collide with real hosts
CAMPAIGN_NET = ipaddress.IPv4Network("198.18.0.0/15")
NOISE_NET = ipaddress.IPv4Network("100.64.0.0/10")
TELESCOPE_NET = ipaddress.IPv4Network("203.0.113.0/24")


@dataclass(frozen=True)
class CampaignSpec:
    name: str
    variants: tuple[tuple[float, tuple[int, ...]], ...]  # (weight, ports)
    sources: int
    active: tuple[tuple[int, int], ...] = ((0, None),)  # minute intervals, end None = scenario end
    jitter_sec: tuple[int, int] = (0, 30)
    repeats: tuple[int, int] = (1, 1)
    emit_interval_min: int = 60  # each active source replays its template this often
    churn: float = 0.0  # fraction of sources swapped out per emit interval
    source_prefix: str | None = None  # override the default source range

    def __post_init__(self):
        if self.sources < 1:
            raise ValueError("campaign needs at least one source")
        if not self.variants:
            raise ValueError("campaign needs at least one variant")
        for weight, ports in self.variants:
            if weight <= 0 or not ports:
                raise ValueError("variants need positive weight and a non-empty template")
        prev_end = 0
        for start, end in self.active:
            if end is not None and end <= start:
                raise ValueError("active interval must end after it starts")
            if start < 0 or start < prev_end:
                raise ValueError("active intervals must be ordered and non-overlapping")
            prev_end = end if end is not None else float("inf")
        if not 0.0 <= self.churn < 1.0:
            raise ValueError("churn must be in [0, 1)")
        if self.emit_interval_min < 1:
            raise ValueError("emit_interval_min must be >= 1")

    @staticmethod
    def single(name: str, ports: list[int], sources: int, **kwargs) -> "CampaignSpec":
        return CampaignSpec(
            name=name, variants=((1.0, tuple(ports)),), sources=sources, **kwargs
        )


@dataclass(frozen=True)
class Scenario:
    name: str
    campaigns: tuple[CampaignSpec, ...]
    duration_min: int
    noise_rate: float = 0.0  # one-shot packets per minute
    seed: int = 0
    start_ms: int = DEFAULT_START_MS

    def __post_init__(self):
        if self.duration_min < 1:
            raise ValueError("duration must be at least one minute")
        names = [c.name for c in self.campaigns]
        if len(names) != len(set(names)):
            raise ValueError("campaign names must be unique")


@dataclass
class GroundTruth:
    scenario: str
    seed: int
    start_ms: int
    duration_min: int
    source_campaign: dict[str, str]  # ip -> campaign name or "noise"
    campaigns: dict[str, dict]  # name -> {"sources", "intervals_min", "ports"}

    def campaign_sources(self, name: str) -> set[str]:
        return set(self.campaigns[name]["sources"])

    def active_windows(self, name: str, config: WindowConfig, base_ms: int) -> list[int]:
        """Window indices whose span overlaps any active interval."""
        out = []
        intervals = [
            (self.start_ms + a * MS_PER_MIN, self.start_ms + b * MS_PER_MIN)
            for a, b in self.campaigns[name]["intervals_min"]
        ]
        horizon = self.start_ms + self.duration_min * MS_PER_MIN
        i = 0
        while base_ms + i * config.step_ms < horizon:
            w_start = base_ms + i * config.step_ms
            w_end = w_start + config.length_ms
            if any(a < w_end and w_start < b for a, b in intervals):
                out.append(i)
            i += 1
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "v": 1,
                "scenario": self.scenario,
                "seed": self.seed,
                "start_ms": self.start_ms,
                "duration_min": self.duration_min,
                "sources": self.source_campaign,
                "campaigns": self.campaigns,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        data = json.loads(text)
        return cls(
            scenario=data["scenario"],
            seed=data["seed"],
            start_ms=data["start_ms"],
            duration_min=data["duration_min"],
            source_campaign=data["sources"],
            campaigns=data["campaigns"],
        )


class _AddressPool:
    def __init__(self, network: ipaddress.IPv4Network):
        self._base = int(network.network_address)
        self._size = network.num_addresses
        self._next = 1  # skip the network address

    def take(self) -> str:
        if self._next >= self._size - 1:
            raise RuntimeError("address pool exhausted")
        ip = str(ipaddress.IPv4Address(self._base + self._next))
        self._next += 1
        return ip


def _campaign_records(
    spec: CampaignSpec,
    scenario: Scenario,
    pool: _AddressPool,
    telescope: list[str],
    rng: np.random.Generator,
) -> tuple[list[FlowRecord], list[str]]:
    records: list[FlowRecord] = []
    all_sources: list[str] = []

    active_set = [pool.take() for _ in range(spec.sources)]
    all_sources.extend(active_set)
    variant_weights = np.array([w for w, _ in spec.variants], dtype=np.float64)
    variant_weights /= variant_weights.sum()
    variant_of: dict[str, int] = {}

    def pick_variant(src: str) -> tuple[int, ...]:
        if src not in variant_of:
            variant_of[src] = int(rng.choice(len(spec.variants), p=variant_weights))
        return spec.variants[variant_of[src]][1]

    horizon = scenario.duration_min
    lo_j, hi_j = spec.jitter_sec
    lo_r, hi_r = spec.repeats
    swap = int(spec.churn * spec.sources)

    first_tick = True
    for start, end in spec.active:
        end = horizon if end is None else min(end, horizon)
        tick = start
        while tick < end:
            if not first_tick and swap > 0:
                # oldest sources rotate out; fresh ones join
                del active_set[:swap]
                newcomers = [pool.take() for _ in range(swap)]
                active_set.extend(newcomers)
                all_sources.extend(newcomers)
            first_tick = False
            tick_ms = scenario.start_ms + tick * MS_PER_MIN
            for src in active_set:
                template = pick_variant(src)
                reps = int(rng.integers(lo_r, hi_r + 1)) if hi_r > lo_r else lo_r
                t = tick_ms + int(rng.integers(0, 30_000))
                for _ in range(reps):
                    for port in template:
                        records.append(
                            FlowRecord(
                                ts_ms=t,
                                src_ip=src,
                                dst_ip=telescope[int(rng.integers(len(telescope)))],
                                dst_port=port,
                                protocol=Protocol.TCP,
                                size=int(rng.integers(40, 1500)),
                            )
                        )
                        t += int(rng.integers(lo_j * 1000, hi_j * 1000 + 1))
            tick += spec.emit_interval_min
    return records, all_sources


def generate(scenario: Scenario) -> tuple[list[FlowRecord], GroundTruth]:
    """Produce the scenario's records (timestamp-sorted) and ground truth."""
    telescope = [str(ip) for ip in TELESCOPE_NET.hosts()]
    campaign_pool = _AddressPool(CAMPAIGN_NET)
    noise_pool = _AddressPool(NOISE_NET)

    seed_root = np.random.SeedSequence(scenario.seed)
    child_seeds = seed_root.spawn(len(scenario.campaigns) + 1)

    records: list[FlowRecord] = []
    source_campaign: dict[str, str] = {}
    campaigns: dict[str, dict] = {}

    for spec, seed in zip(scenario.campaigns, child_seeds):
        if spec.source_prefix is not None:
            pool = _AddressPool(ipaddress.IPv4Network(spec.source_prefix))
        else:
            pool = campaign_pool
        rng = np.random.default_rng(seed)
        recs, sources = _campaign_records(spec, scenario, pool, telescope, rng)
        records.extend(recs)
        for src in sources:
            source_campaign[src] = spec.name
        intervals = [
            [a, scenario.duration_min if b is None else min(b, scenario.duration_min)]
            for a, b in spec.active
        ]
        ports = sorted({p for _, template in spec.variants for p in template})
        campaigns[spec.name] = {
            "sources": sources,
            "intervals_min": intervals,
            "ports": ports,
        }

    noise_rng = np.random.default_rng(child_seeds[-1])
    n_noise = int(scenario.noise_rate * scenario.duration_min)
    for k in range(n_noise):
        src = noise_pool.take()
        source_campaign[src] = "noise"
        t = scenario.start_ms + int(
            k / max(scenario.noise_rate, 1e-9) * MS_PER_MIN
        ) + int(noise_rng.integers(0, MS_PER_MIN))
        records.append(
            FlowRecord(
                ts_ms=t,
                src_ip=src,
                dst_ip=telescope[int(noise_rng.integers(len(telescope)))],
                dst_port=int(noise_rng.integers(0, 65536)),
                protocol=Protocol.UDP if noise_rng.random() < 0.3 else Protocol.TCP,
                size=int(noise_rng.integers(40, 1500)),
            )
        )

    records.sort(key=lambda r: (r.ts_ms, r.src_ip, r.dst_ip, r.dst_port))
    truth = GroundTruth(
        scenario=scenario.name,
        seed=scenario.seed,
        start_ms=scenario.start_ms,
        duration_min=scenario.duration_min,
        source_campaign=source_campaign,
        campaigns=campaigns,
    )
    return records, truth


def write_csv(records: list[FlowRecord], sink: IO[str] | str) -> None:
    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8") as fh:
            write_csv(records, fh)
        return
    for rec in records:
        sink.write(to_csv_line(rec) + "\n")


# --- scenario file format -------------------------------------------------
#
#   seed 7
#   duration-min 720
#   noise-rate 2
#
#   campaign telnet-worm
#     ports 23 23 2323
#     sources 300
#     active 0 720
#     jitter-sec 1 20
#     churn 0.1
#
# `variant <weight> <ports...>` lines replace `ports` for mixed campaigns.


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    top: dict[str, float] = {"seed": 0, "noise-rate": 0.0}
    duration: int | None = None
    start_ms = DEFAULT_START_MS
    campaigns: list[dict] = []
    current: dict | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        try:
            if key == "campaign":
                if len(args) != 1:
                    raise ValueError("campaign takes exactly one name")
                current = {"name": args[0], "variants": [], "active": []}
                campaigns.append(current)
            elif current is None:
                if key == "seed":
                    top["seed"] = int(args[0])
                elif key == "duration-min":
                    duration = int(args[0])
                elif key == "noise-rate":
                    top["noise-rate"] = float(args[0])
                elif key == "start-ms":
                    start_ms = int(args[0])
                else:
                    raise ValueError(f"unknown scenario key {key!r}")
            else:
                if key == "ports":
                    current["variants"].append((1.0, tuple(int(p) for p in args)))
                elif key == "variant":
                    current["variants"].append(
                        (float(args[0]), tuple(int(p) for p in args[1:]))
                    )
                elif key == "sources":
                    current["sources"] = int(args[0])
                elif key == "active":
                    current["active"].append((int(args[0]), int(args[1])))
                elif key == "jitter-sec":
                    current["jitter_sec"] = (int(args[0]), int(args[1]))
                elif key == "repeats":
                    current["repeats"] = (int(args[0]), int(args[1]))
                elif key == "interval-min":
                    current["emit_interval_min"] = int(args[0])
                elif key == "churn":
                    current["churn"] = float(args[0])
                elif key == "source-prefix":
                    current["source_prefix"] = args[0]
                else:
                    raise ValueError(f"unknown campaign key {key!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ScenarioParseError):
                raise
            raise ScenarioParseError(str(exc), line_no) from None

    if duration is None:
        raise ScenarioParseError("missing duration-min", 0)

    specs = []
    for camp in campaigns:
        if "sources" not in camp:
            raise ScenarioParseError(f"campaign {camp['name']!r} missing sources", 0)
        kwargs = {
            k: v
            for k, v in camp.items()
            if k in ("jitter_sec", "repeats", "emit_interval_min", "churn", "source_prefix")
        }
        specs.append(
            CampaignSpec(
                name=camp["name"],
                variants=tuple(camp["variants"]),
                sources=camp["sources"],
                active=tuple(camp["active"]) or ((0, None),),
                **kwargs,
            )
        )
    return Scenario(
        name=name,
        campaigns=tuple(specs),
        duration_min=duration,
        noise_rate=top["noise-rate"],
        seed=int(top["seed"]),
        start_ms=start_ms,
    )


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        return parse_scenario(fh.read(), name=name)


# --- built-in catalog -----------------------------------------------------

_HTTP_ALT_PORTS = (
    80, 81, 88, 8000, 8001, 8008, 8080, 8081, 8088,
    8090, 8181, 8443, 8880, 8888, 9080, 9090, 9999,
)

_WIDE_SCAN_PORTS = tuple(
    [21, 22, 23, 25, 53, 110, 143, 443, 465, 587, 993, 995, 1080, 1433, 1521,
     2077, 2083, 2222, 3306, 3389, 3556, 4443, 5060, 5432, 5900, 6379, 7080,
     8877, 9200, 9304, 11211, 27017, 445, 139, 135, 111, 2049, 5985, 161, 389]
)


def catalog() -> dict[str, Scenario]:
    """Scenarios echoing well-known darknet campaign shapes, usable both as
    demos and as test fixtures."""
    day = 1440
    return {
        "telnet-worm": Scenario(
            name="telnet-worm",
            campaigns=(
                CampaignSpec.single("telnet-worm", [23, 23, 2323], 300, jitter_sec=(1, 20)),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=101,
        ),
        "smb-scanner": Scenario(
            name="smb-scanner",
            campaigns=(
                CampaignSpec.single("smb-scanner", [445, 445, 445], 240, jitter_sec=(5, 120)),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=102,
        ),
        "ipcam-mixed": Scenario(
            name="ipcam-mixed",
            campaigns=(
                CampaignSpec(
                    name="ipcam-mixed",
                    variants=(
                        (0.92, (9527, 9527, 9527)),
                        (0.08, (9527, 9527, 9527, 5555, 5555, 5555)),
                    ),
                    sources=500,
                    jitter_sec=(1, 10),
                ),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=103,
        ),
        "router-probe": Scenario(
            name="router-probe",
            campaigns=(
                CampaignSpec.single(
                    "router-probe", [7550, 7550, 7547, 7547, 7547], 150, jitter_sec=(1, 30)
                ),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=104,
        ),
        "triple-port-probe": Scenario(
            name="triple-port-probe",
            campaigns=(
                CampaignSpec.single(
                    "triple-port-probe",
                    [7379, 7379, 5379, 5379, 6379, 6379],
                    200,
                    jitter_sec=(1, 30),
                ),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=105,
        ),
        "censys-like": Scenario(
            name="censys-like",
            campaigns=(
                CampaignSpec.single(
                    "censys-scan", list(_WIDE_SCAN_PORTS), 141, jitter_sec=(0, 5)
                ),
                CampaignSpec.single(
                    "censys-mimic",
                    list(_WIDE_SCAN_PORTS),
                    20,
                    jitter_sec=(0, 5),
                    source_prefix="192.0.2.0/24",
                ),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=106,
        ),
        "http-alternates": Scenario(
            name="http-alternates",
            campaigns=(
                CampaignSpec.single(
                    "http-alternates", list(_HTTP_ALT_PORTS), 250, jitter_sec=(0, 10)
                ),
            ),
            duration_min=720,
            noise_rate=2.0,
            seed=107,
        ),
        "showcase": Scenario(
            name="showcase",
            campaigns=(
                CampaignSpec.single("telnet-worm", [23, 23, 2323], 300, jitter_sec=(1, 20)),
                CampaignSpec.single(
                    "smb-scanner", [445, 445, 445], 240, active=((0, day),), jitter_sec=(5, 120)
                ),
                CampaignSpec(
                    name="ipcam-mixed",
                    variants=(
                        (0.92, (9527, 9527, 9527)),
                        (0.08, (9527, 9527, 9527, 5555, 5555, 5555)),
                    ),
                    sources=500,
                    active=((360, 1080),),
                    jitter_sec=(1, 10),
                ),
                CampaignSpec.single(
                    "router-probe",
                    [7550, 7550, 7547, 7547, 7547],
                    150,
                    active=((240, 480), (1200, 1440)),
                    jitter_sec=(1, 30),
                ),
            ),
            duration_min=2 * day,
            noise_rate=3.0,
            seed=108,
        ),
    }
