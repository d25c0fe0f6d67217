"""Deterministic generator of UHF-RFID / NFC tag read events.

A scenario file describes an exercise session as contiguous time segments;
each segment programs one parametric curve per sensing channel (baseline,
linear drift, first-order settle toward a target, Gaussian noise, onset
delay).  Generation is a pure function of the scenario contents and its seed:
per-channel RNG streams are derived from the seed by hashing, so the output is
independent of tag/segment iteration order and byte-identical across runs.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .textcfg import Block, ConfigSyntaxError, parse_file

SCENARIO_FORMAT = "1"

DEFAULT_UHF_SENSITIVITY_DBM = -15.0
DEFAULT_UHF_MAX_DISTANCE_CM = 15.0
DEFAULT_READ_PERIOD_S = 1.0


class Interface(str, Enum):
    UHF = "UHF"
    NFC = "NFC"


class Channel(str, Enum):
    TEMPERATURE_C = "temperature_C"
    POTENTIAL_MV = "potential_mV"
    CURRENT_UA = "current_uA"


class Activity(str, Enum):
    BIKE = "bike"
    WALK = "walk"
    REST = "rest"


class ScenarioError(ValueError):
    """Semantic problem in an otherwise parseable scenario."""


@dataclass(frozen=True)
class ChannelProgram:
    baseline: float
    drift_per_s: float = 0.0
    noise_std: float = 0.0
    onset_s: float = 0.0
    settle_target: Optional[float] = None
    settle_tau_s: float = 0.0

    def value_at(self, t_in_segment: float) -> float:
        v = self.baseline + self.drift_per_s * t_in_segment
        if self.settle_target is not None and self.settle_tau_s > 0:
            t_active = max(0.0, t_in_segment - self.onset_s)
            v += (self.settle_target - self.baseline) * (1.0 - math.exp(-t_active / self.settle_tau_s))
        return v


@dataclass(frozen=True)
class ScenarioSegment:
    start_s: float
    end_s: float
    activity: Activity
    channel_programs: Dict[Channel, ChannelProgram] = field(default_factory=dict)


@dataclass(frozen=True)
class TagConfig:
    tag_id: str
    interface: Interface
    channels: Tuple[Channel, ...]
    read_period_s: float = DEFAULT_READ_PERIOD_S
    chip_sensitivity_dBm: Optional[float] = None
    max_read_distance_cm: Optional[float] = None
    dropout_prob: float = 0.0


@dataclass(frozen=True)
class TagReading:
    tag_id: str
    interface: Interface
    timestamp_s: float
    channel: Channel
    value: float
    rssi_dBm: Optional[float] = None


@dataclass(frozen=True)
class SessionScenario:
    scenario_id: str
    seed: int
    segments: Tuple[ScenarioSegment, ...]
    tag_configs: Tuple[TagConfig, ...]

    def duration_s(self) -> float:
        return self.segments[-1].end_s if self.segments else 0.0


def _validate(scenario: SessionScenario) -> None:
    if not scenario.segments:
        raise ScenarioError("scenario has no segments")
    prev_end = None
    for seg in scenario.segments:
        if seg.end_s <= seg.start_s:
            raise ScenarioError(
                f"segment [{seg.start_s}, {seg.end_s}] has end_s <= start_s"
            )
        if prev_end is not None and not math.isclose(seg.start_s, prev_end):
            raise ScenarioError(
                f"segments are not contiguous: previous ends at {prev_end}, next starts at {seg.start_s}"
            )
        prev_end = seg.end_s
        for channel, prog in seg.channel_programs.items():
            if prog.noise_std < 0:
                raise ScenarioError(f"negative noise stddev on channel {channel.value}")
    if scenario.duration_s() - scenario.segments[0].start_s <= 0:
        raise ScenarioError("scenario has zero total duration")
    if not scenario.tag_configs:
        raise ScenarioError("scenario has no tags")
    seen = set()
    for tag in scenario.tag_configs:
        if tag.tag_id in seen:
            raise ScenarioError(f"duplicate tag id {tag.tag_id!r}")
        seen.add(tag.tag_id)
        if tag.read_period_s <= 0:
            raise ScenarioError(f"tag {tag.tag_id!r} has non-positive read period")
        if not 0 <= tag.dropout_prob <= 1:
            raise ScenarioError(f"tag {tag.tag_id!r} has dropout_prob outside [0, 1]")
        if tag.interface is Interface.NFC and tag.chip_sensitivity_dBm is not None:
            raise ScenarioError("chip_sensitivity_dBm only applies to UHF tags")


# ---------------------------------------------------------------------------
# Scenario file loading

def _parse_program(spec: str, line: int) -> Tuple[Channel, ChannelProgram]:
    parts = spec.split()
    if not parts:
        raise ConfigSyntaxError("empty program spec", line)
    try:
        channel = Channel(parts[0])
    except ValueError:
        raise ConfigSyntaxError(f"unknown channel {parts[0]!r}", line) from None
    kwargs = {}
    for item in parts[1:]:
        if "=" not in item:
            raise ConfigSyntaxError(f"program parameter {item!r} is not key=value", line)
        key, value = item.split("=", 1)
        if key not in ("baseline", "drift_per_s", "noise_std", "onset_s", "settle_target", "settle_tau_s"):
            raise ConfigSyntaxError(f"unknown program parameter {key!r}", line)
        try:
            kwargs[key] = float(value)
        except ValueError:
            raise ConfigSyntaxError(f"parameter {key!r} has non-numeric value {value!r}", line) from None
    if "baseline" not in kwargs:
        raise ConfigSyntaxError("program is missing baseline=", line)
    return channel, ChannelProgram(**kwargs)


def _parse_float(block: Block, key: str, default: Optional[float] = None) -> Optional[float]:
    raw = block.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigSyntaxError(f"{key!r} must be numeric, got {raw!r}", block.line) from None


def _tag_from_block(block: Block) -> TagConfig:
    try:
        interface = Interface(block.require("interface"))
    except ValueError:
        raise ConfigSyntaxError(f"unknown interface {block.get('interface')!r}", block.line) from None
    channels = []
    for part in block.require("channels").split(","):
        part = part.strip()
        try:
            channels.append(Channel(part))
        except ValueError:
            raise ConfigSyntaxError(f"unknown channel {part!r}", block.line) from None
    sens = _parse_float(block, "chip_sensitivity_dBm")
    dist = _parse_float(block, "max_read_distance_cm")
    if interface is Interface.UHF:
        if sens is None:
            sens = DEFAULT_UHF_SENSITIVITY_DBM
        if dist is None:
            dist = DEFAULT_UHF_MAX_DISTANCE_CM
    return TagConfig(
        tag_id=block.name,
        interface=interface,
        channels=tuple(channels),
        read_period_s=_parse_float(block, "read_period_s", DEFAULT_READ_PERIOD_S),
        chip_sensitivity_dBm=sens,
        max_read_distance_cm=dist,
        dropout_prob=_parse_float(block, "dropout_prob", 0.0),
    )


def _segment_from_block(block: Block) -> ScenarioSegment:
    start = _parse_float(block, "start_s")
    end = _parse_float(block, "end_s")
    if start is None or end is None:
        raise ConfigSyntaxError("segment needs start_s and end_s", block.line)
    try:
        activity = Activity(block.require("activity"))
    except ValueError:
        raise ConfigSyntaxError(f"unknown activity {block.get('activity')!r}", block.line) from None
    programs: Dict[Channel, ChannelProgram] = {}
    for spec, line in block.get_all("program"):
        channel, prog = _parse_program(spec, line)
        if channel in programs:
            raise ConfigSyntaxError(f"duplicate program for channel {channel.value}", line)
        programs[channel] = prog
    return ScenarioSegment(start_s=start, end_s=end, activity=activity, channel_programs=programs)


def load_scenario(path) -> SessionScenario:
    """Load and validate a scenario file (raises on syntax or semantic errors)."""
    doc = parse_file(path)
    fmt = doc.header_get("format")
    if fmt != SCENARIO_FORMAT:
        raise ScenarioError(f"unsupported scenario format {fmt!r} (expected {SCENARIO_FORMAT!r})")
    scenario_id = doc.header_get("scenario")
    if not scenario_id:
        raise ScenarioError("scenario file is missing the 'scenario' header key")
    seed_raw = doc.header_get("seed", "0")
    try:
        seed = int(seed_raw)
    except ValueError:
        raise ScenarioError(f"seed must be an integer, got {seed_raw!r}") from None
    if not 0 <= seed < 2**64:
        raise ScenarioError("seed must fit in 64 bits")
    tags, segments = [], []
    for block in doc.blocks:
        if block.kind == "tag":
            tags.append(_tag_from_block(block))
        elif block.kind == "segment":
            segments.append(_segment_from_block(block))
        else:
            raise ConfigSyntaxError(f"unknown block kind {block.kind!r}", block.line)
    segments.sort(key=lambda s: s.start_s)
    scenario = SessionScenario(
        scenario_id=scenario_id, seed=seed, segments=tuple(segments), tag_configs=tuple(tags)
    )
    _validate(scenario)
    return scenario


# ---------------------------------------------------------------------------
# Generation

def _stream_rng(seed: int, tag_id: str, channel: Channel, segment_index: int) -> random.Random:
    material = f"{seed}|{tag_id}|{channel.value}|{segment_index}".encode()
    digest = hashlib.sha256(material).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def generate_readings(scenario: SessionScenario) -> List[TagReading]:
    """All read events of a session, time-sorted; seed-deterministic."""
    if not scenario.segments:
        return []
    _validate(scenario)
    readings: List[TagReading] = []
    for seg_idx, seg in enumerate(scenario.segments):
        for tag in scenario.tag_configs:
            for channel in tag.channels:
                prog = seg.channel_programs.get(channel)
                if prog is None:
                    continue
                rng = _stream_rng(scenario.seed, tag.tag_id, channel, seg_idx)
                n = 0
                while True:
                    offset = n * tag.read_period_s
                    t = seg.start_s + offset
                    if t >= seg.end_s:
                        break
                    n += 1
                    # RNG draws happen for every slot, read or not, so the
                    # value stream does not shift when dropout is enabled.
                    noise = rng.gauss(0.0, prog.noise_std) if prog.noise_std > 0 else 0.0
                    rssi = None
                    if tag.interface is Interface.UHF:
                        rssi = round(-50.0 + rng.gauss(0.0, 2.0), 2)
                    dropped = tag.dropout_prob > 0 and rng.random() < tag.dropout_prob
                    if offset < prog.onset_s or dropped:
                        continue
                    readings.append(
                        TagReading(
                            tag_id=tag.tag_id,
                            interface=tag.interface,
                            timestamp_s=t,
                            channel=channel,
                            value=prog.value_at(offset) + noise,
                            rssi_dBm=rssi,
                        )
                    )
    readings.sort(key=lambda r: (r.timestamp_s, r.tag_id, r.channel.value))
    return readings


# ---------------------------------------------------------------------------
# Reading-log files

LOG_HEADER = "timestamp_s,tag_id,interface,channel,value,rssi_dBm"


def emit_log(readings: List[TagReading], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LOG_HEADER + "\n")
        for r in readings:
            rssi = repr(r.rssi_dBm) if r.rssi_dBm is not None else ""
            fh.write(
                f"{r.timestamp_s!r},{r.tag_id},{r.interface.value},{r.channel.value},{r.value!r},{rssi}\n"
            )


def read_log(path) -> List[TagReading]:
    readings: List[TagReading] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != LOG_HEADER:
            raise ValueError(f"unexpected reading-log header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"line {lineno}: expected 6 fields, got {len(parts)}")
            t, tag_id, iface, channel, value, rssi = parts
            readings.append(
                TagReading(
                    tag_id=tag_id,
                    interface=Interface(iface),
                    timestamp_s=float(t),
                    channel=Channel(channel),
                    value=float(value),
                    rssi_dBm=float(rssi) if rssi else None,
                )
            )
    return readings
