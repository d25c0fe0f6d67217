"""Raw tag readings -> calibrated clinical measurements and immediate feedback.

Cleaning follows the deployment's post-processing rules: out-of-range readings
are discarded (and counted, never silently dropped), remaining series are
smoothed with a trailing moving average so feedback never depends on future
samples.  Calibration uses the standard electrochemical forms, a Nernstian
linear map for the potentiometric pH cell and a log-linear map for the
competitive amperometric immunosensor; every constant lives in the calibration
file, not in code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .reader_sim import Channel, TagReading
from .textcfg import parse_file

CALIBRATION_FORMAT = "1"


class PipelineError(ValueError):
    pass


class CalibrationError(PipelineError):
    """Structurally invalid calibration (e.g. zero slope)."""


class CurrentOutOfRangeError(PipelineError):
    """Plateau current outside the immunosensor's valid range."""


# ---------------------------------------------------------------------------
# Configuration types

@dataclass(frozen=True)
class CleaningConfig:
    ph_valid_range: Tuple[float, float] = (4.5, 7.0)
    smoothing_window_s: float = 5.0
    temperature_valid_range_C: Tuple[float, float] = (20.0, 45.0)
    current_valid_range_uA: Tuple[float, float] = (0.0, 1000.0)

    def __post_init__(self):
        if self.smoothing_window_s <= 0:
            raise CalibrationError("smoothing window must be positive")
        for lo, hi in (self.ph_valid_range, self.temperature_valid_range_C, self.current_valid_range_uA):
            if lo >= hi:
                raise CalibrationError(f"invalid range [{lo}, {hi}]")


@dataclass(frozen=True)
class PhCalibration:
    E0_mV: float
    slope_mV_per_pH: float


@dataclass(frozen=True)
class CortisolCalibration:
    intercept_uA: float
    slope_uA_per_log10: float
    valid_current_range_uA: Tuple[float, float]


@dataclass(frozen=True)
class TemperatureCalibration:
    offset_C: float = 0.0


@dataclass(frozen=True)
class Calibration:
    ph: PhCalibration
    cortisol: CortisolCalibration
    temperature: TemperatureCalibration = TemperatureCalibration()

    def __post_init__(self):
        if self.ph.slope_mV_per_pH == 0:
            raise CalibrationError("pH slope must be nonzero")
        if self.cortisol.slope_uA_per_log10 == 0:
            raise CalibrationError("cortisol slope must be nonzero")


def load_calibration(path):
    """Read a calibration file; returns (Calibration, CleaningConfig)."""
    doc = parse_file(path)
    if doc.header_get("format") != CALIBRATION_FORMAT:
        raise CalibrationError(f"unsupported calibration format {doc.header_get('format')!r}")
    blocks = {(b.kind, b.name): b for b in doc.blocks}

    def fval(kind, name, key, default=None):
        block = blocks.get((kind, name))
        if block is None:
            if default is not None:
                return default
            raise CalibrationError(f"missing [{kind} {name}] block")
        raw = block.get(key)
        if raw is None:
            if default is not None:
                return default
            raise CalibrationError(f"[{kind} {name}] is missing {key!r}")
        return float(raw)

    cal = Calibration(
        ph=PhCalibration(
            E0_mV=fval("calibration", "ph", "E0_mV"),
            slope_mV_per_pH=fval("calibration", "ph", "slope_mV_per_pH"),
        ),
        cortisol=CortisolCalibration(
            intercept_uA=fval("calibration", "cortisol", "intercept_uA"),
            slope_uA_per_log10=fval("calibration", "cortisol", "slope_uA_per_log10"),
            valid_current_range_uA=(
                fval("calibration", "cortisol", "valid_current_min_uA"),
                fval("calibration", "cortisol", "valid_current_max_uA"),
            ),
        ),
        temperature=TemperatureCalibration(offset_C=fval("calibration", "temperature", "offset_C", 0.0)),
    )
    defaults = CleaningConfig()
    cleaning = CleaningConfig(
        ph_valid_range=(
            fval("cleaning", "rules", "ph_min", defaults.ph_valid_range[0]),
            fval("cleaning", "rules", "ph_max", defaults.ph_valid_range[1]),
        ),
        smoothing_window_s=fval("cleaning", "rules", "smoothing_window_s", defaults.smoothing_window_s),
        temperature_valid_range_C=(
            fval("cleaning", "rules", "temperature_min_C", defaults.temperature_valid_range_C[0]),
            fval("cleaning", "rules", "temperature_max_C", defaults.temperature_valid_range_C[1]),
        ),
        current_valid_range_uA=(
            fval("cleaning", "rules", "current_min_uA", defaults.current_valid_range_uA[0]),
            fval("cleaning", "rules", "current_max_uA", defaults.current_valid_range_uA[1]),
        ),
    )
    return cal, cleaning


# ---------------------------------------------------------------------------
# Measurements

class MeasurementKind(str, Enum):
    SKIN_TEMPERATURE = "skin_temperature"
    SWEAT_PH = "sweat_pH"
    SWEAT_CORTISOL = "sweat_cortisol"


UNIT_BY_KIND = {
    MeasurementKind.SKIN_TEMPERATURE: "°C",
    MeasurementKind.SWEAT_PH: "pH",
    MeasurementKind.SWEAT_CORTISOL: "ng/mL",
}


class Quality(str, Enum):
    OK = "ok"
    SMOOTHED = "smoothed"
    OUT_OF_RANGE_DISCARDED = "out_of_range_discarded"
    INSUFFICIENT_DATA = "insufficient_data"


VALID_QUALITIES = (Quality.OK, Quality.SMOOTHED)


@dataclass(frozen=True)
class Measurement:
    kind: MeasurementKind
    value: float
    unit: str
    timestamp_s: float
    quality: Quality

    def __post_init__(self):
        if self.unit != UNIT_BY_KIND[self.kind]:
            raise PipelineError(f"unit {self.unit!r} does not match kind {self.kind.value}")


def make_measurement(kind: MeasurementKind, value: float, timestamp_s: float, quality: Quality) -> Measurement:
    return Measurement(kind=kind, value=value, unit=UNIT_BY_KIND[kind], timestamp_s=timestamp_s, quality=quality)


@dataclass(frozen=True)
class PlateauResult:
    t_stab_s: float
    plateau_current_uA: float
    converged: bool


# ---------------------------------------------------------------------------
# Core operations

def calibrate_ph(potential_mV: float, cal: Calibration) -> float:
    if cal.ph.slope_mV_per_pH == 0:
        raise CalibrationError("pH slope is zero")
    return (cal.ph.E0_mV - potential_mV) / cal.ph.slope_mV_per_pH


def calibrate_temperature(raw_C: float, cal: Calibration) -> float:
    return raw_C + cal.temperature.offset_C


def calibrate_cortisol(plateau_current_uA: float, cal: Calibration) -> float:
    lo, hi = cal.cortisol.valid_current_range_uA
    if not lo <= plateau_current_uA <= hi:
        raise CurrentOutOfRangeError(
            f"plateau current {plateau_current_uA:.4g} uA outside [{lo}, {hi}]"
        )
    return 10.0 ** ((plateau_current_uA - cal.cortisol.intercept_uA) / cal.cortisol.slope_uA_per_log10)


def filter_valid(
    readings: Sequence[TagReading], cfg: CleaningConfig, cal: Calibration
) -> Tuple[List[TagReading], Dict[Channel, int]]:
    """Keep readings whose calibrated value is in range; count the rest."""
    kept: List[TagReading] = []
    discarded: Dict[Channel, int] = {ch: 0 for ch in Channel}
    for r in readings:
        if r.channel is Channel.POTENTIAL_MV:
            lo, hi = cfg.ph_valid_range
            ok = lo <= calibrate_ph(r.value, cal) <= hi
        elif r.channel is Channel.TEMPERATURE_C:
            lo, hi = cfg.temperature_valid_range_C
            ok = lo <= calibrate_temperature(r.value, cal) <= hi
        else:
            lo, hi = cfg.current_valid_range_uA
            ok = lo <= r.value <= hi
        if ok:
            kept.append(r)
        else:
            discarded[r.channel] += 1
    return kept, discarded


def smooth(series: Sequence[Tuple[float, float]], window_s: float) -> List[Tuple[float, float]]:
    """Trailing moving average over [t - window_s, t]; timestamps unchanged."""
    if window_s <= 0:
        raise PipelineError("window must be positive")
    out: List[Tuple[float, float]] = []
    start = 0
    acc = 0.0
    for i, (t, v) in enumerate(series):
        acc += v
        while series[start][0] < t - window_s:
            acc -= series[start][1]
            start += 1
        out.append((t, acc / (i - start + 1)))
    return out


def detect_plateau(
    burst: Sequence[Tuple[float, float]], rel_tol: float = 0.02, hold_s: float = 20.0
) -> PlateauResult:
    """Earliest time from which the signal stays inside a relative band around
    the final windowed mean for at least hold_s."""
    if not burst:
        raise PipelineError("empty burst")
    t_end = burst[-1][0]
    t0 = burst[0][0]
    final_window = [v for t, v in burst if t >= t_end - hold_s]
    plateau = sum(final_window) / len(final_window)
    if t_end - t0 < hold_s:
        return PlateauResult(t_stab_s=math.nan, plateau_current_uA=plateau, converged=False)
    band = rel_tol * abs(plateau)
    for i, (t_i, _) in enumerate(burst):
        if t_i > t_end - hold_s:
            break
        ok = True
        for t, v in burst[i:]:
            if t > t_i + hold_s:
                break
            if abs(v - plateau) > band:
                ok = False
                break
        if ok:
            return PlateauResult(t_stab_s=t_i, plateau_current_uA=plateau, converged=True)
    return PlateauResult(t_stab_s=math.nan, plateau_current_uA=plateau, converged=False)


# ---------------------------------------------------------------------------
# Feedback

class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    URGENT = "urgent"


@dataclass(frozen=True)
class Alert:
    kind: str
    severity: Severity
    message: str
    value: float


@dataclass(frozen=True)
class FeedbackRules:
    # Healthy post-exercise band for sweat cortisol concentration.
    cortisol_range_ng_mL: Tuple[float, float] = (8.16, 141.7)
    ph_upper_alert: float = 7.0
    ph_persist_s: float = 60.0
    urgent_temperature_C: float = 39.0
    prescribed_kinds: Tuple[MeasurementKind, ...] = (
        MeasurementKind.SKIN_TEMPERATURE,
        MeasurementKind.SWEAT_PH,
        MeasurementKind.SWEAT_CORTISOL,
    )


@dataclass(frozen=True)
class FeedbackReport:
    session_id: str
    alerts: Tuple[Alert, ...]
    completed: bool


def evaluate_feedback(
    measurements: Sequence[Measurement], rules: FeedbackRules = FeedbackRules(), session_id: str = ""
) -> FeedbackReport:
    alerts: List[Alert] = []
    valid = [m for m in measurements if m.quality in VALID_QUALITIES]

    for m in valid:
        if m.kind is MeasurementKind.SWEAT_CORTISOL:
            lo, hi = rules.cortisol_range_ng_mL
            if not lo <= m.value <= hi:
                alerts.append(
                    Alert(
                        kind="cortisol_out_of_band",
                        severity=Severity.WARNING,
                        message=f"sweat cortisol {m.value:.1f} ng/mL outside healthy post-exercise band [{lo}, {hi}]",
                        value=m.value,
                    )
                )
        elif m.kind is MeasurementKind.SKIN_TEMPERATURE and m.value >= rules.urgent_temperature_C:
            alerts.append(
                Alert(
                    kind="high_temperature",
                    severity=Severity.URGENT,
                    message=f"skin temperature {m.value:.1f} °C at or above {rules.urgent_temperature_C} °C",
                    value=m.value,
                )
            )

    # Respiratory alkalosis guard: pH persistently above the upper bound.
    ph_series = sorted(
        ((m.timestamp_s, m.value) for m in valid if m.kind is MeasurementKind.SWEAT_PH),
        key=lambda p: p[0],
    )
    run_start: Optional[float] = None
    worst: Optional[float] = None
    for t, v in ph_series:
        if v > rules.ph_upper_alert:
            if run_start is None:
                run_start = t
            worst = v if worst is None else max(worst, v)
            if t - run_start >= rules.ph_persist_s:
                alerts.append(
                    Alert(
                        kind="alkalosis_risk",
                        severity=Severity.WARNING,
                        message=f"sweat pH above {rules.ph_upper_alert} for over {rules.ph_persist_s:.0f} s",
                        value=worst,
                    )
                )
                break
        else:
            run_start = None
            worst = None

    kinds_seen = {m.kind for m in valid}
    completed = all(k in kinds_seen for k in rules.prescribed_kinds)
    return FeedbackReport(session_id=session_id, alerts=tuple(alerts), completed=completed)


# ---------------------------------------------------------------------------
# End-to-end session processing

@dataclass
class SessionResult:
    session_id: str
    measurements: List[Measurement]
    report: FeedbackReport
    discarded: Dict[Channel, int] = field(default_factory=dict)
    plateau: Optional[PlateauResult] = None

    def series(self, kind: MeasurementKind) -> List[Measurement]:
        return [m for m in self.measurements if m.kind is kind]

    def latest(self, kind: MeasurementKind) -> Optional[Measurement]:
        best = None
        for m in self.measurements:
            if m.kind is kind and m.quality in VALID_QUALITIES:
                best = m
        return best


def process_session(
    readings: Sequence[TagReading],
    cal: Calibration,
    cfg: CleaningConfig = CleaningConfig(),
    rules: FeedbackRules = FeedbackRules(),
    session_id: str = "session",
) -> SessionResult:
    """Full cleaning + calibration pass over one session's readings."""
    kept, discarded = filter_valid(sorted(readings, key=lambda r: r.timestamp_s), cfg, cal)
    measurements: List[Measurement] = []

    temp_series = [
        (r.timestamp_s, calibrate_temperature(r.value, cal))
        for r in kept
        if r.channel is Channel.TEMPERATURE_C
    ]
    for t, v in smooth(temp_series, cfg.smoothing_window_s):
        measurements.append(make_measurement(MeasurementKind.SKIN_TEMPERATURE, v, t, Quality.SMOOTHED))

    ph_series = [
        (r.timestamp_s, calibrate_ph(r.value, cal))
        for r in kept
        if r.channel is Channel.POTENTIAL_MV
    ]
    for t, v in smooth(ph_series, cfg.smoothing_window_s):
        measurements.append(make_measurement(MeasurementKind.SWEAT_PH, v, t, Quality.SMOOTHED))

    plateau: Optional[PlateauResult] = None
    burst = [(r.timestamp_s, r.value) for r in kept if r.channel is Channel.CURRENT_UA]
    if burst:
        t0 = burst[0][0]
        plateau = detect_plateau([(t - t0, v) for t, v in burst])
        t_last = burst[-1][0]
        if plateau.converged:
            try:
                conc = calibrate_cortisol(plateau.plateau_current_uA, cal)
                measurements.append(
                    make_measurement(MeasurementKind.SWEAT_CORTISOL, conc, t_last, Quality.OK)
                )
            except CurrentOutOfRangeError:
                measurements.append(
                    make_measurement(MeasurementKind.SWEAT_CORTISOL, math.nan, t_last, Quality.INSUFFICIENT_DATA)
                )
        else:
            measurements.append(
                make_measurement(MeasurementKind.SWEAT_CORTISOL, math.nan, t_last, Quality.INSUFFICIENT_DATA)
            )

    report = evaluate_feedback(measurements, rules, session_id=session_id)
    return SessionResult(
        session_id=session_id,
        measurements=measurements,
        report=report,
        discarded=discarded,
        plateau=plateau,
    )
