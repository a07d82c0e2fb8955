"""Synthetic beehive traces with scheduled, ground-truthed anomalies.

All shapes are desk-scale conventions built around three anchors: a brood
nest held at 34.5 °C, a swarm-style spike that must trip a 2–20 minute
above-band rule, and a diurnal ambient cycle that edge sensors partially
follow. Magnitudes are chosen so every detector's verdict on the output
is unambiguous: spikes clear the rule's band by ≥ 3 noise sigmas, and
sustained treatment warmth stays ≥ 3 sigmas below it.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from ..data import BROOD_TEMP_C, SensorColumn, SensorTrace, _day_number
from ..detector import DetectionEvent
from ..errors import InvalidSchedule

MINUTES_PER_DAY = 1440

#: Ambient (outside) diurnal curve: mean, half-range, warmest minute (15:00).
AMBIENT_MEAN_C = 18.0
AMBIENT_AMPLITUDE_C = 8.0
AMBIENT_PEAK_MINUTE = 900

#: Core regulation: small ripple in quadrature with the ambient cycle, so
#: core and outside temperatures stay uncorrelated on normal days.
CORE_RIPPLE_C = 0.2
CORE_NOISE_C = 0.1
OUTSIDE_NOISE_C = 0.3

WEIGHT_BASE_KG = 50.0
WEIGHT_GAIN_PER_DAY_KG = 0.05
WEIGHT_DIURNAL_KG = 0.1
WEIGHT_NOISE_KG = 0.01

ANOMALY_CLASSES = ("swarm", "opening", "varroa-treatment", "sensor-failure")

#: Per-class signature spans, minutes.
SPAN_MINUTES = {
    "swarm": 18,  # 8-minute ramp, 10-minute decay
    "opening": 40,  # exponential recovery tail
    "varroa-treatment": 30,  # sustained warmth
    "sensor-failure": 45,  # missing readings
}

SWARM_PEAK_C = 2.0
SWARM_RAMP_MIN = 8
SWARM_DECAY_MIN = 10
SWARM_WEIGHT_STEP_KG = -1.5

OPENING_DROP_C = -6.0
OPENING_RECOVERY_TAU_MIN = 10.0
OPENING_WEIGHT_DIP_KG = -0.7
OPENING_WEIGHT_DIP_MIN = 10

VARROA_WARMTH_C = 0.5
VARROA_WEIGHT_STEP_KG = 0.5

#: Inside-sensor layouts: (column name, coreness weight). Weight 1 means a
#: pure brood-nest reading; lower weights blend toward ambient the way
#: sensors near the walls do.
LAYOUTS = {
    "single": [("temp_core", 1.0)],
    "we4bee-5": [
        ("temp_core_01", 1.0),
        ("temp_core_02", 1.0),
        ("temp_core_03", 1.0),
        ("temp_edge_01", 0.7),
        ("temp_edge_02", 0.7),
    ],
    "hobos-13": [
        ("temp_core_01", 1.0),
        ("temp_core_02", 1.0),
        ("temp_core_03", 1.0),
        ("temp_core_04", 1.0),
        ("temp_core_05", 1.0),
        ("temp_core_06", 1.0),
        ("temp_core_07", 1.0),
        ("temp_edge_01", 0.75),
        ("temp_edge_02", 0.75),
        ("temp_edge_03", 0.75),
        ("temp_edge_04", 0.75),
        ("temp_edge_05", 0.55),
        ("temp_edge_06", 0.55),
    ],
}


@dataclass(frozen=True)
class SynthConfig:
    """What to generate: length, sensor layout, seed, and anomaly schedule.

    Schedule entries are (day, class, start_minute) with day counted from
    zero and the whole signature contained inside that day.
    """

    days: int
    sensors: str = "single"
    seed: int = 0
    anomaly_schedule: tuple = ()
    start_day: date = date(2021, 6, 1)

    def __post_init__(self) -> None:
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.sensors not in LAYOUTS:
            raise ValueError(f"unknown layout {self.sensors!r}; pick from {sorted(LAYOUTS)}")
        object.__setattr__(self, "anomaly_schedule", tuple(self.anomaly_schedule))
        spans = []
        for entry in self.anomaly_schedule:
            try:
                day, kind, minute = entry
            except (TypeError, ValueError) as exc:
                raise InvalidSchedule(f"entry {entry!r} is not (day, class, minute)") from exc
            if kind not in ANOMALY_CLASSES:
                raise InvalidSchedule(f"unknown anomaly class {kind!r}")
            if not 0 <= day < self.days:
                raise InvalidSchedule(f"day {day} outside 0..{self.days - 1}")
            if not 0 <= minute < MINUTES_PER_DAY:
                raise InvalidSchedule(f"start minute {minute} outside a day")
            if minute + SPAN_MINUTES[kind] > MINUTES_PER_DAY:
                raise InvalidSchedule(
                    f"{kind} at day {day} minute {minute} runs past midnight"
                )
            g = day * MINUTES_PER_DAY + minute
            spans.append((g, g + SPAN_MINUTES[kind], kind))
        spans.sort()
        for (a0, a1, ka), (b0, b1, kb) in zip(spans, spans[1:]):
            if b0 < a1:
                raise InvalidSchedule(
                    f"scheduled {ka} and {kb} overlap (minutes {b0}..{a1})"
                )


def _diurnal_phase(minute: np.ndarray) -> np.ndarray:
    return 2.0 * np.pi * (minute - AMBIENT_PEAK_MINUTE) / MINUTES_PER_DAY


def ambient_curve(minute: np.ndarray) -> np.ndarray:
    """Outside temperature without noise, warmest at 15:00."""
    return AMBIENT_MEAN_C + AMBIENT_AMPLITUDE_C * np.cos(_diurnal_phase(minute))


def core_curve(minute: np.ndarray) -> np.ndarray:
    """Regulated brood temperature without noise: 34.5 °C plus a ripple a
    quarter cycle out of phase with the ambient curve."""
    return BROOD_TEMP_C - CORE_RIPPLE_C * np.sin(_diurnal_phase(minute))


def _swarm_shape() -> np.ndarray:
    ramp = SWARM_PEAK_C * np.arange(1, SWARM_RAMP_MIN + 1) / SWARM_RAMP_MIN
    decay = SWARM_PEAK_C * (1.0 - np.arange(1, SWARM_DECAY_MIN + 1) / SWARM_DECAY_MIN)
    return np.concatenate([ramp, decay])


def generate(config: SynthConfig) -> tuple[SensorTrace, list[DetectionEvent]]:
    """One minute-resolution trace plus its ground-truth events.

    Deterministic for a fixed config: noise is drawn from one seeded
    generator in a fixed sensor order. Sensor failures blank the first
    inside sensor; behavior anomalies reach every inside sensor scaled by
    its coreness.
    """
    layout = LAYOUTS[config.sensors]
    n = config.days * MINUTES_PER_DAY
    minute = np.arange(n, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    epoch0 = _day_number(config.start_day) * 86400

    temp_anom = np.zeros(n)
    weight_anom = np.zeros(n)
    failure = np.zeros(n, dtype=bool)
    truth: list[DetectionEvent] = []

    for day, kind, m0 in config.anomaly_schedule:
        g = day * MINUTES_PER_DAY + m0
        start_ts = epoch0 + g * 60
        end_ts = start_ts + SPAN_MINUTES[kind] * 60
        if kind == "swarm":
            shape = _swarm_shape()
            temp_anom[g : g + len(shape)] += shape
            weight_anom[g + SWARM_RAMP_MIN :] += SWARM_WEIGHT_STEP_KG
            peak_ts = start_ts + (SWARM_RAMP_MIN - 1) * 60
            score = SWARM_PEAK_C
        elif kind == "opening":
            span = SPAN_MINUTES[kind]
            tau = np.arange(span) / OPENING_RECOVERY_TAU_MIN
            temp_anom[g : g + span] += OPENING_DROP_C * np.exp(-tau)
            weight_anom[g : g + OPENING_WEIGHT_DIP_MIN] += OPENING_WEIGHT_DIP_KG
            peak_ts = start_ts
            score = abs(OPENING_DROP_C)
        elif kind == "varroa-treatment":
            span = SPAN_MINUTES[kind]
            temp_anom[g : g + span] += VARROA_WARMTH_C
            weight_anom[g:] += VARROA_WEIGHT_STEP_KG
            peak_ts = start_ts + span // 2 * 60
            score = VARROA_WARMTH_C
        else:  # sensor-failure
            failure[g : g + SPAN_MINUTES[kind]] = True
            peak_ts = start_ts + SPAN_MINUTES[kind] // 2 * 60
            score = float("inf")
        truth.append(
            DetectionEvent(
                start_ts=start_ts,
                end_ts=end_ts,
                peak_ts=peak_ts,
                peak_score=score,
                method="truth",
                class_hint=kind,
            )
        )

    core = core_curve(minute) + temp_anom
    ambient = ambient_curve(minute)

    columns = []
    rows = []
    for name, w in layout:
        vals = w * core + (1.0 - w) * ambient + rng.normal(0.0, CORE_NOISE_C, n)
        columns.append(SensorColumn(name, "°C"))
        rows.append(vals)
    rows[0][failure] = np.nan

    columns.append(SensorColumn("temp_outside", "°C"))
    rows.append(ambient + rng.normal(0.0, OUTSIDE_NOISE_C, n))

    columns.append(SensorColumn("weight", "kg"))
    rows.append(
        WEIGHT_BASE_KG
        + WEIGHT_GAIN_PER_DAY_KG * minute / MINUTES_PER_DAY
        + WEIGHT_DIURNAL_KG * np.cos(_diurnal_phase(minute))
        + weight_anom
        + rng.normal(0.0, WEIGHT_NOISE_KG, n)
    )

    trace = SensorTrace(
        hive_id=f"synth-{config.sensors}-{config.seed}",
        columns=columns,
        timestamps=epoch0 + 60 * np.arange(n, dtype=np.int64),
        values=np.stack(rows),
        utc_offset_s=0,
        metadata={
            "generator_seed": config.seed,
            "layout": config.sensors,
            "core_sensors": [name for name, w in layout if w == 1.0],
            "edge_sensors": [name for name, w in layout if w < 1.0],
        },
    )
    truth.sort(key=lambda e: e.start_ts)
    return trace, truth
