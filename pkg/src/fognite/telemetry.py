"""Synthetic smart-meter streams and their preparation for the forecaster.

A stream is a regularly sampled consumption signal (daily sinusoid plus
appliance pulses plus bounded noise) in which a configurable fraction of
readings is missing. Gaps are filled by linear interpolation before the
stream is cut into supervised (window, next value) samples.

Note on imputation: linear interpolation is a deliberate simple stand-in;
the workload it models is defined by reading counts, not by a particular
recovery algorithm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

GAP = float("nan")


def is_gap(value: float) -> bool:
    return math.isnan(value)


@dataclass
class PatternConfig:
    """Parameters of the synthetic consumption signal (all in kW)."""

    base_kw: float = 1.0
    daily_amplitude_kw: float = 0.5
    day_ms: float = 86_400_000.0
    pulse_kw: float = 0.8
    pulse_prob: float = 0.02       # chance a pulse starts at any reading
    pulse_len: int = 8             # readings per pulse
    noise_kw: float = 0.05         # uniform noise in [-noise, +noise]
    gap_fraction: float = 0.05


@dataclass
class MeterStream:
    """One meter's readings: (t_ms, kw) pairs, NaN marking a gap."""

    meter_id: str
    rate_hz: float
    t_ms: np.ndarray
    kw: np.ndarray

    def __len__(self) -> int:
        return len(self.t_ms)

    def gap_count(self) -> int:
        return int(np.isnan(self.kw).sum())


@dataclass
class Sample:
    """Supervised pair: a window of consecutive readings and the next one."""

    input: np.ndarray
    target: float


@dataclass
class SampleSet:
    """Normalized samples plus the stats needed to undo the normalization."""

    samples: list[Sample]
    kw_min: float
    kw_max: float

    def denormalize(self, value: float) -> float:
        return value * (self.kw_max - self.kw_min) + self.kw_min


def generate_stream(
    meter_id: str,
    duration_ms: float,
    rate_hz: float,
    pattern: PatternConfig,
    seed: int,
) -> MeterStream:
    """Generate a seeded synthetic stream.

    Reading i sits at t = i * 1000/rate_hz; the count is floor(duration *
    rate / 1000). Gaps are never placed on the first or last reading so the
    stream is always imputable.
    """
    if duration_ms <= 0 or rate_hz <= 0:
        raise InvalidInputError("duration_ms and rate_hz must be > 0")
    rng = np.random.default_rng(seed)
    n = int(duration_ms * rate_hz / 1000.0)
    spacing = 1000.0 / rate_hz
    t = np.arange(n, dtype=np.float64) * spacing

    kw = pattern.base_kw + pattern.daily_amplitude_kw * np.sin(
        2.0 * math.pi * t / pattern.day_ms
    )

    if pattern.pulse_kw > 0.0 and pattern.pulse_prob > 0.0:
        starts = rng.random(n) < pattern.pulse_prob
        pulse = np.zeros(n)
        for i in np.flatnonzero(starts):
            pulse[i : i + pattern.pulse_len] = pattern.pulse_kw
        kw = kw + pulse

    if pattern.noise_kw > 0.0:
        kw = kw + rng.uniform(-pattern.noise_kw, pattern.noise_kw, size=n)

    kw = np.maximum(kw, 0.0)

    if pattern.gap_fraction > 0.0 and n > 2:
        interior = np.arange(1, n - 1)
        n_gaps = int(round(pattern.gap_fraction * n))
        n_gaps = min(n_gaps, len(interior))
        if n_gaps > 0:
            gap_idx = rng.choice(interior, size=n_gaps, replace=False)
            kw[gap_idx] = GAP

    return MeterStream(meter_id=meter_id, rate_hz=rate_hz, t_ms=t, kw=kw)


def impute_gaps(stream: MeterStream) -> MeterStream:
    """Fill gaps by linear interpolation between the nearest real readings.

    Idempotent; readings that are present are returned bit-identical.
    """
    kw = stream.kw
    if len(kw) == 0:
        return MeterStream(stream.meter_id, stream.rate_hz, stream.t_ms.copy(), kw.copy())
    gaps = np.isnan(kw)
    if gaps[0] or gaps[-1]:
        raise InvalidInputError(
            f"stream {stream.meter_id}: gap at a boundary cannot be interpolated"
        )
    if not gaps.any():
        return MeterStream(stream.meter_id, stream.rate_hz, stream.t_ms.copy(), kw.copy())
    filled = kw.copy()
    filled[gaps] = np.interp(stream.t_ms[gaps], stream.t_ms[~gaps], kw[~gaps])
    return MeterStream(stream.meter_id, stream.rate_hz, stream.t_ms.copy(), filled)


def make_windows(stream: MeterStream, window: int, stride: int = 1) -> list[Sample]:
    """Cut a gap-free stream into (window, next value) samples.

    Sample i covers readings [i*stride, i*stride + window); its target is
    the reading right after the window. A stream shorter than window+1
    yields no samples.
    """
    if stride < 1 or window < 1:
        raise InvalidInputError("window and stride must be >= 1")
    if np.isnan(stream.kw).any():
        raise InvalidInputError(f"stream {stream.meter_id} still contains gaps")
    n = len(stream.kw)
    count = (n - window - 1) // stride + 1 if n >= window + 1 else 0
    samples = []
    for i in range(count):
        lo = i * stride
        samples.append(
            Sample(input=stream.kw[lo : lo + window].copy(), target=float(stream.kw[lo + window]))
        )
    return samples


def normalize_samples(samples: list[Sample]) -> SampleSet:
    """Min-max normalize a sample list to [0, 1], remembering the scale.

    A constant signal maps to all zeros (scale pinned to 1 to avoid 0/0).
    """
    if not samples:
        return SampleSet(samples=[], kw_min=0.0, kw_max=1.0)
    lo = min(float(s.input.min()) for s in samples)
    lo = min(lo, min(s.target for s in samples))
    hi = max(float(s.input.max()) for s in samples)
    hi = max(hi, max(s.target for s in samples))
    span = hi - lo if hi > lo else 1.0
    normed = [
        Sample(input=(s.input - lo) / span, target=(s.target - lo) / span)
        for s in samples
    ]
    return SampleSet(samples=normed, kw_min=lo, kw_max=lo + span)


def write_csv(streams: list[MeterStream], path: str | Path) -> None:
    """Export streams as CSV rows (meter_id, t_ms, kw); gap = empty cell."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["meter_id", "t_ms", "kw"])
        for stream in streams:
            for t, v in zip(stream.t_ms, stream.kw):
                writer.writerow([stream.meter_id, repr(float(t)), "" if is_gap(v) else repr(float(v))])


def read_csv(path: str | Path) -> list[MeterStream]:
    """Import streams written by :func:`write_csv`, preserving gaps."""
    by_meter: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kw = GAP if row["kw"] == "" else float(row["kw"])
            by_meter.setdefault(row["meter_id"], []).append((float(row["t_ms"]), kw))
    streams = []
    for meter_id, rows in by_meter.items():
        t = np.array([r[0] for r in rows])
        kw = np.array([r[1] for r in rows])
        rate = 1000.0 / (t[1] - t[0]) if len(t) > 1 else 1.0
        streams.append(MeterStream(meter_id=meter_id, rate_hz=rate, t_ms=t, kw=kw))
    return streams
