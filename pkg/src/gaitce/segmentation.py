"""Walking-interval detection and fixed-length bout sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .data import Condition, SampleSeries, derive_speed

__all__ = [
    "DEFAULT_BOUT_LENGTH",
    "DEFAULT_BOUT_STEP",
    "DEFAULT_SPEED_THRESHOLD",
    "SMOOTHING_WINDOW",
    "WalkInterval",
    "Bout",
    "smoothed_speed",
    "detect_walking",
    "bout_offsets",
    "generate_bouts",
]

DEFAULT_BOUT_LENGTH = 15.0
DEFAULT_BOUT_STEP = 3.0
DEFAULT_SPEED_THRESHOLD = 0.1
SMOOTHING_WINDOW = 0.5  # seconds

# absorbs float error when durations land exactly on a bout boundary
_EPS = 1e-9


@dataclass(frozen=True)
class WalkInterval:
    start_index: int
    end_index: int  # inclusive
    mean_speed: float

    def duration(self, series: SampleSeries) -> float:
        return float(series.t[self.end_index] - series.t[self.start_index])


@dataclass(frozen=True, eq=False)
class Bout:
    """A window of continuous walking; samples ``start_index:stop_index`` of ``source``."""

    source: SampleSeries
    start_time: float
    length: float
    start_index: int
    stop_index: int

    @property
    def subject_id(self) -> str:
        return self.source.subject_id

    @property
    def condition(self) -> Condition:
        return self.source.condition

    @property
    def tug_score(self) -> float:
        return self.source.tug_score

    @property
    def sample_rate(self) -> float:
        return self.source.sample_rate

    def series(self) -> SampleSeries:
        return self.source.slice(self.start_index, self.stop_index)


def smoothed_speed(series: SampleSeries, window: float = SMOOTHING_WINDOW) -> np.ndarray:
    """Moving-average speed over ``window`` seconds (edges padded with the end value)."""
    size = max(1, int(round(window * series.sample_rate)))
    return uniform_filter1d(derive_speed(series), size=size, mode="nearest")


def detect_walking(
    series: SampleSeries,
    speed_threshold: float = DEFAULT_SPEED_THRESHOLD,
    min_duration: float = DEFAULT_BOUT_LENGTH,
) -> list[WalkInterval]:
    """Maximal runs where smoothed speed exceeds ``speed_threshold``.

    Runs shorter than ``min_duration`` seconds are discarded. The result is
    ordered and the intervals are disjoint.
    """
    speed = smoothed_speed(series)
    moving = speed > speed_threshold
    if not moving.any():
        return []
    edges = np.diff(np.concatenate([[0], moving.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    out = []
    for a, b in zip(starts, stops):
        if series.t[b] - series.t[a] + _EPS >= min_duration:
            out.append(WalkInterval(int(a), int(b), float(np.mean(speed[a:b + 1]))))
    return out


def bout_offsets(duration: float, length: float, step: float) -> list[float]:
    """Start offsets ``k * step`` for every bout of ``length`` fitting in ``duration``."""
    if not length > 0 or not step > 0:
        raise ValueError("bout length and step must be positive")
    if duration + _EPS < length:
        return []
    count = int(math.floor((duration - length) / step + _EPS)) + 1
    return [k * step for k in range(count)]


def generate_bouts(
    series: SampleSeries,
    intervals: Sequence[WalkInterval],
    bout_length: float = DEFAULT_BOUT_LENGTH,
    bout_step: float = DEFAULT_BOUT_STEP,
) -> list[Bout]:
    """Slice each walking interval into overlapping fixed-length bouts.

    Bouts never cross interval boundaries; intervals shorter than
    ``bout_length`` contribute nothing.
    """
    rate = series.sample_rate
    span = int(round(bout_length * rate))
    bouts = []
    for iv in intervals:
        t0 = float(series.t[iv.start_index])
        for offset in bout_offsets(iv.duration(series), bout_length, bout_step):
            start_time = t0 + offset
            # nearest sample at or after start_time (half-period tolerance)
            start = int(np.searchsorted(series.t, start_time - 0.5 / rate))
            start = max(start, iv.start_index)
            stop = min(start + span + 1, iv.end_index + 1)
            if stop - start < 2:
                continue
            bouts.append(Bout(series, start_time, bout_length, start, stop))
    return bouts
