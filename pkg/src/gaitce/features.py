"""Per-bout gait characteristics.

Nine characteristics are computed for every bout:

===================  =====================================================
speed                mean body speed
pace                 mean horizontal displacement per step
speed_var            SD of stride speeds, 10% trimmed per tail
stride_time          mean time from a vertical peak to the second-next one
stride_time_var      SD of stride times
stride_freq          median of ML modal freq and half the V and AP ones
movement_intensity   SD of the acceleration signal
low_freq_pct         spectral power below a threshold over total power
accel_range          max minus min of the acceleration signal
===================  =====================================================

Steps are the peaks of the detrended vertical position; a stride spans a
peak and the second-next peak. Characteristics that cannot be computed on
a bout (too few peaks, flat spectra) come back as ``None``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Union

import numpy as np
from scipy import signal

from .data import SampleSeries, derive_acceleration, derive_speed
from .segmentation import Bout

__all__ = [
    "FEATURE_NAMES",
    "FeatureConfig",
    "FeatureVector",
    "InsufficientStrides",
    "Spectrum",
    "StrideEvents",
    "acceleration_signal",
    "detect_stride_events",
    "extract_feature_vector",
    "feature_acceleration_range",
    "feature_gait_speed",
    "feature_low_freq_percentage",
    "feature_movement_intensity",
    "feature_pace",
    "feature_speed_variability",
    "feature_stride_frequency",
    "feature_stride_time",
    "feature_stride_time_variability",
    "find_steps",
    "low_frequency_fraction",
    "modal_frequency",
    "power_spectrum",
    "trimmed_std",
]

FEATURE_NAMES = (
    "speed",
    "pace",
    "speed_var",
    "stride_time",
    "stride_time_var",
    "stride_freq",
    "movement_intensity",
    "low_freq_pct",
    "accel_range",
)

GAIT_BAND = (0.3, 5.0)  # Hz
MIN_SPECTRUM_SAMPLES = 64
BAND_POWER_FLOOR = 1e-10  # in-band share below which a band counts as empty

BoutLike = Union[Bout, SampleSeries]


class InsufficientStrides(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    prominence_frac: float = 0.3
    min_step_time: float = 0.3  # s
    low_freq_threshold: float = 0.7  # Hz
    band: tuple[float, float] = GAIT_BAND
    trim_frac: float = 0.1
    aggregation: str = "magnitude"  # or "pooled"

    def __post_init__(self):
        if self.aggregation not in ("magnitude", "pooled"):
            raise ValueError(f"aggregation must be 'magnitude' or 'pooled', got {self.aggregation!r}")


def _series(bout: BoutLike) -> SampleSeries:
    return bout.series() if isinstance(bout, Bout) else bout


# ---------------------------------------------------------------------------
# stride events
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StrideEvents:
    peak_indices: np.ndarray
    stride_intervals: np.ndarray  # s
    stride_speeds: np.ndarray  # m/s

    @property
    def n_peaks(self) -> int:
        return int(self.peak_indices.size)


def find_steps(
    bout: BoutLike,
    prominence_frac: float = 0.3,
    min_step_time: float = 0.3,
) -> StrideEvents:
    """Vertical-position peaks and the strides between them, however few."""
    s = _series(bout)
    v = signal.detrend(s.pos_v, type="linear")
    sd = float(np.std(v))
    if sd == 0.0 or s.n < 3:
        peaks = np.array([], dtype=int)
    else:
        distance = max(1, int(math.ceil(min_step_time * s.sample_rate - 1e-9)))
        peaks, _ = signal.find_peaks(v, prominence=prominence_frac * sd, distance=distance)
    intervals = s.t[peaks[2:]] - s.t[peaks[:-2]] if peaks.size >= 3 else np.array([])
    if peaks.size >= 3:
        speed = derive_speed(s)
        csum = np.concatenate([[0.0], np.cumsum(speed)])
        a, b = peaks[:-2], peaks[2:]
        # half-open windows: a perfectly periodic walk gives equal stride speeds
        speeds = (csum[b] - csum[a]) / (b - a)
    else:
        speeds = np.array([])
    return StrideEvents(peaks.astype(int), np.asarray(intervals, float), np.asarray(speeds, float))


def detect_stride_events(
    bout: BoutLike,
    prominence_frac: float = 0.3,
    min_step_time: float = 0.3,
) -> StrideEvents:
    """Like :func:`find_steps` but raises when fewer than 3 peaks are found."""
    events = find_steps(bout, prominence_frac, min_step_time)
    if events.n_peaks < 3:
        raise InsufficientStrides(f"insufficient strides: {events.n_peaks} peak(s) found")
    return events


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs: np.ndarray  # Hz
    power: np.ndarray  # units^2 / Hz

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def power_spectrum(x, rate: float, window: str = "hann", nperseg: Optional[int] = None) -> Spectrum:
    """Welch power spectral density.

    Segments of ``min(256, n // 2)`` samples with 50% overlap; each segment
    has its mean removed before windowing.

    Parameters
    ----------
    x : array_like
        Uniformly sampled signal, at least 64 samples.
    rate : float
        Sampling rate in Hz.
    window, nperseg :
        Overrides for the defaults above. ``window="boxcar"`` with
        ``nperseg=len(x)`` gives a single-segment periodogram.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < MIN_SPECTRUM_SAMPLES:
        raise ValueError(f"signal too short for a spectrum: {n} < {MIN_SPECTRUM_SAMPLES} samples")
    if nperseg is None:
        nperseg = min(256, n // 2)
    freqs, power = signal.welch(
        x, fs=rate, window=window, nperseg=nperseg, noverlap=nperseg // 2,
        detrend="constant", scaling="density",
    )
    return Spectrum(freqs, np.maximum(power, 0.0))


def modal_frequency(spec: Spectrum, band: tuple[float, float] = GAIT_BAND) -> float:
    """Frequency of the strongest bin inside ``band`` (inclusive).

    Raises ``ValueError`` when the band holds no more than a 1e-10 share of
    the total power.
    """
    lo, hi = band
    mask = (spec.freqs >= lo) & (spec.freqs <= hi)
    if not mask.any():
        raise ValueError(f"no spectral bin inside {lo}-{hi} Hz")
    p = spec.power[mask]
    # leakage only: treat as empty
    if not np.sum(p) > BAND_POWER_FLOOR * np.sum(spec.power):
        raise ValueError(f"no spectral power inside {lo}-{hi} Hz")
    return float(spec.freqs[mask][np.argmax(p)])


def low_frequency_fraction(x, rate: float, threshold: float = 0.7) -> float:
    """Share of (mean-removed) spectral power at or below ``threshold`` Hz."""
    spec = power_spectrum(x, rate)
    return _low_fraction([spec], threshold)


def _low_fraction(spectra, threshold: float) -> float:
    total = sum(float(np.sum(s.power)) for s in spectra)
    if not total > 0:
        return 0.0
    low = sum(float(np.sum(s.power[s.freqs <= threshold])) for s in spectra)
    return min(max(low / total, 0.0), 1.0)


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------

def trimmed_std(values, frac: float = 0.1) -> float:
    """Sample SD after dropping the ``ceil(frac * n)`` smallest and largest values."""
    x = np.sort(np.asarray(values, dtype=float))
    cut = int(math.ceil(frac * x.size - 1e-12))
    kept = x[cut:x.size - cut]
    if kept.size < 2:
        raise ValueError("too few values left after trimming")
    return float(np.std(kept, ddof=1))


def feature_gait_speed(bout: BoutLike) -> float:
    return float(np.mean(derive_speed(_series(bout))))


def feature_pace(bout: BoutLike, events: StrideEvents) -> Optional[float]:
    """Mean horizontal (AP-ML) displacement between consecutive peaks."""
    if events.n_peaks < 2:
        return None
    s = _series(bout)
    p = events.peak_indices
    d = np.hypot(np.diff(s.pos_ap[p]), np.diff(s.pos_ml[p]))
    return float(np.mean(d))


def feature_speed_variability(events: StrideEvents, trim_frac: float = 0.1) -> Optional[float]:
    if events.stride_speeds.size < 5:
        return None
    return trimmed_std(events.stride_speeds, trim_frac)


def feature_stride_time(events: StrideEvents) -> Optional[float]:
    if events.stride_intervals.size < 1:
        return None
    return float(np.mean(events.stride_intervals))


def feature_stride_time_variability(events: StrideEvents) -> Optional[float]:
    # >= 5 peaks, i.e. >= 3 stride intervals
    if events.n_peaks < 5:
        return None
    return float(np.std(events.stride_intervals, ddof=1))


def feature_stride_frequency(bout: BoutLike, band: tuple[float, float] = GAIT_BAND) -> Optional[float]:
    """Median of the ML modal frequency and half the V and AP modal frequencies.

    Each position axis is linearly detrended first so forward progression
    does not swamp the AP spectrum.
    """
    s = _series(bout)
    modal = {}
    try:
        for name, x in (("ml", s.pos_ml), ("v", s.pos_v), ("ap", s.pos_ap)):
            x = signal.detrend(x, type="linear")
            if np.ptp(x) <= 1e-12:
                return None
            modal[name] = modal_frequency(power_spectrum(x, s.sample_rate), band)
    except ValueError:
        return None
    return float(np.median([modal["ml"], modal["v"] / 2.0, modal["ap"] / 2.0]))


def acceleration_signal(bout: BoutLike) -> np.ndarray:
    """Euclidean norm of the three-axis acceleration."""
    acc = derive_acceleration(_series(bout))
    return np.sqrt(np.sum(acc * acc, axis=1))


def feature_movement_intensity(bout: BoutLike, aggregation: str = "magnitude") -> float:
    if aggregation == "pooled":
        acc = derive_acceleration(_series(bout))
        return float(math.sqrt(np.sum(np.var(acc, axis=0, ddof=1))))
    return float(np.std(acceleration_signal(bout), ddof=1))


def feature_low_freq_percentage(
    bout: BoutLike, threshold: float = 0.7, aggregation: str = "magnitude"
) -> Optional[float]:
    s = _series(bout)
    try:
        if aggregation == "pooled":
            acc = derive_acceleration(s)
            spectra = [power_spectrum(acc[:, i], s.sample_rate) for i in range(3)]
        else:
            spectra = [power_spectrum(acceleration_signal(s), s.sample_rate)]
    except ValueError:
        return None
    return _low_fraction(spectra, threshold)


def feature_acceleration_range(bout: BoutLike, aggregation: str = "magnitude") -> float:
    if aggregation == "pooled":
        acc = derive_acceleration(_series(bout))
        return float(np.max(np.ptp(acc, axis=0)))
    return float(np.ptp(acceleration_signal(bout)))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureVector:
    speed: Optional[float] = None
    pace: Optional[float] = None
    speed_var: Optional[float] = None
    stride_time: Optional[float] = None
    stride_time_var: Optional[float] = None
    stride_freq: Optional[float] = None
    movement_intensity: Optional[float] = None
    low_freq_pct: Optional[float] = None
    accel_range: Optional[float] = None

    @property
    def present(self) -> dict[str, bool]:
        return {f.name: getattr(self, f.name) is not None for f in fields(self)}

    @property
    def complete(self) -> bool:
        return all(self.present.values())

    def as_dict(self) -> dict[str, Optional[float]]:
        return asdict(self)


def extract_feature_vector(bout: BoutLike, config: FeatureConfig = FeatureConfig()) -> FeatureVector:
    """All nine characteristics for one bout; uncomputable ones are ``None``."""
    s = _series(bout)
    events = find_steps(s, config.prominence_frac, config.min_step_time)
    values = dict(
        speed=feature_gait_speed(s),
        pace=feature_pace(s, events),
        speed_var=feature_speed_variability(events, config.trim_frac),
        stride_time=feature_stride_time(events),
        stride_time_var=feature_stride_time_variability(events),
        stride_freq=feature_stride_frequency(s, config.band),
        movement_intensity=None,
        low_freq_pct=feature_low_freq_percentage(s, config.low_freq_threshold, config.aggregation),
        accel_range=None,
    )
    if s.n >= 3:
        values["movement_intensity"] = feature_movement_intensity(s, config.aggregation)
        values["accel_range"] = feature_acceleration_range(s, config.aggregation)
    for k, v in values.items():
        if v is not None and not math.isfinite(v):
            values[k] = None
    return FeatureVector(**values)
