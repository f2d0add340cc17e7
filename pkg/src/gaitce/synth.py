"""Seeded generators with known ground truth.

``gen_walk`` builds a kinematic walking skeleton: vertical bobbing at the
step frequency, mediolateral sway at the stride frequency, and forward
progression whose path speed follows a per-stride speed profile with a
small per-step modulation. Forward velocity is whatever remains of the
path speed after the vertical and lateral components, so the body's 3-D
speed equals the requested speed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .data import (
    Condition,
    Group,
    RecordingDescriptor,
    SampleSeries,
    SubjectMeta,
    write_manifest,
    write_recording,
)

__all__ = [
    "CopulaParams",
    "WalkParams",
    "WalkTruth",
    "DEFAULT_DAILY_SCALE",
    "gen_gaussian_copula",
    "gen_two_condition_dataset",
    "gen_walk",
    "parse_scale",
]

OVERSAMPLE = 16
RAMP = 1.0  # s, speed ramp at walk onset and offset
MARGINALS = {
    "identity": lambda x: x,
    "exponential": np.exp,
    "cubic": lambda x: x ** 3,
}
DEFAULT_DAILY_SCALE = {"speed": 0.7, "stride_freq": 1.5}


@dataclass(frozen=True)
class WalkParams:
    """Parameters of a synthetic walk.

    ``step_length`` may be omitted and is then ``speed * step_period``;
    when given it must agree with that product to 1e-9.
    """

    speed: float = 0.7  # m/s
    step_period: float = 0.55  # s
    step_length: Optional[float] = None  # m
    vertical_amplitude: float = 0.01  # m
    ml_amplitude: float = 0.01  # m
    noise_sd: float = 0.0  # m
    duration: float = 60.0  # s
    rate: float = 30.0  # Hz
    seed: int = 0
    stride_speed_sd: float = 0.0  # m/s, stride-to-stride speed spread
    speed_modulation: float = 0.05  # relative, at the step frequency

    def __post_init__(self):
        implied = self.speed * self.step_period
        if self.step_length is None:
            object.__setattr__(self, "step_length", implied)
        elif abs(self.step_length - implied) > 1e-9 * max(1.0, implied):
            raise ValueError(
                f"step_length {self.step_length} inconsistent with speed * step_period = {implied}"
            )
        for name in ("speed", "step_period", "vertical_amplitude", "ml_amplitude", "duration", "rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("noise_sd", "stride_speed_sd", "speed_modulation"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.speed_modulation >= 1:
            raise ValueError("speed_modulation must be below 1")

    @property
    def stride_period(self) -> float:
        return 2.0 * self.step_period

    def scaled(self, **factors: float) -> "WalkParams":
        """Multiply parameters by factors.

        ``stride_freq=f`` divides the step period by ``f``. Step length is
        recomputed from speed and step period, and the stride speed spread
        follows speed unless it is scaled explicitly.
        """
        factors = dict(factors)
        if "stride_freq" in factors:
            factors["step_period"] = factors.get("step_period", 1.0) / factors.pop("stride_freq")
        known = {f.name for f in fields(self)} - {"seed", "step_length"}
        unknown = set(factors) - known
        if unknown:
            raise ValueError(f"cannot scale {', '.join(sorted(unknown))}")
        if "stride_speed_sd" not in factors and "speed" in factors:
            factors["stride_speed_sd"] = factors["speed"]
        changes = {k: getattr(self, k) * v for k, v in factors.items()}
        return replace(self, step_length=None, **changes)


@dataclass(frozen=True, eq=False)
class WalkTruth:
    speed: float
    step_period: float
    stride_period: float
    step_length: float
    walk_intervals: tuple[tuple[float, float], ...]  # seconds
    stride_speeds: np.ndarray = field(repr=False)  # mean path speed of each whole stride


def _stride_profile(tau: np.ndarray, p: WalkParams, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-stride speed on the fine walking-time grid, smoothed at stride boundaries."""
    n_strides = int(math.ceil(tau[-1] / p.stride_period)) + 1
    levels = np.full(n_strides, p.speed)
    if p.stride_speed_sd > 0:
        levels = levels + p.stride_speed_sd * rng.standard_normal(n_strides)
        levels = np.maximum(levels, 0.2 * p.speed)
    idx = np.minimum((tau / p.stride_period).astype(int), n_strides - 1)
    base = levels[idx]
    if p.stride_speed_sd > 0:
        # raised-cosine blend over 20% of a stride around each boundary
        width = max(3, int(round(0.2 * p.stride_period / (tau[1] - tau[0]))))
        kernel = np.hanning(width + 2)[1:-1]
        kernel /= kernel.sum()
        padded = np.concatenate([np.full(width, base[0]), base, np.full(width, base[-1])])
        base = np.convolve(padded, kernel, mode="same")[width:-width]
    return base, levels


def _ease(x: np.ndarray) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(np.pi * np.clip(x, 0.0, 1.0))


def gen_walk(
    params: WalkParams,
    schedule: Optional[Sequence[tuple[float, bool]]] = None,
    *,
    subject_id: str = "synthetic",
    condition: Condition = Condition.TUG,
    tug_score: float = 10.0,
    group: Group = Group.CONTROL,
) -> tuple[SampleSeries, WalkTruth]:
    """Generate a walk, optionally interrupted by standing still.

    Parameters
    ----------
    params : WalkParams
    schedule : sequence of (seconds, walking) pairs, optional
        Alternating walk/stand segments. Defaults to walking for
        ``params.duration`` seconds. Gait phase carries over a pause.
    """
    p = params
    if p.rate < 4.0 / p.step_period:
        raise ValueError(f"undersampled: rate {p.rate} Hz < 4 / step_period = {4.0 / p.step_period:.3g} Hz")
    if schedule is None:
        schedule = [(p.duration, True)]
    rng = np.random.default_rng(p.seed)

    total = float(sum(d for d, _ in schedule))
    n = int(math.floor(total * p.rate + 1e-9)) + 1
    t = np.arange(n) / p.rate

    # walking time elapsed at each output sample; its rate eases in and out
    # over RAMP seconds next to a pause, so gait starts and stops smoothly
    fine = np.arange(int(math.ceil(total * p.rate * OVERSAMPLE)) + 1) / (p.rate * OVERSAMPLE)
    pace = np.zeros(fine.size)
    intervals = []
    clock = 0.0
    for i, (dur, walking) in enumerate(schedule):
        if walking:
            inside = (fine >= clock) & (fine <= clock + dur)
            r = np.ones(int(inside.sum()))
            ramp = min(RAMP, dur / 4.0)
            if i > 0 and not schedule[i - 1][1]:
                r *= _ease((fine[inside] - clock) / ramp)
            if i + 1 < len(schedule) and not schedule[i + 1][1]:
                r *= _ease((clock + dur - fine[inside]) / ramp)
            pace[inside] = np.maximum(pace[inside], r)
            intervals.append((clock, clock + dur))
        clock += dur
    tau_fine = cumulative_trapezoid(pace, fine, initial=0.0)
    tau_t = t if len(schedule) == 1 and schedule[0][1] else np.interp(t, fine, tau_fine)
    walked = float(tau_t[-1])

    omega = 2.0 * math.pi / p.step_period
    dtau = 1.0 / (p.rate * OVERSAMPLE)
    tau = np.arange(int(math.ceil(walked / dtau)) + 2) * dtau
    base, _ = _stride_profile(tau, p, rng)
    path_speed = base * (1.0 + p.speed_modulation * np.cos(omega * tau))
    v_v = -p.vertical_amplitude * omega * np.sin(omega * tau)
    v_ml = p.ml_amplitude * (omega / 2.0) * np.cos(omega * tau / 2.0)
    v_ap = np.sqrt(np.maximum(path_speed ** 2 - v_v ** 2 - v_ml ** 2, 0.0))
    ap = cumulative_trapezoid(v_ap, tau, initial=0.0)

    pos_ap = np.interp(tau_t, tau, ap)
    pos_v = p.vertical_amplitude * np.cos(omega * tau_t)
    pos_ml = p.ml_amplitude * np.sin(omega * tau_t / 2.0)
    if p.noise_sd > 0:
        noise = rng.normal(0.0, p.noise_sd, size=(n, 3))
        pos_ap = pos_ap + noise[:, 0]
        pos_ml = pos_ml + noise[:, 1]
        pos_v = pos_v + noise[:, 2]

    # realised mean path speed over each whole stride of walking time
    per = int(round(p.stride_period / dtau))
    whole = (tau.size - 1) // per
    arc = cumulative_trapezoid(path_speed, tau, initial=0.0)
    stride_speeds = np.diff(arc[: whole * per + 1: per]) / p.stride_period if whole else np.array([])

    series = SampleSeries(
        subject_id=subject_id, condition=condition, sample_rate=p.rate, t=t,
        pos_ap=pos_ap, pos_ml=pos_ml, pos_v=pos_v, tug_score=tug_score, group=group,
    )
    truth = WalkTruth(p.speed, p.step_period, p.stride_period, p.step_length,
                      tuple(intervals), stride_speeds)
    return series, truth


# ---------------------------------------------------------------------------
# copula data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CopulaParams:
    n: int = 1000
    rho: float = 0.0
    marginals: tuple[str, str] = ("identity", "identity")
    seed: int = 0

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly between -1 and 1")
        for m in self.marginals:
            if m not in MARGINALS:
                raise ValueError(f"unknown marginal transform {m!r}")


def gen_gaussian_copula(params: CopulaParams) -> tuple[np.ndarray, float]:
    """Bivariate Gaussian draws with monotone marginal transforms.

    Returns the (n, 2) sample and its mutual information
    ``-0.5 * log(1 - rho**2)`` in nats.
    """
    rho = params.rho
    rng = np.random.default_rng(params.seed)
    z = rng.standard_normal((params.n, 2))
    x = z[:, 0]
    y = rho * x + math.sqrt(1.0 - rho * rho) * z[:, 1]
    data = np.column_stack([MARGINALS[params.marginals[0]](x), MARGINALS[params.marginals[1]](y)])
    return data, -0.5 * math.log(1.0 - rho * rho)


# ---------------------------------------------------------------------------
# two-condition fixture
# ---------------------------------------------------------------------------

def parse_scale(text: str) -> dict[str, float]:
    """Parse ``"speed=0.7,stride_freq=1.5"`` into a factor mapping."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"bad scale item {item!r}, expected name=factor")
        out[key.strip()] = float(value)
    return out


def gen_two_condition_dataset(
    base: WalkParams,
    daily_scale: Mapping[str, float],
    subjects: int,
    seed: int,
    out_dir,
    patient_fraction: float = 0.2,
) -> Path:
    """Write a manifest plus one TUG and one Daily recording per subject.

    Subject speeds vary around ``base.speed`` (patients walk 25% slower);
    the stride speed spread scales with the subject's speed.
    Each subject's TUG score is ``20 - 12 * speed + noise``, so slower
    walkers score worse. TUG recordings are one 60 s walk between short
    pauses; Daily recordings alternate walking and standing, with
    ``daily_scale`` applied to the walk parameters.

    Returns the manifest path.
    """
    if subjects < 2:
        raise ValueError("need at least 2 subjects")
    out = Path(out_dir)
    rec_dir = out / "recordings"
    rec_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    width = max(2, len(str(subjects - 1)))
    for i in range(subjects):
        rng = np.random.default_rng([seed, i])
        sid = f"S{i:0{width}d}"
        patient = bool(rng.uniform() < patient_fraction)
        factor = float(np.clip(1.0 + 0.15 * rng.standard_normal(), 0.6, 1.4)) * (0.75 if patient else 1.0)
        speed = base.speed * factor
        tug_score = round(max(3.0, 20.0 - 12.0 * speed + 0.5 * rng.standard_normal()), 2)
        tug_seed, daily_seed = (int(s) for s in rng.integers(0, 2 ** 31, size=2))
        tug_params = replace(
            base, speed=speed, step_length=None,
            stride_speed_sd=base.stride_speed_sd * factor, seed=tug_seed,
        )
        daily_params = replace(tug_params.scaled(**daily_scale), seed=daily_seed)
        walks = rng.integers(30, 46, size=2)
        stands = rng.integers(6, 13, size=3)
        daily_schedule = [
            (float(stands[0]), False), (float(walks[0]), True), (float(stands[1]), False),
            (float(walks[1]), True), (float(stands[2]), False),
        ]
        meta = SubjectMeta(sid, Group.PATIENT if patient else Group.CONTROL, "synthetic")
        for cond, params, schedule in (
            (Condition.TUG, tug_params, [(2.0, False), (60.0, True), (2.0, False)]),
            (Condition.DAILY, daily_params, daily_schedule),
        ):
            series, _ = gen_walk(params, schedule, subject_id=sid, condition=cond,
                                 tug_score=tug_score, group=meta.group)
            path = rec_dir / f"{sid}_{cond.value.lower()}.csv"
            write_recording(path, series)
            rows.append((meta, RecordingDescriptor(path, cond, tug_score, params.rate)))
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest
