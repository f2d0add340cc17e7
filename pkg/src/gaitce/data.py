"""Recording and manifest types, file parsing, and finite-difference kinematics.

A recording is a body-centre trajectory sampled on three named axes:
anteroposterior (AP), mediolateral (ML) and vertical (V). Speed and
acceleration are derived from it by finite differences.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "Condition",
    "Group",
    "SubjectMeta",
    "RecordingDescriptor",
    "SampleSeries",
    "InputError",
    "MANIFEST_COLUMNS",
    "RECORDING_COLUMNS",
    "parse_manifest",
    "write_manifest",
    "parse_recording",
    "write_recording",
    "derive_speed",
    "derive_acceleration",
    "resample",
]

MANIFEST_COLUMNS = ("subject_id", "group", "site", "condition", "tug_score", "sample_rate", "path")
RECORDING_COLUMNS = ("t", "pos_ap", "pos_ml", "pos_v")

# max relative deviation of a sampling gap from 1/sample_rate
UNIFORM_GAP_TOL = 0.10


class InputError(ValueError):
    """Malformed or inconsistent input file."""


class Condition(str, enum.Enum):
    TUG = "TUG"
    DAILY = "Daily"

    @classmethod
    def parse(cls, token: str) -> "Condition":
        key = str(token).strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise InputError(f"unknown condition {token!r} (expected TUG or Daily)")

    def __str__(self) -> str:
        return self.value


class Group(str, enum.Enum):
    PATIENT = "patient"
    CONTROL = "control"

    @classmethod
    def parse(cls, token: str) -> "Group":
        key = str(token).strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise InputError(f"unknown group {token!r} (expected patient or control)")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SubjectMeta:
    subject_id: str
    group: Group
    site: str = ""


@dataclass(frozen=True)
class RecordingDescriptor:
    """One manifest row: where a recording lives and how to interpret it."""

    path: Path
    condition: Condition
    tug_score: float
    sample_rate: float


def _frozen(a: Iterable[float]) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSeries:
    """A single recording of body-centre position on a known time grid.

    Arrays are copied and made read-only on construction. Uniform sampling
    is not enforced here (see :meth:`is_uniform`); the parsers and
    :func:`resample` guarantee it for their outputs.
    """

    subject_id: str
    condition: Condition
    sample_rate: float
    t: np.ndarray
    pos_ap: np.ndarray
    pos_ml: np.ndarray
    pos_v: np.ndarray
    tug_score: float
    group: Group = Group.CONTROL
    site: str = ""

    def __post_init__(self):
        for name in ("t", "pos_ap", "pos_ml", "pos_v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "condition", Condition(self.condition))
        object.__setattr__(self, "group", Group(self.group))
        if not self.sample_rate > 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        if not self.tug_score > 0:
            raise InputError(f"tug_score must be positive, got {self.tug_score}")
        n = self.t.size
        if n < 2:
            raise InputError("a recording needs at least 2 samples")
        for name in ("pos_ap", "pos_ml", "pos_v"):
            if getattr(self, name).size != n:
                raise InputError(f"channel {name} has length {getattr(self, name).size}, expected {n}")
        bad = np.flatnonzero(np.diff(self.t) <= 0)
        if bad.size:
            raise InputError(f"non-monotone timestamp at sample index {bad[0] + 1}")

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def positions(self) -> np.ndarray:
        """Positions as an (n, 3) array in AP, ML, V order."""
        return np.column_stack([self.pos_ap, self.pos_ml, self.pos_v])

    def is_uniform(self, tol: float = UNIFORM_GAP_TOL) -> bool:
        dt = 1.0 / self.sample_rate
        return bool(np.max(np.abs(np.diff(self.t) - dt)) <= tol * dt)

    def slice(self, start: int, stop: int) -> "SampleSeries":
        """Samples ``start`` (inclusive) to ``stop`` (exclusive)."""
        return SampleSeries(
            subject_id=self.subject_id,
            condition=self.condition,
            sample_rate=self.sample_rate,
            t=self.t[start:stop],
            pos_ap=self.pos_ap[start:stop],
            pos_ml=self.pos_ml[start:stop],
            pos_v=self.pos_v[start:stop],
            tug_score=self.tug_score,
            group=self.group,
            site=self.site,
        )

    def with_positions(self, pos_ap=None, pos_ml=None, pos_v=None, t=None) -> "SampleSeries":
        return SampleSeries(
            subject_id=self.subject_id,
            condition=self.condition,
            sample_rate=self.sample_rate,
            t=self.t if t is None else t,
            pos_ap=self.pos_ap if pos_ap is None else pos_ap,
            pos_ml=self.pos_ml if pos_ml is None else pos_ml,
            pos_v=self.pos_v if pos_v is None else pos_v,
            tug_score=self.tug_score,
            group=self.group,
            site=self.site,
        )


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _parse_float(value: str, row: int, name: str, positive: bool = True) -> float:
    try:
        x = float(value.strip())
    except (ValueError, AttributeError):
        raise InputError(f"row {row}: field {name!r} is not a number: {value!r}") from None
    if not math.isfinite(x) or (positive and x <= 0):
        raise InputError(f"row {row}: field {name!r} must be a positive finite number, got {value!r}")
    return x


def parse_manifest(path) -> list[tuple[SubjectMeta, RecordingDescriptor]]:
    """Read a recording manifest.

    Row numbers in error messages count the header as row 1, so they match
    what a spreadsheet shows. Recording paths are resolved relative to the
    manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries: list[tuple[SubjectMeta, RecordingDescriptor]] = []
    subjects: dict[str, SubjectMeta] = {}
    seen: set[tuple[str, Path]] = set()

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty manifest (no header)") from None
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise InputError(f"{path}: manifest header lacks column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in MANIFEST_COLUMNS}

        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise InputError(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            cell = {name: row[i] for name, i in col.items()}

            subject_id = cell["subject_id"].strip()
            if not subject_id:
                raise InputError(f"row {row_no}: field 'subject_id' is empty")
            try:
                group = Group.parse(cell["group"])
            except InputError as exc:
                raise InputError(f"row {row_no}: field 'group': {exc}") from None
            try:
                condition = Condition.parse(cell["condition"])
            except InputError as exc:
                raise InputError(f"row {row_no}: field 'condition': {exc}") from None
            tug = _parse_float(cell["tug_score"], row_no, "tug_score")
            rate = _parse_float(cell["sample_rate"], row_no, "sample_rate")
            rel = cell["path"].strip()
            if not rel:
                raise InputError(f"row {row_no}: field 'path' is empty")

            meta = SubjectMeta(subject_id, group, cell["site"].strip())
            known = subjects.setdefault(subject_id, meta)
            if known != meta:
                raise InputError(
                    f"row {row_no}: subject {subject_id!r} listed with conflicting group/site"
                )
            rec_path = (base / rel).resolve()
            key = (subject_id, rec_path)
            if key in seen:
                raise InputError(f"row {row_no}: duplicate recording {rel!r} for subject {subject_id!r}")
            seen.add(key)
            entries.append((known, RecordingDescriptor(rec_path, condition, tug, rate)))
    return entries


def write_manifest(path, rows: Iterable[tuple[SubjectMeta, RecordingDescriptor]]) -> None:
    """Write a manifest; recording paths are stored relative to its directory when possible."""
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for meta, desc in rows:
            rec = Path(desc.path)
            try:
                rel = rec.resolve().relative_to(base).as_posix()
            except ValueError:
                rel = str(rec)
            writer.writerow([
                meta.subject_id, meta.group.value, meta.site, desc.condition.value,
                repr(float(desc.tug_score)), repr(float(desc.sample_rate)), rel,
            ])


# ---------------------------------------------------------------------------
# recordings
# ---------------------------------------------------------------------------

def parse_recording(path, meta: SubjectMeta, rate: float, condition: Condition, tug: float) -> SampleSeries:
    """Load one recording CSV.

    Timestamps are shifted to start at 0. A recording whose sampling gaps
    stray more than 10% from ``1 / rate`` is linearly resampled onto a
    uniform grid at ``rate``.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty recording file") from None
        missing = [c for c in RECORDING_COLUMNS if c not in header]
        if missing:
            raise InputError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in RECORDING_COLUMNS]
        values: list[list[float]] = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            rec = []
            for name, i in zip(RECORDING_COLUMNS, idx):
                try:
                    x = float(row[i])
                except (ValueError, IndexError):
                    raise InputError(f"{path}: row {row_no}: bad value in column {name!r}") from None
                if not math.isfinite(x):
                    raise InputError(f"{path}: row {row_no}: non-finite value in column {name!r}")
                rec.append(x)
            values.append(rec)

    if len(values) < 2:
        raise InputError(f"{path}: a recording needs at least 2 samples")
    data = np.asarray(values)
    t = data[:, 0]
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        # +2: header row plus the later sample of the offending pair
        raise InputError(f"non-monotone timestamp at row {bad[0] + 2}")

    series = SampleSeries(
        subject_id=meta.subject_id,
        condition=condition,
        sample_rate=rate,
        t=t - t[0],
        pos_ap=data[:, 1],
        pos_ml=data[:, 2],
        pos_v=data[:, 3],
        tug_score=tug,
        group=meta.group,
        site=meta.site,
    )
    if not series.is_uniform():
        series = resample(series, rate)
    return series


def write_recording(path, series: SampleSeries) -> None:
    # repr() round-trips floats exactly
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORDING_COLUMNS)
        for row in zip(series.t, series.pos_ap, series.pos_ml, series.pos_v):
            writer.writerow([repr(float(x)) for x in row])


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def derive_speed(series: SampleSeries) -> np.ndarray:
    """Speed magnitude (m/s) from central differences, one-sided at the ends."""
    if series.n < 2:
        raise InputError("speed needs at least 2 samples")
    dt = 1.0 / series.sample_rate
    vel = np.gradient(series.positions, dt, axis=0, edge_order=1)
    return np.sqrt(np.sum(vel * vel, axis=1))


def derive_acceleration(series: SampleSeries) -> np.ndarray:
    """Per-axis acceleration (m/s^2) as an (n, 3) array in AP, ML, V order.

    Interior samples use the three-point second difference; the first and
    last samples reuse the nearest interior stencil.
    """
    if series.n < 3:
        raise InputError("acceleration needs at least 3 samples")
    pos = series.positions
    acc = np.empty_like(pos)
    acc[1:-1] = pos[2:] - 2.0 * pos[1:-1] + pos[:-2]
    acc[0] = pos[0] - 2.0 * pos[1] + pos[2]
    acc[-1] = pos[-1] - 2.0 * pos[-2] + pos[-3]
    return acc * series.sample_rate ** 2


def resample(series: SampleSeries, target_rate: float) -> SampleSeries:
    """Linearly interpolate onto a uniform grid at ``target_rate``.

    The grid starts at the first timestamp and never extends past the last,
    so the duration shrinks by less than one output period.
    """
    if not target_rate > 0:
        raise InputError(f"target_rate must be positive, got {target_rate}")
    if series.n < 2:
        raise InputError("resampling needs at least 2 samples")
    t0 = series.t[0]
    m = int(math.floor(series.duration * target_rate + 1e-9)) + 1
    grid = t0 + np.arange(m) / target_rate
    grid[-1] = min(grid[-1], series.t[-1])
    if m < 2:
        raise InputError("recording is shorter than one period at the target rate")
    return SampleSeries(
        subject_id=series.subject_id,
        condition=series.condition,
        sample_rate=target_rate,
        t=grid,
        pos_ap=np.interp(grid, series.t, series.pos_ap),
        pos_ml=np.interp(grid, series.t, series.pos_ml),
        pos_v=np.interp(grid, series.t, series.pos_v),
        tug_score=series.tug_score,
        group=series.group,
        site=series.site,
    )
