"""Pipeline orchestration and output formats.

``run_pipeline`` goes manifest -> recordings -> walking intervals -> bouts
-> features, then runs the four analyses (M-W and K-S comparisons,
correlation matrices per population, CE against TUG score) and writes
every table to the output directory.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .copula import AnalysisWarning, CEEstimate, dependence_with_score, pearson_correlation
from .data import InputError, parse_manifest, parse_recording
from .features import FEATURE_NAMES, FeatureConfig, extract_feature_vector
from .hypotest import TABLE_ORDER, ComparisonRow, SummaryStats, TestResult, compare_conditions
from .segmentation import Bout, detect_walking, generate_bouts

__all__ = [
    "AnalysisConfig",
    "FEATURE_COLUMNS",
    "PipelineError",
    "ReportBundle",
    "TABLE_LABELS",
    "correlation_matrices",
    "extract_features",
    "histogram_data",
    "load_config_file",
    "parse_table4",
    "read_features",
    "render_table4",
    "run_pipeline",
    "segment_manifest",
    "write_ce",
    "write_comparison",
    "write_correlations",
    "write_features",
    "write_histogram",
]

FEATURE_COLUMNS = ("subject_id", "condition", "group", "tug_score", "bout_start") + FEATURE_NAMES

TABLE_LABELS = {
    "speed": "Speed",
    "pace": "Pace",
    "speed_var": "Speed var.",
    "stride_time": "Stride time",
    "stride_time_var": "Stride time var.",
    "accel_range": "Acceleration range",
    "movement_intensity": "Movement intensity",
    "low_freq_pct": "Low freq. perc.",
    "stride_freq": "Stride freq.",
}
TABLE_HEADER = "Characteristics&TUG&Daily&K-S statistic&K-S p-value&M-W statistic&M-W p-value"
POPULATIONS = ("patients", "controls", "all")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class AnalysisConfig:
    manifest: Optional[Path] = None
    bout_length: float = 15.0
    bout_step: float = 3.0
    speed_threshold: float = 0.1
    low_freq_threshold: float = 0.7
    ksg_k: int = 3
    histogram_bin_width: float = 2.0
    out_dir: Path = Path("gaitce-out")
    seed: int = 0

    def __post_init__(self):
        for name in ("bout_length", "bout_step", "low_freq_threshold", "histogram_bin_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.speed_threshold < 0:
            raise ValueError("speed_threshold must be non-negative")
        if int(self.ksg_k) != self.ksg_k or self.ksg_k < 1:
            raise ValueError("ksg_k must be a positive integer")

    @property
    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(low_freq_threshold=self.low_freq_threshold)


_CONFIG_ALIASES = {"k": "ksg_k", "out": "out_dir", "bin_width": "histogram_bin_width"}


def load_config_file(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(AnalysisConfig)}
    out = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{line_no}: expected key=value")
        key = key.strip().replace("-", "_")
        key = _CONFIG_ALIASES.get(key, key)
        if key not in types:
            raise InputError(f"{path}:{line_no}: unknown setting {key!r}")
        value = value.strip()
        if key in ("manifest", "out_dir"):
            p = Path(value)
            out[key] = p if p.is_absolute() else (Path(path).parent / p)
        elif key in ("ksg_k", "seed"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


@dataclass
class ReportBundle:
    out_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    comparison_skipped: bool = False


# ---------------------------------------------------------------------------
# ingest / segment / extract
# ---------------------------------------------------------------------------

def _load_recordings(manifest):
    try:
        entries = parse_manifest(manifest)
    except (OSError, InputError) as exc:
        raise PipelineError("ingest", str(exc)) from exc
    out = []
    for meta, desc in entries:
        try:
            series = parse_recording(desc.path, meta, desc.sample_rate, desc.condition, desc.tug_score)
        except (OSError, InputError) as exc:
            raise PipelineError("ingest", f"{desc.path.name}: {exc}") from exc
        out.append((meta, desc, series))
    return out


def segment_manifest(manifest, config: AnalysisConfig) -> list[tuple[object, Bout]]:
    """Bouts of every recording in manifest order, paired with their descriptor."""
    out = []
    for meta, desc, series in _load_recordings(manifest):
        intervals = detect_walking(series, config.speed_threshold, min_duration=config.bout_length)
        for bout in generate_bouts(series, intervals, config.bout_length, config.bout_step):
            out.append((desc, bout))
    return out


def extract_features(bouts: Iterable[Bout], config: AnalysisConfig) -> pd.DataFrame:
    rows = []
    fc = config.feature_config
    for bout in bouts:
        fv = extract_feature_vector(bout, fc)
        rows.append({
            "subject_id": bout.subject_id,
            "condition": bout.condition.value,
            "group": bout.source.group.value,
            "tug_score": bout.tug_score,
            "bout_start": bout.start_time,
            **fv.as_dict(),
        })
    table = pd.DataFrame(rows, columns=list(FEATURE_COLUMNS))
    for name in FEATURE_NAMES + ("tug_score", "bout_start"):
        table[name] = table[name].astype(float)
    return table


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_features(path, table: pd.DataFrame) -> Path:
    rows = table[list(FEATURE_COLUMNS)].itertuples(index=False, name=None)
    return _write_csv(Path(path), FEATURE_COLUMNS, rows)


def read_features(path) -> pd.DataFrame:
    table = pd.read_csv(path, dtype={"subject_id": str, "condition": str, "group": str})
    missing = [c for c in FEATURE_COLUMNS if c not in table.columns]
    if missing:
        raise InputError(f"{path}: feature file lacks column(s) {', '.join(missing)}")
    return table


# ---------------------------------------------------------------------------
# comparison table
# ---------------------------------------------------------------------------

def write_comparison(path, rows: Sequence[ComparisonRow]) -> Path:
    header = ("feature", "mean_tug", "var_tug", "mean_daily", "var_daily",
              "ks_stat", "ks_p", "ks_ties", "mw_stat", "mw_p")

    def cells(r: ComparisonRow):
        tug, daily, ks, mw = r.tug, r.daily, r.ks, r.mw
        return (
            r.feature,
            tug.mean if tug else None, tug.variance if tug else None,
            daily.mean if daily else None, daily.variance if daily else None,
            ks.statistic if ks else None, ks.p_value if ks else None, ks.ties_present if ks else None,
            mw.statistic if mw else None, mw.p_value if mw else None,
        )

    return _write_csv(Path(path), header, (cells(r) for r in rows))


def _fmt_p(p: Optional[float]) -> str:
    if p is None:
        return "--"
    return "0" if p == 0 else f"{p:.2e}"


def _fmt_u(u: float) -> str:
    return str(int(u)) if float(u).is_integer() else f"{u:.1f}"


def render_table4(rows: Sequence[ComparisonRow]) -> str:
    """Text table in the layout of the published two-sample comparison.

    One ``&``-separated line per feature: ``mean±var`` for each condition
    (two decimals), then the K-S statistic and p-value and the M-W U and
    p-value. A K-S p-value computed with cross-sample ties carries a
    trailing ``*``.
    """
    lines = [TABLE_HEADER]
    for r in rows:
        cells = [TABLE_LABELS.get(r.feature, r.feature)]
        for s in (r.tug, r.daily):
            cells.append("--" if s is None else f"{s.mean:.2f}±{s.variance:.2f}")
        if r.ks is None:
            cells += ["--", "--"]
        else:
            cells += [f"{r.ks.statistic:.3f}", _fmt_p(r.ks.p_value) + ("*" if r.ks.ties_present else "")]
        if r.mw is None:
            cells += ["--", "--"]
        else:
            cells += [_fmt_u(r.mw.statistic), _fmt_p(r.mw.p_value)]
        lines.append("&".join(cells))
    return "\n".join(lines) + "\n"


def parse_table4(text: str) -> list[dict]:
    """Inverse of :func:`render_table4` at the rendered precision."""
    labels = {v: k for k, v in TABLE_LABELS.items()}
    lines = text.splitlines()
    if not lines or lines[0] != TABLE_HEADER:
        raise ValueError("not a comparison table (header mismatch)")

    def num(cell: str) -> Optional[float]:
        cell = cell.rstrip("*")
        return None if cell == "--" else float(cell)

    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        label, tug, daily, ks_stat, ks_p, mw_stat, mw_p = line.split("&")
        row = {"feature": labels.get(label, label)}
        for prefix, cell in (("tug", tug), ("daily", daily)):
            if cell == "--":
                row[f"mean_{prefix}"] = row[f"var_{prefix}"] = None
            else:
                m, v = cell.split("±")
                row[f"mean_{prefix}"], row[f"var_{prefix}"] = float(m), float(v)
        row.update(ks_stat=num(ks_stat), ks_p=num(ks_p), ks_ties=ks_p.endswith("*"),
                   mw_stat=num(mw_stat), mw_p=num(mw_p))
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# correlations, histogram, CE
# ---------------------------------------------------------------------------

def _subsets(table: pd.DataFrame):
    for cond in ("TUG", "Daily", "Both"):
        sub = table if cond == "Both" else table[table["condition"] == cond]
        for pop in POPULATIONS:
            if pop == "patients":
                yield cond, pop, sub[sub["group"] == "patient"]
            elif pop == "controls":
                yield cond, pop, sub[sub["group"] == "control"]
            else:
                yield cond, pop, sub


def correlation_matrices(
    table: pd.DataFrame, features: Sequence[str] = FEATURE_NAMES, min_rows: int = 3
) -> dict[tuple[str, str], pd.DataFrame]:
    """Pearson matrices per (condition, population), pairwise-complete per cell.

    Conditions are TUG, Daily and Both; populations are patients, controls
    and all. Groups with fewer than ``min_rows`` complete rows are omitted,
    and cells involving a constant column are left as NaN; both cases warn.
    """
    out = {}
    features = list(features)
    for cond, pop, sub in _subsets(table):
        complete = sub[features].dropna()
        if len(complete) < min_rows:
            if len(sub):
                warnings.warn(f"correlation matrix {cond}/{pop} omitted: {len(complete)} complete rows < {min_rows}",
                              AnalysisWarning, stacklevel=2)
            continue
        m = np.eye(len(features))
        undefined = set()
        for i in range(len(features)):
            for j in range(i + 1, len(features)):
                pair = sub[[features[i], features[j]]].dropna().to_numpy(dtype=float)
                try:
                    r = pearson_correlation(pair[:, 0], pair[:, 1])
                except ValueError:
                    r = math.nan
                    undefined.update(
                        f for f, col in ((features[i], pair[:, 0]), (features[j], pair[:, 1]))
                        if col.size < 2 or np.ptp(col) == 0
                    )
                m[i, j] = m[j, i] = r
        if undefined:
            warnings.warn(f"correlation {cond}/{pop}: constant column(s) {', '.join(sorted(undefined))}",
                          AnalysisWarning, stacklevel=2)
        out[(cond, pop)] = pd.DataFrame(m, index=features, columns=features)
    return out


def write_correlations(path, matrices: dict[tuple[str, str], pd.DataFrame]) -> Path:
    features = None
    rows = []
    for (cond, pop), m in matrices.items():
        features = list(m.columns)
        for name in m.index:
            rows.append([cond, pop, name, *m.loc[name].tolist()])
    header = ["condition", "population", "feature"] + (features or list(FEATURE_NAMES))
    return _write_csv(Path(path), header, rows)


def histogram_data(scores: dict[str, Sequence[float]], bin_width: float) -> dict[str, list[tuple[float, float, int]]]:
    """Counts in left-closed bins ``[k w, (k + 1) w)``, from the lowest to the highest occupied bin."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    out = {}
    for cond, values in scores.items():
        v = np.asarray(list(values), dtype=float)
        if v.size == 0:
            continue
        idx = np.floor(v / bin_width + 1e-12).astype(int)
        counts = np.bincount(idx - idx.min())
        out[cond] = [((idx.min() + i) * bin_width, (idx.min() + i + 1) * bin_width, int(c))
                     for i, c in enumerate(counts)]
    return out


def write_histogram(path, hist: dict[str, list[tuple[float, float, int]]]) -> Path:
    rows = [(cond, lo, hi, c) for cond, bins in hist.items() for lo, hi, c in bins]
    return _write_csv(Path(path), ("condition", "bin_left", "bin_right", "count"), rows)


def write_ce(path, estimates: Sequence[tuple[str, str, CEEstimate]]) -> Path:
    rows = [(f, c, e.value, e.k, e.n) for f, c, e in estimates]
    return _write_csv(Path(path), ("feature", "condition", "ce_nats", "k", "n"), rows)


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def _warning_text(w: warnings.WarningMessage) -> str:
    return str(w.message)


def run_pipeline(config: AnalysisConfig) -> ReportBundle:
    """Run the whole analysis and write the output bundle.

    Files written to ``config.out_dir``: ``features.csv``, ``comparison.csv``
    and ``table4.txt`` (when both conditions are present), ``ce.csv``,
    ``correlations.csv``, ``histogram.csv`` and ``run.log``. On failure
    every file written so far is removed and :class:`PipelineError` is raised.
    """
    if config.manifest is None:
        raise PipelineError("ingest", "no manifest given")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)
    log: list[str] = []
    stage = "ingest"
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", AnalysisWarning)
            recordings = _load_recordings(config.manifest)

            stage = "segment"
            bouts: list[Bout] = []
            scores = {"TUG": [], "Daily": []}
            for meta, desc, series in recordings:
                intervals = detect_walking(series, config.speed_threshold, min_duration=config.bout_length)
                found = generate_bouts(series, intervals, config.bout_length, config.bout_step)
                if not found:
                    warnings.warn(f"{meta.subject_id}/{desc.condition.value}: no walking bout of "
                                  f"{config.bout_length:g} s", AnalysisWarning)
                bouts.extend(found)
                scores[desc.condition.value].append(desc.tug_score)
            if not bouts:
                raise PipelineError("segment", "no bouts found in any recording")

            stage = "extract"
            table = extract_features(bouts, config)
            bundle.files["features"] = write_features(out / "features.csv", table)
            for cond in ("TUG", "Daily"):
                sub = table[table["condition"] == cond]
                bundle.counts[f"recordings_{cond}"] = len(scores[cond])
                bundle.counts[f"bouts_{cond}"] = len(sub)
                bundle.counts[f"complete_{cond}"] = int(sub[list(FEATURE_NAMES)].notna().all(axis=1).sum())
            for name in FEATURE_NAMES:
                missing = int(table[name].isna().sum())
                if missing:
                    warnings.warn(f"{name}: {missing} bout(s) dropped (feature not computable)", AnalysisWarning)

            stage = "compare"
            present = set(table["condition"])
            if {"TUG", "Daily"} <= present:
                rows = compare_conditions(table)
                bundle.files["comparison"] = write_comparison(out / "comparison.csv", rows)
                table4 = out / "table4.txt"
                table4.write_text(render_table4(rows), encoding="utf-8")
                bundle.files["table4"] = table4
            else:
                bundle.comparison_skipped = True
                warnings.warn("comparison skipped: only "
                              f"{', '.join(sorted(present))} bouts present", AnalysisWarning)
            if config.bout_step < config.bout_length:
                warnings.warn(
                    f"bouts overlap (step {config.bout_step:g} s < length {config.bout_length:g} s); "
                    "samples are not independent and test p-values are optimistic",
                    AnalysisWarning,
                )

            stage = "correlate"
            matrices = correlation_matrices(table)
            if matrices:
                bundle.files["correlations"] = write_correlations(out / "correlations.csv", matrices)

            stage = "ce"
            conditions = [c for c in ("TUG", "Daily") if c in present] + ["Both"]
            ce = dependence_with_score(table, k=config.ksg_k, seed=config.seed, conditions=conditions)
            if ce:
                bundle.files["ce"] = write_ce(out / "ce.csv", ce)

            stage = "histogram"
            hist = histogram_data({c: v for c, v in scores.items() if v}, config.histogram_bin_width)
            bundle.files["histogram"] = write_histogram(out / "histogram.csv", hist)

        seen = set()
        for w in caught:
            if not issubclass(w.category, AnalysisWarning):
                continue
            text = _warning_text(w)
            if text not in seen:
                seen.add(text)
                bundle.warnings.append(text)

        log.append(f"bout_length={config.bout_length:g} bout_step={config.bout_step:g} "
                   f"speed_threshold={config.speed_threshold:g} low_freq_threshold={config.low_freq_threshold:g} "
                   f"k={config.ksg_k} seed={config.seed}")
        for cond in ("TUG", "Daily"):
            log.append(f"{cond}: recordings={bundle.counts[f'recordings_{cond}']} "
                       f"bouts={bundle.counts[f'bouts_{cond}']} complete={bundle.counts[f'complete_{cond}']}")
        log.append(f"total bouts={len(table)}")
        log.extend(f"WARN: {w}" for w in bundle.warnings)
        run_log = out / "run.log"
        run_log.write_text("\n".join(log) + "\n", encoding="utf-8")
        bundle.files["log"] = run_log
    except Exception as exc:
        for path in bundle.files.values():
            path.unlink(missing_ok=True)
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(stage, str(exc)) from exc
    return bundle
