"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 analysis degeneracy.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .copula import AnalysisWarning, dependence_with_score
from .data import InputError
from .hypotest import compare_conditions
from .report import (
    AnalysisConfig,
    PipelineError,
    _write_csv,
    extract_features,
    load_config_file,
    read_features,
    render_table4,
    run_pipeline,
    segment_manifest,
    write_ce,
    write_comparison,
    write_features,
)
from .synth import DEFAULT_DAILY_SCALE, WalkParams, gen_two_condition_dataset, parse_scale

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2

_FLAG_FIELDS = {
    "bout_length": "bout_length",
    "bout_step": "bout_step",
    "speed_threshold": "speed_threshold",
    "low_freq_threshold": "low_freq_threshold",
    "k": "ksg_k",
    "seed": "seed",
    "bin_width": "histogram_bin_width",
}


class Degenerate(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, manifest: bool = True) -> None:
    p.add_argument("--config", type=Path, help="flat key=value settings file (flags override it)")
    if manifest:
        p.add_argument("--manifest", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--bout-length", type=float)
    p.add_argument("--bout-step", type=float)
    p.add_argument("--speed-threshold", type=float)
    p.add_argument("--low-freq-threshold", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--bin-width", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("ingest", help="validate a manifest and its recordings"))
    _add_common(sub.add_parser("segment", help="list walking bouts"))
    _add_common(sub.add_parser("extract", help="compute the per-bout feature table"))
    for name, text in (("compare", "TUG vs Daily two-sample tests"), ("ce", "copula entropy against TUG score")):
        p = sub.add_parser(name, help=text)
        _add_common(p, manifest=False)
        p.add_argument("--features", type=Path, required=True)
    _add_common(sub.add_parser("run", help="full pipeline"))

    p = sub.add_parser("synth", help="write a synthetic two-condition dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--daily-scale", default=",".join(f"{k}={v:g}" for k, v in DEFAULT_DAILY_SCALE.items()))
    p.add_argument("--noise-sd", type=float, default=0.0002, help="position noise, metres")
    p.add_argument("--stride-speed-sd", type=float, default=0.05, help="stride-to-stride speed spread, m/s")
    p.add_argument("--rate", type=float, default=30.0)
    return parser


def resolve_config(args: argparse.Namespace) -> AnalysisConfig:
    settings = load_config_file(args.config) if getattr(args, "config", None) else {}
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            settings[name] = value
    if getattr(args, "manifest", None) is not None:
        settings["manifest"] = args.manifest
    if getattr(args, "out", None) is not None:
        settings["out_dir"] = args.out
    try:
        return AnalysisConfig(**settings)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _need_manifest(cfg: AnalysisConfig) -> Path:
    if cfg.manifest is None:
        raise InputError("--manifest (or manifest= in --config) is required")
    return Path(cfg.manifest)


def _out_dir(cfg: AnalysisConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    cfg = resolve_config(args)
    from .report import _load_recordings

    recordings = _load_recordings(_need_manifest(cfg))
    for meta, desc, series in recordings:
        print(f"{meta.subject_id}\t{desc.condition.value}\t{series.n} samples\t{series.duration:.2f} s")
    print(f"{len(recordings)} recording(s) OK")
    return EXIT_OK


def cmd_segment(args) -> int:
    cfg = resolve_config(args)
    pairs = segment_manifest(_need_manifest(cfg), cfg)
    rows = [(b.subject_id, b.condition.value, desc.path.name, b.start_time, b.length, b.stop_index - b.start_index)
            for desc, b in pairs]
    path = _write_csv(_out_dir(cfg) / "bouts.csv",
                      ("subject_id", "condition", "recording", "bout_start", "bout_length", "n_samples"), rows)
    print(f"{len(rows)} bout(s) -> {path}")
    if not rows:
        raise Degenerate("no walking bouts found")
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = resolve_config(args)
    bouts = [b for _, b in segment_manifest(_need_manifest(cfg), cfg)]
    if not bouts:
        raise Degenerate("no walking bouts found")
    path = write_features(_out_dir(cfg) / "features.csv", extract_features(bouts, cfg))
    print(f"{len(bouts)} feature row(s) -> {path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = resolve_config(args)
    table = read_features(args.features)
    present = set(table["condition"])
    if not {"TUG", "Daily"} <= present:
        raise Degenerate(f"comparison needs TUG and Daily rows; found {', '.join(sorted(present)) or 'none'}")
    rows = compare_conditions(table)
    out = _out_dir(cfg)
    write_comparison(out / "comparison.csv", rows)
    text = render_table4(rows)
    (out / "table4.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ce(args) -> int:
    cfg = resolve_config(args)
    table = read_features(args.features)
    present = set(table["condition"])
    estimates = dependence_with_score(
        table, k=cfg.ksg_k, seed=cfg.seed,
        conditions=[c for c in ("TUG", "Daily") if c in present] + ["Both"],
    )
    if not estimates:
        raise Degenerate("no feature had enough rows for a CE estimate")
    path = write_ce(_out_dir(cfg) / "ce.csv", estimates)
    for feature, cond, est in estimates:
        print(f"{feature}\t{cond}\t{est.value:.4f}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    _need_manifest(cfg)
    bundle = run_pipeline(cfg)
    for key, path in bundle.files.items():
        print(f"{key}\t{path}")
    for w in bundle.warnings:
        print(f"WARN: {w}", file=sys.stderr)
    return EXIT_DEGENERATE if bundle.comparison_skipped else EXIT_OK


def cmd_synth(args) -> int:
    try:
        scale = parse_scale(args.daily_scale)
        base = WalkParams(noise_sd=args.noise_sd, stride_speed_sd=args.stride_speed_sd, rate=args.rate)
        base.scaled(**scale)  # validate names early
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    manifest = gen_two_condition_dataset(base, scale, args.subjects, args.seed, args.out)
    print(manifest)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "segment": cmd_segment,
    "extract": cmd_extract,
    "compare": cmd_compare,
    "ce": cmd_ce,
    "run": cmd_run,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AnalysisWarning)
        try:
            code = COMMANDS[args.command](args)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_INPUT
        except PipelineError as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_INPUT if exc.stage == "ingest" else EXIT_DEGENERATE
        except Degenerate as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_DEGENERATE
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_INPUT
    if args.command != "run":
        seen = set()
        for w in caught:
            text = str(w.message)
            if issubclass(w.category, AnalysisWarning) and text not in seen:
                seen.add(text)
                print(f"WARN: {text}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
