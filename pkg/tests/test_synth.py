import warnings

import numpy as np
import pytest
from dataclasses import replace

from gaitce.copula import AnalysisWarning
from gaitce.data import Condition, parse_manifest, parse_recording
from gaitce.features import feature_gait_speed, feature_stride_time, detect_stride_events
from gaitce.hypotest import compare_conditions
from gaitce.report import AnalysisConfig, extract_features, segment_manifest
from gaitce.synth import (
    CopulaParams,
    WalkParams,
    gen_gaussian_copula,
    gen_two_condition_dataset,
    gen_walk,
    parse_scale,
)
from oracles import gaussian_mi


def test_noise_free_speed_and_stride_time():
    params = WalkParams(speed=0.9, step_period=0.5)
    series, truth = gen_walk(params)
    assert feature_gait_speed(series) == pytest.approx(0.9, rel=0.01)
    assert feature_stride_time(detect_stride_events(series)) == pytest.approx(1.0, rel=0.05)
    assert truth.stride_period == 1.0 and truth.step_length == pytest.approx(0.45)


def test_same_seed_same_series():
    p = WalkParams(noise_sd=0.001, stride_speed_sd=0.05, seed=4)
    a, _ = gen_walk(p)
    b, _ = gen_walk(p)
    assert np.array_equal(a.positions, b.positions)
    c, _ = gen_walk(replace(p, seed=5))
    assert not np.array_equal(a.positions, c.positions)


def test_params_validation():
    with pytest.raises(ValueError, match="inconsistent"):
        WalkParams(speed=1.0, step_period=0.5, step_length=0.6)
    assert WalkParams(speed=1.0, step_period=0.5, step_length=0.5).step_length == 0.5
    with pytest.raises(ValueError, match="undersampled"):
        gen_walk(WalkParams(step_period=0.5, rate=6.0))
    with pytest.raises(ValueError):
        WalkParams(speed=0.0)
    with pytest.raises(ValueError, match="cannot scale"):
        WalkParams().scaled(colour=2.0)


def test_scaled_parameters():
    p = WalkParams(speed=0.8, step_period=0.6, stride_speed_sd=0.04).scaled(speed=0.5, stride_freq=1.5)
    assert p.speed == pytest.approx(0.4) and p.step_period == pytest.approx(0.4)
    assert p.stride_speed_sd == pytest.approx(0.02) and p.step_length == pytest.approx(0.16)


def test_schedule_truth_and_pause():
    series, truth = gen_walk(WalkParams(), [(5, False), (20, True), (5, False)])
    assert truth.walk_intervals == ((5.0, 25.0),)
    still = series.t < 4.9
    assert np.ptp(series.pos_ap[still]) == 0.0
    assert series.duration == pytest.approx(30.0)


def test_stride_speeds_follow_spread():
    _, truth = gen_walk(WalkParams(stride_speed_sd=0.1, duration=200.0, seed=1))
    assert np.std(truth.stride_speeds) == pytest.approx(0.1, rel=0.3)
    _, flat = gen_walk(WalkParams(duration=30.0))
    assert np.allclose(flat.stride_speeds, 0.7, rtol=1e-6)


def test_gaussian_copula_generator():
    d0, mi0 = gen_gaussian_copula(CopulaParams(rho=0.0))
    assert mi0 == 0.0 and d0.shape == (1000, 2)
    _, mi = gen_gaussian_copula(CopulaParams(rho=0.9))
    assert mi == pytest.approx(0.8304, abs=1e-4) == gaussian_mi(0.9)
    raw, _ = gen_gaussian_copula(CopulaParams(rho=0.5, seed=2))
    cubic, mi_c = gen_gaussian_copula(CopulaParams(rho=0.5, seed=2, marginals=("cubic", "exponential")))
    assert mi_c == gaussian_mi(0.5)
    assert np.array_equal(np.argsort(raw, axis=0), np.argsort(cubic, axis=0))
    with pytest.raises(ValueError):
        CopulaParams(rho=1.0)
    with pytest.raises(ValueError):
        CopulaParams(marginals=("identity", "log"))


def test_parse_scale():
    assert parse_scale("speed=0.7, stride_freq=1.5") == {"speed": 0.7, "stride_freq": 1.5}
    assert parse_scale("") == {}
    with pytest.raises(ValueError):
        parse_scale("speed")


def test_dataset_files_are_deterministic(tmp_path):
    base = WalkParams(noise_sd=0.0002, stride_speed_sd=0.05)
    a = gen_two_condition_dataset(base, {"speed": 0.7}, 4, 3, tmp_path / "a")
    b = gen_two_condition_dataset(base, {"speed": 0.7}, 4, 3, tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    assert len(files) == 9
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    c = gen_two_condition_dataset(base, {"speed": 0.7}, 4, 4, tmp_path / "c")
    assert (tmp_path / "c" / files[0]).read_bytes() != (tmp_path / "a" / files[0]).read_bytes()
    assert a.name == b.name == c.name == "manifest.csv"


def test_dataset_seeds_give_distinct_subjects(tmp_path):
    base = WalkParams()
    scores = []
    for seed in (0, 1):
        m = gen_two_condition_dataset(base, {}, 6, seed, tmp_path / str(seed))
        scores.append(sorted(d.tug_score for _, d in parse_manifest(m)))
    assert scores[0] != scores[1]


def test_dataset_unscaled_conditions_share_subject_parameters(tmp_path):
    m = gen_two_condition_dataset(WalkParams(), {}, 5, 0, tmp_path)
    entries = parse_manifest(m)
    by_subject = {}
    for meta, desc in entries:
        series = parse_recording(desc.path, meta, desc.sample_rate, desc.condition, desc.tug_score)
        ev = detect_stride_events(series.slice(int(15 * 30), int(25 * 30)))
        by_subject.setdefault(meta.subject_id, {})[desc.condition] = np.median(ev.stride_intervals)
    for times in by_subject.values():
        assert times[Condition.TUG] == pytest.approx(times[Condition.DAILY], abs=1 / 30)


def test_dataset_speed_effect(dataset_manifest):
    cfg = AnalysisConfig(manifest=dataset_manifest)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AnalysisWarning)
        table = extract_features([b for _, b in segment_manifest(dataset_manifest, cfg)], cfg)
        (row,) = compare_conditions(table, ["speed"])
    assert row.mw.p_value < 0.01 and row.tug.mean > row.daily.mean
    assert len(parse_manifest(dataset_manifest)) == 40
