import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series
from gaitce.segmentation import WalkInterval, bout_offsets, detect_walking, generate_bouts
from gaitce.synth import WalkParams, gen_walk
from oracles import bout_count


def test_constant_speed_single_interval():
    t = np.arange(60 * 30 + 1) / 30
    s = make_series(1.0 * t)
    (iv,) = detect_walking(s, speed_threshold=0.0)
    assert (iv.start_index, iv.end_index) == (0, s.n - 1)
    assert iv.mean_speed == pytest.approx(1.0)


def test_stationary_has_no_intervals():
    assert detect_walking(make_series(np.zeros(900)), 0.1) == []


def test_walk_stand_walk_boundaries():
    series, truth = gen_walk(WalkParams(), [(20, True), (10, False), (20, True)])
    ivs = detect_walking(series, 0.1, min_duration=5.0)
    assert len(ivs) == 2
    for iv, (a, b) in zip(ivs, truth.walk_intervals):
        assert abs(series.t[iv.start_index] - a) <= 0.5
        assert abs(series.t[iv.end_index] - b) <= 0.5


def test_short_runs_discarded():
    series, _ = gen_walk(WalkParams(), [(10, True), (10, False), (20, True)])
    ivs = detect_walking(series, 0.1, min_duration=15.0)
    assert len(ivs) == 1 and series.t[ivs[0].start_index] > 19


def _interval_series(*durations, rate=30.0):
    """Walking at 1 m/s for each duration, separated by 5 s pauses."""
    pieces, pos = [], 0.0
    for i, d in enumerate(durations):
        n = int(round(d * rate))
        pieces.append(pos + np.arange(n + 1) / rate)
        pos = pieces[-1][-1]
        if i < len(durations) - 1:
            pieces.append(np.full(int(5 * rate), pos))
    x = np.concatenate(pieces)
    return make_series(x, rate=rate)


def test_sixty_second_interval_sixteen_bouts():
    s = make_series(np.arange(60 * 30 + 1) / 30)
    bouts = generate_bouts(s, [WalkInterval(0, s.n - 1, 1.0)], 15, 3)
    assert len(bouts) == 16
    assert [b.start_time for b in bouts] == pytest.approx([3.0 * k for k in range(16)])
    for b in bouts:
        assert b.stop_index - b.start_index == 451
        assert b.series().duration == pytest.approx(15.0)


def test_fourteen_second_interval_no_bouts():
    s = make_series(np.arange(14 * 30 + 1) / 30)
    assert generate_bouts(s, [WalkInterval(0, s.n - 1, 1.0)], 15, 3) == []


def test_two_intervals_nine_bouts():
    s = make_series(np.arange(60 * 30 + 1) / 30)
    ivs = [WalkInterval(0, 600, 1.0), WalkInterval(750, 1740, 1.0)]
    assert [iv.duration(s) for iv in ivs] == pytest.approx([20, 33])
    bouts = generate_bouts(s, ivs, 15, 3)
    assert len(bouts) == 2 + 7
    for b in bouts:
        iv = next(iv for iv in ivs if iv.start_index <= b.start_index <= iv.end_index)
        assert b.stop_index - 1 <= iv.end_index


def test_bouts_stay_inside_interval_property():
    s = _interval_series(17, 41, 26)
    ivs = detect_walking(s, 0.5, min_duration=15.0)
    for length, step in ((15, 3), (10, 4), (15, 15)):
        for b in generate_bouts(s, ivs, length, step):
            assert any(iv.start_index <= b.start_index and b.stop_index - 1 <= iv.end_index for iv in ivs)
            assert abs(b.series().duration - length) <= 1 / 30


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 4000), st.integers(1, 600), st.integers(1, 300))
def test_bout_count_formula(duration, length, step):
    # grid of 1/20 s; the oracle counts in exact integer arithmetic
    got = len(bout_offsets(duration / 20, length / 20, step / 20))
    assert got == bout_count(duration, length, step)


def test_bout_offsets_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bout_offsets(10, 0, 1)
    with pytest.raises(ValueError):
        bout_offsets(10, 5, -1)
