import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitce.data import Condition, Group, SampleSeries  # noqa: E402
from gaitce.synth import WalkParams, gen_two_condition_dataset  # noqa: E402

FIXTURE_WALK = WalkParams(noise_sd=0.0002, stride_speed_sd=0.05)


def make_series(pos_ap, pos_ml=None, pos_v=None, rate=30.0, condition=Condition.TUG, **kw):
    pos_ap = np.asarray(pos_ap, dtype=float)
    n = pos_ap.size
    zeros = np.zeros(n)
    return SampleSeries(
        subject_id=kw.pop("subject_id", "s1"), condition=condition, sample_rate=rate,
        t=np.arange(n) / rate, pos_ap=pos_ap,
        pos_ml=zeros if pos_ml is None else pos_ml, pos_v=zeros if pos_v is None else pos_v,
        tug_score=kw.pop("tug_score", 10.0), group=kw.pop("group", Group.CONTROL), **kw,
    )


@pytest.fixture(scope="session")
def dataset_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    return gen_two_condition_dataset(FIXTURE_WALK, {"speed": 0.7, "stride_freq": 1.5}, 20, 0, out)
