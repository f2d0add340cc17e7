import subprocess
import sys

import pandas as pd
import pytest

from gaitce.cli import EXIT_DEGENERATE, EXIT_INPUT, EXIT_OK, main
from gaitce.data import parse_manifest, write_manifest


@pytest.fixture(scope="module")
def features_file(dataset_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("extract")
    assert main(["extract", "--manifest", str(dataset_manifest), "--out", str(out)]) == EXIT_OK
    return out / "features.csv"


def test_ingest_ok(dataset_manifest, capsys):
    assert main(["ingest", "--manifest", str(dataset_manifest)]) == EXIT_OK
    assert "40 recording(s) OK" in capsys.readouterr().out


def test_ingest_bad_manifest(tmp_path, capsys):
    m = tmp_path / "m.csv"
    m.write_text("subject_id,group,site,condition,tug_score,sample_rate,path\ns1,patient,A,walk,12,30,a.csv\n")
    assert main(["ingest", "--manifest", str(m)]) == EXIT_INPUT
    assert "row 2: field 'condition'" in capsys.readouterr().err


def test_missing_manifest_flag(capsys):
    assert main(["segment"]) == EXIT_INPUT
    assert "--manifest" in capsys.readouterr().err


def test_segment_writes_bouts(dataset_manifest, tmp_path):
    assert main(["segment", "--manifest", str(dataset_manifest), "--out", str(tmp_path)]) == EXIT_OK
    bouts = pd.read_csv(tmp_path / "bouts.csv")
    assert set(bouts["condition"]) == {"TUG", "Daily"}
    assert (bouts["bout_length"] == 15).all()


def test_flags_override_config(dataset_manifest, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"manifest = {dataset_manifest}\nbout_length = 20\nbout_step = 5\n")
    assert main(["segment", "--config", str(cfg), "--bout-length", "10", "--out", str(tmp_path)]) == EXIT_OK
    bouts = pd.read_csv(tmp_path / "bouts.csv")
    assert (bouts["bout_length"] == 10).all()
    starts = bouts[bouts.subject_id == bouts.subject_id.iloc[0]].bout_start.tolist()
    assert starts[1] - starts[0] == pytest.approx(5.0)


def test_bad_config_value(tmp_path, dataset_manifest):
    assert main(["segment", "--manifest", str(dataset_manifest), "--bout-step", "-2"]) == EXIT_INPUT


def test_compare_and_ce(features_file, tmp_path, capsys):
    assert main(["compare", "--features", str(features_file), "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("Characteristics&TUG&Daily")
    assert len(pd.read_csv(tmp_path / "comparison.csv")) == 9
    assert main(["ce", "--features", str(features_file), "--out", str(tmp_path), "--k", "4"]) == EXIT_OK
    ce = pd.read_csv(tmp_path / "ce.csv")
    assert len(ce) == 27 and (ce["k"] == 4).all()


def test_compare_one_condition_is_degenerate(features_file, tmp_path):
    t = pd.read_csv(features_file)
    only = tmp_path / "tug.csv"
    t[t.condition == "TUG"].to_csv(only, index=False)
    assert main(["compare", "--features", str(only), "--out", str(tmp_path)]) == EXIT_DEGENERATE


def test_run_tug_only_exit_code(dataset_manifest, tmp_path, capsys):
    entries = [e for e in parse_manifest(dataset_manifest) if e[1].condition.value == "TUG"][:4]
    write_manifest(tmp_path / "m.csv", entries)
    assert main(["run", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "o")]) == EXIT_DEGENERATE
    assert "WARN: comparison skipped" in capsys.readouterr().err
    assert (tmp_path / "o" / "features.csv").exists()


def test_synth_then_run_via_subprocess(tmp_path):
    ds = tmp_path / "ds"
    cmd = [sys.executable, "-m", "gaitce.cli"]
    r = subprocess.run(cmd + ["synth", "--out", str(ds), "--subjects", "3", "--seed", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and (ds / "manifest.csv").exists()
    r = subprocess.run(cmd + ["run", "--manifest", str(ds / "manifest.csv"), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "o" / "table4.txt").read_text().count("\n") == 10


def test_synth_rejects_bad_scale(tmp_path):
    assert main(["synth", "--out", str(tmp_path), "--daily-scale", "height=2"]) == EXIT_INPUT
