import json
import subprocess
import sys

import numpy as np
import pytest

from mscc import io
from mscc.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--samples", "200", "--subjects", "20",
                 "--seed", "3"]) == 0
    return out


def test_synth_writes_inputs(synth_dir):
    for t in range(3):
        assert io.load_matrix(synth_dir / f"task{t}.bin").shape == (32, 200)
        assert io.load_grouping(synth_dir / f"grouping{t}.csv").patch_count == 200
    subjects, Y, names = io.load_table(synth_dir / "targets.csv")
    assert len(subjects) == 20 and Y.shape == (20, 2) and names == ["score1", "score2"]
    data = io.read_json(synth_dir / "data.json")
    assert len(data["task_files"]) == len(data["grouping_files"]) == 3


def test_stage_by_stage(synth_dir, tmp_path):
    tasks = [str(synth_dir / f"task{t}.bin") for t in range(3)]
    argv = ["train", "--out", str(tmp_path / "dl"), "--shared-atoms", "8",
            "--individual-atoms", "8", "--epochs", "2"]
    for t in tasks:
        argv += ["--task", t]
    assert main(argv) == 0
    D = io.load_matrix(tmp_path / "dl" / "dict2.bin")
    assert D.shape == (32, 16)
    assert np.all(np.linalg.norm(D, axis=0) <= 1 + 1e-12)
    assert (tmp_path / "dl" / "objective.csv").read_text().count("\n") == 3
    assert io.read_json(tmp_path / "dl" / "train.json")["lam"] == 0.1

    assert main(["encode", "--dict", str(tmp_path / "dl" / "dict2.bin"), "--patches", tasks[2],
                 "--out", str(tmp_path / "z.bin")]) == 0
    assert io.load_matrix(tmp_path / "z.bin").shape == (16, 200)

    assert main(["pool", "--codes", str(tmp_path / "z.bin"), "--grouping",
                 str(synth_dir / "grouping2.csv"), "--out", str(tmp_path / "f.csv")]) == 0
    feats = io.load_features(tmp_path / "f.csv")
    assert feats.features.shape == (20, 16)

    assert main(["regress", "--features", str(tmp_path / "f.csv"), "--targets",
                 str(synth_dir / "targets.csv"), "--out", str(tmp_path / "m.json"),
                 "--predict", str(tmp_path / "f.csv"),
                 "--predictions", str(tmp_path / "p.csv")]) == 0
    models = io.read_json(tmp_path / "m.json")
    assert set(models) == {"score1", "score2"} and len(models["score1"]["weights"]) == 16

    assert main(["evaluate", "--truth", str(synth_dir / "targets.csv"), "--pred",
                 str(tmp_path / "p.csv"), "--out", str(tmp_path / "e.csv")]) == 0
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "metric,task,value"
    assert [l.split(",")[:2] for l in lines[1:]] == [["nmse", "all"], ["wr", "all"],
                                                     ["rmse", "score1"], ["rmse", "score2"]]


def test_evaluate_prints_to_stdout(tmp_path, capsys):
    io.save_table(tmp_path / "t.csv", ["a", "b", "c"], [[1.0], [2.0], [4.0]], ["y"])
    io.save_table(tmp_path / "p.csv", ["c", "a", "b"], [[4.0], [1.0], [2.0]], ["y"])
    assert main(["evaluate", "--truth", str(tmp_path / "t.csv"),
                 "--pred", str(tmp_path / "p.csv")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1] == "nmse,all,0.0"
    assert out[2].startswith("wr,all,") and float(out[2].split(",")[2]) == pytest.approx(1.0)


def test_pipeline_flags_override_config(synth_dir, tmp_path):
    cfg = io.read_json(synth_dir / "data.json")
    cfg.update(shared_atoms=8, individual_atoms=8, repeats=5, epochs=2,
               output_dir=str(tmp_path / "ignored"))
    io.write_json(tmp_path / "cfg.json", cfg)
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(tmp_path / "cfg.json"), "--repeats", "2",
                 "--out", str(out)]) == 0
    used = io.read_json(out / "config.json")
    assert used["repeats"] == 2 and used["epochs"] == 2 and used["shared_atoms"] == 8
    assert not (tmp_path / "ignored").exists()
    assert io.read_json(out / "manifest.json")["repeats_ok"] == 2
    assert len(io.read_results(out / "results.csv")) == 4


def test_sweep_cli(synth_dir, tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(["sweep-dict-split", "--config", str(synth_dir / "data.json"),
                 "--splits", "4:12,12:4", "--repeats", "2", "--epochs", "1",
                 "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("4,12,rmse,")
    assert "12:4" in capsys.readouterr().out


@pytest.mark.parametrize("argv, message", [
    (["encode", "--dict", "/nonexistent.bin", "--patches", "/x.bin", "--out", "/tmp/z"],
     "No such file"),
    (["pipeline", "--task", "a.bin", "--out", "x"], "grouping"),
    (["pipeline", "--split", "1.5"], "split"),
    (["sweep-dict-split", "--splits", "4-12"], "splits"),
])
def test_errors_exit_nonzero(argv, message, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    assert code != 0
    assert message in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mscc", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    for cmd in ("synth", "train", "encode", "pool", "regress", "evaluate", "pipeline",
                "sweep-dict-split"):
        assert cmd in res.stdout
