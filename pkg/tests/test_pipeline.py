import dataclasses
import logging

import numpy as np
import pytest

from mscc import io, pipeline
from mscc.pipeline import (Dataset, ExperimentConfig, learn_dictionaries, repeat_seed,
                           run_experiment, run_pipeline, split_subjects, subject_features,
                           sweep_dict_split)
from mscc.regression import fit_cv, predict
from mscc.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="module")
def small_data():
    return generate_synthetic(SyntheticSpec(samples_per_task=300, n_subjects=30, seed=2))


def desk_config(**kw):
    base = dict(shared_atoms=8, individual_atoms=8, repeats=2, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_defaults_follow_protocol():
    cfg = ExperimentConfig()
    assert (cfg.lam, cfg.epochs, cfg.ccd_support_passes, cfg.ccd_full_passes) == (0.1, 10, 3, 1)
    assert (cfg.split, cfg.repeats, cfg.cv_folds, cfg.method) == (0.8, 40, 5, "lasso")
    assert min(cfg.cv_grid) == pytest.approx(1e-3) and max(cfg.cv_grid) == pytest.approx(1e3)


@pytest.mark.parametrize("kw", [dict(split=1.0), dict(split=0.0), dict(repeats=0),
                                dict(mode="x"), dict(features="x"),
                                dict(task_files=["a"], grouping_files=[])])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_split_subjects():
    subjects = [f"s{k}" for k in range(25)]
    train, test = split_subjects(subjects, 0.8, seed=4)
    assert len(train) == 20 and len(test) == 5
    assert not set(train) & set(test) and set(train) | set(test) == set(subjects)
    assert (train, test) == split_subjects(subjects, 0.8, seed=4)
    with pytest.raises(ValueError):
        split_subjects(["a", "b"], 0.9, 0)


def test_repeat_seeds_are_stable_and_distinct():
    seeds = [repeat_seed(7, r) for r in range(40)]
    assert seeds == [repeat_seed(7, r) for r in range(40)]
    assert len(set(seeds)) == 40


def test_training_never_sees_test_patches(small_data, monkeypatch):
    seen = []
    real = pipeline.train

    def spy(tasks, cfg, *a, **k):
        seen.append([X.shape[1] for X in tasks])
        return real(tasks, cfg, *a, **k)

    monkeypatch.setattr(pipeline, "train", spy)
    data = Dataset.from_synthetic(small_data)
    held = data.subjects[:6]
    learn_dictionaries(data, desk_config(epochs=1), held, seed=0)
    assert seen == [[240, 240, 240]]  # 10 patches per subject, 24 of 30 subjects kept
    learn_dictionaries(data, desk_config(epochs=1, mode="baseline"), held, seed=0)
    assert seen[-1] == [720]


def test_baseline_uses_one_shared_only_dictionary(small_data):
    data = Dataset.from_synthetic(small_data)
    ds = learn_dictionaries(data, desk_config(epochs=1, mode="baseline"), [], seed=0)
    assert ds[0] is ds[1] is ds[2]
    assert ds[0].n_shared == 16 and ds[0].n_individual == 0


def test_feature_modes(small_data):
    data = Dataset.from_synthetic(small_data)
    ds = small_data.dictionaries
    last = subject_features(data, ds, desk_config(), data.subjects)
    both = subject_features(data, ds, desk_config(features="concat"), data.subjects)
    assert last.shape == (30, 16) and both.shape == (30, 48)
    np.testing.assert_array_equal(both[:, 32:], last)


def test_experiment_splits_by_subject(small_data):
    result = run_experiment(Dataset.from_synthetic(small_data), desk_config(repeats=3))
    assert len(result.succeeded) == 3
    for o in result.outcomes:
        assert not set(o.train_subjects) & set(o.test_subjects)
        assert len(o.test_subjects) == 6
    assert len({tuple(o.test_subjects) for o in result.outcomes}) == 3
    keys = {k for o in result.outcomes for k in o.values}
    assert keys == {("nmse", "all"), ("wr", "all"), ("rmse", "score1"), ("rmse", "score2")}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_planted_dictionaries_predict_noiseless_targets(seed):
    # near-lossless encoding with the planted atoms; pooling + CV Lasso must
    # then recover the exactly linear targets
    data = generate_synthetic(SyntheticSpec(noise=0.0, target_noise=0.0, seed=seed))
    ds = Dataset.from_synthetic(data)
    cfg = desk_config(lam=1e-3)
    F = subject_features(ds, data.dictionaries, cfg, ds.subjects)
    train, test = split_subjects(ds.subjects, 0.8, seed=0)
    tr = [ds.subjects.index(s) for s in train]
    te = [ds.subjects.index(s) for s in test]
    for k in range(2):
        y = ds.targets[:, k]
        model, _ = fit_cv(F[tr], y[tr], seed=0)
        err = np.sqrt(np.mean((predict(model, F[te]) - y[te]) ** 2))
        assert err < 0.1 * y.std()


def test_learned_pipeline_beats_the_mean_on_noiseless_targets():
    data = generate_synthetic(SyntheticSpec(noise=0.0, target_noise=0.0, seed=1))
    result = run_experiment(Dataset.from_synthetic(data), desk_config(repeats=1))
    for k, name in enumerate(data.target_names):
        assert result.outcomes[0].values[("rmse", name)] < data.targets[:, k].std()


@pytest.mark.filterwarnings("ignore:constant target:RuntimeWarning")
def test_failed_repeats_are_recorded(small_data, tmp_path, caplog):
    data = Dataset.from_synthetic(small_data)
    data = dataclasses.replace(data, targets=np.ones_like(data.targets))  # nMSE undefined
    cfg = desk_config(output_dir=str(tmp_path), epochs=1)
    with caplog.at_level(logging.WARNING):
        result = run_pipeline(cfg, data)
    assert not result.succeeded and "repeat 0 failed" in caplog.text
    manifest = io.read_json(tmp_path / "manifest.json")
    assert manifest["repeats_failed"] == 2 and manifest["repeats_ok"] == 0
    assert "constant target" in manifest["failures"][0]["error"]
    assert all(np.isnan(r[2]) for r in io.read_results(tmp_path / "results.csv"))


def test_outputs_round_trip(small_data, tmp_path):
    cfg = desk_config(output_dir=str(tmp_path))
    result = run_pipeline(cfg, Dataset.from_synthetic(small_data))
    rows = io.read_results(tmp_path / "results.csv")
    np.testing.assert_array_equal([r[2:] for r in rows],
                                  [r[2:] for r in result.summary_rows()])
    assert [r[:2] for r in rows] == [("nmse", "all"), ("wr", "all"), ("rmse", "score1"),
                                    ("rmse", "score2")]
    assert ExperimentConfig.from_dict(io.read_json(tmp_path / "config.json")) == cfg
    lines = (tmp_path / "repeats.csv").read_text().splitlines()
    assert lines[0] == "repeat,seed,status,metric,task,value" and len(lines) == 1 + 2 * 4


def test_dataset_from_files(small_data, tmp_path):
    files = []
    for t, (X, g) in enumerate(zip(small_data.tasks, small_data.groupings)):
        io.save_matrix(tmp_path / f"t{t}.bin", X)
        io.save_grouping(tmp_path / f"g{t}.csv", g)
        files.append((str(tmp_path / f"t{t}.bin"), str(tmp_path / f"g{t}.csv")))
    io.save_table(tmp_path / "y.csv", small_data.subjects, small_data.targets,
                  small_data.target_names)
    cfg = desk_config(task_files=[f[0] for f in files], grouping_files=[f[1] for f in files],
                      targets_file=str(tmp_path / "y.csv"))
    ds = Dataset.from_config(cfg)
    assert all(np.array_equal(a, b) for a, b in zip(ds.tasks, small_data.tasks))
    assert ds.target_names == ["score1", "score2"]
    with pytest.raises(FileNotFoundError):
        Dataset.from_config(dataclasses.replace(cfg, targets_file=str(tmp_path / "nope.csv")))


def test_sweep_emits_one_row_per_split(small_data, tmp_path):
    cfg = desk_config(output_dir=str(tmp_path), epochs=2)
    splits = [(4, 12), (8, 8), (12, 4)]
    rows = sweep_dict_split(cfg, splits, Dataset.from_synthetic(small_data))
    assert [(r["shared"], r["individual"]) for r in rows] == splits
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "shared,individual,metric,mean,std,repeats_ok"
    assert [l.split(",")[:3] for l in lines[1:]] == [["4", "12", "rmse"], ["8", "8", "rmse"],
                                                     ["12", "4", "rmse"]]
    assert (tmp_path / "split_8_8" / "results.csv").is_file()
