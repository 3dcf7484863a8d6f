"""Repeated-split experiments: MSCC -> encode -> pool -> CV regression -> metrics."""
from __future__ import annotations

import dataclasses
import logging
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, metrics
from .encode import encode, max_pool
from .regression import DEFAULT_GRID, fit_cv, predict
from .train import MsccConfig, train

logger = logging.getLogger(__name__)

MODES = ("mscc", "baseline")
FEATURE_MODES = ("last", "concat")

# full-size split sweep; desk runs pass their own
DEFAULT_SPLITS = ((250, 1750), (500, 1500), (1000, 1000), (1500, 500), (1750, 250))


@dataclass
class ExperimentConfig:
    task_files: list = field(default_factory=list)
    grouping_files: list = field(default_factory=list)
    targets_file: str = ""
    output_dir: str = "results"

    lam: float = 0.1
    epochs: int = 10
    ccd_full_passes: int = 1
    ccd_support_passes: int = 3
    shared_atoms: int = 1000
    individual_atoms: int = 1000
    shuffle: bool = False

    mode: str = "mscc"
    pool: str = "absmax"
    features: str = "last"
    encode_tol: float = 1e-6
    encode_max_sweeps: int = 200

    method: str = "lasso"
    cv_folds: int = 5
    cv_grid: list = field(default_factory=lambda: [float(g) for g in DEFAULT_GRID])

    split: float = 0.8
    repeats: int = 40
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.split < 1:
            raise ValueError("split must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.features not in FEATURE_MODES:
            raise ValueError(f"features must be one of {FEATURE_MODES}")
        if len(self.task_files) != len(self.grouping_files):
            raise ValueError("one grouping file per task file is required")

    def mscc_config(self, seed):
        return MsccConfig(lam=self.lam, epochs=self.epochs,
                          ccd_full_passes=self.ccd_full_passes,
                          ccd_support_passes=self.ccd_support_passes,
                          shared_atoms=self.shared_atoms,
                          individual_atoms=self.individual_atoms,
                          seed=seed, shuffle=self.shuffle)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Dataset:
    tasks: list
    groupings: list
    subjects: list
    targets: np.ndarray
    target_names: list

    @classmethod
    def from_config(cls, config):
        missing = [f for f in [*config.task_files, *config.grouping_files, config.targets_file]
                   if not Path(f).is_file()]
        if missing:
            raise FileNotFoundError(f"missing input file(s): {missing}")
        tasks = [io.load_matrix(f) for f in config.task_files]
        groupings = [io.load_grouping(f) for f in config.grouping_files]
        subjects, targets, names = io.load_table(config.targets_file)
        return cls(tasks, groupings, subjects, targets, names)

    @classmethod
    def from_synthetic(cls, data):
        return cls(data.tasks, data.groupings, list(data.subjects), data.targets,
                   list(data.target_names))


@dataclass
class RepeatOutcome:
    repeat: int
    seed: int
    ok: bool
    values: dict = field(default_factory=dict)
    error: str = ""
    train_subjects: list = field(default_factory=list, repr=False)
    test_subjects: list = field(default_factory=list, repr=False)


@dataclass
class ExperimentResult:
    outcomes: list
    target_names: list

    @property
    def succeeded(self):
        return [o for o in self.outcomes if o.ok]

    def values(self, metric, task):
        return [o.values[(metric, task)] for o in self.succeeded]

    def summary_rows(self):
        keys = [("nmse", "all"), ("wr", "all")] + [("rmse", t) for t in self.target_names]
        rows = []
        for metric, task in keys:
            vals = self.values(metric, task)
            if not vals:
                rows.append((metric, task, float("nan"), float("nan")))
            elif len(vals) == 1:
                rows.append((metric, task, vals[0], float("nan")))
            else:
                rows.append((metric, task, *metrics.aggregate(vals)))
        return rows


def repeat_seed(master, repeat):
    return int(np.random.SeedSequence([master, repeat]).generate_state(1)[0])


def split_subjects(subjects, fraction, seed):
    """Shuffle subjects and keep the first ``round(fraction * n)`` for training."""
    n = len(subjects)
    n_train = int(round(fraction * n))
    if not 1 <= n_train < n:
        raise ValueError(f"split {fraction} of {n} subjects leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return [subjects[k] for k in perm[:n_train]], [subjects[k] for k in perm[n_train:]]


def learn_dictionaries(dataset, config, held_out, seed):
    """Train on every patch whose subject is not held out."""
    held_out = set(held_out)
    train_tasks = []
    for X, g in zip(dataset.tasks, dataset.groupings):
        mask = np.fromiter((s not in held_out for s in g.subject_of), dtype=bool,
                           count=g.patch_count)
        train_tasks.append(np.asfortranarray(X[:, mask]))
    cfg = config.mscc_config(seed)
    if config.mode == "mscc":
        return train(train_tasks, cfg).dictionaries
    # single-task stand-in: one shared-only dictionary over the pooled patches
    total = cfg.shared_atoms + cfg.individual_counts(len(train_tasks))[-1]
    cfg = dataclasses.replace(cfg, shared_atoms=total, individual_atoms=0)
    single = train([np.hstack(train_tasks)], cfg).dictionaries[0]
    return [single] * len(train_tasks)


def subject_features(dataset, dictionaries, config, subjects):
    tables = []
    for X, g, D in zip(dataset.tasks, dataset.groupings, dictionaries):
        Z = encode(D, X, config.lam, config.encode_tol, config.encode_max_sweeps)
        table = max_pool(Z, g, config.pool)
        row = {s: k for k, s in enumerate(table.subjects)}
        missing = [s for s in subjects if s not in row]
        if missing and (config.features == "concat" or g is dataset.groupings[-1]):
            raise ValueError(f"{len(missing)} subject(s) have no patches, e.g. {missing[0]}")
        tables.append(table.features[[row.get(s, 0) for s in subjects]])
    return tables[-1] if config.features == "last" else np.hstack(tables)


def run_repeat(dataset, config, repeat):
    seed = repeat_seed(config.seed, repeat)
    out = RepeatOutcome(repeat, seed, False)
    try:
        train_s, test_s = split_subjects(dataset.subjects, config.split, seed)
        out.train_subjects, out.test_subjects = train_s, test_s
        dictionaries = learn_dictionaries(dataset, config, test_s, seed)
        F = subject_features(dataset, dictionaries, config, dataset.subjects)
        row = {s: k for k, s in enumerate(dataset.subjects)}
        tr = np.array([row[s] for s in train_s])
        te = np.array([row[s] for s in test_s])
        Y, Yhat = [], []
        for k, name in enumerate(dataset.target_names):
            y = dataset.targets[:, k]
            model, _ = fit_cv(F[tr], y[tr], config.method, config.cv_folds, config.cv_grid, seed)
            yhat = predict(model, F[te])
            out.values[("rmse", name)] = metrics.rmse(y[te], yhat)
            Y.append(y[te])
            Yhat.append(yhat)
        out.values[("nmse", "all")] = metrics.nmse(Y, Yhat)
        if any(np.ptp(yh) == 0 for yh in Yhat):
            logger.info("repeat %d: constant prediction scored as zero correlation", repeat)
        out.values[("wr", "all")] = metrics.weighted_corr(Y, Yhat, constant="zero")
        out.ok = True
    except Exception as exc:  # a failed repeat is recorded, not fatal
        out.error = f"{type(exc).__name__}: {exc}"
        logger.warning("repeat %d failed: %s", repeat, out.error)
        logger.debug("%s", traceback.format_exc())
    return out


def run_experiment(dataset, config):
    if dataset.targets.shape != (len(dataset.subjects), len(dataset.target_names)):
        raise ValueError("targets table does not match its subject and column lists")
    outcomes = [run_repeat(dataset, config, r) for r in range(config.repeats)]
    return ExperimentResult(outcomes, list(dataset.target_names))


def _protocol(config):
    return {
        "lambda": config.lam, "epochs": config.epochs, "batch_size": 1,
        "ccd_full_passes": config.ccd_full_passes,
        "ccd_support_passes": config.ccd_support_passes,
        "shared_atoms": config.shared_atoms, "individual_atoms": config.individual_atoms,
        "split": config.split, "split_unit": "subject", "repeats": config.repeats,
        "regression": config.method, "cv_folds": config.cv_folds,
        "cv_grid_min": min(config.cv_grid), "cv_grid_max": max(config.cv_grid),
        "cv_grid_points": len(config.cv_grid), "pool": config.pool,
        "features": config.features, "mode": config.mode,
    }


def write_outputs(result, config, dataset, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    io.write_results(outdir / "results.csv", result.summary_rows())
    with open(outdir / "repeats.csv", "w", newline="") as fh:
        fh.write("repeat,seed,status,metric,task,value\n")
        for o in result.outcomes:
            if not o.ok:
                fh.write(f"{o.repeat},{o.seed},failed,,,\n")
                continue
            for (metric, task), v in o.values.items():
                fh.write(f"{o.repeat},{o.seed},ok,{metric},{task},{io.fmt(v)}\n")
    io.write_json(outdir / "config.json", config.to_dict())
    io.write_json(outdir / "manifest.json", {
        "protocol": _protocol(config),
        "data": {"tasks": [list(X.shape) for X in dataset.tasks],
                 "subjects": len(dataset.subjects), "targets": dataset.target_names},
        "repeats_ok": len(result.succeeded),
        "repeats_failed": len(result.outcomes) - len(result.succeeded),
        "failures": [{"repeat": o.repeat, "error": o.error}
                     for o in result.outcomes if not o.ok],
        "outputs": ["results.csv", "repeats.csv", "config.json"],
    })


def run_pipeline(config, dataset=None):
    """Load inputs (unless ``dataset`` is given), run all repeats, write result files."""
    dataset = dataset if dataset is not None else Dataset.from_config(config)
    result = run_experiment(dataset, config)
    write_outputs(result, config, dataset, config.output_dir)
    return result


def sweep_dict_split(config, splits, dataset=None):
    """Run the pipeline once per ``(shared, individual)`` split.

    Writes ``sweep.csv`` with one row per split (rMSE averaged over targets
    within each repeat) plus full results under ``split_<a>_<b>/``.
    """
    dataset = dataset if dataset is not None else Dataset.from_config(config)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for shared, individual in splits:
        cfg = dataclasses.replace(config, shared_atoms=shared, individual_atoms=individual,
                                  output_dir=str(outdir / f"split_{shared}_{individual}"))
        result = run_pipeline(cfg, dataset)
        per_repeat = [np.mean([o.values[("rmse", t)] for t in result.target_names])
                      for o in result.succeeded]
        rows.append({"shared": shared, "individual": individual,
                     "rmse": per_repeat, "n_ok": len(per_repeat)})
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        fh.write("shared,individual,metric,mean,std,repeats_ok\n")
        for r in rows:
            vals = r["rmse"]
            mean = float(np.mean(vals)) if vals else float("nan")
            std = metrics.aggregate(vals)[1] if len(vals) > 1 else float("nan")
            fh.write(f"{r['shared']},{r['individual']},rmse,{io.fmt(mean)},{io.fmt(std)},"
                     f"{r['n_ok']}\n")
    io.write_json(outdir / "config.json", config.to_dict())
    return rows
