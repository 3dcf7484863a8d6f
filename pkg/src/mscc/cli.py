"""Command-line entry point: ``mscc <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, metrics
from .encode import POOL_MODES, encode, max_pool
from .pipeline import (FEATURE_MODES, MODES, DEFAULT_SPLITS, ExperimentConfig, run_pipeline,
                       sweep_dict_split)
from .regression import DEFAULT_GRID, METHODS, fit_cv, predict
from .synthetic import SyntheticSpec, generate_synthetic
from .train import MsccConfig, train

logger = logging.getLogger("mscc")


def _splits(text):
    out = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        out.append((int(a), int(b)))
    return out


def _grid(text):
    return [float(v) for v in text.split(",")]


def _mscc_flags(p, defaults=True):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--lambda", dest="lam", type=float, default=d(0.1))
    p.add_argument("--epochs", type=int, default=d(10))
    p.add_argument("--ccd-full-passes", type=int, default=d(1))
    p.add_argument("--ccd-support-passes", type=int, default=d(3))
    p.add_argument("--shared-atoms", type=int, default=d(1000))
    p.add_argument("--individual-atoms", type=int, default=d(1000))
    p.add_argument("--shuffle", action="store_true", default=d(False))


def _experiment_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--task", dest="task_files", action="append", help="task matrix (repeat)")
    p.add_argument("--grouping", dest="grouping_files", action="append",
                   help="patch grouping per task (repeat, same order as --task)")
    p.add_argument("--targets", dest="targets_file")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--pool", choices=POOL_MODES)
    p.add_argument("--features", choices=FEATURE_MODES)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--folds", dest="cv_folds", type=int)
    p.add_argument("--grid", dest="cv_grid", type=_grid, help="comma-separated lambdas")
    p.add_argument("--encode-tol", type=float)
    p.add_argument("--encode-max-sweeps", type=int)
    _mscc_flags(p, defaults=False)


def build_parser():
    parser = argparse.ArgumentParser(prog="mscc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate planted multi-task data")
    p.add_argument("--out", required=True)
    p.add_argument("--tasks", type=int, default=3)
    p.add_argument("--p", type=int, default=32)
    p.add_argument("--shared-atoms", type=int, default=8)
    p.add_argument("--individual-atoms", type=int, default=8)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--samples", type=int, default=2000, help="patches per task")
    p.add_argument("--subjects", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--targets", type=int, default=2)
    p.add_argument("--target-sparsity", type=int, default=4)
    p.add_argument("--target-noise", type=float, default=0.1)
    p.add_argument("--target-source", choices=("last", "all"), default="last")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="learn shared/individual dictionaries")
    p.add_argument("--task", dest="task_files", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _mscc_flags(p)

    p = sub.add_parser("encode", help="sparse-code patches against a dictionary")
    p.add_argument("--dict", required=True)
    p.add_argument("--patches", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-sweeps", type=int, default=200)

    p = sub.add_parser("pool", help="max-pool patch codes per subject")
    p.add_argument("--codes", required=True)
    p.add_argument("--grouping", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pool", choices=POOL_MODES, default="absmax")

    p = sub.add_parser("regress", help="cross-validated Lasso/Ridge on subject features")
    p.add_argument("--features", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--target", help="target column (default: all)")
    p.add_argument("--method", choices=METHODS, default="lasso")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--predict", help="features to predict")
    p.add_argument("--predictions", help="where to write predictions CSV")

    p = sub.add_parser("evaluate", help="nMSE, wR and rMSE of predictions")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", help="CSV output (default: stdout)")

    p = sub.add_parser("pipeline", help="repeated-split MSCC -> regression experiment")
    _experiment_flags(p)

    p = sub.add_parser("sweep-dict-split", help="pipeline over shared:individual splits")
    _experiment_flags(p)
    p.add_argument("--splits", type=_splits,
                   default=list(DEFAULT_SPLITS), help="e.g. 250:1750,1000:1000")
    return parser


def experiment_config(args):
    values = io.read_json(args.config) if args.config else {}
    for name in ExperimentConfig.__dataclass_fields__:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return ExperimentConfig.from_dict(values)


def cmd_synth(args):
    spec = SyntheticSpec(
        n_tasks=args.tasks, p=args.p, shared_atoms=args.shared_atoms,
        individual_atoms=args.individual_atoms, sparsity=args.sparsity,
        samples_per_task=args.samples, n_subjects=args.subjects, noise=args.noise,
        n_targets=args.targets, target_sparsity=args.target_sparsity,
        target_noise=args.target_noise, target_source=args.target_source, seed=args.seed)
    data = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks, groups = [], []
    for t in range(spec.n_tasks):
        io.save_matrix(out / f"task{t}.bin", data.tasks[t])
        io.save_grouping(out / f"grouping{t}.csv", data.groupings[t])
        io.save_matrix(out / f"planted_dict{t}.bin", data.dictionaries[t].atoms)
        io.save_matrix(out / f"planted_codes{t}.bin", data.codes[t])
        tasks.append(str(out / f"task{t}.bin"))
        groups.append(str(out / f"grouping{t}.csv"))
    io.save_table(out / "targets.csv", data.subjects, data.targets, data.target_names)
    io.write_json(out / "synth.json", spec.to_dict())
    io.write_json(out / "data.json", {"task_files": tasks, "grouping_files": groups,
                                      "targets_file": str(out / "targets.csv")})


def cmd_train(args):
    cfg = MsccConfig(lam=args.lam, epochs=args.epochs, ccd_full_passes=args.ccd_full_passes,
                     ccd_support_passes=args.ccd_support_passes,
                     shared_atoms=args.shared_atoms, individual_atoms=args.individual_atoms,
                     seed=args.seed, shuffle=args.shuffle)
    result = train([io.load_matrix(f) for f in args.task_files], cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t, (D, Z) in enumerate(zip(result.dictionaries, result.codes)):
        io.save_matrix(out / f"dict{t}.bin", D.atoms)
        io.save_matrix(out / f"codes{t}.bin", Z)
    with open(out / "objective.csv", "w", newline="") as fh:
        fh.write("epoch,objective\n")
        for k, v in enumerate(result.objective_trace, 1):
            fh.write(f"{k},{io.fmt(v)}\n")
    io.write_json(out / "train.json", dataclasses.asdict(cfg))


def cmd_encode(args):
    D = io.load_matrix(args.dict)
    Z = encode(D, io.load_matrix(args.patches), args.lam, args.tol, args.max_sweeps)
    io.save_matrix(args.out, Z)


def cmd_pool(args):
    table = max_pool(io.load_matrix(args.codes), io.load_grouping(args.grouping), args.pool)
    io.save_features(args.out, table)


def _align(subjects, other_subjects, values, what):
    row = {s: k for k, s in enumerate(other_subjects)}
    missing = [s for s in subjects if s not in row]
    if missing:
        raise ValueError(f"{what} lacks subject(s) {missing[:3]}")
    return values[[row[s] for s in subjects]]


def cmd_regress(args):
    feats = io.load_features(args.features)
    subjects, Y, names = io.load_table(args.targets)
    cols = [names.index(args.target)] if args.target else range(len(names))
    Y = _align(feats.subjects, subjects, Y, "targets file")
    models, preds = {}, []
    test = io.load_features(args.predict) if args.predict else None
    for k in cols:
        model, report = fit_cv(feats.features, Y[:, k], args.method, args.folds, args.grid,
                               args.seed)
        models[names[k]] = {**model.to_dict(), "cv_grid": report.grid.tolist(),
                            "cv_mean_rmse": report.mean_rmse.tolist()}
        if test is not None:
            preds.append(predict(model, test.features))
    io.write_json(args.out, models)
    if test is not None:
        dest = args.predictions or str(Path(args.out).with_suffix(".predictions.csv"))
        io.save_table(dest, test.subjects, np.column_stack(preds), [names[k] for k in cols])


def cmd_evaluate(args):
    t_subj, T, t_names = io.load_table(args.truth)
    p_subj, P, p_names = io.load_table(args.pred)
    names = [n for n in p_names if n in t_names]
    if not names:
        raise ValueError("no target column in common between truth and predictions")
    T = _align(p_subj, t_subj, T, "truth file")
    Y = [T[:, t_names.index(n)] for n in names]
    Yhat = [P[:, p_names.index(n)] for n in names]
    rows = [("nmse", "all", metrics.nmse(Y, Yhat)), ("wr", "all", metrics.weighted_corr(Y, Yhat))]
    rows += [("rmse", n, metrics.rmse(y, yh)) for n, y, yh in zip(names, Y, Yhat)]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "task", "value"])
        w.writerows([m, t, io.fmt(v)] for m, t, v in rows)
    finally:
        if args.out:
            fh.close()


def cmd_pipeline(args):
    cfg = experiment_config(args)
    result = run_pipeline(cfg)
    for metric, task, mean, std in result.summary_rows():
        print(f"{metric},{task},{mean:.4f},{std:.4f}")
    if not result.succeeded:
        raise RuntimeError("every repeat failed; see manifest.json")


def cmd_sweep(args):
    cfg = experiment_config(args)
    for row in sweep_dict_split(cfg, args.splits):
        vals = row["rmse"]
        print(f"{row['shared']}:{row['individual']} rmse "
              f"{np.mean(vals) if vals else float('nan'):.4f} ({row['n_ok']} ok)")


COMMANDS = {
    "synth": cmd_synth, "train": cmd_train, "encode": cmd_encode, "pool": cmd_pool,
    "regress": cmd_regress, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
    "sweep-dict-split": cmd_sweep,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"mscc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
