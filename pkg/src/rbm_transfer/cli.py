"""Command line front end: ``rbm-transfer <command> [flags]``.

Exit codes
----------
0  success
1  unexpected internal error
2  invalid flags or argument values
3  I/O error (missing or unreadable file)
4  malformed input file (bad magic, truncated, count mismatch)
5  dimension mismatch between model and data
6  exact computation exceeds the enumeration limit
7  numerical failure (non-finite values)

Failures print exactly one JSON line on stderr:
``{"error": <class>, "code": <exit code>, "message": <text>}``.
"""

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from .classifier import ClfConfig, clf_train
from .data import (
    BenchmarkConfig,
    NoiseConfig,
    bars_and_stripes,
    downscale,
    image_grid,
    load_idx,
    make_desk_benchmark,
    make_target_domain,
    save_idx,
    synthetic_glyphs,
    write_pgm,
)
from .errors import InvalidArgumentError, RbmTransferError
from .modelio import load_mlp, load_rbm, save_mlp, save_rbm
from .partition import AisConfig, ais_log_partition
from .rbm import gibbs_chain
from .rng import make_rng, stream
from .training import TrainConfig, train
from .transfer import TransferConfig, evaluate_pipeline, transfer_dataset

BUILTIN = ("source-train", "source-test", "target-test", "bas")

# Hyperparameters of the desk benchmark (`bench`).
BENCH_RBM = dict(n_hidden=300, algorithm="pcd", k=1, learning_rate=0.01, epochs=100, batch_size=20)
BENCH_CLF = dict(hidden_units=128, learning_rate=0.2, epochs=30, batch_size=32)


class UsageError(InvalidArgumentError):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ helpers


def git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            cwd=os.path.dirname(os.path.abspath(__file__)),
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def load_dataset(where, labels_path=None, data_seed=0):
    """``builtin:<name>`` or an IDX image file (labels alongside or given explicitly)."""
    if where.startswith("builtin:"):
        name = where.split(":", 1)[1]
        if name not in BUILTIN:
            raise UsageError(f"unknown builtin dataset {name!r}; choose from {', '.join(BUILTIN)}")
        if name == "bas":
            return bars_and_stripes(4)
        return dict(zip(BUILTIN, make_desk_benchmark(data_seed)))[name]
    if labels_path is None:
        base = os.path.basename(where)
        if "images" not in base:
            raise UsageError(f"cannot infer a labels file for {where}; pass the labels path explicitly")
        labels_path = os.path.join(os.path.dirname(where), base.replace("images", "labels"))
    return load_idx(where, labels_path)


def parse_ks(text):
    try:
        ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--ks expects comma-separated integers, got {text!r}")
    if not ks or min(ks) < 1:
        raise UsageError("--ks needs at least one positive integer")
    return ks


def mode_name(mode):
    return {"mean": "mean_field", "binary": "binary_sample"}[mode]


def out_path(args, name):
    return name if os.path.isabs(name) else os.path.join(args.out_dir, name)


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "k", "accuracy"])
    for condition, k, acc in report.rows():
        w.writerow([condition, k, repr(acc)])
    return buf.getvalue()


def before_after_grid(before, after, n=10):
    n = min(n, before.n)
    pairs = np.concatenate([before.images()[:n], after.images()[:n]])
    return image_grid(pairs, n_cols=max(n, 1))


# ----------------------------------------------------------------- commands


def cmd_train_rbm(args):
    data = load_dataset(args.data, args.labels, args.data_seed)
    cfg = TrainConfig(
        algorithm=args.algo,
        k=args.k,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        weight_decay=args.weight_decay,
        momentum=args.momentum,
        init_weight_scale=args.init_scale,
        seed=args.seed,
    )
    metrics = open(out_path(args, args.metrics), "w", newline="") if args.metrics else sys.stdout
    writer = csv.writer(metrics, lineterminator="\n")
    writer.writerow(["epoch", "recon_error", "exact_ll", "wall_ms"])

    def log(rec):
        ll = "" if rec.exact_ll is None else repr(rec.exact_ll)
        writer.writerow([rec.epoch, repr(rec.recon_error), ll, f"{rec.wall_ms:.1f}"])
        metrics.flush()

    try:
        params, _ = train(data, args.hidden, cfg, track_exact_ll=args.exact_ll, callback=log)
    finally:
        if metrics is not sys.stdout:
            metrics.close()
    path = out_path(args, args.out)
    save_rbm(params, path)
    outputs = [path] + ([out_path(args, args.metrics)] if args.metrics else [])
    return outputs, {"train_config": cfg.__dict__, "data": data.manifest()}


def cmd_train_clf(args):
    data = load_dataset(args.data, args.labels, args.data_seed)
    cfg = ClfConfig(
        hidden_units=args.hidden, learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch, seed=args.seed
    )
    params = clf_train(data, cfg)
    path = out_path(args, args.out)
    save_mlp(params, path)
    return [path], {"clf_config": cfg.__dict__, "data": data.manifest()}


def cmd_transfer(args):
    rbm = load_rbm(args.rbm)
    data = load_dataset(args.input, args.in_labels, args.data_seed)
    cfg = TransferConfig(k=args.k, output_mode=mode_name(args.mode), seed=args.seed)
    moved = transfer_dataset(rbm, data, cfg, threads=args.threads)
    images = out_path(args, args.out)
    labels = out_path(args, args.out_labels or derive_labels_name(args.out))
    save_idx(moved, images, labels)
    outputs = [images, labels]
    if args.grid:
        grid = out_path(args, args.grid)
        write_pgm(grid, before_after_grid(data, moved))
        outputs.append(grid)
    return outputs, {"transfer_config": cfg.__dict__, "input": data.manifest()}


def derive_labels_name(images_name):
    head, base = os.path.split(images_name)
    if "images" in base:
        return os.path.join(head, base.replace("images", "labels"))
    return images_name + ".labels"


def cmd_eval(args):
    rbm = load_rbm(args.rbm)
    clf = load_mlp(args.clf)
    source = load_dataset(args.source, args.source_labels, args.data_seed)
    target = load_dataset(args.target, args.target_labels, args.data_seed)
    oracle = load_mlp(args.oracle_clf) if args.oracle_clf else None
    cfg = TransferConfig(output_mode=mode_name(args.mode), seed=args.seed)
    report = evaluate_pipeline(rbm, clf, source, target, args.ks, cfg, oracle, threads=args.threads)
    report_path, csv_path = out_path(args, args.out), out_path(args, args.csv)
    write_json(report_path, report.to_dict())
    with open(csv_path, "w") as f:
        f.write(report_csv(report))
    print(json.dumps(report.to_dict(), sort_keys=True))
    return [report_path, csv_path], {}


def cmd_ais(args):
    rbm = load_rbm(args.rbm)
    cfg = AisConfig(n_temperatures=args.temperatures, n_chains=args.chains, schedule=args.schedule, seed=args.seed)
    est = ais_log_partition(rbm, cfg)
    record = {
        "mean_log_z": est.mean_log_z,
        "std_err_log_z": est.std_err_log_z,
        "n_chains": est.n_chains,
        "n_temperatures": cfg.n_temperatures,
        "seed": cfg.seed,
    }
    line = json.dumps(record, sort_keys=True)
    print(line)
    outputs = []
    if args.out:
        path = out_path(args, args.out)
        with open(path, "w") as f:
            f.write(line + "\n")
        outputs.append(path)
    return outputs, {}


def cmd_sample(args):
    rbm = load_rbm(args.rbm)
    rng = make_rng(args.seed)
    v0 = (rng.random((args.chains, rbm.n_visible)) < 0.5).astype(np.float64)
    side = int(round(np.sqrt(rbm.n_visible)))
    width = args.width or side
    if rbm.n_visible % width:
        raise UsageError(f"--width {width} does not divide {rbm.n_visible} visible units")
    height = rbm.n_visible // width
    steps = sorted(set(args.steps))
    rows, v, done = [v0], v0, 0
    for k in steps:
        state = gibbs_chain(rbm, v, k - done, rng)
        v, done = state.v, k
        rows.append(state.p_v)
    rows = [r.reshape(-1, height, width) for r in rows]
    grid = image_grid(np.concatenate(rows), n_cols=args.chains)
    path = out_path(args, args.grid)
    write_pgm(path, grid)
    return [path], {}


def cmd_bench(args):
    t0 = time.perf_counter()
    bcfg = BenchmarkConfig(
        n_train=args.n_train,
        n_test=args.n_test,
        noise=NoiseConfig(amplitude=args.noise_amplitude, blur_radius=args.blur_radius),
        mnist_dir=args.mnist_dir,
    )
    source_train, source_test, target_test = make_desk_benchmark(args.seed, bcfg)
    log(args, f"benchmark built: {source_train.n} train / {source_test.n} source test / {target_test.n} target test")

    rbm_cfg = TrainConfig(
        algorithm=args.algo,
        k=args.k,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
    )
    rbm, history = train(source_train, args.hidden, rbm_cfg)
    log(args, f"rbm trained: recon_error {history.recon_errors[-1]:.5f}")
    clf_cfg = ClfConfig(seed=args.seed, **BENCH_CLF)
    clf = clf_train(source_train, clf_cfg)
    oracle = None
    if args.oracle:
        # Labelled target data, used only for the reference row of the report.
        twin = downscale(synthetic_glyphs(args.n_train, args.seed, 4), bcfg.factor)
        target_train = make_target_domain(twin, bcfg.noise, stream(args.seed, 5))
        oracle = clf_train(target_train, clf_cfg)

    report = evaluate_pipeline(
        rbm,
        clf,
        source_test,
        target_test,
        args.ks,
        TransferConfig(output_mode=mode_name(args.mode), seed=args.seed),
        oracle,
        threads=args.threads,
    )
    paths = {name: out_path(args, name) for name in ("report.json", "report.csv", "rbm.bin", "clf.bin", "transfer.pgm")}
    write_json(paths["report.json"], report.to_dict())
    with open(paths["report.csv"], "w") as f:
        f.write(report_csv(report))
    save_rbm(rbm, paths["rbm.bin"])
    save_mlp(clf, paths["clf.bin"])
    subset = target_test.subset(slice(0, 10))
    rows = [subset.images()]
    for k in args.ks:
        moved = transfer_dataset(rbm, subset, TransferConfig(k=k, output_mode=mode_name(args.mode), seed=args.seed))
        rows.append(moved.images())
    write_pgm(paths["transfer.pgm"], image_grid(np.concatenate(rows), n_cols=subset.n))
    print(json.dumps(report.to_dict(), sort_keys=True))
    log(args, f"bench finished in {time.perf_counter() - t0:.1f}s")
    extra = {
        "benchmark": {"n_train": bcfg.n_train, "n_test": bcfg.n_test, "noise": bcfg.noise.__dict__},
        "rbm_config": rbm_cfg.__dict__,
        "clf_config": clf_cfg.__dict__,
    }
    return list(paths.values()), extra


def log(args, message):
    if not args.quiet:
        print(message, file=sys.stderr)


# ------------------------------------------------------------------- parser


def build_parser():
    common = Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (64-bit unsigned)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes outputs")
    common.add_argument("--out-dir", default=".", help="directory for relative output paths and the manifest")
    common.add_argument("--quiet", action="store_true", help="suppress progress lines on stderr")
    common.add_argument("--data-seed", type=int, default=0, help="seed of builtin:* benchmark datasets")

    parser = Parser(prog="rbm-transfer", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("train-rbm", parents=[common], help="train an RBM and write an RBM1 file")
    p.add_argument("--data", required=True, help="IDX images path or builtin:{%s}" % ",".join(BUILTIN))
    p.add_argument("--labels", help="IDX labels path (default: images name with 'images' -> 'labels')")
    p.add_argument("--hidden", type=int, default=500)
    p.add_argument("--algo", choices=("cd", "pcd"), default="pcd")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--momentum", type=float, default=0.5)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--init-scale", type=float, default=0.01)
    p.add_argument("--exact-ll", action="store_true", help="track exact log-likelihood (small models only)")
    p.add_argument("--metrics", help="per-epoch CSV path (default: stdout)")
    p.add_argument("--out", required=True, help="output RBM file")
    p.set_defaults(func=cmd_train_rbm)

    p = sub.add_parser("train-clf", parents=[common], help="train the source classifier and write an MLP1 file")
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--out", required=True, help="output MLP file")
    p.set_defaults(func=cmd_train_clf)

    p = sub.add_parser("transfer", parents=[common], help="move images toward the RBM's distribution")
    p.add_argument("--rbm", required=True)
    p.add_argument("--in", dest="input", required=True, help="IDX images path or builtin:<name>")
    p.add_argument("--in-labels")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--mode", choices=("mean", "binary"), default="mean")
    p.add_argument("--out", required=True, help="output IDX images path (pixels quantised to bytes)")
    p.add_argument("--out-labels")
    p.add_argument("--grid", help="PGM of before/after pairs")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval", parents=[common], help="accuracy table for source, target and transferred target")
    p.add_argument("--rbm", required=True)
    p.add_argument("--clf", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--source-labels")
    p.add_argument("--target", required=True)
    p.add_argument("--target-labels")
    p.add_argument("--oracle-clf", help="classifier trained on labelled target data (reference row)")
    p.add_argument("--ks", type=parse_ks, default=[1, 3], help="comma-separated chain lengths")
    p.add_argument("--mode", choices=("mean", "binary"), default="mean")
    p.add_argument("--out", default="report.json")
    p.add_argument("--csv", default="report.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ais", parents=[common], help="estimate log Z by annealed importance sampling")
    p.add_argument("--rbm", required=True)
    p.add_argument("--temperatures", type=int, default=1000)
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--schedule", choices=("linear", "sigmoid"), default="linear")
    p.add_argument("--out", help="also write the JSON record to this file")
    p.set_defaults(func=cmd_ais)

    p = sub.add_parser("sample", parents=[common], help="free-running Gibbs chains from uniform noise")
    p.add_argument("--rbm", required=True)
    p.add_argument("--chains", type=int, default=10)
    p.add_argument("--steps", type=parse_ks, default=[1, 3, 100, 1000],
                   help="comma-separated snapshot step counts")
    p.add_argument("--width", type=int, help="image width (default: square images)")
    p.add_argument("--grid", default="samples.pgm")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", parents=[common], help="desk-scale benchmark: build data, train, evaluate")
    p.add_argument("--mnist-dir", help="directory with MNIST IDX files (default: builtin glyphs)")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--noise-amplitude", type=float, default=NoiseConfig.amplitude)
    p.add_argument("--blur-radius", type=int, default=NoiseConfig.blur_radius)
    p.add_argument("--hidden", type=int, default=BENCH_RBM["n_hidden"])
    p.add_argument("--algo", choices=("cd", "pcd"), default=BENCH_RBM["algorithm"])
    p.add_argument("--k", type=int, default=BENCH_RBM["k"])
    p.add_argument("--lr", type=float, default=BENCH_RBM["learning_rate"])
    p.add_argument("--epochs", type=int, default=BENCH_RBM["epochs"])
    p.add_argument("--batch", type=int, default=BENCH_RBM["batch_size"])
    p.add_argument("--ks", type=parse_ks, default=[1, 3], help="comma-separated chain lengths")
    p.add_argument("--mode", choices=("mean", "binary"), default="mean")
    p.add_argument("--oracle", action="store_true", help="also train a classifier on labelled target data")
    p.set_defaults(func=cmd_bench)
    return parser


def fail(exc, code):
    record = {"error": type(exc).__name__, "code": code, "message": str(exc).replace("\n", " ")}
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be positive")
        os.makedirs(args.out_dir, exist_ok=True)
        t0 = time.perf_counter()
        outputs, extra = args.func(args)
        flags = {k: v for k, v in vars(args).items() if k != "func"}
        manifest = {
            "command": args.command,
            "flags": flags,
            "seed": args.seed,
            "git_describe": git_describe(),
            "wall_ms": round((time.perf_counter() - t0) * 1000.0, 1),
            "outputs": outputs,
            **extra,
        }
        write_json(os.path.join(args.out_dir, f"{args.command}.manifest.json"), manifest)
        return 0
    except RbmTransferError as exc:
        return fail(exc, exc.exit_code)
    except (OSError, EOFError) as exc:
        return fail(exc, 3)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 1
        return fail(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
