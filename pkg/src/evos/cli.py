"""Command-line workbench.

Subcommands: gen-data, train, calibrate, eval, ood-eval, compare.

Every command takes --seed (default 0, fixed; never wall-clock) and
--config FILE with key=value lines providing defaults that explicit flags
override.  Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
failure.  All outputs are deterministic given (flags, seed, input files);
the one inherently non-reproducible quantity, wall-clock timing in
``compare``, goes to stdout and a ``.timing.json`` sidecar, never into
report files.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
import time

import numpy as np

from . import baselines, mlp
from .calibration import calibrate
from .checkpoint import (
    file_sha256,
    load_checkpoint,
    save_checkpoint,
    save_report,
)
from .data import gen_blobs, gen_ood, load_csv, save_csv, split_622
from .errors import DataError, NumericError
from .metrics import evaluate, ood_detection_rate
from .records import from_scores
from .training import Model, TrainConfig, train

DEFAULT_SEED = 0


# ---------------------------------------------------------------------------
# config-file handling: key=value lines, '#' comments; flags beat file values


def _load_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise DataError(f"{path}: no such config file") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(raw: str, like):
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise DataError(f"config: cannot parse boolean from {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def _resolve(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill None-valued options from --config, then from hard defaults."""
    file_vals = _load_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_vals) - set(defaults)
    if unknown:
        raise DataError(f"config: unknown keys {sorted(unknown)}")
    for key, dflt in defaults.items():
        if getattr(args, key, None) is None:
            if key in file_vals:
                setattr(args, key, _coerce(file_vals[key], dflt))
            else:
                setattr(args, key, dflt)
    return args


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise DataError(f"--hidden: cannot parse {text!r} (want e.g. 32,32)") from None
    if not dims:
        raise DataError("--hidden: empty layer list")
    return dims


def _snapshot_paths(ckpt_path: str) -> list[str]:
    stem = ckpt_path[:-5] if ckpt_path.endswith(".json") else ckpt_path
    return sorted(glob.glob(stem + ".snap*.json"))


def _load_snapshots(ckpt_path: str) -> list[mlp.MlpParams]:
    out = []
    for p in _snapshot_paths(ckpt_path):
        model, _, _, _ = load_checkpoint(p)
        out.append(model.params)
    return out


def _method_records(method, model, snapshots, ds, args):
    probs, u = baselines.score_method(
        method,
        model,
        ds.features,
        snapshots=snapshots,
        passes=args.passes,
        jitter_sigma=args.jitter_sigma,
        seed=args.seed,
    )
    return from_scores(probs, u, ds.labels)


def _auto_method(model: Model) -> str:
    return "uios" if model.is_evidential else "entropy"


# ---------------------------------------------------------------------------
# gen-data

GEN_DEFAULTS = dict(
    classes=5,
    dim=2,
    n_per_class=500,
    sigma=0.9,
    radius=4.0,
    ood_kinds="far_cluster,ring",
    ood_n=500,
    unseen_sigma=0.0,  # 0 disables the harder same-centers test set
    seed=DEFAULT_SEED,
)


def cmd_gen_data(args) -> int:
    args = _resolve(args, GEN_DEFAULTS)
    ds = gen_blobs(
        n_per_class=args.n_per_class,
        n_classes=args.classes,
        dim=args.dim,
        sigma=args.sigma,
        radius=args.radius,
        seed=args.seed,
    )
    tr, va, te = split_622(ds, seed=args.seed)
    centers = np.asarray(ds.meta["centers"])
    os.makedirs(args.out_dir, exist_ok=True)
    written = {}
    for tag, part in (("train", tr), ("val", va), ("test", te)):
        path = os.path.join(args.out_dir, f"{tag}.csv")
        save_csv(part, path)
        written[f"{tag}.csv"] = file_sha256(path)
    kinds = [k.strip() for k in str(args.ood_kinds).split(",") if k.strip()]
    for i, kind in enumerate(kinds):
        ood = gen_ood(
            kind,
            n=args.ood_n,
            centers=centers,
            sigma=args.sigma,
            seed=args.seed + 1000 + i,
        )
        path = os.path.join(args.out_dir, f"ood_{kind}.csv")
        save_csv(ood, path)
        written[f"ood_{kind}.csv"] = file_sha256(path)
    if args.unseen_sigma > 0:
        unseen = gen_blobs(
            n_per_class=args.n_per_class,
            n_classes=args.classes,
            dim=args.dim,
            sigma=args.unseen_sigma,
            radius=args.radius,
            seed=args.seed + 1,
            name="unseen",
        )
        path = os.path.join(args.out_dir, "unseen.csv")
        save_csv(unseen, path)
        written["unseen.csv"] = file_sha256(path)
    manifest = {
        "classes": args.classes,
        "dim": args.dim,
        "n_per_class": args.n_per_class,
        "sigma": args.sigma,
        "radius": args.radius,
        "ood_kinds": kinds,
        "ood_n": args.ood_n,
        "unseen_sigma": args.unseen_sigma,
        "seed": args.seed,
        "files": written,
    }
    mpath = os.path.join(args.out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {len(written)} csv files + manifest to {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# train

TRAIN_DEFAULTS = dict(
    objective="tun",
    epochs=400,
    learning_rate=1e-4,
    weight_decay=1e-4,
    batch_size=64,
    anneal_epochs=10,
    hidden="32,32",
    dropout_rate=0.0,
    snapshot_count=5,
    seed=DEFAULT_SEED,
)


def cmd_train(args) -> int:
    args = _resolve(args, TRAIN_DEFAULTS)
    train_set = load_csv(args.train_csv, name="train")
    val_set = load_csv(args.val_csv, name="val") if args.val_csv else None
    cfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        anneal_epochs=args.anneal_epochs,
        objective=args.objective,
        seed=args.seed,
        snapshot_count=args.snapshot_count,
    )
    net = mlp.MlpConfig(
        input_dim=train_set.dim,
        output_dim=train_set.n_classes,
        hidden_dims=_parse_hidden(args.hidden),
        dropout_rate=args.dropout_rate,
        seed=args.seed,
    )
    result = train(train_set, val_set, cfg, net)
    fingerprint = file_sha256(args.train_csv)
    save_checkpoint(args.out, result.model, cfg, fingerprint)
    stem = args.out[:-5] if args.out.endswith(".json") else args.out
    for i, (params, ep) in enumerate(zip(result.snapshots, result.snapshot_epochs)):
        snap_model = Model(
            config=result.model.config,
            params=params,
            objective=result.model.objective,
            schedule=result.model.schedule,
        )
        save_checkpoint(f"{stem}.snap{i}.json", snap_model, cfg, fingerprint)
    with open(stem + ".log.jsonl", "w") as fh:
        for rec in result.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    last = result.log[-1] if result.log else {}
    print(
        f"trained {args.objective} for {args.epochs} epochs: "
        f"final loss {last.get('loss', float('nan')):.4f}, "
        f"val acc {last.get('val_accuracy', float('nan')):.4f}; "
        f"checkpoint {args.out} (+{len(result.snapshots)} snapshots)"
    )
    return 0


# ---------------------------------------------------------------------------
# calibrate

CAL_DEFAULTS = dict(
    method="auto",
    coefficient=2.0,
    passes=baselines.DEFAULT_PASSES,
    jitter_sigma=baselines.DEFAULT_JITTER_SIGMA,
    seed=DEFAULT_SEED,
)


def cmd_calibrate(args) -> int:
    args = _resolve(args, CAL_DEFAULTS)
    model, tc, fingerprint, _ = load_checkpoint(args.checkpoint)
    val_set = load_csv(args.val_csv, name="val")
    method = _auto_method(model) if args.method == "auto" else args.method
    snapshots = _load_snapshots(args.checkpoint) if method == "ensemble" else None
    recs = _method_records(method, model, snapshots, val_set, args)
    n_wrong = int(np.sum(recs.predicted != recs.labels))
    if n_wrong == 0:
        raise DataError(
            "calibrate: the model makes no validation errors, so no threshold can "
            "be fit. Use a harder validation set (e.g. larger sigma) or fewer epochs."
        )
    cal = calibrate(recs, coefficient=args.coefficient)
    model.threshold = cal.threshold
    save_checkpoint(args.checkpoint, model, tc, fingerprint, calibration=cal)
    print(
        f"method {method}: threshold {cal.threshold:.6f} "
        f"(TPR {cal.tpr_at_threshold:.3f}, FPR {cal.fpr_at_threshold:.3f}, "
        f"objective {cal.objective_value:.3f}; {n_wrong}/{len(recs)} val errors)"
    )
    return 0


# ---------------------------------------------------------------------------
# eval

EVAL_DEFAULTS = dict(
    method="auto",
    thresholded=False,
    passes=baselines.DEFAULT_PASSES,
    jitter_sigma=baselines.DEFAULT_JITTER_SIGMA,
    seed=DEFAULT_SEED,
)


def cmd_eval(args) -> int:
    args = _resolve(args, EVAL_DEFAULTS)
    model, _, _, cal = load_checkpoint(args.checkpoint)
    test_set = load_csv(args.test_csv, name="test")
    method = _auto_method(model) if args.method == "auto" else args.method
    snapshots = _load_snapshots(args.checkpoint) if method == "ensemble" else None
    recs = _method_records(method, model, snapshots, test_set, args)
    sections = {"unthresholded": evaluate(recs).to_dict(), "method": method}
    line = (
        f"unthresholded: acc {sections['unthresholded']['accuracy']:.4f} "
        f"macro-F1 {sections['unthresholded']['per_class']['macro_f1']:.4f}"
    )
    if args.thresholded:
        if cal is None:
            raise DataError(
                "eval --thresholded: checkpoint has no calibrated threshold; "
                "run `evos calibrate` first"
            )
        rep = evaluate(recs, cal.threshold)
        sections["thresholded"] = rep.to_dict()
        sections["threshold"] = cal.threshold
        if rep.available:
            line += (
                f" | thresholded @ {cal.threshold:.4f}: "
                f"macro-F1 {rep.per_class.macro_f1:.4f} "
                f"(referred {rep.n_referred}/{rep.n_total})"
            )
        else:
            line += f" | thresholded @ {cal.threshold:.4f}: all referred"
    if args.report:
        save_report(
            args.report,
            command="eval",
            seed=args.seed,
            inputs={
                "checkpoint": file_sha256(args.checkpoint),
                "test_csv": file_sha256(args.test_csv),
            },
            sections=sections,
        )
    print(line)
    return 0


# ---------------------------------------------------------------------------
# ood-eval

OOD_DEFAULTS = dict(
    method="auto",
    bins=10,
    passes=baselines.DEFAULT_PASSES,
    jitter_sigma=baselines.DEFAULT_JITTER_SIGMA,
    seed=DEFAULT_SEED,
)


def _histogram_text(counts: np.ndarray) -> list[str]:
    top = max(int(counts.max()), 1)
    lines = []
    for i, c in enumerate(counts):
        bar = "#" * round(40 * c / top)
        lines.append(f"  u [{i / len(counts):.2f},{(i + 1) / len(counts):.2f}) {c:5d} {bar}")
    return lines


def cmd_ood_eval(args) -> int:
    args = _resolve(args, OOD_DEFAULTS)
    model, _, _, cal = load_checkpoint(args.checkpoint)
    if cal is None:
        raise DataError(
            "ood-eval: checkpoint has no calibrated threshold; run `evos calibrate` first"
        )
    method = _auto_method(model) if args.method == "auto" else args.method
    snapshots = _load_snapshots(args.checkpoint) if method == "ensemble" else None
    sections = {"method": method, "threshold": cal.threshold, "files": {}}
    inputs = {"checkpoint": file_sha256(args.checkpoint)}
    for path in args.ood_csv:
        ds = load_csv(path, name=path)
        recs = _method_records(method, model, snapshots, ds, args)
        rate = ood_detection_rate(recs.uncertainty, cal.threshold)
        counts, _ = np.histogram(recs.uncertainty, bins=args.bins, range=(0.0, 1.0))
        sections["files"][path] = {
            "n": len(recs),
            "detection_rate": rate,
            "mean_uncertainty": float(recs.uncertainty.mean()),
            "histogram_counts": counts.tolist(),
        }
        inputs[path] = file_sha256(path)
        print(f"{path}: detection rate {rate:.4f} at theta {cal.threshold:.4f} (n={len(recs)})")
        for line in _histogram_text(counts):
            print(line)
    if args.report:
        save_report(
            args.report, command="ood-eval", seed=args.seed, inputs=inputs, sections=sections
        )
    return 0


# ---------------------------------------------------------------------------
# compare

COMPARE_DEFAULTS = dict(
    methods="uios,entropy,mc_drop,ensemble,tta",
    coefficient=2.0,
    passes=baselines.DEFAULT_PASSES,
    jitter_sigma=baselines.DEFAULT_JITTER_SIGMA,
    seed=DEFAULT_SEED,
)

# artifact naming convention inside --checkpoint-dir
_ARTIFACT_FOR_METHOD = {
    "uios": "uios.json",
    "entropy": "standard.json",
    "mc_drop": "mcdrop.json",
    "ensemble": "standard.json",
    "tta": "standard.json",
}


def cmd_compare(args) -> int:
    args = _resolve(args, COMPARE_DEFAULTS)
    methods = [m.strip() for m in str(args.methods).split(",") if m.strip()]
    bad = [m for m in methods if m not in baselines.METHODS]
    if bad:
        raise DataError(f"compare: unknown methods {bad}, expected from {baselines.METHODS}")
    missing = []
    for m in methods:
        p = os.path.join(args.checkpoint_dir, _ARTIFACT_FOR_METHOD[m])
        if not os.path.exists(p):
            missing.append(f"{m} -> {p}")
        if m == "ensemble" and len(_snapshot_paths(p)) < 2:
            missing.append(f"{m} -> {p.replace('.json', '')}.snap*.json (need >= 2)")
    if missing:
        raise DataError("compare: missing artifacts:\n  " + "\n  ".join(missing))

    val_set = load_csv(args.val_csv, name="val")
    test_set = load_csv(args.test_csv, name="test")
    ood_sets = [load_csv(p, name=p) for p in (args.ood_csv or [])]

    rows = {}
    timing = {}
    for m in methods:
        ckpt = os.path.join(args.checkpoint_dir, _ARTIFACT_FOR_METHOD[m])
        model, _, _, _ = load_checkpoint(ckpt)
        snapshots = _load_snapshots(ckpt) if m == "ensemble" else None
        val_recs = _method_records(m, model, snapshots, val_set, args)
        cal = calibrate(val_recs, coefficient=args.coefficient)
        t0 = time.perf_counter()
        test_recs = _method_records(m, model, snapshots, test_set, args)
        elapsed = time.perf_counter() - t0
        rep = evaluate(test_recs)
        row = {
            "threshold": cal.threshold,
            "accuracy": rep.accuracy,
            "macro_f1": rep.per_class.macro_f1,
            "macro_auc": rep.macro_auc,
        }
        if ood_sets:
            u_all = np.concatenate(
                [_method_records(m, model, snapshots, o, args).uncertainty for o in ood_sets]
            )
            row["ood_detection_rate"] = ood_detection_rate(u_all, cal.threshold)
        rows[m] = row
        timing[m] = elapsed / len(test_set)

    header = f"{'method':10s} {'macro-F1':>9s} {'macro-AUC':>9s} {'OOD rate':>9s} {'theta':>8s} {'ms/sample':>10s}"
    print(header)
    for m in methods:
        r = rows[m]
        ood = f"{r['ood_detection_rate']:9.4f}" if "ood_detection_rate" in r else f"{'-':>9s}"
        print(
            f"{m:10s} {r['macro_f1']:9.4f} {r['macro_auc']:9.4f} {ood} "
            f"{r['threshold']:8.4f} {timing[m] * 1e3:10.4f}"
        )
    if args.report:
        inputs = {
            "val_csv": file_sha256(args.val_csv),
            "test_csv": file_sha256(args.test_csv),
        }
        for p in args.ood_csv or []:
            inputs[p] = file_sha256(p)
        save_report(
            args.report,
            command="compare",
            seed=args.seed,
            inputs=inputs,
            sections={"methods": rows},
        )
        with open(args.report + ".timing.json", "w") as fh:
            json.dump(
                {"ms_per_sample": {m: t * 1e3 for m, t in timing.items()}},
                fh,
                sort_keys=True,
                indent=2,
            )
            fh.write("\n")
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="evos",
        description="evidential open-set classification workbench",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
        sp.add_argument("--config", default=None, help="key=value defaults file")

    g = sub.add_parser("gen-data", help="generate benchmark CSVs + manifest")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--k", "--classes", dest="classes", type=int, default=None)
    g.add_argument("--dim", type=int, default=None)
    g.add_argument("--n-per-class", type=int, default=None)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--radius", type=float, default=None)
    g.add_argument("--ood-kinds", default=None, help="comma list: ring,far_cluster,uniform_box")
    g.add_argument("--ood-n", type=int, default=None)
    g.add_argument("--unseen-sigma", type=float, default=None,
                   help="also write a harder same-centers set with this sigma (0 = off)")
    common(g)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--train-csv", required=True)
    t.add_argument("--val-csv", default=None)
    t.add_argument("--out", required=True, help="checkpoint path (.json)")
    t.add_argument("--objective", choices=["standard_ce", "un", "tun"], default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--learning-rate", type=float, default=None)
    t.add_argument("--weight-decay", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--anneal-epochs", type=int, default=None)
    t.add_argument("--hidden", default=None, help="comma list of hidden sizes (default 32,32)")
    t.add_argument("--dropout-rate", type=float, default=None)
    t.add_argument("--snapshot-count", type=int, default=None)
    common(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("calibrate", help="fit the uncertainty threshold on validation data")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--val-csv", required=True)
    c.add_argument("--method", choices=["auto", *baselines.METHODS], default=None)
    c.add_argument("--coefficient", type=float, default=None,
                   help="TPR weight in the selection objective (default 2)")
    c.add_argument("--passes", type=int, default=None)
    c.add_argument("--jitter-sigma", type=float, default=None)
    common(c)
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("eval", help="evaluate on a test CSV")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--test-csv", required=True)
    e.add_argument("--report", default=None, help="write a report JSON here")
    e.add_argument("--thresholded", action="store_true", default=None,
                   help="also report metrics with low-confidence samples referred")
    e.add_argument("--method", choices=["auto", *baselines.METHODS], default=None)
    e.add_argument("--passes", type=int, default=None)
    e.add_argument("--jitter-sigma", type=float, default=None)
    common(e)
    e.set_defaults(func=cmd_eval)

    o = sub.add_parser("ood-eval", help="detection rates on OOD CSVs")
    o.add_argument("--checkpoint", required=True)
    o.add_argument("--ood-csv", nargs="+", required=True)
    o.add_argument("--report", default=None)
    o.add_argument("--method", choices=["auto", *baselines.METHODS], default=None)
    o.add_argument("--bins", type=int, default=None)
    o.add_argument("--passes", type=int, default=None)
    o.add_argument("--jitter-sigma", type=float, default=None)
    common(o)
    o.set_defaults(func=cmd_ood_eval)

    m = sub.add_parser("compare", help="compare uncertainty methods side by side")
    m.add_argument("--checkpoint-dir", required=True,
                   help="dir with uios.json / standard.json / mcdrop.json artifacts")
    m.add_argument("--val-csv", required=True)
    m.add_argument("--test-csv", required=True)
    m.add_argument("--ood-csv", nargs="*", default=None)
    m.add_argument("--methods", default=None, help="comma list (default: all five)")
    m.add_argument("--report", default=None)
    m.add_argument("--coefficient", type=float, default=None)
    m.add_argument("--passes", type=int, default=None)
    m.add_argument("--jitter-sigma", type=float, default=None)
    common(m)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse uses 2 for usage errors, 0 for --help
        return int(e.code or 0)
    try:
        return args.func(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
