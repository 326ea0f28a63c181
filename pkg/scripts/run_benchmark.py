#!/usr/bin/env python3
"""Reference benchmark: generate blobs, train the evidential model, calibrate
the uncertainty threshold, then report in-distribution and OOD results.

Runs the exact pipeline behind the headline numbers in the README:

    python3 scripts/run_benchmark.py --out-dir /tmp/evos_bench

Everything goes through the CLI so this doubles as an end-to-end exercise of
the command surface.
"""

import argparse
import sys

from evos.cli import main as evos


def sh(*argv: str) -> None:
    rc = evos(list(argv))
    if rc != 0:
        sys.exit(rc)


def run(out_dir: str, seed: int, epochs: int) -> None:
    data = f"{out_dir}/data"
    ckpt = f"{out_dir}/model.json"
    sh("gen-data", "--out-dir", data, "--seed", str(seed))
    sh(
        "train",
        "--train-csv", f"{data}/train.csv",
        "--val-csv", f"{data}/val.csv",
        "--out", ckpt,
        "--objective", "tun",
        "--epochs", str(epochs),
        "--seed", str(seed),
    )
    sh("calibrate", "--checkpoint", ckpt, "--val-csv", f"{data}/val.csv",
       "--seed", str(seed))
    sh(
        "eval",
        "--checkpoint", ckpt,
        "--test-csv", f"{data}/test.csv",
        "--thresholded",
        "--report", f"{out_dir}/eval.json",
        "--seed", str(seed),
    )
    sh(
        "ood-eval",
        "--checkpoint", ckpt,
        "--ood-csv", f"{data}/ood_far_cluster.csv", f"{data}/ood_ring.csv",
        "--report", f"{out_dir}/ood.json",
        "--seed", str(seed),
    )


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="/tmp/evos_bench")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epochs", type=int, default=400)
    a = ap.parse_args()
    run(a.out_dir, a.seed, a.epochs)
