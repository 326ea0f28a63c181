#!/usr/bin/env python3
"""Train the artifacts the `compare` command expects, then run it with all
five uncertainty methods.

Artifact layout inside --out-dir/cmp:
    uios.json      evidential (tun) model
    standard.json  plain cross-entropy model (entropy, ensemble, tta rows)
    mcdrop.json    cross-entropy model trained with dropout (mc_drop row)

    python3 scripts/run_compare.py --out-dir /tmp/evos_cmp
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
    cmp_dir = f"{out_dir}/cmp"
    sh("gen-data", "--out-dir", data, "--seed", str(seed))
    common = ["--train-csv", f"{data}/train.csv", "--val-csv", f"{data}/val.csv",
              "--epochs", str(epochs), "--seed", str(seed)]
    sh("train", *common, "--out", f"{cmp_dir}/uios.json", "--objective", "tun")
    sh("train", *common, "--out", f"{cmp_dir}/standard.json",
       "--objective", "standard_ce")
    sh("train", *common, "--out", f"{cmp_dir}/mcdrop.json",
       "--objective", "standard_ce", "--dropout-rate", "0.25")
    sh(
        "compare",
        "--checkpoint-dir", cmp_dir,
        "--val-csv", f"{data}/val.csv",
        "--test-csv", f"{data}/test.csv",
        "--ood-csv", f"{data}/ood_far_cluster.csv", f"{data}/ood_ring.csv",
        "--report", f"{out_dir}/compare.json",
        "--seed", str(seed),
    )


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="/tmp/evos_cmp")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epochs", type=int, default=400)
    a = ap.parse_args()
    run(a.out_dir, a.seed, a.epochs)
