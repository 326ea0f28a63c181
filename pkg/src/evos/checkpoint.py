"""Checkpoint and report files.

Both are JSON with sorted keys and a format_version, written with a
trailing newline so identical content is byte-identical on disk.  Arrays
are base64-encoded little-endian float64, which round-trips bit-exactly.
Readers are strict: unknown keys or a wrong version are rejected, so stale
files fail loudly instead of half-loading.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os

import numpy as np

from . import mlp
from .calibration import ThresholdCalibration
from .errors import DataError
from .losses import Schedule
from .training import Model, TrainConfig

FORMAT_VERSION = 1

_CHECKPOINT_KEYS = {
    "format_version",
    "kind",
    "mlp",
    "params",
    "objective",
    "schedule",
    "train_config",
    "dataset_fingerprint",
    "calibration",
}
_REPORT_KEYS = {"format_version", "kind", "command", "seed", "inputs", "sections"}


def encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.astype("<f8").tobytes()).decode("ascii"),
    }


def decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj: dict, path) -> None:
    parent = os.path.dirname(str(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from None


def _check_keys(obj: dict, allowed: set, path, kind: str) -> None:
    if not isinstance(obj, dict):
        raise DataError(f"{path}: expected a JSON object")
    unknown = set(obj) - allowed
    missing = allowed - set(obj)
    if unknown or missing:
        raise DataError(
            f"{path}: bad {kind} schema (unknown: {sorted(unknown)}, "
            f"missing: {sorted(missing)})"
        )
    if obj.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"{path}: format_version {obj.get('format_version')!r}, "
            f"this build reads {FORMAT_VERSION}"
        )
    if obj.get("kind") != kind:
        raise DataError(f"{path}: kind {obj.get('kind')!r}, expected {kind!r}")


def save_checkpoint(
    path,
    model: Model,
    train_config: TrainConfig,
    dataset_fingerprint: str,
    calibration: ThresholdCalibration | None = None,
) -> None:
    obj = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "mlp": {
            "input_dim": model.config.input_dim,
            "output_dim": model.config.output_dim,
            "hidden_dims": list(model.config.hidden_dims),
            "activation": model.config.activation,
            "dropout_rate": model.config.dropout_rate,
            "seed": model.config.seed,
        },
        "params": {
            "weights": [encode_array(w) for w in model.params.weights],
            "biases": [encode_array(b) for b in model.params.biases],
        },
        "objective": model.objective,
        "schedule": {
            "epoch": model.schedule.epoch,
            "anneal_epochs": model.schedule.anneal_epochs,
            "kl_weight": model.schedule.kl_weight,
            "temperature": model.schedule.temperature,
        },
        "train_config": {
            "epochs": train_config.epochs,
            "learning_rate": train_config.learning_rate,
            "weight_decay": train_config.weight_decay,
            "batch_size": train_config.batch_size,
            "anneal_epochs": train_config.anneal_epochs,
            "objective": train_config.objective,
            "seed": train_config.seed,
            "snapshot_count": train_config.snapshot_count,
        },
        "dataset_fingerprint": dataset_fingerprint,
        "calibration": calibration.to_dict() if calibration is not None else None,
    }
    _dump(obj, path)


def load_checkpoint(path) -> tuple[Model, TrainConfig, str, ThresholdCalibration | None]:
    obj = _load(path)
    _check_keys(obj, _CHECKPOINT_KEYS, path, "checkpoint")
    m = obj["mlp"]
    cfg = mlp.MlpConfig(
        input_dim=m["input_dim"],
        output_dim=m["output_dim"],
        hidden_dims=tuple(m["hidden_dims"]),
        activation=m["activation"],
        dropout_rate=m["dropout_rate"],
        seed=m["seed"],
    )
    params = mlp.MlpParams(
        weights=[decode_array(w) for w in obj["params"]["weights"]],
        biases=[decode_array(b) for b in obj["params"]["biases"]],
    )
    sched = Schedule(
        epoch=obj["schedule"]["epoch"],
        anneal_epochs=obj["schedule"]["anneal_epochs"],
        kl_weight=obj["schedule"]["kl_weight"],
        temperature=obj["schedule"]["temperature"],
    )
    calib = (
        ThresholdCalibration.from_dict(obj["calibration"])
        if obj["calibration"] is not None
        else None
    )
    model = Model(
        config=cfg,
        params=params,
        objective=obj["objective"],
        schedule=sched,
        threshold=calib.threshold if calib is not None else None,
    )
    tc = TrainConfig(**obj["train_config"])
    return model, tc, obj["dataset_fingerprint"], calib


def save_report(path, command: str, seed: int, inputs: dict, sections: dict) -> None:
    """Deterministic run report.  ``inputs`` maps names to content hashes;
    ``sections`` holds plain-JSON metric blocks.  Timing measurements are
    deliberately kept out of reports (they cannot be reproducible); the CLI
    writes them to a sidecar file instead."""
    obj = {
        "format_version": FORMAT_VERSION,
        "kind": "report",
        "command": command,
        "seed": seed,
        "inputs": inputs,
        "sections": sections,
    }
    _dump(obj, path)


def load_report(path) -> dict:
    obj = _load(path)
    _check_keys(obj, _REPORT_KEYS, path, "report")
    return obj
