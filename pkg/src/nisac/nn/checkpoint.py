"""Self-describing model checkpoints and training-history CSV.

Checkpoint layout (little-endian)::

    8 bytes   magic b"NISACNN\\x00"
    u32       format version
    u32       length J of the JSON header
    J bytes   UTF-8 JSON: {"cnn": CnnConfig, "params": [[name, shape], ...], "meta": {...}}
    rest      float32 parameters, concatenated in the listed (sorted) name order
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .model import CnnConfig, ResNet

MAGIC = b"NISACNN\x00"
VERSION = 1
HISTORY_FIELDS = ("epoch", "train_loss", "val_loss")


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def checkpoint_bytes(model: ResNet, meta: dict | None = None) -> bytes:
    names = sorted(model.params)
    header = {"cnn": model.config.to_dict(),
              "params": [[n, list(model.params[n].shape)] for n in names],
              "meta": meta or {}}
    hdr = json.dumps(header, sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(model.params[n], dtype="<f4").tobytes() for n in names)
    return MAGIC + struct.pack("<II", VERSION, len(hdr)) + hdr + blob


def save_checkpoint(model: ResNet, path, meta: dict | None = None) -> None:
    _atomic_write(path, checkpoint_bytes(model, meta))


def load_checkpoint(path) -> tuple[ResNet, dict]:
    """Model (float32 weights promoted to float64) and the stored meta dict."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a model checkpoint")
    version, n = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(raw[16:16 + n])
    model = ResNet(CnnConfig(**header["cnn"]))
    expected = {k: tuple(v) for k, v in model.param_shapes().items()}
    offset = 16 + n
    params = {}
    for name, shape in header["params"]:
        if expected.get(name) != tuple(shape):
            raise ValueError(f"checkpoint parameter {name}{tuple(shape)} does not fit the model")
        count = int(np.prod(shape))
        params[name] = np.frombuffer(raw, "<f4", count, offset).reshape(shape).astype(np.float64)
        offset += 4 * count
    if set(params) != set(expected):
        raise ValueError("checkpoint is missing parameters")
    if offset != len(raw):
        raise ValueError("checkpoint has trailing bytes")
    model.params = params
    return model, header["meta"]


def history_csv(history: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=HISTORY_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in history:
        w.writerow({k: (repr(float(row[k])) if k != "epoch" else int(row[k])) for k in HISTORY_FIELDS})
    return buf.getvalue()


def save_history(history: list, path) -> None:
    _atomic_write(path, history_csv(history).encode())


def load_history(path) -> list:
    with open(path, newline="") as f:
        return [{"epoch": int(r["epoch"]), "train_loss": float(r["train_loss"]),
                 "val_loss": float(r["val_loss"])} for r in csv.DictReader(f)]
