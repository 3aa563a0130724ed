"""Parameter sweeps: one full generate/train/evaluate run per (value, seed).

CSV schema (see docs/FORMAT.md)::

    # config_json=<base config as compact JSON>
    axis,value,seed,metric,metric_value

Every grid point writes its rows to ``<out>.parts/<axis>=<value>,seed=<seed>.csv``
atomically, so an interrupted sweep can be resumed and the final CSV is
assembled in grid order regardless of worker completion order.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, RunConfig, from_dict, with_overrides
from .dataset_io import generate_dataset, train_test
from .nn.train import evaluate, train
from .pipeline import SensingPipeline

AXES = ("lambda", "cells_per_side", "fusion", "bandwidth", "n_subcarriers", "representation")
CSV_FIELDS = ("axis", "value", "seed", "metric", "metric_value")

_DATASETS: dict = {}


def axis_overrides(config: RunConfig, axis: str, value) -> dict:
    """Dotted-path overrides realising one sweep value.

    Bandwidth and subcarrier-count sweeps keep the subcarrier spacing fixed,
    so widening the band adds subcarriers rather than stretching them.
    """
    ch = config.channel
    spacing = ch.bandwidth_hz / ch.n_subcarriers
    if axis == "lambda":
        return {"estimator.lambda_reg": float(value)}
    if axis == "cells_per_side":
        return {"map.cells_per_side": int(value)}
    if axis == "fusion":
        return {"features.fusion": str(value)}
    if axis == "representation":
        return {"map.representation": str(value)}
    if axis == "bandwidth":
        w = int(round(float(value) / spacing))
        return {"channel.bandwidth_hz": float(value), "channel.n_subcarriers": w}
    if axis == "n_subcarriers":
        return {"channel.n_subcarriers": int(value), "channel.bandwidth_hz": int(value) * spacing}
    raise ConfigError(f"unknown sweep axis '{axis}'; choose from {', '.join(AXES)}")


def parse_axis_value(axis: str, text: str):
    if axis in ("fusion", "representation"):
        return text
    if axis in ("cells_per_side", "n_subcarriers"):
        return int(text)
    return float(text)


def point_config(config: RunConfig, axis: str, value, seed: int) -> RunConfig:
    ov = axis_overrides(config, axis, value)
    ov.update({"dataset.seed": int(seed), "train.seed": int(seed)})
    return with_overrides(config, ov)


def _dataset(cfg: RunConfig):
    key = (cfg.data_hash(), cfg.dataset.n_samples)
    if key not in _DATASETS:
        _DATASETS.clear()  # keep at most one dataset per worker
        _DATASETS[key] = generate_dataset(cfg)
    return _DATASETS[key]


def run_point(config: RunConfig, axis: str, value, seed: int) -> dict:
    """Generate, train and evaluate one grid point; returns the metric dict.

    Datasets are reused between consecutive points that only differ in
    training-side settings (estimator, features, network).
    """
    cfg = point_config(config, axis, value, seed)
    ds = _dataset(cfg)
    tr, te = train_test(ds)
    pipe = SensingPipeline(cfg, ds.h_ref)
    result = train(tr, cfg, pipe)
    metrics = evaluate(result.model, pipe, te, cfg.train.seed)
    metrics["best_epoch"] = result.best_epoch
    metrics["best_val_loss"] = result.best_val_loss
    return metrics


def _rows(axis, value, seed, metrics) -> list[dict]:
    return [{"axis": axis, "value": value, "seed": seed, "metric": k, "metric_value": metrics[k]}
            for k in sorted(metrics)]


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    for r in rows:
        w.writerow({**r, "metric_value": repr(float(r["metric_value"]))})
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _worker(args):
    cfg_dict, axis, value, seed, part = args
    metrics = run_point(from_dict(cfg_dict), axis, value, seed)
    text = _rows_csv(_rows(axis, value, seed, metrics))
    _atomic_write(Path(part), text)
    return part


def sweep(config: RunConfig, axis: str, values, seeds, out, jobs: int = 1) -> Path:
    """Run the full grid and write the assembled CSV to ``out``."""
    axis_overrides(config, axis, values[0] if values else 0)  # validates the axis name
    out = Path(out)
    parts_dir = out.with_name(out.name + ".parts")
    parts_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = config.to_dict()
    tasks, parts = [], []
    for value in values:
        for seed in seeds:
            part = parts_dir / f"{axis}={value},seed={seed}.csv"
            parts.append(part)
            if not part.exists():
                tasks.append((cfg_dict, axis, value, int(seed), str(part)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_worker, tasks))
    else:
        for t in tasks:
            _worker(t)
    header = "# config_json=" + json.dumps(cfg_dict, sort_keys=True, separators=(",", ":")) + "\n"
    body = ",".join(CSV_FIELDS) + "\n" + "".join(p.read_text() for p in parts)
    _atomic_write(out, header + body)
    return out


def read_sweep(path) -> tuple[dict, list[dict]]:
    """(config dict, rows) from a sweep CSV."""
    lines = Path(path).read_text().splitlines()
    cfg = {}
    if lines and lines[0].startswith("# config_json="):
        cfg = json.loads(lines[0][len("# config_json="):])
        lines = lines[1:]
    rows = []
    for r in csv.DictReader(lines):
        r["seed"] = int(r["seed"])
        r["metric_value"] = float(r["metric_value"])
        rows.append(r)
    return cfg, rows


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
