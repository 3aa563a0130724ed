"""Training loop: features are rebuilt from stored records on every step.

Each step maps the stored bits to a resource grid, recomputes the ZF
precoder, draws fresh receiver noise, estimates the sensing CSI and
extracts the fused features before the CNN update. Only the validation set
uses frozen noise, so its loss is comparable across epochs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..dataset_io import Dataset
from ..eval_metrics import bce_test_loss, pr_break_even, prob_map_accuracy
from ..pipeline import PHASE_SCALE, PHASE_TEST, PHASE_TRAIN, PHASE_VAL, SensingPipeline
from ..scene_gen import STREAM_INIT, STREAM_SHUFFLE, STREAM_SPLIT, rng_for
from .model import Adam, CnnConfig, ResNet, activate, head_for, loss_and_grad

SCALE_SAMPLES = 512
EVAL_BATCH = 256


@dataclass
class TrainResult:
    model: ResNet
    history: list = field(default_factory=list)   # dicts: epoch, train_loss, val_loss
    best_epoch: int = 0

    @property
    def best_val_loss(self) -> float:
        return self.history[self.best_epoch - 1]["val_loss"] if self.history else float("nan")


def cnn_config_for(config: RunConfig, pipeline: SensingPipeline, input_scale: float = 1.0) -> CnnConfig:
    h, w, c = pipeline.input_shape()
    net = config.cnn
    return CnnConfig(
        in_channels=c, in_height=h, in_width=w, n_outputs=config.map.cells_per_side ** 2,
        head=head_for(config.map.representation).value, n_residual_blocks=net.n_residual_blocks,
        widths=net.widths, stem_width=net.stem_width, residual_gain=net.residual_gain,
        input_scale=input_scale)


def backward_and_step(model: ResNet, opt: Adam, x: np.ndarray, y: np.ndarray) -> float:
    """One Adam step on a batch; returns the batch loss before the update."""
    logits = model.logits(x)
    value, dlogits = loss_and_grad(logits, y, model.config.head)
    if not np.isfinite(value):
        raise FloatingPointError(
            f"non-finite loss {value} at optimizer step {opt.t + 1}: "
            f"max|logits|={np.nanmax(np.abs(logits)):.3g}, max|x|={np.nanmax(np.abs(x)):.3g}")
    opt.step(model.params, model.backward(dlogits))
    return value


def _batches(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def feature_scale(pipeline: SensingPipeline, dataset: Dataset, seed: int) -> float:
    """Reciprocal RMS of the CNN input over (up to) the first few hundred records."""
    n = min(len(dataset), SCALE_SAMPLES)
    if n == 0:
        return 1.0
    x = np.concatenate([pipeline.cnn_batch(dataset, np.arange(n)[sl], seed, PHASE_SCALE, 0)
                        for sl in _batches(n, EVAL_BATCH)])
    rms = float(np.sqrt(np.mean(x * x)))
    return 1.0 / rms if rms > 0 else 1.0


def predict(model: ResNet, pipeline: SensingPipeline, dataset: Dataset, seed: int,
            phase: int = PHASE_TEST, epoch: int = 0) -> np.ndarray:
    """Head outputs for every record, with noise keyed by (seed, phase, epoch)."""
    out = []
    for sl in _batches(len(dataset), EVAL_BATCH):
        x = pipeline.cnn_batch(dataset, np.arange(len(dataset))[sl], seed, phase, epoch)
        out.append(activate(model.logits(x), model.config.head))
    if not out:
        return np.zeros((0, model.config.n_outputs))
    return np.concatenate(out)


def evaluate(model: ResNet, pipeline: SensingPipeline, dataset: Dataset, seed: int) -> dict:
    """Test metrics for the configured map representation."""
    cfg = pipeline.config
    pred = predict(model, pipeline, dataset, seed, PHASE_TEST)
    labels = dataset.labels.astype(float)
    rep = cfg.map.representation
    out = {"n_test": len(dataset)}
    if rep == "probability":
        out["accuracy"] = prob_map_accuracy(pred, labels)
    elif rep == "hard":
        out["pr_break_even"] = pr_break_even(pred, labels, cfg.eval.pr_thresholds)
        out["bce"] = bce_test_loss(pred, labels)
    else:
        out["bce"] = bce_test_loss(pred, labels)
    return out


def _loss(model: ResNet, x: np.ndarray, y: np.ndarray) -> float:
    return loss_and_grad(model.logits(x), y, model.config.head)[0]


def train(dataset: Dataset, config: RunConfig, pipeline: SensingPipeline | None = None,
          progress=None) -> TrainResult:
    """Train a fresh CNN; returns the snapshot with the lowest validation loss.

    ``progress``, if given, is called with each epoch's history row.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    tc = config.train
    pipe = pipeline or SensingPipeline(config, dataset.h_ref)

    n_val = int(round(tc.val_fraction * len(dataset)))
    if n_val >= len(dataset):
        n_val = len(dataset) - 1
    perm = rng_for(tc.seed, STREAM_SPLIT, 1).permutation(len(dataset))
    fit, val = dataset.subset(np.sort(perm[n_val:])), dataset.subset(np.sort(perm[:n_val]))

    model = ResNet(cnn_config_for(config, pipe, feature_scale(pipe, fit, tc.seed)))
    model.init(rng_for(tc.seed, STREAM_INIT))
    opt = Adam(lr=tc.lr, beta1=tc.beta1, beta2=tc.beta2, eps=tc.eps)

    y_fit = fit.labels.astype(float)
    y_val = val.labels.astype(float)
    x_val = [pipe.cnn_batch(val, np.arange(len(val))[sl], tc.seed, PHASE_VAL, 0)
             for sl in _batches(len(val), EVAL_BATCH)]
    x_cache = None
    if tc.cache_features:
        x_cache = np.concatenate([pipe.cnn_batch(fit, np.arange(len(fit))[sl], tc.seed, PHASE_TRAIN, 0)
                                  for sl in _batches(len(fit), EVAL_BATCH)])

    result = TrainResult(model)
    best_params, best_val = None, np.inf
    for epoch in range(1, tc.epochs + 1):
        order = rng_for(tc.seed, STREAM_SHUFFLE, epoch).permutation(len(fit))
        total = 0.0
        for sl in _batches(len(fit), tc.batch_size):
            idx = order[sl]
            if x_cache is not None:
                x = x_cache[idx]
            else:
                x = pipe.cnn_batch(fit, idx, tc.seed, PHASE_TRAIN, epoch)
            total += backward_and_step(model, opt, x, y_fit[idx]) * len(idx)
        train_loss = total / len(fit)
        if len(val):
            val_loss = sum(_loss(model, x, y_val[sl]) * (sl.stop - sl.start)
                           for x, sl in zip(x_val, _batches(len(val), EVAL_BATCH))) / len(val)
        else:
            val_loss = train_loss
        row = {"epoch": epoch, "train_loss": float(train_loss), "val_loss": float(val_loss)}
        result.history.append(row)
        if progress is not None:
            progress(row)
        if val_loss < best_val:
            best_val, best_params = val_loss, copy.deepcopy(model.params)
            result.best_epoch = epoch
    if best_params is None:
        raise FloatingPointError("validation loss was never finite")
    model.params = best_params
    return result
