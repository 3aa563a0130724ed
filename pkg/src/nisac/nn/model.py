"""Compact residual CNN with softmax or sigmoid head."""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict, field

import numpy as np

from .layers import Conv2d, GlobalAvgPool, Linear, MaxPool2, ReLU, ResidualBlock

PROB_CLAMP = 1e-7


class Head(str, enum.Enum):
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"


def head_for(representation: str) -> Head:
    return Head.SOFTMAX if representation == "probability" else Head.SIGMOID


@dataclass
class CnnConfig:
    in_channels: int = 8
    in_height: int = 8
    in_width: int = 128
    n_outputs: int = 25
    head: str = "softmax"
    n_residual_blocks: int = 4
    widths: tuple = (16, 16, 32, 32)
    stem_width: int = 16
    kernel: int = 3
    residual_gain: float = 0.1
    input_scale: float = 1.0

    def __post_init__(self):
        self.head = Head(self.head).value
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.widths) != self.n_residual_blocks:
            if len(self.widths) == 0:
                raise ValueError("widths must not be empty")
            # repeat the last width to reach the requested depth
            self.widths = (self.widths + (self.widths[-1],) * self.n_residual_blocks)[
                : self.n_residual_blocks]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d


class ResNet:
    """stem conv -> relu -> maxpool -> residual blocks -> avgpool -> fc -> head."""

    def __init__(self, config: CnnConfig):
        self.config = config
        c = config.stem_width
        self.layers = [Conv2d("stem", config.in_channels, c, config.kernel), ReLU(), MaxPool2()]
        for i, w in enumerate(config.widths):
            self.layers.append(ResidualBlock(f"block{i}", c, w, config.residual_gain))
            c = w
        self.layers += [GlobalAvgPool(), Linear("fc", c, config.n_outputs)]
        self.params: dict[str, np.ndarray] = {}

    def param_shapes(self) -> dict:
        out = {}
        for l in self.layers:
            out.update(l.param_shapes())
        return out

    def init(self, rng: np.random.Generator) -> "ResNet":
        self.params = {}
        for l in self.layers:
            l.init(self.params, rng)
        return self

    def logits(self, x: np.ndarray) -> np.ndarray:
        cfg = self.config
        if x.ndim != 4 or x.shape[1:] != (cfg.in_height, cfg.in_width, cfg.in_channels):
            raise ValueError(
                f"expected input [B, {cfg.in_height}, {cfg.in_width}, {cfg.in_channels}], got {x.shape}")
        h = x * cfg.input_scale
        for l in self.layers:
            h = l.forward(self.params, h)
        return h

    def backward(self, dlogits: np.ndarray) -> dict:
        grads: dict[str, np.ndarray] = {}
        d = dlogits
        for l in reversed(self.layers):
            d = l.backward(self.params, grads, d)
        return grads

    def forward(self, x: np.ndarray) -> np.ndarray:
        return activate(self.logits(x), self.config.head)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(z: np.ndarray, head) -> np.ndarray:
    return softmax(z) if Head(head) is Head.SOFTMAX else sigmoid(z)


def cce(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Per-sample categorical cross-entropy with clamped probabilities."""
    return -np.sum(label * np.log(np.clip(pred, PROB_CLAMP, 1.0)), axis=-1)


def bce(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Per-sample binary cross-entropy averaged over cells."""
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -np.mean(label * np.log(p) + (1.0 - label) * np.log(1.0 - p), axis=-1)


def loss(pred: np.ndarray, label: np.ndarray, representation: str, head=None) -> float:
    """Batch-mean loss: CCE for probability maps, BCE for hard and soft maps."""
    pred, label = np.asarray(pred, float), np.asarray(label, float)
    if pred.shape != label.shape:
        raise ValueError(f"prediction {pred.shape} and label {label.shape} differ")
    expected = head_for(representation)
    if head is not None and Head(head) is not expected:
        raise ValueError(f"{representation} maps need a {expected.value} head, got {head}")
    fn = cce if expected is Head.SOFTMAX else bce
    return float(np.mean(fn(pred, label)))


def loss_and_grad(logits: np.ndarray, label: np.ndarray, head) -> tuple[float, np.ndarray]:
    """Batch-mean loss and its gradient with respect to the logits.

    The gradient is that of the unclamped loss; the clamp only matters for
    probabilities below 1e-7.
    """
    b = logits.shape[0]
    pred = activate(logits, head)
    if Head(head) is Head.SOFTMAX:
        value = float(np.mean(cce(pred, label)))
        # label rows need not sum to one in general
        grad = (pred * label.sum(axis=-1, keepdims=True) - label) / b
    else:
        value = float(np.mean(bce(pred, label)))
        grad = (pred - label) / (b * logits.shape[-1])
    return value, grad


@dataclass
class Adam:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in sorted(grads):
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.lr != 0.0:
                params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
