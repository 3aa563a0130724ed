"""Layers with explicit forward/backward passes on channels-last batches.

Each layer owns named entries of a shared parameter dict and writes the
matching gradients into a shared gradient dict during ``backward``.
"""

from __future__ import annotations

import numpy as np

from .kernels import col2im, im2col


class Layer:
    def param_shapes(self) -> dict:
        return {}

    def init(self, params: dict, rng: np.random.Generator) -> None:
        pass

    def forward(self, params, x):
        raise NotImplementedError

    def backward(self, params, grads, dout):
        raise NotImplementedError


class Conv2d(Layer):
    """Stride-1 'same' convolution, kernel [k, k, c_in, c_out]."""

    def __init__(self, name, c_in, c_out, k=3, gain=np.sqrt(2.0)):
        self.name, self.c_in, self.c_out, self.k, self.gain = name, c_in, c_out, k, gain

    def param_shapes(self):
        return {f"{self.name}.w": (self.k, self.k, self.c_in, self.c_out),
                f"{self.name}.b": (self.c_out,)}

    def init(self, params, rng):
        fan_in = self.k * self.k * self.c_in
        params[f"{self.name}.w"] = rng.standard_normal(
            (self.k, self.k, self.c_in, self.c_out)) * (self.gain / np.sqrt(fan_in))
        params[f"{self.name}.b"] = np.zeros(self.c_out)

    def forward(self, params, x):
        cols = im2col(x, self.k)
        wmat = params[f"{self.name}.w"].reshape(-1, self.c_out)
        out = cols @ wmat + params[f"{self.name}.b"]
        self._cache = (x.shape, cols)
        return out.reshape(x.shape[:-1] + (self.c_out,))

    def backward(self, params, grads, dout):
        shape, cols = self._cache
        d2 = dout.reshape(-1, self.c_out)
        wmat = params[f"{self.name}.w"].reshape(-1, self.c_out)
        grads[f"{self.name}.w"] = (cols.T @ d2).reshape(self.k, self.k, self.c_in, self.c_out)
        grads[f"{self.name}.b"] = d2.sum(axis=0)
        return col2im(d2 @ wmat.T, shape, self.k)


class ReLU(Layer):
    def forward(self, params, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, params, grads, dout):
        return dout * self._mask


class MaxPool2(Layer):
    """2 x 2 max pooling, stride 2; an odd trailing row/column is dropped."""

    def forward(self, params, x):
        n, h, w, c = x.shape
        h2, w2 = h // 2, w // 2
        if h2 == 0 or w2 == 0:
            raise ValueError(f"input {h}x{w} too small for 2x2 pooling")
        xc = x[:, : 2 * h2, : 2 * w2, :].reshape(n, h2, 2, w2, 2, c)
        win = xc.transpose(0, 1, 3, 5, 2, 4).reshape(n, h2, w2, c, 4)
        arg = np.argmax(win, axis=-1)
        self._cache = (x.shape, arg)
        return np.take_along_axis(win, arg[..., None], -1)[..., 0]

    def backward(self, params, grads, dout):
        shape, arg = self._cache
        n, h, w, c = shape
        h2, w2 = h // 2, w // 2
        win = np.zeros((n, h2, w2, c, 4))
        np.put_along_axis(win, arg[..., None], dout[..., None], -1)
        dx = np.zeros(shape)
        dx[:, : 2 * h2, : 2 * w2, :] = (
            win.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * h2, 2 * w2, c))
        return dx


class GlobalAvgPool(Layer):
    def forward(self, params, x):
        self._shape = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, params, grads, dout):
        n, h, w, c = self._shape
        return np.broadcast_to(dout[:, None, None, :] / (h * w), self._shape).copy()


class Linear(Layer):
    def __init__(self, name, n_in, n_out):
        self.name, self.n_in, self.n_out = name, n_in, n_out

    def param_shapes(self):
        return {f"{self.name}.w": (self.n_in, self.n_out), f"{self.name}.b": (self.n_out,)}

    def init(self, params, rng):
        params[f"{self.name}.w"] = rng.standard_normal((self.n_in, self.n_out)) / np.sqrt(self.n_in)
        params[f"{self.name}.b"] = np.zeros(self.n_out)

    def forward(self, params, x):
        self._x = x
        return x @ params[f"{self.name}.w"] + params[f"{self.name}.b"]

    def backward(self, params, grads, dout):
        grads[f"{self.name}.w"] = self._x.T @ dout
        grads[f"{self.name}.b"] = dout.sum(axis=0)
        return dout @ params[f"{self.name}.w"].T


class ResidualBlock(Layer):
    """conv3-relu-conv3 plus identity (or 1x1 projection) shortcut, then relu.

    The second convolution starts small so that a deep stack begins close to
    the identity map, which keeps training stable without normalization layers.
    """

    def __init__(self, name, c_in, c_out, residual_gain=0.1):
        self.name = name
        self.conv1 = Conv2d(f"{name}.conv1", c_in, c_out, 3)
        self.relu1 = ReLU()
        self.conv2 = Conv2d(f"{name}.conv2", c_out, c_out, 3, gain=np.sqrt(2.0) * residual_gain)
        self.proj = Conv2d(f"{name}.proj", c_in, c_out, 1, gain=1.0) if c_in != c_out else None
        self.relu_out = ReLU()

    def _parts(self):
        return [l for l in (self.conv1, self.conv2, self.proj) if l is not None]

    def param_shapes(self):
        out = {}
        for l in self._parts():
            out.update(l.param_shapes())
        return out

    def init(self, params, rng):
        for l in self._parts():
            l.init(params, rng)

    def forward(self, params, x):
        y = self.conv2.forward(params, self.relu1.forward(params, self.conv1.forward(params, x)))
        skip = self.proj.forward(params, x) if self.proj is not None else x
        return self.relu_out.forward(params, y + skip)

    def backward(self, params, grads, dout):
        d = self.relu_out.backward(params, grads, dout)
        dx = self.conv1.backward(params, grads, self.relu1.backward(
            params, grads, self.conv2.backward(params, grads, d)))
        if self.proj is not None:
            return dx + self.proj.backward(params, grads, d)
        return dx + d
