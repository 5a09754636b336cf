"""Layer set for the spectrogram and pose networks.

Covers exactly what the two model stacks need: 1-D convolution over the
Doppler axis, batch normalization, ReLU/Tanh, (bi)LSTM and fully-connected
layers. Parameters are initialized with uniform fan-in scaling from a
caller-supplied numpy Generator so models are reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _uniform(rng, fan_in, shape, dtype):
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


# -- layer specs (checkpoint manifest entries) -------------------------------

@dataclass
class Conv1dSpec:
    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    kind: str = "conv1d"


@dataclass
class LinearSpec:
    in_features: int
    out_features: int
    bias: bool = True
    kind: str = "linear"


@dataclass
class BatchNormSpec:
    features: int
    kind: str = "batchnorm"


@dataclass
class ActivationSpec:
    fn: str  # "relu" | "tanh"
    kind: str = "activation"


@dataclass
class LSTMSpec:
    input_size: int
    hidden_size: int
    num_layers: int = 1
    bidirectional: bool = False
    kind: str = "lstm"


_SPEC_TYPES = {
    "conv1d": Conv1dSpec,
    "linear": LinearSpec,
    "batchnorm": BatchNormSpec,
    "activation": ActivationSpec,
    "lstm": LSTMSpec,
}


def spec_to_dict(spec) -> dict:
    return asdict(spec)


def spec_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in _SPEC_TYPES:
        raise ValueError(f"unknown layer spec kind {kind!r}")
    return _SPEC_TYPES[kind](**d)


# -- layers -------------------------------------------------------------------

class Linear:
    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 *, rng=None, dtype=np.float32):
        if in_features < 1 or out_features < 1:
            raise ValueError("Linear dimensions must be positive")
        rng = rng or np.random.default_rng()
        self.weight = _uniform(rng, in_features, (in_features, out_features), dtype)
        self.bias = _uniform(rng, in_features, (out_features,), dtype) if bias else None

    def spec(self):
        return LinearSpec(self.weight.shape[0], self.weight.shape[1],
                          bias=self.bias is not None)

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        out = T.matmul(x, self.weight)
        if self.bias is not None:
            out = T.add(out, self.bias)
        return out


class Conv1d:
    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 stride: int = 1, padding: int = 0, *, rng=None, dtype=np.float32):
        if min(in_channels, out_channels, kernel, stride) < 1 or padding < 0:
            raise ValueError("Conv1d dimensions must be positive")
        rng = rng or np.random.default_rng()
        fan_in = in_channels * kernel
        self.weight = _uniform(rng, fan_in, (out_channels, in_channels, kernel), dtype)
        self.bias = _uniform(rng, fan_in, (out_channels,), dtype)
        self.stride = stride
        self.padding = padding

    def spec(self):
        c_out, c_in, k = self.weight.shape
        return Conv1dSpec(c_in, c_out, k, self.stride, self.padding)

    def params(self):
        return [self.weight, self.bias]

    def out_width(self, in_width: int) -> int:
        k = self.weight.shape[2]
        return (in_width + 2 * self.padding - k) // self.stride + 1

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return T.conv1d(x, self.weight, self.bias, stride=self.stride,
                        padding=self.padding)


class BatchNorm1d:
    """Feature-wise normalization: batch statistics in training, running in inference.

    Accepts (N, F) or channel-first (B, C, W) input; for the latter the
    statistics pool over batch and width per channel.
    """

    def __init__(self, features: int, *, momentum: float = 0.1, eps: float = 1e-5,
                 dtype=np.float32):
        if features < 1:
            raise ValueError("BatchNorm features must be positive")
        self.gamma = Tensor(np.ones(features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(features, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(features, dtype=dtype)
        self.running_var = np.ones(features, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def spec(self):
        return BatchNormSpec(self.gamma.shape[0])

    def params(self):
        return [self.gamma, self.beta]

    def state_arrays(self):
        return [self.running_mean, self.running_var]

    def _norm_2d(self, x: Tensor, training: bool) -> Tensor:
        if training:
            mean = T.tmean(x, axis=0)
            centered = T.add(x, T.mul(mean, -1.0))
            var = T.tmean(T.mul(centered, centered), axis=0)
            m = self.momentum
            self.running_mean = ((1 - m) * self.running_mean
                                 + m * mean.data.astype(self.running_mean.dtype))
            self.running_var = ((1 - m) * self.running_var
                                + m * var.data.astype(self.running_var.dtype))
            inv = T.div(1.0, T.sqrt(T.add(var, self.eps)))
            xhat = T.mul(centered, inv)
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = T.mul(T.add(x, -self.running_mean.astype(x.data.dtype)),
                         inv.astype(x.data.dtype))
        return T.add(T.mul(xhat, self.gamma), self.beta)

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        if x.data.ndim == 2:
            return self._norm_2d(x, training)
        if x.data.ndim == 3:
            b, c, w = x.data.shape
            flat = T.reshape(T.transpose(x, (0, 2, 1)), (b * w, c))
            out = self._norm_2d(flat, training)
            return T.transpose(T.reshape(out, (b, w, c)), (0, 2, 1))
        raise ValueError(f"BatchNorm1d expects 2-D or 3-D input, got {x.data.shape}")


class ReLU:
    def spec(self):
        return ActivationSpec("relu")

    def params(self):
        return []

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return T.relu(x)


class Tanh:
    def spec(self):
        return ActivationSpec("tanh")

    def params(self):
        return []

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return T.tanh(x)


class LSTM:
    """Standard LSTM over (B, T, F); bidirectional stacks concatenate outputs."""

    def __init__(self, input_size: int, hidden_size: int, num_layers: int = 1,
                 bidirectional: bool = False, *, rng=None, dtype=np.float32):
        if min(input_size, hidden_size, num_layers) < 1:
            raise ValueError("LSTM dimensions must be positive")
        rng = rng or np.random.default_rng()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.bidirectional = bidirectional
        self.dirs = 2 if bidirectional else 1
        self.weights = []  # per (layer, direction): dict of W_ih, W_hh, b
        for layer in range(num_layers):
            in_f = input_size if layer == 0 else hidden_size * self.dirs
            for _ in range(self.dirs):
                self.weights.append({
                    "W_ih": _uniform(rng, in_f, (in_f, 4 * hidden_size), dtype),
                    "W_hh": _uniform(rng, hidden_size, (hidden_size, 4 * hidden_size), dtype),
                    "b": _uniform(rng, hidden_size, (4 * hidden_size,), dtype),
                })

    def spec(self):
        return LSTMSpec(self.input_size, self.hidden_size, self.num_layers,
                        self.bidirectional)

    def params(self):
        out = []
        for w in self.weights:
            out.extend([w["W_ih"], w["W_hh"], w["b"]])
        return out

    def _run_direction(self, x: Tensor, w, reverse: bool) -> list:
        bsz, t_len, in_f = x.data.shape
        h_dim = self.hidden_size
        dtype = x.data.dtype
        pre = T.reshape(T.matmul(T.reshape(x, (bsz * t_len, in_f)), w["W_ih"]),
                        (bsz, t_len, 4 * h_dim))
        pre = T.add(pre, w["b"])
        h = Tensor(np.zeros((bsz, h_dim), dtype=dtype))
        c = Tensor(np.zeros((bsz, h_dim), dtype=dtype))
        order = range(t_len - 1, -1, -1) if reverse else range(t_len)
        outputs = [None] * t_len
        for t in order:
            z = T.add(pre[:, t, :], T.matmul(h, w["W_hh"]))
            i = T.sigmoid(z[:, 0:h_dim])
            f = T.sigmoid(z[:, h_dim:2 * h_dim])
            g = T.tanh(z[:, 2 * h_dim:3 * h_dim])
            o = T.sigmoid(z[:, 3 * h_dim:4 * h_dim])
            c = T.add(T.mul(f, c), T.mul(i, g))
            h = T.mul(o, T.tanh(c))
            outputs[t] = h
        return outputs

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        if x.data.ndim != 3:
            raise ValueError(f"LSTM expects (B, T, F) input, got {x.data.shape}")
        if x.data.shape[2] != self.input_size:
            raise ValueError(
                f"LSTM built for {self.input_size} input features, got {x.data.shape[2]}")
        out = x
        for layer in range(self.num_layers):
            fwd = self._run_direction(out, self.weights[layer * self.dirs], reverse=False)
            if self.bidirectional:
                bwd = self._run_direction(out, self.weights[layer * self.dirs + 1],
                                          reverse=True)
                steps = [T.concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
            else:
                steps = fwd
            out = T.stack_time(steps)
        return out


def build_layer(spec, *, rng=None, dtype=np.float32):
    """Construct a fresh layer from its spec (used when loading checkpoints)."""
    if isinstance(spec, Conv1dSpec):
        return Conv1d(spec.in_channels, spec.out_channels, spec.kernel, spec.stride,
                      spec.padding, rng=rng, dtype=dtype)
    if isinstance(spec, LinearSpec):
        return Linear(spec.in_features, spec.out_features, spec.bias, rng=rng, dtype=dtype)
    if isinstance(spec, BatchNormSpec):
        return BatchNorm1d(spec.features, dtype=dtype)
    if isinstance(spec, ActivationSpec):
        return ReLU() if spec.fn == "relu" else Tanh()
    if isinstance(spec, LSTMSpec):
        return LSTM(spec.input_size, spec.hidden_size, spec.num_layers,
                    spec.bidirectional, rng=rng, dtype=dtype)
    raise ValueError(f"cannot build layer from {spec!r}")
