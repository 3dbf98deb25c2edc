"""Small tanh multilayer perceptron with hand-written backpropagation.

It exposes the same surface as :class:`~vqnn_inversion.model.VqnnModel`
(``theta``, ``predict``, ``predict_with_gradient``, ``shared_gradients``), so
the trainer and the inversion engine work on it unchanged.  Parameters are
flattened layer by layer as ``W_1`` (row-major, shape ``(out, in)``), ``b_1``,
``W_2``, ``b_2``, ...
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .attack import AttackConfig, run_attack
from .errors import ConfigurationError, InputError
from .model import CLASSIFICATION, REGRESSION, TASKS


@dataclass(frozen=True, eq=False)
class MlpModel:
    layers: tuple
    theta: np.ndarray
    task: str = REGRESSION

    def __post_init__(self):
        layers = tuple(int(n) for n in self.layers)
        if len(layers) < 2 or min(layers) < 1:
            raise ConfigurationError(f"invalid layer sizes {self.layers!r}")
        if layers[-1] != 1:
            raise ConfigurationError("the output layer must have a single unit")
        if self.task not in TASKS:
            raise ConfigurationError(f"task must be one of {TASKS}")
        object.__setattr__(self, "layers", layers)
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if theta.size != self.num_params:
            raise ConfigurationError(f"{layers} needs {self.num_params} parameters, "
                                     f"got {theta.size}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def build(cls, layers, task=REGRESSION, seed=0, theta=None):
        """Xavier-uniform weights and zero biases unless ``theta`` is given."""
        layers = tuple(layers)
        if theta is None:
            rng = np.random.default_rng(seed)
            parts = []
            for fan_in, fan_out in zip(layers[:-1], layers[1:]):
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                parts.append(rng.uniform(-limit, limit, fan_in * fan_out))
                parts.append(np.zeros(fan_out))
            theta = np.concatenate(parts)
        return cls(layers, theta, task)

    @property
    def num_params(self):
        return sum(o * i + o for i, o in zip(self.layers[:-1], self.layers[1:]))

    @property
    def input_dim(self):
        return self.layers[0]

    def with_theta(self, theta):
        return replace(self, theta=theta)

    def fingerprint(self):
        h = hashlib.sha256(f"mlp|{self.layers}|".encode())
        h.update(np.asarray(self.theta, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def unpack(self):
        params, pos = [], 0
        for fan_in, fan_out in zip(self.layers[:-1], self.layers[1:]):
            w = self.theta[pos:pos + fan_in * fan_out].reshape(fan_out, fan_in)
            pos += fan_in * fan_out
            b = self.theta[pos:pos + fan_out]
            pos += fan_out
            params.append((w, b))
        return params

    def _inputs(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.input_dim:
            raise InputError(f"input has {x.shape[-1]} features, network expects "
                             f"{self.input_dim}")
        return x

    def _scale(self):
        return 1.0 if self.task == REGRESSION else 0.5

    def _out(self, raw):
        return raw if self.task == REGRESSION else 0.5 * (1.0 + raw)

    def predict(self, x):
        a = self._inputs(x)
        for w, b in self.unpack():
            a = np.tanh(a @ w.T + b)
        return self._out(a[:, 0])

    def predict_with_gradient(self, x):
        """Outputs ``(rows,)`` and d output / d theta ``(rows, M)`` by backprop."""
        a = self._inputs(x)
        params = self.unpack()
        acts = [a]
        for w, b in params:
            a = np.tanh(a @ w.T + b)
            acts.append(a)
        rows = a.shape[0]
        delta = (1.0 - acts[-1] ** 2) * self._scale()  # (rows, 1)
        pieces = []
        for layer in range(len(params) - 1, -1, -1):
            w, _ = params[layer]
            prev = acts[layer]
            pieces.append(delta)  # d/db
            pieces.append((delta[:, :, None] * prev[:, None, :]).reshape(rows, -1))  # d/dW
            if layer:
                delta = (delta @ w) * (1.0 - prev ** 2)
        grads = np.concatenate(pieces[::-1], axis=1)
        return self._out(acts[-1][:, 0]), grads

    def shared_gradients(self, xs, ys=None):
        xs = np.asarray(xs, dtype=np.float64)
        p, b, _ = xs.shape
        preds, grads = self.predict_with_gradient(xs.reshape(p * b, -1))
        grads = grads.reshape(p, b, -1)
        if ys is not None:
            residual = preds.reshape(p, b) - np.asarray(ys, dtype=np.float64)[None, :]
            grads = 2.0 * residual[:, :, None] * grads
        return grads.mean(axis=1)


def mlp_forward(model, x):
    return float(model.predict(np.asarray(x, dtype=np.float64))[0])


def mlp_loss_gradient(model, x, y):
    from .model import GradientVector

    if model.task == CLASSIFICATION and y not in (0, 1):
        raise InputError(f"classification targets must be 0 or 1, got {y!r}")
    pred, grad = model.predict_with_gradient(x)
    return GradientVector(2.0 * (pred[0] - y) * grad[0], 1, model.fingerprint())


def attack_nn(model, g, cfg, **kwargs):
    """Run the inversion engine with the filter disabled (window 1)."""
    cfg = replace(cfg, window=1) if isinstance(cfg, AttackConfig) else cfg
    return run_attack(model, g, cfg, **kwargs)
