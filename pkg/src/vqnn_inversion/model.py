"""Variational quantum neural network: forward pass and parameter-shift gradients.

Every evaluation path is batched.  ``expectations(x, thetas)`` simulates each
input row against each weight vector, encoding the inputs once and reusing the
encoded states across weight vectors; the parameter-shift rule and the attack
both lean on that reuse.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import AnsatzSpec, FeatureMapSpec, resolve_angles, weight_slots
from .errors import ConfigurationError, InputError
from .statevector import apply_gate_batch, z_signs, zero_states

REGRESSION = "regression"
CLASSIFICATION = "classification"
TASKS = (REGRESSION, CLASSIFICATION)

SHIFT = np.pi / 2

# CLI family name -> (feature map, ansatz)
FAMILIES = {
    "simple": ("AngleRX", "Simple"),
    "simple-entangled": ("AngleRX", "SimpleEntangled"),
    "complex": ("AngleRX", "Complex"),
    "zzefficient": ("ZZFeatureMap", "EfficientSU2"),
}
READOUTS = ("mean", "parity")
GRADIENT_METHODS = ("shift", "adjoint")


def observable_diagonal(q, readout):
    """Diagonal of the measured observable in the computational basis.

    An integer selects Z on that qubit; ``"mean"`` averages Z over all qubits;
    ``"parity"`` is the tensor product Z...Z.
    """
    if isinstance(readout, str):
        if readout == "mean":
            return np.mean([z_signs(q, k) for k in range(q)], axis=0)
        if readout == "parity":
            return np.prod([z_signs(q, k) for k in range(q)], axis=0)
        raise ConfigurationError(f"readout must be a qubit index or one of {READOUTS}")
    if not 0 <= readout < q:
        raise ConfigurationError(f"readout qubit {readout} out of range for {q} qubits")
    return np.asarray(z_signs(q, int(readout)))


DEFAULT_REPS = {"simple": 1, "simple-entangled": 1, "complex": 2, "zzefficient": 1}


@dataclass(frozen=True)
class GradientVector:
    """A shared gradient: mean loss derivative over a batch, plus provenance."""

    values: np.ndarray
    batch_size: int = 1
    fingerprint: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def with_values(self, values):
        return replace(self, values=values)


@dataclass(frozen=True, eq=False)
class VqnnModel:
    feature_map: FeatureMapSpec
    ansatz: AnsatzSpec
    theta: np.ndarray
    task: str = REGRESSION
    readout: int | str = "mean"
    gradient_method: str = "shift"
    _fm_ops: tuple = field(init=False, repr=False)
    _ans_ops: tuple = field(init=False, repr=False)
    _observable: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.feature_map.q != self.ansatz.q:
            raise ConfigurationError("feature map and ansatz disagree on qubit count")
        if self.task not in TASKS:
            raise ConfigurationError(f"task must be one of {TASKS}, got {self.task!r}")
        object.__setattr__(self, "_observable", observable_diagonal(self.q, self.readout))
        if self.gradient_method not in GRADIENT_METHODS:
            raise ConfigurationError(f"gradient_method must be one of {GRADIENT_METHODS}")
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if theta.size != self.ansatz.num_params:
            raise ConfigurationError(
                f"{self.ansatz.kind} on {self.q} qubits needs {self.ansatz.num_params} "
                f"weights, got {theta.size}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "_fm_ops", self.feature_map.ops())
        ans_ops = self.ansatz.ops()
        weight_slots(ans_ops)
        object.__setattr__(self, "_ans_ops", ans_ops)

    @classmethod
    def build(cls, family, q, theta=None, reps=None, task=REGRESSION, readout="mean"):
        """Construct by CLI family name; ``theta=None`` means all ones."""
        if family not in FAMILIES:
            raise ConfigurationError(
                f"unknown VQNN family {family!r}; choose from {sorted(FAMILIES)}")
        fm_kind, ans_kind = FAMILIES[family]
        ansatz = AnsatzSpec(ans_kind, q, DEFAULT_REPS[family] if reps is None else reps)
        if theta is None:
            theta = np.ones(ansatz.num_params)
        return cls(FeatureMapSpec(fm_kind, q), ansatz, theta, task, readout)

    @property
    def q(self):
        return self.ansatz.q

    @property
    def num_params(self):
        return self.ansatz.num_params

    @property
    def input_dim(self):
        return self.q

    def canonical_inputs(self, x):
        """Map inputs onto a representative of their exact-symmetry class.

        RX encodings are 2*pi periodic up to a global phase, and with an
        RY-only ansatz the model also cannot tell ``x`` from ``-x``.  Such
        points give identical gradients, so reconstructions are compared
        after folding.  ZZ encodings have no such symmetry and pass through.
        """
        x = np.asarray(x, dtype=np.float64)
        if self.feature_map.kind != "AngleRX":
            return x
        x = np.mod(x, 2 * np.pi)
        if self.ansatz.kind in ("Simple", "SimpleEntangled"):
            x = np.where(x > np.pi, 2 * np.pi - x, x)
        return x

    def with_theta(self, theta):
        return replace(self, theta=theta)

    def fingerprint(self):
        h = hashlib.sha256()
        header = (f"{self.feature_map.kind}|{self.ansatz.kind}|{self.q}|"
                  f"{self.ansatz.reps}|{self.readout}|")
        h.update(header.encode())
        h.update(np.asarray(self.theta, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    # -- batched simulation ----------------------------------------------

    def _check_inputs(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.q:
            raise ConfigurationError(
                f"input has {x.shape[-1]} features but the model has {self.q} qubits")
        if not np.all(np.isfinite(x)):
            raise InputError("input contains non-finite values")
        return x

    def _encode(self, x):
        amps = zero_states(x.shape[0], self.q)
        for op in self._fm_ops:
            angle = resolve_angles(op, x, None)
            amps = apply_gate_batch(amps, op.kind, op.target, op.control, angle, self.q)
        return amps

    def expectations(self, x, thetas):
        """<Z_readout> for every (input row, weight vector) pair -> ``(rows, S)``."""
        x = self._check_inputs(x)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        rows, s = x.shape[0], thetas.shape[0]
        amps = np.repeat(self._encode(x), s, axis=0)
        th = np.tile(thetas, (rows, 1))
        for op in self._ans_ops:
            angle = resolve_angles(op, None, th)
            amps = apply_gate_batch(amps, op.kind, op.target, op.control, angle, self.q)
        probs = amps.real ** 2 + amps.imag ** 2
        return (probs @ self._observable).reshape(rows, s)

    def _to_output(self, z):
        return z if self.task == REGRESSION else 0.5 * (1.0 + z)

    @property
    def _output_scale(self):
        return 1.0 if self.task == REGRESSION else 0.5

    def predict(self, x):
        """Model output for each row of ``x`` (1-D input gives a length-1 array)."""
        return self._to_output(self.expectations(x, self.theta)[:, 0])

    def _shift_table(self):
        m = self.num_params
        eye = np.eye(m) * SHIFT
        return np.vstack([self.theta, self.theta + eye, self.theta - eye])

    def predict_with_gradient(self, x):
        """Outputs ``(rows,)`` and parameter-shift derivatives ``(rows, M)``."""
        m = self.num_params
        z = self.expectations(x, self._shift_table())
        grads = 0.5 * (z[:, 1:m + 1] - z[:, m + 1:]) * self._output_scale
        return self._to_output(z[:, 0]), grads

    def adjoint_gradient(self, x):
        """Same outputs as :meth:`predict_with_gradient`, by reverse-mode sweep.

        One forward pass plus one backward pass per row instead of ``2M + 1``
        circuit evaluations.  Agrees with the parameter-shift values to
        round-off because every weight sits in a single Pauli rotation.
        """
        x = self._check_inputs(x)
        rows, q = x.shape[0], self.q
        th = np.broadcast_to(self.theta, (rows, self.num_params))
        psi = self._encode(x)
        for op in self._ans_ops:
            psi = apply_gate_batch(psi, op.kind, op.target, op.control,
                                   resolve_angles(op, None, th), q)
        lam = psi * self._observable
        z = np.einsum("ij,ij->i", psi.conj(), lam).real
        grads = np.empty((rows, self.num_params))
        for op in reversed(self._ans_ops):
            if op.source == "weight":
                grads[:, op.index] = np.einsum(
                    "ij,ij->i", lam.conj(), apply_pauli(psi, op.kind, op.target, q)).imag
                angle = -th[:, op.index]
            else:
                angle = 0.0
            psi = apply_gate_batch(psi, op.kind, op.target, op.control, angle, q)
            lam = apply_gate_batch(lam, op.kind, op.target, op.control, angle, q)
        return self._to_output(z), grads * self._output_scale

    def shared_gradients(self, xs, ys=None):
        """Batch-mean gradients for stacked candidate batches.

        ``xs`` has shape ``(P, B, J)``.  With ``ys`` (length B) this is the mean
        loss gradient; without it, the mean prediction gradient (label-free
        sharing).  Returns ``(P, M)``.
        """
        xs = np.asarray(xs, dtype=np.float64)
        p, b, _ = xs.shape
        flat = xs.reshape(p * b, -1)
        if self.gradient_method == "adjoint":
            preds, grads = self.adjoint_gradient(flat)
        else:
            preds, grads = self.predict_with_gradient(flat)
        grads = grads.reshape(p, b, -1)
        if ys is not None:
            residual = preds.reshape(p, b) - np.asarray(ys, dtype=np.float64)[None, :]
            grads = 2.0 * residual[:, :, None] * grads
        return grads.mean(axis=1)


def apply_pauli(amps, rotation, target, q):
    """Return P|psi> for the Pauli generating ``rotation`` on ``target``."""
    if rotation == "RZ":
        return amps * z_signs(q, target)
    rows = amps.shape[0]
    view = amps.reshape(rows, 1 << target, 2, 1 << (q - 1 - target))
    out = np.empty_like(view)
    if rotation == "RX":
        out[:, :, 0, :] = view[:, :, 1, :]
        out[:, :, 1, :] = view[:, :, 0, :]
    elif rotation == "RY":
        out[:, :, 0, :] = -1j * view[:, :, 1, :]
        out[:, :, 1, :] = 1j * view[:, :, 0, :]
    else:
        raise ConfigurationError(f"no Pauli generator for {rotation!r}")
    return out.reshape(rows, -1)


def _check_target(model, y):
    if not np.isfinite(y):
        raise InputError(f"target {y!r} is not finite")
    if model.task == CLASSIFICATION and y not in (0, 1):
        raise InputError(f"classification targets must be 0 or 1, got {y!r}")


def forward(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError("forward takes a single input vector")
    return float(model.predict(x)[0])


def prediction_gradient(model, x):
    """Parameter-shift derivative of the model output w.r.t. each weight."""
    return model.predict_with_gradient(x)[1][0]


def loss_gradient(model, x, y):
    """Gradient of ``(y_hat - y)**2`` w.r.t. the weights for one row."""
    _check_target(model, y)
    pred, grad = model.predict_with_gradient(x)
    values = 2.0 * (pred[0] - y) * grad[0]
    return GradientVector(values, 1, model.fingerprint())


def batch_loss_gradient(model, batch):
    """Mean of per-row loss gradients over ``batch`` = [(x, y), ...]."""
    if len(batch) == 0:
        raise InputError("batch is empty")
    x = np.array([row[0] for row in batch], dtype=np.float64)
    y = np.array([row[1] for row in batch], dtype=np.float64)
    for target in y:
        _check_target(model, target)
    values = model.shared_gradients(x[None, :, :], y)[0]
    return GradientVector(values, len(batch), model.fingerprint())


def batch_prediction_gradient(model, x):
    """Label-free share: mean prediction gradient over the rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    values = model.shared_gradients(x[None, :, :])[0]
    return GradientVector(values, x.shape[0], model.fingerprint())
