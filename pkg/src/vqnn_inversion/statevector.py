"""Dense statevector simulation for few-qubit circuits.

Basis ordering: qubit 0 is the most significant bit, so for ``q`` qubits the
amplitude index is ``sum(bit_k << (q - 1 - k))``.  ``|10>`` on two qubits is
index 2.

Two layers live here.  :class:`StateVector`, :func:`apply_gate` and
:func:`expect_z` form the value-level API.  The ``*_batch`` kernels below
operate on ``(rows, 2**q)`` arrays with one rotation angle per row; the model
and attack code evaluate thousands of circuits at once through them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 12

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("RX", "RY", "RZ", "H", "CNOT", "CRZ")
_CONTROLLED = ("CNOT", "CRZ")
_SQRT_HALF = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: int | None = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.kind in _CONTROLLED:
            if self.control is None:
                raise ConfigurationError(f"{self.kind} needs a control qubit")
            if self.control == self.target:
                raise ConfigurationError("control and target must differ")
        elif self.control is not None:
            raise ConfigurationError(f"{self.kind} takes no control qubit")

    def qubits(self):
        return (self.target,) if self.control is None else (self.control, self.target)


@dataclass(frozen=True, eq=False)
class StateVector:
    q: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_qubits(self.q)
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.q,):
            raise ConfigurationError(
                f"expected {1 << self.q} amplitudes for {self.q} qubits, got {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.amplitudes, other.amplitudes)


def _check_qubits(q):
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= MAX_QUBITS:
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {q!r}")


def _check_index(index, q):
    if not 0 <= index < q:
        raise ConfigurationError(f"qubit index {index} out of range for {q} qubits")


def zero_state(q):
    """Return ``|0...0>`` on ``q`` qubits."""
    _check_qubits(q)
    amps = np.zeros(1 << q, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(q, amps)


def apply_gate(state, gate):
    """Return ``U @ state`` for a single gate; the input state is untouched."""
    for index in gate.qubits():
        _check_index(index, state.q)
    amps = state.amplitudes.copy()[None, :]
    amps = apply_gate_batch(amps, gate.kind, gate.target, gate.control, gate.angle, state.q)
    return StateVector(state.q, amps[0])


def expect_z(state, qubit):
    """<Z> on ``qubit``: +1 weight for bit 0, -1 for bit 1."""
    _check_index(qubit, state.q)
    return float(expect_z_batch(state.amplitudes[None, :], qubit, state.q)[0])


# -- batched kernels ---------------------------------------------------------

@lru_cache(maxsize=None)
def z_signs(q, qubit):
    """Eigenvalues of Z_qubit along the computational basis, as +-1 floats."""
    bits = (np.arange(1 << q) >> (q - 1 - qubit)) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=None)
def _cnot_permutation(q, control, target):
    idx = np.arange(1 << q)
    cbit = (idx >> (q - 1 - control)) & 1
    perm = idx ^ (cbit << (q - 1 - target))
    perm.setflags(write=False)
    return perm


def _split(amps, target, q):
    rows = amps.shape[0]
    return amps.reshape(rows, 1 << target, 2, 1 << (q - 1 - target))


def apply_gate_batch(amps, kind, target, control, angles, q):
    """Apply one gate to every row of ``amps`` (shape ``(rows, 2**q)``).

    ``angles`` is a scalar or a length-``rows`` array.  Returns a new array
    for permutation gates and writes into ``amps`` for the others.
    """
    if kind == "CNOT":
        return amps[:, _cnot_permutation(q, control, target)]
    if kind in ("RZ", "CRZ"):
        half = np.asarray(angles, dtype=np.float64).reshape(-1, 1) * 0.5
        phase = np.exp(-1j * half * z_signs(q, target))
        if kind == "CRZ":
            on = z_signs(q, control) < 0
            phase = np.where(on, phase, 1.0)
        amps *= phase
        return amps
    view = _split(amps, target, q)
    s0 = view[:, :, 0, :].copy()
    s1 = view[:, :, 1, :]
    if kind == "H":
        view[:, :, 0, :] = (s0 + s1) * _SQRT_HALF
        view[:, :, 1, :] = (s0 - s1) * _SQRT_HALF
        return amps
    half = np.asarray(angles, dtype=np.float64).reshape(-1, 1, 1) * 0.5
    c = np.cos(half)
    s = np.sin(half)
    if kind == "RX":
        view[:, :, 0, :] = c * s0 - 1j * s * s1
        view[:, :, 1, :] = c * s1 - 1j * s * s0
    elif kind == "RY":
        view[:, :, 0, :] = c * s0 - s * s1
        view[:, :, 1, :] = s * s0 + c * s1
    else:
        raise ConfigurationError(f"unknown gate kind {kind!r}")
    return amps


def expect_z_batch(amps, qubit, q):
    probs = amps.real ** 2 + amps.imag ** 2
    return probs @ z_signs(q, qubit)


def zero_states(rows, q):
    amps = np.zeros((rows, 1 << q), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps
