"""Feature maps and ansatz families as symbolic gate lists.

A circuit is a tuple of :class:`Op`.  Each op names a gate and where its
angle comes from: a fixed value, an input feature, the ZZ product of two
adjacent features, or a trainable weight.  Angles are resolved per row by
:func:`resolve_angles`, so one op list drives a whole batch of simulations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .statevector import MAX_QUBITS

FEATURE_MAPS = ("AngleRX", "ZZFeatureMap")
ANSATZE = ("Simple", "SimpleEntangled", "Complex", "EfficientSU2")


@dataclass(frozen=True)
class Op:
    kind: str
    target: int
    control: int | None = None
    source: str = "fixed"  # fixed | input | zz | weight
    index: int = 0
    index2: int = 0
    scale: float = 1.0
    value: float = 0.0


def resolve_angles(op, x, theta):
    """Angle for every row; ``x`` is ``(rows, J)``, ``theta`` is ``(rows, M)``."""
    if op.source == "fixed":
        return op.value
    if op.source == "input":
        return op.scale * x[:, op.index]
    if op.source == "zz":
        return 2.0 * (np.pi - x[:, op.index]) * (np.pi - x[:, op.index2])
    if op.source == "weight":
        return theta[:, op.index]
    raise ConfigurationError(f"unknown angle source {op.source!r}")


@dataclass(frozen=True)
class FeatureMapSpec:
    kind: str
    q: int

    def __post_init__(self):
        if self.kind not in FEATURE_MAPS:
            raise ConfigurationError(
                f"unknown feature map {self.kind!r}; choose from {FEATURE_MAPS}")
        if not 1 <= self.q <= MAX_QUBITS:
            raise ConfigurationError(f"qubit count {self.q} out of range")

    def ops(self):
        q = self.q
        if self.kind == "AngleRX":
            return tuple(Op("RX", j, source="input", index=j) for j in range(q))
        ops = [Op("H", j) for j in range(q)]
        ops += [Op("RZ", j, source="input", index=j, scale=2.0) for j in range(q)]
        for j in range(q - 1):
            ops += [
                Op("CNOT", j + 1, control=j),
                Op("RZ", j + 1, source="zz", index=j, index2=j + 1),
                Op("CNOT", j + 1, control=j),
            ]
        return tuple(ops)


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str
    q: int
    reps: int = 1

    def __post_init__(self):
        if self.kind not in ANSATZE:
            raise ConfigurationError(
                f"unknown ansatz {self.kind!r}; choose from {ANSATZE}")
        if not 1 <= self.q <= MAX_QUBITS:
            raise ConfigurationError(f"qubit count {self.q} out of range")
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1")

    @property
    def num_params(self):
        q = self.q
        return {
            "Simple": q,
            "SimpleEntangled": 2 * q,
            "Complex": 2 * q * self.reps,
            "EfficientSU2": 2 * q * (self.reps + 1),
        }[self.kind]

    def ops(self):
        q = self.q
        ops = []
        counter = iter(range(self.num_params))

        def rot_layer(kind):
            for j in range(q):
                ops.append(Op(kind, j, source="weight", index=next(counter)))

        def chain():
            for j in range(q - 1):
                ops.append(Op("CNOT", j + 1, control=j))

        if self.kind == "Simple":
            rot_layer("RY")
        elif self.kind == "SimpleEntangled":
            rot_layer("RY")
            if q > 1:
                for j in range(q):
                    ops.append(Op("CNOT", (j + 1) % q, control=j))
            rot_layer("RY")
        else:
            for _ in range(self.reps):
                rot_layer("RY")
                rot_layer("RZ")
                chain()
            if self.kind == "EfficientSU2":
                rot_layer("RY")
                rot_layer("RZ")
        return tuple(ops)


def weight_slots(ops):
    """Map each weight index to the position of the single op that uses it."""
    slots = {}
    for pos, op in enumerate(ops):
        if op.source == "weight":
            if op.index in slots:
                raise ConfigurationError(f"weight {op.index} used by more than one gate")
            slots[op.index] = pos
    return slots
