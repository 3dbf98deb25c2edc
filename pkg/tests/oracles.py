"""Independent dense-matrix reference simulator used only by the tests."""
import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def rot(pauli, angle):
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * pauli


def embed(op, target, q):
    """Kronecker product with qubit 0 as the most significant factor."""
    mats = [op if k == target else I2 for k in range(q)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def controlled(op, control, target, q):
    return embed(P0, control, q) + _two(P1, control, op, target, q)


def _two(a, ia, b, ib, q):
    mats = [a if k == ia else b if k == ib else I2 for k in range(q)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def gate_matrix(kind, target, control, angle, q):
    if kind == "H":
        return embed(H, target, q)
    if kind in ("RX", "RY", "RZ"):
        return embed(rot({"RX": X, "RY": Y, "RZ": Z}[kind], angle), target, q)
    if kind == "CNOT":
        return controlled(X, control, target, q)
    if kind == "CRZ":
        return controlled(rot(Z, angle), control, target, q)
    raise ValueError(kind)


def z_observable(qubit, q):
    return embed(Z, qubit, q)


def circuit_state(ops, x, theta, q):
    """Run a list of circuits.Op through dense matrices."""
    psi = np.zeros(2 ** q, dtype=complex)
    psi[0] = 1
    for op in ops:
        if op.source == "fixed":
            angle = op.value
        elif op.source == "input":
            angle = op.scale * x[op.index]
        elif op.source == "zz":
            angle = 2 * (np.pi - x[op.index]) * (np.pi - x[op.index2])
        else:
            angle = theta[op.index]
        psi = gate_matrix(op.kind, op.target, op.control, angle, q) @ psi
    return psi


def model_expectation(model, x, theta=None):
    theta = model.theta if theta is None else theta
    ops = list(model.feature_map.ops()) + list(model.ansatz.ops())
    psi = circuit_state(ops, x, theta, model.q)
    obs = np.diag(model._observable)
    return float(np.real(psi.conj() @ obs @ psi))


def central_difference(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out
