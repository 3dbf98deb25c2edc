"""Numerical gradient inversion with an adaptive low-pass filter.

The attacker holds a proxy copy of the victim model and a shared gradient
``g``.  It searches for inputs ``x'`` whose proxy gradient matches ``g`` by
descending the gradient-matching cost, estimating ``d cost / d x'_j`` with
central differences averaged over radii ``h, 2h, ..., Nh``.  The average acts
as a moving-average low-pass filter over the oscillating cost landscape.  The
window ``N`` is halved whenever the mean sampled cost stops falling, and each
coordinate update can be smoothed by a scalar Kalman filter.

The proxy model only needs ``shared_gradients(xs, ys)`` mapping a
``(P, B, J)`` stack of candidate batches to ``(P, M)`` gradients, so the same
engine attacks both the quantum model and the classical baseline.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ExperimentRuntimeError, InputError, ModelMismatchError
from .errors import NumericalStateError

DOMAIN = (0.0, np.pi)


@dataclass(frozen=True)
class AttackConfig:
    window: int = 64
    step: float = 0.05
    lr: float = 0.1
    max_iter: int = 250
    halt_ratio: float = 0.99
    use_kalman: bool = True
    success_tol: float = 0.005
    grad_tol: float = 1e-12
    seed: int = 0
    shrink_step: bool = True
    min_step: float = 1e-5
    clip: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")
        if not self.step > 0:
            raise ConfigurationError("step must be > 0")
        if not self.lr > 0:
            raise ConfigurationError("lr must be > 0")
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if not self.halt_ratio > 0:
            raise ConfigurationError("halt_ratio must be > 0")


@dataclass
class KalmanScalarState:
    """One scalar Kalman filter; all coefficients start at 1, the state at 0."""

    F: float = 1.0
    H: float = 1.0
    Q: float = 1.0
    R: float = 1.0
    P: float = 1.0
    x: float = 0.0


def kalman_step(state, measurement):
    """Predict, then correct with ``measurement``.  Returns (new state, estimate)."""
    x_pred = state.F * state.x
    p_pred = state.F * state.P * state.F + state.Q
    innovation = measurement - state.H * x_pred
    s = state.H * p_pred * state.H + state.R
    if not s > 0:
        raise NumericalStateError(f"innovation covariance {s} is not positive")
    gain = p_pred * state.H / s
    fused = x_pred + gain * innovation
    new = KalmanScalarState(state.F, state.H, state.Q, state.R,
                            (1 - gain * state.H) * p_pred, fused)
    return new, fused


def gradient_cost(g_prime, g):
    """Mean squared difference between two gradient vectors."""
    a = np.asarray(getattr(g_prime, "values", g_prime), dtype=np.float64)
    b = np.asarray(getattr(g, "values", g), dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ModelMismatchError(
            f"gradient lengths differ ({a.shape[-1]} vs {b.shape[-1]}); "
            "attacker and victim models do not match")
    return np.mean((a - b) ** 2, axis=-1)


class CostFunction:
    """Gradient-matching cost over flattened candidate inputs.

    Calling it with ``(P, B*J)`` candidates returns ``(P,)`` costs.
    """

    def __init__(self, model, g, batch_size=1, labels=None):
        self.model = model
        self.target = np.asarray(getattr(g, "values", g), dtype=np.float64)
        if self.target.size != model.num_params:
            raise ModelMismatchError(
                f"shared gradient has {self.target.size} entries, proxy model has "
                f"{model.num_params} weights")
        expected = getattr(g, "fingerprint", "")
        fingerprint = getattr(model, "fingerprint", None)
        if expected and fingerprint is not None and expected != fingerprint():
            raise ModelMismatchError("shared gradient fingerprint does not match proxy model")
        self.batch_size = batch_size
        self.dim = model.input_dim
        self.labels = None if labels is None else np.asarray(labels, dtype=np.float64)
        if self.labels is not None and self.labels.size != batch_size:
            raise InputError("labels must have one entry per guessed row")
        self.evaluations = 0

    def __call__(self, flat):
        flat = np.atleast_2d(flat)
        xs = flat.reshape(flat.shape[0], self.batch_size, self.dim)
        grads = self.model.shared_gradients(xs, self.labels)
        self.evaluations += flat.shape[0]
        return gradient_cost(grads, self.target)


def fd_offsets(window, step):
    n = np.arange(1, window + 1, dtype=np.float64)
    return n, n * step


def filtered_fd_gradient(cost, x, j, window, step):
    """Moving average of central differences at radii ``step * (1..window)``.

    Returns ``(derivative estimate, mean of the 2*window sampled costs)``.
    """
    if window < 1:
        raise ConfigurationError("window must be >= 1")
    if not step > 0:
        raise ConfigurationError("step must be > 0")
    x = np.asarray(x, dtype=np.float64)
    n, radii = fd_offsets(window, step)
    probes = np.repeat(x[None, :], 2 * window, axis=0)
    probes[:window, j] += radii
    probes[window:, j] -= radii
    losses = np.asarray(cost(probes), dtype=np.float64)
    plus, minus = losses[:window], losses[window:]
    estimate = np.mean((plus - minus) / (2.0 * n * step))
    return float(estimate), float(np.mean(losses))


@dataclass
class AttackTrace:
    loss: list = field(default_factory=list)
    mse: list = field(default_factory=list)
    window: list = field(default_factory=list)
    step: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def record(self, loss, mse, window, step, wall_ms, x):
        self.loss.append(float(loss))
        self.mse.append(None if mse is None else float(mse))
        self.window.append(int(window))
        self.step.append(float(step))
        self.wall_ms.append(float(wall_ms))
        self.snapshots.append(np.array(x, copy=True))

    def rows(self, trial=0):
        """CSV rows ``(trial, k, loss_gg, mse_x, window_N, wall_ms)``."""
        for k, (loss, mse, window, ms) in enumerate(
                zip(self.loss, self.mse, self.window, self.wall_ms)):
            yield trial, k, loss, ("" if mse is None else mse), window, ms


@dataclass
class AttackResult:
    x: np.ndarray
    trace: AttackTrace
    iterations: int
    converged: bool
    success: bool | None = None
    mse: float | None = None


def evaluate_success(x_guess, x_true, tol=0.005):
    """MSE between guessed and true rows, minimized over row orderings.

    Returns ``(success, mse)``.
    """
    a = np.atleast_2d(np.asarray(x_guess, dtype=np.float64))
    b = np.atleast_2d(np.asarray(x_true, dtype=np.float64))
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    rows = a.shape[0]
    if rows <= 6:
        best = min(np.mean((a[list(p)] - b) ** 2) for p in itertools.permutations(range(rows)))
    else:
        from scipy.optimize import linear_sum_assignment

        pair = ((a[:, None, :] - b[None, :, :]) ** 2).mean(axis=2)
        r, c = linear_sum_assignment(pair)
        perm = np.empty(rows, dtype=int)
        perm[c] = r
        best = np.mean((a[perm] - b) ** 2)
    best = float(best)
    return best <= tol, best


def initial_guess(rng, shape, truth=None, min_mse=0.005, domain=DOMAIN, max_draws=1000):
    """Uniform draw over the encoding domain, kept at least ``min_mse`` from truth."""
    for _ in range(max_draws):
        x = rng.uniform(domain[0], domain[1], size=shape)
        if truth is None or evaluate_success(x, truth, min_mse)[1] >= min_mse:
            return x
    raise ExperimentRuntimeError("could not draw an initial guess away from the truth")


def run_attack(model, g, cfg, x_true=None, batch_size=1, labels=None, x_init=None,
               rng=None, record_snapshots=True):
    """Reconstruct ``batch_size`` input rows from the shared gradient ``g``.

    ``x_true`` is used only for trace MSE and for keeping the random start
    away from the answer; it never enters the update.
    """
    cost = CostFunction(model, g, batch_size, labels)
    dim = cost.dim
    shape = (batch_size, dim)
    if x_true is not None:
        x_true = np.asarray(x_true, dtype=np.float64).reshape(shape)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if x_init is None:
        x = initial_guess(rng, shape, x_true, cfg.success_tol).reshape(-1)
    else:
        x = np.array(x_init, dtype=np.float64).reshape(-1)
        if x.size != batch_size * dim:
            raise InputError(f"initial guess needs {batch_size * dim} values")

    filters = [KalmanScalarState() for _ in range(x.size)]
    window = cfg.window
    step = cfg.step
    trace = AttackTrace()
    prev_mean = None
    start = time.perf_counter()

    fold = getattr(model, "canonical_inputs", lambda v: v)

    def mse_of(v):
        if x_true is None:
            return None
        return evaluate_success(fold(v.reshape(shape)), x_true)[1]

    loss = float(cost(x)[0])
    if not np.isfinite(loss):
        raise ExperimentRuntimeError("non-finite gradient-matching cost", iteration=0)
    trace.record(loss, mse_of(x), window, step, 0.0, x if record_snapshots else ())
    converged = loss < cfg.grad_tol
    k = 0
    while not converged and k < cfg.max_iter:
        k += 1
        sampled = 0.0
        for j in range(x.size):
            slope, mean_loss = filtered_fd_gradient(cost, x, j, window, step)
            sampled += mean_loss
            measurement = x[j] - cfg.lr * slope
            if cfg.use_kalman:
                filters[j], measurement = kalman_step(filters[j], measurement)
            if cfg.clip:
                measurement = min(max(measurement, DOMAIN[0]), DOMAIN[1])
            x[j] = measurement
        sampled /= x.size
        if not np.isfinite(sampled) or not np.all(np.isfinite(x)):
            raise ExperimentRuntimeError("non-finite gradient-matching cost", iteration=k)
        if prev_mean is not None and prev_mean > 0 and sampled / prev_mean > cfg.halt_ratio:
            if window > 1:
                window //= 2
            elif cfg.shrink_step:
                step = max(cfg.min_step, step / 2)
        prev_mean = sampled
        loss = float(cost(x)[0])
        if not np.isfinite(loss):
            raise ExperimentRuntimeError("non-finite gradient-matching cost", iteration=k)
        elapsed = (time.perf_counter() - start) * 1e3
        trace.record(loss, mse_of(x), window, step, elapsed, x if record_snapshots else ())
        converged = loss < cfg.grad_tol

    guess = fold(x.reshape(shape))
    result = AttackResult(guess, trace, k, converged)
    if x_true is not None:
        result.success, result.mse = evaluate_success(guess, x_true, cfg.success_tol)
    return result
