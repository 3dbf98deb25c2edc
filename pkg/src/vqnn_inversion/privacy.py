"""Gaussian noise on shared gradients and the privacy/utility sweep."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .attack import run_attack
from .errors import ConfigurationError
from .model import GradientVector
from .trainer import cross_validate

SWEEP_HEADER = ("sigma", "metric", "train", "test", "attack_mse")


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigurationError(f"noise sigma must be >= 0, got {self.sigma!r}")


def add_noise(g, cfg, rng=None):
    """Return ``g + eps`` with ``eps ~ N(0, sigma^2)`` elementwise.

    ``sigma == 0`` hands back the input object itself.
    """
    if not isinstance(cfg, NoiseConfig):
        cfg = NoiseConfig(*cfg)
    if cfg.sigma == 0:
        return g
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    values = np.asarray(getattr(g, "values", g), dtype=np.float64)
    noisy = values + rng.normal(0.0, cfg.sigma, values.shape)
    if isinstance(g, GradientVector):
        return g.with_values(noisy)
    return noisy


@dataclass
class SweepRow:
    sigma: float
    metric: str
    train: float
    test: float
    attack_mse: float

    def as_tuple(self):
        return (self.sigma, self.metric, self.train, self.test, self.attack_mse)


def attack_once(model, x, g, attack_cfg, noise, labels=None):
    """Noise the share once, attack it, return the inversion MSE."""
    noisy = add_noise(g, noise)
    x = np.atleast_2d(x)
    result = run_attack(model, noisy, attack_cfg, x_true=x, batch_size=x.shape[0],
                        labels=labels, record_snapshots=False)
    return result.mse


def sweep(model, data, sigmas, attack_cfg, train_cfg, target_rows=(0,), share="prediction"):
    """Train with noisy updates and attack a noisy share for every sigma.

    ``share`` is ``"prediction"`` (label-free) or ``"loss"``, in which case the
    victim's labels enter the share and the attacker is given them.
    Returns one :class:`SweepRow` per sigma, in input order.
    """
    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise ConfigurationError("the sigma list is empty")
    for s in sigmas:
        NoiseConfig(s)
    if share not in ("prediction", "loss"):
        raise ConfigurationError(f"unknown share {share!r}")
    x = data.x[list(target_rows)]
    labels = data.y[list(target_rows)] if share == "loss" else None
    values = model.shared_gradients(x[None, :, :], labels)[0]
    g = GradientVector(values, x.shape[0], model.fingerprint())
    rows = []
    # one noise seed for all sigmas: every share sees the same direction, scaled
    for sigma in sigmas:
        report = cross_validate(model, data, replace(train_cfg, noise_sigma=sigma))
        mse = attack_once(model, x, g, attack_cfg, NoiseConfig(sigma, attack_cfg.seed), labels)
        rows.append(SweepRow(sigma, report.metric, report.train, report.test, mse))
    return rows
