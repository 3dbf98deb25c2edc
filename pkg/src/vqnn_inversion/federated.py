"""In-process federated round: clients share batch gradients, a server sums them.

The adversary sees exactly one client's transmitted share and nothing else.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .model import GradientVector, batch_loss_gradient, batch_prediction_gradient
from .privacy import NoiseConfig, add_noise

AGGREGATIONS = ("sum", "mean")
SHARES = ("loss", "prediction")


@dataclass(frozen=True)
class Client:
    x: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if x.shape[0] == 0 or x.size == 0:
            raise ConfigurationError("client shard is empty")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.float64).reshape(-1)
            if y.size != x.shape[0]:
                raise ConfigurationError("client shard has mismatched x and y lengths")
            object.__setattr__(self, "y", y)


@dataclass
class FlRound:
    """One round.  Every client evaluates the same ``model`` (same theta)."""

    model: object
    clients: list
    aggregation: str = "sum"
    index: int = 0
    intercepted: int = 0
    share: str = "loss"

    def __post_init__(self):
        if not self.clients:
            raise ConfigurationError("a round needs at least one client")
        self.clients = [c if isinstance(c, Client) else Client(*c) for c in self.clients]
        if self.aggregation not in AGGREGATIONS:
            raise ConfigurationError(f"aggregation must be one of {AGGREGATIONS}")
        if self.share not in SHARES:
            raise ConfigurationError(f"share must be one of {SHARES}")
        if not 0 <= self.intercepted < len(self.clients):
            raise ConfigurationError(f"intercepted client {self.intercepted} does not exist")
        if self.share == "loss" and any(c.y is None for c in self.clients):
            raise ConfigurationError("loss shares need labels on every client")


def client_share(model, client, share):
    if share == "loss":
        return batch_loss_gradient(model, list(zip(client.x, client.y)))
    return batch_prediction_gradient(model, client.x)


def run_round(rnd, noise=NoiseConfig()):
    """Return ``(aggregate, intercepted share)`` for one round.

    Client ``i`` draws its noise from stream ``(noise.seed, round, i)``.
    """
    shares = []
    for i, client in enumerate(rnd.clients):
        g = client_share(rnd.model, client, rnd.share)
        rng = np.random.default_rng([noise.seed, rnd.index, i])
        shares.append(add_noise(g, noise, rng))
    total = np.sum([s.values for s in shares], axis=0)
    if rnd.aggregation == "mean":
        total = total / len(shares)
    rows = sum(s.batch_size for s in shares)
    aggregate = GradientVector(total, rows, rnd.model.fingerprint())
    return aggregate, shares[rnd.intercepted]


@dataclass
class Federation:
    """Multi-round training: ``G_i = G_{i-1} + aggregate_i`` and ``theta -= lr * aggregate_i``."""

    model: object
    shards: list
    lr: float = 0.1
    aggregation: str = "mean"
    share: str = "loss"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    accumulated: np.ndarray | None = None
    rounds: int = 0
    log: list = field(default_factory=list)

    def step(self, intercepted=0):
        rnd = FlRound(self.model, self.shards, self.aggregation, self.rounds, intercepted,
                      self.share)
        aggregate, tapped = run_round(rnd, self.noise)
        if self.accumulated is None:
            self.accumulated = np.zeros_like(aggregate.values)
        self.accumulated = self.accumulated + aggregate.values
        self.model = self.model.with_theta(self.model.theta - self.lr * aggregate.values)
        self.log.append(json.dumps({
            "round": self.rounds,
            "clients": len(rnd.clients),
            "aggregation": self.aggregation,
            "sigma": self.noise.sigma,
            "aggregate_norm": float(np.linalg.norm(aggregate.values)),
            "intercepted": intercepted,
        }, sort_keys=True))
        self.rounds += 1
        return aggregate, tapped
