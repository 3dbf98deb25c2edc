"""Variational quantum neural networks and numerical gradient inversion attacks."""

__version__ = "0.1.0"

from .attack import AttackConfig, AttackResult, AttackTrace, run_attack  # noqa: E402
from .datasets import Dataset, gen_cosine, load_fraud, load_mnist  # noqa: E402
from .model import GradientVector, VqnnModel, batch_loss_gradient, loss_gradient  # noqa: E402
from .privacy import NoiseConfig, add_noise  # noqa: E402
from .trainer import TrainConfig, cross_validate, train  # noqa: E402

__all__ = [
    "AttackConfig", "AttackResult", "AttackTrace", "run_attack",
    "Dataset", "gen_cosine", "load_fraud", "load_mnist",
    "GradientVector", "VqnnModel", "batch_loss_gradient", "loss_gradient",
    "NoiseConfig", "add_noise",
    "TrainConfig", "cross_validate", "train",
]
