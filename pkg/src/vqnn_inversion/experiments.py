"""Experiment configuration, presets and runners shared by the CLI and tests.

Every random draw comes from ``numpy.random.default_rng([seed, stream, ...])``
with a fixed stream id per purpose, so results depend only on the resolved
configuration.
"""
from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .attack import AttackConfig, run_attack
from .baseline import MlpModel
from .datasets import gen_cosine, load_fraud, load_mnist
from .errors import ConfigurationError
from .federated import FlRound, run_round
from .model import CLASSIFICATION, DEFAULT_REPS, FAMILIES, REGRESSION, VqnnModel
from .privacy import NoiseConfig, sweep
from .trainer import TrainConfig, cross_validate, train

DATASETS = ("cosine", "mnist", "fraud")
MODEL_FAMILIES = tuple(FAMILIES) + ("mlp",)
THETA_MODES = ("ones", "random", "trained")

# named RNG streams
STREAM_DATA, STREAM_THETA, STREAM_ATTACK, STREAM_NOISE = 11, 12, 13, 14

DATA_ENV = "VQNN_DATA_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "cosine"
    family: str = "complex"
    qubits: int = 2
    reps: int | None = None
    readout: str = "mean"
    batch: int = 1
    # attack
    window: int = 64
    step: float = 0.05
    lr: float | None = None
    max_iter: int = 250
    halt_ratio: float = 0.99
    grad_tol: float = 1e-12
    kalman: bool = True
    restarts: int = 10
    success_tol: float = 0.005
    share: str = "prediction"
    sigma: float = 0.0
    theta_mode: str = "ones"
    # training
    train_lr: float = 0.1
    epochs: int | None = None
    train_batch: int = 1
    folds: int = 5
    rows: int | None = None
    # sweeps
    sigmas: tuple = (0.0, 0.02, 0.05, 0.07, 0.08)
    depth_reps: tuple = (1, 2, 3, 4)
    depth_datasets: tuple = ("cosine", "fraud")
    depth_tol: float = 1e-5
    # data files
    data_dir: str | None = None
    mnist_prefix: str = "train"
    digits: tuple = (0, 1)
    fraud_file: str = "creditcard.csv"
    seed: int = 0

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigurationError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.family not in MODEL_FAMILIES:
            raise ConfigurationError(f"family must be one of {MODEL_FAMILIES}, got {self.family!r}")
        if self.theta_mode not in THETA_MODES:
            raise ConfigurationError(f"theta_mode must be one of {THETA_MODES}")
        if self.share not in ("prediction", "loss"):
            raise ConfigurationError("share must be 'prediction' or 'loss'")
        for name in ("qubits", "batch", "restarts", "max_iter", "window", "train_batch"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.sigma < 0 or any(s < 0 for s in self.sigmas):
            raise ConfigurationError("noise sigma must be >= 0")
        if len(self.digits) != 2:
            raise ConfigurationError("digits must name exactly two classes")

    @property
    def task(self):
        return REGRESSION if self.dataset == "cosine" else CLASSIFICATION

    def attack_config(self, seed=0):
        return AttackConfig(window=1 if self.family == "mlp" else self.window, step=self.step,
                            lr=self.lr, max_iter=self.max_iter, halt_ratio=self.halt_ratio,
                            use_kalman=self.kalman, success_tol=self.success_tol,
                            grad_tol=self.grad_tol, seed=seed)

    def train_config(self, seed=None):
        return TrainConfig(lr=self.train_lr, epochs=self.epochs, batch_size=self.train_batch,
                           seed=self.seed if seed is None else seed, folds=self.folds)

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    def config_hash(self):
        """Hash of everything that affects results (the data path is excluded)."""
        d = self.to_dict()
        d.pop("data_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


def attack_lr(family, q, task=REGRESSION):
    """Attack step size per model class.

    Gradient magnitudes shrink as the number of qubits grows, so wider
    circuits need a much larger step.  A classification head halves the
    gradient and so quarters the cost; on wide circuits the step is scaled up
    by 4 to match.  Two-qubit landscapes are steep enough that 4x overshoots.
    """
    if family == "mlp":
        return 100.0
    if q <= 2:
        return 10.0
    return 2000.0 if task == CLASSIFICATION else 500.0


def resolve(cfg):
    """Fill preset-dependent defaults (values left as ``None``)."""
    updates = {}
    if cfg.lr is None:
        updates["lr"] = attack_lr(cfg.family, cfg.qubits, cfg.task)
    if cfg.reps is None and cfg.family in DEFAULT_REPS:
        updates["reps"] = DEFAULT_REPS[cfg.family]
    if cfg.epochs is None:
        updates["epochs"] = 50 if cfg.dataset == "cosine" else 10
    if cfg.rows is None:
        updates["rows"] = 100
    return replace(cfg, **updates)


def data_dir(cfg):
    root = cfg.data_dir or os.environ.get(DATA_ENV) or "data"
    return Path(root)


def load_dataset(cfg, dataset=None, dim=None):
    """``rows`` is the sample count for cosine and the per-class count otherwise."""
    dataset = dataset or cfg.dataset
    dim = dim or cfg.qubits
    if dataset == "cosine":
        return gen_cosine(cfg.rows, dim, seed=cfg.seed)
    root = data_dir(cfg)
    if dataset == "mnist":
        images = root / f"{cfg.mnist_prefix}-images-idx3-ubyte"
        labels = root / f"{cfg.mnist_prefix}-labels-idx1-ubyte"
        images, labels = _existing(images), _existing(labels)
        return load_mnist(images, labels, dim, tuple(cfg.digits), cfg.rows, cfg.seed)
    return load_fraud(_existing(root / cfg.fraud_file), dim, cfg.rows, cfg.seed)


def _existing(path):
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise ConfigurationError(f"data file not found: {path}")


def build_model(cfg, data=None, dataset=None):
    """Victim model in the requested theta mode.

    ``ones`` is the fixed untrained setting used for attacks (for the MLP it
    means the seeded Xavier initialisation), ``random`` draws
    theta uniformly in [0, 2pi), ``trained`` fits on ``data`` first.
    """
    task = REGRESSION if (dataset or cfg.dataset) == "cosine" else CLASSIFICATION
    if cfg.family == "mlp":
        model = MlpModel.build((cfg.qubits, 16, 1), task=task, seed=cfg.seed)
    else:
        model = VqnnModel.build(cfg.family, cfg.qubits, reps=cfg.reps, task=task,
                                readout=_readout(cfg.readout))
        model = replace(model, gradient_method="adjoint")
    if cfg.theta_mode == "random":
        rng = np.random.default_rng([cfg.seed, STREAM_THETA])
        model = model.with_theta(rng.uniform(0, 2 * np.pi, model.num_params))
    elif cfg.theta_mode == "trained":
        if data is None:
            raise ConfigurationError("theta_mode 'trained' needs a dataset")
        model, _ = train(model, data, replace(cfg.train_config(), init="uniform"))
    return model


def _readout(value):
    return int(value) if str(value).isdigit() else value


# -- attack ------------------------------------------------------------------

def iterations_to(trace, tol):
    """First iteration whose reconstruction MSE is at or below ``tol``."""
    for k, mse in enumerate(trace.mse):
        if mse is not None and mse <= tol:
            return k
    return None


def attack_trial(cfg, trial, data=None, model=None, wall_clock=False):
    """One seeded restart: a two-client round, one share tapped and inverted."""
    data = data if data is not None else load_dataset(cfg)
    model = model if model is not None else build_model(cfg, data)
    rng = np.random.default_rng([cfg.seed, STREAM_ATTACK, trial])
    b = cfg.batch
    picked = rng.choice(len(data), size=2 * b, replace=False)
    victim, other = picked[:b], picked[b:]
    labels = cfg.share == "loss"
    clients = [(data.x[victim], data.y[victim] if labels else None),
               (data.x[other], data.y[other] if labels else None)]
    # each restart is an independent round, so the round index keys its noise
    rnd = FlRound(model, clients, "sum", index=trial, intercepted=0, share=cfg.share)
    _, tapped = run_round(rnd, NoiseConfig(cfg.sigma, cfg.seed))
    result = run_attack(model, tapped, cfg.attack_config(seed=trial), x_true=data.x[victim],
                        batch_size=b, labels=data.y[victim] if labels else None, rng=rng,
                        record_snapshots=False)
    if not wall_clock:
        result.trace.wall_ms = [0.0] * len(result.trace.wall_ms)
    return result


def _trial_job(args):
    cfg, trial, wall_clock = args
    return attack_trial(cfg, trial, wall_clock=wall_clock)


def attack_trials(cfg, jobs=1, wall_clock=False):
    """All restarts, in trial order regardless of completion order."""
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_trial_job, [(cfg, t, wall_clock) for t in range(cfg.restarts)]))
    data = load_dataset(cfg)
    model = build_model(cfg, data)
    return [attack_trial(cfg, t, data, model, wall_clock) for t in range(cfg.restarts)]


def summarize(results, tol):
    mses = np.array([r.mse for r in results], dtype=np.float64)
    hits = [iterations_to(r.trace, tol) for r in results]
    hits = [h for h in hits if h is not None]
    se = float(mses.std(ddof=1) / np.sqrt(mses.size)) if mses.size > 1 else 0.0
    return {
        "success_rate": float(np.mean([bool(r.success) for r in results])),
        "mean_mse": float(mses.mean()),
        "se_mse": se,
        "iterations_to_tol": float(np.mean(hits)) if hits else None,
        "trials": len(results),
    }


# -- studies -----------------------------------------------------------------

def depth_study(cfg, jobs=1):
    """Iterations to reach ``depth_tol`` for ZZEfficient at each ``reps``.

    Returns rows ``(params, reps, dataset, mean_iterations, reached)``.  A trial
    that never reaches the tolerance counts as ``max_iter``.
    """
    rows = []
    for reps in cfg.depth_reps:
        for dataset in cfg.depth_datasets:
            sub = replace(cfg, family="zzefficient", reps=reps, dataset=dataset)
            results = attack_trials(sub, jobs)
            its = [iterations_to(r.trace, cfg.depth_tol) for r in results]
            reached = sum(i is not None for i in its)
            its = [cfg.max_iter if i is None else i for i in its]
            params = VqnnModel.build("zzefficient", cfg.qubits, reps=reps).num_params
            rows.append((params, reps, dataset, float(np.mean(its)), reached))
    return rows


def depth_means(rows):
    """Average the per-dataset rows into ``{params: iterations}``."""
    out = {}
    for params, _, _, its, _ in rows:
        out.setdefault(params, []).append(its)
    return {p: float(np.mean(v)) for p, v in sorted(out.items())}


def noise_sweep(cfg, target_rows=(0,)):
    if not cfg.sigmas:
        raise ConfigurationError("the sigma list is empty")
    data = load_dataset(cfg)
    model = build_model(cfg, data)
    return sweep(model, data, cfg.sigmas, cfg.attack_config(seed=cfg.seed),
                 cfg.train_config(), target_rows, share=cfg.share)


def batch_study(cfg, batches=(5, 20, 60, 100)):
    """Cross-validated test score for each training batch size."""
    data = load_dataset(cfg)
    model = build_model(replace(cfg, theta_mode="ones"), data)
    out = []
    for b in batches:
        report = cross_validate(model, data, replace(cfg.train_config(), batch_size=b))
        out.append((b, report))
    return out


def run_metadata(cfg):
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "version": __version__}
