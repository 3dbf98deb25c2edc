"""SGD training loop, k-fold cross-validation and scoring."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, ExperimentRuntimeError, InputError, UndefinedMetricError
from .model import CLASSIFICATION, REGRESSION

R2 = "R2"
BALANCED_ACCURACY = "BalancedAccuracy"
CSV_HEADER = ("dataset", "family", "q", "metric", "train", "test", "se")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 50
    batch_size: int = 1
    seed: int = 0
    folds: int = 5
    noise_sigma: float = 0.0
    init: str = "uniform"  # uniform in [0, 2pi) | keep

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigurationError("learning rate must be > 0")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.folds < 2:
            raise ConfigurationError("fold count must be >= 2")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise sigma must be >= 0")
        if self.init not in ("uniform", "keep"):
            raise ConfigurationError("init must be 'uniform' or 'keep'")


@dataclass
class MetricsReport:
    metric: str
    train: float
    test: float
    train_folds: list = field(default_factory=list)
    test_folds: list = field(default_factory=list)
    se: float = 0.0

    def to_json(self, **extra):
        return json.dumps({**asdict(self), **extra}, sort_keys=True)

    def csv_row(self, dataset, family, q):
        return (dataset, family, q, self.metric, self.train, self.test, self.se)


def r2(predictions, targets):
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or t.size < 2:
        raise InputError("r2 needs two equal-length sequences of at least 2 values")
    ss_tot = np.sum((t - t.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined for constant targets")
    return float(1.0 - np.sum((t - p) ** 2) / ss_tot)


def balanced_accuracy(predicted, truth):
    """Mean per-class recall for 0/1 labels."""
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise InputError("label arrays differ in length")
    classes = np.unique(t)
    if classes.size < 2:
        raise UndefinedMetricError("balanced accuracy needs both classes in the truth labels")
    return float(np.mean([np.mean(p[t == c] == c) for c in classes]))


def score(model, data):
    """R^2 for regression, balanced accuracy (threshold 0.5) for classification."""
    preds = model.predict(data.x)
    if data.task == REGRESSION:
        return R2, r2(preds, data.y)
    return BALANCED_ACCURACY, balanced_accuracy((preds >= 0.5).astype(float), data.y)


def _rng(seed, *stream):
    return np.random.default_rng([seed, *stream])


def train(model, data, cfg, history=None):
    """Mini-batch SGD on the mean squared loss.

    ``theta <- theta - lr * g`` where ``g`` is the batch-mean loss gradient,
    optionally perturbed by Gaussian noise of width ``cfg.noise_sigma``.
    Returns ``(trained model, MetricsReport)`` with the train score filled in.
    """
    if data.task != model.task:
        raise ConfigurationError(f"dataset task {data.task!r} does not match model task "
                                 f"{model.task!r}")
    if len(data) == 0:
        raise InputError("training data is empty")
    order_rng = _rng(cfg.seed, 1)
    noise_rng = _rng(cfg.seed, 2)
    if cfg.init == "uniform":
        model = model.with_theta(_rng(cfg.seed, 0).uniform(0, 2 * np.pi, model.num_params))
    theta = np.array(model.theta)
    x, y = data.x, data.y
    for epoch in range(cfg.epochs):
        order = order_rng.permutation(len(data))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            grad = model.shared_gradients(x[idx][None, :, :], y[idx])[0]
            if cfg.noise_sigma > 0:
                grad = grad + noise_rng.normal(0.0, cfg.noise_sigma, grad.shape)
            theta = theta - cfg.lr * grad
            model = model.with_theta(theta)
        loss = float(np.mean((model.predict(x) - y) ** 2))
        if not np.isfinite(loss) or not np.all(np.isfinite(theta)):
            raise ExperimentRuntimeError(f"training diverged in epoch {epoch + 1}")
        if history is not None:
            history.append(loss)
    try:
        metric, value = score(model, data)
    except InputError:
        # e.g. a single training row: the metric is undefined, the fit is not
        metric = R2 if data.task == REGRESSION else BALANCED_ACCURACY
        value = float("nan")
    return model, MetricsReport(metric, value, float("nan"))


def fold_indices(n, folds, seed):
    """Shuffled partition of ``range(n)`` into ``folds`` test sets."""
    if n < folds:
        raise InputError(f"{n} rows cannot be split into {folds} folds")
    perm = _rng(seed, 3).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _stratified_folds(y, folds, seed):
    rng = _rng(seed, 3)
    buckets = [[] for _ in range(folds)]
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for i, part in enumerate(np.array_split(idx, folds)):
            buckets[i].extend(part.tolist())
    return [np.sort(np.array(b, dtype=int)) for b in buckets]


def cross_validate(model, data, cfg):
    """k-fold CV; each fold trains from a fresh seeded initialisation.

    Classification folds are stratified so both classes appear in every
    test split.  Returns the fold-averaged report with the standard error of
    the test scores.
    """
    if data.task == CLASSIFICATION:
        tests = _stratified_folds(data.y, cfg.folds, cfg.seed)
    else:
        tests = fold_indices(len(data), cfg.folds, cfg.seed)
    train_scores, test_scores = [], []
    metric = None
    for k, test_idx in enumerate(tests):
        train_idx = np.setdiff1d(np.arange(len(data)), test_idx)
        fold_cfg = TrainConfig(cfg.lr, cfg.epochs, cfg.batch_size, cfg.seed * 1000 + k,
                               cfg.folds, cfg.noise_sigma, cfg.init)
        fitted, rep = train(model, data.subset(train_idx), fold_cfg)
        metric, test_value = score(fitted, data.subset(test_idx))
        train_scores.append(rep.train)
        test_scores.append(test_value)
    test_arr = np.array(test_scores)
    se = float(test_arr.std(ddof=1) / np.sqrt(test_arr.size))
    return MetricsReport(metric, float(np.mean(train_scores)), float(test_arr.mean()),
                         train_scores, test_scores, se)
