import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqnn_inversion.datasets import Dataset, gen_cosine
from vqnn_inversion.errors import ConfigurationError, ExperimentRuntimeError, UndefinedMetricError
from vqnn_inversion.model import VqnnModel
from vqnn_inversion.trainer import (MetricsReport, TrainConfig, balanced_accuracy, cross_validate,
                                    fold_indices, r2, train)


@pytest.mark.parametrize("kw", [dict(epochs=0), dict(lr=0), dict(batch_size=0), dict(folds=1),
                                dict(noise_sigma=-1), dict(init="zeros")])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        TrainConfig(**kw)


def test_r2():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2(t, t) == 1.0
    assert r2(np.full(4, t.mean()), t) == pytest.approx(0.0)
    assert r2([1.0, -1.0], [-1.0, 1.0]) < 0
    with pytest.raises(UndefinedMetricError):
        r2([1.0, 2.0], [3.0, 3.0])


def test_balanced_accuracy():
    assert balanced_accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    assert balanced_accuracy(np.ones(10), np.r_[np.ones(9), 0]) == 0.5
    truth = np.r_[np.ones(5), np.zeros(5)]
    pred = np.r_[1, 1, 1, 1, 0, 0, 0, 0, 1, 1]
    assert balanced_accuracy(pred, truth) == pytest.approx(0.7)
    with pytest.raises(UndefinedMetricError):
        balanced_accuracy([1, 1], [1, 1])


def test_single_qubit_training_matches_closed_form_descent():
    # loss(theta) = (cos theta - 1)^2, gradient -2 (cos theta - 1) sin theta
    data = Dataset(np.zeros((1, 1)), np.ones(1), "regression")
    m = VqnnModel.build("simple", 1, theta=[1.0])
    history = []
    fitted, report = train(m, data, TrainConfig(lr=0.1, epochs=300, init="keep"), history)
    theta = 1.0
    for _ in range(300):
        theta -= 0.1 * (-2 * (np.cos(theta) - 1) * np.sin(theta))
    assert fitted.theta[0] == pytest.approx(theta, abs=1e-12)
    assert history[-1] < 1e-4
    assert all(b <= a + 1e-15 for a, b in zip(history, history[1:]))
    assert np.isnan(report.train)


@settings(max_examples=20, deadline=None)
@given(theta0=st.floats(-3.0, 3.0), lr=st.floats(0.01, 0.1))
def test_one_dim_loss_non_increasing(theta0, lr):
    data = Dataset(np.zeros((1, 1)), np.ones(1), "regression")
    history = []
    train(VqnnModel.build("simple", 1, theta=[theta0]), data,
          TrainConfig(lr=lr, epochs=30, init="keep"), history)
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


def test_task_mismatch():
    m = VqnnModel.build("complex", 2, task="classification")
    with pytest.raises(ConfigurationError):
        train(m, gen_cosine(10, 2), TrainConfig(epochs=1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_epoch():
    data = gen_cosine(20, 2)
    with pytest.raises(ExperimentRuntimeError, match="epoch 1"):
        train(VqnnModel.build("complex", 2), data, TrainConfig(lr=float("inf"), epochs=3))


def test_training_is_bit_reproducible():
    data = gen_cosine(30, 2, seed=1)
    m = VqnnModel.build("complex", 2)
    a, _ = train(m, data, TrainConfig(epochs=3, seed=5, noise_sigma=0.01))
    b, _ = train(m, data, TrainConfig(epochs=3, seed=5, noise_sigma=0.01))
    assert a.theta.tobytes() == b.theta.tobytes()


@settings(max_examples=30, deadline=None)
@given(n=st.integers(5, 80), folds=st.integers(2, 5), seed=st.integers(0, 999))
def test_folds_partition_rows(n, folds, seed):
    parts = fold_indices(n, folds, seed)
    assert len(parts) == folds
    assert sorted(np.concatenate(parts).tolist()) == list(range(n))


def test_cross_validation_report():
    data = gen_cosine(40, 2, seed=2)
    rep = cross_validate(VqnnModel.build("complex", 2), data, TrainConfig(epochs=5, lr=0.2))
    assert rep.metric == "R2" and len(rep.test_folds) == 5 and rep.se >= 0
    assert rep.test > 0.5
    assert rep.csv_row("cosine", "complex", 2)[:4] == ("cosine", "complex", 2, "R2")
    assert '"metric": "R2"' in rep.to_json()


def test_stratified_folds_keep_both_classes():
    rng = np.random.default_rng(0)
    y = np.r_[np.zeros(12), np.ones(8)]
    data = Dataset(rng.uniform(0, np.pi, (20, 2)), y, "classification")
    rep = cross_validate(VqnnModel.build("complex", 2, task="classification"), data,
                         TrainConfig(epochs=2, folds=4))
    assert all(0 <= v <= 1 for v in rep.test_folds)


def test_metrics_report_defaults():
    r = MetricsReport("R2", 0.9, 0.8)
    assert r.se == 0 and r.train_folds == []
