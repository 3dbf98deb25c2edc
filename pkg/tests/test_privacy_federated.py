import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vqnn_inversion.attack import AttackConfig
from vqnn_inversion.datasets import gen_cosine
from vqnn_inversion.errors import ConfigurationError
from vqnn_inversion.federated import Client, Federation, FlRound, run_round
from vqnn_inversion.model import GradientVector, VqnnModel, batch_loss_gradient
from vqnn_inversion.privacy import NoiseConfig, add_noise, sweep
from vqnn_inversion.trainer import TrainConfig


def test_zero_sigma_is_identity():
    g = GradientVector([0.1, -0.2, 0.3], 2, "abc")
    assert add_noise(g, NoiseConfig(0.0, 1)) is g


def test_negative_sigma_rejected():
    with pytest.raises(ConfigurationError):
        NoiseConfig(-0.1)


def test_noise_reproducible_and_keeps_provenance():
    g = GradientVector(np.zeros(5), 3, "fp")
    a = add_noise(g, NoiseConfig(0.1, 7))
    b = add_noise(g, NoiseConfig(0.1, 7))
    np.testing.assert_array_equal(a.values, b.values)
    assert a.batch_size == 3 and a.fingerprint == "fp"
    assert not np.array_equal(a.values, add_noise(g, NoiseConfig(0.1, 8)).values)


def test_noise_variance_chi_square_bound():
    n = 10 ** 5
    noisy = add_noise(np.zeros(n), NoiseConfig(0.1, 0))
    var = noisy.var(ddof=0)
    # 99.9% chi-square interval for the sample variance, well inside 5%
    lo, hi = stats.chi2.ppf([0.0005, 0.9995], n - 1) / (n - 1) * 0.01
    assert lo <= var <= hi
    assert abs(var - 0.01) / 0.01 < 0.05


@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.0, 1.0), seed=st.integers(0, 10 ** 6))
def test_noise_shape_preserved(sigma, seed):
    g = GradientVector(np.arange(4.0))
    out = add_noise(g, NoiseConfig(sigma, seed))
    assert out.values.shape == (4,)


def shards(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, np.pi, (6, 2))
    y = 0.7 * np.cos(x).mean(axis=1)
    return [(x[:2], y[:2]), (x[2:4], y[2:4]), (x[4:], y[4:])]


def test_single_client_sum_equals_its_gradient():
    m = VqnnModel.build("complex", 2)
    x, y = shards()[0]
    agg, tapped = run_round(FlRound(m, [(x, y)]))
    expect = batch_loss_gradient(m, list(zip(x, y)))
    assert agg.values.tobytes() == expect.values.tobytes()
    assert tapped.values.tobytes() == expect.values.tobytes()


def test_two_clients_sum_and_mean():
    m = VqnnModel.build("complex", 2)
    parts = shards()[:2]
    total, _ = run_round(FlRound(m, parts, "sum"))
    mean, _ = run_round(FlRound(m, parts, "mean"))
    each = [batch_loss_gradient(m, list(zip(x, y))).values for x, y in parts]
    np.testing.assert_allclose(total.values, each[0] + each[1], atol=1e-15)
    np.testing.assert_allclose(total.values, 2 * mean.values, atol=1e-15)


def test_intercepted_share_is_post_noise():
    m = VqnnModel.build("complex", 2)
    parts = shards()
    noise = NoiseConfig(0.05, 3)
    agg, tapped = run_round(FlRound(m, parts, "sum", index=2, intercepted=1), noise)
    clean = batch_loss_gradient(m, list(zip(*parts[1])))
    assert not np.array_equal(tapped.values, clean.values)
    again, tapped2 = run_round(FlRound(m, parts, "sum", index=2, intercepted=1), noise)
    np.testing.assert_array_equal(tapped.values, tapped2.values)
    np.testing.assert_array_equal(agg.values, again.values)


def test_round_validation():
    m = VqnnModel.build("complex", 2)
    with pytest.raises(ConfigurationError):
        FlRound(m, [])
    with pytest.raises(ConfigurationError):
        Client(np.zeros((0, 2)))
    with pytest.raises(ConfigurationError):
        FlRound(m, shards(), aggregation="median")
    with pytest.raises(ConfigurationError):
        FlRound(m, shards(), intercepted=3)
    with pytest.raises(ConfigurationError):
        FlRound(m, [(np.zeros((1, 2)), None)], share="loss")


def test_federation_accumulates_and_logs():
    m = VqnnModel.build("complex", 2)
    fed = Federation(m, shards(), lr=0.1, aggregation="sum")
    a1, _ = fed.step()
    a2, _ = fed.step()
    np.testing.assert_allclose(fed.accumulated, a1.values + a2.values)
    np.testing.assert_allclose(fed.model.theta, m.theta - 0.1 * (a1.values + a2.values))
    assert len(fed.log) == 2 and '"round": 1' in fed.log[1]


def test_sweep_requires_sigmas():
    m = VqnnModel.build("complex", 2)
    with pytest.raises(ConfigurationError):
        sweep(m, gen_cosine(10, 2), [], AttackConfig(), TrainConfig())
    with pytest.raises(ConfigurationError):
        sweep(m, gen_cosine(10, 2), [0.1, -1], AttackConfig(), TrainConfig())


def test_small_sweep_rows():
    m = VqnnModel.build("complex", 2)
    rows = sweep(m, gen_cosine(20, 2), [0.0, 0.5], AttackConfig(lr=10.0, max_iter=40),
                 TrainConfig(epochs=2, folds=2))
    assert [r.sigma for r in rows] == [0.0, 0.5]
    assert rows[0].attack_mse < rows[1].attack_mse
    assert rows[0].as_tuple()[1] == "R2"
