"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed together at the end
of the session (see ``conftest.py``).  Several of these take minutes.
"""
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from oracles import central_difference
from vqnn_inversion.attack import KalmanScalarState, kalman_step
from vqnn_inversion.cli import main
from vqnn_inversion.experiments import (ExperimentConfig, attack_trial, attack_trials,
                                        batch_study, build_model, depth_means, depth_study,
                                        load_dataset, noise_sweep, resolve, summarize)
from vqnn_inversion.model import FAMILIES, VqnnModel
from vqnn_inversion.trainer import cross_validate

pytestmark = pytest.mark.slow

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[number]


def config(data_dir, **kw):
    base = dict(data_dir=str(data_dir), mnist_prefix="digits", restarts=10)
    base.update(kw)
    return resolve(ExperimentConfig(**base))


def test_01_parameter_shift_matches_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for family in FAMILIES:
        task = "classification" if family == "zzefficient" else "regression"
        for q in (2, 6):
            base = VqnnModel.build(family, q, task=task)
            for _ in range(100):
                m = base.with_theta(rng.uniform(-np.pi, np.pi, base.num_params))
                x = rng.uniform(0, np.pi, q)
                _, grad = m.predict_with_gradient(x)
                fd = central_difference(lambda th: m.with_theta(th).predict(x)[0], m.theta)
                worst = max(worst, float(np.max(np.abs(grad[0] - fd))))
    record(1, worst <= 1e-7, f"max |shift - FD| = {worst:.2e} (tol 1e-7)")


def test_02_single_qubit_closed_form():
    grid = np.linspace(0, 2 * np.pi, 50)
    worst = 0.0
    m = VqnnModel.build("simple", 1, readout=0)
    for theta in grid:
        pred = m.with_theta([theta]).predict(grid[:, None])
        worst = max(worst, float(np.max(np.abs(pred - np.cos(grid) * np.cos(theta)))))
    record(2, worst <= 1e-12, f"max |f - cos x cos theta| = {worst:.1e}")


def test_03_kalman_hand_check():
    one = Fraction(1)
    m = Fraction(7, 11)
    state, fused = kalman_step(KalmanScalarState(one, one, one, one, one, Fraction(0)), m)
    ok = fused == Fraction(2, 3) * m and state.P == Fraction(2, 3)
    record(3, ok, f"fused = {fused} for m = {m}, P = {state.P}")


def test_04_two_qubit_cosine(data_dir):
    summary = summarize(attack_trials(config(data_dir)), 0.005)
    record(4, summary["success_rate"] == 1.0,
           f"cosine complex q=2 success {summary['success_rate']:.0%} (need 100%)")


def test_05_six_dimensional_cases(data_dir):
    cases = (("cosine", "complex"), ("fraud", "zzefficient"), ("mnist", "complex"))
    rates = {}
    for dataset, family in cases:
        cfg = config(data_dir, dataset=dataset, family=family, qubits=6)
        rates[dataset] = summarize(attack_trials(cfg), 0.005)["success_rate"]
    detail = ", ".join(f"{k} {v:.0%}" for k, v in rates.items())
    record(5, all(v >= 0.5 for v in rates.values()), f"6-dim success: {detail} (need >= 50%)")


def test_06_deep_convergence(data_dir):
    cfg = config(data_dir, qubits=6, max_iter=800, grad_tol=0.0)
    data = load_dataset(cfg)
    model = build_model(cfg, data)
    best = None
    for trial in range(cfg.restarts):
        r = attack_trial(cfg, trial, data, model)
        if r.trace.mse[min(249, len(r.trace.mse) - 1)] <= cfg.success_tol:
            best = r
            break
    ok = best is not None and best.mse <= 1e-8 and best.iterations > 200
    detail = "no succeeding trial" if best is None else (
        f"MSE {best.mse:.1e} after {best.iterations} iterations (need <= 1e-8)")
    record(6, ok, detail)


def test_07_batch_attacks(data_dir):
    base = dict(dataset="cosine", family="simple-entangled", qubits=4, readout="parity")
    out = {}
    for b in (2, 3, 4):
        results = attack_trials(config(data_dir, batch=b, **base))
        out[b] = [r.mse for r in results]
    b2 = max(out[2]) <= 5e-4
    b3 = all(v <= 0.005 for v in out[3]) and np.mean(out[3]) <= 1e-2
    b4 = not all(v <= 0.005 for v in out[4])
    record(7, b2 and b3 and b4,
           f"B=2 worst {max(out[2]):.1e} (need <= 5e-4); "
           f"B=3 success {np.mean(np.array(out[3]) <= 0.005):.0%} mean {np.mean(out[3]):.1e}; "
           f"B=4 success {np.mean(np.array(out[4]) <= 0.005):.0%} (must fail)")


def test_08_filter_contrast(data_dir):
    base = config(data_dir, dataset="fraud", family="zzefficient", qubits=2)
    runs = {"kalman N=16": replace(base, window=16),
            "plain N=16": replace(base, window=16, kalman=False),
            "plain N=64": replace(base, window=64, kalman=False)}
    mse = {k: attack_trial(cfg, 0).mse for k, cfg in runs.items()}
    ok = (mse["kalman N=16"] <= 0.005 and mse["plain N=16"] > 0.005
          and mse["plain N=64"] <= 0.005)
    record(8, ok, ", ".join(f"{k} {v:.1e}" for k, v in mse.items()))


def test_09_depth_trend(data_dir):
    means = depth_means(depth_study(config(data_dir)))
    its = [means[p] for p in (8, 12, 16, 20)]
    ok = all(a <= b for a, b in zip(its, its[1:]))
    record(9, ok, "iterations " + " / ".join(f"{v:.0f}" for v in its) + " for 8/12/16/20 params")


def test_10_training_floors(data_dir):
    cases = ((("cosine", "complex", 2), 0.90), (("fraud", "zzefficient", 6), 0.70),
             (("mnist", "complex", 6), 0.75))
    scores = {}
    for (dataset, family, q), floor in cases:
        cfg = config(data_dir, dataset=dataset, family=family, qubits=q)
        data = load_dataset(cfg)
        report = cross_validate(build_model(cfg, data), data, cfg.train_config())
        scores[dataset] = (report.test, floor)
    ok = all(v >= f for v, f in scores.values())
    record(10, ok, ", ".join(f"{k} {v:.3f} (>= {f})" for k, (v, f) in scores.items()))


def test_11_noise_tradeoff(data_dir):
    vq = noise_sweep(config(data_dir, sigmas=(0.0, 0.08)))
    nn = noise_sweep(config(data_dir, dataset="fraud", family="mlp", qubits=6, share="loss",
                            lr=30.0, sigmas=(0.0, 0.05, 0.14)))
    ok = (vq[0].attack_mse <= 0.005 < vq[1].attack_mse
          and nn[0].attack_mse < nn[-1].attack_mse)
    record(11, ok, f"VQNN MSE {vq[0].attack_mse:.1e} -> {vq[1].attack_mse:.1e}; "
                   "NN MSE " + " / ".join(f"{r.attack_mse:.1e}" for r in nn))


def test_12_batch_size_degradation(data_dir):
    cfg = config(data_dir, family="simple-entangled", rows=200, epochs=20, train_lr=0.2)
    tests = [r.test for _, r in batch_study(cfg, (5, 20, 60, 100))]
    ok = all(a > b for a, b in zip(tests, tests[1:]))
    record(12, ok, "test R2 " + " / ".join(f"{v:.3f}" for v in tests) + " for B=5/20/60/100")


def test_13_determinism(data_dir, tmp_path):
    common = ["--data-dir", str(data_dir), "--mnist-prefix", "digits"]
    commands = [
        ["train", "--epochs", "2", "--rows", "30", "--folds", "2"],
        ["attack", "--restarts", "2", "--max-iter", "30"],
        ["attack", "--family", "mlp", "--dataset", "fraud", "--qubits", "6", "--restarts", "2",
         "--max-iter", "30", "--sigma", "0.05"],
        ["sweep", "--sigmas", "0,0.05", "--epochs", "1", "--rows", "20", "--folds", "2",
         "--max-iter", "20"],
        ["depth", "--depth-reps", "1,2", "--restarts", "1", "--max-iter", "20"],
        ["batches", "--sizes", "5,10", "--epochs", "1", "--rows", "20", "--folds", "2"],
    ]
    differing = []
    for i, cmd in enumerate(commands):
        dirs = [tmp_path / f"{i}{tag}" for tag in "ab"]
        for d in dirs:
            assert main([*cmd, *common, "--out", str(d)]) == 0
        for f in sorted(dirs[0].iterdir()):
            if f.suffix in (".csv", ".json") and f.read_bytes() != (dirs[1] / f.name).read_bytes():
                differing.append(f"{cmd[0]}/{f.name}")
    record(13, not differing, "all CSV/JSON identical on rerun" if not differing
           else "differs: " + ", ".join(differing))
