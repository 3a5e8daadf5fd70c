import math

import numpy as np
import pytest

from oracles import random_stack
from purets.data import SeriesDataset, SineSpec, generate_sine, make_windows, split_and_normalize
from purets.errors import DataError, NumericError, ShapeError
from purets.model import AffineLayer, LinearStack, backward, build_model, forward, init_parameters
from purets.tensor import RandomSource
from purets.train import (
    AdamState,
    ConvergenceTrace,
    TrainConfig,
    adam_step,
    evaluate_model,
    mse_loss,
    sgd_step,
    train,
    windows_mse,
)


def test_mse_loss_perfect_fit():
    y = np.ones((2, 3, 1))
    loss, grad = mse_loss(y, y)
    assert loss == 0.0 and not grad.any()


def test_mse_loss_hand_values():
    loss, grad = mse_loss([0.0, 2.0], [1.0, 1.0])
    assert loss == 1.0
    np.testing.assert_array_equal(grad, [-1.0, 1.0])


def test_mse_loss_matches_loop():
    rng = np.random.default_rng(0)
    p, t = rng.normal(size=(3, 4, 5)), rng.normal(size=(3, 4, 5))
    loss, grad = mse_loss(p, t)
    flat_p, flat_t = p.ravel().tolist(), t.ravel().tolist()
    n = len(flat_p)
    assert loss == pytest.approx(math.fsum((a - b) ** 2 for a, b in zip(flat_p, flat_t)) / n, abs=1e-12)
    np.testing.assert_allclose(grad.ravel(), [2 * (a - b) / n for a, b in zip(flat_p, flat_t)], atol=1e-12)
    with pytest.raises(ShapeError):
        mse_loss(p, t[:, :3])


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(batch_size=0), dict(patience=0), dict(optimizer="rmsprop")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_adam_zero_gradient_is_fixed_point():
    p = [np.array([1.5, -2.0])]
    state = AdamState.zeros_like(p)
    adam_step(p, [np.zeros(2)], state, TrainConfig())
    np.testing.assert_array_equal(p[0], [1.5, -2.0])


def _scalar_adam(w, g, m, v, t, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mhat = m / (1 - b1**t)
    vhat = v / (1 - b2**t)
    return w - lr * mhat / (math.sqrt(vhat) + eps), m, v


def test_adam_first_step_matches_scalar_oracle():
    p = [np.array([0.3])]
    state = AdamState.zeros_like(p)
    adam_step(p, [np.array([1.0])], state, TrainConfig(learning_rate=0.1))
    expected, _, _ = _scalar_adam(0.3, 1.0, 0.0, 0.0, 1, 0.1)
    assert p[0][0] == pytest.approx(expected, abs=1e-15)
    assert 0.3 - p[0][0] == pytest.approx(0.1 / (1 + 1e-8), abs=1e-15)


def test_adam_sequence_matches_scalar_oracle():
    rng = np.random.default_rng(1)
    p = [np.array([0.7])]
    state = AdamState.zeros_like(p)
    w, m, v = 0.7, 0.0, 0.0
    for t in range(1, 30):
        g = float(rng.normal())
        adam_step(p, [np.array([g])], state, TrainConfig(learning_rate=0.01))
        w, m, v = _scalar_adam(w, g, m, v, t, 0.01)
    assert p[0][0] == pytest.approx(w, abs=1e-14)


def test_adam_minimizes_quadratic():
    p = [np.array([1.0])]
    state = AdamState.zeros_like(p)
    cfg = TrainConfig(learning_rate=0.05)
    for _ in range(1000):
        adam_step(p, [2 * p[0]], state, cfg)
    assert abs(p[0][0]) < 1e-3


def test_sgd_small_step_descends():
    rng = np.random.default_rng(2)
    m = random_stack(rng, 2, 6, 3, 2)
    x, y = rng.normal(size=(4, 6, 2)), rng.normal(size=(4, 3, 2))
    before, g = mse_loss(forward(m, x), y)
    sgd_step(m.parameters(), backward(m, x, g).arrays(), 1e-6)
    after, _ = mse_loss(forward(m, x), y)
    assert after < before


def _periodic_dataset(period, cycles=40, channels=2, seed=0):
    base = np.random.default_rng(seed).normal(size=(period, channels))
    return split_and_normalize(SeriesDataset("periodic", np.tile(base, (cycles, 1))), "7/1/2")


def test_identity_task_stops_at_first_epoch():
    T = 8
    ds = _periodic_dataset(T)
    m = LinearStack([AffineLayer(np.eye(T), np.zeros(T))], T, T, 2)
    best, trace = train(m, ds, TrainConfig())
    assert len(trace) == 1
    assert trace.train_loss[0] < 1e-20
    np.testing.assert_array_equal(best.temporal_layers[0].weight, np.eye(T))


def test_sine_single_step_fit():
    ds = split_and_normalize(generate_sine(SineSpec(n_points=2000, step=0.1)), "7/1/2")
    m = init_parameters(build_model("PureTS", 64, 1, 1, depth=1), RandomSource(0))
    best, _ = train(m, ds, TrainConfig(max_epochs=20))
    assert evaluate_model(best, ds).mse < 1e-6


def _trend_dataset():
    return split_and_normalize(SeriesDataset("trend", np.arange(400.0)[:, None]), "7/1/2")


def test_trend_extrapolation_weights_exist():
    ds = _trend_dataset()
    T, H = 8, 4
    w = np.zeros((H, T))
    w[:, T - 1] = [k + 2 for k in range(H)]
    w[:, T - 2] = [-(k + 1) for k in range(H)]
    m = LinearStack([AffineLayer(w, np.zeros(H))], T, H, 1)
    assert evaluate_model(m, ds).mse < 1e-25


@pytest.mark.parametrize("T, H, depth", [(8, 4, 1), (16, 16, 2), (12, 20, 3)])
def test_trend_training_reaches_exact_continuation(T, H, depth):
    ds = _trend_dataset()
    m = init_parameters(build_model("PureTS", T, H, 1, depth=depth), RandomSource(0))
    best, _ = train(m, ds, TrainConfig())
    assert evaluate_model(best, ds).mse < 1e-8


def test_training_is_deterministic():
    ds = split_and_normalize(generate_sine(SineSpec(n_points=600, noise_std=0.1, seed=1)), "7/1/2")
    cfg = TrainConfig(max_epochs=5, seed=3)
    m = init_parameters(build_model("PureTS", 16, 8, 1), RandomSource(3))
    a, ta = train(m, ds, cfg)
    b, tb = train(m, ds, cfg)
    assert ta.train_loss == tb.train_loss and ta.val_loss == tb.val_loss
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)
    c, tc = train(m, ds, TrainConfig(max_epochs=5, seed=4))
    assert tc.train_loss != ta.train_loss


def test_returned_model_has_best_validation_loss():
    ds = split_and_normalize(generate_sine(SineSpec(n_points=600, noise_std=0.3, seed=2)), "6/2/2")
    m = init_parameters(build_model("SigmoidMLP", 16, 8, 1), RandomSource(0))
    best, trace = train(m, ds, TrainConfig(learning_rate=0.05, max_epochs=30, patience=3))
    val = windows_mse(best, make_windows(ds, "val", 16, 8))
    assert val <= min(trace.val_loss) * (1 + 1e-12)
    assert len(trace.train_loss) == len(trace.val_loss) == len(trace.seconds)
    assert all(v >= 0 for v in trace.train_loss + trace.val_loss)


def test_input_model_untouched():
    ds = _trend_dataset()
    m = init_parameters(build_model("PureTS", 8, 4, 1, depth=1), RandomSource(0))
    before = [p.copy() for p in m.parameters()]
    train(m, ds, TrainConfig(max_epochs=2))
    for p, q in zip(before, m.parameters()):
        np.testing.assert_array_equal(p, q)


def test_empty_validation_split():
    ds = split_and_normalize(generate_sine(SineSpec(n_points=100)), "10/0/0", min_rows=0)
    with pytest.raises(DataError):
        train(build_model("PureTS", 8, 4, 1), ds, TrainConfig())


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_divergence_names_epoch():
    ds = _trend_dataset()
    m = init_parameters(build_model("PureTS", 8, 4, 1, depth=3), RandomSource(0))
    with pytest.raises(NumericError, match="epoch 1"):
        train(m, ds, TrainConfig(optimizer="sgd", learning_rate=1e6, max_epochs=3))


def test_trace_csv(tmp_path):
    trace = ConvergenceTrace([0.5, 0.25], [0.4, 0.3], [0.1, 0.2])
    path = tmp_path / "t.csv"
    trace.save(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss,seconds"
    assert lines[1] == "1,0.5,0.4,0.1"
    assert trace.best_epoch == 2

