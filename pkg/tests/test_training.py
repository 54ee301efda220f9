import math

import numpy as np
import pytest

from conftest import random_model
from iifpnet import data
from iifpnet.errors import ConfigError, ContractError
from iifpnet.model import LayerParams, MlpModel, build_widths, init_model
from iifpnet.passivity import certify
from iifpnet.training import (
    AdamState,
    TrainConfig,
    adam_step,
    adam_update,
    iifp_penalty,
    loss_and_grad,
    total_loss,
    train,
)


def layer_with_sum(total, n_in=10, n_out=10):
    return LayerParams(np.full((n_out, n_in), total / (n_in * n_out)), np.zeros(n_out))


def three_layer(total):
    return MlpModel([layer_with_sum(total) for _ in range(3)], 0.5)


def test_penalty_single_layer_term():
    value, grads = iifp_penalty(three_layer(15.0), 1.0)
    assert value == pytest.approx(3 * 5.0)
    assert np.all(grads[0][0] == -1.0)


def test_penalty_satisfied_layer():
    value, grads = iifp_penalty(three_layer(25.0), 1.0)
    assert value == 0.0
    assert all(np.all(dw == 0) for dw, _ in grads)


def test_penalty_zero_model():
    assert iifp_penalty(three_layer(0.0), 1.0)[0] == pytest.approx(60.0)


def test_penalty_equality_has_zero_subgradient():
    # 8x8 layers: constant 16, entries exactly 0.25
    m = MlpModel([layer_with_sum(16.0, 8, 8) for _ in range(3)], 0.5)
    value, grads = iifp_penalty(m, 1.0)
    assert value == 0.0
    assert all(np.all(dw == 0) for dw, _ in grads)


def test_penalty_per_layer_targets():
    value, _ = iifp_penalty(three_layer(15.0), [1.0, 0.5, 0.75])
    # constants 20, 10, 15 against a sum of 15
    assert value == pytest.approx(5.0 + 0.0 + 0.0)


def test_penalty_matches_certificates(rng):
    for _ in range(50):
        m = random_model(rng, [6, 6, 6, 1], scale=1.0)
        for p in m.layers:
            p.weights += rng.uniform(-1, 3) * 12.0 / p.weights.size
        value, _ = iifp_penalty(m, 1.0)
        cert = certify(m, 1.0)
        assert value >= 0.0
        assert (value == 0.0) == all(c.satisfied for c in cert.layers)


@pytest.mark.parametrize("seed", range(5))
def test_penalty_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, [5, 5, 5, 1])
    theta = m.get_flat()
    _, grads = iifp_penalty(m, 1.0)
    g = m.flatten_grads(grads)
    h = 1e-6
    for i in rng.choice(theta.size, 20, replace=False):
        vals = []
        for s in (1, -1):
            p = theta.copy()
            p[i] += s * h
            m.set_flat(p)
            vals.append(iifp_penalty(m, 1.0)[0])
        fd = (vals[0] - vals[1]) / (2 * h)
        assert abs(fd - g[i]) <= 1e-6 * max(1.0, abs(fd))
    m.set_flat(theta)


def _mse_model(pred_value, total=0.0):
    # output constant pred_value regardless of input, given weight sums `total`
    layers = [layer_with_sum(total, 2, 2), layer_with_sum(total, 2, 2), LayerParams(np.zeros((1, 2)), [pred_value])]
    return MlpModel(layers, 0.5)


def test_total_loss_without_penalty():
    m = _mse_model(0.2, total=100.0)
    m.layers[2].weights[:] = 50.0
    m.layers[0].weights[:] = 0.0
    m.layers[0].weights[0, 0] = 25.0 * 4  # keep every sum above its constant
    m.layers[1].weights[:] = 0.0
    m.layers[1].weights[0, 0] = 100.0
    x = np.zeros((4, 2))
    loss, mse, pen, _ = total_loss(m, x, np.zeros(4), TrainConfig())
    assert pen == 0.0
    assert loss == mse == pytest.approx(0.04)


def test_total_loss_rescaled():
    # MSE 0.04, penalty 5 -> lambda 0.008, loss 0.08
    # constants are 2 per layer; first layer sum -3 gives penalty 5
    m = MlpModel([LayerParams(np.full((1, 1), -3.0), [0.0]), LayerParams([[2.0]], [0.0]),
                  LayerParams([[2.0]], [0.2])], 0.5)
    x = np.zeros((3, 1))
    loss, mse, pen, lam = total_loss(m, x, np.zeros(3), TrainConfig())
    assert mse == pytest.approx(0.04)
    assert pen == pytest.approx(5.0)
    assert lam == pytest.approx(0.008)
    assert loss == pytest.approx(0.08)


def test_total_loss_fixed_weight():
    m = MlpModel([LayerParams([[1.0]], [0.0]), LayerParams([[2.0]], [0.0]),
                  LayerParams([[2.0]], [math.sqrt(0.1)])], 0.5)
    cfg = TrainConfig(penalty_rescale=False, penalty_weight=1.0, nu_target=[0.5, 1.0, 1.0])
    # constants 1, 2, 2 against sums 1, 2, 2 -> zero; lower layer 0 to get penalty 2
    m.layers[0].weights[:] = -1.0
    loss, mse, pen, lam = total_loss(m, np.zeros((2, 1)), np.zeros(2), cfg)
    assert mse == pytest.approx(0.1)
    assert pen == pytest.approx(2.0)
    assert loss == pytest.approx(2.1)


def test_total_loss_empty_batch():
    with pytest.raises(ContractError):
        total_loss(three_layer(1.0), np.zeros((0, 10)), np.zeros(0), TrainConfig())


def test_loss_and_grad_lambda_constant(rng):
    m = random_model(rng, [3, 3, 3, 1])
    x, t = rng.normal(size=(8, 3)), rng.uniform(size=8)
    loss, mse, pen, lam, g = loss_and_grad(m, x, t, TrainConfig())
    assert pen > 0
    assert loss == pytest.approx(2 * mse)
    _, grads = m.mse_gradients(x, t)
    _, pgrads = iifp_penalty(m, 1.0)
    np.testing.assert_allclose(g, m.flatten_grads(grads) + lam * m.flatten_grads(pgrads))


def test_adam_zero_gradient_fresh_state():
    theta = np.array([1.0, -2.0])
    state = AdamState(np.zeros(2), np.zeros(2))
    new = adam_update(theta, np.zeros(2), state)
    np.testing.assert_array_equal(new, theta)
    assert state.step_count == 1


def test_adam_zero_gradient_moments_decay():
    state = AdamState(np.array([0.3]), np.array([0.2]), step_count=5)
    adam_update(np.zeros(1), np.zeros(1), state)
    assert state.first_moment[0] == pytest.approx(0.27)
    assert state.second_moment[0] == pytest.approx(0.2 * 0.999)


def test_adam_first_step():
    # m = 0.05, v = 2.5e-4; bias-corrected 0.5 and 0.25 -> step 1e-3 * 0.5 / (0.5 + 1e-8)
    state = AdamState(np.zeros(1), np.zeros(1))
    new = adam_update(np.zeros(1), np.array([0.5]), state)
    assert new[0] == pytest.approx(-1e-3 * 0.5 / (0.5 + 1e-8), rel=1e-12)


def _hand_adam(g, steps, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    m = v = p = 0.0
    out = []
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        out.append(p)
    return out


@pytest.mark.parametrize("g", [0.5, -3.0, 1e-4])
def test_adam_two_steps_against_hand_rolled(g):
    state = AdamState(np.zeros(1), np.zeros(1))
    p1 = adam_update(np.zeros(1), np.array([g]), state)
    p2 = adam_update(p1, np.array([g]), state)
    expected = _hand_adam(g, 2)
    assert p1[0] == pytest.approx(expected[0], rel=1e-12)
    assert p2[0] == pytest.approx(expected[1], rel=1e-12)
    assert abs(p2[0] - p1[0]) <= abs(p1[0]) * 1.0001


def test_adam_step_on_model(rng):
    m = random_model(rng, [2, 2, 2, 1])
    before = m.get_flat()
    state = AdamState.for_model(m)
    _, grads = m.mse_gradients(rng.normal(size=(4, 2)), rng.uniform(size=4))
    adam_step(state, m, grads)
    assert not np.array_equal(before, m.get_flat())
    assert state.step_count == 1


def test_adam_shape_mismatch():
    with pytest.raises(ContractError):
        adam_update(np.zeros(2), np.zeros(3), AdamState(np.zeros(2), np.zeros(2)))


@pytest.mark.parametrize("kw", [dict(nu_target=0.0), dict(patience=0), dict(learning_rate=-1.0)])
def test_train_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


@pytest.fixture(scope="module")
def small_splits():
    ds = data.synthetic_regression(400, 10, seed=5)
    tr, va, te = data.split(ds, seed=5)
    prep = data.fit_preprocessor(tr)
    return prep.apply(tr), prep.apply(va), prep.apply(te)


@pytest.mark.xfail(
    strict=True,
    reason="weight sums >= n_in*nu/a keep initial outputs far from 0; lr 1e-3 reaches ~0.03-0.4 in 50 epochs",
)
def test_train_constant_target():
    ds = data.synthetic_regression(2000, 10, seed=5)
    tr, va, _ = data.split(ds, seed=5)
    prep = data.fit_preprocessor(tr)
    tr, va = prep.apply(tr), prep.apply(va)
    tr0 = data.Dataset(tr.features, np.zeros(len(tr)))
    va0 = data.Dataset(va.features, np.zeros(len(va)))
    m = init_model(build_widths(10, 2), seed=0)
    m, log = train(m, tr0, va0, TrainConfig(max_epochs=50, seed=0))
    assert min(r["val_mse"] for r in log.rows) <= 1e-3


@pytest.mark.parametrize("seed", [0, 2, 5])
def test_train_drives_penalty_to_zero(small_splits, seed):
    tr, va, _ = small_splits
    m = init_model(build_widths(10, 2), seed=seed)
    pen0, _ = iifp_penalty(m, 1.0)
    assert pen0 > 0
    m, _ = train(m, tr, va, TrainConfig(seed=seed))
    pen, _ = iifp_penalty(m, 1.0)
    assert pen == 0.0 or pen <= 1e-6 * pen0


def test_train_deterministic(small_splits):
    tr, va, _ = small_splits
    m = init_model(build_widths(10, 2), seed=2)
    cfg = TrainConfig(max_epochs=15, seed=4)
    a, log_a = train(m, tr, va, cfg)
    b, log_b = train(m, tr, va, cfg)
    assert log_a.rows == log_b.rows
    np.testing.assert_array_equal(a.get_flat(), b.get_flat())


def test_train_returns_best_epoch(small_splits):
    tr, va, _ = small_splits
    m, log = train(init_model(build_widths(10, 2), seed=3), tr, va, TrainConfig(max_epochs=30, patience=3))
    best = min(r["val_mse"] for r in log.rows)
    assert log.rows[log.best_epoch]["val_mse"] == best
    assert np.mean((m.predict(va.features) - va.targets) ** 2) == pytest.approx(best, rel=1e-12)
    if log.stopped_early:
        assert len(log.rows) - 1 - log.best_epoch == 3


def test_train_log_csv(small_splits, tmp_path):
    tr, va, _ = small_splits
    _, log = train(init_model(build_widths(10, 2), seed=3), tr, va, TrainConfig(max_epochs=3))
    path = tmp_path / "log.csv"
    log.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_mse,val_mse,penalty,lambda"
    assert len(lines) == 1 + len(log.rows)


def test_train_empty_split(small_splits):
    tr, _, _ = small_splits
    with pytest.raises(ContractError):
        train(init_model([10, 10, 10, 1]), tr, (np.zeros((0, 10)), np.zeros(0)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_aborts_on_non_finite(small_splits):
    from iifpnet.training import TrainingDiverged

    tr, va, _ = small_splits
    bad = data.Dataset(tr.features, np.full(len(tr), 1e300))
    with pytest.raises(TrainingDiverged):
        train(init_model(build_widths(10, 2)), bad, va, TrainConfig(max_epochs=2))
