"""Training loop: Adam hand values, convergence on separable data,
schedule logging, snapshots, determinism, and prediction semantics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from evos.data import Dataset, gen_blobs, split_622
from evos.errors import DataError, NumericError
from evos.head import SubjectiveOpinion
from evos.mlp import MlpConfig, MlpParams, init_params
from evos.training import (
    AdamState,
    Model,
    TrainConfig,
    accuracy,
    adam_step,
    predict,
    predict_records,
    snapshot_epochs,
    train,
)


def scalar_params(value: float = 0.0) -> MlpParams:
    return MlpParams(weights=[np.array([[value]])], biases=[np.array([0.0])])


# ---------------------------------------------------------------------------
# config


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=10, batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=10, learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=10, objective="nll")


def test_train_config_reference_defaults():
    cfg = TrainConfig(epochs=1)
    assert cfg.learning_rate == 1e-4
    assert cfg.weight_decay == 1e-4
    assert cfg.batch_size == 64
    assert cfg.snapshot_count == 5


# ---------------------------------------------------------------------------
# adam_step


def test_adam_zero_grads_leave_params():
    p = scalar_params(3.0)
    state = AdamState.zeros_like(p)
    g = MlpParams(weights=[np.zeros((1, 1))], biases=[np.zeros(1)])
    adam_step(p, g, state, learning_rate=0.1, weight_decay=0.0)
    assert p.weights[0][0, 0] == 3.0


def test_adam_first_step_unit_direction():
    # with constant grad 1 the bias-corrected moments are both exactly 1,
    # so the first update is -lr/(1+eps)
    p = scalar_params(0.0)
    state = AdamState.zeros_like(p)
    g = MlpParams(weights=[np.ones((1, 1))], biases=[np.zeros(1)])
    adam_step(p, g, state, learning_rate=0.1, weight_decay=0.0)
    assert p.weights[0][0, 0] == pytest.approx(-0.1, abs=1e-8)
    assert state.step == 1


def test_adam_weight_decay_enters_gradient():
    p = scalar_params(10.0)
    state = AdamState.zeros_like(p)
    g = MlpParams(weights=[np.zeros((1, 1))], biases=[np.zeros(1)])
    adam_step(p, g, state, learning_rate=0.1, weight_decay=0.5)
    # effective grad = 0.5*10 = 5; first-step direction is sign(grad)
    assert p.weights[0][0, 0] == pytest.approx(10.0 - 0.1, abs=1e-8)


def test_adam_rejects_nan_grads():
    p = scalar_params(0.0)
    state = AdamState.zeros_like(p)
    g = MlpParams(weights=[np.array([[np.nan]])], biases=[np.zeros(1)])
    with pytest.raises(NumericError):
        adam_step(p, g, state, learning_rate=0.1)


def test_adam_trajectories_bit_identical():
    def trajectory():
        rng = np.random.default_rng(5)
        p = scalar_params(1.0)
        state = AdamState.zeros_like(p)
        vals = []
        for _ in range(20):
            g = MlpParams(weights=[rng.normal(size=(1, 1))], biases=[np.zeros(1)])
            adam_step(p, g, state, learning_rate=0.01, weight_decay=1e-4)
            vals.append(p.weights[0][0, 0])
        return vals

    assert trajectory() == trajectory()


# ---------------------------------------------------------------------------
# snapshot_epochs


def test_snapshot_epochs_small_case():
    assert snapshot_epochs(10, 3) == [5, 7, 9]


def test_snapshot_epochs_properties():
    for epochs, count in ((100, 5), (7, 5), (2, 3), (400, 5)):
        eps = snapshot_epochs(epochs, count)
        assert eps == sorted(set(eps))
        assert all(epochs // 2 <= e <= epochs - 1 for e in eps)
        assert eps[-1] == epochs - 1
        assert len(eps) <= count


def test_snapshot_epochs_degenerate():
    assert snapshot_epochs(0, 5) == []
    assert snapshot_epochs(100, 0) == []


# ---------------------------------------------------------------------------
# train: convergence and contracts


@pytest.fixture(scope="module")
def separable():
    return gen_blobs(n_per_class=500, n_classes=2, seed=0)


@pytest.mark.parametrize("objective", ["tun", "standard_ce"])
def test_two_blob_convergence(separable, objective):
    cfg = TrainConfig(epochs=50, objective=objective, seed=0)
    net = MlpConfig(input_dim=2, output_dim=2, seed=0)
    result = train(separable, None, cfg, net)
    assert accuracy(result.model, separable) >= 0.99
    if objective == "tun":
        first5 = np.mean([r["loss"] for r in result.log[:5]])
        last5 = np.mean([r["loss"] for r in result.log[-5:]])
        assert last5 < first5


def test_epochs_zero_returns_initialized_model(separable):
    cfg = TrainConfig(epochs=0, seed=1)
    net = MlpConfig(input_dim=2, output_dim=2, seed=1)
    result = train(separable, None, cfg, net)
    assert result.log == []
    assert result.snapshots == []
    expect = init_params(net)
    for a, b in zip(result.model.params.weights, expect.weights):
        assert np.array_equal(a, b)


def test_train_rejects_empty_dataset():
    empty = Dataset(
        features=np.zeros((0, 2)), labels=np.zeros(0, dtype=int), n_classes=2, name="e"
    )
    with pytest.raises(DataError):
        train(empty, None, TrainConfig(epochs=1), MlpConfig(input_dim=2, output_dim=2))


def test_train_rejects_dim_mismatch(separable):
    with pytest.raises(DataError):
        train(
            separable,
            None,
            TrainConfig(epochs=1),
            MlpConfig(input_dim=3, output_dim=2),
        )


def test_train_raises_numeric_error_on_divergence():
    # an absurd learning rate overflows the logits within the first epoch
    ds = gen_blobs(n_per_class=40, n_classes=2, seed=0)
    for objective in ("standard_ce", "tun"):
        with pytest.raises(NumericError, match="diverged"):
            with np.errstate(over="ignore", invalid="ignore"):
                train(
                    ds,
                    None,
                    TrainConfig(
                        epochs=3, objective=objective, seed=0, learning_rate=1e150
                    ),
                    MlpConfig(input_dim=2, output_dim=2, seed=0),
                )


def test_training_log_records_schedule(separable):
    cfg = TrainConfig(epochs=14, anneal_epochs=10, seed=2)
    net = MlpConfig(input_dim=2, output_dim=2, seed=2)
    result = train(separable, separable, cfg, net)
    assert len(result.log) == 14
    for rec in result.log:
        ep = rec["epoch"]
        assert rec["kl_weight"] == pytest.approx(min(1.0, ep / 10))
        assert rec["temperature"] == pytest.approx(0.01 + 0.99 * min(1.0, ep / 10))
        assert 0.0 <= rec["val_accuracy"] <= 1.0
        assert np.isfinite(rec["loss"])


def test_snapshots_collected_and_distinct(separable):
    cfg = TrainConfig(epochs=20, snapshot_count=3, seed=3)
    net = MlpConfig(input_dim=2, output_dim=2, seed=3)
    result = train(separable, None, cfg, net)
    assert result.snapshot_epochs == snapshot_epochs(20, 3)
    assert len(result.snapshots) == 3
    # snapshots are copies, not views of the live parameters
    final = result.model.params.weights[0]
    assert not np.array_equal(result.snapshots[0].weights[0], final)


def test_train_deterministic(separable):
    def run():
        cfg = TrainConfig(epochs=5, seed=9)
        net = MlpConfig(input_dim=2, output_dim=2, seed=9)
        return train(separable, None, cfg, net).model.params

    a, b = run(), run()
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_dropout_changes_training_but_stays_deterministic(separable):
    base = MlpConfig(input_dim=2, output_dim=2, seed=4)
    dropped = MlpConfig(input_dim=2, output_dim=2, seed=4, dropout_rate=0.3)
    cfg = TrainConfig(epochs=3, objective="standard_ce", seed=4)
    p_base = train(separable, None, cfg, base).model.params
    p_drop1 = train(separable, None, cfg, dropped).model.params
    p_drop2 = train(separable, None, cfg, dropped).model.params
    assert not np.array_equal(p_base.weights[0], p_drop1.weights[0])
    assert np.array_equal(p_drop1.weights[0], p_drop2.weights[0])


# ---------------------------------------------------------------------------
# predict / predict_records


def test_predict_zero_weight_net_uniform_opinion():
    net = MlpConfig(input_dim=2, output_dim=5, seed=0)
    params = init_params(net)
    for w in params.weights:
        w[:] = 0.0
    model = Model(config=net, params=params, objective="tun", schedule=None)
    op = predict(model, np.zeros((1, 2)))
    assert isinstance(op, SubjectiveOpinion)
    # zero logits carry log(2) evidence per class, so u = 1/(1 + log 2)
    assert_allclose(op.probs, np.full((1, 5), 0.2), atol=1e-12)
    assert op.uncertainty[0] == pytest.approx(1.0 / (1.0 + math.log(2.0)), abs=1e-12)
    assert op.predicted_class[0] == 0  # tie broken to lowest index


def test_predict_trained_model_on_centroids(separable):
    cfg = TrainConfig(epochs=50, objective="tun", seed=0)
    net = MlpConfig(input_dim=2, output_dim=2, seed=0)
    model = train(separable, None, cfg, net).model
    centers = np.asarray(separable.meta["centers"])
    op = predict(model, centers)
    assert list(op.predicted_class) == [0, 1]


def test_predict_standard_model_rows_sum_to_one(separable):
    cfg = TrainConfig(epochs=2, objective="standard_ce", seed=1)
    net = MlpConfig(input_dim=2, output_dim=2, seed=1)
    model = train(separable, None, cfg, net).model
    probs = predict(model, separable.features[:20])
    assert probs.shape == (20, 2)
    assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_predict_records_standard_uses_normalized_entropy(separable):
    cfg = TrainConfig(epochs=2, objective="standard_ce", seed=1)
    net = MlpConfig(input_dim=2, output_dim=2, seed=1)
    model = train(separable, None, cfg, net).model
    recs = predict_records(model, separable)
    assert (recs.uncertainty >= 0).all() and (recs.uncertainty <= 1).all()
    probs = predict(model, separable.features)
    expect = -np.sum(probs * np.log(np.clip(probs, 1e-300, 1)), axis=1) / math.log(2)
    assert_allclose(recs.uncertainty, expect, atol=1e-9)


def test_uncertainty_separates_errors_on_overlapping_blobs():
    # premise of threshold calibration: wrong predictions carry more
    # uncertainty than right ones on in-distribution data
    ds = gen_blobs(seed=42)
    tr, va, _ = split_622(ds, seed=42)
    cfg = TrainConfig(epochs=60, objective="tun", seed=42)
    net = MlpConfig(input_dim=2, output_dim=5, seed=42)
    model = train(tr, va, cfg, net).model
    recs = predict_records(model, va)
    wrong = recs.predicted != recs.labels
    assert 0 < wrong.sum() < len(recs)
    assert recs.uncertainty[wrong].mean() > recs.uncertainty[~wrong].mean()
