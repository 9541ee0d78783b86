import numpy as np
import pytest

from symmsynth.data import gen_gaussian_clusters
from symmsynth.errors import ConfigError, DimensionMismatch, InsufficientClasses, NonFiniteLoss
from symmsynth.losses import LossConfig
from symmsynth.models import Model, ModelSpec
from symmsynth.optim import Optimizer, OptimizerConfig
from symmsynth.training import (
    TrainConfig,
    load_checkpoint,
    sample_batch,
    save_checkpoint,
    train_loop,
    train_step,
)


def small_dataset(seed=0):
    return gen_gaussian_clusters(8, 6, 4, seed=seed)


# ---------------------------------------------------------------------------
# models


def test_linear_identity_passthrough():
    spec = ModelSpec(kind="linear", input_dim=3, embedding_dim=3)
    model = Model.initialize(spec, seed=0)
    model.load_state({"W": np.eye(3), "b": np.zeros(3)})
    X = np.random.default_rng(0).normal(size=(5, 3))
    out = model.embed(X, np.zeros(5, dtype=int) + np.arange(5) // 3)
    np.testing.assert_allclose(out.points, X)


def test_l2_output_unit_rows():
    spec = ModelSpec(kind="mlp2", input_dim=4, embedding_dim=6, hidden_dim=5,
                     l2_output=True)
    model = Model.initialize(spec, seed=1)
    X = np.random.default_rng(1).normal(size=(7, 4))
    out = model.embed(X, np.repeat(np.arange(4), 2)[:7])
    np.testing.assert_allclose(np.linalg.norm(out.points, axis=1), 1.0, atol=1e-9)
    assert out.l2_normalized


def test_forward_deterministic():
    spec = ModelSpec(kind="mlp2", input_dim=3, embedding_dim=4, hidden_dim=5)
    m1 = Model.initialize(spec, seed=2)
    m2 = Model.initialize(spec, seed=2)
    X = np.random.default_rng(2).normal(size=(4, 3))
    labels = np.array([0, 0, 1, 1])
    np.testing.assert_array_equal(m1.embed(X, labels).points, m2.embed(X, labels).points)


def test_model_spec_validation():
    with pytest.raises(ConfigError):
        ModelSpec(kind="cnn", input_dim=3)
    with pytest.raises(ConfigError):
        ModelSpec(kind="mlp2", input_dim=3, hidden_dim=0)
    with pytest.raises(ConfigError):
        ModelSpec(kind="linear", input_dim=0)


def test_forward_dim_mismatch():
    model = Model.initialize(ModelSpec(kind="linear", input_dim=3), seed=0)
    with pytest.raises(DimensionMismatch):
        model.forward_graph(np.ones((2, 4)))


# ---------------------------------------------------------------------------
# optimizers


def test_sgd_rule():
    params = {"w": np.array([1.0, 2.0])}
    opt = Optimizer(OptimizerConfig(kind="sgd", learning_rate=0.1))
    opt.step(params, {"w": np.array([2.0, -1.0])})
    np.testing.assert_allclose(params["w"], [0.8, 2.1])


def test_adam_first_step_hand_recurrence():
    cfg = OptimizerConfig(kind="adam", learning_rate=1e-3)
    params = {"w": np.array([0.5])}
    g = np.array([3.0])
    opt = Optimizer(cfg)
    opt.step(params, {"w": g})
    m_hat = (1 - cfg.beta1) * g / (1 - cfg.beta1)
    v_hat = (1 - cfg.beta2) * g * g / (1 - cfg.beta2)
    expect = 0.5 - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    np.testing.assert_allclose(params["w"], expect)
    # first-step magnitude is ~lr regardless of gradient scale
    assert abs(0.5 - params["w"][0]) == pytest.approx(cfg.learning_rate, rel=1e-6)


def test_adam_two_steps_match_manual():
    cfg = OptimizerConfig(kind="adam", learning_rate=0.01)
    params = {"w": np.array([1.0])}
    opt = Optimizer(cfg)
    w, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate([2.0, -1.0], start=1):
        opt.step(params, {"w": np.array([g])})
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        w -= cfg.learning_rate * (m / (1 - cfg.beta1 ** t)) \
            / (np.sqrt(v / (1 - cfg.beta2 ** t)) + cfg.epsilon)
    np.testing.assert_allclose(params["w"], [w])


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(kind="sgd", learning_rate=0.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(kind="adam", beta1=1.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(kind="rmsprop")


# ---------------------------------------------------------------------------
# batch sampling


def test_sample_batch_structure():
    ds = small_dataset()
    cfg = TrainConfig(seed=3, iterations=1, classes_per_batch=5)
    X, labels = sample_batch(ds, cfg, iteration=0)
    assert X.shape == (10, 4)
    classes, counts = np.unique(labels, return_counts=True)
    assert len(classes) == 5
    assert np.all(counts == 2)


def test_sample_batch_deterministic_per_iteration():
    ds = small_dataset()
    cfg = TrainConfig(seed=3, iterations=1, classes_per_batch=4)
    X1, l1 = sample_batch(ds, cfg, iteration=7)
    X2, l2 = sample_batch(ds, cfg, iteration=7)
    X3, _ = sample_batch(ds, cfg, iteration=8)
    np.testing.assert_array_equal(X1, X2)
    np.testing.assert_array_equal(l1, l2)
    assert not np.array_equal(X1, X3)


def test_sample_batch_all_classes():
    ds = small_dataset()
    cfg = TrainConfig(seed=0, iterations=1, classes_per_batch=8)
    _, labels = sample_batch(ds, cfg, iteration=0)
    assert set(labels.tolist()) == set(ds.classes.tolist())


def test_sample_batch_insufficient_classes():
    ds = small_dataset()
    cfg = TrainConfig(seed=0, iterations=1, classes_per_batch=9)
    with pytest.raises(InsufficientClasses):
        sample_batch(ds, cfg, iteration=0)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(samples_per_class=3)
    with pytest.raises(ConfigError):
        TrainConfig(classes_per_batch=1)


# ---------------------------------------------------------------------------
# steps and loops


def loss_cfg():
    return LossConfig(kind="npair", symm=True)


def test_train_step_decreases_nothing_on_zero_grad():
    # a batch whose loss sits on a flat region: identical classes far apart,
    # sgd with zero gradient leaves weights unchanged
    spec = ModelSpec(kind="linear", input_dim=2, embedding_dim=2)
    model = Model.initialize(spec, seed=0)
    before = model.state()
    opt = Optimizer(OptimizerConfig(kind="sgd", learning_rate=0.5))
    # margin hinge fully satisfied -> zero gradient for baseline triplet
    X = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]])
    model.load_state({"W": np.eye(2), "b": np.zeros(2)})
    spec_l2 = ModelSpec(kind="linear", input_dim=2, embedding_dim=2, l2_output=True)
    model_l2 = Model(spec_l2, model.state())
    before = model_l2.state()
    rec = train_step(model_l2, opt, X, np.array([0, 0, 1, 1]),
                     LossConfig(kind="triplet", margin_m=1.0), iteration=0)
    assert rec.loss == 0.0
    after = model_l2.state()
    for k in before:
        np.testing.assert_array_equal(before[k], after[k])


def test_train_step_records_ratio():
    ds = small_dataset()
    cfg = TrainConfig(seed=1, iterations=1, classes_per_batch=4, loss=loss_cfg())
    X, labels = sample_batch(ds, cfg, iteration=0)
    model = Model.initialize(ModelSpec(kind="linear", input_dim=4, embedding_dim=8),
                             seed=1)
    opt = Optimizer(OptimizerConfig())
    rec = train_step(model, opt, X, labels, cfg.loss, iteration=0)
    assert 0.0 <= rec.syn_ratio <= 1.0
    assert np.isfinite(rec.loss)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises():
    model = Model.initialize(ModelSpec(kind="linear", input_dim=2, embedding_dim=2),
                             seed=0)
    model.load_state({"W": np.eye(2) * 1e200, "b": np.zeros(2)})
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]) * 1e10
    opt = Optimizer(OptimizerConfig())
    with pytest.raises(NonFiniteLoss) as exc:
        train_step(model, opt, X, np.array([0, 0, 1, 1]),
                   LossConfig(kind="npair"), iteration=5)
    assert exc.value.iteration == 5


def test_train_loop_zero_iterations():
    ds = small_dataset()
    spec = ModelSpec(kind="linear", input_dim=4, embedding_dim=8)
    cfg = TrainConfig(seed=0, iterations=0, classes_per_batch=4, loss=loss_cfg())
    model, log = train_loop(ds, spec, OptimizerConfig(), cfg)
    assert log.steps == []
    np.testing.assert_array_equal(model.state()["W"],
                                  Model.initialize(spec, seed=0).state()["W"])


def test_train_loop_reproducible():
    ds = small_dataset()
    spec = ModelSpec(kind="linear", input_dim=4, embedding_dim=8)
    cfg = TrainConfig(seed=4, iterations=10, classes_per_batch=4, loss=loss_cfg())
    m1, log1 = train_loop(ds, spec, OptimizerConfig(), cfg)
    m2, log2 = train_loop(ds, spec, OptimizerConfig(), cfg)
    for k in m1.params:
        np.testing.assert_array_equal(m1.state()[k], m2.state()[k])
    assert [r.loss for r in log1.steps] == [r.loss for r in log2.steps]
    assert [r.syn_ratio for r in log1.steps] == [r.syn_ratio for r in log2.steps]


def test_train_loop_all_losses_finite():
    ds = small_dataset()
    for kind in ("triplet", "lifted", "npair", "angular"):
        for symm in (False, True):
            spec = ModelSpec(kind="linear", input_dim=4, embedding_dim=8,
                             l2_output=kind in ("triplet", "lifted"))
            cfg = TrainConfig(seed=0, iterations=5, classes_per_batch=4,
                              loss=LossConfig(kind=kind, symm=symm))
            _, log = train_loop(ds, spec, OptimizerConfig(), cfg)
            assert all(np.isfinite(r.loss) for r in log.steps)


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    ds = small_dataset()
    spec = ModelSpec(kind="mlp2", input_dim=4, embedding_dim=6, hidden_dim=5)
    cfg = TrainConfig(seed=2, iterations=5, classes_per_batch=4, loss=loss_cfg())
    model, _ = train_loop(ds, spec, OptimizerConfig(), cfg)
    opt = Optimizer(OptimizerConfig())
    opt.step({k: t.data for k, t in model.params.items()},
             {k: np.ones_like(t.data) for k, t in model.params.items()})
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, model, opt, cfg, iteration=5)
    model2, opt2, it, seed = load_checkpoint(path)
    assert it == 5 and seed == 2
    assert model2.spec == spec
    for k in model.params:
        np.testing.assert_array_equal(model.state()[k], model2.state()[k])
    assert opt2.t == opt.t
    for k in opt.m:
        np.testing.assert_array_equal(opt.m[k], opt2.m[k])


def test_checkpoint_corrupt(tmp_path):
    from symmsynth.errors import ParseError

    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_checkpoint(path)
