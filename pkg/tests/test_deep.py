import numpy as np
import pytest

from npsvcpp.data import make_dataset, split_dataset
from npsvcpp.deep import (
    DeepConfig,
    DeepNPSVC,
    DeepPredictor,
    ENCODER_NAMES,
    PARAM_NAMES,
    backward,
    batch_objectives,
    build_deep_predictor,
    class_z_grads,
    cosine_lr,
    deep_trace_to_csv,
    fit_deep_npsvc,
    forward,
    gamma_schedule,
    init_params,
    score_grads,
    sgd_update,
    tau_step,
)
from npsvcpp.errors import DatasetError, DivergenceError, ShapeMismatchError
from oracles import (
    central_diff,
    mlp_forward_reference,
    params_to_vector,
    vector_to_params,
)


def tiny_params(rng, d_in=3, hidden=4, z_dim=2, K=2):
    params = init_params(d_in, hidden, z_dim, K, rng)
    params["Wt"] = rng.standard_normal((d_in + z_dim, K)) * 0.5
    for name in ("b1", "b2", "b3"):
        params[name] = rng.standard_normal(params[name].shape) * 0.1
    return params


@pytest.fixture(scope="module")
def deep_blobs(blobs_dataset):
    X, y = blobs_dataset
    ds = make_dataset(X, y)
    train, test = split_dataset(ds, 0.6, seed=0)
    est = DeepNPSVC(random_state=0).fit(train.X, train.original_labels())
    return est, train, test


# ---------------------------------------------------------------- forward

def test_forward_zero_encoder_uses_w_part_only():
    rng = np.random.default_rng(1)
    params = init_params(3, 4, 2, 2, rng)
    for name in ENCODER_NAMES:
        params[name] = np.zeros_like(params[name])
    params["Wt"] = rng.standard_normal((5, 2))
    X = rng.standard_normal((6, 3))
    _, F, _ = forward(params, X)
    np.testing.assert_allclose(F, X @ params["Wt"][:3], atol=1e-14)


def test_forward_zero_class_weights():
    rng = np.random.default_rng(2)
    params = tiny_params(rng)
    params["Wt"] = np.zeros_like(params["Wt"])
    _, F, _ = forward(params, rng.standard_normal((4, 3)))
    np.testing.assert_array_equal(F, np.zeros((4, 2)))


def test_forward_matches_stepwise_reference():
    rng = np.random.default_rng(3)
    params = tiny_params(rng)
    X = rng.standard_normal((5, 3))
    _, F, _ = forward(params, X)
    for i in range(5):
        np.testing.assert_allclose(
            F[i], mlp_forward_reference(params, X[i], None), atol=1e-12)


def test_forward_with_prior_projection():
    rng = np.random.default_rng(4)
    params = tiny_params(rng)
    prior = rng.standard_normal((3, 3))
    X = rng.standard_normal((4, 3))
    _, F, cache = forward(params, X, prior)
    np.testing.assert_allclose(cache["phi"], X @ prior, atol=1e-14)
    for i in range(4):
        np.testing.assert_allclose(
            F[i], mlp_forward_reference(params, X[i], prior), atol=1e-12)


# ------------------------------------------------------------- objectives

def test_batch_objectives_hand_example():
    # one sample of class 1 with scores (0.5, 0.2), margin 1, c = 1
    F = np.array([[0.5, 0.2]])
    J = batch_objectives(F, np.array([0]), c=1.0, s=1.0, n_classes=2)
    np.testing.assert_allclose(J, [0.125, 0.32], atol=1e-12)


def test_batch_objectives_inactive_hinge():
    F = np.array([[0.3, 2.0], [1.5, -0.4]])
    y = np.array([0, 1])
    J = batch_objectives(F, y, c=0.7, s=1.0, n_classes=2)
    np.testing.assert_allclose(J, [0.5 * 0.3 ** 2 / 2, 0.5 * 0.4 ** 2 / 2],
                               atol=1e-12)


def test_batch_objectives_zero_scores():
    F = np.zeros((5, 3))
    y = np.array([0, 0, 1, 2, 2])
    c = 1.4
    J = batch_objectives(F, y, c=c, s=1.0, n_classes=3)
    expected = (c / 2) * 0.5 * np.array([3, 4, 3]) / 5
    np.testing.assert_allclose(J, expected, atol=1e-12)


def test_batch_objectives_non_negative():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n, K = int(rng.integers(1, 8)), int(rng.integers(2, 5))
        F = rng.standard_normal((n, K)) * 3.0
        y = rng.integers(0, K, size=n)
        J = batch_objectives(F, y, c=float(rng.uniform(0.1, 2.0)), s=1.0,
                             n_classes=K)
        assert (J >= 0.0).all()


def test_batch_objectives_rejects_empty():
    with pytest.raises(ValueError):
        batch_objectives(np.zeros((0, 2)), np.zeros(0, dtype=int), 1.0, 1.0, 2)


# ---------------------------------------------------------------- backward

def test_score_grads_zero_when_flat():
    # own-class scores at 0 and rest beyond the margin: no gradient signal
    F = np.array([[0.0, 3.0], [2.0, 0.0]])
    y = np.array([0, 1])
    G = score_grads(F, y, c=1.0, s=1.0, n_classes=2)
    np.testing.assert_array_equal(G, np.zeros((2, 2)))


def test_backward_zero_sensitivities():
    rng = np.random.default_rng(6)
    params = tiny_params(rng)
    X = rng.standard_normal((4, 3))
    _, _, cache = forward(params, X)
    grads = backward(params, cache, np.zeros((4, 2)))
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(grads[name], np.zeros_like(params[name]))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    params = tiny_params(rng)
    X = rng.standard_normal((5, 3))
    y = np.array([0, 1, 0, 1, 1])
    tau = np.array([0.3, 0.7])
    c, s = 0.8, 1.0

    def loss(vec):
        p = vector_to_params(vec, params, PARAM_NAMES)
        _, F, _ = forward(p, X)
        return float(tau @ batch_objectives(F, y, c, s, 2))

    _, F, cache = forward(params, X)
    G = score_grads(F, y, c, s, 2)
    grads = backward(params, cache, G * tau[None, :])
    flat_grad = params_to_vector(grads, PARAM_NAMES)
    fd = central_diff(loss, params_to_vector(params, PARAM_NAMES))
    scale = max(1e-8, float(np.max(np.abs(fd))))
    assert float(np.max(np.abs(flat_grad - fd))) / scale <= 1e-5


def test_class_z_grads_factorization():
    rng = np.random.default_rng(8)
    params = tiny_params(rng)
    X = rng.standard_normal((6, 3))
    y = np.array([0, 1, 1, 0, 1, 0])
    tau = np.array([0.4, 0.6])
    _, F, _ = forward(params, X)
    G = score_grads(F, y, 1.0, 1.0, 2)
    per_class = class_z_grads(G, params, d_in=3)
    combined = sum(t * g for t, g in zip(tau, per_class))
    dZ = (G * tau[None, :]) @ params["Wt"][3:].T
    np.testing.assert_allclose(combined, dZ, atol=1e-12)


def test_z_grads_match_finite_differences_on_z():
    rng = np.random.default_rng(9)
    params = tiny_params(rng)
    X = rng.standard_normal((4, 3))
    y = np.array([0, 1, 0, 1])
    _, F, cache = forward(params, X)
    G = score_grads(F, y, 1.0, 1.0, 2)
    per_class = class_z_grads(G, params, d_in=3)
    phi = cache["phi"]
    for l in range(2):
        def loss(zvec, l=l):
            Z = zvec.reshape(4, 2)
            Fz = np.concatenate([phi, Z], axis=1) @ params["Wt"]
            return float(batch_objectives(Fz, y, 1.0, 1.0, 2)[l])

        fd = central_diff(loss, cache["Z"].ravel()).reshape(4, 2)
        np.testing.assert_allclose(per_class[l], fd, atol=1e-7)


# -------------------------------------------------------- tau and schedules

def test_tau_step_momentum_blend():
    z_grads = [np.zeros(3), np.zeros(3)]
    tau = tau_step(z_grads, np.array([0.0, 1.0]), gamma=1.0,
                   tau_prev=np.array([1.0, 0.0]), beta=0.85)
    np.testing.assert_allclose(tau, [0.15, 0.85], atol=1e-12)


def test_tau_step_fixed_point():
    z_grads = [np.zeros(2), np.zeros(2)]
    tau = tau_step(z_grads, np.array([1.0, 0.0]), gamma=1.0,
                   tau_prev=np.array([1.0, 0.0]), beta=0.85)
    np.testing.assert_allclose(tau, [1.0, 0.0], atol=1e-12)


def test_tau_step_stays_on_simplex():
    rng = np.random.default_rng(10)
    tau = np.full(3, 1.0 / 3.0)
    for _ in range(50):
        z_grads = [rng.standard_normal((4, 2)) for _ in range(3)]
        J = rng.uniform(0.0, 2.0, size=3)
        tau = tau_step(z_grads, J, float(rng.uniform(0.0, 1.0)), tau,
                       beta=float(rng.uniform(0.05, 1.0)))
        assert (tau >= -1e-15).all()
        assert abs(tau.sum() - 1.0) <= 1e-12


def test_gamma_schedule_endpoints():
    assert gamma_schedule(0, 100, 1.0, 1e-3) == pytest.approx(1.0 + 1e-3)
    assert gamma_schedule(100, 100, 1.0, 1e-3) == pytest.approx(1e-3)
    assert gamma_schedule(50, 100, 1.0, 1e-3) == pytest.approx(0.5 + 1e-3)


def test_gamma_schedule_monotone_non_increasing():
    vals = [gamma_schedule(p, 40, 2.0, 1e-3) for p in range(41)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_cosine_lr_endpoints_and_monotone():
    assert cosine_lr(0, 10, 0.01, 1e-5) == pytest.approx(0.01)
    assert cosine_lr(10, 10, 0.01, 1e-5) == pytest.approx(1e-5)
    vals = [cosine_lr(p, 10, 0.01, 1e-5) for p in range(11)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_schedule_range_checks():
    with pytest.raises(ValueError):
        gamma_schedule(-1, 10, 1.0, 1e-3)
    with pytest.raises(ValueError):
        cosine_lr(11, 10, 0.01, 1e-5)


# --------------------------------------------------------------- optimizer

def test_sgd_update_hand_computed():
    params = {"W1": np.array([1.0, -2.0]), "Wt": np.array([3.0])}
    grads = {"W1": np.array([0.5, 0.5]), "Wt": np.array([1.0])}
    bufs = {"W1": np.array([0.1, 0.0]), "Wt": np.array([0.2])}
    sgd_update(params, grads, bufs, lr=0.1, momentum=0.9, weight_decay=0.01)
    buf0 = 0.9 * 0.1 + (0.5 + 0.01 * 1.0)
    buf1 = 0.9 * 0.0 + (0.5 + 0.01 * -2.0)
    np.testing.assert_allclose(bufs["W1"], [buf0, buf1], atol=1e-15)
    np.testing.assert_allclose(params["W1"],
                               [1.0 - 0.1 * buf0, -2.0 - 0.1 * buf1], atol=1e-15)


def test_sgd_update_skip_freezes_parameter_and_buffer():
    params = {"W1": np.array([1.0]), "Wt": np.array([3.0])}
    grads = {"W1": np.array([1.0]), "Wt": np.array([1.0])}
    bufs = {"W1": np.array([0.0]), "Wt": np.array([0.5])}
    sgd_update(params, grads, bufs, lr=0.1, momentum=0.9, weight_decay=0.0,
               skip=("Wt",))
    np.testing.assert_array_equal(params["Wt"], [3.0])
    np.testing.assert_array_equal(bufs["Wt"], [0.5])
    assert params["W1"][0] != 1.0


def test_theta_step_decreases_weighted_objective():
    rng = np.random.default_rng(11)
    params = tiny_params(rng)
    X = rng.standard_normal((12, 3))
    y = np.array([0, 1] * 6)
    tau = np.array([0.5, 0.5])

    def loss_of(p):
        _, F, _ = forward(p, X)
        return float(tau @ batch_objectives(F, y, 1.0, 1.0, 2))

    before = loss_of(params)
    # backtracking over the step size: some small lr must descend
    for lr in (0.1, 0.03, 0.01, 0.003, 0.001):
        trial = {k: v.copy() for k, v in params.items()}
        bufs = {k: np.zeros_like(v) for k, v in trial.items()}
        _, F, cache = forward(trial, X)
        G = score_grads(F, y, 1.0, 1.0, 2)
        grads = backward(trial, cache, G * tau[None, :])
        sgd_update(trial, grads, bufs, lr=lr, momentum=0.0, weight_decay=0.0)
        if loss_of(trial) < before:
            return
    pytest.fail("no backtracked step size decreased the objective")


# -------------------------------------------------------------------- fit

def test_fit_blobs_test_accuracy(deep_blobs):
    est, _, test = deep_blobs
    acc = float(np.mean(est.predict(test.X) == test.original_labels()))
    assert acc >= 0.95


def test_fit_tau_trace_on_simplex(deep_blobs):
    est, _, _ = deep_blobs
    assert len(est.trace_) > 0
    for row in est.trace_:
        assert (row.taus >= -1e-12).all()
        assert abs(row.taus.sum() - 1.0) <= 1e-12
        assert (row.objectives >= 0.0).all()
        assert np.isfinite(row.objectives).all()


def test_fit_blob_centroids_classified(deep_blobs):
    est, train, _ = deep_blobs
    centroids = np.vstack([
        train.X[train.y == code].mean(axis=0)
        for code in range(1, train.n_classes + 1)])
    preds = est.predict(centroids)
    np.testing.assert_array_equal(preds, train.classes)


def test_fit_two_moons(moons_dataset):
    X, y = moons_dataset
    ds = make_dataset(X, y)
    train, test = split_dataset(ds, 0.6, seed=1)
    est = DeepNPSVC(hidden=64, lr=0.03, random_state=0)
    est.fit(train.X, train.original_labels())
    acc = float(np.mean(est.predict(test.X) == test.original_labels()))
    assert acc >= 0.95


def test_fit_rejects_single_class():
    X = np.zeros((4, 2))
    with pytest.raises(DatasetError):
        fit_deep_npsvc(X, np.array([0, 0, 0, 0]), DeepConfig(epochs=1))


def test_fit_divergence_raises_with_epoch():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((32, 3)) * 10.0
    y = np.array([0, 1] * 16)
    config = DeepConfig(epochs=30, batch_size=8, lr=1e6, lr_min=1e6,
                        weight_decay=0.0)
    with np.errstate(over="ignore"), pytest.raises(DivergenceError, match="epoch"):
        fit_deep_npsvc(X, y, config)


def test_fit_trace_layout_and_determinism():
    rng = np.random.default_rng(13)
    X = np.vstack([rng.standard_normal((12, 2)) + 2.0,
                   rng.standard_normal((12, 2)) - 2.0])
    y = np.array([0] * 12 + [1] * 12)
    config = DeepConfig(epochs=3, batch_size=8)
    a = fit_deep_npsvc(X, y, config, seed=4)
    b = fit_deep_npsvc(X, y, config, seed=4)
    text_a = deep_trace_to_csv(a.trace, 2)
    text_b = deep_trace_to_csv(b.trace, 2)
    assert text_a == text_b
    lines = text_a.strip().split("\n")
    assert lines[0] == "epoch,batch,J_1,J_2,tau_1,tau_2,lr,gamma"
    assert len(lines) == 1 + 3 * 3  # 24 samples in batches of 8, 3 epochs
    first = lines[1].split(",")
    assert first[0] == "1" and first[1] == "1"


def test_deep_config_validation():
    with pytest.raises(ValueError):
        DeepConfig(prior="resnet")
    with pytest.raises(ValueError):
        DeepConfig(beta=0.0)
    with pytest.raises(ValueError):
        DeepConfig(hidden=0)
    with pytest.raises(ValueError):
        DeepConfig(c=0.0)


def test_init_params_deterministic_shapes():
    a = init_params(4, 8, 3, 2, np.random.default_rng(5))
    b = init_params(4, 8, 3, 2, np.random.default_rng(5))
    for name in PARAM_NAMES:
        np.testing.assert_array_equal(a[name], b[name])
    assert a["W1"].shape == (4, 8)
    assert a["Wt"].shape == (7, 2)
    np.testing.assert_array_equal(a["Wt"], np.zeros((7, 2)))
    np.testing.assert_array_equal(a["b1"], np.zeros(8))


# --------------------------------------------------------------- predictor

def test_predictor_mirror_symmetric_scores():
    # zero biases make the encoder odd, so |f(x)| = |f(-x)| exactly
    rng = np.random.default_rng(14)
    params = init_params(3, 4, 2, 2, rng)
    params["Wt"] = rng.standard_normal((5, 2))
    pred = DeepPredictor(params=params, prior=None,
                         deltas=np.ones(2), n_features=3)
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(pred.decision_values(X),
                               -pred.decision_values(-X), atol=1e-12)
    np.testing.assert_array_equal(pred.predict_codes(X), pred.predict_codes(-X))


def test_predictor_delta_rescaling_invariance(deep_blobs):
    est, train, _ = deep_blobs
    pred = est.predictor_
    scaled = DeepPredictor(params=pred.params, prior=pred.prior,
                           deltas=pred.deltas * 11.0, n_features=pred.n_features)
    probe = train.X[:20]
    Xs = (probe - est.scale_mean_) / est.scale_std_
    np.testing.assert_array_equal(pred.predict_codes(Xs), scaled.predict_codes(Xs))


def test_predictor_deltas_are_column_norms(deep_blobs):
    est, _, _ = deep_blobs
    Wt = est.predictor_.params["Wt"]
    np.testing.assert_allclose(est.predictor_.deltas,
                               np.linalg.norm(Wt, axis=0), atol=1e-12)


def test_build_predictor_rejects_zero_column():
    rng = np.random.default_rng(15)
    params = init_params(2, 3, 2, 2, rng)
    from npsvcpp.deep import DModelState
    from npsvcpp.errors import DegenerateModelError
    state = DModelState(params=params, prior=None, tau=np.array([0.5, 0.5]),
                        trace=[])
    with pytest.raises(DegenerateModelError):
        build_deep_predictor(state, 2)


def test_estimator_shape_mismatch(deep_blobs):
    est, _, _ = deep_blobs
    with pytest.raises(ShapeMismatchError):
        est.predict(np.zeros((3, 9)))


def test_estimator_standardizes_internally(blobs_dataset):
    X, y = blobs_dataset
    est = DeepNPSVC(epochs=2, random_state=0).fit(X[:60], y[:60])
    assert est.scale_mean_.shape == (2,)
    assert (est.scale_std_ > 0).all()
    raw = DeepNPSVC(epochs=2, standardize=False, random_state=0).fit(X[:60], y[:60])
    np.testing.assert_array_equal(raw.scale_mean_, np.zeros(2))
    np.testing.assert_array_equal(raw.scale_std_, np.ones(2))
