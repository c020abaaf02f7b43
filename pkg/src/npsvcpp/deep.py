"""Desk-scale deep NPSVC++ with a manual-gradient MLP encoder.

The hypothesis uses a skip connection: f_l(x) = w_l'phi(x) + v_l'z(x)
where phi is a fixed prior map (identity or a seeded linear projection)
and z is a small trainable encoder d_in -> h -> h -> d_z with tanh
hidden layers and a linear output. The stacked class weights
W = [w; v] of shape (d_in + d_z, K) and the encoder parameters theta
are trained per mini-batch in two phases:

1. theta-step: one SGD step (momentum, weight decay, cosine-annealed
   learning rate) on sum_l tau_l J_l over W and theta jointly.
2. tau-step: with W frozen, recompute the objectives, solve the simplex
   QP over the per-class encoder-output gradients, blend
   tau = beta tau* + (1 - beta) tau_prev, then take one gradient step
   on theta alone with the refreshed weights.

All gradients are written out by hand (no autodiff) so they can be
checked against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import DatasetError, DegenerateModelError, DivergenceError
from .ioutil import fmt_float
from .solvers import solve_simplex_qp
from .validation import check_feature_matrix, encode_labels

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "Wt")
ENCODER_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class DeepConfig:
    """Hyperparameters of the deep trainer.

    Optimizer constants (momentum 0.9, weight decay 1e-4, beta 0.85,
    cosine floor 1e-5, gamma epsilon 1e-3) follow the package ledger;
    epochs default to the extended toy-convergence budget.
    """

    hidden: int = 32
    z_dim: int = 8
    prior: str = "identity"
    epochs: int = 200
    batch_size: int = 64
    lr: float = 0.01
    lr_min: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 1e-4
    beta: float = 0.85
    gamma_max: float = 1.0
    gamma_eps: float = 1e-3
    c: float = 1.0
    margin: float = 1.0

    def __post_init__(self):
        if self.prior not in ("identity", "projection"):
            raise ValueError(f"unknown prior map {self.prior!r}")
        if self.hidden < 1 or self.z_dim < 1:
            raise ValueError("hidden and z_dim must be at least 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.lr > 0 or not self.lr_min >= 0:
            raise ValueError("learning rates must be positive")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")


def init_params(d_in: int, hidden: int, z_dim: int, n_classes: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Seeded scaled-Gaussian encoder weights, zero biases, zero W."""
    def layer(fan_in, fan_out):
        return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)

    return {
        "W1": layer(d_in, hidden),
        "b1": np.zeros(hidden),
        "W2": layer(hidden, hidden),
        "b2": np.zeros(hidden),
        "W3": layer(hidden, z_dim),
        "b3": np.zeros(z_dim),
        "Wt": np.zeros((d_in + z_dim, n_classes)),
    }


def prior_map(X: np.ndarray, prior: np.ndarray | None) -> np.ndarray:
    """phi(X): identity when prior is None, else the fixed projection."""
    return X if prior is None else X @ prior


def forward(params: dict, X: np.ndarray, prior: np.ndarray | None = None):
    """Batch forward pass.

    Returns (Z, F, cache): encoder outputs (n, d_z), scores (n, K), and
    the intermediate activations needed by backward.
    """
    phi = prior_map(X, prior)
    h1 = np.tanh(phi @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    Z = h2 @ params["W3"] + params["b3"]
    A = np.concatenate([phi, Z], axis=1)
    F = A @ params["Wt"]
    cache = {"phi": phi, "h1": h1, "h2": h2, "Z": Z, "A": A}
    return Z, F, cache


def batch_objectives(F: np.ndarray, y: np.ndarray, c: float, s: float,
                     n_classes: int) -> np.ndarray:
    """Per-class mini-batch objectives.

    J_l = (1/|B|) [ sum_{y_i=l} (1/2) f_il^2
                    + (c/(K-1)) sum_{y_i!=l} (1/2) [s - f_il]_+^2 ]
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    n = F.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    own = np.zeros_like(F, dtype=bool)
    own[np.arange(n), y] = True
    hin = np.maximum(0.0, s - F)
    sim = 0.5 * np.where(own, F, 0.0) ** 2
    dis = 0.5 * np.where(own, 0.0, hin) ** 2
    return (sim.sum(axis=0) + (c / (n_classes - 1)) * dis.sum(axis=0)) / n


def score_grads(F: np.ndarray, y: np.ndarray, c: float, s: float,
                n_classes: int) -> np.ndarray:
    """G with G[i, l] = dJ_l / dF[i, l] (J_l touches only column l)."""
    n = F.shape[0]
    own = np.zeros_like(F, dtype=bool)
    own[np.arange(n), y] = True
    hin = np.maximum(0.0, s - F)
    return np.where(own, F, -(c / (n_classes - 1)) * hin) / n


def backward(params: dict, cache: dict, dF: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss with given score sensitivities dF.

    Propagates through W and the encoder; the prior block of the
    concatenation is constant so only the Z block reaches theta.
    """
    d_in = cache["phi"].shape[1]
    grads = {"Wt": cache["A"].T @ dF}
    dA = dF @ params["Wt"].T
    dZ = dA[:, d_in:]
    grads["W3"] = cache["h2"].T @ dZ
    grads["b3"] = dZ.sum(axis=0)
    dh2 = dZ @ params["W3"].T
    da2 = dh2 * (1.0 - cache["h2"] ** 2)
    grads["W2"] = cache["h1"].T @ da2
    grads["b2"] = da2.sum(axis=0)
    dh1 = da2 @ params["W2"].T
    da1 = dh1 * (1.0 - cache["h1"] ** 2)
    grads["W1"] = cache["phi"].T @ da1
    grads["b1"] = da1.sum(axis=0)
    return grads


def class_z_grads(G: np.ndarray, params: dict, d_in: int) -> list[np.ndarray]:
    """Per-class encoder-output gradients grad_Z J_l = G[:, l] v_l'.

    Only the v-part of W enters, by the chain rule through
    f_il = w_l'phi_i + v_l'z_i.
    """
    V = params["Wt"][d_in:, :]
    return [np.outer(G[:, l], V[:, l]) for l in range(G.shape[1])]


def tau_step(z_grads: list[np.ndarray], J: np.ndarray, gamma: float,
             tau_prev: np.ndarray, beta: float,
             tol: float = 1e-10, max_updates: int = 50_000) -> np.ndarray:
    """Momentum tau update: tau = beta tau* + (1 - beta) tau_prev."""
    tau_star = solve_simplex_qp([g.ravel() for g in z_grads], J, gamma,
                                tol=tol, max_updates=max_updates)
    return beta * tau_star + (1.0 - beta) * np.asarray(tau_prev, dtype=np.float64)


def gamma_schedule(p: int, t_max: int, gamma_max: float, eps: float) -> float:
    """Cosine-annealed dual trade-off: (gamma_max/2)(1+cos(p pi/T)) + eps."""
    if not 0 <= p <= t_max:
        raise ValueError(f"epoch index {p} outside [0, {t_max}]")
    return 0.5 * gamma_max * (1.0 + np.cos(np.pi * p / t_max)) + eps


def cosine_lr(p: int, t_max: int, lr0: float, lr_min: float) -> float:
    """Cosine-annealed learning rate from lr0 down to lr_min."""
    if not 0 <= p <= t_max:
        raise ValueError(f"epoch index {p} outside [0, {t_max}]")
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + np.cos(np.pi * p / t_max))


def sgd_update(params: dict, grads: dict, bufs: dict, lr: float,
               momentum: float, weight_decay: float,
               skip: tuple[str, ...] = ()) -> None:
    """In-place SGD with momentum and coupled L2 weight decay.

    buf <- momentum buf + (grad + wd param); param <- param - lr buf.
    Names in ``skip`` are left untouched, buffers included (the
    freeze-by-masking rule for W during the tau-step).
    """
    for name, g in grads.items():
        if name in skip:
            continue
        step = g + weight_decay * params[name]
        bufs[name] = momentum * bufs[name] + step
        params[name] -= lr * bufs[name]


@dataclass
class DeepTraceRow:
    epoch: int
    batch: int
    objectives: np.ndarray
    taus: np.ndarray
    lr: float
    gamma: float


def deep_trace_to_csv(trace: list[DeepTraceRow], n_classes: int) -> str:
    """Render the per-batch trace with the fixed column layout
    epoch, batch, J_1..J_K, tau_1..tau_K, lr, gamma."""
    header = (["epoch", "batch"]
              + [f"J_{l + 1}" for l in range(n_classes)]
              + [f"tau_{l + 1}" for l in range(n_classes)]
              + ["lr", "gamma"])
    lines = [",".join(header)]
    for row in trace:
        cells = [str(row.epoch), str(row.batch)]
        cells += [fmt_float(v) for v in row.objectives]
        cells += [fmt_float(v) for v in row.taus]
        cells += [fmt_float(row.lr), fmt_float(row.gamma)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass
class DModelState:
    """Fitted deep model: parameters, prior map, Pareto weights, trace."""

    params: dict[str, np.ndarray]
    prior: np.ndarray | None
    tau: np.ndarray
    trace: list[DeepTraceRow]


def fit_deep_npsvc(
    X: np.ndarray,
    y: np.ndarray,
    config: DeepConfig = DeepConfig(),
    seed: int | np.random.SeedSequence = 0,
) -> DModelState:
    """Train deep NPSVC++ (array-level API; labels are 0-based codes).

    Expects pre-standardized features; the estimator wrapper owns the
    scaling. Raises DivergenceError with the epoch index if any batch
    objective stops being finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, d_in = X.shape
    K = int(y.max()) + 1 if y.size else 0
    if K < 2:
        raise DatasetError(f"need at least 2 classes, got {K}")
    if (np.bincount(y, minlength=K) == 0).any():
        raise DatasetError("every class needs at least one sample")

    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ss_init, ss_shuffle, ss_prior = seed_seq.spawn(3)
    rng_init = np.random.default_rng(ss_init)
    rng_shuffle = np.random.default_rng(ss_shuffle)

    prior = None
    if config.prior == "projection":
        rng_prior = np.random.default_rng(ss_prior)
        prior = rng_prior.standard_normal((d_in, d_in)) / np.sqrt(d_in)

    params = init_params(d_in, config.hidden, config.z_dim, K, rng_init)
    bufs = {name: np.zeros_like(v) for name, v in params.items()}
    tau = np.full(K, 1.0 / K)
    trace: list[DeepTraceRow] = []
    T = config.epochs

    for epoch in range(1, T + 1):
        lr = cosine_lr(epoch - 1, T, config.lr, config.lr_min)
        gamma = gamma_schedule(epoch - 1, T, config.gamma_max, config.gamma_eps)
        order = rng_shuffle.permutation(n)
        for batch_idx, start in enumerate(range(0, n, config.batch_size), start=1):
            rows = order[start:start + config.batch_size]
            Xb, yb = X[rows], y[rows]

            # theta-step: joint gradient step on sum_l tau_l J_l
            _, F, cache = forward(params, Xb, prior)
            J = batch_objectives(F, yb, config.c, config.margin, K)
            if not np.isfinite(J).all():
                raise DivergenceError(f"non-finite objective at epoch {epoch}")
            G = score_grads(F, yb, config.c, config.margin, K)
            grads = backward(params, cache, G * tau[None, :])
            sgd_update(params, grads, bufs, lr, config.momentum,
                       config.weight_decay)

            # tau-step: refresh objectives with W frozen, update tau,
            # then one encoder-only step under the new weights
            _, F2, cache2 = forward(params, Xb, prior)
            J2 = batch_objectives(F2, yb, config.c, config.margin, K)
            if not np.isfinite(J2).all():
                raise DivergenceError(f"non-finite objective at epoch {epoch}")
            G2 = score_grads(F2, yb, config.c, config.margin, K)
            tau = tau_step(class_z_grads(G2, params, d_in), J2, gamma, tau,
                           config.beta)
            grads2 = backward(params, cache2, G2 * tau[None, :])
            sgd_update(params, grads2, bufs, lr, config.momentum,
                       config.weight_decay, skip=("Wt",))

            trace.append(DeepTraceRow(epoch=epoch, batch=batch_idx,
                                      objectives=J2.copy(), taus=tau.copy(),
                                      lr=lr, gamma=gamma))

    return DModelState(params=params, prior=prior, tau=tau, trace=trace)


@dataclass
class DeepPredictor:
    """Immutable predictor: scores from the skip-connection hypothesis,
    labels by argmin |f_l| / delta_l with delta_l = ||W[:, l]||."""

    params: dict[str, np.ndarray]
    prior: np.ndarray | None
    deltas: np.ndarray
    n_features: int

    @property
    def n_classes(self) -> int:
        return self.params["Wt"].shape[1]

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or (X.shape[0] and X.shape[1] != self.n_features):
            raise ValueError(
                f"expected {self.n_features} features, got array of shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros((0, self.n_classes))
        _, F, _ = forward(self.params, X, self.prior)
        return F

    def distance_ratios(self, X: np.ndarray) -> np.ndarray:
        return np.abs(self.decision_values(X)) / self.deltas[None, :]

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        if self.n_classes < 2:
            raise ValueError("predictor needs at least 2 classes")
        return np.argmin(self.distance_ratios(X), axis=1)


def build_deep_predictor(state: DModelState, n_features: int) -> DeepPredictor:
    Wt = state.params["Wt"]
    deltas = np.sqrt(np.einsum("ij,ij->j", Wt, Wt))
    if not (deltas > 0).all():
        raise DegenerateModelError("zero weight column for some class")
    return DeepPredictor(params={k: v.copy() for k, v in state.params.items()},
                         prior=None if state.prior is None else state.prior.copy(),
                         deltas=deltas, n_features=n_features)


class DeepNPSVC(BaseEstimator, ClassifierMixin):
    """Deep nonparallel classifier with a skip-connection hypothesis.

    A small tanh MLP learns an embedding z(x) appended to a fixed prior
    map of the (internally standardized) inputs; per-class weights over
    the concatenation are trained jointly with Pareto weights tau using
    the two-phase mini-batch scheme.

    Parameters largely mirror DeepConfig; ``standardize`` controls the
    internal scaler and ``random_state`` seeds initialization, the
    shuffle order, and the optional prior projection.
    """

    def __init__(self, hidden: int = 32, z_dim: int = 8,
                 prior: str = "identity", epochs: int = 200,
                 batch_size: int = 64, lr: float = 0.01, lr_min: float = 1e-5,
                 momentum: float = 0.9, weight_decay: float = 1e-4,
                 beta: float = 0.85, gamma_max: float = 1.0,
                 gamma_eps: float = 1e-3, c: float = 1.0,
                 standardize: bool = True, random_state: int = 0):
        self.hidden = hidden
        self.z_dim = z_dim
        self.prior = prior
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.lr_min = lr_min
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.beta = beta
        self.gamma_max = gamma_max
        self.gamma_eps = gamma_eps
        self.c = c
        self.standardize = standardize
        self.random_state = random_state

    def _config(self) -> DeepConfig:
        return DeepConfig(hidden=self.hidden, z_dim=self.z_dim, prior=self.prior,
                          epochs=self.epochs, batch_size=self.batch_size,
                          lr=self.lr, lr_min=self.lr_min, momentum=self.momentum,
                          weight_decay=self.weight_decay, beta=self.beta,
                          gamma_max=self.gamma_max, gamma_eps=self.gamma_eps,
                          c=self.c)

    def fit(self, X, y):
        X, codes, self.classes_ = encode_labels(X, y, min_classes=2)
        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.scale_mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_std_ = np.where(std > 0, std, 1.0)
        else:
            self.scale_mean_ = np.zeros(X.shape[1])
            self.scale_std_ = np.ones(X.shape[1])
        Xs = (X - self.scale_mean_) / self.scale_std_
        state = fit_deep_npsvc(Xs, codes, self._config(), seed=self.random_state)
        self.state_ = state
        self.predictor_ = build_deep_predictor(state, X.shape[1])
        self.tau_ = state.tau
        self.trace_ = state.trace
        return self

    def _transform(self, X):
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return (X - self.scale_mean_) / self.scale_std_

    def decision_values(self, X) -> np.ndarray:
        return self.predictor_.decision_values(self._transform(X))

    def distance_ratios(self, X) -> np.ndarray:
        return self.predictor_.distance_ratios(self._transform(X))

    def predict(self, X):
        return self.classes_[self.predictor_.predict_codes(self._transform(X))]
