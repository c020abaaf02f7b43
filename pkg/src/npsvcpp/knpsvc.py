"""Kernel NPSVC++ trainer and the one-versus-rest TWSVM baseline.

Both classifiers learn one hyperplane per class, drawn toward its own
class and pushed away from the others, and predict by the nearest
hyperplane after per-class normalization. NPSVC++ couples the K
per-class objectives through a shared orthonormal projection P learned
on the Stiefel manifold and through Pareto weights tau from a
weighted-Chebyshev dual, alternating four updates per outer iteration:

1. U-step: per class, a box-constrained dual QP in empirical
   coordinates (closed form plus multipliers).
2. V-step: closed-form subspace coefficients.
3. P-step: generalized power iteration for the projection.
4. tau-step: a simplex QP over Riemannian gradients followed by one
   projected gradient descent step on P.

Everything runs in empirical coordinates. A sample is row psi_i of a
Gram factor Psi (Psi @ Psi.T = K), so linear and factored kernels share
the code path. Class labels are 0-based integer codes inside this
module; estimators translate to and from original labels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning

from .errors import DatasetError, DegenerateModelError, ShapeMismatchError
from .graphs import knn_graph, normalized_laplacian
from .ioutil import fmt_float
from .kernels import (
    GramFactor,
    KernelSpec,
    gaussian_bandwidth,
    gram_factor,
    kernel_matrix,
    resolve_bandwidth,
)
from .solvers import (
    gpi_maximize,
    power_iteration_norm,
    solve_box_qp,
    solve_simplex_qp,
    stiefel_project,
)
from .validation import check_feature_matrix, encode_labels

# Rayleigh-quotient estimates of sigma_max are lower bounds; pad so that
# H = sigma I - mu Psi'L Psi stays positive definite.
POWER_NORM_SAFETY = 1e-3


@dataclass(frozen=True)
class KnpsvcConfig:
    """Hyperparameters of the kernel trainer.

    Defaults follow the package-wide ledger: c = 1, r1 = r2 = mu =
    gamma = 0.1, eta = 0.01, subspace dimension min(4K, p). Preference
    weights are fixed to ones and the margin to 1.
    """

    c: float = 1.0
    r1: float = 0.1
    r2: float = 0.1
    mu: float = 0.1
    gamma: float = 0.1
    eta: float = 0.01
    dim: int | None = None
    max_outer: int = 30
    tol_outer: float = 1e-4
    qp_tol: float = 1e-8
    qp_max_sweeps: int = 10_000
    simplex_tol: float = 1e-10
    simplex_max_updates: int = 50_000
    # The outer objectives see P only through its column space, so the
    # P-step needs an objective plateau, not a tight fixed point; basis
    # rotation inside near-degenerate eigenspaces of H converges far
    # slower than the objective and is irrelevant here.
    gpi_tol: float = 1e-7
    gpi_max_iter: int = 5_000
    graph_k: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        for name in ("r1", "r2", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mu", "gamma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.dim is not None and self.dim < 1:
            raise ValueError(f"dim must be at least 1, got {self.dim}")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass
class ClassBlocks:
    """Per-class Woodbury blocks shared by the U-step duals.

    For class l with own rows Psi_l and remaining rows Psi_rest:

        Q_PsiPsi = (1/r1) [I - Psi_l' (r1 I + Psi_l Psi_l')^{-1} Psi_l]
                 = (Psi_l' Psi_l + r1 I)^{-1}
        Q_KPsi   = Psi_rest Q_PsiPsi
        Q_KK     = Psi_rest Q_PsiPsi Psi_rest'

    Only the small (n_l x n_l) Cholesky factor and the dense Q_KK (used
    by coordinate descent) are stored; Q_PsiPsi and Q_KPsi are applied
    as operators or materialized on demand for verification.
    """

    psi: np.ndarray
    r1: float
    class_rows: list[np.ndarray]
    rest_rows: list[np.ndarray]
    chol: list[np.ndarray | None]
    q_kk: list[np.ndarray]

    @property
    def n_classes(self) -> int:
        return len(self.class_rows)

    def apply_q_psipsi(self, l: int, w: np.ndarray) -> np.ndarray:
        """Q_PsiPsi^{(l)} @ w without materializing the p x p block."""
        rows = self.class_rows[l]
        if rows.size == 0:
            return w / self.r1
        psi_l = self.psi[rows]
        t = cho_solve((self.chol[l], True), psi_l @ w)
        return (w - psi_l.T @ t) / self.r1

    def q_psipsi(self, l: int) -> np.ndarray:
        """Dense Q_PsiPsi^{(l)}; intended for small problems and tests."""
        return self.apply_q_psipsi(l, np.eye(self.psi.shape[1]))

    def q_kpsi(self, l: int) -> np.ndarray:
        """Dense Q_KPsi^{(l)} = Psi_rest Q_PsiPsi."""
        return self.psi[self.rest_rows[l]] @ self.q_psipsi(l)


def precompute_class_blocks(
    psi: np.ndarray, y: np.ndarray, r1: float, n_classes: int | None = None
) -> ClassBlocks:
    """Build the per-class blocks of the U-step duals.

    Parameters
    ----------
    psi : ndarray of shape (n, p)
        Gram factor rows (or the raw sample matrix for linear kernels).
    y : ndarray of shape (n,)
        0-based integer class codes.
    r1 : float
        Positive regularizer; (r1 I + Psi_l Psi_l') is then always SPD,
        so the n_l x n_l Cholesky cannot fail for valid input.
    n_classes : int, optional
        Total class count (defaults to max(y) + 1). Classes without rows
        get Q_PsiPsi = I / r1.
    """
    psi = np.asarray(psi, dtype=np.float64)
    y = np.asarray(y)
    if not r1 > 0:
        raise ValueError(f"r1 must be positive, got {r1}")
    K = int(n_classes) if n_classes is not None else int(y.max()) + 1
    class_rows: list[np.ndarray] = []
    rest_rows: list[np.ndarray] = []
    chol: list[np.ndarray | None] = []
    q_kk: list[np.ndarray] = []
    for l in range(K):
        rows = np.flatnonzero(y == l)
        rest = np.flatnonzero(y != l)
        class_rows.append(rows)
        rest_rows.append(rest)
        psi_rest = psi[rest]
        S = psi_rest @ psi_rest.T
        if rows.size:
            psi_l = psi[rows]
            A = r1 * np.eye(rows.size) + psi_l @ psi_l.T
            Lf = np.linalg.cholesky(A)
            T = solve_triangular(Lf, psi_l @ psi_rest.T, lower=True)
            M = (S - T.T @ T) / r1
            chol.append(Lf)
        else:
            M = S / r1
            chol.append(None)
        q_kk.append(0.5 * (M + M.T))
    return ClassBlocks(psi=psi, r1=r1, class_rows=class_rows, rest_rows=rest_rows,
                       chol=chol, q_kk=q_kk)


def update_u(
    blocks: ClassBlocks,
    l: int,
    P: np.ndarray | None,
    v_l: np.ndarray | None,
    c: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    lam0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class U-step: dual box QP plus the closed-form recovery.

    Solves min over lam in [0, c]^{n_rest} of
    (1/2) lam' Q_KK lam + (r1 Q_KPsi P v_l - 1)' lam and returns

        u_l = Q_PsiPsi (r1 P v_l + Psi_rest' lam) ,

    the minimizer of the per-class primal
    (1/2)||Psi_l u||^2 + c sum_rest [1 - u'psi_i]_+ + (r1/2)||u - P v_l||^2.

    ``P = None`` or ``v_l = None`` means P v_l = 0 (the TWSVM path).
    """
    p = blocks.psi.shape[1]
    if P is None or v_l is None:
        w = np.zeros(p)
    else:
        w = blocks.r1 * (P @ v_l)
    qw = blocks.apply_q_psipsi(l, w)
    rest = blocks.rest_rows[l]
    psi_rest = blocks.psi[rest]
    b = psi_rest @ qw - 1.0
    lam = solve_box_qp(blocks.q_kk[l], b, c, tol=tol, max_sweeps=max_sweeps, x0=lam0)
    u_l = blocks.apply_q_psipsi(l, w + psi_rest.T @ lam)
    return u_l, lam


def update_v(P: np.ndarray, U: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """Closed-form V-step: v_l = (r1 / (r1 + r2)) P' u_l, column-wise."""
    return (r1 / (r1 + r2)) * (P.T @ U)


def update_p(
    H,
    U: np.ndarray,
    V: np.ndarray,
    tau: np.ndarray,
    r1: float,
    P_prev: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 1_000,
) -> np.ndarray:
    """P-step: GPI on Tr(P'HP) + 2 Tr(P'E) with E = r1 U diag(tau) V'.

    ``H`` is the positive definite sigma I - mu Psi'L Psi, passed as a
    matrix or as a callable applying it.
    """
    E = r1 * (U * np.asarray(tau)[None, :]) @ V.T
    return gpi_maximize(H, E, P_prev, tol=tol, max_iter=max_iter)


def riemannian_from_euclidean(P: np.ndarray, Ge: np.ndarray) -> np.ndarray:
    """Riemannian gradient on the Stiefel manifold from a Euclidean one:
    (Ge P' - P Ge') P."""
    return Ge @ (P.T @ P) - P @ (Ge.T @ P)


def riemannian_grad_p(
    P: np.ndarray,
    u_l: np.ndarray,
    v_l: np.ndarray,
    psi: np.ndarray | None = None,
    L: np.ndarray | None = None,
    mu: float = 0.0,
    r1: float = 1.0,
    lap_psi: np.ndarray | None = None,
) -> np.ndarray:
    """Riemannian gradient of J_l with respect to P.

    The Euclidean gradient of the P-dependent terms is
    Ge = mu Psi'L Psi P - r1 u_l v_l'. ``lap_psi`` may carry a
    precomputed L @ Psi to avoid the n x n product.
    """
    Ge = -r1 * np.outer(u_l, v_l)
    if mu > 0.0:
        if lap_psi is None:
            if psi is None or L is None:
                raise ValueError("mu > 0 requires psi and L (or lap_psi)")
            lap_psi = L @ psi
        Ge = Ge + mu * (psi.T @ (lap_psi @ P))
    return riemannian_from_euclidean(P, Ge)


def objectives(
    psi: np.ndarray,
    y: np.ndarray,
    U: np.ndarray,
    V: np.ndarray,
    P: np.ndarray,
    c: float,
    r1: float,
    r2: float,
    mu: float = 0.0,
    L: np.ndarray | None = None,
    lap_psi: np.ndarray | None = None,
) -> np.ndarray:
    """Per-class objectives J_l at the given state.

    J_l = (1/2)||Psi_l u_l||^2 + c sum_{y_i != l} [1 - u_l'psi_i]_+
        + (r1/2)||u_l - P v_l||^2 + (r2/2)||v_l||^2
        + (mu/2) Tr(P'Psi'L Psi P)

    The manifold term is shared, so it is identical across classes.
    """
    psi = np.asarray(psi, dtype=np.float64)
    y = np.asarray(y)
    K = U.shape[1]
    F = psi @ U
    diff = U - P @ V
    shared = 0.0
    if mu > 0.0 and (L is not None or lap_psi is not None):
        if lap_psi is None:
            lap_psi = L @ psi
        psi_p = psi @ P
        shared = 0.5 * mu * float(np.vdot(psi_p, lap_psi @ P))
    J = np.empty(K)
    for l in range(K):
        own = y == l
        f_l = F[:, l]
        sim = 0.5 * float(f_l[own] @ f_l[own])
        hinge = float(np.maximum(0.0, 1.0 - f_l[~own]).sum())
        J[l] = (sim + c * hinge
                + 0.5 * r1 * float(diff[:, l] @ diff[:, l])
                + 0.5 * r2 * float(V[:, l] @ V[:, l])
                + shared)
    return J


def update_tau_and_descend(
    P: np.ndarray,
    grads: list[np.ndarray],
    J: np.ndarray,
    gamma: float,
    eta: float,
    simplex_tol: float = 1e-10,
    simplex_max_updates: int = 50_000,
) -> tuple[np.ndarray, np.ndarray]:
    """tau-step: simplex QP over flattened Riemannian gradients, then one
    projected gradient descent step on P with the combined direction."""
    tau = solve_simplex_qp([g.ravel() for g in grads], J, gamma,
                           tol=simplex_tol, max_updates=simplex_max_updates)
    combo = np.zeros_like(P)
    for t_l, g_l in zip(tau, grads):
        combo += t_l * g_l
    P_new = stiefel_project(P - eta * combo)
    return tau, P_new


@dataclass
class TraceRow:
    iteration: int
    primal: float
    dual: float
    gap: float
    objectives: np.ndarray
    taus: np.ndarray
    orth_residual: float


def trace_to_csv(trace: list[TraceRow], n_classes: int) -> str:
    """Render the outer-iteration trace with the fixed column layout
    iter, primal, dual, gap, J_1..J_K, tau_1..tau_K, orth_residual."""
    header = (["iter", "primal", "dual", "gap"]
              + [f"J_{l + 1}" for l in range(n_classes)]
              + [f"tau_{l + 1}" for l in range(n_classes)]
              + ["orth_residual"])
    lines = [",".join(header)]
    for row in trace:
        cells = [str(row.iteration), fmt_float(row.primal), fmt_float(row.dual),
                 fmt_float(row.gap)]
        cells += [fmt_float(v) for v in row.objectives]
        cells += [fmt_float(v) for v in row.taus]
        cells.append(fmt_float(row.orth_residual))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass
class KModelState:
    """Full state of a fitted kernel NPSVC++ model."""

    U: np.ndarray
    V: np.ndarray
    P: np.ndarray
    tau: np.ndarray
    objectives: np.ndarray
    trace: list[TraceRow]
    converged: bool
    dim: int
    sigma: float


@dataclass
class KernelPredictor:
    """Immutable predictor for the kernel-family models.

    For factored kernels the decision values are f_l(x) =
    sum_i B_il kernel(x_i, x); for the linear fast path they are
    u_l'x directly. Labels are argmin_l |f_l(x)| / delta_l with ties
    broken toward the lowest class index.
    """

    spec: KernelSpec
    expansion: bool
    coef: np.ndarray
    deltas: np.ndarray
    X_train: np.ndarray | None
    n_features: int

    @property
    def n_classes(self) -> int:
        return self.coef.shape[1]

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatchError(
                f"expected {self.n_features} features, got array of shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros((0, self.n_classes))
        if self.expansion:
            return kernel_matrix(self.spec, X, self.X_train) @ self.coef
        return X @ self.coef

    def distance_ratios(self, X: np.ndarray) -> np.ndarray:
        """Per-class normalized distances |f_l(x)| / delta_l."""
        return np.abs(self.decision_values(X)) / self.deltas[None, :]

    def predict_codes(self, X: np.ndarray) -> np.ndarray:
        if self.n_classes < 2:
            raise ValueError("predictor needs at least 2 classes")
        return np.argmin(self.distance_ratios(X), axis=1)


def _graph_weight_spec(spec: KernelSpec, X: np.ndarray) -> KernelSpec:
    """Graph weights are always Gaussian; linear models fall back to the
    bandwidth heuristic so the adjacency stays within [0, 1]."""
    if spec.kind == "gaussian":
        return spec
    return KernelSpec("gaussian", bandwidth=gaussian_bandwidth(X))


def _laplacian_pieces(X, spec, config, psi):
    """Laplacian operator data for the manifold term, or inert values
    when mu = 0."""
    if config.mu == 0.0:
        return None, None
    weight_spec = _graph_weight_spec(spec, X)
    G = knn_graph(X, weight_spec, k=config.graph_k)
    L = normalized_laplacian(G)
    lap_psi = L @ psi
    return L, lap_psi


def fit_kernel_npsvc(
    X: np.ndarray,
    y: np.ndarray,
    spec: KernelSpec,
    config: KnpsvcConfig = KnpsvcConfig(),
    seed: int | np.random.SeedSequence = 0,
    gram: GramFactor | None = None,
) -> tuple[KModelState, KernelPredictor]:
    """Train kernel NPSVC++ (array-level API; labels are 0-based codes).

    Alternates the four updates until the relative change of the dual
    objective sum tau_l J_l falls to ``config.tol_outer`` or
    ``config.max_outer`` iterations elapse. Non-convergence returns the
    model anyway, flagged on the state and by a ConvergenceWarning.

    ``gram`` injects a prebuilt Gram factor (used to drive the linear
    Gram through the factored path); by default it is built from
    ``spec``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n = X.shape[0]
    K = int(y.max()) + 1 if y.size else 0
    counts = np.bincount(y, minlength=K) if y.size else np.zeros(0, dtype=int)
    if K < 2:
        raise DatasetError(f"need at least 2 classes, got {K}")
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DatasetError(f"class code {missing} has no samples")

    spec = resolve_bandwidth(spec, X)
    if gram is None:
        gram = gram_factor(X, spec)
    psi = gram.psi
    p = gram.p
    d = config.dim if config.dim is not None else min(4 * K, p)
    if not 1 <= d <= p:
        raise ValueError(f"subspace dimension d={d} outside valid range [1, {p}]")

    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ss_init, ss_power = seed_seq.spawn(2)

    L, lap_psi = _laplacian_pieces(X, spec, config, psi)
    if config.mu > 0.0:
        rng_power = np.random.default_rng(ss_power)
        lam_max = power_iteration_norm(
            lambda v: psi.T @ (lap_psi @ v), p, rng_power)
        sigma = 1.0 + config.mu * lam_max * (1.0 + POWER_NORM_SAFETY)

        def h_apply(M):
            return sigma * M - config.mu * (psi.T @ (lap_psi @ M))
    else:
        sigma = 1.0

        def h_apply(M):
            return M

    blocks = precompute_class_blocks(psi, y, config.r1, n_classes=K)
    rng_init = np.random.default_rng(ss_init)
    P = stiefel_project(rng_init.standard_normal((p, d)))
    U = np.zeros((p, K))
    V = np.zeros((d, K))
    tau = np.full(K, 1.0 / K)
    lams: list[np.ndarray | None] = [None] * K

    trace: list[TraceRow] = []
    converged = False
    prev_dual = None
    J = np.zeros(K)
    for it in range(1, config.max_outer + 1):
        for l in range(K):
            u_l, lam_l = update_u(blocks, l, P, V[:, l], config.c,
                                  tol=config.qp_tol, max_sweeps=config.qp_max_sweeps,
                                  lam0=lams[l])
            U[:, l] = u_l
            lams[l] = lam_l
        V = update_v(P, U, config.r1, config.r2)
        P = update_p(h_apply, U, V, tau, config.r1, P,
                     tol=config.gpi_tol, max_iter=config.gpi_max_iter)
        J = objectives(psi, y, U, V, P, config.c, config.r1, config.r2,
                       mu=config.mu, lap_psi=lap_psi)
        grads = [riemannian_grad_p(P, U[:, l], V[:, l], psi=psi, mu=config.mu,
                                   r1=config.r1, lap_psi=lap_psi)
                 for l in range(K)]
        tau, P = update_tau_and_descend(P, grads, J, config.gamma, config.eta,
                                        simplex_tol=config.simplex_tol,
                                        simplex_max_updates=config.simplex_max_updates)
        orth = float(np.max(np.abs(P.T @ P - np.eye(d))))
        dual = float(tau @ J)
        primal = float(J.max())
        trace.append(TraceRow(iteration=it, primal=primal, dual=dual,
                              gap=primal - dual, objectives=J.copy(),
                              taus=tau.copy(), orth_residual=orth))
        if prev_dual is not None:
            if abs(dual - prev_dual) <= config.tol_outer * max(abs(prev_dual), 1e-12):
                converged = True
                break
        prev_dual = dual
    if not converged:
        warnings.warn(
            f"kernel NPSVC++ stopped at max_outer={config.max_outer} without "
            f"meeting tol_outer={config.tol_outer:g}", ConvergenceWarning)

    state = KModelState(U=U, V=V, P=P, tau=tau, objectives=J, trace=trace,
                        converged=converged, dim=d, sigma=sigma)
    predictor = _build_predictor(gram, X, spec, U, deltas=_knpsvc_deltas(U, V, P))
    return state, predictor


def _knpsvc_deltas(U: np.ndarray, V: np.ndarray, P: np.ndarray) -> np.ndarray:
    diff = U - P @ V
    deltas = np.sqrt(np.einsum("ij,ij->j", diff, diff) + np.einsum("ij,ij->j", V, V))
    if not (deltas > 0).all():
        raise DegenerateModelError("zero distance denominator for some class")
    return deltas


def _build_predictor(gram: GramFactor, X: np.ndarray, spec: KernelSpec,
                     U: np.ndarray, deltas: np.ndarray) -> KernelPredictor:
    if gram.factored:
        # B = Psi^{-T} U through triangular solves; Psi is lower-triangular
        coef = solve_triangular(gram.psi, U, lower=True, trans="T")
        return KernelPredictor(spec=spec, expansion=True, coef=coef, deltas=deltas,
                               X_train=X.copy(), n_features=X.shape[1])
    return KernelPredictor(spec=spec, expansion=False, coef=U.copy(), deltas=deltas,
                           X_train=None, n_features=X.shape[1])


def fit_twsvm(
    X: np.ndarray,
    y: np.ndarray,
    spec: KernelSpec,
    c: float = 1.0,
    r: float = 0.1,
    qp_tol: float = 1e-8,
    qp_max_sweeps: int = 10_000,
    gram: GramFactor | None = None,
) -> tuple[np.ndarray, KernelPredictor]:
    """Train the one-versus-rest TWSVM baseline.

    Per class l solves, in empirical coordinates,
    min (1/2)||Psi_l u||^2 + (r/2)||u||^2 + c sum_rest [1 - u'psi_i]_+
    through the same dual box QP as the U-step with the subspace term
    absent. Prediction normalizes by delta_l = ||u_l||.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    K = int(y.max()) + 1 if y.size else 0
    if K < 2:
        raise DatasetError(f"need at least 2 classes, got {K}")
    if (np.bincount(y, minlength=K) == 0).any():
        raise DatasetError("every class needs at least one sample")
    spec = resolve_bandwidth(spec, X)
    if gram is None:
        gram = gram_factor(X, spec)
    blocks = precompute_class_blocks(gram.psi, y, r, n_classes=K)
    U = np.zeros((gram.p, K))
    for l in range(K):
        u_l, _ = update_u(blocks, l, None, None, c, tol=qp_tol,
                          max_sweeps=qp_max_sweeps)
        U[:, l] = u_l
    deltas = np.sqrt(np.einsum("ij,ij->j", U, U))
    if not (deltas > 0).all():
        raise DegenerateModelError("zero weight vector for some class")
    predictor = _build_predictor(gram, X, spec, U, deltas=deltas)
    return U, predictor


class KernelNPSVC(BaseEstimator, ClassifierMixin):
    """Nonparallel kernel classifier with a shared Pareto-weighted subspace.

    One hyperplane is learned per class, coupled across classes by an
    orthonormal projection optimized on the Stiefel manifold and by
    Pareto weights from a weighted-Chebyshev dual. Prediction assigns
    the class whose normalized hyperplane distance is smallest.

    Parameters
    ----------
    kernel : {"gaussian", "linear"}
    bandwidth : float, optional
        Gaussian bandwidth; ``None`` resolves the mean squared pairwise
        distance heuristic on the training split.
    jitter : float
        Gram diagonal regularizer; 0 selects the automatic schedule.
    c : float
        Dissimilarity hinge weight.
    r1, r2 : float
        Weight and subspace regularizers.
    mu : float
        Manifold (Laplacian) regularization weight; 0 disables the graph.
    gamma : float
        Dual trade-off in the tau-step; keep positive for training.
    eta : float
        Projected gradient descent step size.
    dim : int, optional
        Shared subspace dimension; defaults to min(4 K, p).
    max_outer : int
    tol : float
        Relative dual-objective change declaring outer convergence.
    graph_k : int
        Neighbor count of the Laplacian graph; 0 means floor(log2 n).
    random_state : int
        Seed for the projection initialization (and the operator-norm
        estimate); all internal randomness derives from it.

    Attributes
    ----------
    classes_ : ndarray of original labels.
    state_ : KModelState with U, V, P, tau and the iteration trace.
    converged_ : bool
    """

    def __init__(self, kernel: str = "gaussian", bandwidth: float | None = None,
                 jitter: float = 0.0, c: float = 1.0, r1: float = 0.1,
                 r2: float = 0.1, mu: float = 0.1, gamma: float = 0.1,
                 eta: float = 0.01, dim: int | None = None, max_outer: int = 30,
                 tol: float = 1e-4, graph_k: int = 0, random_state: int = 0):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.jitter = jitter
        self.c = c
        self.r1 = r1
        self.r2 = r2
        self.mu = mu
        self.gamma = gamma
        self.eta = eta
        self.dim = dim
        self.max_outer = max_outer
        self.tol = tol
        self.graph_k = graph_k
        self.random_state = random_state

    def _config(self) -> KnpsvcConfig:
        return KnpsvcConfig(c=self.c, r1=self.r1, r2=self.r2, mu=self.mu,
                            gamma=self.gamma, eta=self.eta, dim=self.dim,
                            max_outer=self.max_outer, tol_outer=self.tol,
                            graph_k=self.graph_k)

    def fit(self, X, y):
        X, codes, self.classes_ = encode_labels(X, y, min_classes=2)
        self.n_features_in_ = X.shape[1]
        spec = KernelSpec(self.kernel, bandwidth=self.bandwidth, jitter=self.jitter)
        state, predictor = fit_kernel_npsvc(
            X, codes, spec, self._config(), seed=self.random_state)
        self.state_ = state
        self.predictor_ = predictor
        self.converged_ = state.converged
        self.tau_ = state.tau
        self.trace_ = state.trace
        return self

    def decision_values(self, X) -> np.ndarray:
        """Raw per-class decision values f_l(x), shape (n, K)."""
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.predictor_.decision_values(X)

    def distance_ratios(self, X) -> np.ndarray:
        """Normalized distances |f_l(x)| / delta_l used by predict."""
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.predictor_.distance_ratios(X)

    def predict(self, X):
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.classes_[self.predictor_.predict_codes(X)]


class TWSVM(BaseEstimator, ClassifierMixin):
    """One-versus-rest twin SVM baseline.

    Per class, pulls its hyperplane toward the class with a squared
    loss and away from the rest with a hinge, solved as independent
    dual box QPs in empirical coordinates. Prediction picks the
    nearest hyperplane scaled by ||u_l||.

    Parameters mirror KernelNPSVC where they overlap; ``r`` is the
    ridge regularizer of each per-class problem.
    """

    def __init__(self, kernel: str = "gaussian", bandwidth: float | None = None,
                 jitter: float = 0.0, c: float = 1.0, r: float = 0.1):
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.jitter = jitter
        self.c = c
        self.r = r

    def fit(self, X, y):
        X, codes, self.classes_ = encode_labels(X, y, min_classes=2)
        self.n_features_in_ = X.shape[1]
        spec = KernelSpec(self.kernel, bandwidth=self.bandwidth, jitter=self.jitter)
        U, predictor = fit_twsvm(X, codes, spec, c=self.c, r=self.r)
        self.U_ = U
        self.predictor_ = predictor
        return self

    def decision_values(self, X) -> np.ndarray:
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.predictor_.decision_values(X)

    def distance_ratios(self, X) -> np.ndarray:
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.predictor_.distance_ratios(X)

    def predict(self, X):
        X = check_feature_matrix(X, self.n_features_in_, estimator=self)
        return self.classes_[self.predictor_.predict_codes(X)]
