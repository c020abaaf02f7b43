"""Constrained quadratic subproblem solvers shared by both trainers.

Four primitives:

- ``solve_box_qp``: min (1/2) x'Qx + b'x over the box [0, c]^q, by
  cyclic coordinate descent with exact one-dimensional minimization.
- ``solve_simplex_qp``: min (1/2) ||sum tau_l g_l||^2 - gamma sum tau_l J_l
  over the probability simplex, by greedy pairwise coordinate descent.
- ``stiefel_project``: nearest orthonormal matrix via the compact SVD.
- ``gpi_maximize``: generalized power iteration maximizing
  Tr(P'HP) + 2 Tr(P'E) over the Stiefel manifold.

All functions are pure and deterministic.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NonConvergedError, RankDeficiencyError

RANK_RTOL = 1e-12


def solve_box_qp(
    Q: np.ndarray,
    b: np.ndarray,
    upper: float,
    tol: float = 1e-8,
    max_sweeps: int = 10_000,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize (1/2) x'Qx + b'x subject to 0 <= x <= upper.

    Cyclic clipped coordinate descent; each coordinate is minimized
    exactly and clipped to the box. Convergence is declared when the
    projected-gradient residual ||x - clip(x - (Qx + b), 0, upper)||_inf
    drops to ``tol``.

    Parameters
    ----------
    Q : ndarray of shape (q, q)
        Symmetric positive semidefinite.
    b : ndarray of shape (q,)
    upper : float
        Box upper bound c >= 0 (c = 0 collapses the box to the origin).
    x0 : ndarray, optional
        Warm start, clipped into the box.

    Raises
    ------
    NonConvergedError
        If ``max_sweeps`` full sweeps finish with residual > tol.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    q = b.shape[0]
    if Q.shape != (q, q):
        raise ValueError(f"Q shape {Q.shape} does not match b length {q}")
    if upper < 0:
        raise ValueError(f"upper bound must be non-negative, got {upper}")
    if q == 0:
        return np.zeros(0)

    if x0 is None:
        x = np.zeros(q)
    else:
        x = np.clip(np.asarray(x0, dtype=np.float64), 0.0, upper).copy()
    diag = np.diag(Q).copy()
    g = Q @ x + b
    residual = np.inf
    for sweep in range(max_sweeps):
        for i in range(q):
            gi = g[i]
            di = diag[i]
            xi = x[i]
            if di > 0.0:
                xn = xi - gi / di
                if xn < 0.0:
                    xn = 0.0
                elif xn > upper:
                    xn = upper
            else:
                # zero curvature: the 1-d objective is linear in x_i
                if gi > 0.0:
                    xn = 0.0
                elif gi < 0.0:
                    xn = upper
                else:
                    xn = xi
            delta = xn - xi
            if delta != 0.0:
                g += delta * Q[i]
                x[i] = xn
        residual = float(np.max(np.abs(x - np.clip(x - g, 0.0, upper))))
        if residual <= tol:
            return x
        if (sweep + 1) % 64 == 0:
            g = Q @ x + b  # shed accumulated rounding drift
    raise NonConvergedError(
        f"box QP did not reach tol={tol:g} within {max_sweeps} sweeps "
        f"(residual {residual:.3e})",
        residual=residual,
    )


def simplex_qp_objective(
    grads: Sequence[np.ndarray] | np.ndarray,
    losses: np.ndarray,
    gamma: float,
    tau: np.ndarray,
) -> float:
    """Objective (1/2) ||sum tau_l g_l||^2 - gamma sum tau_l J_l."""
    G = _gradient_gram(grads)
    losses = np.asarray(losses, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    return float(0.5 * tau @ G @ tau - gamma * losses @ tau)


def _gradient_gram(grads: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    stack = np.asarray([np.asarray(g, dtype=np.float64).ravel() for g in grads])
    G = stack @ stack.T
    return 0.5 * (G + G.T)


def solve_simplex_qp(
    grads: Sequence[np.ndarray] | np.ndarray,
    losses: np.ndarray,
    gamma: float = 0.0,
    tol: float = 1e-10,
    max_updates: int = 50_000,
) -> np.ndarray:
    """Minimize (1/2) ||sum_l tau_l g_l||^2 - gamma sum_l tau_l J_l over
    the probability simplex.

    Greedy pairwise coordinate descent: each update picks the pair
    (steepest descent coordinate, steepest ascent coordinate among the
    currently positive ones) by reduced gradient and moves mass between
    them with an exact line search. Stops when the reduced-gradient
    stationarity gap is at most ``tol``.

    Parameters
    ----------
    grads : sequence of K arrays (any shapes, flattened internally)
    losses : ndarray of shape (K,)
        Per-objective values J_l.
    gamma : float
        Non-negative trade-off between the norm term and the loss term.

    Returns
    -------
    tau : ndarray of shape (K,), non-negative, summing to one.

    Raises
    ------
    NonConvergedError
        If ``max_updates`` pair updates finish above tolerance; carries
        the final objective value.
    """
    losses = np.asarray(losses, dtype=np.float64)
    K = losses.shape[0]
    if K < 1:
        raise ValueError("at least one objective is required")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if K == 1:
        return np.ones(1)

    G = _gradient_gram(grads)
    if G.shape[0] != K:
        raise ValueError(f"{G.shape[0]} gradients but {K} losses")
    tau = np.full(K, 1.0 / K)
    grad = G @ tau - gamma * losses
    gap = np.inf
    for _ in range(max_updates):
        i = int(np.argmin(grad))
        positive = tau > 0.0
        grad_pos = np.where(positive, grad, -np.inf)
        j = int(np.argmax(grad_pos))
        gap = float(grad[j] - grad[i])
        if gap <= tol:
            break
        curt = G[i, i] - 2.0 * G[i, j] + G[j, j]
        step = tau[j] if curt <= 0.0 else min(tau[j], gap / curt)
        if step <= 0.0:
            break
        if step == tau[j]:
            tau[j] = 0.0
        else:
            tau[j] -= step
        tau[i] += step
        grad += step * (G[:, i] - G[:, j])
    else:
        obj = float(0.5 * tau @ G @ tau - gamma * losses @ tau)
        raise NonConvergedError(
            f"simplex QP did not reach tol={tol:g} within {max_updates} updates "
            f"(gap {gap:.3e}, objective {obj:.6e})",
            residual=obj,
        )
    tau = np.maximum(tau, 0.0)
    return tau / tau.sum()


def stiefel_project(A: np.ndarray) -> np.ndarray:
    """Project onto the Stiefel manifold: the orthonormal polar factor.

    With compact SVD A = U S V', returns P = U V', the nearest matrix
    with orthonormal columns. Left singular vectors are sign-normalized
    (largest-magnitude entry positive) for determinism.

    Raises
    ------
    RankDeficiencyError
        If sigma_min < 1e-12 * sigma_max (includes the zero matrix).
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={A.ndim}")
    if A.shape[1] > A.shape[0]:
        raise ValueError(f"need d <= p, got shape {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = float(s[0]) if s.size else 0.0
    smin = float(s[-1]) if s.size else 0.0
    if smax <= 0.0 or smin < RANK_RTOL * smax:
        raise RankDeficiencyError(
            f"rank-deficient input to Stiefel projection "
            f"(sigma_min={smin:.3e}, sigma_max={smax:.3e})"
        )
    flip = U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])] < 0
    U[:, flip] *= -1.0
    Vt[flip, :] *= -1.0
    return U @ Vt


def gpi_maximize(
    H: np.ndarray | Callable[[np.ndarray], np.ndarray],
    E: np.ndarray,
    P0: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 1_000,
    return_objectives: bool = False,
):
    """Generalized power iteration for max Tr(P'HP) + 2 Tr(P'E) over
    orthonormal P.

    Iterates P <- stiefel_project(H P + E). For positive definite H the
    objective sequence is non-decreasing; iteration stops when its
    relative change is at most ``tol``.

    Parameters
    ----------
    H : ndarray of shape (p, p), or callable
        Positive definite matrix, or a function applying it to a (p, d)
        matrix.
    E : ndarray of shape (p, d)
    P0 : ndarray of shape (p, d)
        Orthonormal start.
    return_objectives : bool
        Also return the list of per-iteration objective values.

    Raises
    ------
    NonConvergedError
        If ``max_iter`` iterations finish above tolerance.
    RankDeficiencyError
        Propagated from the projection.
    """
    E = np.asarray(E, dtype=np.float64)
    P = np.asarray(P0, dtype=np.float64).copy()
    apply_h = H if callable(H) else (lambda M: H @ M)
    objectives: list[float] = []
    prev = np.nan
    for _ in range(max_iter):
        HP = apply_h(P)
        obj = float(np.vdot(P, HP) + 2.0 * np.vdot(P, E))
        objectives.append(obj)
        if len(objectives) >= 2 and abs(obj - prev) <= tol * max(1.0, abs(prev)):
            return (P, objectives) if return_objectives else P
        prev = obj
        P = stiefel_project(HP + E)
    raise NonConvergedError(
        f"GPI did not converge within {max_iter} iterations "
        f"(last objective {prev:.6e})",
        residual=prev,
    )


def power_iteration_norm(
    apply_a: Callable[[np.ndarray], np.ndarray],
    dim: int,
    rng: np.random.Generator,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Returns the final Rayleigh quotient, a lower bound on the true
    eigenvalue; callers that need an upper bound must pad the result.
    """
    v = rng.standard_normal(dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return 0.0
    v /= norm
    lam = 0.0
    for _ in range(max_iter):
        w = apply_a(v)
        lam_new = float(v @ w)
        wnorm = float(np.linalg.norm(w))
        if wnorm == 0.0:
            return 0.0
        v = w / wnorm
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam)):
            return lam_new
        lam = lam_new
    return lam
