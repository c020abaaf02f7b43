"""Kernel evaluation, bandwidth selection, and Gram-factor construction.

Trainers in this package never touch the Gram matrix directly. Every
training sample is represented by one row psi_i of a factor Psi with
Psi @ Psi.T equal to the (jittered) Gram matrix, so linear models
(Psi = X) and factored kernels (Psi = lower Cholesky factor) share a
single code path downstream.

Sample matrices are oriented rows-as-samples: X has shape
(n_samples, n_features).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateDataError, NotPositiveDefiniteError

KERNEL_KINDS = ("linear", "gaussian")

# Automatic jitter: start at 1e-8 * mean(diag K), escalate by 10x on
# factorization failure, at most MAX_JITTER_ESCALATIONS extra attempts.
BASE_JITTER_SCALE = 1e-8
MAX_JITTER_ESCALATIONS = 6


@dataclass(frozen=True)
class KernelSpec:
    """Kernel configuration.

    Parameters
    ----------
    kind : {"linear", "gaussian"}
        Kernel family.
    bandwidth : float, optional
        Gaussian bandwidth t in exp(-||x - x'||^2 / t). Must be positive
        when given. ``None`` means "resolve at fit time with the mean
        squared pairwise distance heuristic"; linear kernels ignore it.
    jitter : float
        Diagonal term added to the Gram matrix before factorization.
        Zero selects the automatic escalation schedule.
    """

    kind: str
    bandwidth: float | None = None
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.jitter >= 0:
            raise ValueError(f"jitter must be non-negative, got {self.jitter}")


@dataclass(frozen=True)
class GramFactor:
    """Factor Psi of a (possibly implicit) Gram matrix.

    Attributes
    ----------
    psi : ndarray of shape (n, p)
        Row i is the empirical representation of sample i. For factored
        kernels Psi is lower-triangular with positive diagonal and
        Psi @ Psi.T reproduces K + jitter * I; for linear kernels Psi is
        the sample matrix itself and K = X @ X.T is never formed.
    factored : bool
        True when psi came from a Cholesky factorization.
    jitter : float
        Effective diagonal term actually applied (0.0 for linear).
    """

    psi: np.ndarray
    factored: bool
    jitter: float

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def p(self) -> int:
        return self.psi.shape[1]


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Squared Euclidean distances between rows of A and rows of B.

    With B omitted the result has an exactly zero diagonal, so Gaussian
    Gram matrices get an exactly unit diagonal before jitter.
    """
    A = np.asarray(A, dtype=np.float64)
    sq_a = np.einsum("ij,ij->i", A, A)
    if B is None:
        D = sq_a[:, None] + sq_a[None, :] - 2.0 * (A @ A.T)
        np.fill_diagonal(D, 0.0)
    else:
        B = np.asarray(B, dtype=np.float64)
        sq_b = np.einsum("ij,ij->i", B, B)
        D = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    return np.maximum(D, 0.0)


def gaussian_bandwidth(X: np.ndarray) -> float:
    """Bandwidth heuristic: mean of all n^2 ordered pairwise squared
    distances, self-pairs included.

    Uses the identity mean_ij ||x_i - x_j||^2 = 2 mean_i ||x_i||^2
    - 2 ||mean_i x_i||^2, which avoids the n x n distance matrix.

    Raises
    ------
    DegenerateDataError
        If fewer than two samples are given or all samples coincide.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DegenerateDataError(f"expected a 2-d sample matrix, got ndim={X.ndim}")
    n = X.shape[0]
    if n < 2:
        raise DegenerateDataError(f"bandwidth heuristic needs at least 2 samples, got {n}")
    centroid = X.mean(axis=0)
    t = 2.0 * float(np.einsum("ij,ij->", X, X)) / n - 2.0 * float(centroid @ centroid)
    if t <= 0.0:
        raise DegenerateDataError("all samples identical; bandwidth heuristic is degenerate")
    return t


def resolve_bandwidth(spec: KernelSpec, X: np.ndarray) -> KernelSpec:
    """Fill in a missing Gaussian bandwidth from the heuristic.

    Must be called on training data only; test data never participates.
    """
    if spec.kind == "gaussian" and spec.bandwidth is None:
        return replace(spec, bandwidth=gaussian_bandwidth(X))
    return spec


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Evaluate the kernel between rows of A and rows of B (A itself
    when B is omitted)."""
    A = np.asarray(A, dtype=np.float64)
    if spec.kind == "linear":
        return A @ (A if B is None else np.asarray(B, dtype=np.float64)).T
    if spec.bandwidth is None:
        raise ValueError("gaussian kernel requires a resolved bandwidth")
    return np.exp(-pairwise_sq_dists(A, B) / spec.bandwidth)


def factor_gram(K: np.ndarray, jitter: float = 0.0) -> GramFactor:
    """Cholesky-factor an explicit Gram matrix with jitter escalation.

    The starting jitter is ``jitter`` when positive, otherwise
    1e-8 * mean(diag K). On factorization failure the jitter is
    multiplied by 10, at most 6 times.

    Raises
    ------
    NotPositiveDefiniteError
        If every attempt of the escalation schedule fails.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {K.shape}")
    diag_mean = float(np.mean(np.diag(K))) if K.shape[0] else 0.0
    eps = float(jitter) if jitter > 0 else BASE_JITTER_SCALE * max(diag_mean, 0.0)
    if eps <= 0.0:
        eps = BASE_JITTER_SCALE
    n = K.shape[0]
    for _ in range(MAX_JITTER_ESCALATIONS + 1):
        try:
            psi = np.linalg.cholesky(K + eps * np.eye(n))
        except np.linalg.LinAlgError:
            eps *= 10.0
            continue
        return GramFactor(psi=psi, factored=True, jitter=eps)
    raise NotPositiveDefiniteError(
        f"Gram factorization failed after jitter escalation up to {eps / 10.0:.3e}"
    )


def gram_factor(X: np.ndarray, spec: KernelSpec) -> GramFactor:
    """Build the empirical-coordinate factor for a sample matrix.

    Linear kernels return Psi = X directly (no factorization, no
    jitter); Gaussian kernels factor the jittered Gram matrix.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ValueError("sample matrix contains non-finite values")
    if spec.kind == "linear":
        return GramFactor(psi=X.copy(), factored=False, jitter=0.0)
    if spec.bandwidth is None or not spec.bandwidth > 0:
        raise ValueError("gaussian gram_factor requires bandwidth > 0; call resolve_bandwidth first")
    return factor_gram(kernel_matrix(spec, X), jitter=spec.jitter)
