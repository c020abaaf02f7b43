"""Nearest-neighbor graphs and normalized Laplacians.

The manifold penalty in the kernel trainer is (mu/2) Tr(Z L Z^T) with L
the symmetrically normalized Laplacian of a k-nearest-neighbor graph.
Graph weights use a Gaussian kernel regardless of the model kernel, so
that weights stay in [0, 1] and the normalization is well conditioned.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDataError
from .kernels import KernelSpec, kernel_matrix, pairwise_sq_dists


def default_neighbor_count(n: int) -> int:
    """k = floor(log2 n), the paperless default used across the package."""
    return int(np.floor(np.log2(n)))


def knn_graph(X: np.ndarray, spec: KernelSpec, k: int = 0) -> np.ndarray:
    """Symmetric k-nearest-neighbor adjacency with kernel weights.

    G_ij = kernel(x_i, x_j) when i is among the k nearest neighbors of j
    or j is among the k nearest neighbors of i, and 0 otherwise. A point
    is never its own neighbor. Distance ties are broken by ascending
    sample index. ``k = 0`` resolves to floor(log2 n).

    The returned matrix is bitwise symmetric with a zero diagonal.

    Raises
    ------
    DegenerateDataError
        If n < 2.
    ValueError
        If the resolved k falls outside [1, n - 1].
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise DegenerateDataError(f"neighbor graph needs at least 2 samples, got {n}")
    if k == 0:
        k = default_neighbor_count(n)
    if not 1 <= k < n:
        raise ValueError(f"neighbor count k={k} outside valid range [1, {n - 1}]")

    D = pairwise_sq_dists(X)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        # stable sort keeps ascending index order among equal distances
        order = np.argsort(D[i], kind="stable")
        order = order[order != i]
        mask[i, order[:k]] = True
    mask |= mask.T

    W = kernel_matrix(spec, X)
    W = 0.5 * (W + W.T)
    G = np.where(mask, W, 0.0)
    np.fill_diagonal(G, 0.0)
    return G


def normalized_laplacian(G: np.ndarray) -> np.ndarray:
    """Symmetrically normalized Laplacian L = I - D^{-1/2} G D^{-1/2}.

    Isolated nodes (zero degree) contribute identity rows and columns,
    the limit of a vanishing degree. The result is symmetric positive
    semidefinite with eigenvalues in [0, 2].

    Raises
    ------
    ValueError
        If G is not square, not symmetric, or has negative entries.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, rtol=0.0, atol=1e-12):
        raise ValueError("adjacency must be symmetric")
    if (G < 0).any():
        raise ValueError("adjacency must be non-negative")
    G = 0.5 * (G + G.T)
    deg = G.sum(axis=1)
    inv_sqrt = np.where(deg > 0.0, 1.0 / np.sqrt(np.where(deg > 0.0, deg, 1.0)), 0.0)
    # outer product keeps the scaling bitwise symmetric
    L = np.eye(G.shape[0]) - np.outer(inv_sqrt, inv_sqrt) * G
    return L
