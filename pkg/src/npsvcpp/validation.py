"""Input validation shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array, check_X_y

from .errors import DatasetError, ShapeMismatchError


def encode_labels(X, y, min_classes: int = 2):
    """Validate (X, y) and encode labels as 0-based codes.

    Returns (X, codes, classes) where classes[codes] reconstructs y.
    Rejects non-finite features and degenerate label sets.
    """
    X, y = check_X_y(X, y, dtype=np.float64, ensure_all_finite=True)
    classes, codes = np.unique(y, return_inverse=True)
    if classes.shape[0] < min_classes:
        raise DatasetError(
            f"need at least {min_classes} classes, got {classes.shape[0]}")
    return X, codes.astype(np.intp), classes


def check_feature_matrix(X, n_features: int, estimator=None) -> np.ndarray:
    """Validate a prediction-time feature matrix against the fitted width.

    Accepts empty inputs (shape (0, n_features) after coercion) and
    raises ShapeMismatchError on any width disagreement.
    """
    from sklearn.utils.validation import check_is_fitted

    if estimator is not None:
        check_is_fitted(estimator)
    X = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_2d=True,
                    ensure_min_samples=0)
    if X.shape[0] and X.shape[1] != n_features:
        raise ShapeMismatchError(
            f"model expects {n_features} features, got {X.shape[1]}")
    if X.shape[0] == 0 and X.shape[1] not in (0, n_features):
        raise ShapeMismatchError(
            f"model expects {n_features} features, got {X.shape[1]}")
    if X.shape[0] == 0:
        X = X.reshape(0, n_features)
    return X
