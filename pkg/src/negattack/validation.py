"""Input checks shared by the estimators."""

import numpy as np
from sklearn.exceptions import NotFittedError

__all__ = ["check_images", "check_labels", "check_is_trained", "NotFittedError"]


def check_images(X, input_shape, name="X"):
    """Coerce ``X`` to a float64 batch of shape ``(n, *input_shape)``.

    Accepts either already-shaped batches or flattened rows. A single image of
    exactly ``input_shape`` is promoted to a batch of one.
    """
    X = np.asarray(X, dtype=np.float64)
    input_shape = tuple(input_shape)
    size = int(np.prod(input_shape))
    if X.shape == input_shape:
        X = X[None]
    elif X.ndim == 2 and X.shape[1] == size:
        X = X.reshape((X.shape[0],) + input_shape)
    elif X.shape[1:] != input_shape:
        raise ValueError(
            f"{name} has shape {X.shape}; expected (n, {', '.join(map(str, input_shape))}) "
            f"or (n, {size})"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def check_labels(y, n_samples, n_classes, name="y"):
    y = np.asarray(y)
    if y.ndim == 0:
        y = y[None]
    if y.ndim != 1 or len(y) != n_samples:
        raise ValueError(f"{name} must be 1-D with {n_samples} entries, got shape {y.shape}")
    if y.dtype.kind == "f":
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError(f"{name} must hold integer class indices")
    elif y.dtype.kind not in "iu":
        raise ValueError(f"{name} must hold integer class indices, got dtype {y.dtype}")
    y = y.astype(np.int64)
    if len(y) and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"{name} has labels outside [0, {n_classes})")
    return y


def check_is_trained(model):
    if getattr(model, "params_", None) is None:
        raise NotFittedError(
            f"This {type(model).__name__} instance is not fitted yet; call fit() or load a model file"
        )
