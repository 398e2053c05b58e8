"""A scikit-learn compatible wrapper around :mod:`negattack.network`.

``NetClassifier`` trains with plain minibatch SGD and exposes, besides the
usual ``predict``/``predict_proba``, the two things attacks need: the
per-sample loss and its gradient with respect to the input pixels.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import network
from .architectures import get_architecture
from .network import ModelSpec
from .validation import check_images, check_is_trained, check_labels

__all__ = ["NetClassifier", "ModelFormatError", "save_model", "load_model"]

logger = logging.getLogger(__name__)

MAGIC = b"NATKMDL\x00"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised when a model file is truncated, corrupt or from another format version."""


class NetClassifier(ClassifierMixin, BaseEstimator):
    """Feed-forward ReLU classifier trained by minibatch SGD.

    Parameters
    ----------
    architecture : str or ModelSpec
        Name from :data:`negattack.architectures.ARCHITECTURES` or an explicit spec.
    learning_rate : float
        Fixed SGD step size.
    epochs : int
        Maximum number of passes over the training data. ``0`` leaves the
        freshly initialised parameters untouched.
    batch_size : int
    target_accuracy : float or None
        Stop after the first epoch whose training accuracy reaches this value.
    random_state : int
        Seeds both initialisation and the per-epoch shuffling.
    input_shape, n_classes
        Used only when ``architecture`` is a name.
    """

    def __init__(self, architecture="mlp_a", learning_rate=0.05, epochs=20, batch_size=32,
                 target_accuracy=None, random_state=0, input_shape=(1, 28, 28), n_classes=10):
        self.architecture = architecture
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.target_accuracy = target_accuracy
        self.random_state = random_state
        self.input_shape = input_shape
        self.n_classes = n_classes

    def _build_spec(self):
        if isinstance(self.architecture, ModelSpec):
            return self.architecture
        return get_architecture(self.architecture, self.input_shape, self.n_classes)

    def fit(self, X, y, eval_set=None):
        """Train from scratch on ``(X, y)``.

        ``eval_set`` is an optional ``(X_test, y_test)`` pair whose accuracy is
        recorded in :attr:`training_info_`; it never influences training.
        """
        spec = self._build_spec()
        X = check_images(X, spec.input_shape)
        if len(X) == 0:
            raise ValueError("cannot fit on an empty dataset")
        y = check_labels(y, len(X), spec.n_classes)
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

        rng = np.random.default_rng(self.random_state)
        self.spec_ = spec
        self.params_ = network.init_params(spec, rng)
        self.classes_ = np.arange(spec.n_classes)
        self.n_features_in_ = int(np.prod(spec.input_shape))

        epochs_run = 0
        for epoch in range(self.epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), self.batch_size):
                idx = order[start:start + self.batch_size]
                self._sgd_step(X[idx], y[idx])
            epochs_run = epoch + 1
            train_acc = self.score(X, y)
            logger.debug("epoch %d train accuracy %.4f", epochs_run, train_acc)
            if self.target_accuracy is not None and train_acc >= self.target_accuracy:
                break

        info = {
            "seed": self.random_state,
            "epochs_run": epochs_run,
            "train_accuracy": float(self.score(X, y)),
        }
        if eval_set is not None:
            X_test, y_test = eval_set
            info["test_accuracy"] = float(self.score(X_test, y_test))
        self.training_info_ = info
        return self

    def _sgd_step(self, xb, yb):
        logits, caches = network.forward(self.spec_, self.params_, xb, keep_cache=True)
        dlogits = network.cross_entropy_grad(logits, yb) / len(xb)
        _, grads = network.backward(self.spec_, self.params_, caches, dlogits)
        self.params_ = [p - self.learning_rate * g for p, g in zip(self.params_, grads)]

    def _images(self, X):
        check_is_trained(self)
        return check_images(X, self.spec_.input_shape)

    def decision_function(self, X):
        """Raw logits, shape ``(n, n_classes)``."""
        X = self._images(X)
        return network.forward(self.spec_, self.params_, X)

    def predict_proba(self, X):
        return network.softmax(self.decision_function(X))

    def predict(self, X):
        # argmax returns the lowest index among ties
        return np.argmax(self.decision_function(X), axis=1)

    def loss(self, X, y):
        """Per-sample cross-entropy loss."""
        X = self._images(X)
        y = check_labels(y, len(X), self.spec_.n_classes)
        return network.cross_entropy(network.forward(self.spec_, self.params_, X), y)

    def loss_and_input_gradient(self, X, y):
        """Per-sample loss and its exact gradient w.r.t. the raw input pixels.

        The gradient has the same shape as the validated ``X`` batch.
        """
        X = self._images(X)
        y = check_labels(y, len(X), self.spec_.n_classes)
        logits, caches = network.forward(self.spec_, self.params_, X, keep_cache=True)
        loss = network.cross_entropy(logits, y)
        dlogits = network.cross_entropy_grad(logits, y)
        grad, _ = network.backward(self.spec_, self.params_, caches, dlogits, param_grads=False)
        return loss, grad

    def input_gradient(self, X, y):
        return self.loss_and_input_gradient(X, y)[1]

    def save(self, path):
        save_model(self, path)
        return self

    @classmethod
    def load(cls, path):
        return load_model(path)


def _hyperparams(model):
    params = model.get_params()
    if isinstance(params["architecture"], ModelSpec):
        params["architecture"] = None
    params["input_shape"] = list(params["input_shape"])
    return params


def save_model(model, path):
    """Write a trained :class:`NetClassifier` to ``path``.

    Layout: 8 magic bytes, little-endian ``uint16`` format version, ``uint32``
    header length, UTF-8 JSON header, then for each parameter tensor a
    ``uint32`` element count followed by that many little-endian float64s.
    """
    check_is_trained(model)
    header = {
        "spec": model.spec_.to_dict(),
        "param_shapes": [list(p.shape) for p in model.params_],
        "training_info": getattr(model, "training_info_", {}),
        "hyperparams": _hyperparams(model),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(blob)), blob]
    for p in model.params_:
        parts.append(struct.pack("<I", p.size))
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path):
    """Read a model written by :func:`save_model`; raises :class:`ModelFormatError`."""
    data = Path(path).read_bytes()
    head = len(MAGIC) + 6
    if len(data) < head or data[:len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    version, hlen = struct.unpack_from("<HI", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(data) < head + hlen:
        raise ModelFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[head:head + hlen].decode("utf-8"))
        spec = ModelSpec.from_dict(header["spec"])
        shapes = [tuple(s) for s in header["param_shapes"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: corrupt header ({exc})") from None
    if shapes != [tuple(s) for s in spec.param_shapes()]:
        raise ModelFormatError(f"{path}: parameter shapes do not match the architecture")

    offset = head + hlen
    params = []
    for i, shape in enumerate(shapes):
        if offset + 4 > len(data):
            raise ModelFormatError(f"{path}: truncated before parameter tensor {i}")
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        expected = int(np.prod(shape))
        if count != expected:
            raise ModelFormatError(
                f"{path}: parameter tensor {i} declares {count} values, shape {shape} needs {expected}"
            )
        if offset + 8 * count > len(data):
            raise ModelFormatError(f"{path}: truncated inside parameter tensor {i}")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        params.append(arr.astype(np.float64).reshape(shape))
        offset += 8 * count
    if offset != len(data):
        raise ModelFormatError(f"{path}: {len(data) - offset} trailing bytes after last tensor")

    hp = dict(header.get("hyperparams", {}))
    if hp.get("architecture") is None:
        hp["architecture"] = spec
    hp["input_shape"] = tuple(hp.get("input_shape", spec.input_shape))
    model = NetClassifier(**hp)
    model.spec_ = spec
    model.params_ = params
    model.classes_ = np.arange(spec.n_classes)
    model.n_features_in_ = int(np.prod(spec.input_shape))
    model.training_info_ = header.get("training_info", {})
    return model
