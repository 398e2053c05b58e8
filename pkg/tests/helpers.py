import gzip
import struct

import numpy as np

from negattack.classifier import NetClassifier
from negattack.network import Conv2d, Dense, Flatten, MaxPool2d, ModelSpec, ReLU


def fitted(spec, seed=0, bias_scale=0.0):
    """A NetClassifier holding freshly initialised (untrained) parameters."""
    clf = NetClassifier(architecture=spec, epochs=0, random_state=seed)
    clf.fit(np.zeros((1,) + spec.input_shape), [0])
    if bias_scale:
        rng = np.random.default_rng(seed + 1000)
        clf.params_ = [p + bias_scale * rng.standard_normal(p.shape) if p.ndim == 1 else p
                       for p in clf.params_]
    return clf


def with_weights(spec, params):
    clf = fitted(spec)
    clf.params_ = [np.asarray(p, dtype=np.float64) for p in params]
    return clf


def tiny_mlp(input_shape=(1, 6, 6), n_classes=4, hidden=7):
    d = int(np.prod(input_shape))
    return ModelSpec([Flatten(), Dense(d, hidden), ReLU(), Dense(hidden, n_classes)],
                     input_shape, n_classes)


def tiny_cnn(input_shape=(1, 8, 8), n_classes=3):
    return ModelSpec([Conv2d(1, 2, 3), ReLU(), MaxPool2d(2), Flatten(), Dense(2 * 3 * 3, n_classes)],
                     input_shape, n_classes)


def write_idx(path, array, code=0x08):
    array = np.asarray(array)
    header = struct.pack(">HBB", 0, code, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    dtype = {0x08: ">u1", 0x0D: ">f4"}[code]
    raw = header + array.astype(dtype).tobytes()
    if str(path).endswith(".gz"):
        raw = gzip.compress(raw, mtime=0)
    with open(path, "wb") as fh:
        fh.write(raw)


def synthetic_digits(n, seed, size=12, n_classes=3):
    """Easy images: class c lights up a bar at a class-specific position."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    images = rng.integers(0, 40, size=(n, size, size))
    for i, c in enumerate(labels):
        r = 2 + 3 * c
        images[i, r:r + 2, 1:size - 1] = rng.integers(180, 256, size=(2, size - 2))
    return images.astype(np.uint8), labels.astype(np.uint8)


def small_conv(size=12, n_classes=3):
    from negattack.network import Conv2d, Dense, Flatten, MaxPool2d, ModelSpec, ReLU
    s = (size - 2) // 2
    return ModelSpec([Conv2d(1, 4, 3), ReLU(), MaxPool2d(2), Flatten(), Dense(4 * s * s, n_classes)],
                     (1, size, size), n_classes)


def small_suite(n_train=300, n_test=120, seed=0):
    """Three quickly trained models plus train/test Datasets on synthetic bars."""
    from negattack.dataio import Dataset
    images, labels = synthetic_digits(n_train + n_test, seed)
    X = images[:, None].astype(np.float64)
    y = labels.astype(np.int64)
    train = Dataset(X[:n_train], y[:n_train], 3, "bars", "train")
    test = Dataset(X[n_train:], y[n_train:], 3, "bars", "test")
    specs = [tiny_mlp((1, 12, 12), 3, 16), tiny_mlp((1, 12, 12), 3, 24), small_conv()]
    models = [NetClassifier(s, epochs=5, learning_rate=0.05, random_state=i + 1)
              .fit(train.images, train.labels) for i, s in enumerate(specs)]
    return models, train, test
