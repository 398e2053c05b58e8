import struct

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from negattack.classifier import MAGIC, ModelFormatError, NetClassifier, load_model, save_model
from negattack.network import Dense, ModelSpec

from helpers import fitted, tiny_cnn, tiny_mlp


def separable_toy(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 255, (n, 2))
    margin = X[:, 0] - X[:, 1]
    keep = np.abs(margin) > 20
    return X[keep], (margin[keep] > 0).astype(int)


def perceptron_separates(X, y, epochs=1000):
    """Classic perceptron; converges iff the data is linearly separable."""
    Xa = np.hstack([X / 255.0, np.ones((len(X), 1))])
    s = 2 * y - 1
    w = np.zeros(3)
    for _ in range(epochs):
        mistakes = 0
        for xi, si in zip(Xa, s):
            if si * (xi @ w) <= 0:
                w += si * xi
                mistakes += 1
        if mistakes == 0:
            return True
    return False


def test_toy_problem_trains_to_99_percent():
    X, y = separable_toy()
    assert perceptron_separates(X, y)
    spec = ModelSpec([Dense(2, 2)], (2,), 2)
    clf = NetClassifier(architecture=spec, learning_rate=0.5, epochs=50, batch_size=8,
                        random_state=0, target_accuracy=0.99)
    clf.fit(X, y)
    assert clf.score(X, y) >= 0.99
    assert clf.training_info_["epochs_run"] <= 50


def test_same_seed_bit_identical(rng):
    X = rng.uniform(0, 255, (40, 1, 6, 6))
    y = rng.integers(4, size=40)
    a = NetClassifier(tiny_mlp(), epochs=3, random_state=5).fit(X, y)
    b = NetClassifier(tiny_mlp(), epochs=3, random_state=5).fit(X, y)
    c = NetClassifier(tiny_mlp(), epochs=3, random_state=6).fit(X, y)
    assert all(p.tobytes() == q.tobytes() for p, q in zip(a.params_, b.params_))
    assert any(p.tobytes() != q.tobytes() for p, q in zip(a.params_, c.params_))


def test_zero_epochs_keeps_initialisation(rng):
    X = rng.uniform(0, 255, (10, 36))
    y = rng.integers(4, size=10)
    a = NetClassifier(tiny_mlp(), epochs=0, random_state=3).fit(X, y)
    b = NetClassifier(tiny_mlp(), epochs=5, random_state=3)
    from negattack.network import init_params
    init = init_params(tiny_mlp(), np.random.default_rng(3))
    assert all(np.array_equal(p, q) for p, q in zip(a.params_, init))
    assert a.training_info_["epochs_run"] == 0
    with pytest.raises(ValueError):
        b.fit(np.zeros((0, 36)), np.zeros(0, dtype=int))


def test_fit_validates_labels_and_shapes(rng):
    clf = NetClassifier(tiny_mlp(), epochs=1)
    with pytest.raises(ValueError):
        clf.fit(rng.uniform(0, 255, (5, 36)), [0, 1, 2, 3, 4])
    with pytest.raises(ValueError):
        clf.fit(rng.uniform(0, 255, (5, 35)), [0, 1, 2, 3, 0])
    with pytest.raises(ValueError):
        clf.fit(np.full((1, 36), np.nan), [0])


def test_sklearn_estimator_protocol(rng):
    clf = NetClassifier(architecture="mlp_b", epochs=2, learning_rate=0.1)
    params = clf.get_params()
    assert params["architecture"] == "mlp_b" and params["epochs"] == 2
    clone_ = clone(clf)
    assert clone_.get_params() == params
    clf.set_params(epochs=4)
    assert clf.epochs == 4
    with pytest.raises(NotFittedError):
        clf.predict(np.zeros((1, 784)))


def test_predict_tie_break_and_argmax_agreement(rng):
    model = fitted(tiny_mlp(), seed=4, bias_scale=0.2)
    X = rng.uniform(0, 255, (100, 1, 6, 6))
    np.testing.assert_array_equal(model.predict(X), np.argmax(model.decision_function(X), axis=1))
    model.params_[2][:] = 0
    model.params_[3][:] = 0
    np.testing.assert_array_equal(model.predict(X[:3]), [0, 0, 0])
    probs = model.predict_proba(X[:2])
    np.testing.assert_allclose(probs, 0.25)


def test_flat_rows_accepted(rng):
    model = fitted(tiny_mlp(), seed=1)
    X = rng.uniform(0, 255, (3, 1, 6, 6))
    np.testing.assert_array_equal(model.predict(X), model.predict(X.reshape(3, -1)))


def test_save_load_round_trip(tmp_path, rng):
    X = rng.uniform(0, 255, (20, 1, 8, 8))
    y = rng.integers(3, size=20)
    model = NetClassifier(tiny_cnn(), epochs=2, random_state=1).fit(X, y, eval_set=(X, y))
    path = tmp_path / "m.nat"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.spec_ == model.spec_
    assert all(p.tobytes() == q.tobytes() for p, q in zip(loaded.params_, model.params_))
    assert loaded.decision_function(X).tobytes() == model.decision_function(X).tobytes()
    assert loaded.training_info_ == model.training_info_
    save_model(loaded, tmp_path / "again.nat")
    assert (tmp_path / "again.nat").read_bytes() == path.read_bytes()


def test_named_architecture_round_trip(tmp_path, rng):
    model = NetClassifier("mlp_a", epochs=0, random_state=2).fit(np.zeros((1, 784)), [0])
    model.save(tmp_path / "a.nat")
    loaded = NetClassifier.load(tmp_path / "a.nat")
    assert loaded.get_params()["architecture"] == "mlp_a"


@pytest.fixture
def model_bytes(tmp_path):
    path = tmp_path / "m.nat"
    save_model(fitted(tiny_mlp(), seed=9), path)
    return path, path.read_bytes()


def _hlen(raw):
    return struct.unpack_from("<HI", raw, len(MAGIC))[1]


@pytest.mark.parametrize("cut", [0, 5, 14, 40, -1, -9])
def test_truncated_file_is_format_error(model_bytes, cut):
    path, raw = model_bytes
    path.write_bytes(raw[:cut])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_bad_magic_and_version(model_bytes):
    path, raw = model_bytes
    path.write_bytes(b"X" + raw[1:])
    with pytest.raises(ModelFormatError, match="magic"):
        load_model(path)
    path.write_bytes(raw[:len(MAGIC)] + struct.pack("<H", 99) + raw[len(MAGIC) + 2:])
    with pytest.raises(ModelFormatError, match="version"):
        load_model(path)


def test_declared_size_mismatch(model_bytes):
    path, raw = model_bytes
    off = len(MAGIC) + 6 + _hlen(raw)
    (count,) = struct.unpack_from("<I", raw, off)
    path.write_bytes(raw[:off] + struct.pack("<I", count - 1) + raw[off + 4:])
    with pytest.raises(ModelFormatError, match="declares"):
        load_model(path)


def test_trailing_bytes_and_corrupt_header(model_bytes):
    path, raw = model_bytes
    path.write_bytes(raw + b"\0")
    with pytest.raises(ModelFormatError, match="trailing"):
        load_model(path)
    off = len(MAGIC) + 6
    path.write_bytes(raw[:off] + b"[" + raw[off + 1:])
    with pytest.raises(ModelFormatError):
        load_model(path)
