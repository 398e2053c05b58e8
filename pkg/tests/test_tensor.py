import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from negattack import tensor
from negattack.tensor import Norm

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 40), elements=finite)
# keep squares out of the subnormal range so relative comparisons are meaningful
normal = finite.filter(lambda v: v == 0 or abs(v) > 1e-100)
normal_vectors = arrays(np.float64, st.integers(1, 40), elements=normal)


def test_sign_examples():
    np.testing.assert_array_equal(tensor.sign([0.5, -2.0, 0.0]), [1, -1, 0])
    np.testing.assert_array_equal(tensor.sign(np.zeros(5)), np.zeros(5))


def test_sign_tiny_values_not_flushed():
    # exact arithmetic: -1e-300 < 0 < 1e-300
    assert -1e-300 < 0 < 1e-300
    np.testing.assert_array_equal(tensor.sign([-1e-300, 1e-300]), [-1.0, 1.0])


@pytest.mark.parametrize("p, expected", [(Norm.L2, 5.0), (Norm.L1, 7.0), (Norm.LINF, 4.0)])
def test_norm_examples(p, expected):
    assert tensor.norm([3.0, -4.0], p) == expected


def _loop_norm(values, p):
    if p is Norm.L1:
        total = 0.0
        for v in values:
            total += abs(v)
        return total
    if p is Norm.L2:
        total = 0.0
        for v in values:
            total += v * v
        return math.sqrt(total)
    best = 0.0
    for v in values:
        best = max(best, abs(v))
    return best


@pytest.mark.parametrize("p", list(Norm))
def test_norm_matches_scalar_loop(rng, p):
    for n in (1, 10, 1000, 10_000):
        t = rng.standard_normal(n) * 100
        got = tensor.norm(t, p)
        want = _loop_norm(t.tolist(), p)
        assert abs(got - want) <= 1e-12 * want


def test_batch_norm_per_sample(rng):
    t = rng.standard_normal((5, 2, 3))
    for p in Norm:
        per = tensor.batch_norm(t, p)
        for i in range(5):
            assert per[i] == pytest.approx(_loop_norm(t[i].ravel().tolist(), p), rel=1e-12)


def test_norm_parse():
    assert Norm.parse("L2") is Norm.L2
    assert Norm.parse("inf") is Norm.LINF
    with pytest.raises(ValueError):
        Norm.parse("l3")


def test_clamp_examples():
    np.testing.assert_array_equal(tensor.clamp([-5, 100, 300], 0, 255), [0, 100, 255])
    t = np.array([1.5, 200.0])
    np.testing.assert_array_equal(tensor.clamp(t, 0, 255), t)
    with pytest.raises(ValueError):
        tensor.clamp(t, 1, 0)


def test_elementwise_examples(rng):
    np.testing.assert_array_equal(tensor.add([1, 2], [3, 4]), [4, 6])
    a = rng.standard_normal(6)
    np.testing.assert_array_equal(tensor.scale(a, 0), np.zeros(6))
    np.testing.assert_array_equal(tensor.sub(a, a), np.zeros(6))
    np.testing.assert_array_equal(tensor.hadamard([1, 2], [3, 4]), [3, 8])


@pytest.mark.parametrize("op", [tensor.add, tensor.sub, tensor.hadamard])
def test_binary_shape_mismatch(op):
    with pytest.raises(ValueError):
        op(np.zeros(3), np.zeros(4))


def test_as_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        tensor.as_tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        tensor.as_tensor([np.inf])


def test_clip_to_ball_examples(rng):
    c = rng.standard_normal(4)
    np.testing.assert_array_equal(tensor.clip_to_ball(c, c, 0.5), c)
    np.testing.assert_array_equal(tensor.clip_to_ball([5.0, -5.0], [0.0, 0.0], 2), [2.0, -2.0])
    with pytest.raises(ValueError):
        tensor.clip_to_ball(np.zeros(2), np.zeros(3), 1)
    with pytest.raises(ValueError):
        tensor.clip_to_ball(np.zeros(2), np.zeros(2), -1)


def test_clip_to_ball_scalar_loop(rng):
    t = rng.uniform(-10, 10, 500)
    c = rng.uniform(-10, 10, 500)
    out = tensor.clip_to_ball(t, c, 1.0)
    for o, ci in zip(out.tolist(), c.tolist()):
        assert ci - 1.0 <= o <= ci + 1.0


@given(vectors)
def test_sign_linf_is_zero_or_one(t):
    assert tensor.norm(tensor.sign(t), Norm.LINF) in (0.0, 1.0)


@given(normal_vectors, st.floats(1e-3, 1e3))
def test_sign_scale_invariant(t, c):
    np.testing.assert_array_equal(tensor.sign(tensor.scale(t, c)), tensor.sign(t))


@given(normal_vectors, st.floats(-50, 50).filter(lambda c: c == 0 or abs(c) > 1e-6))
def test_norm_homogeneous(t, c):
    for p in Norm:
        assert tensor.norm(c * t, p) == pytest.approx(abs(c) * tensor.norm(t, p), rel=1e-12)


@given(vectors, st.floats(0, 100))
def test_clip_to_ball_idempotent(t, eps):
    center = np.zeros_like(t)
    once = tensor.clip_to_ball(t, center, eps)
    np.testing.assert_array_equal(tensor.clip_to_ball(once, center, eps), once)
    assert np.all(np.abs(once - center) <= eps)


@given(vectors)
def test_clamp_idempotent(t):
    once = tensor.clamp(t, 0, 255)
    np.testing.assert_array_equal(tensor.clamp(once, 0, 255), once)
    assert once.min() >= 0 and once.max() <= 255


@settings(max_examples=50)
@given(vectors)
def test_functions_do_not_mutate(t):
    before = t.copy()
    tensor.sign(t)
    tensor.clamp(t, -1, 1)
    tensor.clip_to_ball(t, np.zeros_like(t), 1)
    np.testing.assert_array_equal(t, before)


@given(arrays(np.float64, 30, elements=st.floats(0, 255)),
       arrays(np.float64, 30, elements=st.floats(-600, 600)), st.floats(0, 300))
def test_clip_to_ball_exact_in_floating_point(center, t, eps):
    out = tensor.clip_to_ball(t, center, eps)
    assert np.all(np.abs(out - center) <= eps)
    inside = np.abs(t - center) <= eps
    np.testing.assert_array_equal(out[inside], t[inside])
