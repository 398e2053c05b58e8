"""Elementwise and reduction primitives on float64 arrays.

Every attack update is assembled from these. Arrays are plain
``numpy.ndarray`` objects; functions never mutate their arguments.

``batch_norm`` treats axis 0 as the sample axis and reduces over everything
else.
"""

import enum

import numpy as np

__all__ = [
    "Norm",
    "as_tensor",
    "sign",
    "norm",
    "batch_norm",
    "clamp",
    "add",
    "sub",
    "scale",
    "hadamard",
    "clip_to_ball",
]


class Norm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"1": cls.L1, "l1": cls.L1, "2": cls.L2, "l2": cls.L2,
                   "inf": cls.LINF, "linf": cls.LINF, "infinity": cls.LINF}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown norm {value!r}; expected one of l1, l2, linf") from None


def as_tensor(data, shape=None):
    """Return ``data`` as a float64 array, optionally reshaped.

    Raises ``ValueError`` on non-finite entries or an incompatible shape.
    """
    t = np.array(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != t.size:
            raise ValueError(f"cannot view {t.size} elements as shape {shape}")
        t = t.reshape(shape)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor contains NaN or Inf")
    return t


def _same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def sign(t):
    # np.sign maps 0 -> 0 and keeps subnormals nonzero
    return np.sign(np.asarray(t, dtype=np.float64))


def _reduce(t, p, axis):
    a = np.abs(np.asarray(t, dtype=np.float64))
    if p is Norm.L1:
        return np.sum(a, axis=axis)
    if p is Norm.L2:
        return np.sqrt(np.sum(a * a, axis=axis))
    if a.size == 0:
        return np.zeros(() if axis is None else a.shape[0])
    return np.max(a, axis=axis)


def norm(t, p=Norm.L2):
    """L1, L2 or L-infinity norm of the whole tensor."""
    return float(_reduce(t, Norm.parse(p), None))


def batch_norm(t, p=Norm.L2):
    """Per-sample norms, reducing over every axis except the first."""
    t = np.asarray(t, dtype=np.float64)
    flat = t.reshape(t.shape[0], -1)
    return _reduce(flat, Norm.parse(p), 1)


def clamp(t, lo, hi):
    if lo > hi:
        raise ValueError(f"clamp bounds inverted: lo={lo} > hi={hi}")
    return np.clip(np.asarray(t, dtype=np.float64), lo, hi)


def add(a, b):
    _same_shape(a, b)
    return np.add(a, b, dtype=np.float64)


def sub(a, b):
    _same_shape(a, b)
    return np.subtract(a, b, dtype=np.float64)


def scale(t, c):
    return np.multiply(t, float(c), dtype=np.float64)


def hadamard(a, b):
    _same_shape(a, b)
    return np.multiply(a, b, dtype=np.float64)


def clip_to_ball(t, center, eps):
    """Clip ``t`` per element into ``[center - eps, center + eps]``."""
    _same_shape(t, center)
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    center = np.asarray(center, dtype=np.float64)
    lo, hi = center - eps, center + eps
    # rounding in center +/- eps can leave a bound one ulp outside the ball
    while np.any(bad := hi - center > eps):
        hi = np.where(bad, np.nextafter(hi, -np.inf), hi)
    while np.any(bad := center - lo > eps):
        lo = np.where(bad, np.nextafter(lo, np.inf), lo)
    return np.clip(np.asarray(t, dtype=np.float64), lo, hi)
