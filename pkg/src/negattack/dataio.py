"""Dataset ingestion, evaluation-subset screening and image/CSV export."""

import csv
import dataclasses
import gzip
import hashlib
import io
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "InsufficientPoolError",
    "Dataset",
    "EvalSubset",
    "read_idx",
    "load_idx",
    "model_fingerprint",
    "select_eval_subset",
    "export_image",
    "read_image",
    "write_csv",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


class FormatError(ValueError):
    """Malformed input file."""


class InsufficientPoolError(ValueError):
    def __init__(self, pool_size, requested, where=""):
        scope = f" in {where}" if where else ""
        super().__init__(
            f"only {pool_size} examples{scope} are classified correctly by every model; "
            f"{requested} requested"
        )
        self.pool_size = pool_size
        self.requested = requested


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Images with pixel values in ``[0, 255]`` and integer labels."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int = 10
    name: str = ""
    split: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels outside [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.n_classes, self.name,
                       self.split)


@dataclasses.dataclass(frozen=True)
class EvalSubset:
    """Indices into a dataset, all classified correctly by the screened models."""

    indices: tuple
    fingerprints: tuple
    seed: int = 0

    def __len__(self):
        return len(self.indices)

    def take(self, dataset):
        return dataset.subset(list(self.indices))

    def to_dict(self):
        return {"indices": list(self.indices), "fingerprints": list(self.fingerprints),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(int(i) for i in d["indices"]), tuple(d["fingerprints"]), int(d["seed"]))


def _open(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"{path}: corrupt gzip stream ({exc})") from None
    return raw


def read_idx(path):
    """Parse one IDX file (optionally gzipped) into an array of its declared shape."""
    raw = _open(path)
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for an IDX header")
    zero, code, ndim = struct.unpack_from(">HBB", raw, 0)
    if zero != 0 or code not in _IDX_DTYPES:
        raise FormatError(f"{path}: bad magic 0x{int.from_bytes(raw[:4], 'big'):08x}")
    if len(raw) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated dimension table")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    dtype = _IDX_DTYPES[code]
    payload = len(raw) - 4 - 4 * ndim
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if payload < expected:
        raise FormatError(f"{path}: truncated payload ({payload} bytes, header declares {expected})")
    if payload > expected:
        raise FormatError(f"{path}: {payload - expected} trailing bytes after declared payload")
    return np.frombuffer(raw, dtype=dtype, offset=4 + 4 * ndim).reshape(dims)


def load_idx(images_path, labels_path, name="", split="", n_classes=10):
    """Load an MNIST-style image/label IDX pair.

    Images come back as float64 arrays of shape ``(n, 1, rows, cols)``.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    magic_i = int.from_bytes(_open(images_path)[:4], "big")
    magic_l = int.from_bytes(_open(labels_path)[:4], "big")
    if magic_i != IDX_IMAGES_MAGIC:
        raise FormatError(f"{images_path}: expected image magic 0x00000803, got 0x{magic_i:08x}")
    if magic_l != IDX_LABELS_MAGIC:
        raise FormatError(f"{labels_path}: expected label magic 0x00000801, got 0x{magic_l:08x}")
    if len(images) != len(labels):
        raise FormatError(
            f"image/label count mismatch: {images_path} has {len(images)}, "
            f"{labels_path} has {len(labels)}"
        )
    labels = labels.astype(np.int64)
    if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
        raise FormatError(f"{labels_path}: labels outside [0, {n_classes})")
    images = images.astype(np.float64)[:, None, :, :]
    return Dataset(images, labels, n_classes, name, split)


def model_fingerprint(model):
    """Short stable hash of a trained model's architecture and parameters."""
    h = hashlib.sha256()
    h.update(repr(model.spec_.to_dict()).encode())
    for p in model.params_:
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def select_eval_subset(models, dataset, n, seed=0, min_per_class=0):
    """Draw ``n`` examples from those every model classifies correctly.

    With ``min_per_class`` each class first receives that many examples drawn
    from its own share of the pool; the remainder is drawn uniformly from what
    is left. Indices come back sorted.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if min_per_class * dataset.n_classes > n:
        raise ValueError(f"min_per_class={min_per_class} needs n >= "
                         f"{min_per_class * dataset.n_classes}")
    ok = np.ones(len(dataset), dtype=bool)
    for model in models:
        ok &= model.predict(dataset.images) == dataset.labels
    pool = np.flatnonzero(ok)
    if len(pool) < n:
        raise InsufficientPoolError(len(pool), n)
    rng = np.random.default_rng(seed)
    chosen = []
    if min_per_class:
        for c in range(dataset.n_classes):
            members = pool[dataset.labels[pool] == c]
            if len(members) < min_per_class:
                raise InsufficientPoolError(len(members), min_per_class, f"class {c}")
            chosen.append(rng.choice(members, size=min_per_class, replace=False))
        pool = np.setdiff1d(pool, np.concatenate(chosen))
    chosen.append(rng.choice(pool, size=n - sum(len(c) for c in chosen), replace=False))
    chosen = np.sort(np.concatenate(chosen))
    return EvalSubset(tuple(int(i) for i in chosen),
                      tuple(model_fingerprint(m) for m in models), seed)


def _to_bytes(t):
    a = np.asarray(t, dtype=np.float64)
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    if a.ndim != 2:
        raise ValueError(f"expected a single-channel 2-D image, got shape {np.shape(t)}")
    if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]; clamp before exporting")
    r = np.rint(a)
    if r.max() > 255:
        raise ValueError("pixel values round above 255")
    return r.astype(np.uint8)


def export_image(t, path, fmt=None):
    """Write a grayscale image as binary PGM (P5) or PNG.

    Pixels are rounded to the nearest integer (halves to even). Values outside
    ``[0, 255]`` are rejected rather than clipped.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "pgm").lower()
    img = _to_bytes(t)
    if fmt == "pgm":
        h, w = img.shape
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())
    elif fmt == "png":
        from PIL import Image

        Image.fromarray(img, mode="L").save(path, format="PNG")
    else:
        raise ValueError(f"unsupported image format {fmt!r}; use 'pgm' or 'png'")


def read_image(path):
    """Read a grayscale PGM/PNG back into a float64 ``(rows, cols)`` array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64)


def write_csv(rows, header, path):
    """Write ``rows`` under a single ``header`` row with minimal RFC 4180 quoting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        fields = [_fmt(v) for v in row]
        if any("\0" in str(f) for f in fields):
            raise ValueError("CSV fields cannot contain NUL characters")
        writer.writerow(fields)
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v
