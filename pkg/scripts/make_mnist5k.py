"""Rebuild data/mnist5k/ from the 5000-digit MNIST sample bundled with mlxtend.

The sample holds 500 images per class, ordered by label. The first 400 of each
class go to the training split and the last 100 to the test split. Output is
gzipped IDX, the same container as the official MNIST archives.

    pip install mlxtend
    python scripts/make_mnist5k.py [OUT_DIR]
"""

import gzip
import io
import struct
import sys
from importlib import resources
from pathlib import Path

import numpy as np


def write_idx(path, array):
    codes = {np.dtype(np.uint8): 0x08}
    header = struct.pack(">HBB", 0, codes[array.dtype], array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + array.tobytes())


def main(out_dir="data/mnist5k"):
    raw = resources.files("mlxtend.data").joinpath("data/mnist_5k.csv.gz").read_bytes()
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",").astype(np.uint8)
    images, labels = table[:, :-1].reshape(-1, 28, 28), table[:, -1]

    train, test = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        train.extend(idx[:400])
        test.extend(idx[400:])

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", train), ("t10k", test)):
        idx = np.asarray(idx)
        write_idx(out / f"{split}-images-idx3-ubyte.gz", images[idx])
        write_idx(out / f"{split}-labels-idx1-ubyte.gz", labels[idx])
        print(f"{split}: {len(idx)} examples")


if __name__ == "__main__":
    main(*sys.argv[1:])
