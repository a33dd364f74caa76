"""
Rebuild the bundled MNIST subset from mlxtend's ``mnist_5k.csv.gz``.

That file holds 5000 real MNIST digits, 500 per class (pixels 0-255, label
in the last column). Per class, the first 400 go to the training split and
the remaining 100 to the test split; each split is then shuffled with a fixed
seed and written as gzip-compressed IDX files.

    pip download mlxtend==0.24.0 --no-deps -d /tmp/dl
    python data/mnist_subset/make_subset.py /tmp/dl/mlxtend-0.24.0-py3-none-any.whl
"""

import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

import numpy as np

wheel = sys.argv[1]
out = Path(__file__).resolve().parent
with zipfile.ZipFile(wheel) as z:
    raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
d = np.loadtxt(io.BytesIO(raw), delimiter=",")
X = d[:, :-1].astype(np.uint8)
y = d[:, -1].astype(np.uint8)

train, test = [], []
for c in range(10):
    idx = np.flatnonzero(y == c)
    train.extend(idx[:400])
    test.extend(idx[400:])
rng = np.random.default_rng(20190701)
train, test = rng.permutation(train), rng.permutation(test)


def write(path, arr, magic):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", s) for s in arr.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + arr.tobytes())


for name, idx in (("train", train), ("t10k", test)):
    write(out / f"{name}-images-idx3-ubyte.gz", X[idx].reshape(-1, 28, 28), 0x803)
    write(out / f"{name}-labels-idx1-ubyte.gz", y[idx], 0x801)
print(f"{len(train)} training and {len(test)} test images written to {out}")
