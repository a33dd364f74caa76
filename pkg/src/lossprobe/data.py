"""
Benchmark datasets: XOR and MNIST (IDX format), plus seeded sampling helpers.

Random draws go through ``numpy.random.Generator`` on the PCG64 bit generator,
whose streams are fixed across platforms for a given seed.
"""

from __future__ import annotations

import gzip
import hashlib
import os
import shutil
import struct
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .nn import Batch

__all__ = [
    "Split",
    "Dataset",
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "xor_dataset",
    "read_idx",
    "write_idx",
    "load_mnist_idx",
    "load_mnist_dir",
    "subsample",
    "sample_batch",
    "fetch_mnist",
    "MNIST_FILES",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# canonical archive names and their published MD5 digests
MNIST_FILES = {
    "train_images": ("train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"),
    "train_labels": ("train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"),
    "test_images": ("t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"),
    "test_labels": ("t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"),
}
MNIST_MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    name: str
    split: Split = Split.TRAIN

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0] or self.inputs.shape[0] < 1:
            raise ValueError("dataset needs at least one pattern and matching targets")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]

    @property
    def output_dim(self):
        return self.targets.shape[1]

    def as_batch(self):
        return Batch(self.inputs, self.targets)


def xor_dataset():
    """The four exclusive-or patterns."""
    inputs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    targets = np.array([[0.0], [1.0], [1.0], [0.0]])
    return Dataset(inputs, targets, "xor", Split.TRAIN)


class IdxError(ValueError):
    """Malformed IDX file."""


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path, expected_magic=None):
    """Read an unsigned-byte IDX file into an array shaped by its header."""
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if expected_magic is not None and magic != expected_magic:
        raise IdxMagicError(f"{path}: magic number {magic:#010x}, expected {expected_magic:#010x}")
    if magic >> 8 != 0x08:
        raise IdxMagicError(f"{path}: magic number {magic:#010x} is not an unsigned-byte IDX file")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxTruncatedError(f"{path}: header declares {ndim} dimensions but file ends early")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(shape))
    if len(raw) - header < size:
        raise IdxTruncatedError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(shape)


def write_idx(path, array):
    """Write a uint8 array as an IDX file (gzip-compressed when ``path`` ends in .gz)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise TypeError("IDX writer only handles uint8 data")
    head = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    payload = head + np.ascontiguousarray(array).tobytes()
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.GzipFile(path, "wb", mtime=0) as f:
            f.write(payload)
    else:
        path.write_bytes(payload)


def load_mnist_idx(images_path, labels_path, split=Split.TRAIN, n_classes=10):
    """Load an image/label IDX pair as flattened [0, 1] inputs and one-hot targets."""
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    if labels.size and labels.max() >= n_classes:
        raise IdxError(f"label {labels.max()} outside 0..{n_classes - 1}")
    inputs = images.reshape(images.shape[0], -1).astype(float) / 255.0
    targets = np.eye(n_classes)[labels]
    return Dataset(inputs, targets, "mnist", Split(split))


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        candidate = Path(directory) / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def load_mnist_dir(directory):
    """Load the train and test splits from a directory holding the four IDX files."""
    stems = {key: name[: -len(".gz")] for key, (name, _) in MNIST_FILES.items()}
    train = load_mnist_idx(_find(directory, stems["train_images"]),
                           _find(directory, stems["train_labels"]), Split.TRAIN)
    test = load_mnist_idx(_find(directory, stems["test_images"]),
                          _find(directory, stems["test_labels"]), Split.TEST)
    return train, test


def subsample(dataset, n, rng):
    """``n`` patterns drawn without replacement."""
    if not 1 <= n <= len(dataset):
        raise ValueError(f"cannot subsample {n} patterns from {len(dataset)}")
    idx = rng.permutation(len(dataset))[:n]
    return Dataset(dataset.inputs[idx], dataset.targets[idx], dataset.name, dataset.split)


def sample_batch(dataset, batch_size, rng):
    """A uniformly drawn batch of distinct patterns."""
    if not 1 <= batch_size <= len(dataset):
        raise ValueError(f"batch size {batch_size} outside 1..{len(dataset)}")
    if batch_size == len(dataset):
        return dataset.as_batch()
    idx = rng.choice(len(dataset), size=batch_size, replace=False)
    return Batch(dataset.inputs[idx], dataset.targets[idx])


def _md5(path):
    digest = hashlib.md5()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fetch_mnist(directory, mirrors=MNIST_MIRRORS, timeout=60):
    """Download the four MNIST archives into ``directory`` and verify their checksums.

    Files already present with the right checksum are left alone. Nothing in
    the package calls this implicitly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fetched = []
    for name, md5 in MNIST_FILES.values():
        target = directory / name
        if target.exists() and _md5(target) == md5:
            fetched.append(target)
            continue
        errors = []
        for mirror in mirrors:
            partial = target.with_suffix(target.suffix + ".part")
            try:
                with urllib.request.urlopen(mirror + name, timeout=timeout) as resp, \
                        open(partial, "wb") as out:
                    shutil.copyfileobj(resp, out)
            except OSError as exc:
                errors.append(f"{mirror}: {exc}")
                continue
            if _md5(partial) != md5:
                os.remove(partial)
                errors.append(f"{mirror}: checksum mismatch")
                continue
            os.replace(partial, target)
            break
        else:
            raise OSError(f"could not fetch {name}: " + "; ".join(errors))
        fetched.append(target)
    return fetched
