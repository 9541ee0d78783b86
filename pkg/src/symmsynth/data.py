"""Synthetic dataset generation, tabular I/O, and class-disjoint splitting.

Dataset files are UTF-8 text with a header line ``label,f0,...,f{D-1}`` and
one sample per row. Features are written with ``repr`` so that a save/load
round trip reproduces every fp64 value exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassTooSmall, InvalidFraction, InvalidShape, ParseError


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels)
        if feats.ndim != 2:
            raise InvalidShape("features must be a 2-d array")
        if labs.shape != (feats.shape[0],):
            raise InvalidShape("labels must have one entry per sample")
        if not np.issubdtype(labs.dtype, np.integer):
            raise InvalidShape("labels must be integers")
        if not np.all(np.isfinite(feats)):
            raise InvalidShape("features must be finite")
        classes, counts = np.unique(labs, return_counts=True)
        small = classes[counts < 2]
        if len(small):
            raise ClassTooSmall(f"class {int(small[0])} has fewer than 2 samples")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs.astype(np.int64))

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)


def gen_gaussian_clusters(
    num_classes: int,
    per_class: int,
    input_dim: int,
    center_scale: float = 1.0,
    cluster_std: float = 0.1,
    seed: int = 0,
) -> Dataset:
    """Isotropic Gaussian blobs around uniformly drawn class centers."""
    if num_classes < 2 or per_class < 2 or input_dim < 1:
        raise InvalidShape("need num_classes >= 2, per_class >= 2, input_dim >= 1")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-center_scale, center_scale, size=(num_classes, input_dim))
    noise = rng.normal(0.0, 1.0, size=(num_classes, per_class, input_dim))
    feats = (centers[:, None, :] + cluster_std * noise).reshape(-1, input_dim)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return Dataset(feats, labels, name=f"gaussian{num_classes}x{per_class}d{input_dim}")


def save_dataset(ds: Dataset, path) -> None:
    """Write the tabular format with full-precision decimal features."""
    with open(path, "w", encoding="utf-8") as fh:
        header = "label," + ",".join(f"f{i}" for i in range(ds.input_dim))
        fh.write(header + "\n")
        for label, row in zip(ds.labels, ds.features):
            fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(path, name: str | None = None) -> Dataset:
    """Parse the tabular format; malformed cells raise ParseError with location."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty dataset file", line=1, column=1)
    header = lines[0].split(",")
    if header[0] != "label" or len(header) < 2:
        raise ParseError("header must be 'label,f0,...'", line=1, column=1)
    dim = len(header) - 1
    labels, feats = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise ParseError(f"expected {dim + 1} columns, got {len(cells)}",
                             line=lineno, column=len(cells))
        try:
            label = int(cells[0])
        except ValueError:
            raise ParseError(f"bad label {cells[0]!r}", line=lineno, column=1) from None
        if label < 0:
            raise ParseError("labels must be nonnegative", line=lineno, column=1)
        row = np.empty(dim)
        for col, cell in enumerate(cells[1:], start=2):
            try:
                row[col - 2] = float(cell)
            except ValueError:
                raise ParseError(f"bad feature {cell!r}", line=lineno, column=col) from None
        labels.append(label)
        feats.append(row)
    if not feats:
        raise ParseError("dataset has no samples", line=2, column=1)
    return Dataset(np.array(feats), np.array(labels, dtype=np.int64),
                   name=name or str(path))


def split_by_class(ds: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded class-disjoint partition; both splits are nonempty."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction("train_fraction must lie strictly between 0 and 1")
    classes = ds.classes
    rng = np.random.default_rng(seed)
    perm = rng.permutation(classes)
    n_train = int(np.clip(round(train_fraction * len(classes)), 1, len(classes) - 1))
    train_classes = set(int(c) for c in perm[:n_train])
    in_train = np.array([int(l) in train_classes for l in ds.labels])
    train = Dataset(ds.features[in_train], ds.labels[in_train], name=ds.name + "-train")
    test = Dataset(ds.features[~in_train], ds.labels[~in_train], name=ds.name + "-test")
    return train, test
