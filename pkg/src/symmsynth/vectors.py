"""Dense vector primitives and the labeled embedding batch.

All arithmetic is 64-bit floating point. Zero-norm inputs are a hard error
wherever a unit direction is required.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidShape, NotNormalized, ZeroVector

NORM_TOL = 1e-9


def as_vector(x) -> np.ndarray:
    """Coerce input to a 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidShape(f"expected a 1-D vector, got shape {v.shape}")
    return v


def unit_vector(x) -> np.ndarray:
    """Return x / ||x||. Raises ZeroVector for a zero-norm input."""
    v = as_vector(x)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroVector("cannot normalize a zero vector")
    return v / n


def dot_product(a, b) -> float:
    va, vb = as_vector(a), as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"dimensions differ: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.dot(va, vb))


def euclidean_distance(a, b) -> float:
    va, vb = as_vector(a), as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"dimensions differ: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.linalg.norm(va - vb))


def cosine_similarity(a, b) -> float:
    va, vb = as_vector(a), as_vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"dimensions differ: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float(np.dot(va, vb) / (na * nb))


@dataclass(frozen=True)
class EmbeddingBatch:
    """N feature points with integer class labels.

    `l2_normalized` asserts that every row has unit Euclidean norm; losses
    use it to enforce their normalization convention.
    """

    points: np.ndarray
    labels: np.ndarray
    l2_normalized: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        lab = np.asarray(self.labels)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidShape(f"points must be (N, d), got {pts.shape}")
        if lab.ndim != 1 or lab.shape[0] != pts.shape[0]:
            raise InvalidShape("labels must be a 1-D array matching the point count")
        if not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == lab.astype(np.int64)):
                raise InvalidShape("labels must be integers")
        lab = lab.astype(np.int64)
        if not np.all(np.isfinite(pts)):
            raise InvalidShape("points contain NaN or Inf")
        if self.l2_normalized:
            norms = np.linalg.norm(pts, axis=1)
            if np.max(np.abs(norms - 1.0)) > NORM_TOL:
                raise NotNormalized(
                    "l2_normalized flag set but some row norm deviates from 1 "
                    f"by {np.max(np.abs(norms - 1.0)):.3e}"
                )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def pairwise_matrix(batch: EmbeddingBatch, metric: str) -> np.ndarray:
    """(N, N) matrix of dot products, cosine similarities or Euclidean distances."""
    x = batch.points
    if metric == "dot":
        return x @ x.T
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0.0):
            raise ZeroVector("cosine pairwise matrix undefined with zero points")
        g = x @ x.T
        return g / norms[:, None] / norms[None, :]
    if metric == "euclidean":
        g = x @ x.T
        sq = np.diag(g)
        d2 = sq[:, None] + sq[None, :] - 2.0 * g
        np.fill_diagonal(d2, 0.0)
        return np.sqrt(np.maximum(d2, 0.0))
    raise InvalidShape(f"unknown metric {metric!r}")
