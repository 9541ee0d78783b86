"""Retrieval and clustering metrics: Recall@K, k-means NMI, pairwise F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KTooLarge, LengthMismatch
from .vectors import EmbeddingBatch


@dataclass(frozen=True)
class MetricsReport:
    recall_at: dict[int, float]
    nmi: float
    f1: float
    num_queries: int
    num_clusters: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
            "nmi": self.nmi,
            "f1": self.f1,
            "num_queries": self.num_queries,
            "num_clusters": self.num_clusters,
            "seed": self.seed,
        }


def recall_at_k(emb: EmbeddingBatch, ks) -> dict[int, float]:
    """Fraction of queries with a same-label point among the K nearest.

    Euclidean distance, the query itself excluded, distance ties broken by
    ascending sample index (stable sort).
    """
    ks = [int(k) for k in ks]
    X, labels = emb.points, emb.labels
    n = X.shape[0]
    if max(ks) > n - 1:
        raise KTooLarge(f"K={max(ks)} but only {n - 1} neighbors exist")
    n2 = np.sum(X * X, axis=1)
    d2 = n2[:, None] + n2[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    hit = labels[order] == labels[:, None]
    out = {}
    for k in ks:
        out[k] = float(np.mean(np.any(hit[:, :k], axis=1)))
    return out


def kmeans(emb: EmbeddingBatch, k: int, seed: int = 0,
           max_iter: int = 100, tol: float = 1e-9) -> np.ndarray:
    """Lloyd's algorithm with greedy distance-weighted seeding.

    Seeding draws each next center with probability proportional to the
    squared distance to the closest center already chosen. Empty clusters
    are reseeded to the point farthest from its assigned center.
    """
    X = emb.points
    n = X.shape[0]
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} points")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centers[c] = X[rng.integers(n)]
        else:
            centers[c] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, np.sum((X - centers[c]) ** 2, axis=1))
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = assign == c
            if members.any():
                new_centers[c] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(n), assign]))
                new_centers[c] = X[far]
                assign[far] = c
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol:
            break
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    return table


def nmi(assignment, labels) -> float:
    """Mutual information normalized by the arithmetic mean of entropies.

    Returns 1.0 when both partitions are single-block (trivially identical)
    and 0.0 when exactly one has zero entropy.
    """
    assignment = np.asarray(assignment)
    labels = np.asarray(labels)
    if assignment.shape != labels.shape:
        raise LengthMismatch("assignment and labels differ in length")
    table = _contingency(assignment, labels)
    n = table.sum()
    ha = _entropy(table.sum(axis=1))
    hl = _entropy(table.sum(axis=0))
    if ha == 0.0 and hl == 0.0:
        return 1.0
    if ha == 0.0 or hl == 0.0:
        return 0.0
    pa = table.sum(axis=1) / n
    pl = table.sum(axis=0) / n
    pj = table / n
    outer = pa[:, None] * pl[None, :]
    mask = pj > 0
    mi = float(np.sum(pj[mask] * np.log(pj[mask] / outer[mask])))
    return mi / ((ha + hl) / 2.0)


def pairwise_f1(assignment, labels) -> float:
    """F1 over unordered sample pairs, computed from contingency pair counts."""
    assignment = np.asarray(assignment)
    labels = np.asarray(labels)
    if assignment.shape != labels.shape:
        raise LengthMismatch("assignment and labels differ in length")

    def pairs(x):
        return float(np.sum(x * (x - 1.0) / 2.0))

    table = _contingency(assignment, labels)
    tp = pairs(table)
    same_cluster = pairs(table.sum(axis=1))
    same_label = pairs(table.sum(axis=0))
    fp = same_cluster - tp
    fn = same_label - tp
    if tp == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def evaluate(emb: EmbeddingBatch, ks=(1, 2, 4, 8), seed: int = 0) -> MetricsReport:
    """Recall@K plus NMI/F1 of a k-means clustering with k = #distinct labels."""
    recalls = recall_at_k(emb, ks)
    k = len(np.unique(emb.labels))
    assign = kmeans(emb, k, seed=seed)
    return MetricsReport(
        recall_at=recalls,
        nmi=nmi(assign, emb.labels),
        f1=pairwise_f1(assign, emb.labels),
        num_queries=emb.points.shape[0],
        num_clusters=k,
        seed=seed,
    )
