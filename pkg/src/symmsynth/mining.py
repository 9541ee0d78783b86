"""Hard negative pair mining over original + synthetic points.

Between an augmented positive group and an augmented negative group there
are 16 candidate pairs (4 positive-side points x 4 negative-side points).
Candidates are enumerated in lexicographic (positive index, negative index)
order, which is also the deterministic tie-break order for selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyStats, InvalidShape, RankOutOfRange, SameClass
from .synthesis import AugmentedClassGroup
from .vectors import dot_product, euclidean_distance

ORIGIN_FLAGS = ("original", "original", "synthetic", "synthetic")


@dataclass(frozen=True)
class NegativePairCandidate:
    positive_point: np.ndarray
    positive_origin: str
    positive_index: int
    negative_point: np.ndarray
    negative_origin: str
    negative_index: int
    value: float


@dataclass(frozen=True)
class AngularTripletCandidate:
    """Positive-pair variant (p, q) plus one negative point r, with its f^n value."""

    pair_points: tuple[np.ndarray, np.ndarray]
    pair_origins: tuple[str, str]
    pair_index: int
    negative_point: np.ndarray
    negative_origin: str
    negative_index: int
    value: float


@dataclass(frozen=True)
class MiningResult:
    selected: object
    rank: int
    all_values: np.ndarray


@dataclass
class SelectionStats:
    """Endpoint tallies over mined selections (each pair contributes both ends)."""

    count_original: int = 0
    count_synthetic: int = 0

    def add(self, *origins: str):
        for o in origins:
            if o == "synthetic":
                self.count_synthetic += 1
            else:
                self.count_original += 1

    def merge(self, other: "SelectionStats"):
        self.count_original += other.count_original
        self.count_synthetic += other.count_synthetic


def enumerate_negative_pairs(
    pos: AugmentedClassGroup, neg: AugmentedClassGroup, metric: str
) -> list[NegativePairCandidate]:
    """All 16 candidate pairs between the two groups with their metric values."""
    if pos.label == neg.label:
        raise SameClass(f"both groups have label {pos.label}")
    if metric == "euclidean":
        scalar = euclidean_distance
    elif metric == "dot":
        scalar = dot_product
    else:
        raise InvalidShape(f"unknown mining metric {metric!r}")
    ppoints = pos.points
    npoints = neg.points
    out = []
    for pi in range(4):
        for ni in range(4):
            out.append(
                NegativePairCandidate(
                    positive_point=ppoints[pi],
                    positive_origin=ORIGIN_FLAGS[pi],
                    positive_index=pi,
                    negative_point=npoints[ni],
                    negative_origin=ORIGIN_FLAGS[ni],
                    negative_index=ni,
                    value=scalar(ppoints[pi], npoints[ni]),
                )
            )
    return out


# positive-pair variants used for angular triplets: (x_i,x_j), (x_i',x_j),
# (x_i,x_j'), (x_i',x_j')
PAIR_VARIANTS = ((0, 1), (2, 1), (0, 3), (2, 3))


def enumerate_angular_triplets(
    pos: AugmentedClassGroup, neg: AugmentedClassGroup, angle_bound_deg: float = 45.0
) -> list[AngularTripletCandidate]:
    """16 triplets: 4 positive-pair variants x 4 negative points, with f^n values.

    f^n(p, q, r) = 4 tan^2(angle) (x_p + x_q) . x_r
    """
    if pos.label == neg.label:
        raise SameClass(f"both groups have label {pos.label}")
    tan2 = math.tan(math.radians(angle_bound_deg)) ** 2
    ppoints = pos.points
    npoints = neg.points
    out = []
    for pair_idx, (a, b) in enumerate(PAIR_VARIANTS):
        pair_sum = ppoints[a] + ppoints[b]
        for ni in range(4):
            out.append(
                AngularTripletCandidate(
                    pair_points=(ppoints[a], ppoints[b]),
                    pair_origins=(ORIGIN_FLAGS[a], ORIGIN_FLAGS[b]),
                    pair_index=pair_idx,
                    negative_point=npoints[ni],
                    negative_origin=ORIGIN_FLAGS[ni],
                    negative_index=ni,
                    value=4.0 * tan2 * dot_product(pair_sum, npoints[ni]),
                )
            )
    return out


def hardest(candidates, mode: str, k: int = 1) -> MiningResult:
    """Select the k-th hardest candidate.

    `min_distance` ranks ascending by value, `max_similarity` descending.
    Ties are broken by candidate enumeration order (lexicographic in the
    positive/negative indices).
    """
    n = len(candidates)
    if not 1 <= k <= n:
        raise RankOutOfRange(f"rank {k} outside 1..{n}")
    values = np.array([c.value for c in candidates], dtype=np.float64)
    if mode == "min_distance":
        order = np.argsort(values, kind="stable")
    elif mode == "max_similarity":
        order = np.argsort(-values, kind="stable")
    else:
        raise InvalidShape(f"unknown mining mode {mode!r}")
    sel = int(order[k - 1])
    return MiningResult(selected=candidates[sel], rank=k, all_values=values)


def selection_ratio(stats: SelectionStats) -> float:
    """Fraction of mined endpoints that are synthetic."""
    total = stats.count_original + stats.count_synthetic
    if total <= 0:
        raise EmptyStats("no selections recorded")
    return stats.count_synthetic / total
