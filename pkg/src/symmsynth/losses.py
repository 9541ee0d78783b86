"""The four metric-learning losses and their symmetrical-synthesis variants.

Every loss is evaluated through the autodiff graph, so the returned value
and the analytic gradient come from the same computation.

Conventions shared by all losses:

- The positive-pair set P contains all ordered same-class pairs, and each
  loss is a mean over its terms; this makes every value invariant under
  permuting points within a class.
- Baseline N-pair and angular losses aggregate negatives per class (the
  mean of the exp terms over a negative class's points), matching their
  one-negative-per-class batch construction.
- Symm variants mine the hardest of the 16 candidate pairs (or angular
  triplets) per (positive class, negative class) and contribute one term
  per negative class. Mining selections are treated as locally constant
  for differentiation.
- Triplet and lifted structure losses require l2-normalized batches;
  N-pair and angular losses require non-normalized batches.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    ConfigError,
    InvalidShape,
    NoNegatives,
    NoPositivePairs,
    NotNormalized,
)
from .mining import PAIR_VARIANTS, SelectionStats
from .synthesis import SynthesisParams
from .vectors import EmbeddingBatch

LOSS_KINDS = ("triplet", "lifted", "npair", "angular")
# families using l2-normalized features with Euclidean distance
DISTANCE_KINDS = ("triplet", "lifted")

_NEG_INF_FILL = -1e30


@dataclass(frozen=True)
class LossConfig:
    kind: str
    symm: bool = False
    margin_m: float = 1.0
    angle_bound_deg: float = 45.0
    topk: int = 1
    semi_hard: bool = False
    synthesis: SynthesisParams = field(default_factory=SynthesisParams)

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}")
        if self.kind in ("triplet", "lifted") and not self.margin_m > 0.0:
            raise ConfigError("margin_m must be positive")
        if not 0.0 < self.angle_bound_deg < 90.0:
            raise ConfigError("angle_bound_deg must lie in (0, 90)")
        if not 1 <= self.topk <= 16:
            raise ConfigError("topk must lie in 1..16")
        if self.semi_hard and (self.symm or self.kind != "triplet"):
            raise ConfigError("semi_hard applies to the baseline triplet loss only")

    @property
    def uses_distance(self) -> bool:
        return self.kind in DISTANCE_KINDS


@dataclass(frozen=True)
class LossOutput:
    value: float
    gradient: np.ndarray
    stats: SelectionStats | None = None


# ---------------------------------------------------------------------------
# batch structure helpers


def _ordered_pairs(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(labels.shape[0])
    eq = labels[:, None] == labels[None, :]
    np.fill_diagonal(eq, False)
    ii, jj = np.nonzero(eq)
    return idx[ii], idx[jj]


def _class_indices(labels: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    classes = np.unique(labels)
    return classes, [np.nonzero(labels == c)[0] for c in classes]


def _pair_layout(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First/second index per class for a 2-samples-per-class batch."""
    classes, members = _class_indices(labels)
    if any(len(m) != 2 for m in members):
        raise InvalidShape("symm losses require exactly two samples per class")
    idx_a = np.array([m[0] for m in members])
    idx_b = np.array([m[1] for m in members])
    return idx_a, idx_b


def _check_convention(batch: EmbeddingBatch, cfg: LossConfig):
    if cfg.uses_distance and not batch.l2_normalized:
        raise NotNormalized(f"{cfg.kind} loss requires an l2-normalized batch")
    if not cfg.uses_distance and batch.l2_normalized:
        raise NotNormalized(f"{cfg.kind} loss requires a non-normalized batch")


# ---------------------------------------------------------------------------
# shared graph pieces


def _gram(X: Tensor):
    n = X.shape[0]
    S = X @ X.T
    diag = (np.arange(n), np.arange(n))
    n2 = S[diag]
    return S, n2


def _squared_distances(S: Tensor, n2: Tensor) -> Tensor:
    n = S.shape[0]
    return n2.reshape(n, 1) + n2.reshape(1, n) - 2.0 * S


def _masked_fill(Z: Tensor, mask: np.ndarray) -> Tensor:
    """Keep entries where mask, push the rest to -inf surrogate (exp -> 0)."""
    m = mask.astype(np.float64)
    return Z * m + _NEG_INF_FILL * (1.0 - m)


def _log1p_sum_exp(Z: Tensor, weights: np.ndarray) -> Tensor:
    """Rowwise stable log(1 + sum_j w_j exp(Z_j)) with w_j >= 0.

    Entries with zero weight must already be filled with the -inf surrogate.
    """
    rows = Z.shape[0]
    with np.errstate(invalid="ignore"):
        m = np.max(np.where(weights > 0.0, Z.data, -np.inf), axis=1)
    m = np.maximum(m, 0.0)
    m[~np.isfinite(m)] = 0.0
    inner = (ad.exp(Z - m.reshape(rows, 1)) * weights).sum(axis=1)
    return Tensor(m) + ad.log(np.exp(-m) + inner)


def _neg_class_weights(labels: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """(len(anchors), N) weights: 1/|class| on other-class points, else 0."""
    _, members = _class_indices(labels)
    w = np.zeros(labels.shape[0])
    for m in members:
        w[m] = 1.0 / len(m)
    W = np.tile(w, (len(anchors), 1))
    same = labels[anchors][:, None] == labels[None, :]
    W[same] = 0.0
    return W


# ---------------------------------------------------------------------------
# baseline losses


def _baseline_triplet(X, labels, cfg):
    I, J = _ordered_pairs(labels)
    S, n2 = _gram(X)
    D2 = _squared_distances(S, n2)
    d2pos = D2[(I, J)]
    neg = labels[I][:, None] != labels[None, :]
    if cfg.semi_hard:
        # among negatives with D_ik > D_ij take the smallest D_ik,
        # falling back to the largest D_ik when none exists
        d2 = D2.data
        sel = np.empty(len(I), dtype=np.int64)
        for p in range(len(I)):
            cand = np.nonzero(neg[p])[0]
            harder = cand[d2[I[p], cand] > d2[I[p], J[p]]]
            if len(harder):
                sel[p] = harder[np.argmin(d2[I[p], harder])]
            else:
                sel[p] = cand[np.argmax(d2[I[p], cand])]
        term = ad.relu(d2pos - D2[(I, sel)] + cfg.margin_m)
        return term.mean(), None
    rows = D2[I]
    hinge = ad.relu(d2pos.reshape(-1, 1) - rows + cfg.margin_m) * neg.astype(np.float64)
    return hinge.sum() / float(neg.sum()), None


def _baseline_lifted(X, labels, cfg):
    I, J = _ordered_pairs(labels)
    S, n2 = _gram(X)
    D = ad.sqrt(ad.relu(_squared_distances(S, n2)))
    diff = labels[:, None] != labels[None, :]
    E = ad.exp(_masked_fill(cfg.margin_m - D, diff))
    row_sum = E.sum(axis=1)
    bracket = ad.relu(ad.log(row_sum[I] + row_sum[J]) + D[(I, J)])
    return (bracket ** 2).sum() / (2.0 * len(I)), None


def _baseline_npair(X, labels, cfg):
    I, J = _ordered_pairs(labels)
    S, _ = _gram(X)
    Z = S[I] - S[(I, J)].reshape(-1, 1)
    W = _neg_class_weights(labels, I)
    term = _log1p_sum_exp(_masked_fill(Z, W > 0.0), W)
    return term.mean(), None


def _baseline_angular(X, labels, cfg):
    I, J = _ordered_pairs(labels)
    S, _ = _gram(X)
    tan2 = math.tan(math.radians(cfg.angle_bound_deg)) ** 2
    fp = 2.0 * (1.0 + tan2) * S[(I, J)]
    fn = 4.0 * tan2 * (S[I] + S[J])
    Z = fn - fp.reshape(-1, 1)
    W = _neg_class_weights(labels, I)
    term = _log1p_sum_exp(_masked_fill(Z, W > 0.0), W)
    return term.mean(), None


# ---------------------------------------------------------------------------
# symm variants: candidate Gram tensor over original + synthetic points

PAIR_VARIANT_SYN_COUNT = np.array([0, 1, 1, 2])


def _candidate_coefficients(S, n2, idx_a, idx_b, params: SynthesisParams):
    """Coefficients of the four candidate points in the (a, b) basis.

    Synthetic points are linear combinations of the class's two originals,
    so every candidate similarity can be assembled from the original Gram
    matrix without materializing the synthetic coordinates.
    """
    C = len(idx_a)
    s_ab = S[(idx_a, idx_b)]
    n2a, n2b = n2[idx_a], n2[idx_b]
    base = params.beta * (1.0 - params.alpha)
    ones = Tensor(np.ones((C, 1)))
    zeros = Tensor(np.zeros((C, 1)))
    cAa = Tensor(np.full((C, 1), base))
    cAb = (params.beta * params.alpha) * (s_ab / n2b).reshape(C, 1)
    cBb = Tensor(np.full((C, 1), base))
    cBa = (params.beta * params.alpha) * (s_ab / n2a).reshape(C, 1)
    if params.force_norm:
        n2_synA = cAa * cAa * n2a.reshape(C, 1) + 2.0 * cAa * cAb * s_ab.reshape(C, 1) \
            + cAb * cAb * n2b.reshape(C, 1)
        n2_synB = cBb * cBb * n2b.reshape(C, 1) + 2.0 * cBb * cBa * s_ab.reshape(C, 1) \
            + cBa * cBa * n2a.reshape(C, 1)
        scaleA = ad.sqrt(n2a.reshape(C, 1) / n2_synA)
        scaleB = ad.sqrt(n2b.reshape(C, 1) / n2_synB)
        cAa, cAb = cAa * scaleA, cAb * scaleA
        cBa, cBb = cBa * scaleB, cBb * scaleB
    # candidate order: a, b, a', b'
    GA = ad.concat([ones, zeros, cAa, cBa], axis=1)
    GB = ad.concat([zeros, ones, cAb, cBb], axis=1)
    return GA, GB


def _bilinear_candidates(S, idx_a, idx_b, PA, PB, GA, GB):
    """T[c, k, p, n] = (sum_s P[c,p,s] x_s) . (sum_t G[k,n,t] x_t) from Gram blocks."""
    C = len(idx_a)
    Saa = S[np.ix_(idx_a, idx_a)]
    Sab = S[np.ix_(idx_a, idx_b)]
    Sba = S[np.ix_(idx_b, idx_a)]
    Sbb = S[np.ix_(idx_b, idx_b)]
    P = PA.shape[1]
    Wa = PA.reshape(C, 1, P) * Saa.reshape(C, C, 1) + PB.reshape(C, 1, P) * Sba.reshape(C, C, 1)
    Wb = PA.reshape(C, 1, P) * Sab.reshape(C, C, 1) + PB.reshape(C, 1, P) * Sbb.reshape(C, C, 1)
    T = Wa.reshape(C, C, P, 1) * GA.reshape(1, C, 1, -1) \
        + Wb.reshape(C, C, P, 1) * GB.reshape(1, C, 1, -1)
    return T


@functools.lru_cache(maxsize=32)
def _offdiag_indices(C: int):
    rid = np.repeat(np.arange(C), C - 1).reshape(C, C - 1)
    cid = np.arange(C - 1)[None, :] + (np.arange(C - 1)[None, :] >= np.arange(C)[:, None])
    return rid, cid


def _select(values: np.ndarray, maximize: bool, k: int):
    """Per-row k-th extreme over the last axis with first-index tie-break."""
    v = -values if maximize else values
    if k == 1:
        return np.argmin(v, axis=-1)
    order = np.argsort(v, axis=-1, kind="stable")
    return np.take(order, k - 1, axis=-1)


def _bilinear_data(S, idx_a, idx_b, PA, PB, GA, GB):
    """Detached candidate values T[c, k, p, n]; used only to pick selections.

    Evaluated as a batched (p, 2) @ (2, 2) @ (2, n) product per class pair.
    """
    C = len(idx_a)
    s = S.data
    Smat = np.empty((C, C, 2, 2))
    Smat[:, :, 0, 0] = s[np.ix_(idx_a, idx_a)]
    Smat[:, :, 0, 1] = s[np.ix_(idx_a, idx_b)]
    Smat[:, :, 1, 0] = s[np.ix_(idx_b, idx_a)]
    Smat[:, :, 1, 1] = s[np.ix_(idx_b, idx_b)]
    P = np.stack([PA, PB], axis=2)
    G = np.stack([GA, GB], axis=1)
    W = np.matmul(P[:, None, :, :], Smat)
    return np.matmul(W, G[None, :, :, :])


def _bilinear_selected(S, idx_a, idx_b, PA, PB, GA, GB, rid, cid, p_sel, n_sel):
    """Graph tensor of the selected candidate values only, shape (C, C-1).

    Assembles <p-side point, n-side point> for the chosen candidate of each
    (class, other class) cell from the Gram entries of the four originals.
    """
    pa = PA[rid, p_sel]
    pb = PB[rid, p_sel]
    ga = GA[cid, n_sel]
    gb = GB[cid, n_sel]
    ra, rb = idx_a[rid], idx_b[rid]
    ca, cb = idx_a[cid], idx_b[cid]
    return pa * (ga * S[(ra, ca)] + gb * S[(ra, cb)]) \
        + pb * (ga * S[(rb, ca)] + gb * S[(rb, cb)])


def _mined_pairs(S, n2, idx_a, idx_b, cfg):
    """Mined candidate tensor entries per (class, other class).

    Returns (mined similarity tensor or mined squared distance tensor of
    shape (C, C-1), selection stats). Selection values are computed outside
    the graph (mining is locally constant); only the selected entries are
    rebuilt as graph nodes.
    """
    GA, GB = _candidate_coefficients(S, n2, idx_a, idx_b, cfg.synthesis)
    C = len(idx_a)
    rid, cid = _offdiag_indices(C)
    ga, gb = GA.data, GB.data
    vals = _bilinear_data(S, idx_a, idx_b, ga, gb, ga, gb)[rid, cid]
    if cfg.uses_distance:
        n2d = ga * ga * n2.data[idx_a][:, None] \
            + 2.0 * ga * gb * S.data[idx_a, idx_b][:, None] \
            + gb * gb * n2.data[idx_b][:, None]
        d2vals = n2d[rid][:, :, :, None] + n2d[cid][:, :, None, :] - 2.0 * vals
        sel = _select(d2vals.reshape(C, C - 1, 16), maximize=False, k=cfg.topk)
        p_sel, n_sel = sel // 4, sel % 4
        n2a, n2b = n2[idx_a], n2[idx_b]
        n2cand = GA * GA * n2a.reshape(C, 1) \
            + 2.0 * GA * GB * S[(idx_a, idx_b)].reshape(C, 1) \
            + GB * GB * n2b.reshape(C, 1)
        mined_s = _bilinear_selected(S, idx_a, idx_b, GA, GB, GA, GB,
                                     rid, cid, p_sel, n_sel)
        mined = n2cand[rid, p_sel] + n2cand[cid, n_sel] - 2.0 * mined_s
    else:
        sel = _select(vals.reshape(C, C - 1, 16), maximize=True, k=cfg.topk)
        p_sel, n_sel = sel // 4, sel % 4
        mined = _bilinear_selected(S, idx_a, idx_b, GA, GB, GA, GB,
                                   rid, cid, p_sel, n_sel)
    stats = SelectionStats()
    stats.count_synthetic = int((p_sel >= 2).sum() + (n_sel >= 2).sum())
    stats.count_original = 2 * C * (C - 1) - stats.count_synthetic
    return mined, stats


def _symm_triplet(X, labels, cfg):
    idx_a, idx_b = _pair_layout(labels)
    if len(idx_a) < 2:
        raise NoNegatives("need at least two classes")
    S, n2 = _gram(X)
    mined_d2, stats = _mined_pairs(S, n2, idx_a, idx_b, cfg)
    d2pos = n2[idx_a] + n2[idx_b] - 2.0 * S[(idx_a, idx_b)]
    term = ad.relu(d2pos.reshape(-1, 1) - mined_d2 + cfg.margin_m)
    return term.mean(), stats


def _symm_lifted(X, labels, cfg):
    idx_a, idx_b = _pair_layout(labels)
    if len(idx_a) < 2:
        raise NoNegatives("need at least two classes")
    S, n2 = _gram(X)
    mined_d2, stats = _mined_pairs(S, n2, idx_a, idx_b, cfg)
    mined_d = ad.sqrt(ad.relu(mined_d2))
    d_pos = ad.sqrt(ad.relu(n2[idx_a] + n2[idx_b] - 2.0 * S[(idx_a, idx_b)]))
    inner = ad.exp(cfg.margin_m - mined_d).sum(axis=1)
    bracket = ad.relu(ad.log(inner) + d_pos)
    return (bracket ** 2).mean(), stats


def _symm_npair(X, labels, cfg):
    idx_a, idx_b = _pair_layout(labels)
    C = len(idx_a)
    S, n2 = _gram(X)
    if C < 2:
        return Tensor(0.0) * S.sum(), SelectionStats(count_original=0, count_synthetic=0)
    mined_s, stats = _mined_pairs(S, n2, idx_a, idx_b, cfg)
    Z = mined_s - S[(idx_a, idx_b)].reshape(C, 1)
    term = _log1p_sum_exp(Z, np.ones((C, C - 1)))
    return term.mean(), stats


def _symm_angular(X, labels, cfg):
    idx_a, idx_b = _pair_layout(labels)
    C = len(idx_a)
    S, n2 = _gram(X)
    if C < 2:
        return Tensor(0.0) * S.sum(), SelectionStats(count_original=0, count_synthetic=0)
    tan2 = math.tan(math.radians(cfg.angle_bound_deg)) ** 2
    GA, GB = _candidate_coefficients(S, n2, idx_a, idx_b, cfg.synthesis)
    u_idx = [u for u, _ in PAIR_VARIANTS]
    v_idx = [v for _, v in PAIR_VARIANTS]
    PA = GA[:, u_idx] + GA[:, v_idx]
    PB = GB[:, u_idx] + GB[:, v_idx]
    rid, cid = _offdiag_indices(C)
    vals = _bilinear_data(S, idx_a, idx_b, PA.data, PB.data, GA.data, GB.data)[rid, cid]
    sel = _select(vals.reshape(C, C - 1, 16), maximize=True, k=cfg.topk)
    pq_sel, n_sel = sel // 4, sel % 4
    mined_f = (4.0 * tan2) * _bilinear_selected(S, idx_a, idx_b, PA, PB, GA, GB,
                                                rid, cid, pq_sel, n_sel)
    stats = SelectionStats()
    stats.count_synthetic = int(PAIR_VARIANT_SYN_COUNT[pq_sel].sum() + (n_sel >= 2).sum())
    stats.count_original = 3 * C * (C - 1) - stats.count_synthetic
    fp = 2.0 * (1.0 + tan2) * S[(idx_a, idx_b)]
    Z = mined_f - fp.reshape(C, 1)
    term = _log1p_sum_exp(Z, np.ones((C, C - 1)))
    return term.mean(), stats


_BUILDERS = {
    ("triplet", False): _baseline_triplet,
    ("lifted", False): _baseline_lifted,
    ("npair", False): _baseline_npair,
    ("angular", False): _baseline_angular,
    ("triplet", True): _symm_triplet,
    ("lifted", True): _symm_lifted,
    ("npair", True): _symm_npair,
    ("angular", True): _symm_angular,
}


def build_loss_graph(X: Tensor, labels: np.ndarray, cfg: LossConfig):
    """Loss scalar tensor plus mining stats (None for baselines).

    Structural preconditions are checked here; the normalization convention
    is checked only by the batch-level entry points.
    """
    labels = np.asarray(labels)
    I, _ = _ordered_pairs(labels)
    if len(I) == 0:
        raise NoPositivePairs("batch contains no same-class pair")
    if cfg.uses_distance and len(np.unique(labels)) < 2:
        raise NoNegatives("batch contains no cross-class pair")
    return _BUILDERS[(cfg.kind, cfg.symm)](X, labels, cfg)


def evaluate_loss(batch: EmbeddingBatch, cfg: LossConfig) -> LossOutput:
    """Loss value, gradient with respect to every batch point, mining stats."""
    _check_convention(batch, cfg)
    X = Tensor(batch.points, requires_grad=True)
    loss, stats = build_loss_graph(X, batch.labels, cfg)
    loss.backward()
    grad = X.grad if X.grad is not None else np.zeros_like(batch.points)
    return LossOutput(value=loss.item(), gradient=grad, stats=stats)


def _entry(kind: str, symm: bool):
    def op(batch: EmbeddingBatch, cfg: LossConfig) -> LossOutput:
        return evaluate_loss(batch, replace(cfg, kind=kind, symm=symm))

    op.__name__ = f"{kind}_{'symm' if symm else 'loss'}"
    return op


triplet_loss = _entry("triplet", False)
triplet_symm = _entry("triplet", True)
lifted_loss = _entry("lifted", False)
lifted_symm = _entry("lifted", True)
npair_loss = _entry("npair", False)
npair_symm = _entry("npair", True)
angular_loss = _entry("angular", False)
angular_symm = _entry("angular", True)
