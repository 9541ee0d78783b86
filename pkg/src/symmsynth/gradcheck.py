"""Finite-difference verification of the analytic loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses as _L
from .autodiff import Tensor
from .errors import TieDetected
from .losses import LossConfig, LossOutput, build_loss_graph, evaluate_loss
from .mining import PAIR_VARIANTS
from .vectors import EmbeddingBatch

DEFAULT_TIE_TOL = 1e-7


@dataclass(frozen=True)
class GradientReport:
    max_rel_error: float
    worst_coordinate: tuple[int, int]
    eps: float


def loss_with_gradient(batch: EmbeddingBatch, cfg: LossConfig) -> LossOutput:
    """Loss value plus exact gradient; identical to the loss-module forward."""
    return evaluate_loss(batch, cfg)


def _loss_value(points: np.ndarray, labels: np.ndarray, cfg: LossConfig) -> float:
    """Forward value only; bypasses the normalization-flag gate so the
    perturbed points used by finite differences need not sit on the sphere."""
    loss, _ = build_loss_graph(Tensor(points), labels, cfg)
    return loss.item()


def central_difference_grad(f, x: np.ndarray, eps: float) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * eps)
    return g


def compare_gradients(analytic: np.ndarray, numeric: np.ndarray, eps: float) -> GradientReport:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    return GradientReport(max_rel_error=float(np.max(rel)),
                          worst_coordinate=(int(worst[0]), int(worst[1])),
                          eps=eps)


def _degeneracy_gap(points: np.ndarray, labels: np.ndarray, cfg: LossConfig) -> float:
    """Smallest margin to a non-differentiable switch for this batch.

    Covers hinge arguments (relu kinks), semi-hard selection boundaries and,
    for the symm variants, the spread of the 16 candidate values around the
    selected rank (a mining tie flips the selection under perturbation).
    """
    gaps = [np.inf]
    S = points @ points.T
    n2 = np.diag(S).copy()
    d2 = n2[:, None] + n2[None, :] - 2.0 * S
    if cfg.kind == "triplet" and not cfg.symm:
        I, J = _L._ordered_pairs(labels)
        neg = labels[I][:, None] != labels[None, :]
        hinge = d2[I, J][:, None] - d2[I] + cfg.margin_m
        gaps.append(np.min(np.abs(hinge[neg])))
        if cfg.semi_hard:
            gaps.append(np.min(np.abs((d2[I] - d2[I, J][:, None])[neg])))
    if cfg.kind == "lifted" and not cfg.symm:
        I, J = _L._ordered_pairs(labels)
        diff = labels[:, None] != labels[None, :]
        d = np.sqrt(np.maximum(d2, 0.0))
        rs = np.sum(np.exp(cfg.margin_m - d) * diff, axis=1)
        gaps.append(np.min(np.abs(np.log(rs[I] + rs[J]) + d[I, J])))
    if cfg.symm:
        idx_a, idx_b = _L._pair_layout(labels)
        C = len(idx_a)
        St, n2t = _L._gram(Tensor(points))
        GA, GB = _L._candidate_coefficients(St, n2t, idx_a, idx_b, cfg.synthesis)
        if cfg.kind == "angular":
            u_idx = [u for u, _ in PAIR_VARIANTS]
            v_idx = [v for _, v in PAIR_VARIANTS]
            PA = GA[:, u_idx] + GA[:, v_idx]
            PB = GB[:, u_idx] + GB[:, v_idx]
            vals = _L._bilinear_candidates(St, idx_a, idx_b, PA, PB, GA, GB).data
        else:
            vals = _L._bilinear_candidates(St, idx_a, idx_b, GA, GB, GA, GB).data
            if cfg.uses_distance:
                n2c = (GA * GA).data * n2[idx_a][:, None] \
                    + 2.0 * (GA * GB).data * S[idx_a, idx_b][:, None] \
                    + (GB * GB).data * n2[idx_b][:, None]
                vals = n2c[:, None, :, None] + n2c[None, :, None, :] - 2.0 * vals
        rid, cid = _L._offdiag_indices(C)
        key = vals[rid, cid].reshape(C, C - 1, 16)
        # sort hardest-first so rank topk-1 is the selected candidate
        hard = np.sort(key if cfg.uses_distance else -key, axis=-1)
        sel = hard[..., cfg.topk - 1]
        if cfg.topk > 1:
            gaps.append(np.min(sel - hard[..., cfg.topk - 2]))
        if cfg.topk < 16:
            gaps.append(np.min(hard[..., cfg.topk] - sel))
        mined = sel if cfg.uses_distance else -sel
        if cfg.kind == "triplet":
            d2pos = d2[idx_a, idx_b]
            gaps.append(np.min(np.abs(d2pos[:, None] - mined + cfg.margin_m)))
        if cfg.kind == "lifted":
            inner = np.sum(np.exp(cfg.margin_m - np.sqrt(np.maximum(mined, 0.0))), axis=1)
            dpos = np.sqrt(np.maximum(d2[idx_a, idx_b], 0.0))
            gaps.append(np.min(np.abs(np.log(inner) + dpos)))
    return float(np.min(gaps))


def finite_difference_check(
    cfg: LossConfig,
    batch: EmbeddingBatch,
    eps: float,
    tie_tol: float = DEFAULT_TIE_TOL,
    max_retries: int = 10,
    rng: np.random.Generator | None = None,
) -> GradientReport:
    """Compare analytic against central-difference gradients on one batch.

    Batches sitting within `tie_tol` of a mining tie or hinge kink are
    resampled (same shape, labels and normalization) up to `max_retries`
    times; `TieDetected` is raised if no clean batch is found.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    rng = rng or np.random.default_rng(0)
    points, labels = batch.points.copy(), batch.labels
    for attempt in range(max_retries + 1):
        if _degeneracy_gap(points, labels, cfg) >= tie_tol:
            break
        if attempt == max_retries:
            raise TieDetected(f"no tie-free batch found in {max_retries} retries")
        points = rng.normal(size=points.shape)
        if batch.l2_normalized:
            points /= np.linalg.norm(points, axis=1, keepdims=True)
    X = Tensor(points, requires_grad=True)
    loss, _ = build_loss_graph(X, labels, cfg)
    loss.backward()
    analytic = X.grad if X.grad is not None else np.zeros_like(points)
    numeric = central_difference_grad(lambda p: _loss_value(p, labels, cfg), points, eps)
    return compare_gradients(analytic, numeric, eps)
