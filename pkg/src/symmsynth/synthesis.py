"""Symmetrical synthetic point generation.

A synthetic point is the reflection of one same-class point across the line
through the origin and another same-class point:

    r = (x_k . u) u        with u = x_axis / ||x_axis||
    x_k' = beta * (alpha * (r - x_k) + x_k)

At alpha=2, beta=1 this is an exact reflection: it preserves the norm of
x_k and its similarity/distance to the axis point. The pair (alpha, beta)
is locked to (2.0, 1.0) unless the params are explicitly marked as an
ablation configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatch, ZeroVector
from .vectors import as_vector

DEFAULT_ALPHA = 2.0
DEFAULT_BETA = 1.0


@dataclass(frozen=True)
class SynthesisParams:
    """Reflection extent (alpha) and norm scale (beta).

    `force_norm` rescales the synthetic back to the original point's norm,
    used by the alpha ablation so that only similarity changes.
    """

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    ablation: bool = False
    force_norm: bool = False

    def __post_init__(self):
        if not self.ablation and (self.alpha != DEFAULT_ALPHA or self.beta != DEFAULT_BETA):
            raise ConfigError(
                "alpha/beta are fixed at (2.0, 1.0); non-default values require "
                "an explicit ablation configuration"
            )
        if self.force_norm and not self.ablation:
            raise ConfigError("force_norm is an ablation-only option")


@dataclass(frozen=True)
class AugmentedClassGroup:
    """One class's two original points and their two synthetics."""

    label: int
    originals: tuple[np.ndarray, np.ndarray]
    synthetics: tuple[np.ndarray, np.ndarray]

    @property
    def points(self) -> list[np.ndarray]:
        """All four candidate points, originals first."""
        return [self.originals[0], self.originals[1], self.synthetics[0], self.synthetics[1]]


def project(x_k, x_l) -> np.ndarray:
    """Orthogonal projection of x_k onto the direction of x_l."""
    vk, vl = as_vector(x_k), as_vector(x_l)
    if vk.shape != vl.shape:
        raise DimensionMismatch(f"dimensions differ: {vk.shape[0]} vs {vl.shape[0]}")
    n = float(np.linalg.norm(vl))
    if n == 0.0:
        raise ZeroVector("projection axis has zero norm")
    u = vl / n
    return float(np.dot(vk, u)) * u


def synthesize(x_k, x_l, params: SynthesisParams = SynthesisParams()) -> np.ndarray:
    """Generate the synthetic counterpart of x_k with x_l as the axis."""
    vk = as_vector(x_k)
    r = project(vk, x_l)
    out = params.beta * (params.alpha * (r - vk) + vk)
    if params.force_norm:
        n_out = float(np.linalg.norm(out))
        if n_out == 0.0:
            raise ZeroVector("cannot rescale a zero synthetic point")
        out = out * (float(np.linalg.norm(vk)) / n_out)
    return out


def augment_class_pair(
    x_i, x_j, params: SynthesisParams = SynthesisParams(), label: int = 0
) -> AugmentedClassGroup:
    """Build the four-point group for one class: x_i, x_j and their reflections."""
    vi, vj = as_vector(x_i), as_vector(x_j)
    syn_i = synthesize(vi, vj, params)
    syn_j = synthesize(vj, vi, params)
    return AugmentedClassGroup(label=int(label), originals=(vi, vj), synthetics=(syn_i, syn_j))
