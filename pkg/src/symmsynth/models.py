"""Embedding models: a linear map and a two-layer ReLU MLP.

Both run on the autodiff engine so loss gradients flow back into the
weights. Outputs can be row-wise l2-normalized for the distance-based
loss family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionMismatch
from .vectors import EmbeddingBatch

MODEL_KINDS = ("linear", "mlp2")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    embedding_dim: int = 512
    hidden_dim: int = 0
    l2_output: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.embedding_dim < 1:
            raise ConfigError("dims must be >= 1")
        if self.kind == "mlp2" and self.hidden_dim < 1:
            raise ConfigError("mlp2 requires hidden_dim >= 1")


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Model:
    """Parameter container with a forward pass building an autodiff graph."""

    def __init__(self, spec: ModelSpec, params: dict[str, np.ndarray]):
        self.spec = spec
        self.params = {k: Tensor(v, requires_grad=True) for k, v in params.items()}

    @classmethod
    def initialize(cls, spec: ModelSpec, seed: int = 0) -> "Model":
        rng = np.random.default_rng(seed)
        if spec.kind == "linear":
            params = {
                "W": _xavier(rng, spec.input_dim, spec.embedding_dim),
                "b": np.zeros(spec.embedding_dim),
            }
        else:
            params = {
                "W1": _xavier(rng, spec.input_dim, spec.hidden_dim),
                "b1": np.zeros(spec.hidden_dim),
                "W2": _xavier(rng, spec.hidden_dim, spec.embedding_dim),
                "b2": np.zeros(spec.embedding_dim),
            }
        return cls(spec, params)

    def param_names(self) -> list[str]:
        return sorted(self.params)

    def forward_graph(self, inputs: np.ndarray) -> Tensor:
        """Embedding tensor for a (N, input_dim) array, gradients enabled."""
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise DimensionMismatch(
                f"expected (N, {self.spec.input_dim}) inputs, got {X.shape}")
        Xt = Tensor(X)
        if self.spec.kind == "linear":
            E = Xt @ self.params["W"] + self.params["b"].reshape(1, -1)
        else:
            H = ad.relu(Xt @ self.params["W1"] + self.params["b1"].reshape(1, -1))
            E = H @ self.params["W2"] + self.params["b2"].reshape(1, -1)
        if self.spec.l2_output:
            n = ad.sqrt((E * E).sum(axis=1, keepdims=True))
            E = E / n
        return E

    def embed(self, inputs: np.ndarray, labels: np.ndarray) -> EmbeddingBatch:
        """Forward pass detached into an EmbeddingBatch."""
        E = self.forward_graph(inputs)
        return EmbeddingBatch(E.data.copy(), np.asarray(labels),
                              l2_normalized=self.spec.l2_output)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def state(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for k, t in self.params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise DimensionMismatch(f"parameter {k}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()


def forward(model: Model, inputs: np.ndarray, labels: np.ndarray) -> EmbeddingBatch:
    return model.embed(inputs, labels)
