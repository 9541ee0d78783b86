"""Mini-batch sampling, training loop, logging, and checkpoints.

Reproducibility contract: every batch is drawn from a generator seeded with
``(seed, iteration)``, so the full run is a pure function of the dataset,
the configs, and the seed — two identical runs produce bit-identical logs
and weights.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError, InsufficientClasses, NonFiniteLoss
from .losses import LossConfig, build_loss_graph
from .models import Model, ModelSpec
from .optim import Optimizer, OptimizerConfig

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    iterations: int = 2000
    classes_per_batch: int = 64
    samples_per_class: int = 2
    eval_every: int = 0
    loss: LossConfig = field(default_factory=lambda: LossConfig(kind="npair", symm=True))

    def __post_init__(self):
        if self.samples_per_class != 2:
            raise ConfigError("samples_per_class is fixed at 2")
        if self.iterations < 0 or self.classes_per_batch < 2 or self.eval_every < 0:
            raise ConfigError("invalid training sizes")

    @property
    def batch_size(self) -> int:
        return self.classes_per_batch * 2


@dataclass
class StepRecord:
    iteration: int
    loss: float
    syn_ratio: float | None
    wall_ms: float


@dataclass
class TrainLog:
    steps: list[StepRecord] = field(default_factory=list)
    evals: list[tuple[int, dict]] = field(default_factory=list)


def sample_batch(
    dataset: Dataset, cfg: TrainConfig, iteration: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw classes_per_batch distinct classes, two distinct samples each."""
    classes = dataset.classes
    if len(classes) < cfg.classes_per_batch:
        raise InsufficientClasses(
            f"need {cfg.classes_per_batch} classes, dataset has {len(classes)}")
    rng = np.random.default_rng([cfg.seed, iteration])
    chosen = rng.choice(classes, size=cfg.classes_per_batch, replace=False)
    rows = []
    for c in chosen:
        members = np.nonzero(dataset.labels == c)[0]
        rows.extend(rng.choice(members, size=2, replace=False))
    rows = np.array(rows)
    return dataset.features[rows], dataset.labels[rows]


def train_step(
    model: Model, optimizer: Optimizer, inputs: np.ndarray, labels: np.ndarray,
    loss_cfg: LossConfig, iteration: int = 0,
) -> StepRecord:
    """One forward/backward/update pass; returns the log record."""
    from .mining import selection_ratio

    t0 = time.perf_counter()
    model.zero_grad()
    E = model.forward_graph(inputs)
    loss, stats = build_loss_graph(E, labels, loss_cfg)
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteLoss(
            f"loss became non-finite ({value}) at iteration {iteration}",
            iteration=iteration,
            diagnostics={"loss": value, "kind": loss_cfg.kind, "symm": loss_cfg.symm},
        )
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for k, t in model.params.items()}
    if any(not np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFiniteLoss(
            f"gradient became non-finite at iteration {iteration}",
            iteration=iteration,
            diagnostics={"loss": value, "kind": loss_cfg.kind, "symm": loss_cfg.symm},
        )
    optimizer.step({k: t.data for k, t in model.params.items()}, grads)
    ratio = None
    if stats is not None and (stats.count_original + stats.count_synthetic) > 0:
        ratio = selection_ratio(stats)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return StepRecord(iteration=iteration, loss=value, syn_ratio=ratio, wall_ms=wall_ms)


def train_loop(
    dataset: Dataset,
    model_spec: ModelSpec,
    optimizer_cfg: OptimizerConfig,
    train_cfg: TrainConfig,
    eval_dataset: Dataset | None = None,
    eval_ks: tuple[int, ...] = (1, 2, 4, 8),
) -> tuple[Model, TrainLog]:
    """Run the full loop; optionally evaluate on a held-out split periodically."""
    model = Model.initialize(model_spec, seed=train_cfg.seed)
    optimizer = Optimizer(optimizer_cfg)
    log = TrainLog()
    for it in range(train_cfg.iterations):
        inputs, labels = sample_batch(dataset, train_cfg, it)
        rec = train_step(model, optimizer, inputs, labels, train_cfg.loss, iteration=it)
        log.steps.append(rec)
        if (train_cfg.eval_every and eval_dataset is not None
                and (it + 1) % train_cfg.eval_every == 0):
            log.evals.append((it + 1, _eval_snapshot(model, eval_dataset, eval_ks,
                                                    train_cfg.seed)))
    return model, log


def _eval_snapshot(model: Model, dataset: Dataset, ks, seed: int) -> dict:
    from .evaluation import evaluate

    emb = model.embed(dataset.features, dataset.labels)
    return evaluate(emb, ks=ks, seed=seed).to_dict()


def save_checkpoint(path, model: Model, optimizer: Optimizer, train_cfg: TrainConfig,
                    iteration: int) -> None:
    """Versioned JSON container with fp64-exact weights and optimizer state."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_spec": {k: getattr(model.spec, k) for k in model.spec.__dataclass_fields__},
        "params": {k: v.tolist() for k, v in model.state().items()},
        "optimizer": {
            "config": {k: getattr(optimizer.cfg, k)
                       for k in optimizer.cfg.__dataclass_fields__},
            "t": optimizer.t,
            "m": {k: v.tolist() for k, v in optimizer.m.items()},
            "v": {k: v.tolist() for k, v in optimizer.v.items()},
        },
        "iteration": iteration,
        "rng": {"scheme": "seed-iteration", "seed": train_cfg.seed},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Model, Optimizer, int, int]:
    """Returns (model, optimizer, iteration, seed)."""
    from .errors import ParseError

    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"corrupt checkpoint: {e.msg}",
                             line=e.lineno, column=e.colno) from None
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError("unsupported checkpoint version", line=1, column=1)
    spec = ModelSpec(**payload["model_spec"])
    model = Model.initialize(spec, seed=0)
    model.load_state({k: np.array(v) for k, v in payload["params"].items()})
    opt = Optimizer(OptimizerConfig(**payload["optimizer"]["config"]))
    opt.load_state({"t": payload["optimizer"]["t"],
                    "m": payload["optimizer"]["m"],
                    "v": payload["optimizer"]["v"]})
    return model, opt, int(payload["iteration"]), int(payload["rng"]["seed"])
