"""Command-line interface: dataset generation, training, evaluation, ablations.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure
(non-finite loss), 4 I/O failure. Every run writes its resolved
configuration next to its outputs, and identical flags plus seed produce
byte-identical data files; wall-clock timings live in a separate sidecar
so the main log stays reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .data import gen_gaussian_clusters, load_dataset, save_dataset, split_by_class
from .errors import NonFiniteLoss, ParseError, SymmSynthError
from .evaluation import evaluate
from .figures import plot_loss_curve, plot_ratio_curve, plot_recall_curves
from .losses import LossConfig
from .models import ModelSpec
from .optim import OptimizerConfig
from .synthesis import DEFAULT_ALPHA, DEFAULT_BETA, SynthesisParams
from .training import TrainConfig, save_checkpoint, load_checkpoint, train_loop

OUTPUT_ROOT_ENV = "SYMMSYNTH_OUTPUT_ROOT"

ALPHA_BETA_GRID = ((1.5, 1.0), (2.0, 1.0), (2.5, 1.0), (2.0, 0.5), (2.0, 1.5))
TOPK_GRID = (1, 2, 4, 8, 16)

DISTANCE_KINDS = ("triplet", "lifted")


def _fmt(v) -> str:
    return repr(float(v))


def _out_dir(args, default_name: str) -> Path:
    if args.out:
        d = Path(args.out)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        d = root / default_name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _loss_config(args) -> LossConfig:
    ablation = (args.alpha != DEFAULT_ALPHA or args.beta != DEFAULT_BETA
                or args.force_norm)
    synth = SynthesisParams(alpha=args.alpha, beta=args.beta,
                            ablation=ablation, force_norm=args.force_norm)
    return LossConfig(kind=args.loss, symm=args.symm, margin_m=args.margin,
                      angle_bound_deg=args.angle, topk=args.topk,
                      semi_hard=args.semi_hard, synthesis=synth)


def _l2_flag(args) -> bool:
    """Resolve the embedding normalization flag against the loss family."""
    needs_l2 = args.loss in DISTANCE_KINDS
    if args.l2 is not None and args.l2 != needs_l2:
        raise SymmSynthError(
            f"--{'l2' if args.l2 else 'no-l2'} is inconsistent with the "
            f"{args.loss} loss family")
    return needs_l2


def _write_train_outputs(out: Path, model, log, cfg_dict, test_ds, args):
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg_dict, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "train_log.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,loss,syn_ratio\n")
        for rec in log.steps:
            ratio = "" if rec.syn_ratio is None else _fmt(rec.syn_ratio)
            fh.write(f"{rec.iteration},{_fmt(rec.loss)},{ratio}\n")
    with open(out / "step_times.csv", "w", encoding="utf-8") as fh:
        fh.write("iter,wall_ms\n")
        for rec in log.steps:
            fh.write(f"{rec.iteration},{rec.wall_ms:.3f}\n")
    if log.steps:
        plot_loss_curve([r.iteration for r in log.steps],
                        [r.loss for r in log.steps], out / "loss_curve.png")
    if log.evals:
        with open(out / "recall_curve.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,recall_at_1\n")
            for it, rep in log.evals:
                fh.write(f"{it},{_fmt(rep['recall_at']['1'])}\n")
        plot_recall_curves(
            [("recall@1", [it for it, _ in log.evals],
              [rep["recall_at"]["1"] for _, rep in log.evals])],
            out / "recall_curve.png")
    if any(r.syn_ratio is not None for r in log.steps):
        with open(out / "syn_ratio_curve.csv", "w", encoding="utf-8") as fh:
            fh.write("iter,syn_ratio\n")
            for rec in log.steps:
                if rec.syn_ratio is not None:
                    fh.write(f"{rec.iteration},{_fmt(rec.syn_ratio)}\n")
        pts = [(r.iteration, r.syn_ratio) for r in log.steps if r.syn_ratio is not None]
        plot_ratio_curve([p[0] for p in pts], [p[1] for p in pts],
                         out / "syn_ratio_curve.png")
    emb = model.embed(test_ds.features, test_ds.labels)
    report = evaluate(emb, ks=tuple(args.ks), seed=args.seed)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return report


def cmd_gen_data(args) -> int:
    ds = gen_gaussian_clusters(args.classes, args.per_class, args.dim,
                               center_scale=args.center_scale,
                               cluster_std=args.cluster_std, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: {len(ds.classes)} classes, "
          f"{ds.num_samples} samples, dim {ds.input_dim}")
    return 0


def cmd_train(args) -> int:
    loss_cfg = _loss_config(args)
    _l2_flag(args)
    name = f"{args.loss}{'-symm' if args.symm else ''}-seed{args.seed}"
    out = _out_dir(args, name)
    ds = load_dataset(args.data)
    train_ds, test_ds = split_by_class(ds, args.train_fraction, seed=args.split_seed)
    l2 = loss_cfg.kind in DISTANCE_KINDS
    spec = ModelSpec(kind=args.model, input_dim=ds.input_dim,
                     embedding_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                     l2_output=l2)
    opt_cfg = OptimizerConfig(kind=args.optimizer, learning_rate=args.lr)
    tcfg = TrainConfig(seed=args.seed, iterations=args.iters,
                       classes_per_batch=args.classes_per_batch,
                       eval_every=args.eval_every, loss=loss_cfg)
    from .models import Model
    from .optim import Optimizer
    from .training import sample_batch, train_step, TrainLog

    model = Model.initialize(spec, seed=tcfg.seed)
    optimizer = Optimizer(opt_cfg)
    log = TrainLog()
    for it in range(tcfg.iterations):
        inputs, labels = sample_batch(train_ds, tcfg, it)
        rec = train_step(model, optimizer, inputs, labels, loss_cfg, iteration=it)
        log.steps.append(rec)
        if tcfg.eval_every and (it + 1) % tcfg.eval_every == 0:
            emb = model.embed(test_ds.features, test_ds.labels)
            log.evals.append((it + 1, evaluate(emb, ks=tuple(args.ks),
                                               seed=tcfg.seed).to_dict()))
    cfg_dict = {
        "command": "train",
        "data": str(args.data),
        "loss": {"kind": loss_cfg.kind, "symm": loss_cfg.symm,
                 "margin_m": loss_cfg.margin_m,
                 "angle_bound_deg": loss_cfg.angle_bound_deg,
                 "topk": loss_cfg.topk, "semi_hard": loss_cfg.semi_hard,
                 "alpha": loss_cfg.synthesis.alpha, "beta": loss_cfg.synthesis.beta,
                 "force_norm": loss_cfg.synthesis.force_norm},
        "model": {"kind": spec.kind, "input_dim": spec.input_dim,
                  "embedding_dim": spec.embedding_dim, "hidden_dim": spec.hidden_dim,
                  "l2_output": spec.l2_output},
        "optimizer": {"kind": opt_cfg.kind, "learning_rate": opt_cfg.learning_rate},
        "train": {"seed": tcfg.seed, "iterations": tcfg.iterations,
                  "classes_per_batch": tcfg.classes_per_batch,
                  "eval_every": tcfg.eval_every,
                  "train_fraction": args.train_fraction,
                  "split_seed": args.split_seed},
    }
    report = _write_train_outputs(out, model, log, cfg_dict, test_ds, args)
    save_checkpoint(out / "checkpoint.json", model, optimizer, tcfg,
                    iteration=tcfg.iterations)
    print(f"run complete: {out}")
    print(f"final recall@1 {report.recall_at[min(report.recall_at)]:.4f} "
          f"nmi {report.nmi:.4f} f1 {report.f1:.4f}")
    return 0


def cmd_eval(args) -> int:
    model, _, _, seed = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    if args.split == "test":
        _, ds_eval = split_by_class(ds, args.train_fraction, seed=args.split_seed)
    elif args.split == "train":
        ds_eval, _ = split_by_class(ds, args.train_fraction, seed=args.split_seed)
    else:
        ds_eval = ds
    emb = model.embed(ds_eval.features, ds_eval.labels)
    report = evaluate(emb, ks=tuple(args.ks), seed=args.seed if args.seed is not None
                      else seed)
    payload = report.to_dict()
    with open(args.out_metrics, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if args.dump_embeddings:
        with open(args.dump_embeddings, "w", encoding="utf-8") as fh:
            dim = emb.points.shape[1]
            fh.write("id,label," + ",".join(f"e{i}" for i in range(dim)) + "\n")
            for i, (label, row) in enumerate(zip(emb.labels, emb.points)):
                fh.write(f"{i},{int(label)}," + ",".join(repr(float(v)) for v in row) + "\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    out = _out_dir(args, f"ablate-{args.mode}-seed{args.seed}")
    runs = []
    if args.mode == "alpha-beta":
        runs.append(("baseline", dict(symm=False)))
        for a, b in ALPHA_BETA_GRID:
            runs.append((f"alpha{a}-beta{b}", dict(symm=True, alpha=a, beta=b)))
    elif args.mode == "topk":
        runs.append(("baseline", dict(symm=False)))
        for k in TOPK_GRID:
            runs.append((f"topk{k}", dict(symm=True, topk=k)))
    else:
        runs.append(("ratio", dict(symm=True)))
    summary = []
    curves = []
    for name, overrides in runs:
        sub = argparse.Namespace(**vars(args))
        sub.symm = overrides.get("symm", True)
        sub.alpha = overrides.get("alpha", DEFAULT_ALPHA)
        sub.beta = overrides.get("beta", DEFAULT_BETA)
        sub.topk = overrides.get("topk", 1)
        sub.out = str(out / name)
        sub.semi_hard = False
        sub.force_norm = False
        sub.l2 = None
        try:
            loss_cfg = _loss_config(sub)
            run_out = Path(sub.out)
            run_out.mkdir(parents=True, exist_ok=True)
            ds = load_dataset(args.data)
            train_ds, test_ds = split_by_class(ds, args.train_fraction,
                                               seed=args.split_seed)
            spec = ModelSpec(kind=args.model, input_dim=ds.input_dim,
                             embedding_dim=args.embed_dim, hidden_dim=args.hidden_dim,
                             l2_output=loss_cfg.kind in DISTANCE_KINDS)
            tcfg = TrainConfig(seed=args.seed, iterations=args.iters,
                               classes_per_batch=args.classes_per_batch,
                               eval_every=args.eval_every, loss=loss_cfg)
            model, log = train_loop(train_ds, spec,
                                    OptimizerConfig(kind=args.optimizer,
                                                    learning_rate=args.lr),
                                    tcfg, eval_dataset=test_ds, eval_ks=tuple(args.ks))
            cfg_dict = {"command": "ablate", "grid_point": name, "mode": args.mode,
                        "loss": loss_cfg.kind, "symm": loss_cfg.symm,
                        "alpha": loss_cfg.synthesis.alpha,
                        "beta": loss_cfg.synthesis.beta, "topk": loss_cfg.topk,
                        "seed": args.seed, "iterations": args.iters}
            report = _write_train_outputs(run_out, model, log, cfg_dict, test_ds, args)
            final_r1 = report.recall_at[min(report.recall_at)]
            summary.append((name, "ok", final_r1))
            if log.evals:
                curves.append((name, [it for it, _ in log.evals],
                               [rep["recall_at"]["1"] for _, rep in log.evals]))
        except NonFiniteLoss as e:
            summary.append((name, f"non-finite@{e.iteration}", float("nan")))
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("run,status,final_recall_at_1\n")
        for name, status, r1 in summary:
            fh.write(f"{name},{status},{_fmt(r1)}\n")
    if curves:
        plot_recall_curves(curves, out / "recall_comparison.png",
                           title=f"Recall@1 ({args.mode})")
    print(f"ablation grid complete: {out}")
    for name, status, r1 in summary:
        print(f"  {name}: {status} recall@1={r1:.4f}" if status == "ok"
              else f"  {name}: {status}")
    return 0


def _add_train_flags(p: argparse.ArgumentParser, require_loss=True):
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=["triplet", "lifted", "npair", "angular"],
                   required=require_loss)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes-per-batch", type=int, default=64)
    p.add_argument("--eval-every", type=int, default=0)
    p.add_argument("--model", choices=["linear", "mlp2"], default="linear")
    p.add_argument("--embed-dim", type=int, default=512)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--angle", type=float, default=45.0)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--ks", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symmsynth",
        description="Metric learning with symmetrical synthetic hard negatives")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a Gaussian-cluster dataset")
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--per-class", type=int, required=True)
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--center-scale", type=float, default=1.0)
    g.add_argument("--cluster-std", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train an embedding model")
    _add_train_flags(t)
    t.add_argument("--symm", action=argparse.BooleanOptionalAction, default=False)
    t.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    t.add_argument("--beta", type=float, default=DEFAULT_BETA)
    t.add_argument("--force-norm", action="store_true")
    t.add_argument("--topk", type=int, default=1)
    t.add_argument("--semi-hard", action="store_true")
    l2 = t.add_mutually_exclusive_group()
    l2.add_argument("--l2", dest="l2", action="store_true", default=None)
    l2.add_argument("--no-l2", dest="l2", action="store_false")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=["test", "train", "all"], default="test")
    e.add_argument("--train-fraction", type=float, default=0.5)
    e.add_argument("--split-seed", type=int, default=0)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--ks", type=int, nargs="+", default=[1, 2, 4, 8])
    e.add_argument("--out-metrics", default="metrics.json")
    e.add_argument("--dump-embeddings", default=None)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="run an ablation grid")
    a.add_argument("--mode", choices=["alpha-beta", "topk", "ratio"], required=True)
    _add_train_flags(a)
    a.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonFiniteLoss as e:
        print(f"error: non-finite loss at iteration {e.iteration}: {e}",
              file=sys.stderr)
        return 3
    except (FileNotFoundError, PermissionError, IsADirectoryError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except SymmSynthError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
