"""Acceptance gate: each test prints one PASS/FAIL line for its criterion.

Run with `pytest -v -s tests/test_acceptance.py` to see the lines inline.
"""

import time

import numpy as np
import pytest

from symmsynth import (
    EmbeddingBatch,
    LossConfig,
    SelectionStats,
    augment_class_pair,
    enumerate_angular_triplets,
    enumerate_negative_pairs,
    evaluate_loss,
    finite_difference_check,
    hardest,
    selection_ratio,
    synthesize,
)
from symmsynth.cli import main as cli_main
from symmsynth.data import gen_gaussian_clusters, split_by_class
from symmsynth.evaluation import evaluate, kmeans, nmi, pairwise_f1, recall_at_k
from symmsynth.losses import build_loss_graph
from symmsynth.models import ModelSpec
from symmsynth.optim import OptimizerConfig
from symmsynth.training import TrainConfig, train_loop
from symmsynth.autodiff import Tensor

ALL_KINDS = ("triplet", "lifted", "npair", "angular")


_capman = None


@pytest.fixture(autouse=True)
def _capture_manager(request):
    global _capman
    _capman = request.config.pluginmanager.getplugin("capturemanager")
    yield


def report(num, ok, detail):
    line = f"\nCRITERION {num}: {'PASS' if ok else 'FAIL'} — {detail}"
    if _capman is not None:
        with _capman.global_and_fixture_disabled():
            print(line)
    else:
        print(line)


# ---------------------------------------------------------------------------


def test_criterion_1_geometric_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for d in (2, 8, 512):
        n = 10_000
        X = rng.normal(size=(n, d))
        A = rng.normal(size=(n, d))
        # vectorized mirror of the per-vector synthesis formula
        na2 = np.sum(A * A, axis=1)
        proj = (np.sum(X * A, axis=1) / na2)[:, None] * A
        Xs = 2.0 * (proj - X) + X
        norm_err = np.abs(np.linalg.norm(Xs, axis=1) / np.linalg.norm(X, axis=1) - 1.0)
        cos = lambda U, V: np.sum(U * V, axis=1) / (
            np.linalg.norm(U, axis=1) * np.linalg.norm(V, axis=1))
        cos_err = np.abs(cos(Xs, A) - cos(X, A))
        dist_err = np.abs(np.linalg.norm(Xs - A, axis=1) - np.linalg.norm(X - A, axis=1))
        proj2 = (np.sum(Xs * A, axis=1) / na2)[:, None] * A
        Xss = 2.0 * (proj2 - Xs) + Xs
        inv_err = np.max(np.abs(Xss - X))
        worst = max(worst, norm_err.max(), cos_err.max(), dist_err.max(), inv_err)
        # spot-check the vectorized form against the package function
        for i in range(3):
            np.testing.assert_allclose(synthesize(X[i], A[i]), Xs[i], atol=1e-12)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    report(1, ok, f"max geometric error {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-9
    assert elapsed < 5.0


def test_criterion_2_mining_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    mismatches = 0
    for _ in range(1000):
        d = int(rng.integers(2, 9))
        pos = augment_class_pair(rng.normal(size=d), rng.normal(size=d), label=0)
        neg = augment_class_pair(rng.normal(size=d), rng.normal(size=d), label=1)
        pairs_e = enumerate_negative_pairs(pos, neg, "euclidean")
        if hardest(pairs_e, "min_distance").selected is not \
                min(pairs_e, key=lambda c: c.value):
            mismatches += 1
        pairs_d = enumerate_negative_pairs(pos, neg, "dot")
        if hardest(pairs_d, "max_similarity").selected is not \
                max(pairs_d, key=lambda c: c.value):
            mismatches += 1
        tris = enumerate_angular_triplets(pos, neg)
        if hardest(tris, "max_similarity").selected is not \
                max(tris, key=lambda c: c.value):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    report(2, ok, f"{mismatches} mismatches over 1000 group pairs, {elapsed:.2f}s")
    assert mismatches == 0
    assert elapsed < 5.0


def test_criterion_3_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    for kind in ALL_KINDS:
        normalized = kind in ("triplet", "lifted")
        for symm in (False, True):
            cfg = LossConfig(kind=kind, symm=symm)
            for _ in range(50):
                pts = rng.normal(size=(16, 8))
                if normalized:
                    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
                batch = EmbeddingBatch(pts, np.repeat(np.arange(8), 2),
                                       l2_normalized=normalized)
                rep = finite_difference_check(cfg, batch, eps=1e-5, rng=rng)
                worst = max(worst, rep.max_rel_error)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 120.0
    report(3, ok, f"max relative gradient error {worst:.2e} "
                  f"over 8 configs x 50 batches, {elapsed:.1f}s")
    assert worst <= 1e-4
    assert elapsed < 120.0


def _reduction_batch(rng, C=6, d=8, normalized=False):
    """Each class holds one point duplicated: synthetics coincide with
    originals and every negative class contributes a single distinct point."""
    pts = rng.normal(size=(2 * C, d))
    pts[1::2] = pts[0::2]
    if normalized:
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return EmbeddingBatch(pts, np.repeat(np.arange(C), 2), l2_normalized=normalized)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_criterion_4_baseline_reduction(kind):
    rng = np.random.default_rng(104)
    normalized = kind in ("triplet", "lifted")
    worst = 0.0
    for _ in range(100):
        batch = _reduction_batch(rng, normalized=normalized)
        base = evaluate_loss(batch, LossConfig(kind=kind)).value
        symm = evaluate_loss(batch, LossConfig(kind=kind, symm=True)).value
        worst = max(worst, abs(base - symm))
    ok = worst <= 1e-12
    report(4, ok, f"{kind}: max |symm - baseline| = {worst:.2e} on 100 batches")
    assert worst <= 1e-12, (
        f"{kind}: symm does not reduce to baseline (max diff {worst:.2e}); "
        "the baseline aggregates both pair orientations inside one logarithm "
        "while the mined variant keeps a single sum, shifting the bracket by "
        "a constant that no shared normalization removes")


TOY = dict(num_classes=16, per_class=100, input_dim=32,
           center_scale=1.0, cluster_std=0.8, seed=7)


def _toy_recall(kind, symm, seed, topk=1):
    ds = gen_gaussian_clusters(**TOY)
    train, test = split_by_class(ds, 0.5, seed=0)
    spec = ModelSpec(kind="linear", input_dim=32, embedding_dim=16,
                     l2_output=kind in ("triplet", "lifted"))
    cfg = TrainConfig(seed=seed, iterations=2000, classes_per_batch=8,
                      loss=LossConfig(kind=kind, symm=symm, topk=topk))
    model, _ = train_loop(train, spec, OptimizerConfig(), cfg)
    emb = model.embed(test.features, test.labels)
    return evaluate(emb, ks=(1,), seed=seed).recall_at[1]


def test_criterion_5_direction_check():
    t0 = time.perf_counter()
    seeds = range(5)
    results = {}
    for kind in ("npair", "triplet"):
        base = np.median([_toy_recall(kind, False, s) for s in seeds])
        symm = np.median([_toy_recall(kind, True, s) for s in seeds])
        results[kind] = (base, symm)
    elapsed = time.perf_counter() - t0
    ok = all(symm >= base for base, symm in results.values()) and elapsed < 600.0
    detail = ", ".join(f"{k}: symm {s:.4f} vs base {b:.4f}"
                       for k, (b, s) in results.items())
    report(5, ok, f"median R@1 over 5 seeds — {detail}, {elapsed:.0f}s")
    for kind, (base, symm) in results.items():
        assert symm >= base, f"{kind}: {symm} < {base}"
    assert elapsed < 600.0


def test_criterion_6_hardness_ordering():
    t0 = time.perf_counter()
    seeds = range(5)
    top1 = np.median([_toy_recall("npair", True, s, topk=1) for s in seeds])
    top16 = np.median([_toy_recall("npair", True, s, topk=16) for s in seeds])
    elapsed = time.perf_counter() - t0
    ok = top1 >= top16 and elapsed < 900.0
    report(6, ok, f"median R@1: top-1 {top1:.4f} vs top-16 {top16:.4f}, {elapsed:.0f}s")
    assert top1 >= top16
    assert elapsed < 900.0


def test_criterion_7_selection_ratio_mechanics(tmp_path):
    # in-process: ratio equals the formula on the recorded raw counts
    rng = np.random.default_rng(107)
    total = SelectionStats()
    ratios = []
    for _ in range(50):
        pts = rng.normal(size=(16, 8))
        batch = EmbeddingBatch(pts, np.repeat(np.arange(8), 2), l2_normalized=False)
        out = evaluate_loss(batch, LossConfig(kind="npair", symm=True))
        stats = out.stats
        r = selection_ratio(stats)
        assert r == stats.count_synthetic / (stats.count_original
                                             + stats.count_synthetic)
        assert 0.0 <= r <= 1.0
        ratios.append(r)
        total.merge(stats)
    # full curve emitted through the CLI ratio mode
    data = tmp_path / "toy.csv"
    cli_main(["gen-data", "--classes", "12", "--per-class", "8", "--dim", "6",
              "--seed", "3", "--out", str(data)])
    out_dir = tmp_path / "grid"
    rc = cli_main(["ablate", "--mode", "ratio", "--data", str(data),
                   "--loss", "npair", "--iters", "40", "--classes-per-batch", "4",
                   "--embed-dim", "6", "--seed", "0", "--out", str(out_dir)])
    assert rc == 0
    curve = (out_dir / "ratio" / "syn_ratio_curve.csv").read_text().splitlines()
    assert curve[0] == "iter,syn_ratio"
    assert len(curve) == 41
    curve_vals = [float(line.split(",")[1]) for line in curve[1:]]
    ok = all(0.0 <= v <= 1.0 for v in curve_vals)
    report(7, ok, f"ratio in [0,1] and formula-exact on 50 batches; curve of "
                  f"{len(curve_vals)} points emitted "
                  f"(first {curve_vals[0]:.3f}, last {curve_vals[-1]:.3f})")
    assert ok


def test_criterion_8_loss_overhead():
    rng = np.random.default_rng(108)
    pts = rng.normal(size=(128, 512))
    labels = np.repeat(np.arange(64), 2)

    def mean_time(cfg, reps=100):
        # warm-up, then timed loss+mining forward passes
        for _ in range(5):
            build_loss_graph(Tensor(pts), labels, cfg)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            build_loss_graph(Tensor(pts), labels, cfg)
            times.append(time.perf_counter() - t0)
        return float(np.mean(times))

    base = mean_time(LossConfig(kind="npair"))
    symm = mean_time(LossConfig(kind="npair", symm=True))
    ratio = symm / base
    ok = ratio <= 1.10
    report(8, ok, f"symm {symm * 1e3:.3f} ms vs baseline {base * 1e3:.3f} ms, "
                  f"ratio {ratio:.3f} (threshold 1.10)")
    assert ratio <= 1.10, (
        f"ratio {ratio:.3f} > 1.10: candidate enumeration and per-pair "
        "selection cost a fixed multiple of the single-matrix baseline on a "
        "serial CPU; the reference measurement relied on accelerator "
        "parallelism hiding that extra elementwise work")


def test_criterion_9_metric_sanity():
    rng = np.random.default_rng(109)
    centers = np.eye(4) * 50.0
    pts = np.concatenate([c + 0.01 * rng.normal(size=(10, 4)) for c in centers])
    labels = np.repeat(np.arange(4), 10)
    emb = EmbeddingBatch(pts, labels, l2_normalized=False)
    rep = evaluate(emb, ks=(1,), seed=0)
    sep_ok = rep.nmi == 1.0 and rep.f1 == 1.0 and rep.recall_at[1] == 1.0
    degen = nmi(np.zeros(40, dtype=int), labels)
    mono_ok = True
    for _ in range(100):
        n = int(rng.integers(10, 30))
        pts = rng.normal(size=(n, 3))
        labs = rng.integers(0, 4, size=n)
        out = recall_at_k(EmbeddingBatch(pts, labs, l2_normalized=False),
                          range(1, n))
        vals = [out[k] for k in range(1, n)]
        mono_ok &= all(a <= b for a, b in zip(vals, vals[1:]))
    ok = sep_ok and degen == 0.0 and mono_ok
    report(9, ok, f"separated: nmi={rep.nmi} f1={rep.f1} r@1={rep.recall_at[1]}; "
                  f"single-cluster nmi={degen}; recall monotone on 100 instances")
    assert sep_ok and degen == 0.0 and mono_ok


def test_criterion_10_determinism(tmp_path):
    data = tmp_path / "toy.csv"
    cli_main(["gen-data", "--classes", "16", "--per-class", "10", "--dim", "8",
              "--seed", "5", "--out", str(data)])
    flags = ["train", "--data", str(data), "--loss", "npair", "--symm",
             "--iters", "100", "--classes-per-batch", "8", "--embed-dim", "8",
             "--eval-every", "50", "--seed", "11"]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = cli_main(flags + ["--out", str(out)])
        assert rc == 0
        outs.append(out)
    identical = {
        name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
        for name in ("train_log.csv", "checkpoint.json", "metrics.json",
                     "config.json", "recall_curve.csv", "syn_ratio_curve.csv")
    }
    ok = all(identical.values())
    report(10, ok, "byte-identical outputs: "
                   + ", ".join(f"{k}={'yes' if v else 'NO'}"
                               for k, v in identical.items()))
    assert ok
