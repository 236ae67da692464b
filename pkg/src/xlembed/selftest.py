"""Quick oracle checks bundled with the package (run by ``xlembed selftest``).

Each check returns ``(name, passed, detail)``. The pytest suite covers the
same ground more thoroughly; these exist so an installed copy can verify
itself without the test tree.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .bench import ScoreTable, aggregate, fixture_summary_rows, load_fixture
from .encoder import ToyEncoderParams
from .objective import (BatchLayout, SimilarityBlock, contrastive_loss, kd_loss, pooled_contrastive_loss,
                        teacher_normalize)
from .trainer import Batch, TrainConfig, batch_loss


def _random_batch(rng, B, G):
    alphabet = list("abcdefghij ")
    word = lambda: "".join(rng.choice(alphabet, int(rng.integers(4, 12))))
    queries = [word() for _ in range(B)]
    passages = [word() for _ in range(B * G)]
    return Batch(queries, passages, rng.normal(0, 2, (B, G)), "synthetic")


def gradient_check(seed: int = 0, n_configs: int = 20, h: float = 1e-6, entries: int = 8) -> float:
    """Max relative error between the analytic and central-difference gradients of the total loss."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        B, G = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        cfg = TrainConfig(batch_size=B, group_size=G, temperature=0.5, instruction="")
        params = ToyEncoderParams.init(int(rng.integers(1 << 30)), dim=6, n_buckets=64, init_std=1.0)
        batch = _random_batch(rng, B, G)
        _, _, _, grad = batch_loss(params, batch, cfg)
        flat = np.flatnonzero(grad)
        for j in rng.choice(flat, min(entries, len(flat)), replace=False):
            idx = np.unravel_index(j, grad.shape)
            old = params.W[idx]
            params.W[idx] = old + h
            up = batch_loss(params, batch, cfg, with_grad=False)[0]
            params.W[idx] = old - h
            down = batch_loss(params, batch, cfg, with_grad=False)[0]
            params.W[idx] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - grad[idx]) / max(abs(num), abs(grad[idx]), 1e-8))
    return worst


def _brute_contrastive(S, tau, B, G):
    total = 0.0
    for i in range(B):
        z = [math.exp(s / tau) for s in S[i]]
        total -= math.log(z[i * G] / sum(z))
    return total / B


def _brute_kd(S, T, tau, B, G):
    total = 0.0
    for i in range(B):
        z = [math.exp(S[i, i * G + g] / tau) for g in range(G)]
        total -= sum(T[i, g] * math.log(z[g] / sum(z)) for g in range(G))
    return total / B


def loss_oracle(seed: int = 0, n_blocks: int = 100) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_blocks):
        B, G = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        tau = float(rng.uniform(0.05, 1.0))
        S = rng.uniform(-1, 1, (B, B * G))
        T = teacher_normalize(rng.normal(0, 1, (B, G)))
        layout = BatchLayout(B, G)
        block = SimilarityBlock(S, tau)
        worst = max(worst, abs(contrastive_loss(block, layout)[0] - _brute_contrastive(S, tau, B, G)),
                    abs(kd_loss(block, T, layout)[0] - _brute_kd(S, T, tau, B, G)))
    return worst


def pooled_equivalence(seed: int = 0, n_cases: int = 50) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        G, B1, B2 = (int(x) for x in rng.integers(1, 5, 3))
        n = (B1 + B2) * G
        S = rng.uniform(-1, 1, (B1 + B2, n))
        whole = contrastive_loss(SimilarityBlock(S, 0.05), BatchLayout(B1 + B2, G))[0]
        pooled = pooled_contrastive_loss(
            [SimilarityBlock(S[:B1], 0.05), SimilarityBlock(S[B1:], 0.05)],
            [BatchLayout(B1, G, 0, n), BatchLayout(B2, G, B1 * G, n)])[0]
        worst = max(worst, abs(whole - pooled))
    return worst


def aggregation_fixtures() -> dict[str, float]:
    """Worst absolute gap to the printed averages for each transcribed table."""
    out = {}
    for name, mode in (("lite_results.json", "task_macro"), ("full_results.json", "family_macro")):
        out[name] = max(abs(aggregate(t, mode).overall - avg) for _, t, avg in fixture_summary_rows(name))
    gaps = []
    for task in load_fixture("per_language.json")["tasks"]:
        for row in task["rows"]:
            table = ScoreTable({task["task"]: row["scores"]}, {task["task"]: "Clf"})
            gaps.append(abs(aggregate(table, "task_macro").overall - row["printed_avg"]))
    out["per_language.json"] = max(gaps)
    return out


def run_all() -> list[tuple[str, bool, str]]:
    results = []
    g = gradient_check()
    results.append(("gradient vs finite differences", bool(g <= 1e-5), f"max rel err {g:.2e}"))
    l = loss_oracle()
    results.append(("losses vs brute-force softmax", l <= 1e-10, f"max abs err {l:.2e}"))
    worst_uniform = max(abs(contrastive_loss(SimilarityBlock(np.zeros((B, B * G)), 0.02), BatchLayout(B, G))[0]
                            - math.log(B * G)) for B, G in product(range(1, 5), repeat=2))
    results.append(("uniform similarities give ln(BG)", worst_uniform <= 1e-12, f"max abs err {worst_uniform:.2e}"))
    p = pooled_equivalence()
    results.append(("pooled shards equal one batch", p <= 1e-12, f"max abs err {p:.2e}"))
    tol = {"lite_results.json": 0.05, "full_results.json": 0.05, "per_language.json": 0.005}
    for name, gap in aggregation_fixtures().items():
        # printed values carry their own rounding; allow float noise at the boundary
        results.append((f"aggregation reproduces {name}", gap <= tol[name] + 1e-9, f"max gap {gap:.4f}"))
    return results
