"""One-epoch training loop for the toy student encoder."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datamodel import TrainInstance, ValidationError, canonical_json
from .encoder import ToyEncoderParams, format_instruction, forward_features, featurize, save_params, toy_backward
from .objective import BatchLayout, contrastive_loss, kd_loss, similarity_matrix, teacher_normalize, total_loss

DEFAULT_INSTRUCTION = "Given a premise, retrieve a hypothesis that is entailed by the premise"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    batch_size: int = 8
    group_size: int = 8
    learning_rate: float = 1e-5
    warmup_ratio: float = 0.1
    max_query_len: int = 512
    max_passage_len: int = 512
    temperature: float = 0.02
    same_dataset_within_batch: bool = True
    knowledge_distillation: bool = True
    log_every: int = 100
    checkpoint_every: int = 100
    seed: int = 0
    instruction: str = DEFAULT_INSTRUCTION

    def __post_init__(self):
        for name in ("epochs", "batch_size", "group_size", "max_query_len", "max_passage_len",
                     "log_every", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if not self.temperature > 0:
            raise ValidationError("temperature must be positive")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ValidationError("warmup_ratio must lie in [0, 1]")

    def hash(self) -> str:
        return hashlib.sha256(canonical_json(asdict(self)).encode()).hexdigest()[:16]


@dataclass
class Batch:
    queries: list[str]
    passages: list[str]  # B * G, grouped: positive then G - 1 negatives
    teacher_raw: np.ndarray | None  # (B, G)
    dataset: str


@dataclass
class TrainState:
    step: int
    params: ToyEncoderParams
    running: dict = field(default_factory=lambda: {"loss": 0.0, "loss_contrastive": 0.0, "loss_kd": 0.0, "n": 0})


class TrainingError(RuntimeError):
    pass


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to the base rate, then linear decay to zero at ``total_steps``."""
    warmup = math.ceil(cfg.warmup_ratio * total_steps)
    if step < warmup:
        return cfg.learning_rate * step / warmup
    if total_steps == warmup:
        return cfg.learning_rate
    return cfg.learning_rate * max(0.0, (total_steps - step) / (total_steps - warmup))


def _group(inst: TrainInstance, G: int, rng: np.random.Generator, use_teacher: bool):
    negs = list(inst.neg)
    if G > 1 and not negs:
        raise ValidationError(f"instance with query {inst.query[:40]!r} has no negatives (group size {G})")
    if len(negs) >= G - 1:
        picks = rng.choice(len(negs), G - 1, replace=False) if G > 1 else np.array([], dtype=int)
    else:
        extra = rng.choice(len(negs), G - 1 - len(negs), replace=True)
        picks = np.concatenate([np.arange(len(negs)), extra]).astype(int)
    passages = [inst.pos[0]] + [negs[i] for i in picks]
    scores = None
    if use_teacher:
        if inst.teacher_scores is None:
            raise ValidationError(f"instance with query {inst.query[:40]!r} lacks teacher scores")
        scores = [inst.teacher_scores[0]] + [inst.teacher_scores[1 + i] for i in picks]
    return passages, scores


def plan_batches(instances: Sequence[TrainInstance], cfg: TrainConfig) -> list[Batch]:
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(instances))
    if cfg.same_dataset_within_batch:
        pools: dict[str, list[int]] = {}
        for i in order:
            pools.setdefault(instances[i].dataset, []).append(int(i))
        chunks = [idx[s:s + cfg.batch_size] for _, idx in sorted(pools.items())
                  for s in range(0, len(idx) - cfg.batch_size + 1, cfg.batch_size)]
        chunks = [chunks[i] for i in rng.permutation(len(chunks))]
    else:
        idx = [int(i) for i in order]
        chunks = [idx[s:s + cfg.batch_size] for s in range(0, len(idx) - cfg.batch_size + 1, cfg.batch_size)]

    batches = []
    for chunk in chunks:
        queries, passages, teacher = [], [], []
        for i in chunk:
            inst = instances[i]
            if not inst.pos:
                raise ValidationError(f"instance {i} has no positive")
            p, s = _group(inst, cfg.group_size, rng, cfg.knowledge_distillation)
            queries.append(inst.query)
            passages.extend(p)
            teacher.append(s)
        batches.append(Batch(queries, passages,
                             np.array(teacher, dtype=np.float64) if cfg.knowledge_distillation else None,
                             instances[chunk[0]].dataset))
    return batches


def batch_loss(params: ToyEncoderParams, batch: Batch, cfg: TrainConfig, with_grad: bool = True):
    """Total loss for one batch, its parts, and the gradient w.r.t. ``params.W``."""
    queries = [format_instruction(cfg.instruction, q)[: cfg.max_query_len] for q in batch.queries]
    passages = [p[: cfg.max_passage_len] for p in batch.passages]
    B = len(queries)
    feats = featurize(queries + passages, params)
    emb, cache = forward_features(feats, params.W)
    Q, P = emb[:B], emb[B:]
    block = similarity_matrix(Q, P, cfg.temperature)
    layout = BatchLayout(B, cfg.group_size)
    l_con, g = contrastive_loss(block, layout)
    l_kd = 0.0
    if batch.teacher_raw is not None:
        l_kd, g_kd = kd_loss(block, teacher_normalize(batch.teacher_raw), layout)
        g = g + g_kd
    loss = total_loss(l_con, l_kd)
    if not with_grad:
        return loss, l_con, l_kd, None
    grad_emb = np.vstack([g @ P, g.T @ Q])
    return loss, l_con, l_kd, toy_backward(cache, grad_emb)


def _dump_batch(out_dir, step, batch) -> Path:
    path = Path(out_dir) / f"bad_batch_step{step}.json"
    path.write_text(json.dumps({"step": step, "queries": batch.queries, "passages": batch.passages,
                                "teacher_raw": None if batch.teacher_raw is None else batch.teacher_raw.tolist()},
                               ensure_ascii=False))
    return path


def train_epoch(instances: Sequence[TrainInstance], params: ToyEncoderParams, cfg: TrainConfig, out_dir=None):
    """Run ``cfg.epochs`` passes of plain gradient descent.

    Returns (final params, metrics log, checkpoint paths). Log points are the
    first step, every ``log_every`` steps and the last step; each reports the
    mean losses since the previous log point.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    state = TrainState(0, params.copy())
    plans = [plan_batches(instances, TrainConfig(**{**asdict(cfg), "seed": cfg.seed + e}))
             for e in range(cfg.epochs)]
    total = sum(len(p) for p in plans)
    if total == 0:
        raise ValidationError("no complete batch could be formed; need at least batch_size instances per dataset")
    log, checkpoints = [], []
    run = state.running
    for batch in (b for plan in plans for b in plan):
        lr = lr_at(state.step, total, cfg)
        try:
            loss, l_con, l_kd, grad = batch_loss(state.params, batch, cfg)
            finite = math.isfinite(loss) and bool(np.all(np.isfinite(grad)))
            reason = "non-finite loss"
        except (ValueError, ArithmeticError) as e:
            # NaN inputs surface as validation failures inside the loss
            finite, reason = False, f"non-finite batch ({e})"
        if not finite:
            where = _dump_batch(out, state.step + 1, batch) if out is not None else None
            raise TrainingError(f"{reason} at step {state.step + 1}; batch dumped to {where}")
        state.params.W -= lr * grad
        state.step += 1
        run["loss"] += loss
        run["loss_contrastive"] += l_con
        run["loss_kd"] += l_kd
        run["n"] += 1
        if state.step == 1 or state.step % cfg.log_every == 0 or state.step == total:
            n = run["n"]
            log.append({"step": state.step, "loss": run["loss"] / n, "loss_contrastive": run["loss_contrastive"] / n,
                        "loss_kd": run["loss_kd"] / n, "lr": lr})
            state.running = run = {"loss": 0.0, "loss_contrastive": 0.0, "loss_kd": 0.0, "n": 0}
        if out is not None and (state.step % cfg.checkpoint_every == 0 or state.step == total):
            path = out / f"checkpoint-{state.step}.npz"
            save_params(path, state.params, step=state.step, config_hash=cfg.hash())
            checkpoints.append(path)
    if out is not None:
        with open(out / "metrics.jsonl", "w") as f:
            for rec in log:
                f.write(canonical_json(rec) + "\n")
    return state.params, log, checkpoints
