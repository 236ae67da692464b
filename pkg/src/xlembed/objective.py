"""Contrastive + distillation objective over a query/passage similarity block.

Passages are laid out flat in groups of ``G``: query ``i``'s positive sits at
``shard_offset + i * G`` followed by its ``G - 1`` negatives. The contrastive
softmax runs over every passage in the (possibly pooled) batch; the
distillation term only over the query's own group.

All functions return ``(loss, grad_wrt_S)`` so callers can chain the
gradient into the encoder's backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BatchLayout:
    B: int
    G: int
    shard_offset: int = 0
    total_passages: int | None = None

    def __post_init__(self):
        if self.B < 1 or self.G < 1:
            raise ValueError("B and G must be >= 1")
        if self.total_passages is None:
            object.__setattr__(self, "total_passages", self.shard_offset + self.B * self.G)
        if self.shard_offset < 0 or self.shard_offset + self.B * self.G > self.total_passages:
            raise ValueError("positive indices exceed total_passages")

    @property
    def positive_indices(self) -> np.ndarray:
        return self.shard_offset + np.arange(self.B) * self.G


@dataclass(frozen=True)
class SimilarityBlock:
    S: np.ndarray
    tau: float = 0.02

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")


def similarity_matrix(Q: np.ndarray, P: np.ndarray, tau: float = 0.02) -> SimilarityBlock:
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if Q.shape[1] != P.shape[1]:
        raise ValueError(f"dimension mismatch: queries {Q.shape[1]}, passages {P.shape[1]}")
    return SimilarityBlock(Q @ P.T, tau)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check_shape(block: SimilarityBlock, layout: BatchLayout):
    if block.S.shape != (layout.B, layout.total_passages):
        raise ValueError(f"similarity block {block.S.shape} inconsistent with layout "
                         f"({layout.B}, {layout.total_passages})")


def contrastive_loss(block: SimilarityBlock, layout: BatchLayout):
    _check_shape(block, layout)
    B = layout.B
    logp = _log_softmax(block.S / block.tau)
    rows = np.arange(B)
    pos = layout.positive_indices
    loss = -logp[rows, pos].mean()
    grad = np.exp(logp)
    grad[rows, pos] -= 1.0
    return float(loss), grad / (B * block.tau)


def pooled_contrastive_loss(blocks: Sequence[SimilarityBlock], layouts: Sequence[BatchLayout]):
    """Combine per-shard losses computed against a pooled passage set.

    Shards must be given in shard-index order; each shard's block holds its
    own queries against all pooled passages.
    """
    total_B = sum(l.B for l in layouts)
    loss, grads = 0.0, []
    for block, layout in zip(blocks, layouts):
        l, g = contrastive_loss(block, layout)
        loss += l * layout.B / total_B
        grads.append(g * layout.B / total_B)
    return loss, grads


def teacher_normalize(raw_scores) -> np.ndarray:
    """Row-wise softmax at temperature 1."""
    raw = np.atleast_2d(np.asarray(raw_scores, dtype=np.float64))
    return np.exp(_log_softmax(raw))


def _group_columns(layout: BatchLayout) -> np.ndarray:
    return layout.positive_indices[:, None] + np.arange(layout.G)[None, :]


def kd_loss(block: SimilarityBlock, teacher: np.ndarray, layout: BatchLayout):
    _check_shape(block, layout)
    teacher = np.atleast_2d(np.asarray(teacher, dtype=np.float64))
    if teacher.shape != (layout.B, layout.G):
        raise ValueError(f"teacher distribution shape {teacher.shape} != ({layout.B}, {layout.G})")
    if np.any(teacher < 0) or not np.allclose(teacher.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ValueError("teacher rows must be probability vectors")
    cols = _group_columns(layout)
    rows = np.arange(layout.B)[:, None]
    logp = _log_softmax(block.S[rows, cols] / block.tau)
    loss = -(teacher * logp).sum(axis=1).mean()
    grad = np.zeros_like(block.S)
    grad[rows, cols] = (np.exp(logp) * teacher.sum(axis=1, keepdims=True) - teacher) / (layout.B * block.tau)
    return float(loss), grad


def total_loss(contrastive: float, kd: float) -> float:
    return contrastive + kd
