"""Hard-negative mining and cross-encoder teacher scoring for training instances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .datamodel import TrainInstance, ValidationError, content_hash, nfc, read_jsonl


@dataclass(frozen=True)
class MiningSettings:
    max_negatives: int = 15
    window: tuple[int, int] = (2, 100)
    seed: int = 0
    exclude_exact_duplicates: bool = True
    strategy: str = "uniform"  # or "top": keep the best-ranked candidates

    def __post_init__(self):
        lo, hi = self.window
        if not 1 <= lo <= hi:
            raise ValidationError(f"invalid rank window {self.window}; need 1 <= lo <= hi")
        if self.max_negatives < 0:
            raise ValidationError("max_negatives must be >= 0")
        if self.strategy not in ("uniform", "top"):
            raise ValidationError(f"unknown sampling strategy {self.strategy!r}")


def parse_window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise ValidationError(f"bad window {text!r}; expected lo:hi") from None
    return lo, hi


def _instance_rng(seed: int, query: str) -> np.random.Generator:
    return np.random.default_rng([seed, int(content_hash(query)[:15], 16)])


def mine_hard_negatives(inst: TrainInstance, corpus: Sequence[str], corpus_embeddings: np.ndarray,
                        query_embedding: np.ndarray, settings: MiningSettings) -> TrainInstance:
    if len(corpus) == 0 or settings.max_negatives == 0:
        return inst
    E = np.asarray(corpus_embeddings, dtype=np.float64)
    q = np.asarray(query_embedding, dtype=np.float64).ravel()
    if E.ndim != 2 or E.shape[0] != len(corpus):
        raise ValueError("corpus embeddings must be a matrix row-aligned with the corpus")
    if E.shape[1] != q.shape[0]:
        raise ValueError(f"dimension mismatch: corpus {E.shape[1]}, query {q.shape[0]}")

    # stable sort keeps lowest corpus index first among ties
    order = np.argsort(-(E @ q), kind="stable")
    lo, hi = settings.window
    excluded = set(map(nfc, inst.pos)) | set(map(nfc, inst.neg))
    if settings.exclude_exact_duplicates:
        excluded.add(nfc(inst.query))
    pool, seen = [], set()
    for idx in order[lo - 1:hi]:
        text = nfc(corpus[idx])
        if text in excluded or text in seen:
            continue
        seen.add(text)
        pool.append(text)
    if not pool:
        return inst

    k = min(settings.max_negatives, len(pool))
    if settings.strategy == "top":
        picked = pool[:k]
    else:
        chosen = _instance_rng(settings.seed, inst.query).choice(len(pool), size=k, replace=False)
        picked = [pool[i] for i in sorted(chosen)]
    meta = dict(inst.meta, mining_window=f"{lo}:{hi}")
    # any previous teacher scores no longer match the group
    return inst.replace(neg=tuple(inst.neg) + tuple(picked), teacher_scores=None, meta=meta)


class TeacherPort(Protocol):
    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class TeacherError(RuntimeError):
    pass


def score_teacher(inst: TrainInstance, teacher: TeacherPort) -> TrainInstance:
    """Attach raw teacher scores for the group ``[pos[0]] + neg``."""
    group = [inst.pos[0], *inst.neg]
    try:
        scores = [float(s) for s in teacher.score([(inst.query, p) for p in group])]
    except Exception as e:
        raise TeacherError(f"teacher failed on query {inst.query[:40]!r}: {e}") from e
    if len(scores) != len(group):
        raise TeacherError(f"teacher returned {len(scores)} scores for {len(group)} pairs")
    if not all(math.isfinite(s) for s in scores):
        raise TeacherError("teacher returned non-finite scores")
    return inst.replace(teacher_scores=tuple(scores))


class FileTeacher:
    """Teacher stub backed by a table keyed by ``content_hash(query, passage)``."""

    def __init__(self, table: Mapping[str, float]):
        self._table = dict(table)

    def score(self, pairs):
        out = []
        for q, p in pairs:
            key = content_hash(q, p)
            if key not in self._table:
                raise KeyError(f"no teacher score for pair ({q[:30]!r}, {p[:30]!r})")
            out.append(self._table[key])
        return out

    @classmethod
    def load(cls, path) -> "FileTeacher":
        return cls({d["key"]: float(d["score"]) for d in read_jsonl(path)})


class ConstantTeacher:
    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def score(self, pairs):
        return [self.value] * len(pairs)


class FunctionTeacher:
    """Wraps a ``(query, passage) -> float`` callable."""

    def __init__(self, fn: Callable[[str, str], float]):
        self.fn = fn

    def score(self, pairs):
        return [float(self.fn(q, p)) for q, p in pairs]


class EncoderTeacher:
    """Scores a pair by the dot product of two texts' embeddings."""

    def __init__(self, encoder, scale: float = 1.0):
        self.encoder = encoder
        self.scale = scale

    def score(self, pairs):
        if not pairs:
            return []
        qs = self.encoder.embed([q for q, _ in pairs])
        ps = self.encoder.embed([p for _, p in pairs])
        return (self.scale * np.sum(qs * ps, axis=1)).tolist()


def teacher_from_spec(spec: str) -> TeacherPort:
    """``file:<path>``, ``const:<value>``, ``encoder:<encoder-spec>`` or ``toy-oracle:<seed>``."""
    from .encoder import encoder_from_spec

    kind, _, rest = spec.partition(":")
    if kind == "file":
        return FileTeacher.load(rest)
    if kind == "const":
        return ConstantTeacher(float(rest))
    if kind == "encoder":
        return EncoderTeacher(encoder_from_spec(rest))
    if kind == "toy-oracle":
        from .synthetic import ToyWorld

        return FunctionTeacher(ToyWorld(int(rest or 0)).teacher_score)
    raise ValidationError(f"unknown teacher spec {spec!r}")
