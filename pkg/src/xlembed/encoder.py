"""Student encoder abstraction and a trainable desk-scale reference encoder.

The toy encoder maps a text to hashed character n-gram features, mean-pools
them, applies a linear projection and L2-normalizes the result. Its backward
pass is written out by hand so the training objective can be checked
against finite differences end to end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from .datamodel import ValidationError, content_hash, nfc

MAX_CHARS = 512


class DegenerateEmbedding(ArithmeticError):
    pass


class EncoderPort(Protocol):
    dim: int

    def embed(self, texts: Sequence[str], instruction: str = "") -> np.ndarray: ...


def format_instruction(task_instruction: str, query: str) -> str:
    if not task_instruction:
        return query
    return f"Instruct: {task_instruction}\nQuery: {query}"


@dataclass
class ToyEncoderParams:
    W: np.ndarray  # (dim, n_buckets)
    hash_seed: int = 0
    ngram: int = 3
    max_chars: int = MAX_CHARS

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValidationError("W must be a matrix")
        if not np.all(np.isfinite(self.W)):
            raise ValidationError("W has non-finite entries")
        if self.ngram < 1:
            raise ValidationError("ngram order must be >= 1")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def n_buckets(self) -> int:
        return self.W.shape[1]

    @classmethod
    def init(cls, seed: int, dim: int = 32, n_buckets: int = 2 ** 14, ngram: int = 3,
             init_std: float = 0.004) -> "ToyEncoderParams":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, init_std, size=(dim, n_buckets)), hash_seed=seed, ngram=ngram)

    def copy(self) -> "ToyEncoderParams":
        return ToyEncoderParams(self.W.copy(), self.hash_seed, self.ngram, self.max_chars)


@lru_cache(maxsize=200_000)
def _bucket(gram: str, seed: int, n_buckets: int) -> int:
    h = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, salt=seed.to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little") % n_buckets


def ngram_features(text: str, params: ToyEncoderParams) -> np.ndarray:
    """Mean-pooled one-hot hashed character n-grams (each row sums to 1)."""
    text = nfc(text)[: params.max_chars]
    n = params.ngram
    grams = [text[i:i + n] for i in range(len(text) - n + 1)] if len(text) >= n else [text]
    f = np.zeros(params.n_buckets)
    for g in grams:
        f[_bucket(g, params.hash_seed, params.n_buckets)] += 1.0
    return f / len(grams)


def featurize(texts: Sequence[str], params: ToyEncoderParams) -> np.ndarray:
    return np.stack([ngram_features(t, params) for t in texts]) if texts else np.zeros((0, params.n_buckets))


def forward_features(features: np.ndarray, W: np.ndarray):
    """Project and normalize precomputed features. Returns (embeddings, cache)."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    raw = features @ W.T
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        bad = int(np.flatnonzero((norms == 0.0) | ~np.isfinite(norms))[0])
        raise DegenerateEmbedding(f"degenerate embedding for input {bad}")
    emb = raw / norms[:, None]
    return emb, {"features": features, "emb": emb, "norms": norms, "W_shape": W.shape}


def toy_forward(texts: Sequence[str], params: ToyEncoderParams):
    return forward_features(featurize(texts, params), params.W)


def toy_backward(cache: dict, grad_emb: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. W given its gradient w.r.t. the embeddings."""
    grad_emb = np.asarray(grad_emb, dtype=np.float64)
    emb = cache["emb"]
    if grad_emb.shape != emb.shape:
        raise ValueError(f"gradient shape {grad_emb.shape} does not match embeddings {emb.shape}")
    radial = np.sum(grad_emb * emb, axis=1, keepdims=True)
    grad_raw = (grad_emb - radial * emb) / cache["norms"][:, None]
    return grad_raw.T @ cache["features"]


class ToyEncoder:
    """EncoderPort over :class:`ToyEncoderParams`."""

    def __init__(self, params: ToyEncoderParams):
        self.params = params

    @property
    def dim(self) -> int:
        return self.params.dim

    def embed(self, texts, instruction=""):
        texts = [format_instruction(instruction, t) for t in texts]
        return toy_forward(texts, self.params)[0]


class FileEncoder:
    """Precomputed embeddings looked up by content hash of the (instruction-free) text."""

    def __init__(self, table: dict[str, np.ndarray]):
        if not table:
            raise ValidationError("empty embedding table")
        self._table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = len(next(iter(self._table.values())))

    def embed(self, texts, instruction=""):
        rows = []
        for t in texts:
            key = content_hash(t)
            if key not in self._table:
                raise LookupError(f"no embedding for text {t[:40]!r}")
            rows.append(self._table[key])
        out = np.stack(rows) if rows else np.zeros((0, self.dim))
        return out / np.linalg.norm(out, axis=1, keepdims=True)

    @classmethod
    def load(cls, path) -> "FileEncoder":
        with np.load(path) as z:
            return cls(dict(zip(z["keys"].tolist(), z["vectors"])))

    @staticmethod
    def save(path, vectors: dict[str, np.ndarray]) -> None:
        """Write text -> vector pairs; keys are hashed on the way out."""
        keys = np.array([content_hash(t) for t in vectors])
        vecs = np.stack([np.asarray(v, dtype=np.float64) for v in vectors.values()])
        with open(path, "wb") as f:
            np.savez(f, keys=keys, vectors=vecs)


def save_params(path, params: ToyEncoderParams, **extra) -> None:
    with open(path, "wb") as f:
        np.savez(f, format_version=np.int64(1), W=params.W, hash_seed=np.int64(params.hash_seed),
                 ngram=np.int64(params.ngram), max_chars=np.int64(params.max_chars),
                 **{k: np.asarray(v) for k, v in extra.items()})


def load_params(path) -> ToyEncoderParams:
    with np.load(path) as z:
        return ToyEncoderParams(z["W"], int(z["hash_seed"]), int(z["ngram"]), int(z["max_chars"]))


def encoder_from_spec(spec: str) -> EncoderPort:
    """Build an encoder from ``toy:<seed>:<dim>``, ``file:<path>`` or ``checkpoint:<path>``."""
    kind, _, rest = spec.partition(":")
    if kind == "toy":
        try:
            seed, dim = (int(x) for x in rest.split(":"))
        except ValueError:
            raise ValidationError(f"bad toy encoder spec {spec!r}; expected toy:<seed>:<dim>") from None
        return ToyEncoder(ToyEncoderParams.init(seed, dim))
    if kind == "file":
        return FileEncoder.load(rest)
    if kind == "checkpoint":
        return ToyEncoder(load_params(rest))
    raise ValidationError(f"unknown encoder spec {spec!r}")
