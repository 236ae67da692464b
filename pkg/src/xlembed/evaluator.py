"""Task-family metrics over unit-norm embeddings.

Similarity is the dot product everywhere. Rankings break ties by the lowest
index. Every metric returns a :class:`MetricResult` whose ``main_score`` lies
in [0, 1]; reports multiply by 100.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr
from sklearn.cluster import KMeans
from sklearn.metrics import average_precision_score, f1_score, label_ranking_average_precision_score
from sklearn.metrics.cluster import v_measure_score

FAMILIES = ("Btxt", "PrClf", "Clf", "MultiClf", "Clust", "STS", "Rtrvl", "Rrnk")


class MetricError(ValueError):
    pass


@dataclass
class MetricResult:
    family: str
    main_score: float
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        self.main_score = float(self.main_score)
        if not (0.0 <= self.main_score <= 1.0 + 1e-12):
            raise MetricError(f"main score {self.main_score} outside [0, 1]")
        self.main_score = min(self.main_score, 1.0)


def _rank_desc(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by descending score, lowest index first among ties."""
    return np.argsort(-np.asarray(scores), kind="stable")


def _rowdot(a, b) -> np.ndarray:
    return np.sum(np.asarray(a, dtype=np.float64) * np.asarray(b, dtype=np.float64), axis=1)


# -- bitext mining ------------------------------------------------------------


def bitext_f1(src_emb, tgt_emb, gold=None) -> MetricResult:
    """Nearest-neighbour matching in both directions.

    ``gold[i]`` is the target index aligned with source ``i`` (identity by
    default). Precision counts sources whose nearest target is gold, recall
    targets whose nearest source is gold.
    """
    src = np.atleast_2d(np.asarray(src_emb, dtype=np.float64))
    tgt = np.atleast_2d(np.asarray(tgt_emb, dtype=np.float64))
    if src.size == 0 or tgt.size == 0:
        raise MetricError("empty bitext input")
    if src.shape != tgt.shape:
        raise MetricError("source and target sets must have equal size and dimension")
    n = len(src)
    gold = np.arange(n) if gold is None else np.asarray(gold)
    if sorted(gold.tolist()) != list(range(n)):
        raise MetricError("gold alignment must be a bijection")
    S = src @ tgt.T
    fwd = np.argmax(S, axis=1)  # argmax returns the first maximum
    bwd = np.argmax(S, axis=0)
    inv = np.empty(n, dtype=int)
    inv[gold] = np.arange(n)
    precision = float(np.mean(fwd == gold))
    recall = float(np.mean(bwd == inv))
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricResult("Btxt", f1, {"precision": precision, "recall": recall})


# -- linear probes ------------------------------------------------------------


@dataclass
class LinearProbe:
    """L2-regularized multinomial logistic regression fit by full-batch gradient descent.

    Objective: sum of per-example cross-entropies + (lam / 2) * ||W||^2, with
    an unpenalized bias. The step size is 1 / L for the Lipschitz bound
    ``L = 0.5 * sigma_max(X)^2 + lam`` (bias column included in X).
    """

    lam: float = 1.0
    tol: float = 1e-4
    max_iter: int = 1000

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        self.classes_, yi = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes_) < 2:
            raise MetricError("linear probe needs at least two classes in the training set")
        n, d = X.shape
        k = len(self.classes_)
        Xb = np.hstack([X, np.ones((n, 1))])
        Y = np.eye(k)[yi]
        L = 0.5 * np.linalg.norm(Xb, 2) ** 2 + self.lam
        step = 1.0 / L
        W = np.zeros((d + 1, k))
        penalty = np.ones((d + 1, 1))
        penalty[-1] = 0.0
        self.n_iter_ = self.max_iter
        for it in range(self.max_iter):
            grad = Xb.T @ (_softmax(Xb @ W) - Y) + self.lam * penalty * W
            if np.linalg.norm(grad) <= self.tol:
                self.n_iter_ = it
                break
            W -= step * grad
        self.W_ = W
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        return _softmax(np.hstack([X, np.ones((len(X), 1))]) @ self.W_)

    def predict(self, X):
        # argmax takes the first (lowest class index) among ties
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def linear_probe(train_emb, train_labels, test_emb, test_labels, lam: float = 1.0, seed: int = 0) -> MetricResult:
    # full-batch fitting from a zero start is deterministic; seed kept for interface parity
    probe = LinearProbe(lam=lam).fit(train_emb, train_labels)
    pred = probe.predict(test_emb)
    acc = float(np.mean(pred == np.asarray(test_labels)))
    return MetricResult("Clf", acc, {"n_iter": probe.n_iter_})


def multilabel_eval(train_emb, train_labelsets, test_emb, test_labelsets, lam: float = 1.0) -> MetricResult:
    """One-vs-rest probes; main = LRAP of the per-label probabilities, aux = macro-F1 at 0.5."""
    universe = sorted(set().union(*map(set, train_labelsets), *map(set, test_labelsets)))
    if not universe:
        raise MetricError("empty label universe")
    Ytr = np.array([[l in s for l in universe] for s in train_labelsets], dtype=int)
    Yte = np.array([[l in s for l in universe] for s in test_labelsets], dtype=int)
    test_emb = np.asarray(test_emb, dtype=np.float64)
    scores = np.empty(Yte.shape)
    for j in range(len(universe)):
        col = Ytr[:, j]
        if col.min() == col.max():
            # label constant in training: predict that constant
            scores[:, j] = float(col[0])
            continue
        probe = LinearProbe(lam=lam).fit(train_emb, col)
        scores[:, j] = probe.predict_proba(test_emb)[:, list(probe.classes_).index(1)]
    lrap = label_ranking_average_precision_score(Yte, scores)
    macro_f1 = f1_score(Yte, (scores >= 0.5).astype(int), average="macro", zero_division=0)
    return MetricResult("MultiClf", lrap, {"macro_f1": float(macro_f1)})


# -- pair classification / STS -----------------------------------------------


def pair_classification(emb1, emb2, labels) -> MetricResult:
    """Average precision of the pair similarity as a ranker of positive pairs.

    Tied similarities are treated as one threshold (no index tie-break), so a
    constant scorer scores the prevalence.
    """
    labels = np.asarray(labels).astype(int)
    if labels.min() == labels.max():
        raise MetricError("pair classification needs both positive and negative pairs")
    sims = _rowdot(emb1, emb2)
    ap = average_precision_score(labels, sims)
    return MetricResult("PrClf", ap, {"best_accuracy": best_threshold_accuracy(sims, labels)})


def best_threshold_accuracy(sims, labels) -> float:
    """Best accuracy of ``sim > t`` over thresholds at midpoints of the sorted distinct similarities."""
    sims = np.asarray(sims, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    u = np.unique(sims)
    cuts = np.concatenate([[u[0] - 1.0], (u[:-1] + u[1:]) / 2, [u[-1] + 1.0]])
    return float(max(np.mean((sims > t) == labels) for t in cuts))


def sts_spearman(emb1, emb2, gold_scores) -> MetricResult:
    gold = np.asarray(gold_scores, dtype=np.float64)
    if len(gold) < 2:
        raise MetricError("STS needs at least two pairs")
    if np.all(gold == gold[0]):
        raise MetricError("undefined correlation: constant gold scores")
    sims = _rowdot(emb1, emb2)
    if np.all(sims == sims[0]):
        raise MetricError("undefined correlation: constant similarities")
    rho = float(spearmanr(sims, gold).statistic)
    # reported main score is clipped to [0, 1]; the signed value stays in aux
    return MetricResult("STS", max(rho, 0.0), {"spearman": rho})


# -- clustering -----------------------------------------------------------------


def cluster_vmeasure(emb, gold_clusters, k: int | None = None, seed: int = 0, restarts: int = 10) -> MetricResult:
    emb = np.asarray(emb, dtype=np.float64)
    gold = np.asarray(gold_clusters)
    k = len(np.unique(gold)) if k is None else k
    if k < 1:
        raise MetricError("k must be >= 1")
    if k > len(emb):
        raise MetricError(f"k={k} exceeds the number of points ({len(emb)})")
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed)
    with np.errstate(all="ignore"):
        pred = km.fit_predict(emb)
    return MetricResult("Clust", v_measure_score(gold, pred), {"inertia": float(km.inertia_)})


# -- retrieval / reranking ----------------------------------------------------


def ndcg_at_k(ranked_relevance: Sequence[int], n_relevant: int, k: int = 10) -> float:
    rel = np.asarray(ranked_relevance[:k], dtype=np.float64)
    discounts = 1.0 / np.log2(np.arange(2, len(rel) + 2))
    dcg = float(np.sum(rel * discounts))
    ideal = float(np.sum(1.0 / np.log2(np.arange(2, min(n_relevant, k) + 2))))
    return dcg / ideal


def average_precision(ranked_relevance: Sequence[int]) -> float:
    rel = np.asarray(ranked_relevance, dtype=bool)
    if not rel.any():
        raise MetricError("average precision needs at least one relevant item")
    hits = np.cumsum(rel)
    ranks = np.flatnonzero(rel) + 1
    return float(np.mean(hits[rel] / ranks))


def retrieval_ndcg(query_emb, corpus_emb, qrels: Sequence[set], k: int = 10, skip_empty: bool = False) -> MetricResult:
    """``qrels[i]`` is the set of corpus row indices relevant to query ``i``."""
    Q = np.atleast_2d(np.asarray(query_emb, dtype=np.float64))
    C = np.atleast_2d(np.asarray(corpus_emb, dtype=np.float64))
    scores = []
    for i, q in enumerate(Q):
        relevant = set(qrels[i])
        if not relevant:
            if skip_empty:
                continue
            raise MetricError(f"query {i} has no relevant documents")
        order = _rank_desc(C @ q)
        scores.append(ndcg_at_k([int(j in relevant) for j in order[:k]], len(relevant), k))
    if not scores:
        raise MetricError("no evaluable queries")
    return MetricResult("Rtrvl", float(np.mean(scores)), {"k": k})


def rerank_map(query_emb, candidate_embs: Sequence, candidate_labels: Sequence) -> MetricResult:
    aps = []
    for i, q in enumerate(np.atleast_2d(np.asarray(query_emb, dtype=np.float64))):
        labels = np.asarray(candidate_labels[i]).astype(int)
        if not labels.any():
            raise MetricError(f"query {i} has no positive candidates")
        order = _rank_desc(np.asarray(candidate_embs[i], dtype=np.float64) @ q)
        aps.append(average_precision(labels[order]))
    return MetricResult("Rrnk", float(np.mean(aps)))
