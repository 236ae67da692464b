"""
Task-family metrics
===================

Every family reduces to a score in [0, 1] computed from unit-norm embeddings.
"""

import math

import numpy as np

from xlembed.evaluator import (average_precision, bitext_f1, cluster_vmeasure, linear_probe, ndcg_at_k,
                               pair_classification, sts_spearman)

rng = np.random.default_rng(0)

# %%
# Bitext mining: nearest neighbours in both directions.
E = rng.normal(size=(6, 4))
E /= np.linalg.norm(E, axis=1, keepdims=True)
print("bitext F1 identity", bitext_f1(E, E).main_score)
print("bitext F1 swapped", bitext_f1(np.eye(2), np.eye(2)[::-1]).main_score)

# %%
# Ranking metrics on hand-made rankings.
print("nDCG@10, hit at rank 2:", ndcg_at_k([0, 1], 1), "=", 1 / math.log2(3))
print("AP, hits at ranks 1 and 3:", average_precision([1, 0, 1]))

# %%
# Linear probe and clustering on separated clouds.
X = np.vstack([rng.normal(3, 0.3, (20, 2)), rng.normal(-3, 0.3, (20, 2))])
y = np.array([0] * 20 + [1] * 20)
print("probe accuracy", linear_probe(X, y, X, y).main_score)
print("V-measure", cluster_vmeasure(X, y).main_score)

# %%
# Pair classification and STS from pair similarities.
e1 = np.tile([1.0, 0.0], (3, 1))
sims = np.array([0.1, 0.4, 0.2])
e2 = np.column_stack([sims, np.sqrt(1 - sims ** 2)])
print("pair AP", pair_classification(e1, e2, [0, 1, 1]).main_score)
print("Spearman", sts_spearman(e1, e2, [1, 2, 3]).aux["spearman"])
