"""
The training objective
======================

Contrastive loss over in-batch negatives plus distillation toward the
teacher's distribution, both computed from one similarity block.
"""

import math

import numpy as np

from xlembed.objective import (BatchLayout, SimilarityBlock, contrastive_loss, kd_loss, pooled_contrastive_loss,
                               similarity_matrix, teacher_normalize, total_loss)

rng = np.random.default_rng(0)
B, G, d = 3, 4, 8

# unit-norm queries and grouped passages (positive first in each group)
Q = rng.normal(size=(B, d))
Q /= np.linalg.norm(Q, axis=1, keepdims=True)
P = rng.normal(size=(B * G, d))
P /= np.linalg.norm(P, axis=1, keepdims=True)
block = similarity_matrix(Q, P, tau=0.05)
layout = BatchLayout(B, G)
print("positives at columns", layout.positive_indices)

# %%
l_con, g_con = contrastive_loss(block, layout)
teacher = teacher_normalize(rng.normal(size=(B, G)))
l_kd, g_kd = kd_loss(block, teacher, layout)
print("contrastive", l_con, "kd", l_kd, "total", total_loss(l_con, l_kd))

# %%
# With no signal every candidate is equally likely: the loss is ln(BG).
flat = SimilarityBlock(np.zeros((B, B * G)), 0.05)
print(contrastive_loss(flat, layout)[0], math.log(B * G))

# %%
# Splitting the batch into two shards that share the pooled candidates
# gives the same loss as one large batch.
S = block.S
whole = contrastive_loss(block, layout)[0]
pooled = pooled_contrastive_loss([SimilarityBlock(S[:1], 0.05), SimilarityBlock(S[1:], 0.05)],
                                 [BatchLayout(1, G, 0, B * G), BatchLayout(2, G, G, B * G)])[0]
print(whole, pooled)
