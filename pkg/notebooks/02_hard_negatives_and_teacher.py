"""
Hard-negative mining and teacher scores
=======================================

Negatives are sampled from a rank window of an encoder's neighbours, then a
cross-encoder stand-in scores every candidate of the group.
"""

import numpy as np

from xlembed.encoder import encoder_from_spec
from xlembed.mining import MiningSettings, mine_hard_negatives, score_teacher, teacher_from_spec
from xlembed.pipeline import ExpansionSettings, build_dataset
from xlembed.synthetic import ToyWorld

world = ToyWorld(seed=0)
examples = world.nli_corpus(n_groups=10)
instances, _ = build_dataset(examples, world.translation_records(examples, ["swa_Latn"]),
                             ExpansionSettings(["swa_Latn"]))

# %%
# Embed the corpus once and rank it for each query.
corpus = sorted({t for inst in instances for t in (*inst.pos, *inst.neg)})
encoder = encoder_from_spec("toy:13:32")
E = encoder.embed(corpus)
inst = instances[0]
q = encoder.embed([inst.query])[0]

settings = MiningSettings(max_negatives=5, window=(2, 30), seed=13)
mined = mine_hard_negatives(inst, corpus, E, q, settings)
print(len(inst.neg), "->", len(mined.neg), "negatives")

# %%
# The "top" strategy keeps the best-ranked candidates instead of sampling.
top = mine_hard_negatives(inst, corpus, E, q, MiningSettings(3, (1, 100), strategy="top"))
ranks = np.argsort(-(E @ q))
print([corpus[i] for i in ranks[:5]])
print(top.neg[len(inst.neg):])

# %%
# The toy teacher scores concept overlap, so the positive scores highest.
scored = score_teacher(mined, teacher_from_spec("toy-oracle:0"))
print(np.round(scored.teacher_scores, 2))
