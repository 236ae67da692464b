"""
Training the toy student encoder
================================

One epoch of plain gradient descent on mined, teacher-scored instances.
"""

import tempfile

from xlembed.encoder import ToyEncoderParams, encoder_from_spec
from xlembed.mining import MiningSettings, mine_hard_negatives, score_teacher, teacher_from_spec
from xlembed.pipeline import ExpansionSettings, build_dataset
from xlembed.selftest import gradient_check
from xlembed.synthetic import DESK_LANGS, ToyWorld
from xlembed.trainer import TrainConfig, lr_at, train_epoch

world = ToyWorld(seed=0)
examples = world.nli_corpus(20)
instances, stats = build_dataset(examples, world.translation_records(examples, DESK_LANGS),
                                 ExpansionSettings(DESK_LANGS))
corpus = sorted({t for inst in instances for t in (*inst.pos, *inst.neg)})
enc = encoder_from_spec("toy:13:32")
E, Q = enc.embed(corpus), enc.embed([i.query for i in instances])
teacher = teacher_from_spec("toy-oracle:0")
data = [score_teacher(mine_hard_negatives(i, corpus, E, q, MiningSettings(seed=13)), teacher)
        for i, q in zip(instances, Q)]
print(stats["instances"], "instances")

# %%
# The analytic gradient agrees with finite differences.
print("max relative gradient error", gradient_check())

# %%
# Warmup then linear decay.
cfg = TrainConfig(log_every=5)
print([round(lr_at(s, 24, cfg) * 1e6, 2) for s in range(0, 25, 4)], "x 1e-6")

# %%
with tempfile.TemporaryDirectory() as out:
    params, log, checkpoints = train_epoch(data, ToyEncoderParams.init(0), cfg, out_dir=out)
for rec in log:
    print(rec["step"], round(rec["loss"], 3))
