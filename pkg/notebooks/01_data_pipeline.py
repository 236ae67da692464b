"""
Building cross-lingual training data
====================================

NLI examples are expanded into bilingual premise/hypothesis pairs, gated by
translation quality scores, and regrouped into contrastive instances.
"""

from xlembed.datamodel import Direction
from xlembed.pipeline import ExpansionSettings, build_dataset, expand_example, filter_by_qe, index_translations
from xlembed.synthetic import ToyWorld

# a synthetic world supplies NLI data, translations and QE scores
world = ToyWorld(seed=0)
examples = world.nli_corpus(n_groups=4)
for ex in examples[:3]:
    print(ex.label, "|", ex.premise, "=>", ex.hypothesis)

# %%
# Each example yields three directions per target language plus one
# source-only pair.
langs = ("hau_Latn", "fuv_Latn")
records = world.translation_records(examples, langs)
idx = index_translations(records)
settings = ExpansionSettings(langs)
pairs = expand_example(examples[0], idx[examples[0].id], settings)
for p in pairs:
    print(p.direction.value, p.lang, p.min_translated_qe)

# %%
# Pairs scoring below the threshold are dropped. The second language's
# translations are deliberately noisy, so they all fail the gate.
kept = filter_by_qe(pairs, settings.qe_threshold)
print(len(pairs), "pairs,", len(kept), "kept")

# %%
# The whole corpus in one call. Entailments become positives; contradictions
# and SNLI neutrals become negatives of the same premise group.
instances, stats = build_dataset(examples, records, settings)
print(stats)
print(instances[0].query, "->", instances[0].pos, instances[0].neg)

# %%
# Directions can be restricted, e.g. to source-side queries only.
_, stats = build_dataset(examples, records, ExpansionSettings(langs, {Direction.SRC_TGT, Direction.SRC_SRC}))
print(stats)
