"""
Benchmark suites and macro aggregation
======================================

A manifest lists tasks and languages; scores are averaged over languages,
then tasks, then (optionally) families, all unweighted.
"""

from xlembed.bench import aggregate, builtin_manifest, emit_report, fixture_summary_rows, run_suite
from xlembed.encoder import encoder_from_spec
from xlembed.synthetic import ToyWorld

manifest = builtin_manifest("lite")
print(len(manifest.tasks), "tasks,", manifest.n_datasets, "datasets,", manifest.aggregation)

# %%
# Reference rows reproduce their printed averages.
rows = fixture_summary_rows("lite_results.json")
summaries = [aggregate(table, "task_macro", name=model) for model, table, _ in rows[:4]]
print(emit_report(summaries))

# %%
# Running the lite suite on synthetic fixtures: the concept oracle is an
# upper bound, an untrained toy encoder a floor.
world = ToyWorld(0)
for name, enc in (("oracle", world.oracle_encoder), ("toy", encoder_from_spec("toy:0:32"))):
    s = aggregate(run_suite(manifest, enc, world=world), manifest.aggregation, name=name)
    print(emit_report(s, by="family"))
