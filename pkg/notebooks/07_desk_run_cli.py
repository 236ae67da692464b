"""
The desk run through the command line
=====================================

build-data, mine, score-teacher, train and evaluate, chained exactly as a
shell user would call ``xlembed``.
"""

import json
import tempfile
from pathlib import Path

from xlembed.cli import main
from xlembed.synthetic import write_desk_inputs

root = Path(tempfile.mkdtemp())
paths = write_desk_inputs(root / "in")

main(["build-data", "--nli", str(paths["nli"]), "--translations", str(paths["translations"]),
      "--langs", "hau_Latn,swa_Latn,yor_Latn,fuv_Latn", "--out", str(root / "data.jsonl")])
main(["mine", "--in", str(root / "data.jsonl"), "--corpus", str(paths["corpus"]), "--out", str(root / "mined.jsonl")])
main(["score-teacher", "--in", str(root / "mined.jsonl"), "--out", str(root / "scored.jsonl")])
main(["train", "--data", str(root / "scored.jsonl"), "--out", str(root / "run")])

# %%
main(["evaluate", "--encoder", "toy:0:32", "--name", "untrained", "--out", str(root / "before")])
main(["evaluate", "--encoder", f"checkpoint:{root / 'run' / 'final.npz'}", "--name", "trained",
      "--out", str(root / "after")])
main(["report", str(root / "before"), str(root / "after")])

# %%
# Bitext is where cross-lingual training shows first.
for run in ("before", "after"):
    s = json.loads((root / run / "summary.json").read_text())[0]
    print(run, {t: round(s["task_means"][t], 2) for t in ("FloresBitextMining", "NTREXBitextMining")})
