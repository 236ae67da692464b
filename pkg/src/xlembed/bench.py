"""Benchmark manifests, macro aggregation and report emission.

Aggregation is unweighted at every level: a task's score is the mean over
its languages, a family's the mean over its tasks, and the overall score
the mean over families (``family_macro``) or over tasks (``task_macro``).
Nothing is rounded until a report is printed.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from statistics import fmean

from .datamodel import ValidationError, canonical_json, check_lang_code
from .datasets import LabeledDataset, evaluate_dataset, load_dataset
from .evaluator import FAMILIES

LITE_LANGUAGES = ("amh_Ethi", "gaz_Latn", "hau_Latn", "ibo_Latn", "kin_Latn",
                  "swa_Latn", "xho_Latn", "yor_Latn", "zul_Latn")
AGGREGATION_MODES = ("family_macro", "task_macro")
DEFAULT_METRIC = {"Btxt": "f1", "PrClf": "ap", "Clf": "accuracy", "MultiClf": "lrap",
                  "Clust": "v_measure", "STS": "spearman", "Rtrvl": "ndcg_at_10", "Rrnk": "map"}
FIXTURE_ENV = "XLEMBED_FIXTURES"


class ManifestError(ValidationError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    family: str
    languages: tuple[str, ...]
    metric: str = ""
    split: str = "test"
    path: str | None = None  # may contain {lang}
    fixture: str | None = None
    sources: dict = field(default_factory=dict, hash=False)
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ManifestError(f"task {self.name!r}: unknown family {self.family!r}")
        if not self.languages:
            raise ManifestError(f"task {self.name!r}: empty language list")
        for lang in self.languages:
            check_lang_code(lang)
        if not self.metric:
            object.__setattr__(self, "metric", DEFAULT_METRIC[self.family])

    @property
    def datasets(self) -> set[str]:
        return set(self.sources.values()) or {self.name}


@dataclass(frozen=True)
class SuiteManifest:
    suite: str
    tasks: tuple[TaskSpec, ...]
    aggregation: str = "family_macro"
    languages: tuple[str, ...] = ()

    @property
    def n_datasets(self) -> int:
        return sum(len(t.datasets) for t in self.tasks)


def manifest_from_dict(d: dict) -> SuiteManifest:
    for key in ("suite", "tasks"):
        if key not in d:
            raise ManifestError(f"manifest missing field {key!r}")
    mode = d.get("aggregation", "family_macro")
    if mode not in AGGREGATION_MODES:
        raise ManifestError(f"unknown aggregation mode {mode!r}")
    tasks = []
    for i, t in enumerate(d["tasks"]):
        name = t.get("name", f"#{i}")
        for key in ("name", "family", "languages"):
            if key not in t:
                raise ManifestError(f"task {name!r}: missing field {key!r}")
        tasks.append(TaskSpec(name=t["name"], family=t["family"], languages=tuple(t["languages"]),
                              metric=t.get("metric", ""), split=t.get("split", "test"), path=t.get("path"),
                              fixture=t.get("fixture"), sources=dict(t.get("sources", {})),
                              params=dict(t.get("params", {}))))
    langs = tuple(d.get("languages", ()))
    m = SuiteManifest(d["suite"], tuple(tasks), mode, langs)
    if m.suite == "lite":
        required = set(langs or LITE_LANGUAGES)
        for t in m.tasks:
            missing = required - set(t.languages)
            if missing:
                raise ManifestError(f"lite coverage: task {t.name!r} lacks {sorted(missing)}")
    return m


def load_manifest(path) -> SuiteManifest:
    with open(path, encoding="utf-8") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(f"manifest is not valid JSON: {e}") from None
    return manifest_from_dict(d)


def fixture_path(name: str) -> Path:
    root = os.environ.get(FIXTURE_ENV)
    if root:
        return Path(root) / name
    return Path(str(resources.files("xlembed") / "fixtures" / name))


def load_fixture(name: str) -> dict:
    with open(fixture_path(name), encoding="utf-8") as f:
        return json.load(f)


def builtin_manifest(name: str) -> SuiteManifest:
    """``lite`` is shipped; any other name is looked up as ``<name>_manifest.json`` in the fixture root."""
    return manifest_from_dict(load_fixture(f"{name}_manifest.json"))


# -- score tables and aggregation -----------------------------------------------


@dataclass
class ScoreTable:
    scores: dict[str, dict[str, float]]
    families: dict[str, str]

    def __post_init__(self):
        for task, row in self.scores.items():
            if task not in self.families:
                raise ValidationError(f"task {task!r} has no family")
            for lang, v in row.items():
                if not 0.0 <= v <= 100.0:
                    raise ValidationError(f"score {v} for ({task}, {lang}) outside [0, 100]")


@dataclass
class Summary:
    task_means: dict[str, float]
    family_means: dict[str, float]
    overall: float
    mode: str
    task_family: dict[str, str]
    cells: dict[str, dict[str, float]] = field(default_factory=dict)
    name: str = "run"

    def to_dict(self) -> dict:
        return {"name": self.name, "mode": self.mode, "overall": self.overall,
                "task_means": self.task_means, "family_means": self.family_means,
                "task_family": self.task_family, "cells": self.cells}

    @classmethod
    def from_dict(cls, d: dict) -> "Summary":
        return cls(d["task_means"], d["family_means"], d["overall"], d["mode"], d["task_family"],
                   d.get("cells", {}), d.get("name", "run"))


def aggregate(table: ScoreTable, mode: str = "family_macro", name: str = "run") -> Summary:
    if mode not in AGGREGATION_MODES:
        raise ValidationError(f"unknown aggregation mode {mode!r}")
    if not table.scores:
        raise ValidationError("empty score table")
    task_means = {}
    for task, row in table.scores.items():
        if not row:
            raise ValidationError(f"task {task!r} has no language scores")
        task_means[task] = fmean(row.values())
    by_family: dict[str, list[float]] = {}
    for task, m in task_means.items():
        by_family.setdefault(table.families[task], []).append(m)
    family_means = {f: fmean(v) for f, v in by_family.items()}
    overall = fmean(family_means.values()) if mode == "family_macro" else fmean(task_means.values())
    return Summary(task_means, family_means, overall, mode,
                   {t: table.families[t] for t in table.scores},
                   {t: dict(r) for t, r in table.scores.items()}, name)


# -- running a suite --------------------------------------------------------------


def resolve_cells(manifest: SuiteManifest, data_root=None) -> list[tuple[TaskSpec, str, str | None]]:
    """(task, lang, file path or None for a synthetic fixture) per cell; raises listing every unresolved cell."""
    cells, missing = [], []
    for t in manifest.tasks:
        for lang in t.languages:
            path = None
            if t.path:
                path = t.path.format(lang=lang, task=t.name)
            elif data_root is not None:
                path = str(Path(data_root) / t.name / f"{lang}.jsonl")
            if path is not None and Path(path).exists():
                cells.append((t, lang, path))
            elif t.fixture == "synthetic":
                cells.append((t, lang, None))
            else:
                missing.append(f"{t.name}/{lang}")
    if missing:
        raise FileNotFoundError(f"unresolved dataset cells: {', '.join(missing)}")
    return cells


def cell_dataset(task: TaskSpec, lang: str, path, seed: int, world=None) -> LabeledDataset:
    if path is not None:
        return load_dataset(path, task.family)
    from .synthetic import ToyWorld

    world = world or ToyWorld(seed)
    return world.fixture(task.family, lang, seed=seed, tag=task.name, **task.params)


def run_suite(manifest: SuiteManifest, encoder, seed: int = 0, data_root=None, world=None) -> ScoreTable:
    cells = resolve_cells(manifest, data_root)
    scores: dict[str, dict[str, float]] = {t.name: {} for t in manifest.tasks}
    for task, lang, path in cells:
        result = evaluate_dataset(cell_dataset(task, lang, path, seed, world), encoder, seed=seed)
        scores[task.name][lang] = 100.0 * result.main_score
    return ScoreTable(scores, {t.name: t.family for t in manifest.tasks})


# -- reports ----------------------------------------------------------------------


def emit_report(summaries, fmt: str = "text_table", by: str | None = None, decimals: int = 1, out=None) -> str:
    """Render one or more summaries.

    ``text_table``: one row per run, one column per task (``by="task"``) or
    family (``by="family"``), then ``Avg``. ``machine``: canonical JSON of
    every summary. The text is written to ``out`` (path or stream) when given.
    """
    if isinstance(summaries, Summary):
        summaries = [summaries]
    if fmt == "machine":
        text = canonical_json([s.to_dict() for s in summaries]) + "\n"
    elif fmt == "text_table":
        by = by or ("family" if summaries[0].mode == "family_macro" else "task")
        cols = list(summaries[0].family_means if by == "family" else summaries[0].task_means)
        width = max(8, *(len(c) for c in cols))
        name_w = max(5, *(len(s.name) for s in summaries))
        buf = io.StringIO()
        buf.write("Model".ljust(name_w) + "".join(c.rjust(width + 1) for c in cols) + "Avg".rjust(width + 1) + "\n")
        for s in summaries:
            vals = s.family_means if by == "family" else s.task_means
            buf.write(s.name.ljust(name_w) + "".join(f"{vals[c]:.{decimals}f}".rjust(width + 1) for c in cols)
                      + f"{s.overall:.{decimals}f}".rjust(width + 1) + "\n")
        text = buf.getvalue()
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            Path(out).write_text(text, encoding="utf-8")
    return text


def parse_machine_report(text: str) -> list[Summary]:
    return [Summary.from_dict(d) for d in json.loads(text)]


def parse_text_table(text: str) -> tuple[list[str], dict[str, list[float]]]:
    """Column names and per-run numeric rows of a ``text_table`` report (last value is Avg)."""
    lines = [l for l in text.splitlines() if l.strip()]
    header = lines[0].split()[1:]
    rows = {}
    for line in lines[1:]:
        parts = line.split()
        n = len(header)
        rows[" ".join(parts[:-n])] = [float(x) for x in parts[-n:]]
    return header, rows


# -- reference-table fixtures - -----------------------------------------------------


def fixture_summary_rows(name: str) -> list[tuple[str, ScoreTable, float]]:
    """(model, table, printed average) for the full/lite result fixtures.

    Each printed column value becomes a one-cell task; for the full table
    the tasks are the families themselves.
    """
    d = load_fixture(name)
    lite_families = {t.name: t.family for t in builtin_manifest("lite").tasks}
    out = []
    for row in d["rows"]:
        scores = {c: {"all": v} for c, v in row["scores"].items()}
        fams = {c: (c if c in FAMILIES else lite_families[c]) for c in row["scores"]}
        out.append((row["model"], ScoreTable(scores, fams), row["printed_avg"]))
    return out
