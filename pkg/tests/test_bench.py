import json
from statistics import fmean

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlembed.bench import (LITE_LANGUAGES, ManifestError, ScoreTable, aggregate, builtin_manifest,
                           emit_report, fixture_summary_rows, load_fixture, load_manifest, manifest_from_dict,
                           parse_machine_report, parse_text_table, resolve_cells, run_suite)
from xlembed.datamodel import ValidationError
from xlembed.encoder import encoder_from_spec


def _tiny_manifest(langs=("hau_Latn", "swa_Latn"), suite="tiny"):
    return manifest_from_dict({"suite": suite, "aggregation": "family_macro", "tasks": [
        {"name": "Bit", "family": "Btxt", "languages": list(langs), "fixture": "synthetic"},
        {"name": "Topic", "family": "Clf", "languages": list(langs), "fixture": "synthetic", "params": {"size": 40}},
    ]})


class TestManifest:
    def test_lite(self):
        m = builtin_manifest("lite")
        assert len(m.tasks) == 12 and m.n_datasets == 13
        assert m.aggregation == "task_macro"
        assert all(set(t.languages) == set(LITE_LANGUAGES) for t in m.tasks)
        assert {t.family for t in m.tasks} == {"Clf", "PrClf", "Rtrvl", "MultiClf", "Btxt", "Clust"}

    def test_unknown_family(self):
        with pytest.raises(ManifestError, match="unknown family"):
            manifest_from_dict({"suite": "x", "tasks": [{"name": "T", "family": "Regression",
                                                         "languages": ["hau_Latn"]}]})

    def test_lite_coverage(self):
        with pytest.raises(ManifestError, match="lite coverage"):
            manifest_from_dict({"suite": "lite", "tasks": [{"name": "T", "family": "Clf",
                                                            "languages": ["hau_Latn"]}]})

    @pytest.mark.parametrize("bad", [{"tasks": []}, {"suite": "x", "tasks": [], "aggregation": "median"},
                                     {"suite": "x", "tasks": [{"name": "T", "family": "Clf"}]}])
    def test_malformed(self, bad):
        with pytest.raises(ManifestError):
            manifest_from_dict(bad)

    def test_bad_language_code(self):
        with pytest.raises(ValidationError):
            manifest_from_dict({"suite": "x", "tasks": [{"name": "T", "family": "Clf", "languages": ["hausa"]}]})

    def test_default_metric(self):
        assert _tiny_manifest().tasks[0].metric == "f1"

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{not json")
        with pytest.raises(ManifestError):
            load_manifest(p)
        p.write_text(json.dumps(load_fixture("lite_manifest.json")))
        assert load_manifest(p) == builtin_manifest("lite")

    def test_fixture_root_override(self, tmp_path, monkeypatch):
        d = load_fixture("lite_manifest.json")
        d["suite"] = "mine"
        (tmp_path / "mine_manifest.json").write_text(json.dumps(d))
        monkeypatch.setenv("XLEMBED_FIXTURES", str(tmp_path))
        assert builtin_manifest("mine").suite == "mine"


class TestAggregation:
    def test_per_language_example(self):
        task = load_fixture("per_language.json")["tasks"][0]
        row = next(r for r in task["rows"] if r["model"] == "bge-m3")
        s = aggregate(ScoreTable({task["task"]: row["scores"]}, {task["task"]: "Clf"}), "task_macro")
        assert abs(s.overall - 50.08) <= 0.005

    def test_lite_example(self):
        model, table, printed = next(r for r in fixture_summary_rows("lite_results.json")
                                     if r[0] == "AfriE5-large-instruct")
        assert printed == 63.7
        assert abs(aggregate(table, "task_macro").overall - 63.7) <= 0.05

    def test_full_example(self):
        _, table, printed = next(r for r in fixture_summary_rows("full_results.json")
                                 if r[0] == "AfriE5-large-instruct")
        assert printed == 62.4
        assert abs(aggregate(table, "family_macro").overall - 62.4) <= 0.05

    def test_ablation_rows(self):
        for row in load_fixture("ablation.json")["rows"]:
            assert abs(fmean(row["scores"].values()) - row["printed_avg"]) <= 0.05

    def test_family_vs_task_macro(self):
        t = ScoreTable({"a": {"x": 10.0}, "b": {"x": 20.0}, "c": {"x": 60.0}}, {"a": "Clf", "b": "Clf", "c": "STS"})
        assert aggregate(t, "family_macro").overall == pytest.approx(37.5)
        assert aggregate(t, "task_macro").overall == pytest.approx(30.0)

    def test_language_macro_is_unweighted(self):
        t = ScoreTable({"a": {"x": 0.0, "y": 100.0, "z": 50.0}}, {"a": "Clf"})
        assert aggregate(t).task_means["a"] == 50.0

    @given(st.lists(st.floats(0, 100), min_size=1, max_size=8), st.randoms(use_true_random=False))
    def test_bounds_and_permutation(self, values, rnd):
        langs = [f"l{i}" for i in range(len(values))]
        t = ScoreTable({"T": dict(zip(langs, values))}, {"T": "Clf"})
        shuffled = list(zip(langs, values))
        rnd.shuffle(shuffled)
        t2 = ScoreTable({"T": dict(shuffled)}, {"T": "Clf"})
        a, b = aggregate(t).overall, aggregate(t2).overall
        assert a == pytest.approx(b, abs=1e-12)
        assert min(values) - 1e-9 <= a <= max(values) + 1e-9

    def test_errors(self):
        with pytest.raises(ValidationError):
            ScoreTable({"a": {"x": 101.0}}, {"a": "Clf"})
        with pytest.raises(ValidationError):
            aggregate(ScoreTable({}, {}))
        with pytest.raises(ValidationError):
            aggregate(ScoreTable({"a": {"x": 1.0}}, {"a": "Clf"}), "median")


class TestRunSuite:
    def test_cells_and_determinism(self, world):
        m = _tiny_manifest()
        enc = encoder_from_spec("toy:0:32")
        a = run_suite(m, enc, world=world)
        assert sum(len(r) for r in a.scores.values()) == 4
        assert a.scores == run_suite(m, enc, world=world).scores

    def test_oracle_lite(self, world):
        s = aggregate(run_suite(builtin_manifest("lite"), world.oracle_encoder, world=world), "task_macro")
        assert s.overall >= 99.0

    def test_missing_cells_listed(self, tmp_path):
        m = manifest_from_dict({"suite": "x", "tasks": [{"name": "T", "family": "Clf",
                                                         "languages": ["hau_Latn", "swa_Latn"]}]})
        with pytest.raises(FileNotFoundError, match="T/hau_Latn, T/swa_Latn"):
            resolve_cells(m, tmp_path)

    def test_data_root_files_win(self, world, tmp_path):
        from xlembed.datasets import save_dataset
        m = _tiny_manifest(langs=("hau_Latn",))
        (tmp_path / "Bit").mkdir()
        ds = world.fixture("Btxt", "swa_Latn", size=10)
        save_dataset(tmp_path / "Bit" / "hau_Latn.jsonl", ds)
        cells = resolve_cells(m, tmp_path)
        assert cells[0][2].endswith("hau_Latn.jsonl") and cells[1][2] is None


class TestReports:
    @pytest.fixture
    def summaries(self):
        out = []
        for model, table, _ in fixture_summary_rows("lite_results.json")[:3]:
            out.append(aggregate(table, "task_macro", name=model))
        return out

    def test_text_table(self, summaries):
        text = emit_report(summaries, "text_table")
        header, rows = parse_text_table(text)
        assert header[-1] == "Avg" and len(header) == 13
        for s in summaries:
            vals = rows[s.name]
            assert abs(fmean(vals[:-1]) - vals[-1]) <= 0.05 + 1e-9

    def test_family_columns(self, world):
        s = aggregate(run_suite(builtin_manifest("lite"), encoder_from_spec("toy:0:32"), world=world),
                      "task_macro", name="toy")
        header, rows = parse_text_table(emit_report(s, by="family"))
        assert len(header) == 7

    def test_machine_round_trip(self, summaries, tmp_path):
        text = emit_report(summaries, "machine", out=tmp_path / "s.json")
        assert (tmp_path / "s.json").read_text() == text
        back = parse_machine_report(text)
        assert [b.to_dict() for b in back] == [s.to_dict() for s in summaries]

    def test_unknown_format(self, summaries):
        with pytest.raises(ValidationError):
            emit_report(summaries, "yaml")


class TestReportLayout:
    def test_eight_families_nine_columns(self):
        _, table, _ = fixture_summary_rows("full_results.json")[0]
        s = aggregate(table, "family_macro", name="one run")
        header, rows = parse_text_table(emit_report(s))
        assert len(header) == 9 and len(rows["one run"]) == 9

    def test_two_decimals(self):
        s = aggregate(ScoreTable({"T": {"a": 50.123, "b": 50.0}}, {"T": "Clf"}), "task_macro")
        assert "50.06" in emit_report(s, decimals=2)
