import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlembed.datamodel import (
    Direction,
    NliExample,
    TrainInstance,
    TranslationRecord,
    ValidationError,
    canonical_json,
    check_lang_code,
    content_hash,
    parse_nli_lines,
    read_instances,
    serialize_nli,
    validate_train_instance,
    write_instances,
)


def _line(**kw):
    d = {"id": "1", "premise": "a cat sits", "hypothesis": "a cat", "label": "entailment", "source": "mnli"}
    d.update(kw)
    return json.dumps(d) + "\n"


class TestParseNli:
    def test_single_line(self):
        out = parse_nli_lines(io.BytesIO(_line().encode()))
        assert len(out) == 1
        assert out[0].label == "entailment"

    def test_empty_stream(self):
        assert parse_nli_lines(io.BytesIO(b"")) == []

    def test_unknown_label_names_line(self):
        with pytest.raises(ValidationError, match="unknown label at line 1"):
            parse_nli_lines(io.StringIO(_line(label="entails")))

    def test_missing_field_names_line_and_field(self):
        bad = json.dumps({"id": "2", "premise": "p", "label": "neutral", "source": "snli"}) + "\n"
        with pytest.raises(ValidationError, match="missing field 'hypothesis' at line 2"):
            parse_nli_lines(io.StringIO(_line() + bad))

    def test_malformed_json(self):
        with pytest.raises(ValidationError, match="malformed JSON at line 1"):
            parse_nli_lines(io.StringIO("{not json\n"))

    def test_blank_lines_skipped_and_order_kept(self):
        text = _line(id="a") + "\n" + _line(id="b")
        assert [e.id for e in parse_nli_lines(io.StringIO(text))] == ["a", "b"]

    def test_nfc_applied(self):
        decomposed = "cafe\u0301"
        out = parse_nli_lines(io.StringIO(_line(premise=decomposed)))
        assert out[0].premise == "caf\u00e9"


_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",), min_codepoint=32), min_size=1, max_size=20)


class TestRoundTrip:
    @given(st.lists(st.tuples(_text, _text, st.sampled_from(["entailment", "neutral", "contradiction"]),
                              st.sampled_from(["mnli", "snli"])), max_size=5))
    def test_serialize_parse_is_canonical(self, rows):
        from xlembed.datamodel import nfc

        examples = [NliExample(str(i), nfc(p), nfc(h), l, s) for i, (p, h, l, s) in enumerate(rows)]
        text = serialize_nli(examples)
        again = serialize_nli(parse_nli_lines(io.StringIO(text)))
        assert again == text

    def test_instances_round_trip(self, tmp_path):
        insts = [TrainInstance("q", ("p",), ("n1", "n2"), (1.0, 0.5, -2.0),
                               {"lang": "hau_Latn", "direction": "tgt_src", "source": "mnli"}),
                 TrainInstance("q2", ("p2",))]
        path = tmp_path / "i.jsonl"
        write_instances(path, insts)
        assert read_instances(path) == insts

    def test_canonical_json_sorted_compact(self):
        assert canonical_json({"b": 1, "a": "é"}) == '{"a":"é","b":1}'


class TestValidateTrainInstance:
    def test_minimal_ok(self):
        validate_train_instance(TrainInstance("q", ("a",)))

    def test_overlap(self):
        with pytest.raises(ValidationError, match="pos/neg overlap"):
            validate_train_instance(TrainInstance("q", ("a",), ("a",)))

    def test_score_length(self):
        with pytest.raises(ValidationError, match="score length"):
            validate_train_instance(TrainInstance("q", ("a",), ("b",), (1.0, 2.0, 3.0)))

    def test_empty_pos(self):
        with pytest.raises(ValidationError, match="empty pos"):
            validate_train_instance(TrainInstance("q", ()))

    def test_too_many_negatives(self):
        with pytest.raises(ValidationError, match="too many negatives"):
            validate_train_instance(TrainInstance("q", ("a",), ("b", "c")), max_negatives=1)

    def test_overlap_after_nfc(self):
        with pytest.raises(ValidationError, match="pos/neg overlap"):
            validate_train_instance(TrainInstance("q", ("caf\u00e9",), ("cafe\u0301",)))

    def test_bad_meta(self):
        with pytest.raises(ValidationError, match="meta.lang"):
            validate_train_instance(TrainInstance("q", ("a",), meta={"lang": "hausa"}))
        with pytest.raises(ValidationError, match="meta.direction"):
            validate_train_instance(TrainInstance("q", ("a",), meta={"direction": "sideways"}))

    @given(pos=st.lists(st.sampled_from("abcde"), max_size=3, unique=True),
           neg=st.lists(st.sampled_from("abcdef"), max_size=4, unique=True),
           n_scores=st.one_of(st.none(), st.integers(0, 6)))
    def test_accepts_exactly_valid_instances(self, pos, neg, n_scores):
        scores = None if n_scores is None else tuple(float(i) for i in range(n_scores))
        inst = TrainInstance("q", tuple(pos), tuple(neg), scores)
        valid = bool(pos) and not (set(pos) & set(neg)) and (scores is None or len(scores) == 1 + len(neg))
        try:
            validate_train_instance(inst)
            accepted = True
        except ValidationError:
            accepted = False
        assert accepted == valid


class TestSmallTypes:
    def test_lang_codes(self):
        assert check_lang_code("amh_Ethi") == "amh_Ethi"
        for bad in ("amh", "AMH_Ethi", "amh_ethi", "am_Ethi", "amh-Ethi"):
            with pytest.raises(ValidationError):
                check_lang_code(bad)

    def test_direction_has_four_variants(self):
        assert {d.value for d in Direction} == {"tgt_src", "src_tgt", "tgt_tgt", "src_src"}
        assert Direction.parse("TGT_SRC") is Direction.TGT_SRC
        with pytest.raises(ValidationError):
            Direction.parse("both")

    def test_qe_score_range(self):
        TranslationRecord("1", "premise", "hau_Latn", "x", 0.0)
        TranslationRecord("1", "premise", "hau_Latn", "x", None)
        with pytest.raises(ValidationError):
            TranslationRecord("1", "premise", "hau_Latn", "x", 1.2)

    def test_absent_qe_distinct_from_zero(self):
        assert "qe_score" not in TranslationRecord("1", "premise", "hau_Latn", "x").to_dict()
        assert TranslationRecord("1", "premise", "hau_Latn", "x", 0.0).to_dict()["qe_score"] == 0.0

    def test_nli_invariants(self):
        with pytest.raises(ValidationError):
            NliExample("1", "", "h", "neutral", "mnli")
        with pytest.raises(ValidationError):
            NliExample("1", "p", "h", "neutral", "xnli")

    def test_content_hash_unambiguous(self):
        assert content_hash("ab", "c") != content_hash("a", "bc")
        assert content_hash("caf\u00e9") == content_hash("cafe\u0301")
