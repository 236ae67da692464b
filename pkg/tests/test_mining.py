import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlembed.datamodel import TrainInstance, ValidationError, content_hash, validate_train_instance
from xlembed.encoder import FileEncoder
from xlembed.mining import (
    ConstantTeacher,
    EncoderTeacher,
    FileTeacher,
    FunctionTeacher,
    MiningSettings,
    TeacherError,
    mine_hard_negatives,
    parse_window,
    score_teacher,
    teacher_from_spec,
)


def _unit(rows):
    rows = np.asarray(rows, dtype=float)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


class TestMine:
    def test_corpus_of_positives_only(self):
        inst = TrainInstance("q", ("a", "b"))
        out = mine_hard_negatives(inst, ["a", "b"], _unit([[1, 0], [0, 1]]), np.array([1.0, 0.0]),
                                  MiningSettings(window=(1, 10)))
        assert out == inst

    def test_zero_budget_and_empty_corpus(self):
        inst = TrainInstance("q", ("a",))
        E = _unit([[1, 0]])
        assert mine_hard_negatives(inst, ["x"], E, np.array([1.0, 0.0]), MiningSettings(max_negatives=0)) == inst
        assert mine_hard_negatives(inst, [], np.zeros((0, 2)), np.array([1.0, 0.0]), MiningSettings()) == inst

    def test_hand_ranked_top_two(self):
        # dot products with q=(1,0): x 0.6, y 1.0, z -0.8
        corpus = ["x", "y", "z"]
        E = np.array([[0.6, 0.8], [1.0, 0.0], [-0.8, 0.6]])
        out = mine_hard_negatives(TrainInstance("q", ("a",)), corpus, E, np.array([1.0, 0.0]),
                                  MiningSettings(max_negatives=2, window=(1, 3), strategy="top"))
        assert out.neg == ("y", "x")

    def test_uniform_samples_within_window(self):
        corpus = [f"c{i}" for i in range(30)]
        E = _unit(np.column_stack([np.linspace(1, 0, 30), np.linspace(0, 1, 30)]))
        q = np.array([1.0, 0.0])
        s = MiningSettings(max_negatives=5, window=(3, 12), seed=4)
        out = mine_hard_negatives(TrainInstance("q", ("p",)), corpus, E, q, s)
        ranks = [corpus.index(t) + 1 for t in out.neg]
        assert len(ranks) == 5 and all(3 <= r <= 12 for r in ranks)
        assert ranks == sorted(ranks)
        assert out.meta["mining_window"] == "3:12"

    def test_excludes_query_and_existing(self):
        corpus = ["q", "p", "n0", "c"]
        E = _unit([[1, 0], [1, 0.1], [1, 0.2], [1, 0.3]])
        inst = TrainInstance("q", ("p",), ("n0",))
        out = mine_hard_negatives(inst, corpus, E, np.array([1.0, 0.0]), MiningSettings(window=(1, 4)))
        assert out.neg == ("n0", "c")

    def test_clears_stale_teacher_scores(self):
        inst = TrainInstance("q", ("p",), (), (1.0,))
        out = mine_hard_negatives(inst, ["c"], _unit([[1, 0]]), np.array([1.0, 0.0]), MiningSettings(window=(1, 1)))
        assert out.teacher_scores is None

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            mine_hard_negatives(TrainInstance("q", ("p",)), ["c"], _unit([[1, 0]]), np.ones(3) / np.sqrt(3),
                                MiningSettings())

    @given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 40), k=st.integers(0, 20), n_pos=st.integers(1, 3))
    def test_invariants_and_determinism(self, seed, n, k, n_pos):
        rng = np.random.default_rng(seed)
        corpus = [f"t{i}" for i in range(n)]
        E = _unit(rng.normal(size=(n, 4)))
        q = _unit(rng.normal(size=(1, 4)))[0]
        inst = TrainInstance("query", tuple(corpus[:n_pos]))
        s = MiningSettings(max_negatives=k, seed=seed)
        a = mine_hard_negatives(inst, corpus, E, q, s)
        b = mine_hard_negatives(inst, corpus, E, q, s)
        assert a == b
        assert len(a.neg) <= k
        assert not set(a.neg) & set(a.pos)
        validate_train_instance(a)

    def test_settings_validation(self):
        with pytest.raises(ValidationError):
            MiningSettings(window=(0, 5))
        with pytest.raises(ValidationError):
            MiningSettings(window=(5, 2))
        with pytest.raises(ValidationError):
            MiningSettings(max_negatives=-1)
        assert parse_window("2:100") == (2, 100)
        with pytest.raises(ValidationError):
            parse_window("2-100")


class TestScoreTeacher:
    def test_single_member_group(self):
        assert score_teacher(TrainInstance("q", ("p",)), ConstantTeacher(0.0)).teacher_scores == (0.0,)

    def test_stub_passthrough(self):
        t = FunctionTeacher(lambda q, p: 1.0 if p == "pos" else -1.0)
        out = score_teacher(TrainInstance("q", ("pos",), ("n1", "n2")), t)
        assert out.teacher_scores == (1.0, -1.0, -1.0)

    def test_dot_product_teacher(self, rng):
        texts = ["q", "p", "n1", "n2", "n3"]
        vecs = _unit(rng.normal(size=(5, 3)))
        teacher = EncoderTeacher(FileEncoder({content_hash(t): v for t, v in zip(texts, vecs)}))
        out = score_teacher(TrainInstance("q", ("p",), ("n1", "n2", "n3")), teacher)
        np.testing.assert_allclose(out.teacher_scores, vecs[1:] @ vecs[0], atol=1e-12)

    def test_preserves_fields(self):
        inst = TrainInstance("q", ("p", "p2"), ("n",), meta={"lang": "hau_Latn"})
        out = score_teacher(inst, ConstantTeacher(2.0))
        assert (out.query, out.pos, out.neg, out.meta) == (inst.query, inst.pos, inst.neg, inst.meta)

    def test_failure_leaves_instance(self):
        inst = TrainInstance("q", ("p",), ("n",))

        def boom(q, p):
            raise RuntimeError("down")

        with pytest.raises(TeacherError):
            score_teacher(inst, FunctionTeacher(boom))
        assert inst.teacher_scores is None
        with pytest.raises(TeacherError):
            score_teacher(inst, FunctionTeacher(lambda q, p: float("nan")))

    def test_file_teacher(self, tmp_path):
        from xlembed.datamodel import write_jsonl

        path = tmp_path / "t.jsonl"
        write_jsonl(path, [{"key": content_hash("q", "p"), "score": 3.5}, {"key": content_hash("q", "n"), "score": -1}])
        out = score_teacher(TrainInstance("q", ("p",), ("n",)), teacher_from_spec(f"file:{path}"))
        assert out.teacher_scores == (3.5, -1.0)
        with pytest.raises(TeacherError):
            score_teacher(TrainInstance("q", ("p",), ("zzz",)), FileTeacher.load(path))

    def test_specs(self, world):
        assert teacher_from_spec("const:1.5").score([("a", "b")]) == [1.5]
        t = teacher_from_spec("toy-oracle:0")
        a = world.render([1, 2, 3], "eng_Latn")
        b = world.render([1, 2, 3], "hau_Latn")
        assert t.score([(a, b)]) == [pytest.approx(10.0)]
        with pytest.raises(ValidationError):
            teacher_from_spec("bge:large")
