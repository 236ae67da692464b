import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlembed.datamodel import ValidationError
from xlembed.encoder import (
    DegenerateEmbedding,
    FileEncoder,
    ToyEncoder,
    ToyEncoderParams,
    encoder_from_spec,
    format_instruction,
    forward_features,
    load_params,
    ngram_features,
    save_params,
    toy_backward,
    toy_forward,
)


class TestInstruction:
    def test_empty_passthrough(self):
        assert format_instruction("", "hello") == "hello"

    def test_template(self):
        assert format_instruction("Classify topic", "x") == "Instruct: Classify topic\nQuery: x"

    def test_not_idempotent(self):
        once = format_instruction("t", "x")
        assert format_instruction("t", once) == "Instruct: t\nQuery: " + once


class TestForward:
    def test_identical_texts(self):
        emb, _ = toy_forward(["same text", "same text"], ToyEncoderParams.init(0))
        np.testing.assert_array_equal(emb[0], emb[1])

    @given(st.lists(st.text(min_size=1, max_size=60), min_size=1, max_size=5), st.integers(0, 1000))
    def test_unit_norm(self, texts, seed):
        emb, _ = toy_forward(texts, ToyEncoderParams.init(seed, dim=8, n_buckets=256))
        np.testing.assert_allclose(np.linalg.norm(emb, axis=1), 1.0, atol=1e-9)

    def test_hand_normalized(self):
        emb, cache = forward_features(np.array([[3.0, 4.0]]), np.eye(2))
        np.testing.assert_allclose(emb, [[0.6, 0.8]], atol=1e-15)
        np.testing.assert_allclose(cache["norms"], [5.0])

    def test_short_text_whole_string_feature(self):
        p = ToyEncoderParams.init(0, n_buckets=64)
        f = ngram_features("ab", p)
        assert f.sum() == pytest.approx(1.0) and np.count_nonzero(f) == 1

    def test_features_mean_pooled(self):
        f = ngram_features("abcdef", ToyEncoderParams.init(0, n_buckets=1 << 14))
        assert f.sum() == pytest.approx(1.0)
        assert f.max() <= 0.5

    def test_char_cap(self):
        p = ToyEncoderParams.init(0)
        np.testing.assert_array_equal(ngram_features("x" * 600 + "tail", p), ngram_features("x" * 512, p))

    def test_degenerate(self):
        with pytest.raises(DegenerateEmbedding, match="degenerate embedding"):
            forward_features(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 0.0]]))

    def test_permutation_equivariance(self, rng):
        texts = ["alpha", "beta gamma", "delta", "epsilon zeta eta"]
        enc = ToyEncoder(ToyEncoderParams.init(3))
        perm = rng.permutation(len(texts))
        np.testing.assert_allclose(enc.embed([texts[i] for i in perm]), enc.embed(texts)[perm], atol=1e-15)

    def test_instruction_applied_to_queries(self):
        enc = ToyEncoder(ToyEncoderParams.init(0))
        a = enc.embed(["x y z"], "Find it")
        b = enc.embed([format_instruction("Find it", "x y z")])
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, enc.embed(["x y z"]))


def _fd_grad_check(params, texts, G, h=1e-6):
    """Max relative error of toy_backward for the loss sum(G * emb)."""
    emb, cache = toy_forward(texts, params)
    analytic = toy_backward(cache, G)
    worst = 0.0
    for idx in zip(*np.nonzero(analytic)):
        old = params.W[idx]
        params.W[idx] = old + h
        up = np.sum(G * toy_forward(texts, params)[0])
        params.W[idx] = old - h
        down = np.sum(G * toy_forward(texts, params)[0])
        params.W[idx] = old
        num = (up - down) / (2 * h)
        worst = max(worst, abs(num - analytic[idx]) / max(abs(num), abs(analytic[idx]), 1e-8))
    return worst


class TestBackward:
    def test_zero_grad(self):
        _, cache = toy_forward(["abc def"], ToyEncoderParams.init(0))
        np.testing.assert_array_equal(toy_backward(cache, np.zeros((1, 32))), 0.0)

    def test_radial_grad_annihilated(self):
        emb, cache = toy_forward(["abc def", "ghi"], ToyEncoderParams.init(0))
        np.testing.assert_allclose(toy_backward(cache, 2.5 * emb), 0.0, atol=1e-12)

    def test_shape_mismatch(self):
        _, cache = toy_forward(["abc"], ToyEncoderParams.init(0))
        with pytest.raises(ValueError):
            toy_backward(cache, np.zeros((2, 32)))

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        params = ToyEncoderParams(rng.normal(size=(3, 5)), hash_seed=seed)
        texts = ["".join(rng.choice(list("abcdefg "), int(rng.integers(3, 15)))) for _ in range(3)]
        assert _fd_grad_check(params, texts, rng.normal(size=(3, 3))) <= 1e-5


class TestPortsAndPersistence:
    def test_checkpoint_round_trip(self, tmp_path):
        p = ToyEncoderParams.init(7, dim=4, n_buckets=32)
        save_params(tmp_path / "c.npz", p, step=3)
        q = load_params(tmp_path / "c.npz")
        np.testing.assert_array_equal(p.W, q.W)
        assert (q.hash_seed, q.ngram, q.max_chars) == (7, 3, 512)

    def test_file_encoder(self, tmp_path, rng):
        vecs = {"a": rng.normal(size=4), "b": rng.normal(size=4)}
        FileEncoder.save(tmp_path / "e.npz", vecs)
        enc = encoder_from_spec(f"file:{tmp_path / 'e.npz'}")
        out = enc.embed(["b", "a"])
        np.testing.assert_allclose(out[0], vecs["b"] / np.linalg.norm(vecs["b"]))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0)
        with pytest.raises(LookupError):
            enc.embed(["c"])

    def test_specs(self):
        assert encoder_from_spec("toy:1:16").dim == 16
        np.testing.assert_array_equal(encoder_from_spec("toy:1:16").embed(["x"]),
                                      ToyEncoder(ToyEncoderParams.init(1, 16)).embed(["x"]))
        for bad in ("toy:1", "mE5:large", "toy:a:b"):
            with pytest.raises(ValidationError):
                encoder_from_spec(bad)

    def test_params_validation(self):
        with pytest.raises(ValidationError):
            ToyEncoderParams(np.array([[np.nan]]))
        with pytest.raises(ValidationError):
            ToyEncoderParams(np.zeros(3))
