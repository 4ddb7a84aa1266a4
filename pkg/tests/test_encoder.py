import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from itemforge.encoder import (
    EncoderModel,
    TokenizerConfig,
    TrainConfig,
    TrainingError,
    embed,
    info_nce_loss,
    lr_schedule,
    tokenize,
    train,
    trigrams,
)

CFG = TokenizerConfig()
words_st = st.lists(st.text(alphabet="abcdefghij0123", min_size=1, max_size=8), min_size=1, max_size=12)


def reference_loss(q, cands, tau):
    """Plain-Python InfoNCE over cosine scores, positive first."""
    def cos(a, b):
        return sum(x * y for x, y in zip(a, b)) / math.sqrt(sum(x * x for x in a) * sum(y * y for y in b))

    logits = [cos(q, c) / tau for c in cands]
    m = max(logits)
    return -(logits[0] - m - math.log(sum(math.exp(v - m) for v in logits)))


class TestTokenize:
    def test_empty(self):
        assert tokenize("", CFG) == []

    def test_case_folding(self):
        assert tokenize("Halo", CFG) == tokenize("halo", CFG)

    def test_word_and_trigram_counts(self):
        # one word token plus len("<halo>") - 2 trigrams
        assert len(tokenize("Halo", CFG)) == 1 + 4
        assert len(tokenize("Halo", TokenizerConfig(use_char_trigrams=False))) == 1
        assert len(tokenize("Halo", TokenizerConfig(use_word_tokens=False))) == 4

    def test_splits_on_non_alphanumerics(self):
        assert tokenize("co-op, 3d!", CFG) == tokenize("co op 3d", CFG)

    def test_limit_truncates_from_front(self):
        full = tokenize("alpha beta gamma", CFG)
        assert tokenize("alpha beta gamma", CFG, 7) == full[:7]

    def test_misspelling_shares_trigrams(self):
        a, b = trigrams("Fortnite"), trigrams("Fortnte")
        assert a == ["<fo", "for", "ort", "rtn", "tni", "nit", "ite", "te>"]
        assert b == ["<fo", "for", "ort", "rtn", "tnt", "nte", "te>"]
        shared = set(a) & set(b)
        assert len(shared) / len(a) == 5 / 8
        assert len(shared) / len(b) == 5 / 7
        ta = set(tokenize("Fortnite", TokenizerConfig(use_word_tokens=False)))
        tb = set(tokenize("Fortnte", TokenizerConfig(use_word_tokens=False)))
        assert len(ta & tb) / len(ta) > 0.5

    @given(words_st)
    def test_buckets_in_range(self, words):
        assert all(0 <= t < 256 for t in tokenize(" ".join(words), TokenizerConfig(bucket_count=256)))

    @pytest.mark.parametrize("kwargs", [{"bucket_count": 128}, {"bucket_count": 1000}, {"max_query_tokens": 0}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            TokenizerConfig(**kwargs)


@pytest.fixture(scope="module")
def model():
    return EncoderModel.init(3, TokenizerConfig(bucket_count=4096), dim=16)


class TestEmbed:
    def test_empty_is_zero(self, model):
        v = embed("", model)
        assert np.linalg.norm(v) == 0

    @settings(max_examples=50)
    @given(words_st)
    def test_unit_norm(self, model, words):
        assert abs(np.linalg.norm(embed(" ".join(words), model)) - 1) < 1e-6

    @settings(max_examples=50)
    @given(words_st, st.randoms(use_true_random=False))
    def test_word_order_invariant(self, model, words, rnd):
        shuffled = list(words)
        rnd.shuffle(shuffled)
        np.testing.assert_allclose(embed(" ".join(words), model), embed(" ".join(shuffled), model), atol=1e-12)

    def test_scaling_invariant(self, model):
        np.testing.assert_allclose(embed("pixel art", model), embed("pixel art", model.scaled(3.7)), atol=1e-6)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            EncoderModel(TokenizerConfig(bucket_count=256), np.zeros((255, 4)))
        with pytest.raises(ValueError):
            EncoderModel(TokenizerConfig(bucket_count=256), np.full((256, 4), np.nan))
        with pytest.raises(ValueError):
            EncoderModel(TokenizerConfig(bucket_count=256), np.zeros((256, 4)), temperature=0)


class TestLoss:
    def test_symmetric_scores_give_ln8(self):
        q = np.array([1.0, 0.0, 0.0])
        cands = [np.array([0.0, np.cos(a), np.sin(a)]) for a in np.linspace(0, 2, 8)]
        loss, *_ = info_nce_loss(q, cands[0], cands[1:], 0.05)
        assert abs(loss - math.log(8)) < 1e-9

    def test_identical_candidates_give_ln8(self):
        rng = np.random.default_rng(0)
        q, c = rng.normal(size=5), rng.normal(size=5)
        loss, *_ = info_nce_loss(q, c, [c * (i + 1) for i in range(7)], 0.05)
        assert abs(loss - math.log(8)) < 1e-9

    def test_saturation(self):
        q = np.array([1.0, 0.0])
        # s0 / tau - max(si) / tau = 2 / 0.05 = 40
        loss, *_ = info_nce_loss(q, q, [-q] * 7, 0.05)
        assert 0 <= loss < 1e-12

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_reference_and_is_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        vecs = rng.normal(size=(9, 5))
        loss, *_ = info_nce_loss(vecs[0], vecs[1], list(vecs[2:]), 0.05)
        assert loss >= 0
        assert loss == pytest.approx(reference_loss(vecs[0], vecs[1:], 0.05), rel=1e-9, abs=1e-12)

    def test_gradients_match_finite_differences(self):
        tau, h = 0.05, 1e-5
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            vecs = rng.normal(size=(9, 5))
            _, d_q, d_p, d_n = info_nce_loss(vecs[0], vecs[1], list(vecs[2:]), tau)
            analytic = np.vstack([d_q, d_p, d_n])
            numeric = np.zeros_like(vecs)
            for i in range(9):
                for j in range(5):
                    up, down = vecs.copy(), vecs.copy()
                    up[i, j] += h
                    down[i, j] -= h
                    numeric[i, j] = (reference_loss(up[0], up[1:], tau) - reference_loss(down[0], down[1:], tau)) / (2 * h)
            err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
            worst = max(worst, err)
        assert worst < 1e-4

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            info_nce_loss(np.zeros(3), np.ones(3), [np.ones(3)] * 7, 0.05)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            info_nce_loss(np.ones(3), np.ones(4), [np.ones(4)] * 7, 0.05)


class TestSchedule:
    def test_shape(self):
        cfg = TrainConfig(learning_rate=1.0, warmup_fraction=0.1)
        lrs = [lr_schedule(s, 100, cfg) for s in range(100)]
        assert lrs[:10] == pytest.approx([(i + 1) / 10 for i in range(10)])
        assert max(lrs) == pytest.approx(1.0)
        assert all(a >= b for a, b in zip(lrs[9:], lrs[10:]))
        assert lrs[-1] == pytest.approx(1 / 90)

    @pytest.mark.parametrize("kwargs", [{"epochs": 0}, {"warmup_fraction": 1.0}, {"batch_size": 0}, {"max_steps": -1}])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestTrain:
    def test_zero_steps_is_identity(self, bench, bench_data, untrained):
        out = train(bench_data[0][:10], bench[0], untrained, TrainConfig(max_steps=0))
        assert out.to_bytes() == untrained.to_bytes()

    def test_does_not_mutate_init(self, bench, bench_data):
        init = EncoderModel.init(1, TokenizerConfig(bucket_count=4096), dim=8)
        before = init.to_bytes()
        train(bench_data[0][:64], bench[0], init, TrainConfig(epochs=1))
        assert init.to_bytes() == before

    def test_byte_identical_reruns(self, bench, bench_data, tmp_path):
        init = EncoderModel.init(1, TokenizerConfig(bucket_count=4096), dim=8)
        cfg = TrainConfig(epochs=1, seed=5)
        a = train(bench_data[0][:300], bench[0], init, cfg)
        b = train(bench_data[0][:300], bench[0], init, cfg)
        a.save(tmp_path / "a.bin")
        b.save(tmp_path / "b.bin")
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert EncoderModel.load(tmp_path / "a.bin").to_bytes() == a.to_bytes()

    def test_loss_decreases(self, trained):
        losses = trained.meta["epoch_losses"]
        assert len(losses) == 3
        assert losses[-1] < losses[0]

    def test_meta(self, bench, trained):
        assert trained.meta["train_domain"] == bench[0].name
        assert trained.meta["train_steps"] == 3 * math.ceil(1200 / 64)

    def test_empty_dataset(self, bench, untrained):
        with pytest.raises(TrainingError):
            train([], bench[0], untrained, TrainConfig())

    def test_unknown_item(self, small_catalog, bench_data, untrained):
        with pytest.raises(TrainingError, match="unknown item"):
            train(bench_data[0][:1], small_catalog, untrained, TrainConfig())
