import numpy as np
import pytest

from acoustext import nn
from acoustext.checkpoint import Checkpoint
from acoustext.errors import DataError, ShapeError
from acoustext.text import (
    UNK, TextLidModel, TextTrainConfig, build_vocabulary, encode_text, encode_texts,
    init_text_model, normalize_text, text_batch_loss, text_embeddings, text_posterior,
    text_posterior_batch, train_text_lid)

LANGS = ["en-US", "es-US"]


@pytest.fixture(scope="module")
def model():
    cfg = TextTrainConfig(embed_dim=6, hidden_dim=5, fc_dim=4, dropout=0.0)
    return init_text_model(LANGS, [list("abcdk "), list("aeiouáé ")], cfg, nn.make_rng(0))


def test_vocabulary_and_normalization():
    assert normalize_text("  Ka  MO\tsi ") == "ka mo si"
    assert build_vocabulary(["aab", "bc"], min_count=2) == ["a", "b"]
    assert build_vocabulary(["ña ñá"], min_count=1) == [" ", "a", "á", "ñ"]


def test_unknown_characters_map_to_unk(model):
    enc = model.encoder("en-US")
    ids = enc.ids("a?z")
    assert ids[1] == UNK and ids[2] == UNK and ids[0] >= 2


def test_empty_hypothesis_gives_zero_embedding(model):
    np.testing.assert_array_equal(encode_text(model.encoder("en-US"), ""), 0.0)


def test_batch_encoding_matches_single(model):
    enc = model.encoder("es-US")
    texts = ["", "aé", "ouáa e", "a"]
    batch = encode_texts(enc, texts)
    for t, row in zip(texts, batch):
        np.testing.assert_allclose(row, encode_text(enc, t), atol=1e-6)


def test_unselected_language_contributes_zeros(model):
    hyps = {"en-US": "abc", "es-US": "aei"}
    embs = text_embeddings(model, hyps, ["en-US"])
    assert not embs[1].any() and embs[0].any()
    p = text_posterior(model, hyps)
    assert p.shape == (2,) and abs(p.sum() - 1) < 1e-6
    np.testing.assert_allclose(text_posterior_batch(model, [hyps])[0], p, atol=1e-6)
    with pytest.raises(DataError):
        text_posterior(model, {"en-US": "a"}, ["es-US"])
    with pytest.raises(DataError):
        text_posterior(model, {"fr-CA": "a"})


def test_checkpoint_round_trip_keeps_vocabulary(model):
    data = model.to_checkpoint().to_bytes()
    back = TextLidModel.from_checkpoint(Checkpoint.from_bytes(data))
    assert back.encoders[1].vocab == model.encoders[1].vocab
    assert back.to_checkpoint().to_bytes() == data


def test_head_shape_checks(model):
    with pytest.raises(ShapeError):
        TextLidModel(LANGS[::-1], model.encoders, model.hidden, model.out)


def test_gradients_through_encoders_and_head(model):
    m64 = TextLidModel(LANGS, [type(e)(e.language, e.vocab, e.embedding.astype(np.float64),
                                       e.lstm.astype(np.float64)) for e in model.encoders],
                       model.hidden.astype(np.float64), model.out.astype(np.float64), 0.0)
    batches = [[m64.encoders[0].ids(s) for s in ("abc", "", "kd a")],
               [m64.encoders[1].ids(s) for s in ("aé", "ou", "")]]
    labels = np.array([0, 1, 0])

    def loss(ps):
        for k, v in ps.items():
            m64.params()[k][...] = v
        val, g, _ = text_batch_loss(m64, batches, labels)
        return val, g

    # a few recurrent entries have gradients near 1e-11, pure rounding noise,
    # hence the 1e-6 floor on the relative-error denominator
    rep = nn.grad_check(loss, m64.params(), eps=1e-4, floor=1e-6)
    assert rep.max_rel_error < 1e-5


def test_training_deterministic(tiny_corpus):
    cfg = TextTrainConfig(embed_dim=8, hidden_dim=8, fc_dim=8, epochs=2)
    m1, r1 = train_text_lid(tiny_corpus, LANGS, cfg)
    m2, _ = train_text_lid(tiny_corpus, LANGS, cfg)
    assert m1.to_checkpoint().to_bytes() == m2.to_checkpoint().to_bytes()
    assert len(r1.epoch_loss) == 2
    bad = [type(tiny_corpus[0])("x", "en-US", 1000, {"en-US": [(1000, "a")]})]
    with pytest.raises(DataError):
        train_text_lid(bad, LANGS, cfg)
