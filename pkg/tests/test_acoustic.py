import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustext import nn
from acoustext.acoustic import (
    AcousticModel, AcousticStream, AcousticTrainConfig, acoustic_embed_batch,
    acoustic_embed_stream, acoustic_posterior, acoustic_posterior_batch, batch_loss_and_grads,
    supervised_steps, train_acoustic)
from acoustext.checkpoint import Checkpoint
from acoustext.errors import ConfigError, DataError, ShapeError


def test_supervised_steps():
    assert supervised_steps(25, 10).tolist() == [9, 19, 24]
    assert supervised_steps(20, 10).tolist() == [9, 19]
    assert supervised_steps(3, 10).tolist() == [2]
    assert supervised_steps(0, 10).tolist() == []


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.lists(st.integers(1, 30), min_size=1, max_size=4))
def test_streaming_matches_batch(small_acoustic, seed, cuts):
    frames = nn.make_rng(seed).normal(size=(sum(cuts), 64)).astype(np.float32)
    stream = None
    pos = 0
    for c in cuts:
        stream, emb = acoustic_embed_stream(small_acoustic, frames[pos:pos + c], stream)
        pos += c
    batch = acoustic_embed_batch(small_acoustic, [frames])[0]
    np.testing.assert_allclose(emb, batch, atol=1e-5)
    assert stream.frames_consumed == len(frames)


def test_batch_padding_does_not_leak(small_acoustic):
    rng = nn.make_rng(0)
    seqs = [rng.normal(size=(n, 64)).astype(np.float32) for n in (5, 17, 9)]
    together = acoustic_embed_batch(small_acoustic, seqs)
    for s, row in zip(seqs, together):
        np.testing.assert_allclose(row, acoustic_embed_batch(small_acoustic, [s])[0], atol=1e-6)
    post = acoustic_posterior_batch(small_acoustic, seqs)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_allclose(post[1], acoustic_posterior(small_acoustic, seqs[1]), atol=1e-6)


def test_empty_feed_and_bad_shapes(small_acoustic):
    s = AcousticStream(small_acoustic)
    np.testing.assert_array_equal(s.feed(np.zeros((0, 64))), 0.0)
    with pytest.raises(ShapeError):
        s.feed(np.zeros((3, 40)))
    with pytest.raises(DataError):
        acoustic_posterior(small_acoustic, np.zeros((0, 64)))


def test_checkpoint_round_trip(small_acoustic):
    data = small_acoustic.to_checkpoint().to_bytes()
    back = AcousticModel.from_checkpoint(Checkpoint.from_bytes(data))
    assert back.to_checkpoint().to_bytes() == data
    with pytest.raises(DataError):
        AcousticModel.from_checkpoint(Checkpoint("text"))


def test_every_n_loss_gradients(small_acoustic):
    rng = nn.make_rng(4)
    x = rng.normal(size=(23, 3, 64))
    mask = np.ones((23, 3), bool)
    mask[15:, 1] = False
    labels = np.array([0, 1, 1])
    model = AcousticModel(small_acoustic.languages,
                          [p.astype(np.float64) for p in small_acoustic.layers],
                          small_acoustic.head.astype(np.float64))

    def loss(ps):
        for k, v in ps.items():
            model.params()[k][...] = v
        val, g, _, _ = batch_loss_and_grads(model, x, mask, labels, every_n=10)
        return val, g

    rep = nn.grad_check(loss, model.params(), eps=1e-5, max_per_param=12, rng=nn.make_rng(0))
    assert rep.max_rel_error < 1e-5


def test_training_learns_and_is_deterministic(tiny_corpus):
    cfg = AcousticTrainConfig(hidden=(16,), chunk_epochs=3, full_epochs=1, lr=0.05, dropout=0.0,
                              chunks_per_utterance=4)
    m1, rep = train_acoustic(tiny_corpus, ["en-US", "es-US"], cfg)
    m2, _ = train_acoustic(tiny_corpus, ["en-US", "es-US"], cfg)
    assert m1.to_checkpoint().to_bytes() == m2.to_checkpoint().to_bytes()
    assert rep.epoch_stage == ["chunk"] * 3 + ["full"]
    assert all(np.isfinite(rep.epoch_loss))


def test_training_input_errors(tiny_corpus):
    with pytest.raises(DataError):
        train_acoustic([], ["en-US", "es-US"])
    with pytest.raises(DataError):
        train_acoustic(tiny_corpus, ["en-US", "fr-CA"])
    with pytest.raises(ConfigError):
        AcousticTrainConfig(backprop_every_n=0)
