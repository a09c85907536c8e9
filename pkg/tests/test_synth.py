import numpy as np
import pytest

from acoustext.nn import make_rng
from acoustext.synth import CorpusSpec, make_language_pair, synth_corpus, synth_utterance


@pytest.fixture(scope="module")
def pair():
    return make_language_pair(("en-US", "es-US"), seed=3)


def test_pair_geometry(pair):
    a, b = pair
    np.testing.assert_allclose(a.language_offset, -b.language_offset)
    assert np.linalg.norm(a.language_offset) == pytest.approx(0.2)
    assert abs(a.language_offset @ a.accent_trace) < 1e-9
    # phone means carry no component along the language or accent directions
    np.testing.assert_allclose(a.phone_means @ a.language_offset, 0.0, atol=1e-9)
    np.testing.assert_allclose(a.phone_means @ a.accent_trace, 0.0, atol=1e-9)
    np.testing.assert_allclose(a.transitions.sum(axis=1), 1.0)
    assert set("".join(a.lexicon).replace(" ", "")) <= set(a.alphabet)


def test_hindi_uses_devanagari():
    _, hi = make_language_pair(("en-IN", "hi-IN"))
    assert all("ऀ" <= ch <= "ॿ" for ch in hi.alphabet)


def test_utterance_shapes_and_timelines(pair):
    a, b = pair
    feats, gold, tls = synth_utterance(a, 4000, make_rng(0), other=b)
    assert gold == "en-US"
    assert feats.frames.shape == (398, 64)
    for tl in tls.values():
        times = [t for t, _ in tl]
        assert times[-1] == 4000
        assert all(x < y for x, y in zip(times, times[1:]))
    final_gold = tls["en-US"][-1][1].split()
    assert all(w in a.lexicon for w in final_gold)
    assert not any(w in b.lexicon for w in tls["es-US"][-1][1].split())


def test_confusable_and_identical(pair):
    a, b = pair
    _, _, tls = synth_utterance(a, 5000, make_rng(1), other=b, confusability=1.0)
    assert all(w in b.lexicon for w in tls["es-US"][-1][1].split())
    _, _, tls = synth_utterance(a, 5000, make_rng(1), other=b, identical_hypotheses=True)
    assert tls["en-US"] == tls["es-US"]


def test_misrecognition_garbles_gold_words(pair):
    a, b = pair
    _, _, clean = synth_utterance(a, 8000, make_rng(4), other=b)
    _, _, noisy = synth_utterance(a, 8000, make_rng(4), other=b, misrecognition=1.0)
    assert all(w in a.lexicon for w in clean["en-US"][-1][1].split())
    words = noisy["en-US"][-1][1].split()
    # short random strings can collide with real words; most must not
    assert words and sum(w in a.lexicon for w in words) < len(words) / 2
    assert all(set(w) <= set(a.alphabet) for w in words)


def test_accent_moves_frames_toward_other_language(pair):
    from dataclasses import replace
    a, b = pair
    u = a.language_offset / np.linalg.norm(a.language_offset)
    clean, _, _ = synth_utterance(a, 8000, make_rng(2), other=b)
    acc, _, _ = synth_utterance(replace(a, accent_shift=1.0), 8000, make_rng(2), other=b)
    assert clean.frames @ u @ np.ones(len(clean)) > 0
    assert acc.frames.mean(axis=0) @ u < 0


def test_corpus_is_deterministic_and_balanced(pair):
    spec = CorpusSpec(10, subsets={"clean": 2, "accent": 1, "confusable": 1})
    c1 = synth_corpus(pair, spec, seed=5, prefix="t")
    c2 = synth_corpus(pair, spec, seed=5, prefix="t")
    assert [u.id for u in c1] == [u.id for u in c2]
    assert all(np.array_equal(x.frames, y.frames) and x.hypotheses == y.hypotheses
               for x, y in zip(c1, c2))
    assert sum(u.language == "en-US" for u in c1) == 10
    subsets = [u.subset for u in c1 if u.language == "es-US"]
    assert subsets.count("clean") == 6 and subsets.count("accent") == 2
    c3 = synth_corpus(pair, spec, seed=6, prefix="t")
    assert not np.array_equal(c1[0].frames, c3[0].frames)


def test_unknown_subset(pair):
    with pytest.raises(ValueError):
        synth_corpus(pair, CorpusSpec(2, subsets={"bogus": 1}), seed=0)
