from dataclasses import replace

import numpy as np
import pytest

from acoustext import ssl
from acoustext.acoustic import AcousticTrainConfig
from acoustext.errors import DataError
from acoustext.manifest import Utterance
from acoustext.text import TextTrainConfig, train_text_lid

LANGS = ["en-US", "es-US"]


@pytest.fixture(scope="module")
def teacher(tiny_corpus):
    return train_text_lid(tiny_corpus, LANGS, TextTrainConfig(embed_dim=6, hidden_dim=6,
                                                              fc_dim=4, epochs=2))[0]


@pytest.fixture
def stub_posteriors(monkeypatch):
    def install(rows):
        monkeypatch.setattr(ssl, "teacher_posteriors", lambda t, utts: np.array(rows[:len(utts)]))
    return install


def unlabeled(n):
    return [Utterance(f"u{i}", None, 1000, {"en-US": [(1000, "ka")], "es-US": [(1000, "la")]})
            for i in range(n)]


def test_threshold_boundary_is_inclusive(teacher, stub_posteriors):
    stub_posteriors([[0.99, 0.01], [0.9899, 0.0101], [0.005, 0.995]])
    labels, accepted = ssl.teacher_label(teacher, unlabeled(3), threshold=0.99)
    assert [l.accepted for l in labels] == [True, False, True]
    assert [(u.id, u.language, u.subset) for u in accepted] == [
        ("u0", "en-US", "pseudo"), ("u2", "es-US", "pseudo")]
    assert accepted[1].teacher == {"posterior": [0.005, 0.995], "threshold": 0.99, "model": "text"}


def test_missing_hypotheses_are_skipped(teacher, caplog):
    utts = unlabeled(2)
    utts[0] = replace(utts[0], hypotheses={"en-US": [(1000, "ka")]})
    labels, _ = ssl.teacher_label(teacher, utts)
    assert [l.utterance_id for l in labels] == ["u1"]
    assert "skipping u0" in caplog.text
    assert ssl.teacher_label(teacher, utts[:1]) == ([], [])


def test_flip_labels():
    utts = [replace(u, language=l) for u, l in zip(unlabeled(2), LANGS)]
    assert [u.language for u in ssl.flip_labels(utts, LANGS)] == ["es-US", "en-US"]
    with pytest.raises(DataError):
        ssl.flip_labels(utts, ["a", "b", "c"])


def test_retrain_from_scratch_with_report(tiny_corpus):
    cfg = AcousticTrainConfig(hidden=(8,), chunk_epochs=1, full_epochs=1, dropout=0.0,
                              chunks_per_utterance=2)
    base, pseudo = tiny_corpus[:8], tiny_corpus[8:]
    student, rep = ssl.ssl_retrain(base, pseudo, LANGS, cfg, heldout=tiny_corpus)
    assert rep.n_base == 8 and rep.n_pseudo == len(pseudo)
    assert set(rep.before) == {"en-US", "es-US", "all"}
    again, _ = ssl.ssl_retrain(base, pseudo, LANGS, cfg)
    assert again.to_checkpoint().to_bytes() == student.to_checkpoint().to_bytes()
    with pytest.raises(DataError):
        ssl.ssl_retrain([], [], LANGS, cfg)
