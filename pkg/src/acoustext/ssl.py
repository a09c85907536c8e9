"""Teacher-student pseudo-labeling for the acoustic-only model.

The teacher (text LID by default, the fused model optionally) scores each
unlabeled utterance on its final hypotheses.  Records whose top posterior is
at least the threshold keep the teacher's argmax as label; the student is
retrained from scratch on base data plus the accepted records.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .acoustic import AcousticModel, AcousticTrainConfig, acoustic_posterior_batch, train_acoustic
from .arbiter import LidModels
from .errors import DataError
from .fusion import final_embeddings, fuse_posterior_batch
from .metrics import rerr
from .text import TextLidModel, text_posterior_batch

log = logging.getLogger(__name__)


@dataclass
class PseudoLabel:
    utterance_id: str
    posterior: List[float]
    label: str
    accepted: bool
    threshold: float


def teacher_posteriors(teacher: Union[TextLidModel, LidModels], utts) -> np.ndarray:
    if isinstance(teacher, TextLidModel):
        langs = teacher.languages
        return text_posterior_batch(teacher, [{l: u.final_hypothesis(l) for l in langs} for u in utts])
    teacher.check("acoustext")
    return fuse_posterior_batch(teacher.fusion, final_embeddings(utts, teacher.acoustic, teacher.text))


def teacher_label(teacher: Union[TextLidModel, LidModels], utts, threshold: float = 0.99
                  ) -> Tuple[List[PseudoLabel], list]:
    """Score ``utts`` and return (all pseudo-labels, accepted records).

    Acceptance is ``max posterior >= threshold``.  Records lacking a
    hypothesis for some language are skipped with a logged reason.
    """
    langs = teacher.languages
    usable = []
    for u in utts:
        missing = [l for l in langs if not u.hypotheses.get(l)]
        if missing:
            log.warning("skipping %s: no hypotheses for %s", u.id, ", ".join(missing))
            continue
        usable.append(u)
    if not usable:
        return [], []
    post = teacher_posteriors(teacher, usable)
    kind = "text" if isinstance(teacher, TextLidModel) else "acoustext"
    labels, accepted = [], []
    for u, p in zip(usable, post):
        j = int(np.argmax(p))
        ok = bool(p[j] >= threshold)
        pl = PseudoLabel(u.id, [float(x) for x in p], langs[j], ok, threshold)
        labels.append(pl)
        if ok:
            accepted.append(replace(u, language=langs[j], subset="pseudo", teacher={
                "posterior": pl.posterior, "threshold": threshold, "model": kind}))
    return labels, accepted


def flip_labels(utts, languages: Sequence[str]) -> list:
    """Negative control: swap every label of a bilingual set."""
    if len(languages) != 2:
        raise DataError("label flipping is defined for language pairs")
    other = {languages[0]: languages[1], languages[1]: languages[0]}
    return [replace(u, language=other[u.language]) for u in utts]


def error_by_language(model: AcousticModel, utts) -> Dict[str, float]:
    post = acoustic_posterior_batch(model, [u.load_frames() for u in utts])
    pred = np.array(model.languages)[post.argmax(axis=1)]
    gold = np.array([u.language for u in utts])
    out = {}
    for l in model.languages:
        k = gold == l
        if k.any():
            out[l] = float(np.mean(pred[k] != l))
    out["all"] = float(np.mean(pred != gold))
    return out


@dataclass
class SslReport:
    n_base: int
    n_pseudo: int
    before: Dict[str, float]
    after: Dict[str, float]
    rerr: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def ssl_retrain(base, pseudo, languages: Sequence[str], config: AcousticTrainConfig,
                heldout=None, baseline: Optional[AcousticModel] = None
                ) -> Tuple[AcousticModel, Optional[SslReport]]:
    """Retrain the acoustic student from scratch on base + pseudo-labeled data.

    ``baseline`` is the student trained on ``base`` alone with the same config;
    it is trained here when not supplied and a held-out set is given.
    """
    union = list(base) + list(pseudo)
    if not union:
        raise DataError("SSL retraining needs at least one record")
    student, _ = train_acoustic(union, languages, config)
    if heldout is None:
        return student, None
    if baseline is None:
        baseline, _ = train_acoustic(list(base), languages, config)
    before = error_by_language(baseline, heldout)
    after = error_by_language(student, heldout)
    rr = {}
    for k in before:
        rr[k] = rerr(before[k], after[k]) if before[k] > 0 else None
    return student, SslReport(len(base), len(pseudo), before, after, rr)
