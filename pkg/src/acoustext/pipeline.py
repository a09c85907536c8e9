"""End-to-end desk experiment plumbing shared by the CLI, the demos and the
acceptance suite: corpus splits from a :class:`RunConfig`, training of the
three models, offline (final-state) evaluation and threshold sweeps.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .acoustic import acoustic_posterior_batch, train_acoustic
from .arbiter import ArbitrationConfig, LidModels, run_manifest
from .checkpoint import save_features
from .config import RunConfig
from .fusion import final_embeddings, fuse_posterior_batch, train_fusion
from .manifest import Utterance, write_manifest
from .metrics import EvalReport, evaluate, rerr
from .synth import CorpusSpec, make_language_pair, synth_corpus
from .text import text_posterior_batch, train_text_lid

log = logging.getLogger(__name__)


def language_pair(cfg: RunConfig):
    c = cfg.corpus
    return make_language_pair(cfg.languages, seed=c.pair_seed, separation=c.separation,
                              trace=c.trace, noise_std=c.noise_std,
                              transition_divergence=c.transition_divergence)


def build_split(cfg: RunConfig, name: str) -> List[Utterance]:
    spec = cfg.corpus.splits[name]
    utts = synth_corpus(language_pair(cfg), CorpusSpec(
        spec.n_per_language, tuple(spec.duration_ms), dict(spec.subsets),
        tuple(spec.accent_range), misrecognition_range=tuple(spec.misrecognition_range)),
        seed=spec.seed, prefix=name)
    if spec.unlabeled:
        utts = [replace(u, language=None) for u in utts]
    return utts


def write_split(utts: Sequence[Utterance], manifest_path, feat_dir) -> None:
    """Write per-utterance feature files and a manifest pointing at them."""
    manifest_path = Path(manifest_path)
    feat_dir = Path(feat_dir)
    feat_dir.mkdir(parents=True, exist_ok=True)
    out = []
    for u in utts:
        path = feat_dir / f"{u.id}.lidw"
        save_features(path, u.frames, {"id": u.id, "hop_ms": 10.0, "window_ms": 25.0})
        rel = path.relative_to(manifest_path.parent) if path.is_relative_to(manifest_path.parent) else path
        out.append(replace(u, features=str(rel)))
    write_manifest(out, manifest_path)


def train_all(cfg: RunConfig, corpora: Dict[str, List[Utterance]]):
    langs = cfg.languages
    am, a_rep = train_acoustic(corpora["train_acoustic"], langs, cfg.acoustic)
    tm, t_rep = train_text_lid(corpora["train_text"], langs, cfg.text)
    fm, f_rep = train_fusion(corpora["train_fusion"], am, tm, cfg.fusion)
    return LidModels(am, tm, fm), {"acoustic": a_rep, "text": t_rep, "fusion": f_rep}


def offline_predictions(models: LidModels, utts) -> Dict[str, np.ndarray]:
    """Full-utterance posteriors of each single model (no streaming)."""
    langs = models.languages
    return {
        "acoustic": acoustic_posterior_batch(models.acoustic, [u.load_frames() for u in utts]),
        "text": text_posterior_batch(models.text, [{l: u.final_hypothesis(l) for l in langs}
                                                   for u in utts]),
        "acoustext": fuse_posterior_batch(models.fusion,
                                          final_embeddings(utts, models.acoustic, models.text)),
    }


def error_table(models: LidModels, utts, subset: Optional[str] = None) -> Dict[str, Dict[str, float]]:
    """Per-model, per-language error rates on ``utts`` (optionally one subset)."""
    if subset is not None:
        utts = [u for u in utts if u.subset == subset]
    return errors_from_predictions(offline_predictions(models, utts), utts, models.languages)


def errors_from_predictions(preds: Dict[str, np.ndarray], utts, languages,
                            subset: Optional[str] = None) -> Dict[str, Dict[str, float]]:
    """Error rates from precomputed posteriors (rows aligned with ``utts``)."""
    keep = np.array([subset is None or u.subset == subset for u in utts])
    gold = np.array([u.language for u in utts])[keep]
    out = {}
    for name, post in preds.items():
        pred = np.array(languages)[post[keep].argmax(axis=1)]
        out[name] = {l: float(np.mean(pred[gold == l] != l)) for l in languages if np.any(gold == l)}
        out[name]["all"] = float(np.mean(pred != gold))
    return out


def rerr_table(errors: Dict[str, Dict[str, float]], baseline: str = "acoustic"):
    base = errors[baseline]
    return {name: {l: (rerr(base[l], e[l]) if base[l] > 0 else None) for l in e}
            for name, e in errors.items()}


def simulate(cfg: ArbitrationConfig, models: LidModels, utts, baseline_error=None,
             baseline: Optional[str] = None):
    results = run_manifest(cfg, models, utts)
    gold = {u.id: u.language for u in utts}
    report = evaluate(results, gold, models.languages, mode=cfg.mode, threshold=cfg.threshold,
                      interval_ms=cfg.interval_ms, baseline_error=baseline_error, baseline=baseline)
    return results, report


def threshold_sweep(cfg: ArbitrationConfig, models: LidModels, utts,
                    thresholds: Sequence[float]) -> Dict[float, tuple]:
    return {th: simulate(replace(cfg, threshold=th), models, utts) for th in thresholds}
