"""Streaming arbitration: interval polling, readiness, threshold, early
termination of the losing decoders, end-of-audio fallback.

Time is virtual.  Ticks fall at ``i * T`` for every ``i * T`` strictly inside
the utterance, plus one end-of-audio tick at the utterance duration.  At a
tick the arbiter

1. feeds the acoustic stream every frame complete by then,
2. polls each selected decoder,
3. logs ``not_ready`` and moves on unless the signals the mode needs exist,
4. evaluates the posterior and, before end of audio, decides early when some
   selected language's posterior is strictly above its threshold.

If no early decision happens the language is the argmax (over selected
languages, ties to the first in model order) of the last evaluated posterior.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .acoustic import AcousticModel, AcousticStream
from .asr_sim import DecoderState, SimulatedDecoder
from .errors import ConfigError, DataError, LidError, UndecidableError
from .features import n_frames_for
from .fusion import EmbeddingSnapshot, FusionModel, fuse_posterior
from .text import TextLidModel, encode_text, text_posterior

MODES = ("acoustic", "text", "acoustext")
NEVER = math.inf


@dataclass
class ArbitrationConfig:
    interval_ms: int = 600
    threshold: float = 0.99
    mode: str = "acoustext"
    selected: Optional[List[str]] = None
    early_stop_enabled: bool = True
    thresholds: Dict[str, float] = field(default_factory=dict)
    rtf: Dict[str, float] = field(default_factory=dict)
    window_ms: float = 25.0
    hop_ms: float = 10.0
    workers: int = 1  # utterances evaluated in parallel processes

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.interval_ms <= 0:
            raise ConfigError("interval_ms must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for th in [self.threshold, *self.thresholds.values()]:
            if not th > 0:
                raise ConfigError(f"threshold must be > 0 (values above 1 mean never), got {th}")

    def threshold_for(self, language: str) -> float:
        return self.thresholds.get(language, self.threshold)


@dataclass
class LidModels:
    acoustic: Optional[AcousticModel] = None
    text: Optional[TextLidModel] = None
    fusion: Optional[FusionModel] = None

    @property
    def languages(self) -> List[str]:
        for m in (self.fusion, self.text, self.acoustic):
            if m is not None:
                return list(m.languages)
        raise ConfigError("no models supplied")

    def check(self, mode: str) -> None:
        need = {"acoustic": ("acoustic",), "text": ("text",),
                "acoustext": ("acoustic", "text", "fusion")}[mode]
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"mode {mode!r} needs models: {', '.join(missing)}")
        langs = [getattr(self, n).languages for n in need]
        if any(l != langs[0] for l in langs):
            raise ConfigError(f"models disagree on language order: {langs}")
        if mode == "acoustext":
            if (self.fusion.acoustic_dim != self.acoustic.embedding_dim
                    or self.fusion.text_dims != self.text.embedding_dims):
                raise ConfigError("fusion head dimensions do not match upstream encoders")


@dataclass
class ArbitrationEvent:
    time_ms: int
    kind: str
    data: dict = field(default_factory=dict)

    def to_json(self, utterance_id: str) -> dict:
        return {"utt": utterance_id, "t": int(self.time_ms), "kind": self.kind, **self.data}


@dataclass
class ArbitrationResult:
    utterance_id: str
    language: str
    decision_time_ms: int
    early: bool
    duration_ms: int
    posterior_trace: List[Tuple[int, List[float]]]
    saved_ms: Dict[str, int]
    events: List[ArbitrationEvent] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"utt": self.utterance_id, "language": self.language,
                "decision_time_ms": self.decision_time_ms, "early": self.early,
                "duration_ms": self.duration_ms, "saved_ms": self.saved_ms,
                "posterior_trace": [[t, p] for t, p in self.posterior_trace]}


def tick_times(duration_ms: int, interval_ms: int) -> List[int]:
    ticks = list(range(interval_ms, duration_ms, interval_ms))
    return ticks + [duration_ms]


def run_utterance(config: ArbitrationConfig, models: LidModels, frames: Optional[np.ndarray],
                  decoders: Mapping[str, SimulatedDecoder], duration_ms: int,
                  utterance_id: str = "") -> ArbitrationResult:
    models.check(config.mode)
    languages = models.languages
    selected = list(config.selected) if config.selected is not None else list(languages)
    for lang in selected:
        if lang not in languages:
            raise ConfigError(f"selected language {lang!r} not in model set {languages}")
    uses_audio = config.mode in ("acoustic", "acoustext")
    uses_text = config.mode in ("text", "acoustext")
    if uses_text:
        missing = [l for l in selected if l not in decoders]
        if missing:
            raise ConfigError(f"no decoder for selected languages {missing}")
    if uses_audio and frames is None:
        raise ConfigError(f"mode {config.mode!r} needs acoustic frames")
    sel_idx = [languages.index(l) for l in selected]

    events: List[ArbitrationEvent] = []
    trace: List[Tuple[int, List[float]]] = []
    stream = AcousticStream(models.acoustic) if uses_audio else None
    consumed = 0
    text_cache: Dict[Tuple[str, str], np.ndarray] = {}
    last_post: Optional[np.ndarray] = None
    decision = None

    def emb(lang, s):
        key = (lang, s)
        if key not in text_cache:
            text_cache[key] = encode_text(models.text.encoder(lang), s)
        return text_cache[key]

    ticks = tick_times(duration_ms, config.interval_ms)
    for i, t in enumerate(ticks, start=1):
        end_of_audio = t >= duration_ms
        events.append(ArbitrationEvent(t, "interval_tick", {"interval": i}))
        ready = True
        if uses_audio:
            n = n_frames_for(t, config.window_ms, config.hop_ms, len(frames))
            if n > consumed:
                stream.feed(frames[consumed:n])
                consumed = n
            ready = consumed > 0
        hyps = {}
        if uses_text:
            for lang in selected:
                h = decoders[lang].poll(t)
                hyps[lang] = None if h is None else h.text
            ready = ready and all(v is not None for v in hyps.values())
        if not ready:
            reason = [] if not uses_audio or consumed else ["audio"]
            reason += [l for l, v in hyps.items() if v is None]
            events.append(ArbitrationEvent(t, "not_ready", {"waiting_for": reason}))
            continue

        if config.mode == "acoustic":
            post = stream.posterior()
        elif config.mode == "text":
            post = text_posterior(models.text, hyps, selected)
        else:
            text_embs = [emb(l, hyps[l]) if l in selected
                         else np.zeros(d, np.float32)
                         for l, d in zip(languages, models.text.embedding_dims)]
            post = fuse_posterior(models.fusion, EmbeddingSnapshot(i, stream.embedding, text_embs, t))
        probs = [float(p) for p in post]
        trace.append((t, probs))
        events.append(ArbitrationEvent(t, "posterior_evaluated", {"probabilities": probs}))
        last_post = post

        if config.early_stop_enabled and not end_of_audio:
            over = [j for j in sel_idx if post[j] > config.threshold_for(languages[j])]
            if over:
                win = max(over, key=lambda j: (post[j], -j))
                decision = (languages[win], t, True)
                break

    if decision is None:
        if last_post is None:
            raise UndecidableError(f"{utterance_id or 'utterance'}: no interval was ever ready")
        win = max(sel_idx, key=lambda j: (last_post[j], -j))
        decision = (languages[win], duration_ms, False)

    lang, t_dec, early = decision
    if early:
        events.append(ArbitrationEvent(t_dec, "early_decision",
                                       {"language": lang, "duration_ms": duration_ms}))
        for other, d in decoders.items():
            if other != lang and d.state is DecoderState.RUNNING:
                d.terminate(t_dec)
                events.append(ArbitrationEvent(t_dec, "decoder_terminated",
                                               {"language": other, "saved_ms": d.saved_ms}))
    else:
        events.append(ArbitrationEvent(t_dec, "final_decision",
                                       {"language": lang, "duration_ms": duration_ms}))
    for d in decoders.values():
        d.finalize()
    return ArbitrationResult(utterance_id, lang, t_dec, early, duration_ms, trace,
                             {l: d.saved_ms for l, d in decoders.items()}, events)


def make_decoders(utt, languages: Sequence[str], rtf: Mapping[str, float] = None):
    rtf = rtf or {}
    return {l: SimulatedDecoder(l, utt.hypotheses[l], utt.duration_ms, rtf.get(l, 1.0))
            for l in languages if l in utt.hypotheses}


def _run_one(config: ArbitrationConfig, models: LidModels, u) -> ArbitrationResult:
    langs = config.selected if config.selected is not None else models.languages
    try:
        frames = u.load_frames() if config.mode != "text" else None
        return run_utterance(config, models, frames, make_decoders(u, langs, config.rtf),
                             u.duration_ms, u.id)
    except LidError as e:
        raise type(e)(f"utterance {u.id}: {e}") from e


def run_manifest(config: ArbitrationConfig, models: LidModels, utts) -> List[ArbitrationResult]:
    """Arbitrate every utterance; results in manifest order.

    Sessions share nothing, so ``config.workers > 1`` spreads them over
    processes without changing any result.
    """
    if not utts:
        raise DataError("empty manifest")
    if config.workers == 1 or len(utts) == 1:
        return [_run_one(config, models, u) for u in utts]
    chunk = max(1, len(utts) // (4 * config.workers))
    with ProcessPoolExecutor(config.workers, initializer=_init_worker,
                             initargs=(config, models)) as pool:
        return list(pool.map(_run_in_worker, utts, chunksize=chunk))


_WORKER: dict = {}


def _init_worker(config, models):
    _WORKER["args"] = (config, models)


def _run_in_worker(u):
    return _run_one(*_WORKER["args"], u)


# ----------------------------------------------------------- event logs

def write_event_log(results: Iterable[ArbitrationResult], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            for ev in r.events:
                fh.write(json.dumps(ev.to_json(r.utterance_id), sort_keys=True) + "\n")


def read_event_log(path) -> Dict[str, List[dict]]:
    by_utt: Dict[str, List[dict]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"event log line {lineno}: {e.msg}") from None
            by_utt.setdefault(rec["utt"], []).append(rec)
    return by_utt


def replay(events: Sequence[dict]) -> dict:
    """Recover decided language, decision time, early flag and savings from events."""
    decision = [e for e in events if e["kind"] in ("early_decision", "final_decision")]
    if len(decision) != 1:
        raise DataError(f"expected exactly one decision event, found {len(decision)}")
    d = decision[0]
    saved = {e["language"]: e["saved_ms"] for e in events if e["kind"] == "decoder_terminated"}
    return {"language": d["language"], "decision_time_ms": d["t"],
            "early": d["kind"] == "early_decision", "duration_ms": d["duration_ms"],
            "saved_ms": saved}
