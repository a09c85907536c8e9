"""Evaluation quantities: per-language error rate, relative error-rate
reduction, share of decoding time saved and share of utterances decided early.

Durations and decision times are integer milliseconds; sums stay integral and
only the final ratio is taken in float64.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from .errors import UndefinedMetricError

ALL_AUDIO = "all_audio"
EARLY_AUDIO = "early_audio"


def error_rate(results, gold: Mapping[str, str], language: str) -> float:
    """Fraction of utterances whose gold label is ``language`` decided wrongly."""
    total = wrong = 0
    for r in results:
        if r.utterance_id not in gold:
            raise UndefinedMetricError(f"no gold label for {r.utterance_id}")
        if gold[r.utterance_id] == language:
            total += 1
            wrong += r.language != language
    if total == 0:
        raise UndefinedMetricError(f"no utterances with gold language {language!r}")
    return wrong / total


def rerr(baseline_err: float, candidate_err: float) -> float:
    """Relative error-rate reduction in percent; negative means degradation."""
    if baseline_err <= 0:
        raise UndefinedMetricError("RERR is undefined for a zero baseline error rate")
    return (baseline_err - candidate_err) / baseline_err * 100.0


def percent_saved(results, durations: Optional[Mapping[str, int]] = None,
                  denominator_mode: str = ALL_AUDIO) -> float:
    """Audio the losing decoder skipped thanks to early decisions, in percent.

    Numerator: sum of ``duration - decision_time`` over early decisions.
    Denominator: all audio (``all_audio``) or only the audio of early-decided
    utterances (``early_audio``).
    """
    num = den_all = den_early = 0
    for r in results:
        dur = int(durations[r.utterance_id]) if durations is not None else int(r.duration_ms)
        den_all += dur
        if r.early:
            num += dur - int(r.decision_time_ms)
            den_early += dur
    if denominator_mode == ALL_AUDIO:
        if den_all == 0:
            raise UndefinedMetricError("no audio")
        return 100.0 * num / den_all
    if denominator_mode == EARLY_AUDIO:
        if den_early == 0:
            raise UndefinedMetricError("no early decisions; early_audio denominator is empty")
        return 100.0 * num / den_early
    raise ValueError(f"unknown denominator mode {denominator_mode!r}")


def percent_utt_early(results) -> float:
    results = list(results)
    if not results:
        raise UndefinedMetricError("no results")
    return 100.0 * sum(1 for r in results if r.early) / len(results)


def mean_early_margin_ms(results) -> float:
    """Mean of ``duration - decision_time`` over early-decided utterances."""
    margins = [r.duration_ms - r.decision_time_ms for r in results if r.early]
    if not margins:
        raise UndefinedMetricError("no early decisions")
    return sum(margins) / len(margins)


@dataclass
class EvalReport:
    mode: str
    threshold: float
    interval_ms: int
    languages: List[str]
    error_rate: Dict[str, Optional[float]]
    rerr: Dict[str, Optional[float]] = field(default_factory=dict)
    baseline: Optional[str] = None
    percent_saved: float = 0.0
    percent_saved_early_audio: Optional[float] = None
    percent_utt_early: float = 0.0
    n_utterances: int = 0
    n_early: int = 0
    accuracy: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        if d["threshold"] == float("inf"):
            d["threshold"] = "never"
        return d

    def to_jsonl(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True) + "\n"

    def to_text(self) -> str:
        langs = self.languages
        w = max(10, *(len(l) for l in langs))
        lines = [f"mode={self.mode} theta={self.to_json()['threshold']} T={self.interval_ms}ms "
                 f"utterances={self.n_utterances} early={self.n_early}"]
        lines.append("".ljust(12) + "".join(l.rjust(w) for l in langs))
        lines.append("error rate".ljust(12) + "".join(
            ("n/a" if self.error_rate[l] is None else f"{self.error_rate[l]:.4f}").rjust(w) for l in langs))
        if self.rerr:
            lines.append("%RERR".ljust(12) + "".join(
                ("n/a" if self.rerr.get(l) is None else f"{self.rerr[l]:.1f}").rjust(w) for l in langs))
        lines.append(f"%saved={self.percent_saved:.1f} (early-audio denominator: "
                     f"{'n/a' if self.percent_saved_early_audio is None else f'{self.percent_saved_early_audio:.1f}'}) "
                     f"%utt={self.percent_utt_early:.1f} accuracy={self.accuracy:.4f}")
        return "\n".join(lines) + "\n"


def evaluate(results, gold: Mapping[str, str], languages: Sequence[str], *, mode: str = "",
             threshold: float = float("nan"), interval_ms: int = 0,
             baseline_error: Optional[Mapping[str, float]] = None,
             baseline: Optional[str] = None) -> EvalReport:
    results = list(results)
    err = {}
    for l in languages:
        try:
            err[l] = error_rate(results, gold, l)
        except UndefinedMetricError:
            err[l] = None
    rr = {}
    if baseline_error is not None:
        for l in languages:
            try:
                rr[l] = None if err[l] is None else rerr(baseline_error[l], err[l])
            except (UndefinedMetricError, KeyError):
                rr[l] = None
    try:
        early_pct = percent_saved(results, None, EARLY_AUDIO)
    except UndefinedMetricError:
        early_pct = None
    n_early = sum(1 for r in results if r.early)
    correct = sum(1 for r in results if r.language == gold[r.utterance_id])
    return EvalReport(mode, threshold, interval_ms, list(languages), err, rr, baseline,
                      percent_saved(results, None, ALL_AUDIO), early_pct,
                      percent_utt_early(results), len(results), n_early, correct / len(results))
