"""Line-delimited JSON manifest binding utterances to features, labels and
per-language hypothesis timelines.

One object per line, keys sorted::

    {"duration_ms": 5230, "features": "feats/utt-000001.lidw",
     "hypotheses": {"en-US": [[740, "ka"], [5230, "ka simo"]], "es-US": [...]},
     "id": "utt-000001", "language": "en-US", "subset": "clean"}

``language`` may be null for unlabeled pools.  Accepted pseudo-labeled
records carry an extra ``teacher`` object; records built from recordings
carry an ``audio`` path to a 16-bit mono WAV.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .checkpoint import load_features
from .errors import DataError

Timeline = List[Tuple[int, str]]


@dataclass
class Utterance:
    id: str
    language: Optional[str]
    duration_ms: int
    hypotheses: Dict[str, Timeline]
    features: Optional[str] = None
    subset: str = "clean"
    teacher: Optional[dict] = None
    audio: Optional[str] = None
    frames: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def final_hypothesis(self, language: str) -> str:
        tl = self.hypotheses.get(language)
        if tl is None:
            raise DataError(f"{self.id}: no hypothesis timeline for {language}")
        return tl[-1][1] if tl else ""

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "language": self.language,
            "duration_ms": int(self.duration_ms),
            "subset": self.subset,
            "hypotheses": {k: [[int(t), s] for t, s in v] for k, v in self.hypotheses.items()},
        }
        if self.features is not None:
            out["features"] = self.features
        if self.teacher is not None:
            out["teacher"] = self.teacher
        if self.audio is not None:
            out["audio"] = self.audio
        return out

    def load_frames(self, root: Union[str, Path, None] = None) -> np.ndarray:
        if self.frames is None:
            if self.features is None:
                raise DataError(f"{self.id}: no features attached")
            path = Path(self.features)
            if root is not None and not path.is_absolute():
                path = Path(root) / path
            self.frames = load_features(path)
        return self.frames


def _dumps(rec: Utterance) -> str:
    return json.dumps(rec.to_json(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_manifest(records: Iterable[Utterance], path) -> None:
    text = "".join(_dumps(r) + "\n" for r in records)
    if isinstance(path, io.TextIOBase):
        path.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _parse(obj, lineno: int, languages: Optional[Sequence[str]]) -> Utterance:
    def bad(msg):
        return DataError(f"manifest line {lineno}: {msg}")

    if not isinstance(obj, dict):
        raise bad("record is not an object")
    for key in ("id", "duration_ms", "hypotheses"):
        if key not in obj:
            raise bad(f"missing {key!r}")
    lang = obj.get("language")
    if lang is not None and languages is not None and lang not in languages:
        raise bad(f"language {lang!r} not in {list(languages)}")
    hyps = {}
    for name, tl in obj["hypotheses"].items():
        prev = None
        entries = []
        for entry in tl:
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[1], str)):
                raise bad(f"malformed timeline entry {entry!r} for {name}")
            t = int(entry[0])
            if prev is not None and t < prev:
                raise bad(f"timeline for {name} goes backwards ({prev} -> {t})")
            prev = t
            entries.append((t, entry[1]))
        hyps[name] = entries
    return Utterance(
        id=str(obj["id"]), language=lang, duration_ms=int(obj["duration_ms"]),
        hypotheses=hyps, features=obj.get("features"), subset=obj.get("subset", "clean"),
        teacher=obj.get("teacher"), audio=obj.get("audio"))


def read_manifest(path, languages: Optional[Sequence[str]] = None) -> List[Utterance]:
    if isinstance(path, io.TextIOBase):
        lines = path.read().splitlines()
    else:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"manifest line {lineno}: invalid JSON ({e.msg})") from None
        out.append(_parse(obj, lineno, languages))
    return out
