"""File-backed run configuration and the ``desk`` / ``paper`` presets.

A config file is JSON.  Every section is optional; missing values come from
the preset, unknown keys are rejected::

    {
      "preset": "desk",
      "languages": ["en-US", "es-US"],
      "seed": 7,
      "features": {"window_ms": 25, "hop_ms": 10, "n_mels": 64},
      "corpus": {"pair_seed": 0, "separation": 0.2, "splits": {...}},
      "acoustic": {...}, "text": {...}, "fusion": {...},
      "arbitration": {"interval_ms": 600, "threshold": 0.99, "mode": "acoustext"},
      "ssl": {"threshold": 0.99, "teacher": "text"}
    }
"""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .acoustic import AcousticTrainConfig
from .arbiter import NEVER, ArbitrationConfig
from .errors import ConfigError
from .fusion import FusionTrainConfig
from .text import TextTrainConfig

PRESETS = ("desk", "paper")
LANGUAGE_PAIRS = {
    "en-US/es-US": ["en-US", "es-US"],
    "en-CA/fr-CA": ["en-CA", "fr-CA"],
    "en-IN/hi-IN": ["en-IN", "hi-IN"],
}
# Pairs where code-switching is routine; early stopping stays off for them.
CODE_SWITCH_PAIRS = {("en-IN", "hi-IN")}

MIXED = {"clean": 2.0, "accent": 1.5, "confusable": 0.5}


@dataclass
class SplitSpec:
    n_per_language: int
    subsets: Dict[str, float] = field(default_factory=lambda: {"clean": 1.0})
    seed: int = 0
    duration_ms: Tuple[int, int] = (4000, 8000)
    accent_range: Tuple[float, float] = (0.3, 1.0)
    misrecognition_range: Tuple[float, float] = (0.1, 0.3)
    unlabeled: bool = False


def _default_splits() -> Dict[str, SplitSpec]:
    return {
        "train_acoustic": SplitSpec(400, seed=101),
        "train_text": SplitSpec(600, seed=102),
        "train_fusion": SplitSpec(600, dict(MIXED), seed=103),
        "test": SplitSpec(1000, dict(MIXED), seed=104),
        "ssl_unlabeled": SplitSpec(400, {"accent": 1.0}, seed=105, unlabeled=True),
        "ssl_heldout": SplitSpec(300, {"accent": 1.0}, seed=106),
    }


@dataclass
class CorpusConfig:
    pair_seed: int = 0
    separation: float = 0.2
    trace: float = 0.3
    noise_std: float = 1.0
    transition_divergence: float = 0.0
    splits: Dict[str, SplitSpec] = field(default_factory=_default_splits)


@dataclass
class FeatureConfig:
    window_ms: float = 25.0
    hop_ms: float = 10.0
    n_mels: int = 64
    literal_overlap: bool = False

    def __post_init__(self):
        # "10 ms overlap" read literally: hop = window - 10 ms
        if self.literal_overlap:
            self.hop_ms = self.window_ms - 10.0


@dataclass
class SslConfig:
    threshold: float = 0.99
    teacher: str = "text"

    def __post_init__(self):
        if self.teacher not in ("text", "acoustext"):
            raise ConfigError(f"ssl teacher must be 'text' or 'acoustext', got {self.teacher!r}")


@dataclass
class RunConfig:
    preset: str = "desk"
    languages: List[str] = field(default_factory=lambda: ["en-US", "es-US"])
    seed: int = 7
    features: FeatureConfig = field(default_factory=FeatureConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    acoustic: AcousticTrainConfig = field(default_factory=AcousticTrainConfig)
    text: TextTrainConfig = field(default_factory=TextTrainConfig)
    fusion: FusionTrainConfig = field(default_factory=FusionTrainConfig)
    arbitration: ArbitrationConfig = field(default_factory=ArbitrationConfig)
    thresholds_sweep: List[float] = field(default_factory=lambda: [0.99, 0.95])
    ssl: SslConfig = field(default_factory=SslConfig)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["arbitration"]["threshold"] = _theta_out(d["arbitration"]["threshold"])
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _theta_out(x):
    return "never" if x == NEVER else x


def parse_threshold(x) -> float:
    if isinstance(x, str):
        if x.lower() == "never":
            return NEVER
        x = float(x)
    return float(x)


PRESET_VALUES: Dict[str, Dict[str, Any]] = {
    "desk": {
        "acoustic": {"hidden": [64, 64], "lr": 0.02, "dropout": 0.2, "chunk_epochs": 6,
                     "full_epochs": 3, "chunks_per_utterance": 8, "batch_size": 32,
                     "backprop_every_n": 10, "clip_norm": 5.0},
        "text": {"embed_dim": 32, "hidden_dim": 48, "fc_dim": 32, "dropout": 0.5,
                 "lr": 0.02, "epochs": 12, "clip_norm": 5.0},
        "fusion": {"hidden": [64, 32], "dropout": 0.5, "lr": 0.02, "epochs": 30,
                   "clip_norm": 5.0},
        "arbitration": {"interval_ms": 600, "threshold": 0.99},
        "thresholds_sweep": [0.99, 0.95],
    },
    "paper": {
        "acoustic": {"hidden": [768, 768, 768], "dropout": 0.5, "backprop_every_n": 10,
                     "chunk_len": 36},
        "text": {"embed_dim": 128, "hidden_dim": 256, "fc_dim": 32, "dropout": 0.5},
        "fusion": {"hidden": [64, 32], "dropout": 0.5},
        "arbitration": {"interval_ms": 600, "threshold": 0.99},
        "thresholds_sweep": [0.99, 0.95],
    },
}


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "splits":
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    unknown = sorted(set(raw) - {f.name for f in dataclasses.fields(RunConfig)})
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}")
    preset = raw.get("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    merged = _merge(PRESET_VALUES[preset], raw)
    langs = merged.get("languages", ["en-US", "es-US"])
    arb = dict(merged.get("arbitration", {}))
    if "threshold" in arb:
        arb["threshold"] = parse_threshold(arb["threshold"])
    if "early_stop_enabled" not in arb and tuple(langs) in CODE_SWITCH_PAIRS:
        arb["early_stop_enabled"] = False
    features = _build(FeatureConfig, merged.get("features", {}), "features")
    arb.setdefault("window_ms", features.window_ms)
    arb.setdefault("hop_ms", features.hop_ms)
    seed = int(merged.get("seed", 7))
    sections = {k: dict(merged.get(k, {})) for k in ("acoustic", "text", "fusion")}
    for sec in sections.values():
        sec.setdefault("seed", seed)
    fus = sections["fusion"]
    fus.setdefault("window_ms", features.window_ms)
    fus.setdefault("hop_ms", features.hop_ms)
    corpus = dict(merged.get("corpus", {}))
    if "splits" in corpus:
        # named splits override fields of the default split of that name
        given = corpus["splits"]
        if not isinstance(given, dict):
            raise ConfigError("corpus.splits: expected an object")
        defaults = {k: dataclasses.asdict(v) for k, v in _default_splits().items()}
        corpus["splits"] = {k: _build(SplitSpec, {**defaults.get(k, {}), **v}
                                      if isinstance(v, dict) else v, f"corpus.splits.{k}")
                            for k, v in {**defaults, **given}.items()}
    return RunConfig(
        preset=preset, languages=list(langs), seed=seed,
        features=features,
        corpus=_build(CorpusConfig, corpus, "corpus"),
        acoustic=_build(AcousticTrainConfig, sections["acoustic"], "acoustic"),
        text=_build(TextTrainConfig, sections["text"], "text"),
        fusion=_build(FusionTrainConfig, fus, "fusion"),
        arbitration=_build(ArbitrationConfig, arb, "arbitration"),
        thresholds_sweep=[parse_threshold(x) for x in merged.get("thresholds_sweep", [0.99, 0.95])],
        ssl=_build(SslConfig, merged.get("ssl", {}), "ssl"),
    )


def load_config(path: Optional[str] = None, preset: Optional[str] = None) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    if preset is not None:
        raw["preset"] = preset
    return config_from_dict(raw)
