"""Desk-size models shared by the demos.

The first demo run trains the three models on the default desk
configuration (a few minutes on one CPU) and caches their checkpoints in
``demos/.cache``; later runs load them.
"""

import logging
from pathlib import Path

from acoustext.acoustic import AcousticModel
from acoustext.arbiter import LidModels
from acoustext.checkpoint import Checkpoint
from acoustext.config import config_from_dict
from acoustext.fusion import FusionModel
from acoustext.pipeline import build_split, train_all
from acoustext.text import TextLidModel

CACHE = Path(__file__).resolve().parent / ".cache"
log = logging.getLogger("demos")


def desk_config(test_per_language=100):
    return config_from_dict({"corpus": {"splits": {
        "test": {"n_per_language": test_per_language, "seed": 104,
                 "subsets": {"clean": 2, "accent": 1.5, "confusable": 0.5}}}}})


def desk_models(cfg):
    paths = {k: CACHE / f"{k}.lidw" for k in ("acoustic", "text", "fusion")}
    if not all(p.exists() for p in paths.values()):
        print("training desk models (first run only) ...", flush=True)
        corpora = {k: build_split(cfg, k) for k in ("train_acoustic", "train_text", "train_fusion")}
        models, _ = train_all(cfg, corpora)
        CACHE.mkdir(exist_ok=True)
        for k, p in paths.items():
            getattr(models, k).to_checkpoint().save(p)
        return models
    acoustic = AcousticModel.from_checkpoint(Checkpoint.load(paths["acoustic"]))
    text = TextLidModel.from_checkpoint(Checkpoint.load(paths["text"]))
    fusion = FusionModel.from_checkpoint(Checkpoint.load(paths["fusion"]))
    return LidModels(acoustic, text, fusion)
