"""Pseudo-label accent-shifted audio with the text model, retrain acoustics.

The acoustic model is trained on clean speech and struggles with accented
audio.  The text model is indifferent to accent, so its confident labels on
unlabeled accented utterances make useful training targets.  Flipping those
labels is the negative control: the student should then get worse.

    python demos/03_pseudo_labeling.py   (two acoustic retrains, ~10 min)
"""

import logging

from acoustext.pipeline import build_split
from acoustext.ssl import flip_labels, ssl_retrain, teacher_label

from _desk import desk_config, desk_models

logging.basicConfig(level=logging.WARNING)

cfg = desk_config()
langs = cfg.languages
models = desk_models(cfg)
base = build_split(cfg, "train_acoustic")
unlabeled = build_split(cfg, "ssl_unlabeled")[::2]
heldout = build_split(cfg, "ssl_heldout")[::3]

# the cached desk acoustic model was trained on exactly `base`
teacher, baseline = models.text, models.acoustic

labels, accepted = teacher_label(teacher, unlabeled, threshold=cfg.ssl.threshold)
print(f"teacher accepted {len(accepted)} of {len(labels)} unlabeled utterances")

for name, pseudo in (("pseudo-labels", accepted), ("flipped labels", flip_labels(accepted, langs))):
    _, rep = ssl_retrain(base, pseudo, langs, cfg.acoustic, heldout, baseline)
    print(f"{name:>15}: held-out error {rep.before['all']:.3f} -> {rep.after['all']:.3f}"
          f"  (RERR {rep.rerr['all']:+.1f}%)")
