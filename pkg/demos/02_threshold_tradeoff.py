"""Decoding time saved against accuracy as the threshold moves.

A lower threshold stops the losing recognizer sooner and on more
utterances, at some cost in accuracy.  "never" is the full-decode reference.

    python demos/02_threshold_tradeoff.py
"""

import logging
from dataclasses import replace

from acoustext.arbiter import NEVER
from acoustext.metrics import mean_early_margin_ms
from acoustext.pipeline import build_split, simulate

from _desk import desk_config, desk_models

logging.basicConfig(level=logging.WARNING)

cfg = desk_config()
models = desk_models(cfg)
test = build_split(cfg, "test")

print(f"{'theta':>6} {'%utt early':>10} {'%saved':>7} {'accuracy':>8} {'margin ms':>9}")
for theta in (0.8, 0.9, 0.95, 0.99, NEVER):
    results, rep = simulate(replace(cfg.arbitration, threshold=theta), models, test)
    margin = mean_early_margin_ms(results) if rep.n_early else 0.0
    label = "never" if theta == NEVER else f"{theta:.2f}"
    print(f"{label:>6} {rep.percent_utt_early:>10.1f} {rep.percent_saved:>7.1f} "
          f"{rep.accuracy:>8.3f} {margin:>9.0f}")
