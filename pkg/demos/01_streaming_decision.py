"""Follow one utterance through streaming arbitration.

Two simulated recognizers (one per language) emit partial hypotheses while
the audio streams in.  Every 600 ms the fused model scores the acoustic
embedding so far together with both partial transcripts; once one language
clears the threshold, the other recognizer is stopped.

    python demos/01_streaming_decision.py
"""

import logging

from acoustext.arbiter import make_decoders, run_utterance
from acoustext.pipeline import build_split

from _desk import desk_config, desk_models

logging.basicConfig(level=logging.WARNING)

cfg = desk_config()
models = desk_models(cfg)
test = build_split(cfg, "test")

# an accented utterance: the acoustic evidence alone is weak here
utt = next(u for u in test if u.subset == "accent")
print(f"\n{utt.id}: {utt.duration_ms} ms, spoken language {utt.language}, subset {utt.subset}")
for lang, timeline in utt.hypotheses.items():
    print(f"  {lang} recognizer final hypothesis: {timeline[-1][1]!r}")

result = run_utterance(cfg.arbitration, models, utt.load_frames(),
                       make_decoders(utt, cfg.languages), utt.duration_ms, utt.id)

print("\nevent log:")
for ev in result.events:
    extra = ", ".join(f"{k}={v}" for k, v in ev.data.items())
    print(f"  {ev.time_ms:>5} ms  {ev.kind:<20} {extra}")

print(f"\ndecided {result.language} at {result.decision_time_ms} ms "
      f"({'early' if result.early else 'end of audio'}); "
      f"saved {sum(result.saved_ms.values())} ms of decoding")
