"""Independent recomputation of the evaluation metrics from a raw event log.

Uses only the standard library and the event-log JSON format; nothing from
the package is imported.  Usage::

    python replay_oracle.py EVENTS.jsonl GOLD.json [BASELINE.json]

GOLD maps utterance id to language; BASELINE maps language to baseline error.
Prints one JSON object with the recomputed metrics.
"""

import json
import sys


def decisions(lines):
    """utterance id -> (language, decision time, early, duration) from the log lines."""
    out = {}
    for line in lines:
        if not line.strip():
            continue
        ev = json.loads(line)
        if ev["kind"] not in ("early_decision", "final_decision"):
            continue
        if ev["utt"] in out:
            raise ValueError(f"two decisions for {ev['utt']}")
        out[ev["utt"]] = (ev["language"], ev["t"], ev["kind"] == "early_decision", ev["duration_ms"])
    return out


def metrics(lines, gold, languages, baseline=None):
    dec = decisions(lines)
    err = {}
    for lang in languages:
        ids = [u for u in dec if gold[u] == lang]
        err[lang] = (sum(dec[u][0] != lang for u in ids) / len(ids)) if ids else None
    rr = {}
    if baseline is not None:
        for lang in languages:
            b = baseline.get(lang)
            rr[lang] = None if (err[lang] is None or not b or b <= 0) else (b - err[lang]) / b * 100.0
    saved = sum(d - t for _, t, early, d in dec.values() if early)
    all_audio = sum(d for *_, d in dec.values())
    early_audio = sum(d for _, _, early, d in dec.values() if early)
    n_early = sum(1 for v in dec.values() if v[2])
    return {
        "error_rate": err,
        "rerr": rr,
        "percent_saved": 100.0 * saved / all_audio,
        "percent_saved_early_audio": (100.0 * saved / early_audio) if early_audio else None,
        "percent_utt_early": 100.0 * n_early / len(dec),
        "n_utterances": len(dec),
        "n_early": n_early,
    }


def main(argv):
    with open(argv[0]) as fh:
        lines = fh.readlines()
    with open(argv[1]) as fh:
        gold = json.load(fh)
    baseline = None
    if len(argv) > 2:
        with open(argv[2]) as fh:
            baseline = json.load(fh)
    languages = sorted(set(gold.values()))
    print(json.dumps(metrics(lines, gold, languages, baseline), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
