"""Streaming language identification: synthesize, train, simulate, evaluate.

Every subcommand reads the same JSON config (``--config``, optional),
applies flag overrides, echoes the resolved config under
``<run-dir>/config/<subcommand>.json`` and writes its outputs below the run
directory.  ``<run-dir>/artifacts.json`` maps every artifact written so far to
its SHA-256.

Exit codes: 0 ok, 1 usage, 2 configuration, 3 data, 4 numeric.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__
from .acoustic import AcousticModel, train_acoustic
from .arbiter import (
    ArbitrationResult, LidModels, read_event_log, replay, run_manifest, write_event_log)
from .checkpoint import Checkpoint, file_sha256, save_features
from .config import RunConfig, load_config, parse_threshold
from .errors import ConfigError, DataError, LidError, UsageError
from .features import compute_lfbe, read_wav
from .fusion import FusionModel, train_fusion
from .manifest import Utterance, read_manifest, write_manifest
from .metrics import EvalReport, evaluate
from .pipeline import build_split, write_split
from .ssl import flip_labels, ssl_retrain, teacher_label
from .text import TextLidModel, train_text_lid

log = logging.getLogger("acoustext")


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "msg": record.getMessage()}, ensure_ascii=False)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------- run directory

class RunDir:
    def __init__(self, root):
        self.root = Path(root)

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def record(self, *paths: Path) -> None:
        """Add content hashes of ``paths`` to the run's artifact index."""
        index_path = self.path("artifacts.json")
        index = json.loads(index_path.read_text()) if index_path.exists() else {}
        for p in paths:
            index[Path(p).resolve().relative_to(self.root.resolve()).as_posix()] = file_sha256(p)
        index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")

    def echo_config(self, command: str, cfg: RunConfig) -> None:
        self.path("config", f"{command}.json").write_text(cfg.dumps())


def _resolve(run: RunDir, value: Optional[str], *default) -> Path:
    return Path(value) if value is not None else run.root.joinpath(*default)


def _load_manifest(path: Path, languages=None) -> List[Utterance]:
    if not path.exists():
        raise DataError(f"manifest {path} does not exist")
    utts = read_manifest(path, languages)
    base = path.parent
    out = []
    for u in utts:
        if u.features is not None and not Path(u.features).is_absolute():
            u = replace(u, features=str(base / u.features))
        if u.audio is not None and not Path(u.audio).is_absolute():
            u = replace(u, audio=str(base / u.audio))
        out.append(u)
    return out


def _load_checkpoint(path: Path, kind: str) -> Checkpoint:
    if not path.exists():
        raise ConfigError(f"missing {kind} checkpoint {path}")
    return Checkpoint.load(path, kind=kind)


def _models_for(run: RunDir, mode: str, args) -> LidModels:
    paths = {
        "acoustic": _resolve(run, args.acoustic, "models", "acoustic.lidw"),
        "text": _resolve(run, args.text, "models", "text.lidw"),
        "fusion": _resolve(run, args.fusion, "models", "fusion.lidw"),
    }
    m = LidModels()
    if mode in ("acoustic", "acoustext"):
        m.acoustic = AcousticModel.from_checkpoint(_load_checkpoint(paths["acoustic"], "acoustic"))
    if mode in ("text", "acoustext"):
        m.text = TextLidModel.from_checkpoint(_load_checkpoint(paths["text"], "text"))
    if mode == "acoustext":
        m.fusion = FusionModel.from_checkpoint(
            _load_checkpoint(paths["fusion"], "fusion"),
            acoustic_sha=file_sha256(paths["acoustic"]), text_sha=file_sha256(paths["text"]))
    return m


def _save_model(run: RunDir, model, out: Path, name: str) -> str:
    out.parent.mkdir(parents=True, exist_ok=True)
    sha = model.to_checkpoint().save(out)
    run.record(out)
    print(f"{name} {sha}")
    return sha


def _write_train_report(run: RunDir, name: str, report) -> None:
    p = run.path("reports", f"{name}.json")
    p.write_text(json.dumps(report.to_json(), sort_keys=True) + "\n")
    run.record(p)


# --------------------------------------------------------------- subcommands

def cmd_synth_corpus(cfg: RunConfig, run: RunDir, args) -> None:
    names = args.split or list(cfg.corpus.splits)
    for name in names:
        if name not in cfg.corpus.splits:
            raise ConfigError(f"unknown split {name!r}; config defines {sorted(cfg.corpus.splits)}")
        utts = build_split(cfg, name)
        manifest = run.path("data", f"{name}.jsonl")
        write_split(utts, manifest, run.root / "data" / "feats" / name)
        run.record(manifest)
        print(f"{name} {len(utts)} {file_sha256(manifest)}")


def cmd_extract_features(cfg: RunConfig, run: RunDir, args) -> None:
    src = Path(args.manifest)
    utts = _load_manifest(src, cfg.languages)
    out = _resolve(run, args.out, "data", src.stem + ".features.jsonl")
    feat_dir = out.parent / "feats" / src.stem
    feat_dir.mkdir(parents=True, exist_ok=True)
    f = cfg.features
    done = []
    for u in utts:
        if u.audio is None:
            raise DataError(f"{u.id}: record has no audio path")
        pcm, sr = read_wav(u.audio)
        feats = compute_lfbe(pcm, sr, f.window_ms, f.hop_ms, f.n_mels)
        path = feat_dir / f"{u.id}.lidw"
        save_features(path, feats.frames, {"id": u.id, "hop_ms": f.hop_ms, "window_ms": f.window_ms})
        done.append(replace(u, features=path.relative_to(out.parent).as_posix(),
                            audio=Path(os.path.relpath(u.audio, out.parent)).as_posix()))
    write_manifest(done, out)
    run.record(out)
    print(f"features {len(done)} {file_sha256(out)}")


def cmd_train_acoustic(cfg: RunConfig, run: RunDir, args) -> None:
    utts = _load_manifest(_resolve(run, args.manifest, "data", "train_acoustic.jsonl"),
                          cfg.languages)
    model, report = train_acoustic(utts, cfg.languages, cfg.acoustic)
    _save_model(run, model, _resolve(run, args.out, "models", "acoustic.lidw"), "acoustic")
    _write_train_report(run, "train-acoustic", report)


def cmd_train_text(cfg: RunConfig, run: RunDir, args) -> None:
    utts = _load_manifest(_resolve(run, args.manifest, "data", "train_text.jsonl"), cfg.languages)
    model, report = train_text_lid(utts, cfg.languages, cfg.text)
    _save_model(run, model, _resolve(run, args.out, "models", "text.lidw"), "text")
    _write_train_report(run, "train-text", report)


def cmd_train_fusion(cfg: RunConfig, run: RunDir, args) -> None:
    utts = _load_manifest(_resolve(run, args.manifest, "data", "train_fusion.jsonl"),
                          cfg.languages)
    ap = _resolve(run, args.acoustic, "models", "acoustic.lidw")
    tp = _resolve(run, args.text, "models", "text.lidw")
    acoustic = AcousticModel.from_checkpoint(_load_checkpoint(ap, "acoustic"))
    text = TextLidModel.from_checkpoint(_load_checkpoint(tp, "text"))
    before = (file_sha256(ap), file_sha256(tp))
    model, report = train_fusion(utts, acoustic, text, cfg.fusion)
    if (file_sha256(ap), file_sha256(tp)) != before:
        raise ConfigError("upstream checkpoints changed during fusion training")
    model.upstream = {"acoustic": before[0], "text": before[1]}
    _save_model(run, model, _resolve(run, args.out, "models", "fusion.lidw"), "fusion")
    _write_train_report(run, "train-fusion", report)


def _run_name(cfg: RunConfig) -> str:
    a = cfg.arbitration
    th = "never" if a.threshold == float("inf") else f"{a.threshold:g}"
    return f"{a.mode}-theta{th}-T{a.interval_ms}"


def _baseline_errors(path: Optional[str]):
    if path is None:
        return None, None
    rec = json.loads(Path(path).read_text().splitlines()[0])
    return rec["error_rate"], rec["mode"]


def _report_from_log(events_path: Path, meta: dict, gold: Dict[str, str],
                     baseline_error, baseline) -> EvalReport:
    logs = read_event_log(events_path)
    results = []
    for uid in meta["utterances"]:
        if uid not in logs:
            raise DataError(f"event log has no events for {uid}")
        r = replay(logs[uid])
        results.append(ArbitrationResult(uid, r["language"], r["decision_time_ms"], r["early"],
                                         r["duration_ms"], [], r["saved_ms"]))
    return evaluate(results, gold, meta["languages"], mode=meta["mode"],
                    threshold=parse_threshold(meta["threshold"]), interval_ms=meta["interval_ms"],
                    baseline_error=baseline_error, baseline=baseline)


def _write_report(run: RunDir, stem: str, report: EvalReport):
    jl = run.path("reports", f"{stem}.jsonl")
    jl.write_text(report.to_jsonl())
    txt = run.path("reports", f"{stem}.txt")
    txt.write_text(report.to_text())
    run.record(jl, txt)
    sys.stdout.write(report.to_text())
    return jl


def cmd_simulate(cfg: RunConfig, run: RunDir, args) -> None:
    arb = cfg.arbitration
    manifest = _resolve(run, args.manifest, "data", "test.jsonl")
    utts = _load_manifest(manifest, cfg.languages)
    if any(u.language is None for u in utts):
        raise DataError("simulate needs a labeled manifest")
    models = _models_for(run, arb.mode, args)
    if models.languages != cfg.languages:
        raise ConfigError(f"models cover {models.languages}, config says {cfg.languages}")
    results = run_manifest(arb, models, utts)
    name = args.name or _run_name(cfg)
    events = run.path("events", f"{name}.jsonl")
    write_event_log(results, events)
    meta = {"mode": arb.mode, "threshold": "never" if arb.threshold == float("inf") else arb.threshold,
            "interval_ms": arb.interval_ms, "languages": models.languages,
            "utterances": [u.id for u in utts], "manifest_sha256": file_sha256(manifest)}
    meta_path = run.path("events", f"{name}.meta.json")
    meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n")
    res_path = run.path("results", f"{name}.jsonl")
    res_path.write_text("".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in results))
    run.record(events, meta_path, res_path)
    base_err, base_name = _baseline_errors(args.baseline_report)
    gold = {u.id: u.language for u in utts}
    report = _report_from_log(events, meta, gold, base_err, base_name)
    direct = evaluate(results, gold, models.languages, mode=arb.mode, threshold=arb.threshold,
                      interval_ms=arb.interval_ms, baseline_error=base_err, baseline=base_name)
    if direct.to_jsonl() != report.to_jsonl():
        raise DataError("event log does not reproduce the in-memory results")
    _write_report(run, name, report)


def _replayed_report(run: RunDir, args) -> EvalReport:
    events = Path(args.events)
    meta_path = events.with_suffix(".meta.json")
    if not events.exists() or not meta_path.exists():
        raise DataError(f"need {events} and {meta_path}")
    meta = json.loads(meta_path.read_text())
    manifest = _resolve(run, args.manifest, "data", "test.jsonl")
    if file_sha256(manifest) != meta["manifest_sha256"]:
        raise ConfigError(f"{manifest} is not the manifest this event log was produced from")
    gold = {u.id: u.language for u in read_manifest(manifest)}
    base_err, base_name = _baseline_errors(args.baseline_report)
    return _report_from_log(events, meta, gold, base_err, base_name)


def cmd_evaluate(cfg: RunConfig, run: RunDir, args) -> None:
    report = _replayed_report(run, args)
    stem = args.name or Path(args.events).stem + ".evaluate"
    _write_report(run, stem, report)


def cmd_replay_log(cfg: RunConfig, run: RunDir, args) -> None:
    if args.per_utterance:
        logs = read_event_log(args.events)
        for uid in sorted(logs):
            sys.stdout.write(json.dumps({"utt": uid, **replay(logs[uid])}, sort_keys=True) + "\n")
        return
    sys.stdout.write(_replayed_report(run, args).to_jsonl())


def cmd_ssl_label(cfg: RunConfig, run: RunDir, args) -> None:
    teacher_kind = args.teacher or cfg.ssl.teacher
    utts = _load_manifest(_resolve(run, args.manifest, "data", "ssl_unlabeled.jsonl"),
                          cfg.languages)
    models = _models_for(run, "acoustext" if teacher_kind == "acoustext" else "text", args)
    teacher = models if teacher_kind == "acoustext" else models.text
    threshold = cfg.ssl.threshold if args.threshold is None else args.threshold
    labels, accepted = teacher_label(teacher, utts, threshold)
    out = _resolve(run, args.out, "data", "pseudo.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    # feature paths relative to the new manifest's directory
    rel = [replace(u, features=Path(os.path.relpath(u.features, out.parent)).as_posix())
           if u.features else u for u in accepted]
    write_manifest(rel, out)
    run.record(out)
    print(f"accepted {len(accepted)} of {len(labels)} (threshold {threshold}) {file_sha256(out)}")


def cmd_ssl_retrain(cfg: RunConfig, run: RunDir, args) -> None:
    base = _load_manifest(_resolve(run, args.base, "data", "train_acoustic.jsonl"), cfg.languages)
    pseudo = _load_manifest(_resolve(run, args.pseudo, "data", "pseudo.jsonl"), cfg.languages)
    if args.flip:
        pseudo = flip_labels(pseudo, cfg.languages)
    heldout_path = _resolve(run, args.heldout, "data", "ssl_heldout.jsonl")
    heldout = _load_manifest(heldout_path, cfg.languages) if heldout_path.exists() else None
    baseline_path = _resolve(run, args.acoustic, "models", "acoustic.lidw")
    baseline = (AcousticModel.from_checkpoint(_load_checkpoint(baseline_path, "acoustic"))
                if baseline_path.exists() else None)
    student, report = ssl_retrain(base, pseudo, cfg.languages, cfg.acoustic, heldout, baseline)
    name = "acoustic-ssl-flipped" if args.flip else "acoustic-ssl"
    _save_model(run, student, _resolve(run, args.out, "models", f"{name}.lidw"), name)
    if report is not None:
        p = run.path("reports", f"{name}.json")
        p.write_text(json.dumps(report.to_json(), sort_keys=True) + "\n")
        run.record(p)
        print(json.dumps(report.to_json(), sort_keys=True))


COMMANDS = {
    "synth-corpus": cmd_synth_corpus,
    "extract-features": cmd_extract_features,
    "train-acoustic": cmd_train_acoustic,
    "train-text": cmd_train_text,
    "train-fusion": cmd_train_fusion,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "ssl-label": cmd_ssl_label,
    "ssl-retrain": cmd_ssl_retrain,
    "replay-log": cmd_replay_log,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--preset", choices=["desk", "paper"])
    common.add_argument("--run-dir", default="run", help="output directory (default: ./run)")
    common.add_argument("--seed", type=int, help="seed for every trained model")
    common.add_argument("--theta", help="early-decision threshold, or 'never'")
    common.add_argument("--T", type=int, dest="interval_ms", help="arbitration interval in ms")
    common.add_argument("--mode", choices=["acoustic", "text", "acoustext"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="acoustext", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    s = add("synth-corpus", "generate synthetic manifests and feature files")
    s.add_argument("--split", action="append", help="split name (repeatable; default: all)")

    s = add("extract-features", "compute LFBE features for a manifest with audio paths")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")

    for name, help_ in (("train-acoustic", "train the acoustic LID model"),
                        ("train-text", "train the text LID model")):
        s = add(name, help_)
        s.add_argument("--manifest")
        s.add_argument("--out")

    s = add("train-fusion", "train the fusion head over frozen upstream models")
    for flag in ("--manifest", "--out", "--acoustic", "--text"):
        s.add_argument(flag)

    for name, help_ in (("simulate", "run streaming arbitration over a manifest"),
                        ("evaluate", "recompute a simulation report from its event log")):
        s = add(name, help_)
        s.add_argument("--manifest")
        s.add_argument("--name", help="output stem under reports/")
        s.add_argument("--baseline-report", help="report whose error rates are the RERR baseline")
        if name == "simulate":
            for flag in ("--acoustic", "--text", "--fusion"):
                s.add_argument(flag)
        else:
            s.add_argument("--events", required=True)

    s = add("ssl-label", "pseudo-label an unlabeled manifest with a teacher model")
    s.add_argument("--teacher", choices=["text", "acoustext"])
    s.add_argument("--threshold", type=float)
    for flag in ("--manifest", "--out", "--acoustic", "--text", "--fusion"):
        s.add_argument(flag)

    s = add("ssl-retrain", "retrain the acoustic model on base plus pseudo-labeled data")
    for flag in ("--base", "--pseudo", "--heldout", "--acoustic", "--out"):
        s.add_argument(flag)
    s.add_argument("--flip", action="store_true", help="negative control: flip pseudo-labels")

    s = add("replay-log", "recompute the metrics record of a simulation from its event log")
    s.add_argument("events")
    s.add_argument("--manifest")
    s.add_argument("--baseline-report", help="report whose error rates are the RERR baseline")
    s.add_argument("--per-utterance", action="store_true",
                   help="print the decision recovered for each utterance instead")
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config, args.preset)
    if args.seed is not None:
        for sec in (cfg.acoustic, cfg.text, cfg.fusion):
            sec.seed = args.seed
        cfg.seed = args.seed
    arb = {}
    if args.theta is not None:
        try:
            arb["threshold"] = parse_threshold(args.theta)
        except ValueError:
            raise UsageError(f"--theta expects a number or 'never', got {args.theta!r}") from None
    if args.interval_ms is not None:
        arb["interval_ms"] = args.interval_ms
    if args.mode is not None:
        arb["mode"] = args.mode
    if arb:
        cfg.arbitration = replace(cfg.arbitration, **arb)
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLogFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    try:
        args = build_parser().parse_args(argv)
        root.setLevel(logging.INFO if args.verbose else logging.WARNING)
        cfg = resolve_config(args)
        run = RunDir(args.run_dir)
        run.root.mkdir(parents=True, exist_ok=True)
        run.echo_config(args.command, cfg)
        COMMANDS[args.command](cfg, run, args)
    except LidError as e:
        log.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        log.error("DataError: %s", e)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
