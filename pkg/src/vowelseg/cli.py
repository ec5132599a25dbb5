"""Command-line entry point: ``vowelseg synth|train|predict|eval|classifier-train``.

Exit status is 0 on success, 1 when some files or rows failed but the
command still produced output, and 2 on fatal errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .audio import load_waveform
from .classifier import train_pa_multiclass
from .corpus import (extract_many, frame_to_seconds, labelled_frames, load_examples,
                     read_class_inventory)
from .decode import DecoderConstraints, decode
from .evalkit import evaluate
from .model import load_classifier, load_model, save_classifier, save_model
from .synth import generate_corpus
from .textgrid import format_textgrid
from .train import TrainConfig, train_full

log = logging.getLogger("vowelseg")

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

_CONSTRAINT_KEYS = {f.name for f in dataclasses.fields(DecoderConstraints)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"constraints", "seed"}
_CLASSIFIER_KEYS = {"classifier_C", "classifier_epochs"}


class UsageError(Exception):
    """Fatal problem with the invocation or its inputs."""


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise UsageError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def _coerce(key: str, value: str, like):
    try:
        if isinstance(like, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(like, int):
            return int(value)
        return float(value)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse {value!r}") from None


def build_train_config(cfg: dict, seed: int) -> tuple[TrainConfig, dict]:
    """TrainConfig from a parsed config; returns the config and classifier options."""
    unknown = set(cfg) - _TRAIN_KEYS - _CONSTRAINT_KEYS - _CLASSIFIER_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    base, base_c = TrainConfig(), DecoderConstraints()
    train_kw, cons_kw = {}, {}
    for key, value in cfg.items():
        if key in _CONSTRAINT_KEYS:
            cons_kw[key] = _coerce(key, value, getattr(base_c, key))
        elif key == "dlm_iters":
            train_kw[key] = None if value.lower() in ("", "none", "auto") else _coerce(key, value, 0)
        elif key in _TRAIN_KEYS:
            train_kw[key] = _coerce(key, value, getattr(base, key))
    clf_opts = {"C": _coerce("classifier_C", cfg.get("classifier_C", "0.5"), 0.5),
                "epochs": _coerce("classifier_epochs", cfg.get("classifier_epochs", "10"), 10)}
    try:
        constraints = DecoderConstraints(**cons_kw)
        return TrainConfig(seed=seed, constraints=constraints, **train_kw), clf_opts
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _report_diagnostics(diags) -> None:
    for item in diags:
        if isinstance(item, tuple):
            print(f"line {item[0]}: {item[1]}", file=sys.stderr)
        else:
            print(f"error: {item}", file=sys.stderr)


# -- commands --------------------------------------------------------------

def cmd_synth(args, cfg) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    try:
        manifest = generate_corpus(args.count, args.seed, args.out)
    except OSError as exc:
        raise UsageError(f"cannot write corpus: {exc}") from None
    print(manifest)
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    train_cfg, _ = build_train_config(cfg, args.seed)
    if args.no_classifier and args.classifier:
        raise UsageError("--no-classifier and --classifier are mutually exclusive")
    clf = load_classifier(args.classifier) if args.classifier else None
    if clf is None and not args.no_classifier:
        log.info("no --classifier given; training without classifier features")
    examples, _, diags = load_examples(args.manifest, clf, train_cfg.constraints, jobs=args.jobs)
    _report_diagnostics(diags)
    if len(examples) < 2:
        raise UsageError("fewer than two usable manifest rows")
    model = train_full(examples, train_cfg, with_classifier=clf is not None, classifier=clf,
                       report=print)
    save_model(model, args.output)
    log.info("wrote %s (n=%d, fingerprint=%s)", args.output, model.layout.n, model.fingerprint)
    return EXIT_PARTIAL if diags else EXIT_OK


def _predict_files(model, paths, jobs):
    """``[(path, pair or exception)]`` in input order."""
    seqs = extract_many(paths, model.classifier, jobs)
    out = []
    for path, seq in zip(paths, seqs):
        if isinstance(seq, Exception):
            out.append((path, seq))
            continue
        try:
            out.append((path, decode(seq, model)[0]))
        except ValueError as exc:
            out.append((path, exc))
    return out


def cmd_predict(args, cfg) -> int:
    model = load_model(args.model)
    hop = 0.005
    results = _predict_files(model, args.audio, args.jobs)
    failures = 0
    rows = []
    for path, res in results:
        if isinstance(res, Exception):
            failures += 1
            print(f"error: {path}: {res}", file=sys.stderr)
            continue
        t_b, t_e = res
        rows.append((path, frame_to_seconds(t_b, hop), frame_to_seconds(t_e, hop)))

    if args.format == "csv":
        fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", "onset_s", "offset_s", "duration_s"])
            for path, on, off in rows:
                writer.writerow([path, f"{on:.3f}", f"{off:.3f}", f"{off - on:.3f}"])
        finally:
            if fh is not sys.stdout:
                fh.close()
    else:
        out_dir = Path(args.out or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, on, off in rows:
            xmax = load_waveform(path).duration
            target = out_dir / (Path(path).stem + ".TextGrid")
            target.write_text(format_textgrid(xmax, on, off), encoding="utf-8")
    if failures == len(results):
        return EXIT_FATAL
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args, cfg) -> int:
    model = load_model(args.model)
    examples, rows, diags = load_examples(args.manifest, model.classifier, model.constraints,
                                          jobs=args.jobs, require_admissible=False)
    if args.subset:
        keep = {line.strip() for line in Path(args.subset).read_text(encoding="utf-8").splitlines()
                if line.strip()}
        examples = [ex for ex in examples if ex.id in keep]
    preds, targets, contexts = {}, {}, {}
    for ex in examples:
        try:
            preds[ex.id] = decode(ex.seq, model)[0]
        except ValueError as exc:
            diags.append((0, f"{ex.id}: {exc}"))
            continue
        targets[ex.id] = ex.target
        if ex.context:
            contexts[ex.id] = ex.context
    _report_diagnostics(diags)
    if not targets:
        raise UsageError("no tokens to evaluate")
    report = evaluate(preds, targets, 0.005, contexts)
    if args.report:
        Path(args.report).write_text(report.to_csv(), encoding="utf-8")
    sys.stdout.write(report.summary())
    return EXIT_PARTIAL if diags else EXIT_OK


def cmd_classifier_train(args, cfg) -> int:
    _, opts = build_train_config(cfg, args.seed)
    names, vowels, nasals = read_class_inventory(args.classes)
    X, y, diags = labelled_frames(args.segments, jobs=args.jobs)
    _report_diagnostics(diags)
    if len(y) == 0:
        raise UsageError("no labelled frames")
    try:
        clf = train_pa_multiclass(X, y, C=opts["C"], epochs=opts["epochs"], seed=args.seed,
                                  class_names=names, vowel_set=vowels, nasal_set=nasals)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_classifier(clf, args.output, {"C": opts["C"], "epochs": opts["epochs"],
                                       "seed": args.seed, "frames": len(y)})
    acc = float((clf.predict(X) == [names.index(c) for c in y]).mean())
    print(f"frames={len(y)} classes={len(names)} train_accuracy={acc:.4f}")
    return EXIT_PARTIAL if diags else EXIT_OK


# -- argument parsing -------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="worker processes for feature extraction")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="vowelseg", parents=[common],
                                     description="Vowel duration measurement in CVC words.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a model from a manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True, help="model file to write")
    p.add_argument("--no-classifier", action="store_true")
    p.add_argument("--classifier", help="frame classifier file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict vowel boundaries")
    p.add_argument("model")
    p.add_argument("audio", nargs="+")
    p.add_argument("--format", choices=("csv", "textgrid"), default="csv")
    p.add_argument("--out", help="CSV file (default stdout) or TextGrid directory")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="evaluate a model on a manifest")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--report", help="per-token CSV to write")
    p.add_argument("--subset", help="file of token ids to restrict evaluation to")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classifier-train", parents=[common],
                       help="train the frame classifier from labelled segments")
    p.add_argument("segments", help="CSV: audio_path,start_s,end_s,label")
    p.add_argument("classes", help="CSV: class,kind")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_classifier_train)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("VOWELSEG_LOG", "info").strip().lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"VOWELSEG_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_FATAL
    args.jobs = getattr(args, "jobs", 1)
    try:
        _setup_logging()
        cfg = {}
        if getattr(args, "config", None):
            cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        seed_text = cfg.pop("seed", "0")
        args.seed = getattr(args, "seed", None)
        if args.seed is None:
            args.seed = _coerce("seed", seed_text, 0)
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args, cfg)
    except (UsageError, OSError, ValueError) as exc:
        print(f"vowelseg: error: {exc}", file=sys.stderr)
        log.debug("fatal error", exc_info=True)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
