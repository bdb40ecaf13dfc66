"""Command-line front end.

Exit codes: 0 success, 1 I/O or format error, 2 invalid configuration or
data, 3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .evaluation import evaluate, format_table
from .features import DEFAULT_WINDOWS, read_features_csv, write_features_csv
from .pipeline import (PipelineConfig, extract_all, featurize_for_model, is_feature_csv,
                       load_corpus, load_labels, save_corpus, scale_windows, synth_corpus,
                       train_on_features, write_json)
from .stl import StlTemplate, stl_decompose
from .svm import ConvergenceError, KernelSpec, TrainConfig, decision_function, load_model, save_model
from .waveform_io import SynthParams

KERNEL_NAMES = {"linear": "linear", "poly": "polynomial", "polynomial": "polynomial",
                "rbf": "rbf", "sigmoid": "sigmoid"}

# Defaults for flags that may also come from --config; flags left at None
# fall back to the config file, then to these values.
DEFAULTS = {
    "windows": ",".join(map(str, DEFAULT_WINDOWS)),
    "scale_factor": None,
    "kernel": "rbf",
    "degree": 6,
    "gamma": None,
    "c": 1.0,
    "tol": 1e-3,
    "max_passes": None,
    "svm_seed": 0,
    "split": 0.8,
    "seed_split": 0,
    "seed_oversample": 0,
    "oversample_test": False,
    "workers": 1,
    "format": "csv",
    "seasonal_span": 11,
    "trend_span": None,
    "lowpass_span": None,
    "inner": 2,
    "outer": 1,
    "seasonal_jump": None,
    "trend_jump": None,
    "lowpass_jump": None,
    "seed": 0,
    "n_samples": None,
    "amplitude": 20.0,
    "noise": 1.0,
    "bursts": 5,
    "burst_amplitude": 8.0,
    "burst_decay": 4.0,
    "burst_cycles": 3.0,
}

FULL_LENGTH = 800_000
PIPELINE_DEFAULTS = {"scale_factor": 0.01, "pd": 60, "nonpd": 240}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _add_stl_flags(p):
    g = p.add_argument_group("STL")
    g.add_argument("--seasonal-span", type=int)
    g.add_argument("--trend-span", type=int)
    g.add_argument("--lowpass-span", type=int)
    g.add_argument("--inner", type=int, help="inner loop iterations")
    g.add_argument("--outer", type=int, help="outer (robustness) iterations")
    g.add_argument("--seasonal-jump", type=int)
    g.add_argument("--trend-jump", type=int)
    g.add_argument("--lowpass-jump", type=int)


def _add_window_flags(p):
    p.add_argument("--windows", help="comma-separated window lengths (default 100,1000,10000,50000)")
    p.add_argument("--scale-factor", type=float, help="shrink window lengths by this factor")
    p.add_argument("--workers", type=int)
    _add_stl_flags(p)


def _add_train_flags(p):
    g = p.add_argument_group("classifier")
    g.add_argument("--kernel", choices=sorted(KERNEL_NAMES))
    g.add_argument("--degree", type=int)
    g.add_argument("--gamma", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-passes", type=int)
    g.add_argument("--svm-seed", type=int)
    g.add_argument("--split", type=float, help="train fraction of the stratified split")
    g.add_argument("--seed-split", "--split-seed", dest="seed_split", type=int)
    g.add_argument("--seed-oversample", "--oversample-seed", dest="seed_oversample", type=int)
    g.add_argument("--oversample-test", action="store_true", default=None)


def _add_synth_flags(p):
    g = p.add_argument_group("synthesis")
    g.add_argument("--pd", type=int, help="number of PD waveforms")
    g.add_argument("--nonpd", type=int, help="number of non-PD waveforms")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-samples", type=int)
    g.add_argument("--amplitude", type=float)
    g.add_argument("--noise", type=float)
    g.add_argument("--bursts", type=int, help="bursts per PD waveform")
    g.add_argument("--burst-amplitude", type=float)
    g.add_argument("--burst-decay", type=float)
    g.add_argument("--burst-cycles", type=float)
    g.add_argument("--format", choices=("csv", "pdwf"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pdstl",
        description="Partial discharge detection from STL residual features and a kernel SVM.")
    parser.add_argument("--config", help="JSON file of flag values; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic labelled corpus")
    _add_synth_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", help="STL components of one waveform as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--id", help="waveform id (default: first in file)")
    p.add_argument("--window", type=int, required=True)
    _add_stl_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("extract", help="unscaled feature CSV for a corpus")
    p.add_argument("--input", required=True)
    _add_window_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit scaler and SVM, report held-out metrics")
    p.add_argument("--input", required=True, help="waveform corpus or feature CSV")
    _add_window_flags(p)
    _add_train_flags(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--report", help="report JSON path (default: <model-out stem>.report.json)")

    p = sub.add_parser("predict", help="decision values and labels for a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score predictions against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--report", help="write the JSON report here")

    p = sub.add_parser("pipeline", help="synth -> train -> predict -> evaluate")
    _add_synth_flags(p)
    _add_window_flags(p)
    _add_train_flags(p)
    p.add_argument("--workdir", default="pdstl-run")
    return parser


def _resolve(args):
    """Merge explicit flags over --config values over defaults."""
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: malformed config ({exc})", 1) from None
        if not isinstance(cfg, dict):
            raise CliError(f"{args.config}: config must be a JSON object", 1)
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    defaults = dict(DEFAULTS)
    if args.command == "pipeline":
        defaults.update(PIPELINE_DEFAULTS)
        # explicit windows are taken literally unless a scale factor is given too
        if args.windows is not None or "windows" in cfg:
            defaults["scale_factor"] = None
    for key, value in vars(args).items():
        if value is None:
            setattr(args, key, cfg.get(key, defaults.get(key)))
    return args


def _windows(args):
    try:
        windows = [int(w) for w in str(args.windows).split(",") if w.strip()]
    except ValueError:
        raise CliError(f"bad --windows value {args.windows!r}", 2) from None
    if args.scale_factor is not None:
        if not args.scale_factor > 0:
            raise CliError("--scale-factor must be positive", 2)
        windows = scale_windows(windows, args.scale_factor)
    return windows


def _stl_template(args):
    return StlTemplate(seasonal_span=args.seasonal_span, inner_iterations=args.inner,
                       outer_iterations=args.outer, trend_span=args.trend_span,
                       lowpass_span=args.lowpass_span, seasonal_jump=args.seasonal_jump,
                       trend_jump=args.trend_jump, lowpass_jump=args.lowpass_jump)


def _pipeline_config(args):
    if args.gamma is not None and not args.gamma > 0:
        raise CliError("gamma must be positive", 2)
    kernel = KernelSpec(KERNEL_NAMES[args.kernel], args.degree, args.gamma)
    tc = TrainConfig(c=args.c, tol=args.tol, max_passes=args.max_passes, seed=args.svm_seed)
    return PipelineConfig(window_lengths=tuple(_windows(args)), stl=_stl_template(args),
                          kernel=kernel, train=tc, split_fraction=args.split,
                          split_seed=args.seed_split, oversample_seed=args.seed_oversample,
                          oversample_test=bool(args.oversample_test), workers=args.workers)


# ----------------------------------------------------------------- commands


def cmd_synth(args, out=None):
    out = Path(out or args.out)
    n_samples = args.n_samples
    if n_samples is None:
        # canonical record length, shrunk along with the windows under --scale-factor
        factor = getattr(args, "scale_factor", None) or 1.0
        n_samples = max(4, int(round(FULL_LENGTH * factor)))
    base = SynthParams(n_samples=n_samples, amplitude=args.amplitude, noise_sigma=args.noise,
                       burst_amplitude=args.burst_amplitude,
                       burst_decay_samples=args.burst_decay,
                       burst_carrier_cycles_per_burst=args.burst_cycles)
    count_pd = args.pd if args.pd is not None else 0
    count_nonpd = args.nonpd if args.nonpd is not None else 0
    corpus = synth_corpus(count_pd, count_nonpd, base, seed=args.seed, n_bursts=args.bursts)
    save_corpus(corpus, out, args.format)
    manifest = {
        "count": len(corpus),
        "labeled_pd": sum(1 for wf in corpus if wf.label),
        "labeled_nonpd": sum(1 for wf in corpus if wf.label is False),
        "n_samples": n_samples,
        "format": args.format,
        "seed": args.seed,
        "synth": {"amplitude": args.amplitude, "noise_sigma": args.noise,
                  "n_bursts": args.bursts, "burst_amplitude": args.burst_amplitude,
                  "burst_decay_samples": args.burst_decay,
                  "burst_carrier_cycles_per_burst": args.burst_cycles},
    }
    manifest_path = out / "manifest.json" if args.format == "pdwf" else \
        out.with_name(out.name + ".manifest.json")
    write_json(manifest, manifest_path)
    print(f"wrote {len(corpus)} waveforms ({manifest['labeled_pd']} PD) to {out}")
    return corpus


def cmd_decompose(args):
    corpus = load_corpus(args.input)
    if not corpus:
        raise CliError(f"{args.input}: no waveforms", 1)
    if args.id is None:
        wf = corpus[0]
    else:
        matches = [w for w in corpus if w.id == args.id]
        if not matches:
            raise CliError(f"no waveform with id {args.id!r}", 2)
        wf = matches[0]
    if wf.samples.size < 2 * args.window:
        raise CliError(f"waveform {wf.id!r} has {wf.samples.size} samples; "
                       f"window {args.window} needs at least {2 * args.window}", 2)
    dec = stl_decompose(wf.samples, _stl_template(args).config_for(args.window))
    lines = ["t,y,trend,seasonal,residual"]
    for t, row in enumerate(zip(wf.samples.tolist(), dec.trend.tolist(),
                                dec.seasonal.tolist(), dec.residual.tolist())):
        lines.append(f"{t}," + ",".join(f"{v:.17g}" for v in row))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return dec


def cmd_extract(args):
    corpus = load_corpus(args.input)
    vectors = extract_all(corpus, _windows(args), _stl_template(args), args.workers)
    write_features_csv(vectors, args.out)
    print(f"wrote {len(vectors)} feature vectors to {args.out}")
    return vectors


def cmd_train(args):
    config = _pipeline_config(args)
    if is_feature_csv(args.input):
        vectors = read_features_csv(args.input)
        if vectors and vectors[0].values.size != 3 * len(config.window_lengths):
            raise CliError(f"feature file has {vectors[0].values.size} features but "
                           f"--windows gives {3 * len(config.window_lengths)}", 2)
    else:
        vectors = extract_all(load_corpus(args.input), config.window_lengths,
                              config.stl, config.workers)
    if not vectors:
        raise CliError(f"{args.input}: no training data", 2)
    outcome = train_on_features(vectors, config)
    save_model(outcome.model, args.model_out)
    report_path = args.report or str(Path(args.model_out).with_suffix("")) + ".report.json"
    write_json(outcome.report_dict(), report_path)
    print(f"training accuracy {outcome.train_accuracy:.4f} on "
          f"{len(outcome.train_ids)} waveforms (before balancing)")
    if outcome.report is not None:
        print(format_table(outcome.report, f"held-out evaluation ({len(outcome.test_ids)} waveforms)"))
    return outcome


def cmd_predict(args):
    model = load_model(args.model)
    corpus = load_corpus(args.input)
    X = featurize_for_model(model, corpus, args.workers)
    values = decision_function(model, X) if len(X) else np.empty(0)
    lines = ["id,decision_value,predicted_label"]
    for wf, v in zip(corpus, np.atleast_1d(values).tolist()):
        lines.append(f"{wf.id},{v:.17g},{int(v > 0)}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return values


def read_predictions(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "id,decision_value,predicted_label":
        raise FormatError(f"{path}: missing predictions header")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3 or parts[2] not in ("0", "1"):
            raise FormatError(f"line {lineno}: malformed prediction row")
        out[parts[0]] = parts[2] == "1"
    return out


def cmd_evaluate(args):
    preds = read_predictions(args.predictions)
    labels = load_labels(args.labels)
    missing_labels = sorted(set(preds) - set(labels))
    missing_preds = sorted(set(labels) - set(preds))
    if missing_labels or missing_preds:
        raise CliError("id mismatch: no label for " + (",".join(missing_labels) or "-")
                       + "; no prediction for " + (",".join(missing_preds) or "-"), 2)
    if any(labels[i] is None for i in preds):
        raise CliError("labels file contains unlabelled waveforms", 2)
    ids = list(preds)
    report = evaluate([preds[i] for i in ids], [labels[i] for i in ids])
    print(format_table(report))
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def cmd_pipeline(args):
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    suffix = ".csv" if args.format == "csv" else ""
    corpus_path = work / f"corpus{suffix}"
    corpus = cmd_synth(args, out=corpus_path)
    args.input = str(corpus_path)
    args.model_out = str(work / "model.json")
    args.report = str(work / "train_report.json")
    outcome = cmd_train(args)

    held_out = set(outcome.test_ids)
    heldout_path = work / f"heldout{suffix}"
    save_corpus([wf for wf in corpus if wf.id in held_out], heldout_path, args.format)
    args.model, args.input, args.out = args.model_out, str(heldout_path), str(work / "predictions.csv")
    cmd_predict(args)
    args.predictions, args.labels = args.out, str(heldout_path)
    args.report = str(work / "report.json")
    return cmd_evaluate(args)


COMMANDS = {"synth": cmd_synth, "decompose": cmd_decompose, "extract": cmd_extract,
            "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "pipeline": cmd_pipeline}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _resolve(args)
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
