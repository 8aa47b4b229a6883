"""Command-line entry point.

Subcommands:
    simulate   generate a synthetic stream CSV (+ manifest)
    run        fit + stream one variant over a CSV; emits outcome/score CSVs,
               metrics and threshold JSON, alert log, timing, manifest
    ablate     shared-scoring ablation across variants; emits the ablation CSV
    evaluate   metrics / reliability / budget-threshold sweep from score dumps

Exit codes: 0 success; 2 usage error; 3 data error; 4 run completed but the
budgeted threshold was infeasible (the alert rule degenerated to never-alert).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, calibrate, decide, metrics, reporting, synth
from .exceptions import DataError
from .ingest import FlowPreprocessor, StreamSchema, load_stream, split_raw
from .pipeline import VARIANTS, AlertPipeline, run_ablation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CRC_INFEASIBLE = 4


def _add_schema_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--timestamp-col", default="timestamp")
    parser.add_argument("--label-col", default=None,
                        help="label column; omit for an unlabeled stream")
    parser.add_argument("--feature-cols", default=None,
                        help="comma-separated numeric feature columns "
                             "(default: every remaining column)")
    parser.add_argument("--categorical-cols", default="",
                        help="comma-separated categorical columns to one-hot encode")
    parser.add_argument("--drop-cols", default="", help="comma-separated columns to ignore")


def _csv_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _schema_from_args(args) -> StreamSchema:
    categoricals = _csv_list(args.categorical_cols)
    drop = _csv_list(args.drop_cols)
    if args.feature_cols is not None:
        features = _csv_list(args.feature_cols)
    else:
        with open(args.data, newline="") as fh:
            header = fh.readline().strip()
        taken = {args.timestamp_col, args.label_col, *categoricals, *drop}
        features = tuple(c.strip() for c in header.split(",")
                         if c.strip() and c.strip() not in taken)
    return StreamSchema(timestamp=args.timestamp_col, features=features,
                        categoricals=categoricals, label=args.label_col, drop=drop)


def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--L", type=int, default=500, help="run-length truncation")
    parser.add_argument("--hazard", type=float, default=1e-3)
    parser.add_argument("--warmup", type=int, default=30)
    parser.add_argument("--variance-floor", type=float, default=1e-4)
    parser.add_argument("--cost-ratio", type=float, default=10.0)
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=11,
                        help="recorded for protocol symmetry; the pipeline is deterministic")


def _detector_params(args) -> dict:
    return {
        "max_run_length": args.L,
        "hazard": args.hazard,
        "warmup_flows": args.warmup,
        "variance_floor": args.variance_floor,
    }


def cmd_simulate(args) -> int:
    manifest = reporting.ManifestBuilder("simulate", sys.argv[1:], vars(args) | {"func": None})
    if args.kind == "mean-shift":
        stream = synth.gen_mean_shift(length=args.length, change_at=args.shift_at,
                                      dim=args.d, seed=args.seed)
    elif args.kind == "burst-sustained":
        stream = synth.gen_burst_sustained(duration_minutes=args.duration, dim=args.d,
                                           seed=args.seed)
    elif args.kind == "regime":
        stream = synth.gen_regime(length=args.length, prevalence=args.prevalence,
                                  dim=args.d, seed=args.seed)
    else:  # collapse-regime
        stream = synth.gen_collapse_regime(length=args.length, prevalence=args.prevalence,
                                           dim=args.d, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    synth.write_stream_csv(stream, out)
    manifest.add_output(out)
    manifest.write(out.with_suffix(".manifest.json"))
    print(f"wrote {len(stream)} flows to {out}")
    return EXIT_OK


def _load_splits(args):
    schema = _schema_from_args(args)
    raw = load_stream(args.data, schema)
    raw_train, raw_val, raw_test = split_raw(raw)
    pre = FlowPreprocessor().fit(raw_train)
    return pre.transform(raw_train), pre.transform(raw_val), pre.transform(raw_test)


def cmd_run(args) -> int:
    manifest = reporting.ManifestBuilder("run", sys.argv[1:], vars(args) | {"func": None})
    manifest.add_input(args.data)
    train, val, test = _load_splits(args)

    pipeline = AlertPipeline(
        variant=args.variant, cost_ratio=args.cost_ratio, alpha=args.alpha,
        budget_events=args.budget_events, budget_period_minutes=args.budget_period,
        threshold_mode=args.threshold_mode, seed=args.seed, **_detector_params(args))
    pipeline.fit(train, val)
    result = pipeline.stream(test)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    outcome_path = outdir / "outcome.csv"
    reporting.write_outcomes_csv(result, outcome_path)
    reporting.write_alert_log_csv(result, outdir / "alerts.csv")
    reporting.write_scores_csv(pipeline.artifacts_.validation_scores, outdir / "scores_val.csv")
    test_scored = [
        reporting.ScoredFlow(float(result.timestamps[i]), float(result.scores[i]),
                             None if result.labels is None else int(result.labels[i]),
                             bool(result.warmup[i]))
        for i in range(len(result))
    ]
    reporting.write_scores_csv(test_scored, outdir / "scores_test.csv")
    pipeline.thresholds_.to_json(outdir / "thresholds.json")

    metrics_payload: dict = {
        "variant": args.variant,
        "n_flows": int(len(result)),
        "n_events": int(result.crossed.sum()),
        "alert_counts": {name: result.levels.count(name) for name in
                         sorted(set(result.levels))},
        "active_threshold": pipeline.rule_.tau,
        "threshold_source": pipeline.rule_.source,
    }
    if result.labels is not None and 0 < result.labels.sum() < len(result.labels):
        tau = pipeline.rule_.tau
        if tau is not None:
            report = metrics.evaluate(result.p_hat, result.labels, tau, pipeline.rule_.tie_rule)
        else:
            report = metrics.evaluate(result.p_hat, result.labels, 1.0, decide.STRICT)
        metrics_payload["test"] = report.to_dict()
    reporting.write_json(metrics_payload, outdir / "metrics.json")
    reporting.write_json(result.latency_stats(), outdir / "timing.json")

    for name in ("outcome.csv", "alerts.csv", "scores_val.csv", "scores_test.csv",
                 "thresholds.json", "metrics.json"):
        manifest.add_output(outdir / name)
    manifest.add_output(outdir / "timing.json", deterministic=False)
    manifest.write(outdir / "manifest.json")

    infeasible = pipeline.thresholds_.feasible is False and pipeline.rule_.source in ("crc", "conservative")
    if infeasible:
        print("budgeted threshold infeasible: alert rule degenerated to never-alert",
              file=sys.stderr)
        return EXIT_CRC_INFEASIBLE
    print(f"processed {len(result)} test flows, {int(result.crossed.sum())} budget events")
    return EXIT_OK


def cmd_ablate(args) -> int:
    manifest = reporting.ManifestBuilder("ablate", sys.argv[1:], vars(args) | {"func": None})
    manifest.add_input(args.data)
    train, val, test = _load_splits(args)
    variants = _csv_list(args.variants) if args.variants else tuple(sorted(VARIANTS))
    result = run_ablation(train, val, test, cost_ratio=args.cost_ratio, alpha=args.alpha,
                          variants=variants, **_detector_params(args))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "ablation.csv"
    reporting.write_ablation_csv(result.rows, path)
    manifest.add_output(path)
    manifest.write(outdir / "manifest.json")
    for row in result.rows:
        tau = "N/A" if row.tau is None else f"{row.tau:.4f}"
        print(f"{row.variant}: tau={tau} alert_rate={row.alert_rate:.4f} fpr={row.fpr:.4f} "
              f"recall={row.recall:.4f} precision={row.precision:.4f} f1={row.f1:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = reporting.ManifestBuilder("evaluate", sys.argv[1:], vars(args) | {"func": None})
    manifest.add_input(args.test_scores)
    _, test_scores, test_labels, test_warm = reporting.read_scores_csv(args.test_scores)
    if test_labels is None:
        raise DataError("evaluate requires labeled scores")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    calibration = calibrate.identity_map()
    val_scores = val_labels = None
    if args.val_scores:
        manifest.add_input(args.val_scores)
        _, val_scores, val_labels, val_warm = reporting.read_scores_csv(args.val_scores)
        if val_labels is None:
            raise DataError("validation scores must be labeled")
        val_scores, val_labels = val_scores[~val_warm], val_labels[~val_warm]
        calibration = calibrate.fit_calibration(args.calibrator, val_scores, val_labels)

    probs = calibration.apply(test_scores)
    tau_star = decide.cost_threshold(decide.CostSpec.from_ratio(args.cost_ratio))
    payload: dict = {
        "calibrator": calibration.kind,
        "tau_star": tau_star,
        "at_tau_star": metrics.evaluate(probs, test_labels, tau_star,
                                        decide.STRICT, args.bins).to_dict(),
    }

    sweep_rows = []
    if args.alpha_sweep and val_scores is not None:
        neg = calibration.apply(val_scores[val_labels == 0])
        for alpha in (float(a) for a in _csv_list(args.alpha_sweep)):
            crc = decide.crc_threshold(neg, alpha)
            diag = decide.collapse_diagnostics(neg, alpha, crc)
            if crc.feasible:
                rates = metrics.confusion_at(probs, test_labels, crc.tau, decide.INCLUSIVE)
                row = {"alpha": alpha, "tau_crc": crc.tau, "alert_rate": rates.alert_rate,
                       "fpr": rates.fpr, "recall": rates.recall}
            else:
                row = {"alpha": alpha, "tau_crc": None, "alert_rate": 0.0,
                       "fpr": 0.0, "recall": 0.0}
            row.update({"feasible": crc.feasible, "overshoot_bound": diag.overshoot_bound,
                        "density_collapse": diag.density_collapse})
            sweep_rows.append(row)
        payload["crc_sweep"] = sweep_rows

    reporting.write_json(payload, outdir / "metrics.json")
    bins = metrics.reliability_data(probs, test_labels, args.bins)
    reporting.write_reliability_csv(bins, outdir / "reliability.csv")
    manifest.add_output(outdir / "metrics.json")
    manifest.add_output(outdir / "reliability.csv")
    manifest.write(outdir / "manifest.json")
    print(f"evaluated {len(test_scores)} scores; metrics in {outdir / 'metrics.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowsentry",
                                     description="streaming budgeted alerting engine")
    parser.add_argument("--version", action="version", version=f"flowsentry {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic stream CSV")
    sim.add_argument("--kind", required=True,
                     choices=["mean-shift", "burst-sustained", "regime", "collapse-regime"])
    sim.add_argument("--length", type=int, default=600)
    sim.add_argument("--shift-at", type=int, default=300)
    sim.add_argument("--duration", type=float, default=700.0,
                     help="burst-sustained duration in minutes")
    sim.add_argument("--prevalence", type=float, default=0.05)
    sim.add_argument("--d", type=int, default=1)
    sim.add_argument("--seed", type=int, default=synth.DEFAULT_SEED)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    run = sub.add_parser("run", help="fit and stream one variant over a CSV")
    run.add_argument("--data", required=True)
    _add_schema_flags(run)
    run.add_argument("--variant", default="V1", choices=sorted(VARIANTS))
    _add_detector_flags(run)
    run.add_argument("--budget-events", type=float, default=50.0)
    run.add_argument("--budget-period", type=float, default=60.0,
                     help="SLO period in minutes")
    run.add_argument("--threshold-mode", default="variant",
                     choices=["variant", "cost", "crc", "conservative"])
    run.add_argument("--outdir", required=True)
    run.set_defaults(func=cmd_run)

    abl = sub.add_parser("ablate", help="post-hoc variant ablation on shared scores")
    abl.add_argument("--data", required=True)
    _add_schema_flags(abl)
    abl.add_argument("--variants", default=None, help="comma-separated subset, e.g. V1,V4")
    _add_detector_flags(abl)
    abl.add_argument("--outdir", required=True)
    abl.set_defaults(func=cmd_ablate)

    ev = sub.add_parser("evaluate", help="metrics and threshold sweep from score dumps")
    ev.add_argument("--test-scores", required=True)
    ev.add_argument("--val-scores", default=None,
                    help="labeled validation score dump used to fit the calibrator and budget sweep")
    ev.add_argument("--calibrator", default=calibrate.ISOTONIC,
                    choices=[calibrate.ISOTONIC, calibrate.PLATT, calibrate.IDENTITY])
    ev.add_argument("--cost-ratio", type=float, default=10.0)
    ev.add_argument("--alpha-sweep", default=None, help="comma-separated alert budgets")
    ev.add_argument("--bins", type=int, default=15)
    ev.add_argument("--outdir", required=True)
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
