"""Batch command-line front end.

Subcommands wire the pipeline end to end: weather generation/ingestion,
training-table construction, surrogate training, hold-out evaluation, Y_k
runs, and comparisons. Every invocation writes one manifest.json next to
its outputs; all stochastic commands require an explicit --seed, and data
outputs are byte-identical across reruns with identical flags.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from searesponse import __version__
from searesponse.distfit import (
    DistFamily,
    build_training_table,
    load_training_table,
    write_training_table,
)
from searesponse.errors import ConfigurationError, DataError, NumericError
from searesponse.gp import MODEL_FORMAT_VERSION
from searesponse.orderstats import (
    QoiConfig,
    compare_qoi,
    load_qoi_result,
    run_qoi,
    save_qoi_result,
)
from searesponse.seeding import derive_seed
from searesponse.simulator import DEFAULT_SIM_CONFIG, load_sim_config, write_sim_config
from searesponse.surrogate import (
    BUNDLE_FORMAT_VERSION,
    COUNT_TARGET,
    GPSettings,
    evaluate_surrogate,
    load_surrogate,
    save_surrogate,
    train_surrogate,
)
from searesponse.weather import (
    DEFAULT_BOX,
    InputBox,
    load_weather,
    sample_uniform_inputs,
    synthesize_weather,
    write_weather,
)

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "SEARESPONSE_THREADS"

FORMAT_VERSIONS = {
    "weather_csv": 1,
    "sim_config": 1,
    "training_table": 1,
    "gp_model": MODEL_FORMAT_VERSION,
    "surrogate_bundle": BUNDLE_FORMAT_VERSION,
    "qoi_result": 1,
    "comparison_report": 1,
}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _prepare_out(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists():
        if any(out.iterdir()) and not force:
            raise ConfigurationError(f"output directory {out} is not empty (use --force to overwrite)")
        if force:
            for child in out.iterdir():
                shutil.rmtree(child) if child.is_dir() else child.unlink()
    else:
        out.mkdir(parents=True)
    return out


def _write_manifest(out: Path, command: str, args: argparse.Namespace, *,
                    seeds: dict, inputs: list[str], outputs: list[str],
                    started: float, extra: dict | None = None) -> None:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "command", "_t0")}
    manifest = {
        "tool": "searesponse",
        "version": __version__,
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "format_versions": FORMAT_VERSIONS,
        "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "wall_seconds": time.monotonic() - args._t0,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _box_from_args(args: argparse.Namespace) -> InputBox:
    kwargs = {}
    for name in ("hs", "tp", "vw"):
        bounds = getattr(args, f"box_{name}", None)
        if bounds is not None:
            kwargs[name] = tuple(bounds)
    return InputBox(**kwargs) if kwargs else DEFAULT_BOX


def _sim_config_from_args(args: argparse.Namespace):
    if getattr(args, "sim_config", None):
        return load_sim_config(args.sim_config)
    return DEFAULT_SIM_CONFIG


def _resolve_weather(args: argparse.Namespace) -> tuple[list, dict, list[str]]:
    """Weather records for qoi: from --weather CSV or inline synthesis."""
    if args.weather and args.hours is not None:
        raise ConfigurationError("--weather and --hours are mutually exclusive")
    if args.weather:
        return load_weather(args.weather), {}, [str(args.weather)]
    if args.hours is None:
        raise ConfigurationError("provide either --weather or --hours for inline synthesis")
    weather_seed = args.weather_seed
    if weather_seed is None:
        weather_seed = derive_seed(args.seed, 0xEA)
    return (
        synthesize_weather(args.hours, _box_from_args(args), weather_seed),
        {"weather_seed": weather_seed},
        [],
    )


def cmd_weather(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    if args.weather_mode == "synth":
        records = synthesize_weather(args.hours, _box_from_args(args), args.seed)
        seeds = {"seed": args.seed}
        inputs: list[str] = []
    else:
        records = load_weather(args.path)
        seeds = {}
        inputs = [str(args.path)]
    target = out / "weather.csv"
    write_weather(target, records)
    _write_manifest(out, f"weather {args.weather_mode}", args, seeds=seeds,
                    inputs=inputs, outputs=[str(target)], started=started,
                    extra={"n_records": len(records)})
    print(f"wrote {len(records)} weather records to {target}")
    return EXIT_OK


def cmd_trainset(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    cfg = _sim_config_from_args(args)
    box = _box_from_args(args)
    design = sample_uniform_inputs(args.n, box, args.seed)
    table = build_training_table(design, args.m, cfg, args.seed, threads=args.threads)
    target = out / "training_table.csv"
    write_training_table(target, table)
    config_path = out / "sim_config.json"
    write_sim_config(config_path, cfg)
    _write_manifest(out, "trainset", args, seeds={"seed": args.seed},
                    inputs=[str(args.sim_config)] if args.sim_config else [],
                    outputs=[str(target), str(config_path)], started=started,
                    extra={"n_rows": len(table.rows),
                           "n_train": len(table.train_indices),
                           "n_test": len(table.test_indices)})
    print(f"wrote {len(table.rows)} training rows to {target} "
          f"({len(table.train_indices)} train / {len(table.test_indices)} test)")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    table = load_training_table(args.table)
    family = DistFamily(args.family)
    settings = GPSettings(restarts=args.restarts, max_points=args.max_points)
    model = train_surrogate(table, family, settings, seed=args.seed, mode=args.mode)
    save_surrogate(out, model)
    files = sorted(p.name for p in out.glob("gp_*.json"))
    _write_manifest(out, "train", args, seeds={"seed": args.seed},
                    inputs=[str(args.table)],
                    outputs=[str(out / f) for f in files] + [str(out / "bundle.json")],
                    started=started, extra={"family": family.value, "targets": files})
    print(f"trained {family.value} surrogate ({len(files)} GP models) into {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    table = load_training_table(args.table)
    model = load_surrogate(args.bundle)
    evals = evaluate_surrogate(model, table.test_rows(), include_noise=args.include_noise)
    outputs = []
    summary = {"family": model.family.value, "n_test": len(evals[0].true), "targets": {}}
    for ev in evals:
        path = out / f"eval_{ev.target}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true", "pred_mean", "pred_std"])
            for t, m, s in zip(ev.true, ev.pred_mean, ev.pred_std):
                writer.writerow([repr(float(t)), repr(float(m)), repr(float(s))])
        outputs.append(str(path))
        summary["targets"][ev.target] = {"rmse": ev.rmse, "coverage95": ev.coverage95}
    (out / "eval_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    outputs.append(str(out / "eval_summary.json"))
    _write_manifest(out, "eval", args, seeds={}, inputs=[str(args.table), str(args.bundle)],
                    outputs=outputs, started=started, extra={"summary": summary})
    for ev in evals:
        print(f"{model.family.value}/{ev.target}: rmse={ev.rmse:.6g} coverage95={ev.coverage95:.3f}")
    return EXIT_OK


def cmd_qoi(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    weather, extra_seeds, weather_inputs = _resolve_weather(args)
    if args.source == "simulator":
        model = _sim_config_from_args(args)
        inputs = weather_inputs + ([str(args.sim_config)] if args.sim_config else [])
    else:
        if not args.bundle:
            raise ConfigurationError("--bundle is required for --source surrogate")
        model = load_surrogate(args.bundle)
        inputs = weather_inputs + [str(args.bundle)]
    cfg = QoiConfig(k=args.k, n_hours=len(weather), realizations=args.m,
                    source=args.source, base_seed=args.seed,
                    theta_frozen=args.theta_frozen)
    result = run_qoi(cfg, weather, model, threads=args.threads)
    save_qoi_result(out, result)
    outputs = [str(out / n) for n in ("yk_samples.csv", "rank_summary.csv", "summary.json")]
    _write_manifest(out, "qoi", args, seeds={"seed": args.seed, **extra_seeds},
                    inputs=inputs, outputs=outputs, started=started,
                    extra={"total_count": result.total_count,
                           "yk_mean": float(result.yk_samples.mean())})
    print(f"Y_{args.k} over {len(weather)} hours x {args.m} realizations "
          f"({args.source}): mean={result.yk_samples.mean():.6g}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    out = _prepare_out(args.out, args.force)
    started = time.time()
    a = load_qoi_result(args.candidate)
    b = load_qoi_result(args.reference)
    report = compare_qoi(a, b)
    ranks_path = out / "rank_comparison.csv"
    with ranks_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "a_mean", "a_p2.5", "a_p97.5",
                         "b_mean", "b_p2.5", "b_p97.5", "a_within_b_band"])
        for j in range(report.k):
            inside = report.b_rank_p025[j] <= report.a_rank_means[j] <= report.b_rank_p975[j]
            writer.writerow([
                j + 1,
                repr(float(report.a_rank_means[j])), repr(float(report.a_rank_p025[j])),
                repr(float(report.a_rank_p975[j])), repr(float(report.b_rank_means[j])),
                repr(float(report.b_rank_p025[j])), repr(float(report.b_rank_p975[j])),
                int(inside),
            ])
    samples_path = out / "yk_samples_combined.csv"
    with samples_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source", "realization", "yk"])
        for label, res in (("a", a), ("b", b)):
            for m, value in enumerate(res.yk_samples):
                writer.writerow([label, m, repr(float(value))])
    payload = {
        "k": report.k,
        "a_source": report.a_source,
        "b_source": report.b_source,
        "a_yk": report.a_yk.__dict__,
        "b_yk": report.b_yk.__dict__,
        "relative_mean_difference": report.relative_mean_difference,
        "conservative": report.conservative,
        "band_overlap_fraction": report.band_overlap_fraction,
        "closest_rank": report.closest_rank,
        "format_version": FORMAT_VERSIONS["comparison_report"],
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    _write_manifest(out, "compare", args, seeds={},
                    inputs=[str(args.candidate), str(args.reference)],
                    outputs=[str(report_path), str(ranks_path), str(samples_path)],
                    started=started, extra={"report": payload})
    print(f"relative mean difference: {report.relative_mean_difference:+.4%} "
          f"({'conservative' if report.conservative else 'non-conservative'}); "
          f"closest reference rank: {report.closest_rank}; "
          f"band overlap: {report.band_overlap_fraction:.1%}")
    return EXIT_OK


def _add_box_flags(parser: argparse.ArgumentParser) -> None:
    for name, unit in (("hs", "m"), ("tp", "s"), ("vw", "m/s")):
        parser.add_argument(f"--box-{name}", nargs=2, type=float, metavar=("MIN", "MAX"),
                            help=f"bounds for {name} [{unit}]")


def _add_common(parser: argparse.ArgumentParser, *, seed: bool = True,
                threads: bool = False) -> None:
    parser.add_argument("--out", required=True, help="output directory (created fresh)")
    parser.add_argument("--force", action="store_true",
                        help="overwrite a non-empty output directory")
    if seed:
        parser.add_argument("--seed", type=int, required=True, help="base RNG seed (u64)")
    if threads:
        parser.add_argument("--threads", type=int, default=_default_threads(),
                            help=f"worker threads (default ${THREADS_ENV_VAR} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="searesponse",
        description="Order statistics of marine structural responses: "
                    "stochastic simulation vs. GP surrogate generation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_weather = sub.add_parser("weather", help="generate or ingest hourly weather")
    wsub = p_weather.add_subparsers(dest="weather_mode", required=True)
    p_synth = wsub.add_parser("synth", help="synthesize a correlated hourly sequence")
    p_synth.add_argument("--hours", "--synth-hours", dest="hours", type=int, required=True,
                         help="number of hourly records")
    _add_box_flags(p_synth)
    _add_common(p_synth)
    p_synth.set_defaults(func=cmd_weather)
    p_load = wsub.add_parser("load", help="validate a weather CSV and re-emit it canonically")
    p_load.add_argument("--path", "--weather", dest="path", required=True, help="weather CSV path")
    _add_common(p_load, seed=False)
    p_load.set_defaults(func=cmd_weather)

    p_trainset = sub.add_parser("trainset", help="build the surrogate training table")
    p_trainset.add_argument("--n", type=int, required=True, help="number of design points")
    p_trainset.add_argument("--m", type=int, required=True, help="simulator runs per point")
    p_trainset.add_argument("--sim-config", help="simulator configuration JSON")
    _add_box_flags(p_trainset)
    _add_common(p_trainset, threads=True)
    p_trainset.set_defaults(func=cmd_trainset)

    p_train = sub.add_parser("train", help="train a surrogate bundle from a table")
    p_train.add_argument("--table", required=True, help="training table CSV")
    p_train.add_argument("--family", required=True, choices=[f.value for f in DistFamily])
    p_train.add_argument("--restarts", type=int, default=5,
                         help="hyperparameter search restarts (default 5)")
    p_train.add_argument("--max-points", type=int, default=2000,
                         help="cap on GP training points (seeded subsample, default 2000)")
    p_train.add_argument("--mode", choices=["point", "sample"], default="sample",
                         help="parameter generation mode (default sample)")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="hold-out evaluation of a surrogate bundle")
    p_eval.add_argument("--table", required=True, help="training table CSV (uses the test split)")
    p_eval.add_argument("--bundle", required=True, help="surrogate bundle directory")
    p_eval.add_argument("--include-noise", action="store_true",
                        help="add mean observation noise to predictive intervals")
    _add_common(p_eval, seed=False)
    p_eval.set_defaults(func=cmd_eval)

    p_qoi = sub.add_parser("qoi", help="estimate Y_k over a weather sequence")
    p_qoi.add_argument("--source", required=True, choices=["simulator", "surrogate"])
    p_qoi.add_argument("--weather", help="weather CSV (alternative to --hours)")
    p_qoi.add_argument("--hours", "--synth-hours", dest="hours", type=int,
                       help="synthesize this many hours inline instead of --weather")
    p_qoi.add_argument("--weather-seed", type=int,
                       help="seed for inline synthesis (default: derived from --seed)")
    p_qoi.add_argument("--k", type=int, default=100, help="order statistic rank (default 100)")
    p_qoi.add_argument("--m", type=int, required=True, help="number of realizations")
    p_qoi.add_argument("--sim-config", help="simulator configuration JSON")
    p_qoi.add_argument("--bundle", help="surrogate bundle directory (surrogate source)")
    p_qoi.add_argument("--theta-frozen", action="store_true",
                       help="draw surrogate parameter shifts once per realization "
                            "instead of per hour")
    _add_box_flags(p_qoi)
    _add_common(p_qoi, threads=True)
    p_qoi.set_defaults(func=cmd_qoi)

    p_compare = sub.add_parser("compare", help="compare a candidate Y_k run against a reference")
    p_compare.add_argument("candidate", help="candidate qoi output directory (e.g. surrogate)")
    p_compare.add_argument("reference", help="reference qoi output directory (e.g. simulator)")
    _add_common(p_compare, seed=False)
    p_compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SEARESPONSE_LOGLEVEL", "WARNING"),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    args._t0 = time.monotonic()
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
