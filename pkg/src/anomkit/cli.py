"""Batch command-line front-end.

Subcommands:
  gen-corpus  write a synthetic weather corpus (one CSV per station)
  run         execute a config-driven pipeline and write report artifacts
  score       score a data file with a saved model bundle

Exit codes: 0 success, 1 validation error, 2 runtime/convergence error.
Set ANOMKIT_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .data import write_timeseries_csv
from .errors import AnomkitError, ConfigError, IntegrityError, SchemaError
from .pipeline import PipelineConfig, StageError, run_pipeline, score_with_bundle
from .serialize import atomic_write_text, dumps_model, load_model
from .weather import gen_weather_corpus

logger = logging.getLogger("anomkit")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _setup_logging() -> None:
    level = os.environ.get("ANOMKIT_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_gen_corpus(args) -> int:
    if args.days < 1 or args.stations < 1:
        raise ConfigError("--stations and --days must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = gen_weather_corpus(args.stations, args.days, args.seed)
    for frame in frames:
        write_timeseries_csv([frame], out_dir / f"{frame.station_id}.csv")
    print(
        f"wrote {len(frames)} station files to {out_dir} "
        f"({frames[0].n} ticks each, seed {args.seed})"
    )
    return EXIT_OK


def _write_sweep_csv(path, sweep) -> None:
    rows = ["threshold,precision,recall,f1"]
    rows += [
        ",".join(repr(float(v)) for v in row) for row in sweep
    ]
    atomic_write_text(path, "\n".join(rows) + "\n")


def _write_injections_csv(path, records) -> None:
    lines = ["station_id,start,duration,kind,parameters"]
    for rec in records:
        params = ";".join(
            f"{k}={float(v)!r}" for k, v in sorted(rec.params.items())
        )
        lines.append(f"{rec.station_id},{rec.start},{rec.duration},{rec.kind},{params}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_run(args) -> int:
    cfg = PipelineConfig.from_json_file(args.config)
    if args.seed is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        cfg = PipelineConfig.from_dict(d)
    out_dir = Path(args.out or "run_output")
    out_dir.mkdir(parents=True, exist_ok=True)

    result = run_pipeline(cfg)

    written: list[Path] = []
    try:
        targets = {
            out_dir / "report.json": json.dumps(result.report, indent=2) + "\n",
            out_dir / "model.json": dumps_model(result.model_payload),
        }
        for path, text in targets.items():
            atomic_write_text(path, text)
            written.append(path)
        _write_sweep_csv(out_dir / "sweep.csv", result.sweep)
        written.append(out_dir / "sweep.csv")
        _write_injections_csv(out_dir / "injections.csv", result.injections)
        written.append(out_dir / "injections.csv")
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    test = result.report.get("test") or {}
    summary = (
        f" test f1={test['f1']:.4f}" if "f1" in test else ""
    )
    print(
        f"threshold={result.threshold:.6f} "
        f"calibration f1={result.report['calibration']['f1']:.4f}{summary} "
        f"-> {out_dir}"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    payload = load_model(args.model)
    keys, scores, flags = score_with_bundle(payload, args.data)
    out_path = Path(args.out or "scores.csv")
    key_header = (
        "station_id,timestamp" if payload["mode"] == "timeseries" else "row"
    )
    lines = [f"{key_header},score,flag"]
    for key, score, flag in zip(keys, scores, flags):
        lines.append(",".join([*key, repr(float(score)), str(int(flag))]))
    atomic_write_text(out_path, "\n".join(lines) + "\n")
    print(f"scored {len(keys)} rows -> {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anomkit",
        description="ensemble anomaly detection with synthetic-anomaly "
        "threshold calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-corpus", help="write a synthetic weather corpus")
    gen.add_argument("--stations", type=int, required=True)
    gen.add_argument("--days", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="corpus")
    gen.set_defaults(func=cmd_gen_corpus)

    run = sub.add_parser("run", help="execute a config-driven pipeline")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override config seed")
    run.add_argument("--out", default=None, help="output directory")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="score data with a saved model")
    score.add_argument("--model", required=True)
    score.add_argument("--data", required=True)
    score.add_argument("--out", default=None, help="output CSV path")
    score.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        code = (
            EXIT_VALIDATION
            if isinstance(exc.cause, (ConfigError, SchemaError, FileNotFoundError))
            else EXIT_RUNTIME
        )
        print(f"error in stage {exc.stage!r}: {exc.cause}", file=sys.stderr)
        return code
    except (AnomkitError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
