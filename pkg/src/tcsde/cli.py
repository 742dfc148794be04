"""Command-line entry point: run rate experiments, dump seeded sample paths.

Config files are flat ``key = value`` text (see README for the schema and a
committed example). Reports are written as report.json plus report.csv with
round-trip float formatting; existing files are never overwritten without
--force. Exit codes: 0 success, 2 configuration problems, 3 runtime contract
breaches.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .baseline import em_simulate, write_em_csv
from .brownian import generate_path
from .diffusion import SMOOTH
from .errors import ConfigError, ExperimentError, PathExhaustedError, TcsdeError
from .experiment import (
    PURPOSE_EULER_MARUYAMA,
    PURPOSE_TIME_CHANGE,
    SCHEME_COMPARE,
    SCHEME_EULER_MARUYAMA,
    ExperimentConfig,
    compare_schemes,
    default_jobs,
    run_experiment,
)
from .timechange import (
    SamplePath,
    build_time_change,
    required_horizon,
    write_solution_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_LIST_KEYS = {"params", "resolutions"}


def parse_config_file(path: str | Path) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment, lists use commas."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    mapping: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in mapping:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = (
            [v.strip() for v in value.split(",")] if key in _LIST_KEYS else value
        )
    return mapping


def _load_config(path: str, overrides: argparse.Namespace) -> ExperimentConfig:
    mapping = parse_config_file(path)
    if overrides.seed is not None:
        mapping["master_seed"] = overrides.seed
    if overrides.samples is not None:
        mapping["samples"] = overrides.samples
    if getattr(overrides, "resolutions", None):
        mapping["resolutions"] = overrides.resolutions.split(",")
    return ExperimentConfig.from_mapping(mapping)


def _prepare_outputs(out_dir: str, names: list[str], force: bool) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not force:
        for name in names:
            if (out / name).exists():
                raise ConfigError(
                    f"output file {out / name} already exists; pass --force to overwrite"
                )
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, args: argparse.Namespace, config: ExperimentConfig) -> None:
    manifest = {
        "config_path": str(Path(args.config).resolve()),
        "output_dir": str(out.resolve()),
        "overrides": {
            "seed": args.seed,
            "samples": args.samples,
            "resolutions": getattr(args, "resolutions", None),
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "tool_version": f"tcsde {__version__}",
        "effective_config": config.to_mapping(),
    }
    _write_json(out / "manifest.json", manifest)


def _print_report(report, coeff, stream=None) -> None:
    stream = stream if stream is not None else sys.stdout
    orders = report.theoretical_orders
    overlay = orders["smooth"] if coeff.smoothness == SMOOTH else orders["holder"]
    print(
        f"[{report.scheme}] fitted order {report.fitted_order:.4f} "
        f"(stderr {report.fit_stderr:.4f}); guaranteed overlay order {overlay:.4f}",
        file=stream,
    )
    for n, err, se in report.per_resolution:
        print(f"  n={n:>6d}  mean_error={err:.6e}  stderr={se:.2e}", file=stream)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config, args)
    coeff = config.build_coefficient()
    out = _prepare_outputs(args.out, ["report.json", "report.csv"], args.force)
    jobs = args.jobs if args.jobs else default_jobs()
    if config.scheme == SCHEME_COMPARE:
        comparison = compare_schemes(config, jobs=jobs)
        _write_json(out / "report.json", comparison.to_json_dict())
        rows = [["scheme"] + comparison.time_change.csv_rows()[0]]
        for name, rep in (
            ("time-change", comparison.time_change),
            ("euler-maruyama", comparison.euler_maruyama),
        ):
            rows.extend([name] + r for r in rep.csv_rows()[1:])
        _write_csv(out / "report.csv", rows)
        _print_report(comparison.time_change, coeff)
        _print_report(comparison.euler_maruyama, coeff)
    else:
        report = run_experiment(config, jobs=jobs)
        _write_json(out / "report.json", report.to_json_dict())
        _write_csv(out / "report.csv", report.csv_rows())
        _print_report(report, coeff)
    _write_manifest(out, args, config)
    return EXIT_OK


def _write_csv(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def cmd_dump_path(args: argparse.Namespace) -> int:
    config = _load_config(args.config, args)
    if not 0 <= args.sample < config.samples:
        raise ConfigError(
            f"sample: index {args.sample} outside the configured range "
            f"[0, {config.samples})"
        )
    n = args.n
    if n != config.ref_resolution and n not in config.resolutions:
        raise ConfigError(
            f"n: {n} is neither in the configured ladder {list(config.resolutions)} "
            f"nor the reference resolution {config.ref_resolution}"
        )
    name = f"path-{args.sample}-{n}.csv"
    out = _prepare_outputs(args.out, [name], args.force)
    coeff = config.build_coefficient()
    factor = config.ref_resolution // n
    if config.scheme == SCHEME_EULER_MARUYAMA:
        fine = generate_path(
            config.ref_resolution,
            config.sde_horizon + 2.0 / min(config.resolutions),
            0.0,
            config.master_seed,
            args.sample,
            purpose=PURPOSE_EULER_MARUYAMA,
        )
        em = em_simulate(coeff, fine.subsample(factor), config.sde_horizon, config.x0)
        with (out / name).open("w", newline="") as fh:
            write_em_csv(em, fh)
    else:
        # match the experiment's coupling: the dumped path at resolution n is
        # built on the subsample of the same seeded fine driver
        horizon = required_horizon(coeff, config.sde_horizon, min(config.resolutions + (n,)))
        fine = generate_path(
            config.ref_resolution,
            horizon,
            config.x0,
            config.master_seed,
            args.sample,
            purpose=PURPOSE_TIME_CHANGE,
        )
        while True:
            try:
                coarse = fine.subsample(factor)
                tc = build_time_change(coarse, coeff, config.sde_horizon)
                break
            except PathExhaustedError:
                horizon *= 1.5
                fine = fine.extended(horizon)
        sp = SamplePath(driver=coarse, time_change=tc, sde_horizon=config.sde_horizon)
        with (out / name).open("w", newline="") as fh:
            write_solution_csv(sp, fh)
    print(f"wrote {out / name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcsde",
        description="Time-change discretization of driftless scalar SDEs: "
        "strong-rate experiments and path dumps.",
    )
    parser.add_argument("--version", action="version", version=f"tcsde {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a rate experiment from a config file")
    run.add_argument("config", help="path to a flat key = value config file")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--samples", type=int, default=None, help="override sample count")
    run.add_argument(
        "--resolutions", default=None, help="override the ladder, comma-separated"
    )
    run.add_argument("--out", default=".", help="output directory (default: .)")
    run.add_argument("--force", action="store_true", help="overwrite existing reports")
    run.add_argument(
        "--jobs", type=int, default=0, help="worker processes (default: all cores)"
    )
    run.set_defaults(func=cmd_run)

    dump = sub.add_parser("dump-path", help="dump one seeded sample path as CSV")
    dump.add_argument("config", help="path to a flat key = value config file")
    dump.add_argument("--sample", type=int, required=True, help="sample index")
    dump.add_argument("--n", type=int, required=True, help="resolution (ladder or ref)")
    dump.add_argument("--seed", type=int, default=None, help="override master_seed")
    dump.add_argument("--samples", type=int, default=None, help="override sample count")
    dump.add_argument("--out", default=".", help="output directory (default: .)")
    dump.add_argument("--force", action="store_true", help="overwrite existing dumps")
    dump.set_defaults(func=cmd_dump_path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except TcsdeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
