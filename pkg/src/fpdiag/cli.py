"""Command-line entry point: ``fpdiag <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, config, pipeline, synthetic
from .errors import FPDiagError
from .ingest import PanelKind

log = logging.getLogger("fpdiag")


def _global_options(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--config", default=default, help="YAML run configuration")
    parser.add_argument("--out-dir", default=default, help="output directory (overrides the config)")
    parser.add_argument("--survey", default=default, help="survey CSV (overrides the config)")
    parser.add_argument("--estimates", default=default, help="model estimates CSV (overrides the config)")
    parser.add_argument("--groups", default=default, help="country grouping CSV (overrides the config)")
    parser.add_argument("--set", action="append", default=default, metavar="SECTION.KEY=VALUE",
                        help="override any config value, e.g. --set numeric.span=0.5")
    parser.add_argument("--force", action="store_true", default=default, help="ignore the stage cache")
    parser.add_argument("-v", "--verbose", action="count", default=default,
                        help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpdiag",
        description="Compare survey observations and model estimates of contraceptive use "
                    "with time-series features and silhouette widths.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, None)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _global_options(p, argparse.SUPPRESS)
        return p

    add("ingest", "parse inputs and write the survey and model panels")
    d = add("diagnose", "trend strength, shape coefficients and silhouettes per panel")
    d.add_argument("--which", choices=("SURVEY", "MODEL", "both"), default="both")
    add("compare", "trend-strength ratios, silhouette differences and residual shapes")
    add("report", "figures, final tables and manifest")
    add("all", "run every stage, reusing cached results")
    s = add("synth", "write the bundled synthetic input files")
    s.add_argument("dest", help="directory for groups.csv, survey.csv and estimates.csv")
    s.add_argument("--seed", type=int, default=20240601)
    add("show-config", "print the effective configuration as YAML")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise config.ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    for flag, key in (("out_dir", "paths.out_dir"), ("survey", "paths.survey_csv"),
                      ("estimates", "paths.estimates_csv"), ("groups", "paths.groups_csv")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(Path(value).resolve())
    return out


def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out_dir, prefix=".probe-"):
            pass
    except OSError as exc:
        raise PermissionError(exc.errno, f"output directory is not writable: {exc.strerror}", str(out_dir)) from None


def _setup_logging(verbose: int) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def run(args) -> int:
    if args.command == "synth":
        paths = synthetic.generate(args.dest, args.seed)
        for p in paths.values():
            print(p)
        return 0

    cfg = config.build(args.config, _overrides(args))
    if args.command == "show-config":
        sys.stdout.write(cfg.dump())
        return 0

    out_dir = Path(cfg.paths.out_dir)
    _check_writable(out_dir)
    runner = pipeline.Runner(cfg, force=bool(args.force))
    if args.command == "ingest":
        pipeline.run_ingest(runner)
    elif args.command == "diagnose":
        kinds = pipeline.KINDS if args.which == "both" else (PanelKind(args.which),)
        for kind in kinds:
            pipeline.run_diagnose(runner, kind)
    elif args.command == "compare":
        pipeline.run_compare(runner)
    elif args.command == "report":
        pipeline.run_report(runner)
    elif args.command == "all":
        runner = pipeline.run_all(cfg, force=bool(args.force))
    for key in runner.ran:
        print(f"ran     {key}")
    for key in runner.skipped:
        print(f"cached  {key}")
    print(f"outputs in {out_dir}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose or 0)
    try:
        return run(args)
    except FPDiagError as exc:
        print(f"fpdiag: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fpdiag: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
