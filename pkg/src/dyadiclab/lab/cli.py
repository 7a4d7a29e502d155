"""Command-line entry point.

    dyadiclab <kind> [--config FILE] [--set key.path=value ...]
                     [--out DIR] [--seed N] [--workers N]
    dyadiclab plot-data REPORT --which psi1 psi2 [--out DIR]

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage error,
3 runtime failure (a partial report is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import traceback
from pathlib import Path

from . import report as rp
from .config import KINDS, PLOT_SERIES, ConfigError, ExperimentConfig, load_file, resolve
from .experiments import RUNNERS, Outcome

logger = logging.getLogger("dyadiclab")

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def run(config: ExperimentConfig, out_dir=None, write: bool = True):
    """Run one experiment; returns (report, exit code)."""
    cfg = config.to_dict()
    out_dir = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    t0 = time.perf_counter()
    try:
        outcome = RUNNERS[cfg["kind"]](config)
    except Exception as exc:  # report what we have, then signal runtime failure
        logger.error("%s failed: %s", cfg["kind"], exc)
        report = rp.build(cfg, Outcome(), time.perf_counter() - t0, "failed",
                          "".join(traceback.format_exception_only(type(exc), exc)).strip())
        if write:
            rp.write_json(report, out_dir / "report.json")
        return report, EXIT_RUNTIME
    report = rp.build(cfg, outcome, time.perf_counter() - t0)
    if write:
        rp.write_outputs(report, outcome, out_dir, cfg["output"]["wide_csv"])
        if cfg["output"]["plot_data"]:
            rp.emit_plot_data(report, cfg["output"]["plot_data"], out_dir)
    return report, EXIT_OK if report["passed"] else EXIT_VERDICT


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyadiclab", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--out", help="output directory (output.dir)")
        sp.add_argument("--seed", type=int, help="random seed (seed)")
        sp.add_argument("--workers", type=int, help="worker processes (workers)")
        sp.add_argument("--print-config", action="store_true",
                        help="print the resolved config and exit")
    pp = sub.add_parser("plot-data", help="write plot columns from a report")
    pp.add_argument("report")
    pp.add_argument("--which", nargs="*", default=[], choices=PLOT_SERIES)
    pp.add_argument("--out", default=".")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "plot-data":
        try:
            report = json.loads(Path(args.report).read_text())
            files = rp.emit_plot_data(report, args.which, args.out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for f in files:
            print(f)
        return EXIT_OK

    overrides = [("kind", args.command)]
    try:
        sources = [load_file(args.config)] if args.config else []
        if sources and sources[0].get("kind", args.command) != args.command:
            raise ConfigError("kind", f"config says {sources[0]['kind']!r}, "
                                      f"command is {args.command!r}")
        overrides += list(args.set)
        for key, val in (("output.dir", args.out), ("seed", args.seed),
                         ("workers", args.workers)):
            if val is not None:
                overrides.append((key, val))
        config = resolve(sources, overrides)
    except (ConfigError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.print_config:
        print(json.dumps(config.to_dict(), indent=1, sort_keys=True))
        return EXIT_OK
    report, code = run(config)
    for v in report["verdicts"]:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['contract']}  value={v['value']}")
    if report["error"]:
        print(f"runtime failure: {report['error']}", file=sys.stderr)
    print(f"report: {Path(config['output']['dir']) / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
