"""Report assembly, schema validation and file output.

A report is a JSON document. Everything except the ``metadata`` block is
a deterministic function of the resolved config; timestamps, wall-clock
time and the kernel backend live in ``metadata``.
"""
from __future__ import annotations

import csv
import json
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .. import kernels
from .experiments import Outcome, _jsonable

SCHEMA_VERSION = 1


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report_schema.json").read_text())


def build(config: dict, outcome: Outcome, wall_clock: float, status: str = "complete",
          error: str = None) -> dict:
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": config["kind"],
        "status": status,
        "config": config,
        "results": _jsonable(outcome.results),
        "verdicts": [v.to_dict() for v in outcome.verdicts],
        "passed": all(v.passed for v in outcome.verdicts),
        "stats": _jsonable(outcome.stats),
        "series": _jsonable(outcome.series),
        "error": error,
        "metadata": {
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "wall_clock_s": wall_clock,
            "backend": kernels.backend_name(),
        },
    }
    jsonschema.validate(report, load_schema())
    return report


def canonical(report: dict) -> str:
    """Serialized report without the metadata block (for reproducibility checks)."""
    body = {k: v for k, v in report.items() if k != "metadata"}
    return json.dumps(body, sort_keys=True, indent=1)


def write_json(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    return path


def write_timeseries(path, times, values, wide: bool = False) -> Path:
    """CSV with header ``t,shell,value`` (long form) or ``t,x1,...,xN``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values, dtype=float)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if wide:
            w.writerow(["t"] + [f"x{n}" for n in range(1, values.shape[1] + 1)])
            for t, row in zip(times, values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        else:
            w.writerow(["t", "shell", "value"])
            for t, row in zip(times, values):
                for n, v in enumerate(row, start=1):
                    w.writerow([repr(float(t)), n, repr(float(v))])
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_outputs(report: dict, outcome: Outcome, out_dir, wide: bool = False) -> list:
    out_dir = Path(out_dir)
    files = [write_json(report, out_dir / "report.json")]
    for name, table in outcome.tables.items():
        if name == "timeseries":
            files.append(write_timeseries(out_dir / "timeseries.csv", *table, wide=wide))
        else:
            files.append(write_table(out_dir / f"{name}.csv", *table))
    return files


def emit_plot_data(report: dict, which, out_dir) -> list:
    """Write columnar CSV files for the requested series.

    ``psi1``/``psi2`` give ``x,value``; ``norms`` gives ``t`` plus one
    column per norm; ``timeseries`` gives the long ``t,shell,value`` form.
    """
    series = report.get("series") or {}
    missing = [w for w in which if w not in series]
    if missing:
        raise KeyError(f"report has no series {', '.join(missing)}")
    out_dir = Path(out_dir)
    files = []
    for name in which:
        data = series[name]
        if name == "timeseries":
            files.append(write_timeseries(out_dir / "plot_timeseries.csv", data["t"],
                                          data["values"]))
            continue
        # abscissa first; JSON round trips sort the keys
        cols = sorted(data, key=lambda c: c not in ("t", "x"))
        rows = zip(*(data[c] for c in cols))
        files.append(write_table(out_dir / f"plot_{name}.csv", cols, rows))
    return files
