"""Deterministic CSV/JSON output for experiment results.

CSV columns, one row per trajectory record (trajectory step, sweep point or
select outcome)::

    experiment, n, k, K, a, step, p_first_zero, p_marked_given_zero,
    marked_amp_abs_branch0, marked_amp_abs_branch1, seed

Floats are written with 12 significant digits. The JSON document carries a
``schema`` version, the full config echo, the trajectory, the top basis
states of the final state, derived scalars, invariant checks and warnings.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

from .experiments import ExperimentConfig, ExperimentResult

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "experiment", "n", "k", "K", "a", "step", "p_first_zero", "p_marked_given_zero",
    "marked_amp_abs_branch0", "marked_amp_abs_branch1", "seed",
)


def fmt_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    out = f"{x:.12g}"
    return "0" if out == "-0" else out


def _round(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        if not math.isfinite(x):
            return None
        return float(fmt_float(x))
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "a_policy":
            v = None if v is None else str(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def csv_rows(result: ExperimentResult) -> list[list[str]]:
    cfg = result.config
    name = cfg.label or cfg.kind
    rows = []
    for rec in result.trajectory:
        rows.append([
            name,
            str(rec.n if rec.n is not None else cfg.n),
            str(cfg.k),
            str(cfg.K),
            fmt_float(rec.a),
            str(rec.step),
            fmt_float(rec.p_first_zero),
            fmt_float(rec.p_marked_given_zero),
            fmt_float(rec.marked_amplitude_abs),
            fmt_float(rec.marked_amplitude_abs_branch1),
            str(cfg.seed),
        ])
    return rows


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(csv_rows(result))
    return buf.getvalue()


def to_json(result: ExperimentResult) -> str:
    doc = {
        "schema": SCHEMA_VERSION,
        "config": config_to_dict(result.config),
        "trajectory": [asdict(r) for r in result.trajectory],
        "final_state_summary": result.final_state_summary,
        "derived_scalars": result.derived_scalars,
        "checks": result.checks,
        "warnings": result.warnings,
    }
    return json.dumps(_round(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render(result: ExperimentResult, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(result)
    if fmt == "json":
        return to_json(result)
    raise ValueError(f"unknown format {fmt!r}")


def write_results(result: ExperimentResult, fmt: str, path) -> None:
    path = Path(path)
    text = render(result, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc
