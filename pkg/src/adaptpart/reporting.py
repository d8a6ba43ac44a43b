"""Run artifacts: iteration table CSV, partition trace JSON, run summary."""
from __future__ import annotations

import json
import os

import numpy as np

from .engine import SolveResult
from .model import RecourseModel
from .spaces import (GaussianTechnologySpace, HalfspaceRegion, Interval,
                     Partition, ScenarioSet, UncertaintySpace)

CSV_HEADER = "iter,lb,ub,gap_pct,cells"


def _fmt(value) -> str:
    if value is None:
        return ""
    return "%.6g" % value


def iteration_csv_text(records, n_first: int) -> str:
    """Fixed-format CSV of the iteration history; byte-stable for a given
    run so identical runs produce identical files."""
    cols = CSV_HEADER + "".join(",x%d" % j for j in range(n_first))
    lines = [cols]
    for r in records:
        gap_pct = None if r.gap is None else 100.0 * r.gap
        cells = [str(r.index), _fmt(r.lower_bound), _fmt(r.upper_bound),
                 _fmt(gap_pct), str(r.cell_count)]
        cells.extend(_fmt(float(v)) for v in r.incumbent)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _cell_entry(cell, space: UncertaintySpace) -> dict:
    entry: dict = {"label": cell.label, "mass": cell.mass, "estimate": cell.estimate}
    if cell.sample_count is not None:
        entry["sample_count"] = cell.sample_count
    geo = cell.geometry
    if isinstance(geo, ScenarioSet):
        entry["geometry"] = {"type": "scenarios", "indices": list(geo.indices)}
        entry["h_mean"] = [float(v) for v in cell.h_mean]
    elif isinstance(geo, Interval):
        entry["geometry"] = {"type": "interval", "lo": geo.lo, "hi": geo.hi}
        entry["midpoint"] = 0.5 * (geo.lo + geo.hi)
    elif isinstance(geo, HalfspaceRegion):
        entry["geometry"] = {
            "type": "region",
            "halfspaces": [{"normal": list(a), "offset": b} for a, b in geo.halfspaces],
        }
        if isinstance(space, GaussianTechnologySpace):
            entry["xi_mean"] = [float(v) for v in space.cell_mean_xi(cell)]
    return entry


def partition_trace(partitions, space: UncertaintySpace) -> list[dict]:
    """One entry per iteration: the partition the master was solved on."""
    return [{"iteration": t + 1,
             "cells": [_cell_entry(c, space) for c in part.cells]}
            for t, part in enumerate(partitions)]


def run_summary(result: SolveResult) -> dict:
    last = result.records[-1]
    return {
        "termination": result.termination,
        "iterations": result.stats["iterations"],
        "wall_time_s": result.stats["wall_time_s"],
        "master_solves": result.stats["master_solves"],
        "lp_solves": result.stats["lp_solves"],
        "final_lb": last.lower_bound,
        "final_ub_best": result.best_upper,
        "final_gap_pct": None if last.gap is None else 100.0 * last.gap,
        "x_star": [float(v) for v in result.x_star],
        "final_cells": len(result.partition),
    }


def write_run_report(out_dir: str, result: SolveResult,
                     space: UncertaintySpace, model: RecourseModel) -> dict:
    """Write iterations.csv, partitions.json, and summary.json; returns the
    path of each artifact."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "iterations": os.path.join(out_dir, "iterations.csv"),
        "partitions": os.path.join(out_dir, "partitions.json"),
        "summary": os.path.join(out_dir, "summary.json"),
    }
    with open(paths["iterations"], "w", encoding="utf-8") as fh:
        fh.write(iteration_csv_text(result.records, model.n_first))
    with open(paths["partitions"], "w", encoding="utf-8") as fh:
        json.dump(partition_trace(result.partitions, space), fh, indent=2)
        fh.write("\n")
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump(run_summary(result), fh, indent=2)
        fh.write("\n")
    return paths
