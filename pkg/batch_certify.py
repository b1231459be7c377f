# SPDX-License-Identifier: MIT

import argparse
import csv
import glob
import logging
import os
import sys

import numpy as np

from conformal_maps.diagnostics import BATCH_COLUMNS, DEM_COLUMNS
from utils.batch_executor import process_meshes
from utils.errors import ConformalMapError
from utils.run_config import RunConfig, add_solver_arguments, configure_logging

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("cert_rho", "mean_dtheta", "sd_dtheta", "d_E")


def find_meshes(directory, pattern):
    if not os.path.isdir(directory):
        raise ConformalMapError("cli", "directory", f"{directory!r} is not a readable directory")
    return sorted(p for p in glob.glob(os.path.join(directory, pattern)) if os.path.isfile(p))


def write_rows(rows, path, with_dem=False):
    columns = list(BATCH_COLUMNS) + (list(DEM_COLUMNS) if with_dem else []) + ["status"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, restval="", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def aggregate(rows):
    """Mean and population SD of the summary columns over successful rows."""
    summary = {}
    ok = [row for row in rows if row.get("status") == "ok"]
    for column in SUMMARY_COLUMNS:
        values = [row[column] for row in ok if isinstance(row.get(column), float)]
        if values:
            summary[column] = (float(np.mean(values)), float(np.std(values)), len(values))
    return summary


def main(argv=None):
    parser = argparse.ArgumentParser(description="Run MDEM and its certificate over a directory of meshes.")
    parser.add_argument("directory", type=str, help="Directory holding the meshes.")
    parser.add_argument("--pattern", type=str, default="*.off", help="Glob pattern for mesh files.")
    parser.add_argument("--output", type=str, default=None, help="CSV output path.")
    parser.add_argument("--workers", type=int, default=1, help="Number of worker processes.")
    parser.add_argument("--with-dem", dest="with_dem", action="store_true", help="Also run DEM and record d_E.")
    add_solver_arguments(parser, algo=False)
    args = parser.parse_args(argv)
    configure_logging()

    try:
        config = RunConfig.from_args(argparse.Namespace(input_path=args.directory, **vars(args)))
        paths = find_meshes(args.directory, args.pattern)
    except ConformalMapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if not paths:
        logger.warning("No meshes matching %r in %s", args.pattern, args.directory)
        print(f"Warning: no meshes matching {args.pattern!r} in {args.directory}")

    rows = process_meshes(paths, config, workers=config.workers)
    if args.output:
        write_rows(rows, args.output, config.with_dem)

    n_failed = sum(1 for row in rows if row.get("status") != "ok")
    n_certified = sum(1 for row in rows if isinstance(row.get("cert_rho"), float) and row["cert_rho"] < 1.0)
    print(f"Completed {len(rows)} meshes: {n_certified} certified, {n_failed} failed")
    for column, (mean, sd, count) in aggregate(rows).items():
        print(f"  {column}: mean {mean:.6g}, SD {sd:.6g} (over {count})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
