# SPDX-License-Identifier: MIT

import argparse
import os
import sys

from conformal_maps.dem import run_dem
from conformal_maps.diagnostics import energy_comparison
from conformal_maps.initial_map import initial_spherical_map
from conformal_maps.mdem import run_mdem
from utils.errors import ConformalMapError
from utils.laplacian import assemble_cotangent_laplacian
from utils.run_config import (
    AREA_TARGETS,
    DEFAULT_MAX_ITER,
    DEFAULT_RHO,
    DEFAULT_TOL,
    RunConfig,
    configure_logging,
    prepare_mesh,
)

METRICS_ORDER = ["E_D", "E_D_minus_4pi", "mean_dtheta", "sd_dtheta", "iterations", "converged", "wall_time"]


def summarize(report):
    dist = report.distortion
    return {
        "E_D": report.energy,
        "E_D_minus_4pi": report.energy_minus_4pi,
        "mean_dtheta": dist.mean if dist else None,
        "sd_dtheta": dist.sd if dist else None,
        "iterations": report.iterations,
        "converged": report.converged,
        "wall_time": report.wall_time,
    }


def compare_algorithms(path, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, area="one", same_algo=False):
    """Run DEM and MDEM (or MDEM twice) from one shared initial map; returns (results, d_E)."""
    mesh = prepare_mesh(path, area)
    system = assemble_cotangent_laplacian(mesh)
    initial = initial_spherical_map(mesh, system)

    if same_algo:
        first_name = "mdem (repeat)"
        _, first = run_mdem(mesh, rho=DEFAULT_RHO["mdem"], tol=tol, max_iter=max_iter, system=system, initial=initial)
    else:
        first_name = "dem"
        _, first = run_dem(mesh, rho=DEFAULT_RHO["dem"], tol=tol, max_iter=max_iter, system=system, initial=initial)
    _, second = run_mdem(mesh, rho=DEFAULT_RHO["mdem"], tol=tol, max_iter=max_iter, system=system, initial=initial)

    results = {first_name: summarize(first), "mdem": summarize(second)}
    return results, energy_comparison(first, second)


def print_csv_table(results, d_e, title):
    """
    Prints a CSV table where:
      - The first row is a header with "Algorithm" then metric names.
      - Each subsequent row is one algorithm's results.
      - A final line carries d_E = E_D(MDEM) - E_D(other run).
    """
    print(f"Title: {title}")
    print(",".join(["Algorithm"] + METRICS_ORDER))
    for algo, metrics in results.items():
        row = [algo]
        for metric in METRICS_ORDER:
            value = metrics.get(metric, "")
            if isinstance(value, float):
                value = f"{value:.6g}" if metric == "wall_time" else f"{value:.10f}"
            row.append("" if value is None else str(value))
        print(",".join(row))
    print(f"d_E,{d_e:.3e}")


def main(argv=None):
    parser = argparse.ArgumentParser(description="Compare DEM and MDEM on one mesh.")
    parser.add_argument("input_file", type=str, help="Input mesh (.off or .obj).")
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="Convergence tolerance.")
    parser.add_argument("--max-iter", dest="max_iter", type=int, default=DEFAULT_MAX_ITER, help="Iteration cap.")
    parser.add_argument("--area", choices=tuple(AREA_TARGETS), default="one", help="Area normalization.")
    parser.add_argument("--same-algo", action="store_true", help="Run MDEM twice instead of DEM vs MDEM.")
    args = parser.parse_args(argv)
    configure_logging()

    try:
        RunConfig(input_path=args.input_file, tol=args.tol, max_iter=args.max_iter, area_normalization=args.area).validate()
        results, d_e = compare_algorithms(args.input_file, args.tol, args.max_iter, args.area, args.same_algo)
    except (ConformalMapError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    for algo, metrics in results.items():
        print(f"Algorithm: {algo}")
        for metric, value in metrics.items():
            if isinstance(value, float):
                print(f"  {metric}: {value:.6g}")
            else:
                print(f"  {metric}: {value}")
        print()

    print_csv_table(results, d_e, os.path.basename(args.input_file))
    return 0


if __name__ == "__main__":
    sys.exit(main())
