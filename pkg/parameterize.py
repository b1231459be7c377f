# SPDX-License-Identifier: MIT

import argparse
import csv
import json
import logging
import sys

from conformal_maps.dem import run_dem
from conformal_maps.diagnostics import HISTORY_COLUMNS
from conformal_maps.mdem import run_mdem
from utils.errors import ConformalMapError
from utils.laplacian import assemble_cotangent_laplacian, dump_matrix
from utils.mesh_handler import mesh_format_from_path, write_mesh
from utils.run_config import RunConfig, add_solver_arguments, configure_logging, prepare_mesh

logger = logging.getLogger(__name__)

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def write_report(report, path, include_timing=False):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_dict(include_timing=include_timing), f, indent=2, allow_nan=False)
        f.write("\n")


def write_history(report, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=HISTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.history_rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def parameterize(config):
    """Load, validate, solve and write outputs. Returns the exit status."""
    mesh = prepare_mesh(config.input_path, config.area_normalization)
    system = assemble_cotangent_laplacian(mesh)
    if config.dump_laplacian:
        dump_matrix(system, config.dump_laplacian)

    if config.algorithm == "dem":
        f, report = run_dem(mesh, rho=config.rho, tol=config.tol, max_iter=config.max_iter, system=system)
    else:
        f, report = run_mdem(
            mesh, rho=config.rho, tol=config.tol, max_iter=config.max_iter, deflate=config.deflate, system=system,
        )

    if config.output_path:
        write_mesh(mesh.with_vertices(f), config.output_path, mesh_format_from_path(config.input_path))
        logger.info("Wrote spherical mesh to %s", config.output_path)
    if config.report_path:
        write_report(report, config.report_path, config.include_timing)
    if config.history_path:
        write_history(report, config.history_path)

    cert = report.certificate
    print(f"Algorithm: {report.algorithm}")
    print(f"Iterations: {report.iterations} (converged: {report.converged})")
    print(f"E_D: {report.energy:.10f}  E_D - 4pi: {report.energy_minus_4pi:.10f}")
    if report.distortion is not None:
        print(f"d_theta mean: {report.distortion.mean:.6f}  SD: {report.distortion.sd:.6f}")
    if cert is not None:
        print(f"Certificate: eta={cert.eta:.6f} rho={cert.spectral_radius:.6f} "
              f"{'SATISFIED' if cert.satisfied else 'VIOLATED'}")
    return EXIT_CONVERGED if report.converged else EXIT_NOT_CONVERGED


def main(argv=None):
    parser = argparse.ArgumentParser(description="Compute a spherical conformal parameterization of a genus-zero mesh.")
    parser.add_argument("input_path", type=str, help="Input mesh (.off or .obj).")
    parser.add_argument("--out", dest="output_path", type=str, default=None, help="Output spherical mesh path.")
    parser.add_argument("--report", dest="report_path", type=str, default=None, help="JSON report path.")
    parser.add_argument("--history", dest="history_path", type=str, default=None, help="CSV iteration history path.")
    add_solver_arguments(parser)
    parser.add_argument("--dump-laplacian", dest="dump_laplacian", type=str, default=None,
                        help="Write L_D in MatrixMarket format to this path.")
    parser.add_argument("--no-deflation", dest="deflate", action="store_false",
                        help="Iterate MDEM with A2 instead of the deflated operator.")
    parser.add_argument("--timing", dest="include_timing", action="store_true",
                        help="Include wall time in the JSON report.")
    args = parser.parse_args(argv)
    configure_logging()

    try:
        return parameterize(RunConfig.from_args(args))
    except (ConformalMapError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
