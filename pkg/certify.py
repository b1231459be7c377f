# SPDX-License-Identifier: MIT

import argparse
import sys

from conformal_maps.diagnostics import convergence_certificate, track_eta
from conformal_maps.initial_map import initial_spherical_map
from conformal_maps.mdem import MdemState, build_transfer_operators, burn_in, deflation_vector
from utils.complex_plane import stereo_project
from utils.errors import ConformalMapError
from utils.laplacian import assemble_cotangent_laplacian
from utils.run_config import DEFAULT_BURN_IN, RunConfig, add_solver_arguments, configure_logging, prepare_mesh

EXIT_SATISFIED = 0
EXIT_ERROR = 1
EXIT_VIOLATED = 2


def certify(config):
    """Build the MDEM operators, burn in to estimate eta, and evaluate rho(gamma^2 |A2_hat| A1)."""
    mesh = prepare_mesh(config.input_path, config.area_normalization)
    system = assemble_cotangent_laplacian(mesh)
    initial = initial_spherical_map(mesh, system)
    ops = build_transfer_operators(system, mesh, stereo_project(initial.f), config.rho)
    defl = deflation_vector(ops)
    state = burn_in(ops, defl, MdemState(h1=ops.h1_0.copy(), h2=ops.h2_0.copy()), config.burn_in)
    cert = convergence_certificate(defl, ops, track_eta(state.scaled_minima))

    print(f"n: {mesh.n_vertices}  m1: {ops.m1}  m2: {ops.m2}")
    print(f"eta: {cert.eta:.6f}")
    print(f"gamma: {cert.gamma:.6f}")
    print(f"rho(gamma^2 |A2_hat| A1): {cert.spectral_radius:.6f} ({cert.method})")
    print("SATISFIED" if cert.satisfied else "VIOLATED")
    return EXIT_SATISFIED if cert.satisfied else EXIT_VIOLATED


def main(argv=None):
    parser = argparse.ArgumentParser(description="Check the MDEM convergence certificate for a mesh.")
    parser.add_argument("input_path", type=str, help="Input mesh (.off or .obj).")
    add_solver_arguments(parser, algo=False, iterations=False)
    parser.add_argument("--burn-in", dest="burn_in", type=int, default=DEFAULT_BURN_IN,
                        help="MDEM steps used to estimate eta.")
    args = parser.parse_args(argv)
    configure_logging()

    try:
        return certify(RunConfig.from_args(args))
    except (ConformalMapError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
