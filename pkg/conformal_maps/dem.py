# SPDX-License-Identifier: MIT
"""Alternating hemisphere iteration with index sets recomputed every sweep."""

import logging
import time
from dataclasses import dataclass

import numpy as np

from conformal_maps.diagnostics import RunReport, mesh_fingerprint, safe_angle_distortion
from conformal_maps.initial_map import initial_spherical_map
from utils.complex_plane import inverse_stereo, invert_plane, stereo_project
from utils.errors import PartitionError
from utils.laplacian import assemble_cotangent_laplacian, dirichlet_energy, solve_interior

logger = logging.getLogger(__name__)

DEFAULT_RHO = 1.1
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1000
# Energy increases smaller than this are treated as round-off.
ENERGY_INCREASE_TOL = 1e-8


@dataclass
class IndexPartition:
    """I_s = {|h_i| < rho}; B_s' its complement; B_s the part of B_s' adjacent to I_s; exterior = B_s' minus B_s."""

    interior: np.ndarray
    boundary_prime: np.ndarray
    boundary: np.ndarray
    exterior: np.ndarray
    rho: float

    @property
    def n_s(self):
        return len(self.interior)

    @property
    def m_s(self):
        return len(self.boundary)


@dataclass
class Sweep:
    h: np.ndarray
    partition: IndexPartition
    residual: float
    change: float


def partition_indices(mesh, h, rho):
    h = np.asarray(h)
    if not rho > 1:
        raise PartitionError("dem", "rho", f"radius must exceed 1, got {rho}")
    mod = np.abs(h)
    if not np.all(np.isfinite(mod)):
        raise PartitionError("dem", "non-finite", "cannot partition a vector with non-finite entries")

    inside = mod < rho
    interior = np.flatnonzero(inside)
    boundary_prime = np.flatnonzero(~inside)
    if len(interior) == 0:
        raise PartitionError("dem", "empty-interior", f"no vertex has |h| < rho = {rho} (min |h| = {mod.min():.6g})")
    if len(boundary_prime) == 0:
        raise PartitionError("dem", "empty-boundary", f"every vertex has |h| < rho = {rho} (max |h| = {mod.max():.6g})")

    touching = (mesh.adj_sym @ inside.astype(float)) > 0
    boundary = boundary_prime[touching[boundary_prime]]
    exterior = boundary_prime[~touching[boundary_prime]]
    if len(boundary) == 0:
        raise PartitionError("dem", "empty-boundary", "no vertex outside the disc is adjacent to the interior")
    return IndexPartition(interior=interior, boundary_prime=boundary_prime, boundary=boundary, exterior=exterior, rho=rho)


def dem_sweep(system, mesh, h, rho, s=1):
    """One hemisphere sweep: invert, partition, solve L_s h_I = -B_s h_B.

    Entries outside I_s keep their inverted values. ``residual`` is the
    harmonic residual relative to max |h_B|; ``change`` is the 2-norm of the
    update of h_I.
    """
    if s not in (1, 2):
        raise ValueError(f"hemisphere tag must be 1 or 2, got {s}")
    inverted = invert_plane(h)
    partition = partition_indices(mesh, inverted, rho)
    solved, residual = solve_interior(system, partition.interior, partition.boundary, inverted)
    scale = float(np.max(np.abs(inverted[partition.boundary])))
    change = float(np.linalg.norm(solved[partition.interior] - inverted[partition.interior]))
    logger.debug(
        "Sweep %d: n_s=%d m_s=%d exterior=%d residual=%.3g change=%.3g",
        s, partition.n_s, partition.m_s, len(partition.exterior), residual, change,
    )
    return Sweep(h=solved, partition=partition, residual=residual / scale if scale > 0 else residual, change=change)


def run_dem(mesh, rho=DEFAULT_RHO, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, system=None, initial=None):
    """Repeat paired sweeps until the Dirichlet energy settles.

    Stops when |E_k - E_{k-1}| < tol * max(1, E_k), with E_0 the energy of the
    initial map. Non-convergence is reported on the RunReport, not raised.
    """
    start = time.perf_counter()
    if system is None:
        system = assemble_cotangent_laplacian(mesh)
    if initial is None:
        initial = initial_spherical_map(mesh, system)

    f = initial.f
    h = stereo_project(f)
    previous = initial.quality
    energies, residuals_h1, residuals_h2, harmonic = [], [], [], []
    sizes = {}
    converged = False
    increases = 0

    for k in range(1, max_iter + 1):
        first = dem_sweep(system, mesh, h, rho, s=1)
        second = dem_sweep(system, mesh, first.h, rho, s=2)
        h = second.h
        f = inverse_stereo(h)
        energy = dirichlet_energy(system, f)

        energies.append(energy)
        residuals_h1.append(first.change)
        residuals_h2.append(second.change)
        harmonic.append(max(first.residual, second.residual))
        sizes = {
            "n1": first.partition.n_s, "m1": first.partition.m_s,
            "n2": second.partition.n_s, "m2": second.partition.m_s,
        }
        if energy > previous + ENERGY_INCREASE_TOL:
            increases += 1
            logger.debug("Energy increased at iteration %d: %.12g -> %.12g", k, previous, energy)
        logger.debug("DEM iteration %d: E_D=%.12g", k, energy)

        if abs(energy - previous) < tol * max(1.0, energy):
            converged = True
            previous = energy
            break
        previous = energy

    iterations = len(energies)
    if converged:
        logger.info("DEM converged after %d iterations, E_D=%.10g", iterations, previous)
    else:
        logger.warning("DEM did not converge within %d iterations", max_iter)
    if increases:
        logger.warning("DEM energy increased in %d of %d iterations", increases, iterations)

    final_energy = energies[-1] if energies else initial.quality
    report = RunReport(
        algorithm="dem",
        mesh_id=mesh_fingerprint(mesh),
        n=mesh.n_vertices,
        n_faces=mesh.n_faces,
        rho=rho,
        tol=tol,
        max_iter=max_iter,
        energies=energies,
        energy=final_energy,
        initial_energy=initial.quality,
        residuals_h1=residuals_h1,
        residuals_h2=residuals_h2,
        harmonic_residuals=harmonic,
        converged=converged,
        iterations=iterations,
        energy_increases=increases,
        flipped_initial=initial.flipped,
        delaunay=system.delaunay_flag,
        distortion=safe_angle_distortion(mesh, f),
        **sizes,
    )
    report.wall_time = time.perf_counter() - start
    return f, report
