# SPDX-License-Identifier: MIT

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from utils.complex_plane import inverse_stereo, median_normalize
from utils.errors import SolverError
from utils.laplacian import InteriorSolver, assemble_cotangent_laplacian, dirichlet_energy
from utils.mesh_handler import corner_angles, mesh_diameter

logger = logging.getLogger(__name__)

# Circumradius of the pinned anchor triangle, in units of the mesh diameter.
ANCHOR_RADIUS_FACTOR = 10.0


@dataclass
class InitialMap:
    f: np.ndarray
    pole_vertex: int
    quality: float
    anchor_face: int
    flipped: int
    flatten_residual: float


def select_anchor_face(mesh):
    """Face closest to equilateral: the one maximizing its smallest corner angle."""
    return int(np.argmax(corner_angles(mesh).min(axis=1)))


def punctured_laplacian(system, mesh, face):
    """L_D with the stiffness contribution of ``face`` removed."""
    corners = mesh.faces[face]
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j = corners[(k + 1) % 3], corners[(k + 2) % 3]
        half_cot = 0.5 * system.cotangents[face, k]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-half_cot, -half_cot, half_cot, half_cot]
    contribution = sparse.csr_matrix((vals, (rows, cols)), shape=system.L.shape)
    return (system.L - contribution).tocsr()


def spherical_orientation(points, faces):
    """Sign of det[f_a, f_b, f_c] per face; negative means the image triangle is flipped."""
    return np.sign(np.einsum("ij,ij->i", points[faces[:, 0]], np.cross(points[faces[:, 1]], points[faces[:, 2]])))


def initial_spherical_map(mesh, system=None):
    """Big-triangle harmonic flattening followed by inverse stereographic projection.

    The anchor face is removed and its vertices are pinned counter-clockwise to
    an equilateral triangle of circumradius 10 x diameter; the punctured mesh
    is flattened by one Laplace solve. The plane is then translated to zero
    mean and scaled by 1 / median(|h|) so both hemispheres are populated.
    """
    if system is None:
        system = assemble_cotangent_laplacian(mesh)
    n = mesh.n_vertices
    anchor = select_anchor_face(mesh)
    pinned = mesh.faces[anchor]
    free = np.setdiff1d(np.arange(n), pinned)

    radius = ANCHOR_RADIUS_FACTOR * mesh_diameter(mesh)
    pinned_values = radius * np.exp(1j * (np.pi / 2 + 2 * np.pi * np.arange(3) / 3))

    L_tilde = punctured_laplacian(system, mesh, anchor)
    rows = L_tilde[free]
    L_free = rows[:, free]
    b = -(rows[:, pinned] @ pinned_values)
    x_free = InteriorSolver(L_free).solve(b)
    residual = float(np.max(np.abs(L_free @ x_free - b)))
    scale = float(np.max(np.abs(b))) if len(b) else 0.0
    logger.debug("Flattening residual %g (rhs scale %g)", residual, scale)

    z = np.empty(n, dtype=complex)
    z[pinned] = pinned_values
    z[free] = x_free
    if not np.all(np.isfinite(z)):
        raise SolverError("initial-map", "non-finite", "harmonic flattening produced non-finite values")

    z = median_normalize(z - z.mean())
    f = inverse_stereo(z)
    flipped = int(np.sum(spherical_orientation(f, mesh.faces) < 0))
    if flipped:
        logger.warning("Initial map has %d flipped spherical triangle(s) out of %d", flipped, mesh.n_faces)
    quality = dirichlet_energy(system, f)
    logger.info("Initial map: anchor face %d, energy %.6g, %d flipped", anchor, quality, flipped)
    return InitialMap(
        f=f,
        pole_vertex=int(np.argmax(np.abs(z))),
        quality=quality,
        anchor_face=anchor,
        flipped=flipped,
        flatten_residual=residual / scale if scale > 0 else residual,
    )
