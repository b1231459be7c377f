# SPDX-License-Identifier: MIT

import logging
from dataclasses import dataclass

import numpy as np
import scipy.io
from scipy import sparse
from scipy.sparse.linalg import splu

from utils.errors import GeometryError, PartitionError, SolverError

logger = logging.getLogger(__name__)

MIN_ANGLE = 1e-12
# Relative tolerance for calling an off-diagonal weight nonpositive.
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class LaplacianSystem:
    """Cotangent Laplacian L_D of a mesh.

    ``weights[e]`` is the off-diagonal entry w_ij = -1/2 (cot a_ij + cot a_ji)
    of edge ``edges[e]``; ``cotangents[f, k]`` is the cotangent of the angle at
    corner k of face f. ``delaunay_flag`` holds when every w_ij <= 0.
    """

    L: sparse.csr_matrix
    edges: np.ndarray
    weights: np.ndarray
    cotangents: np.ndarray
    delaunay_flag: bool

    @property
    def n(self):
        return self.L.shape[0]

    @property
    def max_weight(self):
        return float(self.weights.max()) if len(self.weights) else 0.0


def assemble_cotangent_laplacian(mesh):
    n = mesh.n_vertices
    faces = mesh.faces
    points = mesh.vertices
    cotangents = np.empty(faces.shape, dtype=float)
    rows, cols, vals = [], [], []
    for corner in range(3):
        apex = faces[:, corner]
        i = faces[:, (corner + 1) % 3]
        j = faces[:, (corner + 2) % 3]
        u = points[i] - points[apex]
        v = points[j] - points[apex]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.einsum("ij,ij->i", u, v)
        angle = np.arctan2(cross, dot)
        bad = np.flatnonzero((angle < MIN_ANGLE) | (angle > np.pi - MIN_ANGLE))
        if len(bad):
            raise GeometryError(
                "laplacian", "degenerate-angle",
                f"face {int(bad[0])} has a corner angle within {MIN_ANGLE:g} rad of 0 or pi",
            )
        cot = dot / cross
        cotangents[:, corner] = cot
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([-0.5 * cot, -0.5 * cot])

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off.sum_duplicates()
    diagonal = -np.asarray(off.sum(axis=1)).ravel()
    # one COO assembly so zero weights (right angles) stay in the pattern
    diag_index = np.arange(n)
    L = sparse.coo_matrix(
        (np.concatenate([vals, diagonal]), (np.concatenate([rows, diag_index]), np.concatenate([cols, diag_index]))),
        shape=(n, n),
    ).tocsr()
    L.sum_duplicates()
    L.sort_indices()

    edges = mesh.edges
    weights = np.asarray(off[edges[:, 0], edges[:, 1]]).ravel()
    scale = np.abs(weights).max() if len(weights) else 1.0
    delaunay = bool(np.all(weights <= WEIGHT_TOL * scale))
    if not delaunay:
        logger.warning(
            "Mesh is not Delaunay: %d of %d cotangent weights are positive (max %g); "
            "nonnegativity of the transfer operators is checked, not assumed.",
            int(np.sum(weights > WEIGHT_TOL * scale)), len(weights), float(weights.max()),
        )
    return LaplacianSystem(L=L, edges=edges, weights=weights, cotangents=cotangents, delaunay_flag=delaunay)


def dirichlet_energy(system, f):
    """E_D(f) = 1/2 trace(f^T L_D f) for an (n, 3) map, or 1/2 Re(f^* L_D f) for a complex vector."""
    f = np.asarray(f)
    if f.shape[0] != system.n:
        raise GeometryError("laplacian", "dimension", f"map has {f.shape[0]} rows, Laplacian has {system.n}")
    Lf = system.L @ f
    if np.iscomplexobj(f):
        return 0.5 * float(np.real(np.vdot(f, Lf)))
    return 0.5 * float(np.sum(f * Lf))


def extract_subsystem(system, interior, boundary):
    """Return (L_s, B_s) = ([L_D]_{I,I}, [L_D]_{I,B}) as CSR matrices."""
    interior = np.asarray(interior, dtype=np.int64)
    boundary = np.asarray(boundary, dtype=np.int64)
    if len(interior) == 0 or len(boundary) == 0:
        raise PartitionError(
            "laplacian", "empty-index",
            f"interior ({len(interior)}) and boundary ({len(boundary)}) index sets must be nonempty",
        )
    rows = system.L[interior]
    return rows[:, interior].tocsr(), rows[:, boundary].tocsr()


class InteriorSolver:
    """Sparse LU of L_s with a symmetric fill-reducing ordering, reused across right-hand sides."""

    def __init__(self, L_s):
        try:
            self._lu = splu(sparse.csc_matrix(L_s), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as e:
            raise SolverError("laplacian", "singular", f"interior Laplacian factorization failed: {e}")
        self.shape = L_s.shape

    def solve(self, rhs):
        rhs = np.asarray(rhs)
        if np.iscomplexobj(rhs):
            x = self._lu.solve(np.ascontiguousarray(rhs.real)) + 1j * self._lu.solve(np.ascontiguousarray(rhs.imag))
        else:
            x = self._lu.solve(np.ascontiguousarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SolverError("laplacian", "non-finite", "interior solve produced non-finite values")
        return x


def solve_interior(system, interior, boundary, h):
    """Replace h on ``interior`` by the solution of L_s h_I = -B_s h_B.

    Returns the updated copy of ``h`` and the harmonic residual
    ||L_s h_I + B_s h_B||_inf.
    """
    L_s, B_s = extract_subsystem(system, interior, boundary)
    rhs = -(B_s @ h[boundary])
    h_interior = InteriorSolver(L_s).solve(rhs)
    out = np.array(h, copy=True)
    out[interior] = h_interior
    residual = float(np.max(np.abs(L_s @ h_interior - rhs)))
    return out, residual


def dump_matrix(system, path):
    scipy.io.mmwrite(path, system.L, comment="cotangent Laplacian L_D", symmetry="general")
