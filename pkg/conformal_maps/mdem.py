# SPDX-License-Identifier: MIT
"""Boundary iteration on frozen index sets with nonequivalence deflation.

After one inversion-partition pass per hemisphere the index sets are frozen
and the alternating solves collapse to two dense transfer operators

    A_s = -P_s L_s^{-1} B_s,   A1: m2 x m1,   A2: m1 x m2,

acting on the boundary vectors h1 = h[B1] and h2 = h[B2]. A2 A1 has the
all-ones vector as eigenvector for eigenvalue 1; the rank-one update
A2_hat = A2 - 1 q1^T moves that eigenvalue to zero.
"""

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from conformal_maps.dem import dem_sweep
from conformal_maps.diagnostics import (
    RunReport,
    convergence_certificate,
    estimate_k_star,
    mesh_fingerprint,
    r_linear_series,
    safe_angle_distortion,
    track_eta,
)
from conformal_maps.initial_map import initial_spherical_map
from utils.complex_plane import ZERO_GUARD, inverse_stereo, invert_plane, median_normalize, stereo_project
from utils.errors import ConformalMapError, ConvergenceError, PartitionError, SolverError
from utils.laplacian import InteriorSolver, assemble_cotangent_laplacian, dirichlet_energy, extract_subsystem

logger = logging.getLogger(__name__)

DEFAULT_RHO = 1.4
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1000
PERRON_TOL = 1e-12
PERRON_MAX_ITER = 100_000
NONNEGATIVE_TOL = 1e-12
POSITIVE_TOL = 1e-14
SOLVE_CHUNK = 64


@dataclass
class TransferOperators:
    A1: np.ndarray
    A2: np.ndarray
    partition1: object
    partition2: object
    P1: np.ndarray  # positions of B2 inside I1
    P2: np.ndarray  # positions of B1 inside I2
    L1: sparse.csr_matrix
    B1: sparse.csr_matrix
    L2: sparse.csr_matrix
    B2: sparse.csr_matrix
    solver1: InteriorSolver
    solver2: InteriorSolver
    h_frozen: np.ndarray
    h1_0: np.ndarray
    h2_0: np.ndarray
    nonnegative: bool

    @property
    def m1(self):
        return self.A2.shape[0]

    @property
    def m2(self):
        return self.A1.shape[0]


@dataclass
class DeflationData:
    q1: np.ndarray
    q2: np.ndarray
    A2_hat: np.ndarray
    iterations: int = 0
    residual: float = 0.0


@dataclass
class MdemState:
    h1: np.ndarray
    h2: np.ndarray
    step: int = 0
    scalings: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    residuals_h2: list = field(default_factory=list)
    scaled_minima: list = field(default_factory=list)
    turns: list = field(default_factory=list)


@dataclass
class Reconstruction:
    h: np.ndarray
    frame1: np.ndarray
    residual1: float
    residual2: float


@dataclass
class MdemRun:
    f: np.ndarray
    report: RunReport
    ops: TransferOperators
    defl: Optional[DeflationData]
    state: MdemState
    history: list
    history_h2: list = field(default_factory=list)


def _positions(superset, subset, sub_name, super_name):
    pos = np.searchsorted(superset, subset)
    pos_clipped = np.minimum(pos, len(superset) - 1)
    if np.any(pos >= len(superset)) or np.any(superset[pos_clipped] != subset):
        raise PartitionError("mdem", "boundary-not-interior", f"{sub_name} is not contained in {super_name}")
    return pos


def _solve_columns(solver, B):
    """Dense L_s^{-1} B_s, solved in column blocks against one factorization."""
    B = sparse.csc_matrix(B)
    out = np.empty(B.shape, dtype=float)
    for start in range(0, B.shape[1], SOLVE_CHUNK):
        stop = min(start + SOLVE_CHUNK, B.shape[1])
        out[:, start:stop] = solver.solve(B[:, start:stop].toarray()).reshape(B.shape[0], stop - start)
    return out


def build_transfer_operators(system, mesh, h, rho=DEFAULT_RHO):
    """Freeze I_s, B_s after one double sweep from ``h`` and build A1, A2."""
    first = dem_sweep(system, mesh, h, rho, s=1)
    second = dem_sweep(system, mesh, first.h, rho, s=2)
    part1, part2 = first.partition, second.partition

    P1 = _positions(part1.interior, part2.boundary, "B2", "I1")
    P2 = _positions(part2.interior, part1.boundary, "B1", "I2")

    L1, B1 = extract_subsystem(system, part1.interior, part1.boundary)
    L2, B2 = extract_subsystem(system, part2.interior, part2.boundary)
    solver1, solver2 = InteriorSolver(L1), InteriorSolver(L2)
    A1 = -_solve_columns(solver1, B1)[P1]
    A2 = -_solve_columns(solver2, B2)[P2]

    lowest = float(min(A1.min(), A2.min()))
    nonnegative = lowest >= -NONNEGATIVE_TOL
    if not nonnegative:
        logger.warning("Transfer operators have negative entries (min %.3g); the Perron argument does not apply", lowest)

    h_frozen = invert_plane(second.h)
    logger.info(
        "Frozen partitions: n1=%d m1=%d n2=%d m2=%d", part1.n_s, part1.m_s, part2.n_s, part2.m_s,
    )
    return TransferOperators(
        A1=A1, A2=A2, partition1=part1, partition2=part2, P1=P1, P2=P2,
        L1=L1, B1=B1, L2=L2, B2=B2, solver1=solver1, solver2=solver2,
        h_frozen=h_frozen,
        h1_0=h_frozen[part1.boundary].copy(),
        h2_0=invert_plane(first.h)[part2.boundary],
        nonnegative=nonnegative,
    )


def deflation_vector(ops, tol=PERRON_TOL, max_iter=PERRON_MAX_ITER):
    """Left Perron vector q2 of A2 A1 (q2^T 1 = 1), q1^T = q2^T A2 and A2_hat = A2 - 1 q1^T."""
    M = ops.A2 @ ops.A1
    m1 = M.shape[0]
    n_components, _ = connected_components(sparse.csr_matrix(M > 0), directed=True, connection="strong")
    if n_components != 1:
        raise SolverError(
            "mdem", "reducible",
            f"A2 A1 is reducible ({n_components} strongly connected components); the boundary bands are disconnected",
        )

    q = np.full(m1, 1.0 / m1)
    for it in range(1, max_iter + 1):
        r = q @ M
        residual = float(np.max(np.abs(r - q)))
        if residual < tol:
            break
        q = r / r.sum()
    else:
        raise ConvergenceError(
            "mdem", "perron-stagnation",
            f"left Perron vector residual {residual:.3g} after {max_iter} iterations (target {tol:g})",
        )

    if np.any(q <= POSITIVE_TOL):
        raise SolverError(
            "mdem", "nonpositive-perron",
            f"Perron vector has {int(np.sum(q <= POSITIVE_TOL))} nonpositive entries (reducible or non-Delaunay input)",
        )
    q1 = q @ ops.A2
    A2_hat = ops.A2 - np.outer(np.ones(m1), q1)
    logger.debug("Perron vector after %d iterations, residual %.3g", it, residual)
    return DeflationData(q1=q1, q2=q, A2_hat=A2_hat, iterations=it, residual=residual)


def _scaled_inversion(z, label):
    mags = np.abs(z)
    zero = np.flatnonzero(mags <= ZERO_GUARD)
    if len(zero):
        raise SolverError("mdem", "zero-magnitude", f"|{label}| vanishes at index {int(zero[0])}")
    c = float(mags.max())
    return c * z / mags ** 2, c, float(mags.min()) / c


def phase_aligned_change(new, old):
    """min over unit u of ||new - u old||_2, and the minimizing angle.

    The scaled step commutes with h -> e^{i theta} h.
    """
    overlap = np.vdot(old, new)
    if abs(overlap) <= ZERO_GUARD:
        return float(np.linalg.norm(new - old)), 0.0
    u = overlap / abs(overlap)
    return float(np.linalg.norm(new - u * old)), float(np.angle(u))


def mdem_step(state, ops, defl=None):
    """One scaled double step h1^(k) -> h2^(k+1) -> h1^(k+2); ``defl=None`` iterates with A2 itself.

    Residuals are measured up to a global rotation about the pole.
    """
    A2 = ops.A2 if defl is None else defl.A2_hat
    h2, c_k, min2 = _scaled_inversion(ops.A1 @ state.h1, "A1 h1")
    h1, c_k1, min1 = _scaled_inversion(A2 @ h2, "A2_hat h2" if defl is not None else "A2 h2")
    change1, turn = phase_aligned_change(h1, state.h1)
    change2, _ = phase_aligned_change(h2, state.h2)
    return dataclasses.replace(
        state,
        h1=h1,
        h2=h2,
        step=state.step + 1,
        scalings=state.scalings + [(c_k, c_k1)],
        residuals=state.residuals + [change1],
        residuals_h2=state.residuals_h2 + [change2],
        scaled_minima=state.scaled_minima + [np.array([min2, min1])],
        turns=state.turns + [turn],
    )


def burn_in(ops, defl, state, steps):
    for _ in range(steps):
        state = mdem_step(state, ops, defl)
    return state


def reconstruct_frames(ops, h1):
    """Unscaled hemisphere swap from boundary data h1; returns both frames and the harmonic residuals."""
    part1, part2 = ops.partition1, ops.partition2
    g1 = ops.h_frozen.copy()
    g1[part1.boundary] = h1
    rhs1 = -(ops.B1 @ g1[part1.boundary])
    g1[part1.interior] = ops.solver1.solve(rhs1)
    residual1 = float(np.max(np.abs(ops.L1 @ g1[part1.interior] - rhs1)))

    g2 = invert_plane(g1)
    rhs2 = -(ops.B2 @ g2[part2.boundary])
    g2[part2.interior] = ops.solver2.solve(rhs2)
    residual2 = float(np.max(np.abs(ops.L2 @ g2[part2.interior] - rhs2)))
    return Reconstruction(
        h=g2,
        frame1=g1,
        residual1=residual1 / float(np.max(np.abs(g1[part1.boundary]))),
        residual2=residual2 / float(np.max(np.abs(g2[part2.boundary]))),
    )


def reconstruct(ops, h1, h2=None):
    """Full vertex vector (original frame) with both interiors filled."""
    rec = reconstruct_frames(ops, h1)
    if h2 is not None:
        glued = rec.h[ops.partition2.boundary]
        scale = np.vdot(glued, h2) / np.vdot(glued, glued)
        mismatch = np.max(np.abs(h2 - scale * glued)) / np.max(np.abs(h2))
        logger.debug("Gluing mismatch on B2 up to scale: %.3g", mismatch)
    return rec.h


def spherical_map(ops, h1, h2=None):
    return inverse_stereo(median_normalize(reconstruct(ops, h1, h2)))


def execute_mdem(
    mesh,
    rho=DEFAULT_RHO,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    deflate=True,
    track_energy=False,
    system=None,
    initial=None,
):
    """MDEM end to end, keeping operators, final state and the h1 and h2 histories."""
    start = time.perf_counter()
    if system is None:
        system = assemble_cotangent_laplacian(mesh)
    if initial is None:
        initial = initial_spherical_map(mesh, system)

    ops = build_transfer_operators(system, mesh, stereo_project(initial.f), rho)
    defl = deflation_vector(ops)
    state = MdemState(h1=ops.h1_0.copy(), h2=ops.h2_0.copy())
    history, history_h2, energies = [], [], []
    converged = False

    if max_iter > 0 and not np.isfinite(tol):
        converged = True
    else:
        for _ in range(max_iter):
            state = mdem_step(state, ops, defl if deflate else None)
            history.append(state.h1)
            history_h2.append(state.h2)
            if track_energy:
                energies.append(dirichlet_energy(system, spherical_map(ops, state.h1, state.h2)))
            logger.debug(
                "MDEM step %d: |dh1|=%.3e |dh2|=%.3e turn=%.3e", state.step, state.residuals[-1], state.residuals_h2[-1],
                state.turns[-1],
            )
            if state.residuals[-1] < tol and state.residuals_h2[-1] < tol:
                converged = True
                break

    if converged:
        logger.info("MDEM converged after %d iterations", state.step)
    else:
        logger.warning("MDEM did not converge within %d iterations", max_iter)

    rec = reconstruct_frames(ops, state.h1)
    f = inverse_stereo(median_normalize(rec.h))
    energy = dirichlet_energy(system, f)

    r_linear_h1 = r_linear_series(history, align_phase=True) if len(history) > 1 else []
    r_linear_h2 = r_linear_series(history_h2, align_phase=True) if len(history_h2) > 1 else []

    certificate = None
    if deflate and state.scaled_minima:
        try:
            certificate = convergence_certificate(defl, ops, track_eta(state.scaled_minima))
        except ConformalMapError as e:
            logger.warning("No convergence certificate: %s", e)
        if certificate is not None and r_linear_h1:
            certificate.k_star = estimate_k_star(r_linear_h1)

    report = RunReport(
        algorithm="mdem",
        mesh_id=mesh_fingerprint(mesh),
        n=mesh.n_vertices,
        n_faces=mesh.n_faces,
        rho=rho,
        tol=tol,
        max_iter=max_iter,
        energy=energy,
        initial_energy=initial.quality,
        converged=converged,
        iterations=state.step,
        energies=energies,
        residuals_h1=list(state.residuals),
        residuals_h2=list(state.residuals_h2),
        reconstruction_residual=max(rec.residual1, rec.residual2),
        scalings=list(state.scalings),
        turns=list(state.turns),
        r_linear_h1=r_linear_h1,
        r_linear_h2=r_linear_h2,
        certificate=certificate,
        distortion=safe_angle_distortion(mesh, f),
        n1=ops.partition1.n_s,
        m1=ops.m1,
        n2=ops.partition2.n_s,
        m2=ops.m2,
        deflated=deflate,
        nonnegative_operators=ops.nonnegative,
        flipped_initial=initial.flipped,
        delaunay=system.delaunay_flag,
    )
    report.wall_time = time.perf_counter() - start
    return MdemRun(f=f, report=report, ops=ops, defl=defl, state=state, history=history, history_h2=history_h2)


def run_mdem(mesh, rho=DEFAULT_RHO, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, deflate=True, track_energy=False,
             system=None, initial=None):
    run = execute_mdem(
        mesh, rho=rho, tol=tol, max_iter=max_iter, deflate=deflate, track_energy=track_energy,
        system=system, initial=initial,
    )
    return run.f, run.report
