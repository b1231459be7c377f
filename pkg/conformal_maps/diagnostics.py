# SPDX-License-Identifier: MIT

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from utils.errors import ConformalMapError, ConvergenceError, GeometryError
from utils.mesh_handler import corner_angles, degenerate_faces, triangle_corner_angles

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CERT_TOL = 1e-10
CERT_MAX_ITER = 100_000
DENSE_CHECK_MAX = 500
UNIT_NORM_TOL = 1e-8
FOUR_PI = 4.0 * np.pi

CONVENTIONS = {
    "eta": "scaled magnitudes |A1 h1| / c_k and |A2_hat h2| / c_k+1",
    "angles": "chordal image triangles",
    "sd": "population",
    "energy_minus_4pi": "E_D - 4 pi",
}

HISTORY_COLUMNS = ("k", "residual_h1", "residual_h2", "c_k", "E_D", "r_linear_h1", "r_linear_h2")
BATCH_COLUMNS = (
    "mesh_id", "n", "m1", "m2", "eta", "cert_rho", "E_D_raw", "E_D_minus_4pi",
    "mean_dtheta", "sd_dtheta", "iterations", "converged",
)
DEM_COLUMNS = ("E_D_dem", "d_E")


@dataclass
class Certificate:
    eta: float
    gamma: float
    spectral_radius: float
    satisfied: bool
    method: str
    dense_radius: Optional[float] = None
    k_star: Optional[int] = None
    power_iterations: int = 0


@dataclass
class AngleDistortion:
    per_corner: np.ndarray
    mean: float
    sd: float


@dataclass
class RunReport:
    """Everything a DEM or MDEM run produced, apart from the map itself.

    Per-iteration series (``energies`` when tracked, ``residuals_h1``,
    ``residuals_h2``, plus ``harmonic_residuals`` for DEM and ``scalings``
    and ``turns`` for MDEM) have one entry per completed iteration. MDEM
    residuals ignore a global rotation about the pole; ``turns`` holds that
    rotation angle per step. ``r_linear_h1`` and ``r_linear_h2`` are the
    R-linear root series against the final iterate, one entry shorter.
    """

    algorithm: str
    mesh_id: str
    n: int
    n_faces: int
    rho: float
    tol: float
    max_iter: int
    energy: float
    initial_energy: float
    converged: bool
    iterations: int
    energies: list = field(default_factory=list)
    residuals_h1: list = field(default_factory=list)
    residuals_h2: list = field(default_factory=list)
    harmonic_residuals: list = field(default_factory=list)
    scalings: list = field(default_factory=list)
    turns: list = field(default_factory=list)
    r_linear_h1: list = field(default_factory=list)
    r_linear_h2: list = field(default_factory=list)
    certificate: Optional[Certificate] = None
    distortion: Optional[AngleDistortion] = None
    n1: Optional[int] = None
    m1: Optional[int] = None
    n2: Optional[int] = None
    m2: Optional[int] = None
    deflated: Optional[bool] = None
    nonnegative_operators: Optional[bool] = None
    reconstruction_residual: Optional[float] = None
    energy_increases: int = 0
    flipped_initial: int = 0
    delaunay: bool = True
    wall_time: float = 0.0
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    @property
    def energy_minus_4pi(self):
        return self.energy - FOUR_PI

    def to_dict(self, include_timing=False):
        """JSON-ready dict. Wall time is left out unless asked for, so reports of identical runs compare equal."""
        data = _jsonable(dataclasses.asdict(self))
        data["energy_minus_4pi"] = _jsonable(self.energy_minus_4pi)
        data["energies_minus_4pi"] = _jsonable([e - FOUR_PI for e in self.energies])
        if not include_timing:
            data.pop("wall_time")
        return {"schema_version": SCHEMA_VERSION, **data}

    def history_rows(self):
        rows = []
        for k in range(self.iterations):
            rows.append({
                "k": k + 1,
                "residual_h1": self.residuals_h1[k],
                "residual_h2": self.residuals_h2[k],
                "c_k": self.scalings[k][0] if self.scalings else "",
                "E_D": self.energies[k] if self.energies else "",
                "r_linear_h1": _entry(self.r_linear_h1, k),
                "r_linear_h2": _entry(self.r_linear_h2, k),
            })
        return rows


def _entry(series, k):
    return series[k] if k < len(series) else ""


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # strict JSON has no inf or nan
        return value if np.isfinite(value) else str(value)
    return value


def mesh_fingerprint(mesh):
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(mesh.vertices).tobytes())
    digest.update(np.ascontiguousarray(mesh.faces).tobytes())
    return digest.hexdigest()[:16]


def track_eta(history):
    """eta = max_k max_s (1 - min_i m_s^(k)) over per-step scaled magnitudes.

    Each history entry holds the scaled magnitudes of one step, either as one
    array or as a pair of per-hemisphere arrays (or their minima).
    """
    if len(history) == 0:
        raise ConformalMapError("diagnostics", "empty-history", "eta needs at least one completed iteration")
    eta = 0.0
    for entry in history:
        parts = entry if isinstance(entry, (tuple, list)) else (entry,)
        smallest = min(float(np.min(p)) for p in parts)
        eta = max(eta, 1.0 - smallest)
    return eta


def dense_spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def perron_radius(M, tol=CERT_TOL, max_iter=CERT_MAX_ITER):
    """Spectral radius of a nonnegative matrix by power iteration with 1-norm scaling.

    Returns (radius, iterations, converged); stops once
    ||M x - lambda x||_inf <= tol * lambda * ||x||_inf.
    """
    m = M.shape[0]
    x = np.full(m, 1.0 / m)
    y = M @ x
    lam = float(y.sum())
    for it in range(1, max_iter + 1):
        if lam <= 0:
            return 0.0, it, True
        x = y / lam
        y = M @ x
        lam = float(y.sum())
        if np.max(np.abs(y - lam * x)) <= tol * lam * np.max(x):
            return lam, it, True
    return lam, max_iter, False


def convergence_certificate(defl, ops, eta, dense_check_max=DENSE_CHECK_MAX, tol=CERT_TOL, max_iter=CERT_MAX_ITER):
    """Evaluate rho(gamma^2 |A2_hat| A1) with gamma = 1 / (1 - eta)^2; satisfied iff below 1."""
    if not 0.0 <= eta < 1.0:
        raise ConformalMapError("diagnostics", "eta-range", f"eta must lie in [0, 1), got {eta}")
    gamma = 1.0 / (1.0 - eta) ** 2
    M = gamma ** 2 * (np.abs(defl.A2_hat) @ ops.A1)
    radius, iterations, ok = perron_radius(M, tol=tol, max_iter=max_iter)
    dense = dense_spectral_radius(M) if M.shape[0] <= dense_check_max else None
    method = "power-iteration"

    if not ok:
        if dense is None:
            raise ConvergenceError(
                "diagnostics", "stagnation",
                f"power iteration for the certificate did not reach {tol:g} in {max_iter} iterations",
            )
        logger.warning("Certificate power iteration stagnated; using the dense eigenvalue radius %.10g", dense)
        radius, method = dense, "dense-oracle"
    elif dense is not None and abs(radius - dense) > 1e-8 * max(1.0, dense):
        logger.warning("Certificate radius %.12g differs from dense value %.12g", radius, dense)

    logger.info("Certificate: eta=%.6g gamma=%.6g radius=%.6g", eta, gamma, radius)
    return Certificate(
        eta=eta,
        gamma=gamma,
        spectral_radius=radius,
        satisfied=bool(radius < 1.0),
        method=method,
        dense_radius=dense,
        power_iterations=iterations,
    )


def spectrum_deflation_error(ops, defl):
    """Largest per-eigenvalue gap between sigma(A2_hat A1) and (sigma(A2 A1) minus {1}) plus {0}."""
    full = np.linalg.eigvals(ops.A2 @ ops.A1)
    deflated = np.linalg.eigvals(defl.A2_hat @ ops.A1)
    expected = full.copy()
    expected[np.argmin(np.abs(full - 1.0))] = 0.0
    cost = np.abs(expected[:, None] - deflated[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def angle_distortion(mesh, f):
    """Relative corner-angle distortion |theta_S - theta_img| / theta_S against chordal image triangles."""
    f = np.asarray(f, dtype=float)
    norms = np.linalg.norm(f, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise GeometryError("diagnostics", "off-sphere", "map rows must have unit norm")
    bad = degenerate_faces(f, mesh.faces)
    if len(bad):
        raise GeometryError("diagnostics", "degenerate-image", f"image of face {int(bad[0])} is degenerate")
    source = corner_angles(mesh)
    image = triangle_corner_angles(f, mesh.faces)
    d_theta = np.abs(source - image) / source
    return AngleDistortion(per_corner=d_theta, mean=float(d_theta.mean()), sd=float(d_theta.std()))


def safe_angle_distortion(mesh, f):
    try:
        return angle_distortion(mesh, f)
    except GeometryError as e:
        logger.warning("Angle distortion unavailable: %s", e)
        return None


def r_linear_series(history, reference=None, align_phase=False):
    """Entry k is ||h^(k) - h^(*)||_inf^(1/k), k = 1, 2, ...

    Without an explicit ``reference`` the final iterate is used and its own
    (identically zero) entry is dropped. With ``align_phase`` each iterate is
    first turned by the unit factor that best matches it to the reference in
    the least-squares sense.
    """
    if len(history) == 0:
        raise ConformalMapError("diagnostics", "empty-history", "R-linear series needs at least one iterate")
    if reference is None:
        reference = history[-1]
        history = history[:-1]
    reference = np.asarray(reference)
    series = []
    for k, h in enumerate(history, start=1):
        h = np.asarray(h)
        if align_phase:
            overlap = np.vdot(h, reference)
            if abs(overlap) > 0:
                h = h * (overlap / abs(overlap))
        series.append(float(np.max(np.abs(h - reference)) ** (1.0 / k)))
    return series


def estimate_k_star(series):
    """Smallest k such that every entry from k onwards is below 1, or None."""
    if len(series) == 0:
        return None
    bad = np.flatnonzero(np.asarray(series) >= 1.0)
    if len(bad) == 0:
        return 1
    k = int(bad[-1]) + 2
    return k if k <= len(series) else None


def energy_comparison(report_dem, report_mdem):
    """d_E = E_D(MDEM) - E_D(DEM)."""
    if report_dem.mesh_id != report_mdem.mesh_id:
        raise ConformalMapError(
            "diagnostics", "mesh-mismatch",
            f"reports belong to different meshes ({report_dem.mesh_id} vs {report_mdem.mesh_id})",
        )
    return report_mdem.energy - report_dem.energy


def batch_row(mesh_id, report, dem_report=None):
    cert = report.certificate
    dist = report.distortion
    row = {
        "mesh_id": mesh_id,
        "n": report.n,
        "m1": report.m1,
        "m2": report.m2,
        "eta": cert.eta if cert else "",
        "cert_rho": cert.spectral_radius if cert else "",
        "E_D_raw": report.energy,
        "E_D_minus_4pi": report.energy_minus_4pi,
        "mean_dtheta": dist.mean if dist else "",
        "sd_dtheta": dist.sd if dist else "",
        "iterations": report.iterations,
        "converged": report.converged,
    }
    if dem_report is not None:
        row["E_D_dem"] = dem_report.energy
        row["d_E"] = energy_comparison(dem_report, report)
    return row
