# SPDX-License-Identifier: MIT
"""Maps between the unit sphere and the extended complex plane."""

import numpy as np

from utils.errors import GeometryError

POLE_TOL = 1e-12
UNIT_NORM_TOL = 1e-8
ZERO_GUARD = 1e-300


def stereo_project(f):
    """North-pole stereographic projection of (n, 3) unit vectors to complex h."""
    f = np.asarray(f, dtype=float)
    norms = np.linalg.norm(f, axis=1)
    off_sphere = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
    if len(off_sphere):
        i = int(off_sphere[0])
        raise GeometryError("complex-plane", "off-sphere", f"row {i} has norm {norms[i]!r}, expected 1")
    at_pole = np.flatnonzero(f[:, 2] > 1.0 - POLE_TOL)
    if len(at_pole):
        raise GeometryError(
            "complex-plane", "north-pole",
            f"vertex {int(at_pole[0])} lies on the projection pole (0, 0, 1)",
        )
    denom = 1.0 - f[:, 2]
    return f[:, 0] / denom + 1j * f[:, 1] / denom


def inverse_stereo(h):
    """Pi^{-1}(u + iv) = (2u, 2v, u^2 + v^2 - 1) / (u^2 + v^2 + 1)."""
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        i = int(np.flatnonzero(~np.isfinite(h))[0])
        raise GeometryError("complex-plane", "non-finite", f"entry {i} is not finite")
    u, v = h.real, h.imag
    r2 = u * u + v * v
    denom = r2 + 1.0
    f = np.column_stack([2.0 * u / denom, 2.0 * v / denom, (r2 - 1.0) / denom])
    # renormalize: the closed form is unit only up to round-off
    return f / np.linalg.norm(f, axis=1, keepdims=True)


def invert_plane(h):
    """h -> h / |h|^2 = 1 / conj(h); swaps the two hemispheres."""
    h = np.asarray(h, dtype=complex)
    mod2 = h.real * h.real + h.imag * h.imag
    zero = np.flatnonzero(np.sqrt(mod2) <= ZERO_GUARD)
    if len(zero):
        raise GeometryError("complex-plane", "zero-entry", f"cannot invert zero entry at index {int(zero[0])}")
    return h / mod2


def median_abs(h):
    """Median of |h|; for an even count, the mean of the two middle values."""
    h = np.asarray(h)
    if h.size == 0:
        raise GeometryError("complex-plane", "empty", "median of an empty vector")
    return float(np.median(np.abs(h)))


def median_normalize(h):
    m = median_abs(h)
    if not m > 0:
        raise GeometryError("complex-plane", "zero-median", "median of |h| is zero")
    return np.asarray(h, dtype=complex) / m
