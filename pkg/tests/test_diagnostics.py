# SPDX-License-Identifier: MIT

import json
from types import SimpleNamespace

import numpy as np
import pytest

from conformal_maps.diagnostics import (
    FOUR_PI,
    HISTORY_COLUMNS,
    SCHEMA_VERSION,
    RunReport,
    angle_distortion,
    batch_row,
    convergence_certificate,
    energy_comparison,
    estimate_k_star,
    mesh_fingerprint,
    perron_radius,
    r_linear_series,
    safe_angle_distortion,
    track_eta,
)
from utils.errors import ConformalMapError, GeometryError
from utils.mesh_handler import Mesh


def make_report(**overrides):
    fields = dict(
        algorithm="mdem", mesh_id="abc", n=12, n_faces=20, rho=1.4, tol=1e-9, max_iter=10,
        energy=FOUR_PI + 0.5, initial_energy=FOUR_PI + 1.0, converged=True, iterations=2,
        residuals_h1=[1e-3, 1e-10], residuals_h2=[2e-3, 2e-10], scalings=[(3.0, 4.0), (5.0, 6.0)],
    )
    fields.update(overrides)
    return RunReport(**fields)


def test_track_eta():
    assert track_eta([np.ones(3), np.ones(3)]) == 0.0
    assert track_eta([np.array([1.0, 0.9])]) == pytest.approx(0.1)
    assert track_eta([(np.array([1.0]), np.array([0.8])), (1.0, 0.95)]) == pytest.approx(0.2)
    with pytest.raises(ConformalMapError) as excinfo:
        track_eta([])
    assert excinfo.value.check == "empty-history"


def test_perron_radius_matches_dense(rng):
    M = rng.uniform(size=(30, 30))
    radius, _, ok = perron_radius(M)
    assert ok
    assert radius == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), rel=1e-8)


def test_certificate_gamma_and_radius(rng):
    A1 = rng.uniform(size=(6, 5))
    A1 /= A1.sum(axis=1, keepdims=True)
    A2_hat = rng.normal(size=(5, 6)) * 0.05
    ops = SimpleNamespace(A1=A1)
    defl = SimpleNamespace(A2_hat=A2_hat)
    cert = convergence_certificate(defl, ops, 0.1)
    assert cert.gamma == pytest.approx(1.0 / 0.81)
    expected = np.max(np.abs(np.linalg.eigvals(cert.gamma ** 2 * np.abs(A2_hat) @ A1)))
    assert cert.spectral_radius == pytest.approx(expected, rel=1e-8)
    assert cert.dense_radius == pytest.approx(expected, rel=1e-12)
    assert cert.satisfied == (expected < 1.0)


def test_certificate_rejects_eta_out_of_range():
    ops = SimpleNamespace(A1=np.eye(2))
    defl = SimpleNamespace(A2_hat=np.eye(2))
    for eta in (-0.1, 1.0):
        with pytest.raises(ConformalMapError) as excinfo:
            convergence_certificate(defl, ops, eta)
        assert excinfo.value.check == "eta-range"


def test_identity_map_has_no_angle_distortion(ico2):
    dist = angle_distortion(ico2, ico2.vertices)
    assert dist.mean < 1e-12
    assert dist.sd < 1e-12
    assert dist.per_corner.shape == (ico2.n_faces, 3)


def test_angle_distortion_is_scale_invariant(ico2, rng):
    scaled = Mesh(ico2.vertices * 7.5, ico2.faces)
    f = ico2.vertices + 0.02 * rng.normal(size=ico2.vertices.shape)
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    a = angle_distortion(ico2, f)
    b = angle_distortion(scaled, f)
    assert a.mean == pytest.approx(b.mean, rel=1e-10)
    assert a.sd == pytest.approx(b.sd, rel=1e-10)
    assert a.sd == pytest.approx(np.std(a.per_corner))


def test_angle_distortion_errors(ico):
    with pytest.raises(GeometryError) as excinfo:
        angle_distortion(ico, ico.vertices * 2.0)
    assert excinfo.value.check == "off-sphere"
    collapsed = np.tile([0.0, 0.0, 1.0], (ico.n_vertices, 1))
    with pytest.raises(GeometryError) as excinfo:
        angle_distortion(ico, collapsed)
    assert excinfo.value.check == "degenerate-image"
    assert safe_angle_distortion(ico, collapsed) is None


def test_r_linear_series_of_geometric_sequence():
    reference = np.array([1.0 + 1j, -2.0])
    history = [reference + 0.5 ** k for k in range(1, 21)]
    series = r_linear_series(history, reference=reference)
    np.testing.assert_allclose(series, 0.5, rtol=1e-12)


def test_r_linear_series_ignores_phase():
    reference = np.zeros(2, dtype=complex)
    history = [np.array([0.25 ** k * np.exp(1j * k), 0.0]) for k in range(1, 6)]
    np.testing.assert_allclose(r_linear_series(history, reference=reference), 0.25, rtol=1e-12)


def test_r_linear_series_defaults_to_last_iterate():
    history = [np.array([1.0 + 0.5 ** k]) for k in range(1, 6)] + [np.array([1.0])]
    series = r_linear_series(history)
    assert len(series) == 5
    np.testing.assert_allclose(series, 0.5, rtol=1e-12)
    with pytest.raises(ConformalMapError):
        r_linear_series([])


def test_estimate_k_star():
    assert estimate_k_star([0.5, 0.4]) == 1
    assert estimate_k_star([2.0, 1.5, 0.9, 0.8]) == 3
    assert estimate_k_star([0.5, 1.0]) is None
    assert estimate_k_star([]) is None


def test_energy_comparison():
    dem = make_report(algorithm="dem", energy=FOUR_PI + 0.7)
    mdem = make_report()
    assert energy_comparison(dem, mdem) == pytest.approx(-0.2)
    assert energy_comparison(mdem, mdem) == 0.0
    with pytest.raises(ConformalMapError) as excinfo:
        energy_comparison(make_report(mesh_id="other"), mdem)
    assert excinfo.value.check == "mesh-mismatch"


def test_report_to_dict_schema():
    report = make_report(wall_time=3.5)
    data = report.to_dict()
    assert data["schema_version"] == SCHEMA_VERSION
    assert "wall_time" not in data
    assert data["energy_minus_4pi"] == pytest.approx(0.5)
    assert data["scalings"] == [[3.0, 4.0], [5.0, 6.0]]
    assert report.to_dict(include_timing=True)["wall_time"] == 3.5
    assert json.dumps(data, sort_keys=True) == json.dumps(make_report(wall_time=9.0).to_dict(), sort_keys=True)


def test_report_history_rows():
    rows = make_report().history_rows()
    assert [tuple(row) for row in rows] == [HISTORY_COLUMNS] * 2
    assert rows[1]["k"] == 2
    assert rows[0]["c_k"] == 3.0
    assert rows[0]["E_D"] == ""
    dem_rows = make_report(scalings=[], energies=[13.0, 12.9]).history_rows()
    assert dem_rows[0]["c_k"] == ""
    assert dem_rows[1]["E_D"] == 12.9


def test_batch_row_with_dem_column():
    row = batch_row("m", make_report(), make_report(algorithm="dem", energy=FOUR_PI + 0.7))
    assert row["d_E"] == pytest.approx(-0.2)
    assert row["eta"] == "" and row["mean_dtheta"] == ""
    assert row["E_D_minus_4pi"] == pytest.approx(0.5)


def test_mesh_fingerprint(ico, tetra):
    assert mesh_fingerprint(ico) == mesh_fingerprint(Mesh(ico.vertices.copy(), ico.faces.copy()))
    assert mesh_fingerprint(ico) != mesh_fingerprint(tetra)
    assert len(mesh_fingerprint(ico)) == 16


def test_report_to_dict_is_strict_json():
    data = make_report(tol=float("inf"), reconstruction_residual=float("nan"), energies=[13.0, float("inf")]).to_dict()
    assert data["tol"] == "inf"
    assert data["reconstruction_residual"] == "nan"
    assert data["energies"] == [13.0, "inf"]
    assert data["energies_minus_4pi"][1] == "inf"
    json.loads(json.dumps(data, allow_nan=False))


def test_r_linear_series_aligned_phase():
    reference = np.array([1.0 + 1j, -2.0, 0.5j])
    history = [np.exp(0.3j * k) * (reference + 0.5 ** k) for k in range(1, 21)]
    aligned = r_linear_series(history, reference=reference, align_phase=True)
    raw = r_linear_series(history, reference=reference)
    assert max(aligned[10:]) < 0.6
    assert aligned[-1] < raw[-1]
    np.testing.assert_allclose(
        r_linear_series([np.exp(1j * k) * reference for k in range(1, 4)], reference=reference, align_phase=True),
        0.0, atol=1e-4,
    )


def test_report_history_rows_carry_r_linear_series():
    rows = make_report(r_linear_h1=[0.5], r_linear_h2=[0.25]).history_rows()
    assert rows[0]["r_linear_h1"] == 0.5
    assert rows[0]["r_linear_h2"] == 0.25
    assert rows[1]["r_linear_h1"] == "" and rows[1]["r_linear_h2"] == ""
