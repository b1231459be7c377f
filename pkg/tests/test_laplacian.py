# SPDX-License-Identifier: MIT

import logging

import numpy as np
import pytest
import scipy.io

from utils.errors import GeometryError, PartitionError
from utils.laplacian import (
    InteriorSolver,
    assemble_cotangent_laplacian,
    dirichlet_energy,
    dump_matrix,
    extract_subsystem,
    solve_interior,
)
from utils.mesh_handler import Mesh


def _angle(apex, a, b):
    u, v = a - apex, b - apex
    return np.arccos(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def per_face_oracle(mesh):
    n = mesh.n_vertices
    L = np.zeros((n, n))
    P = mesh.vertices
    for face in mesh.faces:
        for k in range(3):
            apex, i, j = face[k], face[(k + 1) % 3], face[(k + 2) % 3]
            half_cot = 0.5 / np.tan(_angle(P[apex], P[i], P[j]))
            L[i, j] -= half_cot
            L[j, i] -= half_cot
            L[i, i] += half_cot
            L[j, j] += half_cot
    return L


def edge_sum_energy(mesh, f):
    cot_sum = {}
    P = mesh.vertices
    for face in mesh.faces:
        for k in range(3):
            apex, i, j = face[k], face[(k + 1) % 3], face[(k + 2) % 3]
            key = (min(i, j), max(i, j))
            cot_sum[key] = cot_sum.get(key, 0.0) + 1.0 / np.tan(_angle(P[apex], P[i], P[j]))
    return 0.25 * sum(c * np.sum(np.abs(f[i] - f[j]) ** 2) for (i, j), c in cot_sum.items())


def test_regular_tetrahedron_entries(tetra):
    system = assemble_cotangent_laplacian(tetra)
    L = system.L.toarray()
    off = L[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, -1.0 / np.sqrt(3.0), atol=1e-12)
    np.testing.assert_allclose(np.diag(L), np.sqrt(3.0), atol=1e-12)
    np.testing.assert_allclose(system.weights, -1.0 / np.sqrt(3.0), atol=1e-12)
    assert system.delaunay_flag


def test_right_angles_give_zero_weight():
    square = Mesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    system = assemble_cotangent_laplacian(square)
    diagonal = np.flatnonzero((system.edges[:, 0] == 0) & (system.edges[:, 1] == 2))[0]
    assert abs(system.weights[diagonal]) < 1e-15


def test_icosahedron_matches_per_face_oracle(ico):
    L = assemble_cotangent_laplacian(ico).L.toarray()
    assert np.max(np.abs(L - per_face_oracle(ico))) < 1e-12


def test_symmetry_row_sums_and_pattern(ico3):
    system = assemble_cotangent_laplacian(ico3)
    L = system.L
    scale = np.max(np.abs(L.data))
    assert abs(L - L.T).max() < 1e-12 * scale
    assert np.max(np.abs(np.asarray(L.sum(axis=1)).ravel())) < 1e-10 * scale
    pattern = (ico3.adj_sym + np.eye(ico3.n_vertices)) != 0
    np.testing.assert_array_equal(L.toarray() != 0, np.asarray(pattern))
    assert system.delaunay_flag
    assert system.n == ico3.n_vertices


def test_csr_indices_sorted(ico2):
    L = assemble_cotangent_laplacian(ico2).L
    assert L.has_sorted_indices


def test_energy_of_constant_map_is_zero(ico2):
    system = assemble_cotangent_laplacian(ico2)
    f = np.tile([0.3, -0.2, 0.9], (ico2.n_vertices, 1))
    assert abs(dirichlet_energy(system, f)) < 1e-12


def test_energy_matches_edge_sum(tetra, ico, rng):
    for mesh in (tetra, ico):
        system = assemble_cotangent_laplacian(mesh)
        assert dirichlet_energy(system, mesh.vertices) == pytest.approx(edge_sum_energy(mesh, mesh.vertices), rel=1e-12)
        f = rng.normal(size=(mesh.n_vertices, 3))
        assert dirichlet_energy(system, f) == pytest.approx(edge_sum_energy(mesh, f), rel=1e-10)


def test_complex_energy_splits_into_real_parts(ico, rng):
    system = assemble_cotangent_laplacian(ico)
    h = rng.normal(size=ico.n_vertices) + 1j * rng.normal(size=ico.n_vertices)
    expected = dirichlet_energy(system, np.column_stack([h.real, h.imag]))
    assert dirichlet_energy(system, h) == pytest.approx(expected, rel=1e-12)
    assert dirichlet_energy(system, h) >= -1e-12


def test_energy_dimension_mismatch(tetra):
    system = assemble_cotangent_laplacian(tetra)
    with pytest.raises(GeometryError, match="rows"):
        dirichlet_energy(system, np.zeros((5, 3)))


def test_extract_subsystem_blocks(tetra):
    system = assemble_cotangent_laplacian(tetra)
    L_s, B_s = extract_subsystem(system, [0, 1], [2, 3])
    dense = system.L.toarray()
    np.testing.assert_array_equal(L_s.toarray(), dense[np.ix_([0, 1], [0, 1])])
    np.testing.assert_array_equal(B_s.toarray(), dense[np.ix_([0, 1], [2, 3])])


def test_extract_subsystem_requires_boundary(tetra):
    system = assemble_cotangent_laplacian(tetra)
    with pytest.raises(PartitionError) as excinfo:
        extract_subsystem(system, [0, 1, 2, 3], [])
    assert excinfo.value.check == "empty-index"


def test_subsystem_row_sums_and_m_matrix(ico2):
    system = assemble_cotangent_laplacian(ico2)
    z = ico2.vertices[:, 2]
    interior = np.flatnonzero(z < 0.2)
    touching = (ico2.adj_sym @ (z < 0.2).astype(float)) > 0
    boundary = np.flatnonzero(touching & (z >= 0.2))
    L_s, B_s = extract_subsystem(system, interior, boundary)
    ones_i, ones_b = np.ones(len(interior)), np.ones(len(boundary))
    assert np.max(np.abs(L_s @ ones_i + B_s @ ones_b)) < 1e-10
    transfer = -InteriorSolver(L_s).solve(B_s.toarray())
    np.testing.assert_allclose(transfer @ ones_b, ones_i, atol=1e-8)
    assert transfer.min() >= -1e-12


def test_solve_interior_is_harmonic(ico2, rng):
    system = assemble_cotangent_laplacian(ico2)
    interior = np.arange(0, ico2.n_vertices, 2)
    boundary = np.arange(1, ico2.n_vertices, 2)
    h = rng.normal(size=ico2.n_vertices) + 1j * rng.normal(size=ico2.n_vertices)
    out, residual = solve_interior(system, interior, boundary, h)
    np.testing.assert_array_equal(out[boundary], h[boundary])
    L_s, B_s = extract_subsystem(system, interior, boundary)
    assert np.max(np.abs(L_s @ out[interior] + B_s @ h[boundary])) < 1e-10 * np.max(np.abs(h[boundary]))
    assert residual < 1e-10


def test_non_delaunay_mesh_is_flagged(caplog):
    vertices = [[0, 0, 0], [1, 0, 0], [0.5, 0.9, 0], [0.5, 0.1, 0.05]]
    faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    with caplog.at_level(logging.WARNING):
        system = assemble_cotangent_laplacian(Mesh(vertices, faces))
    assert not system.delaunay_flag
    assert system.max_weight > 0
    assert "not Delaunay" in caplog.text


def test_degenerate_angle_is_rejected():
    mesh = Mesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    with pytest.raises(GeometryError) as excinfo:
        assemble_cotangent_laplacian(mesh)
    assert excinfo.value.check == "degenerate-angle"


def test_dump_matrix(tmp_path, ico):
    system = assemble_cotangent_laplacian(ico)
    path = tmp_path / "L.mtx"
    dump_matrix(system, str(path))
    loaded = scipy.io.mmread(str(path)).toarray()
    np.testing.assert_allclose(loaded, system.L.toarray(), rtol=1e-12, atol=1e-14)
