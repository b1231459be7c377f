# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from conformal_maps.dem import dem_sweep, partition_indices, run_dem
from conformal_maps.initial_map import initial_spherical_map
from utils.complex_plane import invert_plane
from utils.errors import PartitionError
from utils.laplacian import assemble_cotangent_laplacian


def test_partition_on_tetrahedron(tetra):
    h = np.array([0.5, 0.9j, -1.5, 2.0])
    part = partition_indices(tetra, h, 1.4)
    np.testing.assert_array_equal(part.interior, [0, 1])
    np.testing.assert_array_equal(part.boundary, [2, 3])
    assert len(part.exterior) == 0
    assert (part.n_s, part.m_s) == (2, 2)


def test_partition_is_a_disjoint_cover(ico2):
    h = np.exp(2.0 * ico2.vertices[:, 2]) * np.exp(1j * ico2.vertices[:, 0])
    part = partition_indices(ico2, h, 1.1)
    assert len(part.exterior) > 0
    everything = np.concatenate([part.interior, part.boundary, part.exterior])
    np.testing.assert_array_equal(np.sort(everything), np.arange(ico2.n_vertices))
    np.testing.assert_array_equal(np.union1d(part.boundary, part.exterior), part.boundary_prime)

    adj = ico2.adj_sym.tocsr()
    in_interior = np.zeros(ico2.n_vertices, dtype=bool)
    in_interior[part.interior] = True
    for v in part.boundary:
        assert in_interior[adj[v].indices].any()
    for v in part.exterior:
        assert not in_interior[adj[v].indices].any()


@pytest.mark.parametrize("h, rho, check", [
    ([0.5, 0.5, 0.5, 0.5], 1.4, "empty-boundary"),
    ([2.0, 2.0, 3.0, 1.5], 1.4, "empty-interior"),
    ([0.5, 0.5, 2.0, 2.0], 1.0, "rho"),
    ([0.5, np.nan, 2.0, 2.0], 1.4, "non-finite"),
])
def test_partition_errors(tetra, h, rho, check):
    with pytest.raises(PartitionError) as excinfo:
        partition_indices(tetra, np.asarray(h, dtype=complex), rho)
    assert excinfo.value.check == check
    assert excinfo.value.module == "dem"


def test_sweep_fixed_point_on_tetrahedron(tetra):
    system = assemble_cotangent_laplacian(tetra)
    # already harmonic on I = {0, 1}: 3 h_0 = h_1 + h_2 + h_3 with h_0 = h_1
    target = np.array([0.75 - 1j, 0.75 - 1j, 1.5, -2j])
    sweep = dem_sweep(system, tetra, invert_plane(target), 1.4)
    np.testing.assert_allclose(sweep.h, target, atol=1e-12)
    assert sweep.change < 1e-12
    assert sweep.residual < 1e-12


def test_sweep_constant_boundary(ico2):
    system = assemble_cotangent_laplacian(ico2)
    c = 2.0 + 1.0j
    target = np.where(ico2.vertices[:, 2] < 0, 0.5 + 0j, c)
    sweep = dem_sweep(system, ico2, invert_plane(target), 1.4, s=2)
    np.testing.assert_allclose(sweep.h, np.full(ico2.n_vertices, c), atol=1e-10)


def test_sweep_matches_dense_solve_and_maximum_principle(ico2, rng):
    system = assemble_cotangent_laplacian(ico2)
    n = ico2.n_vertices
    south = ico2.vertices[:, 2] < 0
    radius = np.where(south, rng.uniform(0.1, 1.0, n), rng.uniform(1.5, 3.0, n))
    target = radius * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    sweep = dem_sweep(system, ico2, invert_plane(target), 1.4)

    part = sweep.partition
    L = system.L.toarray()
    L_ii = L[np.ix_(part.interior, part.interior)]
    L_ib = L[np.ix_(part.interior, part.boundary)]
    expected = np.linalg.solve(L_ii, -L_ib @ target[part.boundary])
    np.testing.assert_allclose(sweep.h[part.interior], expected, atol=1e-10)
    np.testing.assert_allclose(sweep.h[part.boundary_prime], target[part.boundary_prime], rtol=1e-14)

    hb = target[part.boundary]
    hi = sweep.h[part.interior]
    assert hi.real.min() >= hb.real.min() - 1e-10
    assert hi.real.max() <= hb.real.max() + 1e-10
    assert hi.imag.min() >= hb.imag.min() - 1e-10
    assert hi.imag.max() <= hb.imag.max() + 1e-10


def test_sweep_rejects_bad_hemisphere_tag(tetra):
    system = assemble_cotangent_laplacian(tetra)
    with pytest.raises(ValueError):
        dem_sweep(system, tetra, np.array([2.0, 2.0, 0.5, 0.5]), 1.4, s=3)


def test_zero_iterations_return_initial_map(ico):
    initial = initial_spherical_map(ico)
    f, report = run_dem(ico, max_iter=0, initial=initial)
    np.testing.assert_array_equal(f, initial.f)
    assert not report.converged
    assert report.iterations == 0
    assert report.energy == report.initial_energy == initial.quality
    assert report.energies == []


def test_run_dem_records_series(ico2):
    f, report = run_dem(ico2, max_iter=5, tol=0.0)
    assert report.iterations == 5
    assert len(report.energies) == len(report.residuals_h1) == len(report.residuals_h2) == 5
    assert max(report.harmonic_residuals) < 1e-10
    assert np.max(np.abs(np.linalg.norm(f, axis=1) - 1.0)) < 1e-10
    assert report.n1 > 0 and report.m1 > 0 and report.n2 > 0 and report.m2 > 0
    assert report.algorithm == "dem"
    assert report.delaunay


@pytest.mark.slow
def test_dem_converges_on_icosphere(ico3):
    f, report = run_dem(ico3, rho=1.1, tol=1e-9, max_iter=1000)
    assert report.converged
    assert report.energy <= report.initial_energy * (1.0 + 1e-6)
    assert np.max(np.abs(np.linalg.norm(f, axis=1) - 1.0)) < 1e-10
    assert report.distortion is not None
