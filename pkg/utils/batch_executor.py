# SPDX-License-Identifier: MIT

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed

from conformal_maps.dem import run_dem
from conformal_maps.diagnostics import batch_row
from conformal_maps.initial_map import initial_spherical_map
from conformal_maps.mdem import execute_mdem
from utils.errors import ConformalMapError
from utils.laplacian import assemble_cotangent_laplacian
from utils.run_config import DEFAULT_RHO, prepare_mesh

logger = logging.getLogger(__name__)


def mesh_id_from_path(path):
    return os.path.splitext(os.path.basename(path))[0]


def process_mesh(index, path, config):
    """MDEM plus certificate for one mesh file; returns (index, row, seconds)."""
    start_time = time.time()
    mesh_id = mesh_id_from_path(path)
    try:
        mesh = prepare_mesh(path, config.area_normalization)
        system = assemble_cotangent_laplacian(mesh)
        initial = initial_spherical_map(mesh, system)
        run = execute_mdem(
            mesh, rho=config.rho, tol=config.tol, max_iter=config.max_iter, system=system, initial=initial,
        )
        dem_report = None
        if config.with_dem:
            _, dem_report = run_dem(
                mesh, rho=DEFAULT_RHO["dem"], tol=config.tol, max_iter=config.max_iter, system=system, initial=initial,
            )
        row = batch_row(mesh_id, run.report, dem_report)
        row["status"] = "ok"
    except (ConformalMapError, OSError) as e:
        logger.warning("Mesh %s failed: %s", mesh_id, e)
        row = {"mesh_id": mesh_id, "status": f"failed: {e}"}
    except Exception as e:
        logger.exception("Unexpected error on mesh %s", mesh_id)
        row = {"mesh_id": mesh_id, "status": f"failed: {type(e).__name__}: {e}"}
    return index, row, time.time() - start_time


def process_meshes(paths, config, workers=1):
    """Run :func:`process_mesh` over ``paths``; rows come back in input order.

    Per-mesh failures are recorded on their row and never stop the batch.
    """
    count = 0
    results = []

    if workers == 1:
        for i, path in enumerate(paths):
            index, row, exec_time = process_mesh(i, path, config)
            results.append((index, row))
            count += 1
            print(f"Processed mesh {count}/{len(paths)} ({row['mesh_id']}) in {exec_time:.2f} seconds")
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            future_to_index = {executor.submit(process_mesh, i, path, config): i for i, path in enumerate(paths)}

            for future in as_completed(future_to_index):
                index = future_to_index[future]
                exec_time = 0
                try:
                    _, row, exec_time = future.result()
                except Exception as e:
                    row = {"mesh_id": mesh_id_from_path(paths[index]), "status": f"failed: {e}"}
                results.append((index, row))
                count += 1
                print(f"Processed mesh {count}/{len(paths)} ({row['mesh_id']}) in {exec_time:.2f} seconds")

    results.sort(key=lambda x: x[0])
    return [row for _, row in results]
