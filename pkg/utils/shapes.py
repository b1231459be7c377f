# SPDX-License-Identifier: MIT

import numpy as np

from utils.mesh_handler import Mesh

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def _orient_outward(vertices, faces):
    """Flip faces whose normal points towards the origin (star-shaped inputs only)."""
    faces = np.array(faces, dtype=np.int64)
    p0, p1, p2 = vertices[faces[:, 0]], vertices[faces[:, 1]], vertices[faces[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    inward = np.einsum("ij,ij->i", normals, p0 + p1 + p2) < 0
    faces[inward] = faces[inward][:, [0, 2, 1]]
    return faces


def _unit(vertices):
    vertices = np.asarray(vertices, dtype=float)
    return vertices / np.linalg.norm(vertices, axis=1, keepdims=True)


def tetrahedron():
    """Regular tetrahedron inscribed in the unit sphere."""
    vertices = _unit([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])
    faces = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return Mesh(vertices, _orient_outward(vertices, faces))


def octahedron():
    vertices = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    faces = [[x, y, z] for x in (0, 1) for y in (2, 3) for z in (4, 5)]
    return Mesh(vertices, _orient_outward(vertices, faces))


def icosahedron():
    t = GOLDEN
    vertices = _unit([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ])
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    return Mesh(vertices, _orient_outward(vertices, faces))


def subdivide(mesh, project=True):
    """One 1-to-4 midpoint subdivision; orientation is preserved."""
    vertices = [tuple(v) for v in mesh.vertices]
    midpoint = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in midpoint:
            midpoint[key] = len(vertices)
            vertices.append(tuple((mesh.vertices[a] + mesh.vertices[b]) / 2.0))
        return midpoint[key]

    faces = []
    for a, b, c in mesh.faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    vertices = np.array(vertices)
    if project:
        vertices = _unit(vertices)
    return Mesh(vertices, faces)


def icosphere(level=2):
    """Unit icosphere with 10 * 4**level + 2 vertices."""
    mesh = icosahedron()
    for _ in range(level):
        mesh = subdivide(mesh)
    return mesh


def torus(nu=12, nv=8, major=1.0, minor=0.4):
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    vertices = np.column_stack([
        ((major + minor * np.cos(vv)) * np.cos(uu)).ravel(),
        ((major + minor * np.cos(vv)) * np.sin(uu)).ravel(),
        (minor * np.sin(vv)).ravel(),
    ])
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces.extend([[a, b, c], [a, c, d]])
    return Mesh(vertices, faces)
