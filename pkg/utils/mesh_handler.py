# SPDX-License-Identifier: MIT

import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from utils.errors import GeometryError, MeshFormatError, MeshValidationError

logger = logging.getLogger(__name__)

MESH_FORMATS = ("OFF", "OBJ")

# A face is degenerate when its area is below this fraction of the mean face area.
DEGENERATE_AREA_RATIO = 1e-14


class Mesh:
    """Closed triangle mesh with read-only vertex/face arrays.

    Parameters
    ----------
    vertices : (n, 3) array_like of float
    faces : (F, 3) array_like of int, 0-based, consistently ordered

    Attributes
    ----------
    edges : (E, 2) int array
        Unordered vertex pairs, each stored once with ``i < j``.
    adj_sym : csr_matrix
        Symmetric adjacency; entry (i, j) counts the faces sharing edge [i, j].
    adj_dir : csr_matrix
        Directed adjacency; entry (i, j) counts the half-edges i -> j.
    """

    def __init__(self, vertices, faces):
        vertices = np.array(vertices, dtype=float)
        faces = np.array(faces, dtype=np.int64)
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshFormatError("shape", f"vertices should have shape (n, 3), got {vertices.shape}")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshFormatError("non-triangular", f"faces should have shape (F, 3), got {faces.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshFormatError("index-range", f"face index outside [0, {len(vertices) - 1}]")

        vertices.flags.writeable = False
        faces.flags.writeable = False
        self.vertices = vertices
        self.faces = faces

        n = len(vertices)
        tails = faces.ravel()
        heads = faces[:, [1, 2, 0]].ravel()
        ones = np.ones(len(tails))
        self.adj_dir = sparse.csr_matrix((ones, (tails, heads)), shape=(n, n))
        self.adj_sym = (self.adj_dir + self.adj_dir.T).tocsr()
        upper = sparse.triu(self.adj_sym, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        self.edges = np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)
        self.edges.flags.writeable = False

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_edges(self):
        return len(self.edges)

    def euler(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def with_vertices(self, vertices):
        """Same connectivity, new coordinates."""
        return Mesh(vertices, self.faces)

    def __repr__(self):
        return f"Mesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces})"


def _parse_error(lineno, message):
    return MeshFormatError("parse", f"line {lineno}: {message}")


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _parse_vertex(tokens, lineno, line):
    try:
        vertex = [float(x) for x in tokens[:3]]
    except ValueError:
        raise _parse_error(lineno, f"malformed vertex: {line!r}")
    if len(vertex) != 3:
        raise _parse_error(lineno, f"vertex needs 3 coordinates: {line!r}")
    if not all(math.isfinite(x) for x in vertex):
        raise _parse_error(lineno, f"non-finite vertex coordinate: {line!r}")
    return vertex


def _read_off(text):
    lines = _data_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise _parse_error(1, "empty OFF file")
    tokens = header.split()
    if tokens[0] != "OFF":
        raise _parse_error(lineno, f"not a valid OFF header: {header!r}")
    counts = tokens[1:]
    if not counts:
        try:
            lineno, counts_line = next(lines)
        except StopIteration:
            raise _parse_error(lineno, "missing counts line")
        counts = counts_line.split()
    try:
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise _parse_error(lineno, f"malformed counts line: {' '.join(counts)!r}")

    vertices = []
    for _ in range(n_vertices):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise _parse_error(lineno, f"expected {n_vertices} vertices, found {len(vertices)}")
        vertices.append(_parse_vertex(line.split(), lineno, line))

    faces = []
    for _ in range(n_faces):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise _parse_error(lineno, f"expected {n_faces} faces, found {len(faces)}")
        try:
            values = [int(x) for x in line.split()]
        except ValueError:
            raise _parse_error(lineno, f"malformed face: {line!r}")
        if not values or values[0] != 3 or len(values) < 4:
            raise MeshFormatError("non-triangular", f"line {lineno}: only triangular faces are supported: {line!r}")
        face = values[1:4]
        if min(face) < 0 or max(face) >= n_vertices:
            raise MeshFormatError("index-range", f"line {lineno}: vertex index out of range: {line!r}")
        faces.append(face)
    return vertices, faces


def _obj_index(token, n_vertices, lineno):
    try:
        index = int(token.split("/")[0])
    except ValueError:
        raise _parse_error(lineno, f"malformed face index {token!r}")
    if index < 0:
        # negative indices are relative to the vertices read so far
        index = n_vertices + index + 1
    if index < 1 or index > n_vertices:
        raise MeshFormatError("index-range", f"line {lineno}: vertex index {token!r} out of range")
    return index - 1


def _read_obj(text):
    vertices, faces = [], []
    for lineno, line in _data_lines(text):
        tokens = line.split()
        if tokens[0] == "v":
            vertices.append(_parse_vertex(tokens[1:], lineno, line))
        elif tokens[0] == "f":
            if len(tokens) != 4:
                raise MeshFormatError("non-triangular", f"line {lineno}: only triangular faces are supported: {line!r}")
            faces.append([_obj_index(t, len(vertices), lineno) for t in tokens[1:]])
    return vertices, faces


def load_mesh(source, format="OFF"):
    """Parse an OFF or OBJ mesh from a byte/text stream or a string.

    Only ``v`` and ``f`` records of OBJ files are honored. No validation is
    done beyond parsing; see :func:`validate_genus_zero`.
    """
    format = format.upper()
    if format not in MESH_FORMATS:
        raise MeshFormatError("format", f"unsupported mesh format {format!r}")
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise MeshFormatError("parse", "mesh file is not valid UTF-8 text")

    vertices, faces = _read_off(data) if format == "OFF" else _read_obj(data)
    mesh = Mesh(np.asarray(vertices, dtype=float).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3))
    logger.debug("Loaded %s mesh: %r", format, mesh)
    return mesh


def mesh_format_from_path(path):
    suffix = os.path.splitext(str(path))[1].lower()
    if suffix == ".off":
        return "OFF"
    if suffix == ".obj":
        return "OBJ"
    raise MeshFormatError("format", f"cannot infer mesh format from {path!r} (expected .off or .obj)")


def read_mesh(path):
    with open(path, "rb") as f:
        return load_mesh(f, mesh_format_from_path(path))


def format_mesh(mesh, format="OFF"):
    """Serialize a mesh to OFF (0-based) or OBJ (1-based) text."""
    format = format.upper()
    # repr() round-trips exactly
    coords = "\n".join(" ".join(repr(float(x)) for x in row) for row in mesh.vertices)
    buf = io.StringIO()
    if format == "OFF":
        buf.write("OFF\n")
        buf.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        if mesh.n_vertices:
            buf.write(coords + "\n")
        for a, b, c in mesh.faces:
            buf.write(f"3 {a} {b} {c}\n")
    elif format == "OBJ":
        for row in mesh.vertices:
            buf.write("v " + " ".join(repr(float(x)) for x in row) + "\n")
        for a, b, c in mesh.faces:
            buf.write(f"f {a + 1} {b + 1} {c + 1}\n")
    else:
        raise MeshFormatError("format", f"unsupported mesh format {format!r}")
    return buf.getvalue()


def write_mesh(mesh, path, format=None):
    format = format or mesh_format_from_path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_mesh(mesh, format))


def triangle_areas(points, faces):
    e1 = points[faces[:, 1]] - points[faces[:, 0]]
    e2 = points[faces[:, 2]] - points[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def face_areas(mesh):
    return triangle_areas(mesh.vertices, mesh.faces)


def total_area(mesh):
    return float(np.sum(face_areas(mesh)))


def mesh_diameter(mesh):
    """Bounding-box diagonal, an upper bound on the vertex-set diameter."""
    if mesh.n_vertices == 0:
        return 0.0
    return float(np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))


def degenerate_faces(points, faces):
    areas = triangle_areas(points, faces)
    if len(areas) == 0:
        return np.zeros(0, dtype=np.int64)
    mean_area = areas.mean()
    return np.flatnonzero(areas <= DEGENERATE_AREA_RATIO * mean_area)


@dataclass
class ValidationReport:
    n_vertices: int
    n_edges: int
    n_faces: int
    euler: int
    n_components: int
    checks: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    @property
    def failed_checks(self):
        return [name for name, ok in self.checks.items() if not ok]

    def summary(self):
        if self.passed:
            return f"V={self.n_vertices} E={self.n_edges} F={self.n_faces} chi={self.euler}"
        return "; ".join(self.messages[name] for name in self.failed_checks)


def _face_components(mesh):
    """Connected components of the face dual graph (faces sharing an edge)."""
    n_faces = mesh.n_faces
    if n_faces == 0:
        return 0
    n = mesh.n_vertices
    corners = mesh.faces
    lo = np.minimum(corners, corners[:, [1, 2, 0]]).ravel()
    hi = np.maximum(corners, corners[:, [1, 2, 0]]).ravel()
    keys = lo * n + hi
    owners = np.repeat(np.arange(n_faces), 3)
    order = np.argsort(keys, kind="stable")
    keys, owners = keys[order], owners[order]
    same = keys[1:] == keys[:-1]
    rows, cols = owners[:-1][same], owners[1:][same]
    dual = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_faces, n_faces))
    n_components, _ = connected_components(dual, directed=False)
    return n_components


def validate_genus_zero(mesh, raise_on_failure=True):
    """Check that ``mesh`` is a closed, consistently oriented, connected
    genus-zero surface without degenerate faces.

    Every check is evaluated; the report lists all failures. With
    ``raise_on_failure`` a failing report is raised as MeshValidationError.
    """
    face_multiplicity = mesh.adj_sym.data
    half_edge_multiplicity = mesh.adj_dir.data
    n_components = _face_components(mesh)
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.faces.ravel()] = True

    report = ValidationReport(
        n_vertices=mesh.n_vertices,
        n_edges=mesh.n_edges,
        n_faces=mesh.n_faces,
        euler=mesh.euler(),
        n_components=n_components,
    )
    n_boundary = int(np.sum(face_multiplicity == 1)) // 2
    n_nonmanifold = int(np.sum(face_multiplicity > 2)) // 2
    report.checks["not-closed"] = mesh.n_faces > 0 and n_boundary == 0
    report.messages["not-closed"] = f"not closed: {n_boundary} boundary edge(s)" if mesh.n_faces else "not closed: no faces"
    report.checks["non-manifold"] = n_nonmanifold == 0
    report.messages["non-manifold"] = f"{n_nonmanifold} edge(s) shared by more than two faces"
    n_inconsistent = int(np.sum(half_edge_multiplicity > 1))
    report.checks["orientation"] = n_inconsistent == 0
    report.messages["orientation"] = f"inconsistent winding: {n_inconsistent} half-edge(s) traversed twice in the same direction"
    report.checks["disconnected"] = n_components == 1 and bool(used.all())
    report.messages["disconnected"] = (
        f"disconnected: {n_components} face component(s), {int(np.sum(~used))} unused vertex(es)"
    )
    report.checks["genus"] = report.euler == 2
    report.messages["genus"] = f"wrong genus: Euler characteristic V - E + F = {report.euler}, expected 2"
    n_nonfinite = int(np.sum(~np.isfinite(mesh.vertices).all(axis=1)))
    report.checks["non-finite"] = n_nonfinite == 0
    report.messages["non-finite"] = f"{n_nonfinite} vertex(es) with non-finite coordinates"
    n_degenerate = len(degenerate_faces(mesh.vertices, mesh.faces))
    report.checks["degenerate-face"] = n_degenerate == 0
    report.messages["degenerate-face"] = f"{n_degenerate} degenerate (zero-area) face(s)"

    if report.passed:
        logger.info("Mesh passed genus-zero validation: %s", report.summary())
    elif raise_on_failure:
        raise MeshValidationError(report)
    return report


def normalize_area(mesh, target=1.0):
    """Uniformly scale vertices about the origin so the total area is ``target``."""
    if not target > 0:
        raise GeometryError("mesh-core", "target-area", f"target area must be positive, got {target}")
    area = total_area(mesh)
    if not area > 0:
        raise GeometryError("mesh-core", "zero-area", "total surface area is zero")
    scale = np.sqrt(target / area)
    return mesh.with_vertices(mesh.vertices * scale)


def triangle_corner_angles(points, faces):
    """Interior angles (radians) at the three corners of every triangle.

    Uses atan2(|u x v|, u . v), which is accurate near 0 and pi and makes the
    three angles of a face sum to pi up to round-off.
    """
    p0, p1, p2 = points[faces[:, 0]], points[faces[:, 1]], points[faces[:, 2]]
    angles = np.empty(faces.shape, dtype=float)
    for corner, (apex, a, b) in enumerate(((p0, p1, p2), (p1, p2, p0), (p2, p0, p1))):
        u, v = a - apex, b - apex
        angles[:, corner] = np.arctan2(np.linalg.norm(np.cross(u, v), axis=1), np.einsum("ij,ij->i", u, v))
    return angles


def corner_angles(mesh):
    bad = degenerate_faces(mesh.vertices, mesh.faces)
    if len(bad):
        raise GeometryError("mesh-core", "degenerate-face", f"face {int(bad[0])} is degenerate (collinear vertices)")
    return triangle_corner_angles(mesh.vertices, mesh.faces)
