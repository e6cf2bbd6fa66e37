"""Tetrahedral mesh and per-element stress tensor I/O.

File formats are line-oriented ASCII with explicit version headers so golden
files stay diff-able. Indices are 0-based. ``#``-prefixed comment lines are
allowed anywhere after the header.

Tet mesh::

    tetmesh v1 <nv> <nt>
    v <x> <y> <z>          (nv lines, millimetres)
    t <i0> <i1> <i2> <i3>  (nt lines)

Stress field (one symmetric tensor per tet, MPa)::

    stress v1 <nt>
    <sxx> <syy> <szz> <sxy> <syz> <sxz>
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

TENSOR_COMPONENTS = ("sxx", "syy", "szz", "sxy", "syz", "sxz")

_TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


class MeshFormatError(ValueError):
    """A mesh or stress file violates its format contract."""


@dataclass
class TetMesh:
    """Tetrahedral mesh with optional element adjacency.

    Parameters
    ----------
    vertices : (nv, 3) float array
        Vertex positions in millimetres.
    tets : (nt, 4) int array
        Vertex indices per tetrahedron, positively oriented (positive signed
        volume).
    face_adjacency : csr_matrix or None
        Boolean nt x nt matrix linking tets that share a triangular face.
        ``None`` until :func:`build_adjacency` runs.
    vertex_adjacency : csr_matrix or None
        Boolean nt x nt matrix linking tets that share at least one vertex
        (a superset of ``face_adjacency``, excluding the diagonal).
    """

    vertices: np.ndarray
    tets: np.ndarray
    face_adjacency: sparse.csr_matrix | None = None
    vertex_adjacency: sparse.csr_matrix | None = None

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_tets(self):
        return len(self.tets)

    def z_extent(self):
        """(z_min, z_max) of the vertex set."""
        z = self.vertices[:, 2]
        return float(z.min()), float(z.max())


def adjacency_neighbors(adj, i):
    """Neighbor indices of element ``i`` in a CSR adjacency matrix."""
    return adj.indices[adj.indptr[i]:adj.indptr[i + 1]]


def tet_volumes(vertices, tets):
    """Signed volume of each tetrahedron."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(tets)
    a = v[t[:, 1]] - v[t[:, 0]]
    b = v[t[:, 2]] - v[t[:, 0]]
    c = v[t[:, 3]] - v[t[:, 0]]
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def make_tet_mesh(vertices, tets):
    """Validate raw arrays and wrap them in a :class:`TetMesh`.

    Raises ``MeshFormatError`` on out-of-range indices, repeated vertices
    within a tet, or non-positive signed volumes.
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
    tets = np.ascontiguousarray(tets, dtype=np.int64).reshape(-1, 4)
    nv = len(vertices)
    if tets.size:
        if tets.min() < 0 or tets.max() >= nv:
            bad = int(np.flatnonzero((tets < 0).any(axis=1) | (tets >= nv).any(axis=1))[0])
            raise MeshFormatError(f"tet {bad} references a vertex outside 0..{nv - 1}")
        sorted_t = np.sort(tets, axis=1)
        dup = (np.diff(sorted_t, axis=1) == 0).any(axis=1)
        if dup.any():
            raise MeshFormatError(f"tet {int(np.flatnonzero(dup)[0])} repeats a vertex index")
        vol = tet_volumes(vertices, tets)
        if (vol <= 0).any():
            bad = int(np.flatnonzero(vol <= 0)[0])
            raise MeshFormatError(
                f"tet {bad} has non-positive signed volume ({vol[bad]:.3e}); "
                "fix the FEA export instead of silently reordering"
            )
    return TetMesh(vertices=vertices, tets=tets)


def _data_lines(path):
    """Yield (line_number, line) skipping blanks and # comments."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_tet_mesh(path):
    """Load a ``tetmesh v1`` file; adjacency is left unbuilt."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MeshFormatError(f"{path}: empty file") from None
    parts = header.split()
    if len(parts) != 4 or parts[0] != "tetmesh" or parts[1] != "v1":
        raise MeshFormatError(f"{path}:{lineno}: expected header 'tetmesh v1 <nv> <nt>'")
    try:
        nv, nt = int(parts[2]), int(parts[3])
    except ValueError:
        raise MeshFormatError(f"{path}:{lineno}: non-integer counts in header") from None

    vertices = np.empty((nv, 3), dtype=np.float64)
    tets = np.empty((nt, 4), dtype=np.int64)
    for i in range(nv):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshFormatError(f"{path}: truncated after {i} of {nv} vertex lines") from None
        parts = line.split()
        if len(parts) != 4 or parts[0] != "v":
            raise MeshFormatError(f"{path}:{lineno}: expected 'v <x> <y> <z>'")
        try:
            vertices[i] = [float(parts[1]), float(parts[2]), float(parts[3])]
        except ValueError:
            raise MeshFormatError(f"{path}:{lineno}: bad vertex coordinate") from None
    for i in range(nt):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshFormatError(f"{path}: truncated after {i} of {nt} tet lines") from None
        parts = line.split()
        if len(parts) != 5 or parts[0] != "t":
            raise MeshFormatError(f"{path}:{lineno}: expected 't <i0> <i1> <i2> <i3>'")
        try:
            idx = [int(p) for p in parts[1:]]
        except ValueError:
            raise MeshFormatError(f"{path}:{lineno}: bad tet index") from None
        for j in idx:
            if j < 0 or j >= nv:
                raise MeshFormatError(f"{path}:{lineno}: vertex index {j} outside 0..{nv - 1}")
        tets[i] = idx
    if not np.isfinite(vertices).all():
        raise MeshFormatError(f"{path}: non-finite vertex coordinate")
    return make_tet_mesh(vertices, tets)


def save_tet_mesh(mesh, path):
    """Write a ``tetmesh v1`` file with round-trip-exact float formatting."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"tetmesh v1 {mesh.num_vertices} {mesh.num_tets}\n")
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.tets:
            fh.write(f"t {int(t[0])} {int(t[1])} {int(t[2])} {int(t[3])}\n")


def load_stress_field(path, mesh):
    """Load a ``stress v1`` file; tensor ``i`` belongs to tet ``i``.

    Returns an ``(nt, 6)`` array ordered ``(sxx, syy, szz, sxy, syz, sxz)``.
    """
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MeshFormatError(f"{path}: empty file") from None
    parts = header.split()
    if len(parts) != 3 or parts[0] != "stress" or parts[1] != "v1":
        raise MeshFormatError(f"{path}:{lineno}: expected header 'stress v1 <nt>'")
    nt = int(parts[2])
    if nt != mesh.num_tets:
        raise MeshFormatError(
            f"{path}: header count {nt} does not match mesh element count {mesh.num_tets}"
        )
    tensors = np.empty((nt, 6), dtype=np.float64)
    for i in range(nt):
        try:
            lineno, line = next(lines)
        except StopIteration:
            raise MeshFormatError(f"{path}: expected {nt} tensor lines, found {i}") from None
        parts = line.split()
        if len(parts) != 6:
            raise MeshFormatError(f"{path}:{lineno}: expected 6 stress components")
        try:
            tensors[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"{path}:{lineno}: bad stress value") from None
        if not np.isfinite(tensors[i]).all():
            raise MeshFormatError(f"{path}:{lineno}: non-finite stress value")
    extra = next(lines, None)
    if extra is not None:
        raise MeshFormatError(f"{path}:{extra[0]}: trailing data beyond {nt} tensor lines")
    return tensors


def save_stress_field(tensors, path):
    """Write a ``stress v1`` file."""
    tensors = np.asarray(tensors, dtype=np.float64).reshape(-1, 6)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"stress v1 {len(tensors)}\n")
        for row in tensors:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def tensor_matrices(tensors):
    """Expand ``(n, 6)`` component rows into ``(n, 3, 3)`` symmetric matrices."""
    t = np.atleast_2d(np.asarray(tensors, dtype=float))
    m = np.empty((len(t), 3, 3))
    m[:, 0, 0] = t[:, 0]
    m[:, 1, 1] = t[:, 1]
    m[:, 2, 2] = t[:, 2]
    m[:, 0, 1] = m[:, 1, 0] = t[:, 3]
    m[:, 1, 2] = m[:, 2, 1] = t[:, 4]
    m[:, 0, 2] = m[:, 2, 0] = t[:, 5]
    return m


def build_adjacency(mesh):
    """Return a copy of ``mesh`` with face and vertex adjacency populated.

    Face adjacency links tets sharing a triangular face; vertex adjacency
    links tets sharing at least one vertex. Idempotent. Raises
    ``MeshFormatError`` when a face is shared by more than two tets.
    """
    nt = mesh.num_tets
    faces = {}
    for i, tet in enumerate(mesh.tets):
        for fa in _TET_FACES:
            key = tuple(sorted((int(tet[fa[0]]), int(tet[fa[1]]), int(tet[fa[2]]))))
            faces.setdefault(key, []).append(i)
    rows, cols = [], []
    for key, owners in faces.items():
        if len(owners) > 2:
            raise MeshFormatError(f"non-manifold face {key} shared by {len(owners)} tets")
        if len(owners) == 2:
            a, b = owners
            rows += [a, b]
            cols += [b, a]
    face_adj = sparse.csr_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(nt, nt)
    )

    if nt:
        incidence = sparse.csr_matrix(
            (np.ones(nt * 4, dtype=np.int8),
             (np.repeat(np.arange(nt), 4), mesh.tets.ravel())),
            shape=(nt, mesh.num_vertices),
        )
        vert_adj = (incidence @ incidence.T).tocsr()
        vert_adj.setdiag(0)
        vert_adj.eliminate_zeros()
        vert_adj.data = np.ones_like(vert_adj.data)
    else:
        vert_adj = sparse.csr_matrix((0, 0), dtype=np.int8)
    return replace(mesh, face_adjacency=face_adj, vertex_adjacency=vert_adj.astype(np.int8))
