"""Planar cross-sections of a tetrahedral mesh and field projection.

A horizontal plane cuts each straddling tetrahedron in a triangle or a quad
(split into two triangles), producing a welded planar triangulation per
layer. The 3D element field projects onto the layer faces through each
triangle's source tetrahedron.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .stress3d import DEFINED, UNDEFINED

logger = logging.getLogger(__name__)

_TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

#: Planar projections shorter than this are treated as undefined (the source
#: vector is essentially vertical).
MIN_PLANAR_NORM = 1e-6

#: Cut vertices closer than this are welded into one (mm).
WELD_TOLERANCE = 1e-6


class EmptyLayerError(ValueError):
    """The slicing plane does not intersect the solid."""


@dataclass
class LayerMesh:
    """Triangulated planar cross-section at height ``z``.

    ``triangles`` are CCW-oriented with positive area. ``boundary_edges``
    are directed vertex-index pairs tracing the section outline with the
    interior on the left (outer loops CCW, holes CW). ``face_source[i]`` is
    the tetrahedron that triangle ``i`` was cut from.
    """

    z: float
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    face_source: np.ndarray
    face_area: np.ndarray

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.triangles)


@dataclass
class FaceField:
    """Per-face planar field on a layer.

    ``v`` are projected direction vectors (norm in (0, 1] while defined),
    ``sigma`` positive stress weights, ``u`` the density-weighted vectors
    (zero until weighting runs), ``status`` DEFINED/UNDEFINED codes.
    """

    v: np.ndarray
    sigma: np.ndarray
    u: np.ndarray
    status: np.ndarray

    @property
    def num_faces(self):
        return len(self.sigma)


def triangle_areas(vertices, triangles):
    """Signed area of each triangle (positive = CCW)."""
    p = vertices[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))


def slice_at_height(mesh, z):
    """Intersect the mesh with the horizontal plane at height ``z``.

    The plane must lie strictly inside the mesh z-extent; if it coincides
    with any vertex height it is nudged up by ``1e-7`` of the extent so every
    vertex is strictly above or below. Cut points are welded along shared
    tetrahedron edges and deduplicated within :data:`WELD_TOLERANCE`.
    """
    zs = mesh.vertices[:, 2]
    z_min, z_max = mesh.z_extent()
    extent = z_max - z_min
    if not (z_min < z < z_max) or extent <= 0:
        raise EmptyLayerError(f"plane z={z} outside solid extent [{z_min}, {z_max}]")
    for _ in range(64):
        if not np.isclose(zs, z, rtol=0.0, atol=1e-12 * max(extent, 1.0)).any():
            break
        z = z + 1e-7 * extent
    if z >= z_max:
        raise EmptyLayerError(f"perturbed plane z={z} left the solid")

    above = zs > z
    counts = above[mesh.tets].sum(axis=1)
    cut = np.flatnonzero((counts > 0) & (counts < 4))
    if len(cut) == 0:
        raise EmptyLayerError(f"plane z={z} cuts no tetrahedra")

    verts = []
    edge_point = {}

    def cut_point(a, b):
        key = (a, b) if a < b else (b, a)
        idx = edge_point.get(key)
        if idx is None:
            za, zb = zs[key[0]], zs[key[1]]
            t = (z - za) / (zb - za)
            p = (1.0 - t) * mesh.vertices[key[0], :2] + t * mesh.vertices[key[1], :2]
            idx = len(verts)
            verts.append(p)
            edge_point[key] = idx
        return idx

    tri_list = []
    src_list = []
    for ti in cut:
        tet = mesh.tets[ti]
        pos = [int(v) for v in tet if above[v]]
        neg = [int(v) for v in tet if not above[v]]
        if len(pos) == 1 or len(neg) == 1:
            lone, rest = (pos[0], neg) if len(pos) == 1 else (neg[0], pos)
            tri = [cut_point(lone, r) for r in rest]
            tri_list.append(tri)
            src_list.append(ti)
        else:
            a1, a2 = pos
            b1, b2 = neg
            q = [cut_point(a1, b1), cut_point(a1, b2), cut_point(a2, b2), cut_point(a2, b1)]
            p = [verts[i] for i in q]
            d02 = np.linalg.norm(p[0] - p[2])
            d13 = np.linalg.norm(p[1] - p[3])
            if d02 <= d13:
                tri_list += [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
            else:
                tri_list += [[q[0], q[1], q[3]], [q[1], q[2], q[3]]]
            src_list += [ti, ti]

    vertices = np.asarray(verts, dtype=float)
    triangles = np.asarray(tri_list, dtype=np.int64)
    face_source = np.asarray(src_list, dtype=np.int64)

    vertices, triangles = _weld_close_vertices(vertices, triangles)
    triangles, face_source = _drop_degenerate(vertices, triangles, face_source)
    if len(triangles) == 0:
        raise EmptyLayerError(f"plane z={z} produced only degenerate geometry")

    area = triangle_areas(vertices, triangles)
    flip = area < 0
    triangles[flip] = triangles[flip][:, ::-1]
    area = np.abs(area)

    boundary = _boundary_edges(triangles)
    layer = LayerMesh(z=float(z), vertices=vertices, triangles=triangles,
                      boundary_edges=boundary, face_source=face_source,
                      face_area=area)
    _check_boundary_degrees(layer)
    return layer


def _weld_close_vertices(vertices, triangles):
    """Merge vertices closer than the weld tolerance (exact coordinates kept)."""
    from scipy.spatial import cKDTree

    if len(vertices) == 0:
        return vertices, triangles
    tree = cKDTree(vertices)
    pairs = tree.query_pairs(WELD_TOLERANCE, output_type="ndarray")
    if len(pairs) == 0:
        return vertices, triangles
    remap = np.arange(len(vertices))
    for a, b in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        ra = remap[a]
        rb = remap[b]
        lo, hi = (ra, rb) if ra < rb else (rb, ra)
        remap[remap == hi] = lo
    used = np.unique(remap)
    compact = np.full(len(vertices), -1)
    compact[used] = np.arange(len(used))
    return vertices[used], compact[remap[triangles]]


def _drop_degenerate(vertices, triangles, face_source):
    if len(triangles) == 0:
        return triangles, face_source
    distinct = ((triangles[:, 0] != triangles[:, 1])
                & (triangles[:, 1] != triangles[:, 2])
                & (triangles[:, 0] != triangles[:, 2]))
    area_ok = np.abs(triangle_areas(vertices, triangles)) > 1e-12
    keep = distinct & area_ok
    return triangles[keep], face_source[keep]


def _boundary_edges(triangles):
    """Directed edges used by exactly one triangle, in triangle order."""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    if (counts > 2).any():
        raise ValueError("non-manifold weld: an edge is shared by more than two triangles")
    return edges[counts[inverse] == 1]


def _check_boundary_degrees(layer):
    b = layer.boundary_edges
    if len(b) == 0:
        raise ValueError(f"layer z={layer.z}: no boundary edges")
    out_deg = np.bincount(b[:, 0], minlength=layer.num_vertices)
    in_deg = np.bincount(b[:, 1], minlength=layer.num_vertices)
    on_boundary = (out_deg + in_deg) > 0
    if not ((out_deg[on_boundary] == 1).all() and (in_deg[on_boundary] == 1).all()):
        raise ValueError(f"layer z={layer.z}: boundary does not form simple closed loops")


def boundary_loops(layer):
    """Boundary loops as lists of vertex indices, interior on the left.

    Loops start at their lowest-index vertex and are returned sorted by that
    start index, so the output is deterministic.
    """
    succ = {int(a): int(b) for a, b in layer.boundary_edges}
    seen = set()
    loops = []
    for start in sorted(succ):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = succ[start]
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            cur = succ[cur]
        loops.append(np.asarray(loop, dtype=np.int64))
    return loops


def layer_edges(layer):
    """Unique undirected edges of the layer triangulation, sorted."""
    t = layer.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    return np.unique(edges, axis=0)


def face_edge_adjacency(layer):
    """CSR matrix linking faces that share an edge."""
    t = layer.triangles
    nf = len(t)
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    owner = np.tile(np.arange(nf), 3)
    edges = np.sort(edges, axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, owner = edges[order], owner[order]
    same = (np.diff(edges[:, 0]) == 0) & (np.diff(edges[:, 1]) == 0)
    a = owner[:-1][same]
    b = owner[1:][same]
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    return sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(nf, nf))


def vertex_edge_graph(layer):
    """CSR matrix of the vertex graph weighted by Euclidean edge length."""
    edges = layer_edges(layer)
    w = np.linalg.norm(layer.vertices[edges[:, 0]] - layer.vertices[edges[:, 1]], axis=1)
    nv = layer.num_vertices
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    return sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(nv, nv))


def project_field(field3d, layer):
    """Project the 3D element field onto a layer through face provenance.

    Each face takes its source element's vector dropped to the xy-plane and
    the element's stress weight unchanged. Faces whose source is undefined or
    weak, or whose projection is shorter than :data:`MIN_PLANAR_NORM`, come
    out undefined (weights are still carried).
    """
    src = layer.face_source
    v3 = field3d.vectors[src]
    v = np.ascontiguousarray(v3[:, :2])
    sigma = field3d.sigma[src].copy()
    planar = np.linalg.norm(v, axis=1)
    defined = (field3d.status[src] == DEFINED) & (planar > MIN_PLANAR_NORM)
    status = np.where(defined, DEFINED, UNDEFINED).astype(np.int8)
    v[~defined] = 0.0
    return FaceField(v=v, sigma=sigma, u=np.zeros_like(v), status=status)
