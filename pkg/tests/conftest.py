"""Shared mesh fixtures and layer builders for the test suite."""

import numpy as np
import pytest

from fibrepath.slicer import LayerMesh, triangle_areas


def _finish_layer(z, vertices, triangles, face_source=None):
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    area = triangle_areas(vertices, triangles)
    flip = area < 0
    triangles[flip] = triangles[flip][:, ::-1]
    area = np.abs(area)
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    boundary = edges[counts[inverse] == 1]
    if face_source is None:
        face_source = np.zeros(len(triangles), dtype=np.int64)
    return LayerMesh(z=z, vertices=vertices, triangles=triangles,
                     boundary_edges=boundary, face_source=face_source,
                     face_area=area)


def grid_layer(width=1.0, height=1.0, nx=10, ny=10, z=0.0, origin=(0.0, 0.0)):
    """Structured triangulated rectangle with consistent diagonals."""
    xs = origin[0] + np.linspace(0.0, width, nx + 1)
    ys = origin[1] + np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris += [[a, b, c], [a, c, d]]
    return _finish_layer(z, vertices, tris)


def disk_layer(radius=1.0, n_rings=10, n_sectors=48, z=0.0):
    """Polar-grid triangulated disk with a central fan."""
    vertices = [(0.0, 0.0)]
    for r_i in range(1, n_rings + 1):
        r = radius * r_i / n_rings
        for s in range(n_sectors):
            t = 2.0 * np.pi * s / n_sectors
            vertices.append((r * np.cos(t), r * np.sin(t)))

    def vid(ring, sector):
        if ring == 0:
            return 0
        return 1 + (ring - 1) * n_sectors + (sector % n_sectors)

    tris = []
    for s in range(n_sectors):
        tris.append([0, vid(1, s), vid(1, s + 1)])
    for ring in range(1, n_rings):
        for s in range(n_sectors):
            a, b = vid(ring, s), vid(ring, s + 1)
            c, d = vid(ring + 1, s + 1), vid(ring + 1, s)
            tris += [[a, b, c], [a, c, d]]
    return _finish_layer(z, np.asarray(vertices), tris)


def annulus_layer(r_inner=0.5, r_outer=1.0, n_rings=4, n_sectors=32, z=0.0):
    """Triangulated ring between two radii."""
    vertices = []
    for r_i in range(n_rings + 1):
        r = r_inner + (r_outer - r_inner) * r_i / n_rings
        for s in range(n_sectors):
            t = 2.0 * np.pi * s / n_sectors
            vertices.append((r * np.cos(t), r * np.sin(t)))

    def vid(ring, sector):
        return ring * n_sectors + (sector % n_sectors)

    tris = []
    for ring in range(n_rings):
        for s in range(n_sectors):
            a, b = vid(ring, s), vid(ring, s + 1)
            c, d = vid(ring + 1, s + 1), vid(ring + 1, s)
            tris += [[a, b, c], [a, c, d]]
    return _finish_layer(z, np.asarray(vertices), tris)


def two_face_layer():
    """Unit square split along one diagonal: two faces sharing an edge."""
    vertices = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    return _finish_layer(0.0, vertices, [[0, 1, 2], [0, 2, 3]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
