"""Analytic stress fields, structured test solids, and zigzag matrix infill.

Lets the whole pipeline run and be validated without any FEA dependency:
classical plane-stress solutions (uniform tension, plate with a circular
hole, cantilever bending) sampled at element centroids of structured
tetrahedral boxes.
"""

import numpy as np

from . import geometry
from .isopath import Toolpath
from .mesh_io import make_tet_mesh, tet_volumes
from .slicer import boundary_loops

SOLID_KINDS = ("box", "plate_hole", "cantilever")

# six tets around the main diagonal of a unit cell; corner index bits x+2y+4z
_CUBE_TETS = (
    (0, 1, 5, 7),
    (0, 5, 4, 7),
    (0, 4, 6, 7),
    (0, 6, 2, 7),
    (0, 2, 3, 7),
    (0, 3, 1, 7),
)


def uniform_tension_stress(far_stress):
    """Uniaxial tension along x, as 6 components (sxx, syy, szz, sxy, syz, sxz)."""
    return np.array([far_stress, 0.0, 0.0, 0.0, 0.0, 0.0])


def kirsch_stress(point, far_stress, hole_radius):
    """Plane stress around a circular hole under far-field tension along x.

    ``point`` is an xy position relative to the hole centre with
    ``r = |point| >= hole_radius``. Out-of-plane components are zero.
    """
    x, y = float(point[0]), float(point[1])
    r = np.hypot(x, y)
    a = float(hole_radius)
    if r < a:
        raise ValueError(f"point at r={r:.6g} lies inside the hole radius {a:.6g}")
    s = float(far_stress)
    theta = np.arctan2(y, x)
    c2 = np.cos(2.0 * theta)
    s2 = np.sin(2.0 * theta)
    a2 = (a / r) ** 2
    a4 = a2 * a2
    srr = s / 2.0 * (1.0 - a2) + s / 2.0 * (1.0 - 4.0 * a2 + 3.0 * a4) * c2
    stt = s / 2.0 * (1.0 + a2) - s / 2.0 * (1.0 + 3.0 * a4) * c2
    srt = -s / 2.0 * (1.0 + 2.0 * a2 - 3.0 * a4) * s2

    ct, st = np.cos(theta), np.sin(theta)
    rot = np.array([[ct, -st], [st, ct]])
    polar = np.array([[srr, srt], [srt, stt]])
    cart = rot @ polar @ rot.T
    return np.array([cart[0, 0], cart[1, 1], 0.0, cart[0, 1], 0.0, 0.0])


def cantilever_stress(point, load, length, width, depth):
    """Euler-Bernoulli bending of a tip-loaded cantilever.

    The beam spans ``x in [0, length]`` with the load applied downward at the
    tip; ``y in [-depth/2, depth/2]`` is the bending direction and ``width``
    the out-of-plane thickness. Bending stress ``sxx = -P (L - x) y / I`` and
    shear ``sxy = P (depth^2/4 - y^2) / (2 I)`` with ``I = width depth^3/12``.
    """
    x, y = float(point[0]), float(point[1])
    p = float(load)
    inertia = width * depth**3 / 12.0
    sxx = -p * (length - x) * y / inertia
    sxy = p * (depth**2 / 4.0 - y**2) / (2.0 * inertia)
    return np.array([sxx, 0.0, 0.0, sxy, 0.0, 0.0])


def _box_grid(origin, size, target_edge):
    ox, oy, oz = origin
    sx, sy, sz = size
    nx = max(1, round(sx / target_edge))
    ny = max(1, round(sy / target_edge))
    nz = max(1, round(sz / target_edge))
    xs = ox + np.linspace(0.0, sx, nx + 1)
    ys = oy + np.linspace(0.0, sy, ny + 1)
    zs = oz + np.linspace(0.0, sz, nz + 1)
    return xs, ys, zs


def _tetrahedralize_cells(xs, ys, zs, keep_cell=None):
    """Six-tet subdivision of the kept cells of a structured grid."""
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1

    def vid(i, j, k):
        return (k * (ny + 1) + j) * (nx + 1) + i

    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    vertices = np.column_stack([
        gx.transpose(2, 1, 0).ravel(),
        gy.transpose(2, 1, 0).ravel(),
        gz.transpose(2, 1, 0).ravel(),
    ])

    tets = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                if keep_cell is not None and not keep_cell(i, j, k):
                    continue
                corner = [vid(i + dx, j + dy, k + dz)
                          for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)]
                # corner[b] has bits (x, y, z) = (b & 1, b >> 1 & 1, b >> 2 & 1)
                for tet in _CUBE_TETS:
                    tets.append([corner[tet[0]], corner[tet[1]], corner[tet[2]], corner[tet[3]]])
    tets = np.asarray(tets, dtype=np.int64)

    # orient every tet positively, then drop unused vertices
    vol = tet_volumes(vertices, tets)
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 1, 3, 2]]
    used = np.unique(tets)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return vertices[used], remap[tets]


def build_test_solid(kind, dims, target_edge, far_stress=1.0, hole_radius=None, load=None):
    """Structured tet mesh of a test solid plus centroid-sampled tensors.

    Kinds and their ``dims``:

    * ``"box"``: ``(lx, ly, lz)`` block under uniform tension along x.
    * ``"plate_hole"``: ``(lx, ly, lz)`` plate centred on a circular hole of
      ``hole_radius`` (grid cells overlapping the hole are removed, so the
      hole is approximated polygonally), loaded by far-field tension.
    * ``"cantilever"``: ``(length, depth, width)`` beam bent by a tip
      ``load``; bending happens in the xy-plane, slicing runs along z.
    """
    if kind not in SOLID_KINDS:
        raise ValueError(f"unknown solid kind {kind!r}; expected one of {SOLID_KINDS}")
    dims = tuple(float(d) for d in dims)
    if target_edge <= 0 or target_edge > min(dims):
        raise ValueError(f"target edge {target_edge} exceeds the smallest dimension {min(dims)}")

    if kind == "box":
        xs, ys, zs = _box_grid((0.0, 0.0, 0.0), dims, target_edge)
        vertices, tets = _tetrahedralize_cells(xs, ys, zs)
        mesh = make_tet_mesh(vertices, tets)
        tensors = np.tile(uniform_tension_stress(far_stress), (mesh.num_tets, 1))
        return mesh, tensors

    if kind == "plate_hole":
        if hole_radius is None or hole_radius <= 0:
            raise ValueError("plate_hole needs a positive hole_radius")
        lx, ly, lz = dims
        if 2 * hole_radius >= min(lx, ly):
            raise ValueError("hole does not fit inside the plate")
        xs, ys, zs = _box_grid((-lx / 2.0, -ly / 2.0, 0.0), dims, target_edge)

        def outside_hole(i, j, k):
            # closest point of the cell footprint to the hole centre
            px = np.clip(0.0, xs[i], xs[i + 1])
            py = np.clip(0.0, ys[j], ys[j + 1])
            return np.hypot(px, py) >= hole_radius

        vertices, tets = _tetrahedralize_cells(xs, ys, zs, keep_cell=outside_hole)
        mesh = make_tet_mesh(vertices, tets)
        centroids = mesh.vertices[mesh.tets].mean(axis=1)
        tensors = np.array([kirsch_stress(c[:2], far_stress, hole_radius) for c in centroids])
        return mesh, tensors

    # cantilever
    if load is None:
        raise ValueError("cantilever needs a tip load")
    length, depth, width = dims
    xs, ys, zs = _box_grid((0.0, -depth / 2.0, 0.0), (length, depth, width), target_edge)
    vertices, tets = _tetrahedralize_cells(xs, ys, zs)
    mesh = make_tet_mesh(vertices, tets)
    centroids = mesh.vertices[mesh.tets].mean(axis=1)
    tensors = np.array([cantilever_stress(c[:2], load, length, width, depth) for c in centroids])
    return mesh, tensors


def zigzag_infill(layer, spacing, angle_deg=0.0):
    """Serpentine scanline fill of a layer at the given spacing and angle.

    Scanlines run along ``angle_deg``; segments on consecutive scanlines are
    chained into serpentines wherever their spans overlap, alternating
    direction, with short joins in between. Returns zigzag-kind toolpaths.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    loops = [layer.vertices[loop] for loop in boundary_loops(layer)]
    if not loops:
        return []

    theta = np.radians(angle_deg)
    rot = np.array([[np.cos(-theta), -np.sin(-theta)], [np.sin(-theta), np.cos(-theta)]])
    inv = rot.T
    rloops = [pts @ rot.T for pts in loops]

    all_pts = np.vstack(rloops)
    y_min, y_max = all_pts[:, 1].min(), all_pts[:, 1].max()
    height = y_max - y_min
    if height <= 0:
        return []
    n_lines = int(np.floor(height / spacing))
    if n_lines < 1:
        return []
    ys = y_min + (0.5 + np.arange(n_lines)) * spacing
    vertex_y = all_pts[:, 1]
    for _ in range(16):
        if not np.isclose(vertex_y[:, None], ys[None, :], rtol=0.0,
                          atol=1e-9 * max(height, 1.0)).any():
            break
        ys = ys + 1e-7 * height

    rows = []
    for y in ys:
        xs = []
        for pts in rloops:
            x0, y0 = pts[:, 0], pts[:, 1]
            x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
            crosses = (y0 > y) != (y1 > y)
            t = (y - y0[crosses]) / (y1[crosses] - y0[crosses])
            xs.append(x0[crosses] + t * (x1[crosses] - x0[crosses]))
        xs = np.sort(np.concatenate(xs)) if xs else np.zeros(0)
        segments = [(xs[i], xs[i + 1]) for i in range(0, len(xs) - 1, 2)
                    if xs[i + 1] - xs[i] > 1e-9]
        rows.append((float(y), segments))

    # chain overlapping segments of consecutive scanlines into serpentines
    paths = []
    open_chains = []  # (points list, interval on the previous scanline)
    for y, segments in rows:
        prev_used = [False] * len(open_chains)
        next_chains = []
        for xa, xb in segments:
            pick = None
            for ci, (pts, (pa, pb)) in enumerate(open_chains):
                if not prev_used[ci] and xa <= pb and pa <= xb:
                    pick = ci
                    prev_used[ci] = True
                    break
            if pick is None:
                next_chains.append(([(xa, y), (xb, y)], (xa, xb)))
                continue
            pts = open_chains[pick][0]
            # enter from the end the previous scanline stopped at
            if abs(pts[-1][0] - xa) <= abs(pts[-1][0] - xb):
                pts += [(xa, y), (xb, y)]
            else:
                pts += [(xb, y), (xa, y)]
            next_chains.append((pts, (xa, xb)))
        for ci, (pts, _) in enumerate(open_chains):
            if not prev_used[ci]:
                paths.append(pts)
        open_chains = next_chains
    paths.extend(pts for pts, _ in open_chains)

    out = []
    for pts in paths:
        arr = np.asarray(pts, dtype=float) @ inv.T
        arr = geometry.dedupe_consecutive(arr)
        if len(arr) >= 2:
            out.append(Toolpath(points=arr, kind="zigzag", closed=False, z=layer.z))
    return out
