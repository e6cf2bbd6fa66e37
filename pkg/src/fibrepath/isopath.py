"""Isocurve extraction and adaptive isovalue selection.

Level sets of the fitted scalar field become the stress-oriented toolpaths.
The number of isovalues is chosen adaptively: grow until curves are dense,
then back off until the closest pair of neighbouring curves is farther apart
than the deposition width.
"""

import logging
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.sparse import csgraph

from . import geometry
from .slicer import vertex_edge_graph

logger = logging.getLogger(__name__)

KINDS = ("stress", "boundary", "connector", "zigzag")

DEFAULT_MIN_SPACING = 1.0

#: Extracted chains with fewer points than this are marching artifacts at
#: domain corners and are discarded.
MIN_CURVE_POINTS = 3


@dataclass
class Toolpath:
    """Ordered planar polyline tagged with its role in the print.

    ``points`` is an ``(m, 2)`` float array; closed paths do not repeat the
    first point. ``isovalue`` carries the level of stress and boundary
    curves. ``edge_ids``/``edge_ts`` record, for extracted curves, the layer
    edge and interpolation parameter each point was born on; interior
    bookkeeping that serializers ignore. ``connector_spans`` marks point
    index ranges whose segments are connector material.
    """

    points: np.ndarray
    kind: str
    closed: bool = False
    layer: int = 0
    z: float = 0.0
    isovalue: float | None = None
    edge_ids: np.ndarray | None = None
    edge_ts: np.ndarray | None = None
    connector_spans: list = dataclass_field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.kind not in KINDS:
            raise ValueError(f"unknown toolpath kind {self.kind!r}")

    @property
    def num_points(self):
        return len(self.points)

    def length(self):
        return geometry.polyline_length(self.points, self.closed)

    def resampled(self, spacing):
        return geometry.resample_polyline(self.points, spacing, self.closed)


def extract_level_polylines(layer, values, level):
    """March a vertex field's level set into chained polylines.

    Returns a list of ``(points, closed, edge_ids, edge_ts)`` tuples. Open
    chains start and end on boundary edges; the chain order and walk
    direction are deterministic (open chains by their lowest crossed boundary
    edge, then closed loops by their lowest crossed triangle).
    """
    vals = np.asarray(values, dtype=float).copy()
    rng = float(vals.max() - vals.min())
    if rng <= 0:
        return []
    exact = np.abs(vals - level) < 1e-12 * rng
    vals[exact] += 1e-9 * rng

    above = vals > level
    tri = layer.triangles
    tri_above = above[tri]
    crossed = np.flatnonzero(tri_above.any(axis=1) & ~tri_above.all(axis=1))
    if len(crossed) == 0:
        return []

    # crossing points live on mesh edges; key them by the sorted vertex pair
    crossings = {}

    def crossing(a, b):
        key = (a, b) if a < b else (b, a)
        c = crossings.get(key)
        if c is None:
            va, vb = vals[key[0]], vals[key[1]]
            t = (level - va) / (vb - va)
            p = (1.0 - t) * layer.vertices[key[0]] + t * layer.vertices[key[1]]
            c = (key, float(t), p)
            crossings[key] = c
        return c

    seg_of_tri = {}
    edge_tris = {}
    for f in crossed:
        a, b, c = (int(v) for v in tri[f])
        pts = []
        for u, v in ((a, b), (b, c), (c, a)):
            if above[u] != above[v]:
                pts.append(crossing(u, v))
        if len(pts) != 2:
            continue
        pts.sort(key=lambda item: item[0])
        seg_of_tri[int(f)] = (pts[0][0], pts[1][0])
        for key, _, _ in pts:
            edge_tris.setdefault(key, []).append(int(f))

    boundary = {tuple(sorted((int(a), int(b)))) for a, b in layer.boundary_edges}
    used = set()
    chains = []

    def walk(start_edge, start_tri):
        chain = [start_edge]
        f = start_tri
        cur = start_edge
        while True:
            used.add(f)
            e1, e2 = seg_of_tri[f]
            nxt = e2 if e1 == cur else e1
            chain.append(nxt)
            owners = [t for t in edge_tris[nxt] if t not in used]
            if not owners:
                return chain, nxt
            f = owners[0]
            cur = nxt

    # open chains: start from each unconsumed crossed boundary edge
    for edge in sorted(e for e in edge_tris if e in boundary):
        owners = [t for t in edge_tris[edge] if t not in used]
        if not owners:
            continue
        chain, _ = walk(edge, owners[0])
        chains.append((chain, False))

    # remaining crossings form closed loops
    for f in sorted(seg_of_tri):
        if f in used:
            continue
        e1, e2 = seg_of_tri[f]
        chain, last = walk(e1, f)
        closed = last == chain[0]
        if closed:
            chain = chain[:-1]
        chains.append((chain, closed))

    out = []
    for chain, closed in chains:
        pts = np.asarray([crossings[e][2] for e in chain])
        eids = np.asarray(chain, dtype=np.int64)
        ets = np.asarray([crossings[e][1] for e in chain])
        keep = np.ones(len(pts), dtype=bool)
        if len(pts) > 1:
            keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-9
        if closed and keep.sum() > 1:
            first = np.flatnonzero(keep)[0]
            last = np.flatnonzero(keep)[-1]
            if np.linalg.norm(pts[first] - pts[last]) <= 1e-9:
                keep[last] = False
        pts, eids, ets = pts[keep], eids[keep], ets[keep]
        if len(pts) < 2:
            continue
        out.append((pts, closed, eids, ets))
    return out


def extract_isocurves(layer, scalar, isovalue):
    """Stress-kind toolpaths along one level set of the scalar field.

    Isovalues outside the field range yield an empty list.
    """
    lo, hi = scalar.value_range
    if not (lo < isovalue < hi):
        return []
    raw = extract_level_polylines(layer, scalar.values, isovalue)
    return [
        Toolpath(points=pts, kind="stress", closed=closed, z=layer.z,
                 isovalue=float(isovalue), edge_ids=eids, edge_ts=ets)
        for pts, closed, eids, ets in raw
    ]


def isocurve_levels(s_min, s_max, n):
    """``n`` isovalues placed at cell centres of the field range."""
    i = np.arange(n, dtype=float)
    return s_min + (0.5 + i) / n * (s_max - s_min)


def min_neighbor_distance(groups, resample_spacing):
    """Smallest gap between curves of consecutive isovalue groups.

    Curves are resampled at most ``resample_spacing`` apart and measured by
    exact point-to-segment distance in both directions. Pairs where either
    group is empty are skipped; returns ``inf`` when no pair is measurable.
    """
    if len(groups) < 2:
        raise ValueError("need at least two isovalue groups")
    best = float("inf")
    banks = [[(tp.points, tp.closed) for tp in g] for g in groups]
    for a, b in zip(banks[:-1], banks[1:]):
        if not a or not b:
            continue
        d = geometry.min_curveset_distance(a, b, resample_spacing)
        best = min(best, d)
    return best


def geodesic_span(layer, values):
    """Longest graph-geodesic from the maximum set to the minimum set.

    Runs multi-source Dijkstra on the layer's vertex-edge graph (Euclidean
    edge weights) from all vertices at the field minimum, and returns the
    largest finite distance attained over vertices at the field maximum.
    """
    vals = np.asarray(values, dtype=float)
    rng = float(vals.max() - vals.min())
    if rng <= 0:
        raise ValueError("scalar field is constant")
    tol = 1e-9 * rng
    sources = np.flatnonzero(vals <= vals.min() + tol)
    targets = np.flatnonzero(vals >= vals.max() - tol)
    graph = vertex_edge_graph(layer)
    dist = csgraph.dijkstra(graph, directed=False, indices=sources, min_only=True)
    reach = dist[targets]
    reach = reach[np.isfinite(reach)]
    if len(reach) == 0:
        raise ValueError("no maximum vertex reachable from the minimum set")
    return float(reach.max())


def _extract_groups(layer, scalar, n):
    levels = isocurve_levels(*scalar.value_range, n)
    groups = []
    for level in levels:
        curves = [c for c in extract_isocurves(layer, scalar, float(level))
                  if c.num_points >= MIN_CURVE_POINTS]
        groups.append(curves)
    return groups


def adaptive_extract(layer, scalar, min_spacing=DEFAULT_MIN_SPACING, return_stats=False):
    """Extract as many isocurves as possible while neighbours stay apart.

    The initial count comes from the geodesic span of the field divided by
    the spacing; the count then grows while the measured gap still exceeds
    the spacing and finally shrinks one by one until the gap clears it.
    With ``return_stats`` the final ``(paths, n, gap)`` triple is returned.
    """
    if min_spacing <= 0:
        raise ValueError("min_spacing must be positive")
    span = geodesic_span(layer, scalar.values)
    n = max(1, int(np.ceil(span / min_spacing)))
    resample = min_spacing / 4.0

    def measure(groups):
        if len(groups) < 2:
            return float("inf")
        return min_neighbor_distance(groups, resample)

    groups = _extract_groups(layer, scalar, n)
    gap = measure(groups)

    # densify while curves stay farther apart than required
    for _ in range(200):
        if not np.isfinite(gap) or gap <= min_spacing:
            break
        n_new = int(np.ceil(n * gap / min_spacing))
        if n_new <= n:
            break
        n = n_new
        groups = _extract_groups(layer, scalar, n)
        gap = measure(groups)

    # thin out until the minimum gap clears the spacing
    while gap <= min_spacing and n > 1:
        n -= 1
        groups = _extract_groups(layer, scalar, n)
        gap = measure(groups)

    if n == 1:
        logger.warning("layer z=%s thinner than the spacing; single mid isocurve", layer.z)

    paths = [c for g in groups for c in g]
    if return_stats:
        return paths, n, gap
    return paths
