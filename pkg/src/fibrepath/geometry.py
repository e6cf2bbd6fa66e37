"""Planar geometry primitives shared by the toolpath stages.

All routines operate on ``(n, 2)`` float arrays of points in millimetres.
Polylines may be open or closed; a closed polyline stores its first point
only once and the closing segment is implicit.
"""

import numpy as np
from scipy.spatial import cKDTree


def polyline_length(points, closed=False):
    """Arc length of a polyline, including the closing segment when closed."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    total = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    if closed:
        total += float(np.linalg.norm(pts[0] - pts[-1]))
    return total


def polyline_segments(points, closed=False):
    """Segment endpoint arrays ``(a, b)`` covering the polyline."""
    pts = np.asarray(points, dtype=float)
    a, b = pts[:-1], pts[1:]
    if closed and len(pts) > 2:
        a = np.vstack([a, pts[-1:]])
        b = np.vstack([b, pts[:1]])
    return a, b


def resample_polyline(points, spacing, closed=False):
    """Subdivide segments so consecutive samples are at most ``spacing`` apart.

    Original vertices are always retained; extra samples are inserted evenly
    inside each segment. For closed polylines the implicit closing segment is
    subdivided as well (the start point is not repeated).
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2 or spacing <= 0:
        return pts.copy()
    a, b = polyline_segments(pts, closed)
    chunks = []
    for p, q in zip(a, b):
        seg = float(np.linalg.norm(q - p))
        n = max(1, int(np.ceil(seg / spacing)))
        ts = np.arange(n, dtype=float) / n
        chunks.append(p + ts[:, None] * (q - p))
    if not closed:
        chunks.append(pts[-1:])
    return np.vstack(chunks)


def point_segment_distance(p, a, b):
    """Distance from point ``p`` to each segment ``(a[i], b[i])``."""
    p = np.asarray(p, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.zeros(len(a))
    nz = denom > 0
    t[nz] = np.einsum("ij,ij->i", (p - a)[nz], ab[nz]) / denom[nz]
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(proj - p, axis=1)


class _CurveBank:
    """Resampled points plus segment banks for a set of polylines."""

    def __init__(self, curves, spacing):
        pts_list, seg_a, seg_b, adj = [], [], [], []
        n_seg = 0
        for points, closed in curves:
            r = resample_polyline(points, spacing, closed)
            m = len(r)
            if m < 2:
                continue
            wrap = closed and m > 2
            a, b = polyline_segments(r, wrap)
            k = len(a)
            # point i touches incoming segment i-1 and outgoing segment i
            local = np.full((m, 2), -1, dtype=int)
            local[1:, 0] = np.arange(m - 1) + n_seg
            local[: min(k, m), 1] = np.arange(min(k, m)) + n_seg
            if wrap:
                local[0, 0] = n_seg + k - 1
            pts_list.append(r)
            seg_a.append(a)
            seg_b.append(b)
            adj.append(local)
            n_seg += k
        self.points = np.vstack(pts_list) if pts_list else np.zeros((0, 2))
        self.seg_a = np.vstack(seg_a) if seg_a else np.zeros((0, 2))
        self.seg_b = np.vstack(seg_b) if seg_b else np.zeros((0, 2))
        self.point_segs = np.vstack(adj) if adj else np.zeros((0, 2), dtype=int)


def min_curveset_distance(curves_a, curves_b, spacing):
    """Minimum distance between two sets of polylines.

    Each polyline is resampled at most ``spacing`` apart, then the minimum
    point-to-segment distance is taken over both directions, which is exact
    for non-crossing polylines because the minimum is always attained at a
    vertex of one curve against a segment of the other.

    Curves are ``(points, closed)`` pairs. Returns ``inf`` if either set is
    empty.
    """
    bank_a = _CurveBank(curves_a, spacing)
    bank_b = _CurveBank(curves_b, spacing)
    if len(bank_a.points) == 0 or len(bank_b.points) == 0:
        return float("inf")
    d1 = _directional_min(bank_a, bank_b, spacing)
    d2 = _directional_min(bank_b, bank_a, spacing)
    return min(d1, d2)


def _directional_min(src, dst, spacing):
    tree = cKDTree(dst.points)
    dpp, _ = tree.query(src.points)
    order = np.argsort(dpp)
    best = float("inf")
    for i in order:
        if dpp[i] - spacing >= best:
            break
        p = src.points[i]
        idx = tree.query_ball_point(p, dpp[i] + spacing + 1e-12)
        segs = np.unique(dst.point_segs[idx])
        segs = segs[segs >= 0]
        if len(segs) == 0:
            continue
        d = point_segment_distance(p, dst.seg_a[segs], dst.seg_b[segs]).min()
        if d < best:
            best = float(d)
    return best


def polygon_area(loop):
    """Signed area of a closed loop given as an (n, 2) array (CCW positive)."""
    p = np.asarray(loop, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def point_in_polygon(point, loop):
    """Even-odd ray-cast test; points exactly on an edge may go either way."""
    x, y = float(point[0]), float(point[1])
    p = np.asarray(loop, dtype=float)
    x0, y0 = p[:, 0], p[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cross = ((y0 > y) != (y1 > y)) & (x < x0 + (y - y0) * (x1 - x0) / np.where(y1 != y0, y1 - y0, 1.0))
    return bool(np.count_nonzero(cross) % 2)


def cumulative_arclength(points, closed=False):
    """Arc-length parameter of each vertex, plus the total length.

    Returns ``(params, total)`` where ``params[i]`` is the distance along the
    polyline from vertex 0 to vertex ``i``. For closed polylines the total
    includes the closing segment.
    """
    pts = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    params = np.concatenate([[0.0], np.cumsum(seg)])
    total = params[-1]
    if closed:
        total = total + float(np.linalg.norm(pts[0] - pts[-1]))
    return params, float(total)


def project_point_to_polyline(point, points, closed=False):
    """Closest point on a polyline.

    Returns ``(distance, arclength_param)`` of the orthogonal projection; ties
    resolve to the smallest parameter.
    """
    a, b = polyline_segments(points, closed)
    p = np.asarray(point, dtype=float)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.zeros(len(a))
    nz = denom > 0
    t[nz] = np.einsum("ij,ij->i", (p - a)[nz], ab[nz]) / denom[nz]
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    dist = np.linalg.norm(proj - p, axis=1)
    i = int(np.argmin(dist))
    params, _ = cumulative_arclength(points, closed)
    seg_len = float(np.linalg.norm(ab[i]))
    return float(dist[i]), float(params[i] + t[i] * seg_len)


def arc_points_between(points, closed, s0, s1):
    """Polyline vertices with arc-length parameter strictly inside an interval.

    Walks forward from ``s0`` to ``s1``; for closed polylines the walk wraps
    when ``s1 < s0``. Vertices are returned in walk order.
    """
    pts = np.asarray(points, dtype=float)
    params, total = cumulative_arclength(pts, closed)
    eps = 1e-12 * max(total, 1.0)
    if closed and s1 < s0:
        sel = np.concatenate([np.flatnonzero(params > s0 + eps),
                              np.flatnonzero(params < s1 - eps)])
    else:
        sel = np.flatnonzero((params > s0 + eps) & (params < s1 - eps))
    sel = sel[sel < len(pts)]
    return pts[sel]


def segments_properly_intersect(p0, p1, q0, q1, eps=1e-12):
    """True when the open interiors of two segments cross."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q0, q1, p0)
    d2 = orient(q0, q1, p1)
    d3 = orient(p0, p1, q0)
    d4 = orient(p0, p1, q1)
    return (d1 * d2 < -eps) and (d3 * d4 < -eps)


def dedupe_consecutive(points, tol=1e-9, closed=False):
    """Drop consecutive points closer than ``tol`` (keeps the first of a run)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return pts.copy()
    keep = np.ones(len(pts), dtype=bool)
    d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    keep[1:] = d > tol
    out = pts[keep]
    if closed and len(out) > 1 and np.linalg.norm(out[0] - out[-1]) <= tol:
        out = out[:-1]
    return out
