"""Boundary-conformal toolpaths and stress-curve connection.

A geodesic distance field from a user-selected stretch of the layer boundary
(computed with the heat method) drives three things: two offset toolpaths
conformal to that boundary, truncation of stress curves that run too close to
it, and the re-connection of the cut curves along the outer offset into
continuous paths. A final filter enforces the minimum manufacturable length.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from . import geometry
from .field2d import face_gradient_operator
from .isopath import Toolpath, extract_level_polylines
from .slicer import layer_edges

logger = logging.getLogger(__name__)

DEFAULT_MIN_PATH_LENGTH = 42.0

#: Offset levels, in units of the deposition width: curves conformal to the
#: source boundary sit at 1.5 and 2.5 widths; the half-width offset is too
#: close to the boundary for stable deposition and is never generated.
CONFORMAL_LEVELS = (1.5, 2.5)

#: Stress curves are cut where they come closer than this (in widths) to the
#: source boundary.
TRUNCATION_LEVEL = 2.5

#: Open endpoints closer than this (in widths) are joined by a straight
#: connector.
JOIN_GAP_LIMIT = 2.0


@dataclass
class DistanceField:
    """Per-vertex geodesic distance to a set of source boundary edges.

    ``d`` is zero on source vertices and ``inf`` on components the source
    cannot reach.
    """

    d: np.ndarray
    source_edges: np.ndarray
    source_vertices: np.ndarray

    @property
    def max_finite(self):
        finite = self.d[np.isfinite(self.d)]
        return float(finite.max()) if len(finite) else 0.0


def select_boundary_edges(layer, boxes):
    """Indices of boundary edges whose endpoints both fall in any box.

    Boxes are ``(xmin, ymin, xmax, ymax)`` tuples with inclusive bounds.
    """
    if not boxes:
        return np.zeros(0, dtype=np.int64)
    pts = layer.vertices
    picked = np.zeros(len(layer.boundary_edges), dtype=bool)
    for xmin, ymin, xmax, ymax in boxes:
        inside = ((pts[:, 0] >= xmin) & (pts[:, 0] <= xmax)
                  & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax))
        picked |= inside[layer.boundary_edges].all(axis=1)
    return np.flatnonzero(picked).astype(np.int64)


def _vertex_adjacency(layer):
    tri = layer.triangles
    nv = layer.num_vertices
    rows = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
    cols = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
    return sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(nv, nv))


def heat_distance(layer, source_edges, t_scale=1.0):
    """Geodesic distance to the selected boundary edges by the heat method.

    One implicit heat step spreads an indicator of the source vertices, the
    heat gradient is normalized to get a unit vector field pointing away from
    the source, and a Poisson solve fits a scalar whose gradient matches it,
    pinned to zero on the source. The time step is the squared mean edge
    length times ``t_scale``.
    """
    source_edges = np.asarray(source_edges, dtype=np.int64)
    if len(source_edges) == 0:
        raise ValueError("source edge set is empty")
    if source_edges.min() < 0 or source_edges.max() >= len(layer.boundary_edges):
        raise ValueError("source edge index outside the boundary edge list")
    src_vertices = np.unique(layer.boundary_edges[source_edges].ravel())

    nv = layer.num_vertices
    g = face_gradient_operator(layer)
    area2 = np.repeat(layer.face_area, 2)
    stiffness = (g.T @ g.multiply(area2[:, None])).tocsr()

    mass = np.zeros(nv)
    np.add.at(mass, layer.triangles.ravel(), np.repeat(layer.face_area / 3.0, 3))

    edges = layer_edges(layer)
    h = float(np.linalg.norm(layer.vertices[edges[:, 0]] - layer.vertices[edges[:, 1]], axis=1).mean())
    t = t_scale * h * h

    u0 = np.zeros(nv)
    u0[src_vertices] = 1.0
    heat_op = (sparse.diags(mass) + t * stiffness).tocsc()
    u = spsolve(heat_op, u0)

    grad = (g @ u).reshape(-1, 2)
    norms = np.linalg.norm(grad, axis=1)
    x = np.zeros_like(grad)
    ok = norms > 0
    x[ok] = -grad[ok] / norms[ok, None]

    b = g.T @ (area2 * x.ravel())
    free = np.setdiff1d(np.arange(nv), src_vertices)
    d = np.zeros(nv)
    if len(free):
        sol = spsolve(stiffness[free][:, free].tocsc(), b[free])
        d[free] = sol

    # components the source never touches stay unreachable
    n_comp, labels = csgraph.connected_components(_vertex_adjacency(layer), directed=False)
    reached = np.zeros(n_comp, dtype=bool)
    reached[labels[src_vertices]] = True
    if not reached.all():
        d[~reached[labels]] = np.inf
        logger.warning("distance field: %d of %d components unreachable from source",
                       int((~reached).sum()), n_comp)

    finite = np.isfinite(d)
    np.clip(d, 0.0, None, out=d, where=finite)
    d[src_vertices] = 0.0
    return DistanceField(d=d, source_edges=source_edges, source_vertices=src_vertices)


def conformal_curves(df, layer, min_spacing):
    """Offset toolpaths at 1.5 and 2.5 deposition widths from the source.

    Levels beyond the field maximum produce no curve (logged); the half-width
    offset is deliberately absent.
    """
    curves = []
    vals = np.where(np.isfinite(df.d), df.d, df.max_finite + 1.0)
    for mult in CONFORMAL_LEVELS:
        level = mult * min_spacing
        raw = extract_level_polylines(layer, vals, level)
        if not raw:
            logger.warning("layer z=%s: no %.1fW conformal curve (region too thin)",
                           layer.z, mult)
            continue
        for pts, closed, eids, ets in raw:
            curves.append(Toolpath(points=pts, kind="boundary", closed=closed,
                                   z=layer.z, isovalue=float(level),
                                   edge_ids=eids, edge_ts=ets))
    return curves


class _Chain:
    """Mutable path-under-construction: stress pieces joined by connectors."""

    __slots__ = ("pieces", "closed", "isovalues", "head_new", "tail_new")

    def __init__(self, points, isovalue, closed=False, head_new=False, tail_new=False):
        self.pieces = [(np.asarray(points, dtype=float), False)]
        self.closed = closed
        self.isovalues = {isovalue}
        self.head_new = head_new
        self.tail_new = tail_new

    @property
    def head(self):
        return self.pieces[0][0][0]

    @property
    def tail(self):
        return self.pieces[-1][0][-1]

    def reverse(self):
        self.pieces = [(pts[::-1], conn) for pts, conn in reversed(self.pieces)]
        self.head_new, self.tail_new = self.tail_new, self.head_new


def _trim_bridge(bridge, prev_pt, next_pt, tol=1e-9):
    """Drop bridge endpoints that coincide with the points they join."""
    pts = np.asarray(bridge, dtype=float).reshape(-1, 2)
    pts = geometry.dedupe_consecutive(pts, tol) if len(pts) else pts
    while len(pts) and np.linalg.norm(pts[0] - prev_pt) <= tol:
        pts = pts[1:]
    while len(pts) and np.linalg.norm(pts[-1] - next_pt) <= tol:
        pts = pts[:-1]
    return pts


def _merge_chains(a, b, bridge):
    """Append chain ``b`` to the tail of ``a`` through connector points."""
    bridge = _trim_bridge(bridge, a.tail, b.head)
    a.pieces.append((bridge.reshape(-1, 2), True))
    a.pieces.extend(b.pieces)
    a.tail_new = b.tail_new
    a.isovalues |= b.isovalues


def _close_chain(chain, bridge):
    bridge = _trim_bridge(bridge, chain.tail, chain.head)
    chain.pieces.append((bridge.reshape(-1, 2), True))
    chain.closed = True
    chain.head_new = chain.tail_new = False


def _chain_to_toolpath(chain, layer_z):
    pts_parts = []
    spans = []
    cursor = 0
    for pts, conn in chain.pieces:
        if conn:
            # connector segments run from the previous point, across any
            # inserted points, to the next point (or the wrapped start)
            spans.append((cursor - 1, cursor + len(pts)))
        pts_parts.append(pts)
        cursor += len(pts)
    points = np.vstack([p for p in pts_parts if len(p)]) if pts_parts else np.zeros((0, 2))
    iso = chain.isovalues.pop() if len(chain.isovalues) == 1 else None
    spans = [(max(a, 0), min(b, len(points))) for a, b in spans]
    return Toolpath(points=points, kind="stress", closed=chain.closed, z=layer_z,
                    isovalue=iso, connector_spans=spans)


def _point_distance_values(path, df):
    if path.edge_ids is None or path.edge_ts is None:
        raise ValueError("stress curve lacks edge provenance; cannot evaluate the distance field")
    d = df.d
    e = path.edge_ids
    t = path.edge_ts
    return (1.0 - t) * d[e[:, 0]] + t * d[e[:, 1]]


def _clip_path(path, dvals, threshold):
    """Split one stress curve into kept fragments with crossing endpoints.

    Returns ``(fragments, n_new_endpoints)`` where each fragment is a
    ``_Chain``. Fragments wholly inside the removed region vanish.
    """
    pts = path.points
    m = len(pts)
    keep = dvals >= threshold

    def crossing(i_out, i_in):
        d0, d1 = dvals[i_out], dvals[i_in]
        t = (threshold - d0) / (d1 - d0)
        return (1.0 - t) * pts[i_out] + t * pts[i_in]

    frags = []
    if path.closed:
        if keep.all():
            return [_Chain(pts, path.isovalue, closed=True)], 0
        if not keep.any():
            return [], 0
        start = int(np.flatnonzero(~keep)[0])
        order = [(start + j) % m for j in range(m)]
        run = []
        for idx in order:
            if keep[idx]:
                run.append(idx)
            elif run:
                frags.append(run)
                run = []
        if run:
            frags.append(run)
        chains = []
        for run in frags:
            before = (run[0] - 1) % m
            after = (run[-1] + 1) % m
            cpts = np.vstack([crossing(before, run[0])[None, :], pts[run],
                              crossing(after, run[-1])[None, :]])
            cpts = geometry.dedupe_consecutive(cpts)
            if len(cpts) >= 2:
                chains.append(_Chain(cpts, path.isovalue, head_new=True, tail_new=True))
        return chains, 2 * len(chains)
    # open path
    runs = []
    run = []
    for idx in range(m):
        if keep[idx]:
            run.append(idx)
        elif run:
            runs.append(run)
            run = []
    if run:
        runs.append(run)
    chains = []
    n_new = 0
    for run in runs:
        head_new = run[0] > 0
        tail_new = run[-1] < m - 1
        parts = []
        if head_new:
            parts.append(crossing(run[0] - 1, run[0])[None, :])
        parts.append(pts[run])
        if tail_new:
            parts.append(crossing(run[-1] + 1, run[-1])[None, :])
        cpts = geometry.dedupe_consecutive(np.vstack(parts))
        if len(cpts) >= 2:
            chains.append(_Chain(cpts, path.isovalue, head_new=head_new, tail_new=tail_new))
            n_new += int(head_new) + int(tail_new)
    return chains, n_new


def _open_ends(chains, new_only):
    ends = []
    for ci, chain in enumerate(chains):
        if chain.closed:
            continue
        if not new_only or chain.head_new:
            ends.append((ci, "head", chain.head))
        if not new_only or chain.tail_new:
            ends.append((ci, "tail", chain.tail))
    return ends


def _arc_bridge(arc, s_from, s_to):
    """Points along the shorter arc between two arc-length parameters."""
    pts, closed = arc
    params, total = geometry.cumulative_arclength(pts, closed)
    if closed:
        forward = (s_to - s_from) % total
        if forward <= total - forward:
            return geometry.arc_points_between(pts, True, s_from, s_to)
        back = geometry.arc_points_between(pts, True, s_to, s_from)
        return back[::-1]
    if s_from <= s_to:
        return geometry.arc_points_between(pts, False, s_from, s_to)
    return geometry.arc_points_between(pts, False, s_to, s_from)[::-1]


def _find_end(chains, point, tol=1e-9):
    """Locate the live chain currently ending at ``point``.

    Chains merge in place but never move points, so an endpoint either still
    is some chain's head or tail, or it was consumed by an earlier join.
    """
    for ci, chain in enumerate(chains):
        if chain is None or chain.closed:
            continue
        if np.linalg.norm(chain.head - point) <= tol:
            return ci, "head"
        if np.linalg.norm(chain.tail - point) <= tol:
            return ci, "tail"
    return None


def _connect_pair(chains, ia, ea, ib, eb, bridge):
    """Join two chain ends (possibly of the same chain) through a bridge."""
    if ia == ib:
        # closure runs tail -> head; flip the bridge if it was built head -> tail
        if ea == "head" and eb == "tail":
            bridge = np.asarray(bridge, dtype=float).reshape(-1, 2)[::-1]
        _close_chain(chains[ia], bridge)
        return
    a, b = chains[ia], chains[ib]
    if ea == "head":
        a.reverse()
    if eb == "tail":
        b.reverse()
    _merge_chains(a, b, bridge)
    chains[ib] = None


def truncate_and_connect(c_str, c_bnd, df, min_spacing):
    """Cut stress curves away from the source boundary and reconnect them.

    With a distance field: portions of stress curves closer than 2.5 widths
    to the source are removed, the fresh cut ends are joined pairwise along
    the 2.5-width conformal curve (which is then dropped from the output),
    and any remaining open ends closer than two widths are joined by straight
    connectors. Without a distance field only the straight-connector pass
    runs. Boundary curves at 1.5 widths pass through untouched.
    """
    w = min_spacing
    thr = TRUNCATION_LEVEL * w

    chains = []
    if df is not None:
        for path in c_str:
            frags, _ = _clip_path(path, _point_distance_values(path, df), thr)
            chains.extend(frags)
    else:
        for path in c_str:
            chains.append(_Chain(path.points, path.isovalue, closed=path.closed))

    # join fresh cut ends along the outer conformal curve
    kept_boundary = list(c_bnd)
    if df is not None:
        arcs = [(c.points, c.closed) for c in c_bnd
                if c.isovalue is not None and abs(c.isovalue - thr) <= 1e-9 * max(thr, 1.0)]
        kept_boundary = [c for c in c_bnd
                         if not (c.isovalue is not None
                                 and abs(c.isovalue - thr) <= 1e-9 * max(thr, 1.0))]
        if arcs:
            ends = _open_ends(chains, new_only=True)
            located = []
            for ci, end, pt in ends:
                best = None
                for ai, (apts, aclosed) in enumerate(arcs):
                    dist, param = geometry.project_point_to_polyline(pt, apts, aclosed)
                    if best is None or dist < best[0]:
                        best = (dist, ai, param)
                located.append((pt.copy(), best[1], best[2]))
            candidates = []
            for x in range(len(located)):
                for y in range(x + 1, len(located)):
                    _, arc_x, s_x = located[x]
                    _, arc_y, s_y = located[y]
                    if arc_x != arc_y:
                        continue
                    apts, aclosed = arcs[arc_x]
                    _, total = geometry.cumulative_arclength(apts, aclosed)
                    gap = abs(s_y - s_x)
                    if aclosed:
                        gap = min(gap % total, (-gap) % total)
                    candidates.append((gap, x, y))
            candidates.sort(key=lambda c: (c[0], c[1], c[2]))
            consumed = 0
            for gap, x, y in candidates:
                pt_x, ai, s_x = located[x]
                pt_y, _, s_y = located[y]
                loc_x = _find_end(chains, pt_x)
                loc_y = _find_end(chains, pt_y)
                if loc_x is None or loc_y is None:
                    continue
                bridge = _arc_bridge(arcs[ai], s_x, s_y)
                _connect_pair(chains, loc_x[0], loc_x[1], loc_y[0], loc_y[1], bridge)
                consumed += 2
            if consumed < len(located):
                logger.warning("%d cut ends had no partner along the conformal curve",
                               len(located) - consumed)

    # straight connectors between any remaining open ends
    live = [c for c in chains if c is not None]
    ends = _open_ends(live, new_only=False)
    candidates = []
    for x in range(len(ends)):
        for y in range(x + 1, len(ends)):
            gap = float(np.linalg.norm(ends[x][2] - ends[y][2]))
            if gap < JOIN_GAP_LIMIT * w:
                candidates.append((gap, x, y))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    bridges = []
    for gap, x, y in candidates:
        pt_x = ends[x][2]
        pt_y = ends[y][2]
        loc_x = _find_end(live, pt_x)
        loc_y = _find_end(live, pt_y)
        if loc_x is None or loc_y is None:
            continue
        bridges.append((pt_x.copy(), pt_y.copy()))
        _connect_pair(live, loc_x[0], loc_x[1], loc_y[0], loc_y[1], np.zeros((0, 2)))

    final = [c for c in live if c is not None]
    z = c_str[0].z if c_str else (c_bnd[0].z if c_bnd else 0.0)
    paths = [_chain_to_toolpath(c, z) for c in final if sum(len(p) for p, _ in c.pieces) >= 2]
    _warn_crossings(bridges, paths + kept_boundary)
    return paths + kept_boundary


def _warn_crossings(bridges, paths):
    crossings = 0
    for p0, p1 in bridges:
        for path in paths:
            a, b = geometry.polyline_segments(path.points, path.closed)
            for q0, q1 in zip(a, b):
                if geometry.segments_properly_intersect(p0, p1, q0, q1):
                    crossings += 1
    if crossings:
        logger.warning("%d straight connectors cross existing curves", crossings)


def filter_min_length(paths, min_length=DEFAULT_MIN_PATH_LENGTH):
    """Drop paths shorter than the minimum manufacturable length.

    Paths exactly at the limit survive. Removal count and removed length are
    logged.
    """
    if min_length < 0:
        raise ValueError("min_length must be >= 0")
    kept = [p for p in paths if p.length() >= min_length]
    removed = len(paths) - len(kept)
    if removed:
        lost = sum(p.length() for p in paths) - sum(p.length() for p in kept)
        logger.info("removed %d paths shorter than %.3g mm (%.3g mm of fibre)",
                    removed, min_length, lost)
    return kept
