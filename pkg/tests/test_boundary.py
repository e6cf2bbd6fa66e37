"""Heat-method distance, conformal offsets, connection, length filter."""

import numpy as np
import pytest

from conftest import disk_layer, grid_layer
from fibrepath import geometry
from fibrepath.boundary import (DistanceField, conformal_curves, filter_min_length,
                                heat_distance, select_boundary_edges,
                                truncate_and_connect)
from fibrepath.field2d import ScalarField
from fibrepath.isopath import Toolpath, extract_isocurves
from fibrepath.slicer import layer_edges


def full_boundary(layer):
    return np.arange(len(layer.boundary_edges))


def short_edge_source(layer, x_at=0.0, tol=1e-9):
    mids = layer.vertices[layer.boundary_edges].mean(axis=1)
    return np.flatnonzero(np.abs(mids[:, 0] - x_at) < tol)


class TestHeatDistance:
    def test_disk_center_distance(self):
        layer = disk_layer(1.0, 14, 56)
        df = heat_distance(layer, full_boundary(layer))
        center = int(np.argmin(np.linalg.norm(layer.vertices, axis=1)))
        assert df.d[center] == pytest.approx(1.0, rel=0.05)

    def test_rectangle_far_end(self):
        layer = grid_layer(10.0, 1.0, 60, 6)
        src = short_edge_source(layer, 0.0)
        assert len(src) == 6
        df = heat_distance(layer, src)
        far = layer.vertices[:, 0] > 10.0 - 1e-9
        assert np.allclose(df.d[far], 10.0, rtol=0.05)

    def test_source_pinned_zero(self):
        layer = disk_layer(1.0, 8, 32)
        df = heat_distance(layer, full_boundary(layer))
        assert (df.d[df.source_vertices] == 0.0).all()

    def test_nonnegative_and_finite_on_reachable(self):
        layer = grid_layer(4.0, 2.0, 20, 10)
        df = heat_distance(layer, short_edge_source(layer, 0.0))
        assert (df.d >= 0.0).all()
        assert np.isfinite(df.d).all()

    def test_lipschitz_along_edges(self):
        layer = disk_layer(2.0, 12, 48)
        df = heat_distance(layer, full_boundary(layer))
        e = layer_edges(layer)
        lengths = np.linalg.norm(layer.vertices[e[:, 0]] - layer.vertices[e[:, 1]], axis=1)
        jumps = np.abs(df.d[e[:, 0]] - df.d[e[:, 1]])
        assert (jumps <= 1.05 * lengths + 1e-12).all()

    def test_empty_source_errors(self):
        layer = disk_layer(1.0, 6, 24)
        with pytest.raises(ValueError, match="empty"):
            heat_distance(layer, np.zeros(0, dtype=int))

    def test_matches_dijkstra_within_ten_percent(self):
        from scipy.sparse import csgraph
        from fibrepath.slicer import vertex_edge_graph

        layer = grid_layer(6.0, 4.0, 30, 20)
        src = short_edge_source(layer, 0.0)
        df = heat_distance(layer, src)
        graph = vertex_edge_graph(layer)
        dd = csgraph.dijkstra(graph, directed=False,
                              indices=df.source_vertices, min_only=True)
        sel = dd > 1.0  # skip the near-source band where both are tiny
        rel = np.abs(df.d[sel] - dd[sel]) / dd[sel]
        assert np.median(rel) < 0.10


class TestSelectBoundaryEdges:
    def test_box_selects_edge_run(self):
        layer = grid_layer(4.0, 2.0, 8, 4)
        picked = select_boundary_edges(layer, [(-0.1, -0.1, 0.1, 2.1)])
        assert len(picked) == 4  # the left side has 4 boundary edges
        mids = layer.vertices[layer.boundary_edges[picked]].mean(axis=1)
        assert np.allclose(mids[:, 0], 0.0, atol=1e-9)

    def test_no_boxes_empty(self):
        layer = grid_layer(1, 1, 2, 2)
        assert len(select_boundary_edges(layer, [])) == 0


class TestConformalCurves:
    def test_disk_offsets(self):
        layer = disk_layer(5.0, 25, 80)
        df = heat_distance(layer, full_boundary(layer))
        curves = conformal_curves(df, layer, min_spacing=1.0)
        assert len(curves) == 2
        assert all(c.kind == "boundary" for c in curves)
        by_level = {round(c.isovalue, 6): c for c in curves}
        assert set(by_level) == {1.5, 2.5}
        for level, c in by_level.items():
            radii = np.linalg.norm(c.points, axis=1)
            assert np.median(radii) == pytest.approx(5.0 - level, rel=0.08)

    def test_thin_region_fewer_curves(self):
        layer = grid_layer(10.0, 4.0, 40, 16)  # max distance to boundary = 2.0
        df = heat_distance(layer, full_boundary(layer))
        curves = conformal_curves(df, layer, min_spacing=1.0)
        levels = {round(c.isovalue, 6) for c in curves}
        assert 2.5 not in levels
        assert levels <= {1.5}


def synthetic_df(layer, center):
    d = np.linalg.norm(layer.vertices - np.asarray(center), axis=1)
    return DistanceField(d=d, source_edges=np.zeros(0, dtype=int),
                         source_vertices=np.zeros(0, dtype=int))


def straight_stress_curve(layer, y):
    s = ScalarField(values=layer.vertices[:, 1].copy(), residual=0.0, anchors=[0])
    curves = extract_isocurves(layer, s, y)
    assert len(curves) == 1
    return curves[0]


class TestTruncateAndConnect:
    def test_disk_region_split_and_arc_joined(self):
        # a straight curve crossing a disk-shaped removed region is split in
        # two and rejoined by the minor arc of the 2.5W circle
        w = 0.4
        layer = grid_layer(10.0, 6.0, 50, 30)
        center = (5.0, 3.0)
        df = synthetic_df(layer, center)
        curve = straight_stress_curve(layer, 3.05)
        c_bnd = conformal_curves(df, layer, min_spacing=w)
        arcs25 = [c for c in c_bnd if abs(c.isovalue - 2.5 * w) < 1e-9]
        assert arcs25
        out = truncate_and_connect([curve], c_bnd, df, w)
        stress = [p for p in out if p.kind == "stress"]
        assert len(stress) == 1
        merged = stress[0]
        assert merged.connector_spans
        # connector points stay on the 2.5W circle around the centre
        for a, b in merged.connector_spans:
            arc_pts = merged.points[a:b + 1]
            radii = np.linalg.norm(arc_pts - center, axis=1)
            assert np.abs(radii - 2.5 * w).max() < 0.12
            # the minor arc stays near the crossing line, never the far side
            assert np.abs(arc_pts[:, 1] - 3.05).max() < 2.5 * w
        # kept points all outside the removed region
        dvals = np.linalg.norm(merged.points - center, axis=1)
        assert dvals.min() > 2.5 * w - 1e-6 * w
        # the standalone 2.5W curve is gone, the 1.5W curve stays
        levels = {round(p.isovalue, 6) for p in out if p.kind == "boundary"}
        assert levels == {round(1.5 * w, 6)}

    def test_empty_cbnd_step4_still_applies(self):
        a = Toolpath(points=[[0.0, 0.0], [1.0, 0.0]], kind="stress")
        b = Toolpath(points=[[1.5, 0.0], [2.5, 0.0]], kind="stress")  # gap 0.5 < 2W
        out = truncate_and_connect([a, b], [], None, min_spacing=1.0)
        assert len(out) == 1
        assert out[0].num_points == 4
        assert out[0].connector_spans == [(1, 2)]

    def test_gap_over_two_widths_not_joined(self):
        a = Toolpath(points=[[0.0, 0.0], [1.0, 0.0]], kind="stress")
        b = Toolpath(points=[[3.5, 0.0], [4.5, 0.0]], kind="stress")  # gap 2.5 > 2W
        out = truncate_and_connect([a, b], [], None, min_spacing=1.0)
        assert len(out) == 2

    def test_connectors_never_longer_than_two_widths(self, rng):
        w = 1.0
        curves = []
        for k in range(6):
            x = rng.uniform(0, 10)
            y = rng.uniform(0, 10)
            ang = rng.uniform(0, np.pi)
            d = np.array([np.cos(ang), np.sin(ang)])
            p0 = np.array([x, y])
            curves.append(Toolpath(points=np.vstack([p0, p0 + 3 * d]), kind="stress"))
        out = truncate_and_connect(curves, [], None, w)
        for p in out:
            for a, b in p.connector_spans:
                seg = p.points[a:b + 1] if b < p.num_points else np.vstack([p.points[a:],
                                                                            p.points[:1]])
                assert geometry.polyline_length(seg) <= 2 * w + 1e-9

    def test_fragment_inside_removed_region_deleted(self):
        layer = grid_layer(10.0, 6.0, 50, 30)
        df = synthetic_df(layer, (5.0, 3.0))
        curve = straight_stress_curve(layer, 3.05)
        # huge spacing: the whole curve sits inside d < 2.5W
        out = truncate_and_connect([curve], [], df, min_spacing=10.0)
        assert [p for p in out if p.kind == "stress"] == []

    def test_closed_curve_fully_kept(self):
        t = np.linspace(0, 2 * np.pi, 60, endpoint=False)
        ring = Toolpath(points=np.column_stack([5 + 2 * np.cos(t), 3 + 2 * np.sin(t)]),
                        kind="stress", closed=True)
        layer = grid_layer(10.0, 6.0, 20, 12)
        df = synthetic_df(layer, (-20.0, -20.0))  # removed region far away
        ring.edge_ids = np.zeros((60, 2), dtype=int)
        ring.edge_ts = np.zeros(60)
        df.d[0] = 100.0  # lerp of vertex 0 with t=0 -> d=100 at every point
        out = truncate_and_connect([ring], [], df, min_spacing=1.0)
        assert len(out) == 1
        assert out[0].closed
        assert np.array_equal(out[0].points, ring.points)


class TestFilterMinLength:
    def _path(self, length):
        return Toolpath(points=[[0.0, 0.0], [length, 0.0]], kind="stress")

    def test_just_below_removed(self):
        assert filter_min_length([self._path(41.9)], 42.0) == []

    def test_exactly_at_kept(self):
        kept = filter_min_length([self._path(42.0)], 42.0)
        assert len(kept) == 1

    def test_zero_identity(self):
        paths = [self._path(0.5), self._path(99.0)]
        assert filter_min_length(paths, 0.0) == paths

    def test_closed_path_length_includes_closure(self):
        sq = Toolpath(points=[[0, 0], [15, 0], [15, 15], [0, 15]], kind="stress",
                      closed=True)
        assert sq.length() == pytest.approx(60.0)
        assert filter_min_length([sq], 59.0) == [sq]
        assert filter_min_length([sq], 61.0) == []

    def test_removed_length_accounting(self):
        paths = [self._path(10.0), self._path(50.0), self._path(30.0)]
        kept = filter_min_length(paths, 42.0)
        before = sum(p.length() for p in paths)
        after = sum(p.length() for p in kept)
        assert before - after == pytest.approx(40.0, abs=1e-12)
