"""Field completion, density weighting and scalar-field fitting."""

import numpy as np
import pytest

from conftest import annulus_layer, grid_layer, two_face_layer
from fibrepath.field2d import (ScalarField, complete_and_smooth, face_gradient_operator,
                               face_gradients, smoothing_energies, solve_scalar_field,
                               weight_vectors)
from fibrepath.slicer import FaceField
from fibrepath.stress3d import DEFINED, UNDEFINED


def make_ff(layer, v=None, sigma=None, status=None):
    nf = layer.num_faces
    v = np.tile([1.0, 0.0], (nf, 1)) if v is None else np.asarray(v, dtype=float)
    sigma = np.ones(nf) if sigma is None else np.asarray(sigma, dtype=float)
    status = np.full(nf, DEFINED, np.int8) if status is None else np.asarray(status, np.int8)
    return FaceField(v=v, sigma=sigma, u=np.zeros((nf, 2)), status=status)


class TestCompleteAndSmooth:
    def test_identical_field_fixed_point(self):
        layer = grid_layer(1, 1, 4, 4)
        ff = make_ff(layer, sigma=np.full(layer.num_faces, 2.5))
        out = complete_and_smooth(ff, layer, iterations=50)
        assert np.allclose(out.sigma, 2.5)
        assert np.allclose(out.v, ff.v)

    def test_single_source_diffuses_everywhere(self):
        layer = grid_layer(1, 1, 6, 6)
        nf = layer.num_faces
        status = np.full(nf, UNDEFINED, np.int8)
        status[0] = DEFINED
        v = np.zeros((nf, 2))
        v[0] = [1.0, 0.0]
        sigma = np.ones(nf)
        sigma[0] = 2.0
        ff = make_ff(layer, v=v, sigma=sigma, status=status)
        out = complete_and_smooth(ff, layer, iterations=400)
        assert (out.status == DEFINED).all()
        assert np.allclose(out.v, [1.0, 0.0], atol=1e-3)

    def test_two_face_scalar_fixed_point(self):
        layer = two_face_layer()
        ff = make_ff(layer, v=[[1, 0], [1, 0]], sigma=[4.0, 2.0])
        out = complete_and_smooth(ff, layer, iterations=50)
        assert out.sigma[0] == pytest.approx(4.0, abs=1e-12)
        assert out.sigma[1] == pytest.approx(4.0, abs=1e-6)

    def test_all_undefined_errors(self):
        layer = grid_layer(1, 1, 3, 3)
        ff = make_ff(layer, status=np.full(layer.num_faces, UNDEFINED, np.int8))
        with pytest.raises(ValueError, match="no defined"):
            complete_and_smooth(ff, layer)

    def test_energies_non_increasing_on_projected_fields(self):
        # the monotone-decrease claim holds for the fields this stage actually
        # sees: projected stress fields with undefined pockets (adversarial
        # random fields can increase transiently; see the decisions ledger)
        from fibrepath.slicer import project_field, slice_at_height
        from fibrepath.stress3d import compute_element_field
        from fibrepath.synthetic import build_test_solid

        mesh, tensors = build_test_solid("plate_hole", (14, 14, 1.5), 0.7,
                                         far_stress=1.0, hole_radius=2.0)
        field = compute_element_field(mesh, tensors)
        layer = slice_at_height(mesh, 0.75)
        ff = project_field(field, layer)
        trace = []
        complete_and_smooth(ff, layer, iterations=50, energy_trace=trace)
        e_sig = [e[0] for e in trace]
        e_vec = [e[1] for e in trace]
        assert (ff.status == UNDEFINED).any()  # pockets really were diffused
        for a, b in zip(e_sig[:-1], e_sig[1:]):
            assert b <= a * (1 + 1e-12) + 1e-15
        for a, b in zip(e_vec[:-1], e_vec[1:]):
            assert b <= a * (1 + 1e-12) + 1e-15

    def test_energy_drops_far_below_initial(self, rng):
        # convergence on arbitrary fields: after the default sweep count both
        # energies sit far below their starting values even when early sweeps
        # are not monotone
        layer = grid_layer(2, 1, 8, 4)
        nf = layer.num_faces
        v = rng.normal(size=(nf, 2))
        sigma = rng.uniform(0.5, 4.0, nf)
        status = np.where(rng.uniform(size=nf) < 0.7, DEFINED, UNDEFINED).astype(np.int8)
        status[int(np.argmax(sigma))] = DEFINED
        ff = make_ff(layer, v=v, sigma=sigma, status=status)
        trace = []
        complete_and_smooth(ff, layer, iterations=50, energy_trace=trace)
        assert trace[-1][0] < 0.1 * trace[0][0]
        assert trace[-1][1] < 0.1 * trace[0][1]

    def test_vectors_unit_after_final_sweep(self, rng):
        layer = grid_layer(1, 1, 5, 5)
        nf = layer.num_faces
        v = rng.normal(size=(nf, 2)) * 0.3
        ff = make_ff(layer, v=v)
        out = complete_and_smooth(ff, layer, iterations=10)
        assert np.allclose(np.linalg.norm(out.v, axis=1), 1.0, atol=1e-12)


class TestWeightVectors:
    def test_p_zero_unit_norms(self, rng):
        layer = grid_layer(1, 1, 4, 4)
        ff = make_ff(layer, sigma=rng.uniform(0.1, 9.0, layer.num_faces))
        out = weight_vectors(ff, exponent=0.0)
        assert np.allclose(np.linalg.norm(out.u, axis=1), 1.0)

    def test_p_one_direct_substitution(self):
        layer = two_face_layer()
        ff = make_ff(layer, v=[[0, 1], [0, 1]], sigma=[3.0, 3.0])
        out = weight_vectors(ff, exponent=1.0)
        assert np.allclose(out.u, [[0, 3.0], [0, 3.0]])

    def test_p_two_norm(self):
        layer = two_face_layer()
        ff = make_ff(layer, v=[[0.6, 0.8], [1, 0]], sigma=[3.0, 3.0])
        out = weight_vectors(ff, exponent=2.0)
        assert np.allclose(np.linalg.norm(out.u, axis=1), 9.0)

    def test_zero_vector_errors(self):
        layer = two_face_layer()
        ff = make_ff(layer, v=[[0, 0], [1, 0]])
        with pytest.raises(ValueError, match="zero-length"):
            weight_vectors(ff)


def _uniform_u(layer, ux, uy):
    ff = make_ff(layer)
    ff.u = np.tile([float(ux), float(uy)], (layer.num_faces, 1))
    return ff


class TestSolveScalarField:
    def test_constant_gradient_x(self):
        layer = grid_layer(1, 1, 8, 8)
        s = solve_scalar_field(layer, _uniform_u(layer, 1.0, 0.0))
        anchor_x = layer.vertices[s.anchors[0], 0]
        assert np.abs(s.values - (layer.vertices[:, 0] - anchor_x)).max() < 1e-9
        assert s.residual < 1e-9
        assert s.values[s.anchors[0]] == 0.0

    def test_constant_gradient_y(self):
        layer = grid_layer(2, 1, 6, 4)
        c = -2.5
        s = solve_scalar_field(layer, _uniform_u(layer, 0.0, c))
        anchor_y = layer.vertices[s.anchors[0], 1]
        assert np.abs(s.values - c * (layer.vertices[:, 1] - anchor_y)).max() < 1e-9

    def test_affine_gradient_recovery(self, rng):
        # u = grad(g) for degree-1 g is recovered up to the anchor constant
        layer = grid_layer(1.5, 1.0, 7, 5)
        a, b = rng.normal(size=2)
        s = solve_scalar_field(layer, _uniform_u(layer, a, b))
        g = a * layer.vertices[:, 0] + b * layer.vertices[:, 1]
        g -= g[s.anchors[0]]
        assert np.abs(s.values - g).max() < 1e-9
        assert s.residual < 1e-9

    def test_curl_field_matches_dense_oracle(self):
        # rotational u has no exact potential: compare with an independent
        # dense least-squares solve of the same weighted objective
        layer = annulus_layer(0.5, 1.0, 3, 24)
        assert layer.num_vertices <= 200
        centers = layer.vertices[layer.triangles].mean(axis=1)
        u = np.column_stack([-centers[:, 1], centers[:, 0]])
        ff = make_ff(layer)
        ff.u = u
        s = solve_scalar_field(layer, ff, area_weight=True)
        assert s.residual > 1e-3

        g = face_gradient_operator(layer).toarray()
        w = np.sqrt(np.repeat(layer.face_area, 2))
        anchor = s.anchors[0]
        keep = [i for i in range(layer.num_vertices) if i != anchor]
        sol, *_ = np.linalg.lstsq(w[:, None] * g[:, keep], w * u.ravel(), rcond=None)
        dense = np.zeros(layer.num_vertices)
        dense[keep] = sol
        assert np.abs(s.values - dense).max() < 1e-8

    def test_gradient_matches_finite_differences(self, rng):
        layer = grid_layer(1, 1, 5, 5)
        vals = rng.normal(size=layer.num_vertices)
        grads = face_gradients(layer, vals)

        def interp(face, point):
            tri = layer.triangles[face]
            p = layer.vertices[tri]
            mat = np.column_stack([p[1] - p[0], p[2] - p[0]])
            lam12 = np.linalg.solve(mat, np.asarray(point) - p[0])
            lam = np.array([1 - lam12.sum(), lam12[0], lam12[1]])
            return float(lam @ vals[tri])

        h = 1e-6
        for face in rng.choice(layer.num_faces, 10, replace=False):
            c = layer.vertices[layer.triangles[face]].mean(axis=0)
            gx = (interp(face, c + [h, 0]) - interp(face, c - [h, 0])) / (2 * h)
            gy = (interp(face, c + [0, h]) - interp(face, c - [0, h])) / (2 * h)
            scale = max(1.0, np.abs(grads[face]).max())
            assert abs(grads[face, 0] - gx) / scale < 1e-6
            assert abs(grads[face, 1] - gy) / scale < 1e-6

    def test_scaling_covariance(self, rng):
        layer = grid_layer(1, 1, 6, 6)
        nf = layer.num_faces
        u = rng.normal(size=(nf, 2))
        ff = make_ff(layer)
        ff.u = u
        s1 = solve_scalar_field(layer, ff)
        ff2 = make_ff(layer)
        ff2.u = 3.0 * u
        s2 = solve_scalar_field(layer, ff2)
        assert np.allclose(s2.values, 3.0 * s1.values, rtol=1e-12, atol=1e-12)

    def test_area_weight_toggle_changes_solution(self, rng):
        # irregular areas make the weighted and unweighted fits differ
        layer = annulus_layer(0.3, 1.0, 3, 16)
        centers = layer.vertices[layer.triangles].mean(axis=1)
        u = np.column_stack([-centers[:, 1] ** 2, centers[:, 0]])
        ff = make_ff(layer)
        ff.u = u
        s_w = solve_scalar_field(layer, ff, area_weight=True)
        s_u = solve_scalar_field(layer, ff, area_weight=False)
        assert np.abs(s_w.values - s_u.values).max() > 1e-6
