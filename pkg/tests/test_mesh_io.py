"""Mesh and stress file round-trips, validation errors, adjacency."""

import numpy as np
import pytest

from fibrepath.mesh_io import (MeshFormatError, adjacency_neighbors, build_adjacency,
                               load_stress_field, load_tet_mesh, make_tet_mesh,
                               save_stress_field, save_tet_mesh, tensor_matrices)

SINGLE_TET = """tetmesh v1 4 1
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
t 0 1 2 3
"""

TWO_TETS_SHARED_FACE = """tetmesh v1 5 2
# two tets glued along the face (1 2 3)
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
v 1 1 1
t 0 1 2 3
t 1 2 3 4
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_tet_loads(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", SINGLE_TET))
    assert mesh.num_vertices == 4
    assert mesh.num_tets == 1
    assert mesh.face_adjacency is None
    assert mesh.vertex_adjacency is None


def test_out_of_range_index_reports_line(tmp_path):
    bad = SINGLE_TET.replace("t 0 1 2 3", "t 0 1 2 10")
    with pytest.raises(MeshFormatError, match=r":6.*10"):
        load_tet_mesh(_write(tmp_path, "m.txt", bad))


def test_two_tets_shared_face(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", TWO_TETS_SHARED_FACE))
    assert mesh.num_vertices == 5
    assert mesh.num_tets == 2


def test_comments_allowed_after_header(tmp_path):
    text = SINGLE_TET.replace("v 1 0 0", "# a comment\nv 1 0 0")
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", text))
    assert mesh.num_vertices == 4


def test_inverted_tet_rejected_with_id(tmp_path):
    bad = SINGLE_TET.replace("t 0 1 2 3", "t 0 2 1 3")
    with pytest.raises(MeshFormatError, match="tet 0"):
        load_tet_mesh(_write(tmp_path, "m.txt", bad))


def test_repeated_vertex_rejected(tmp_path):
    bad = SINGLE_TET.replace("t 0 1 2 3", "t 0 1 2 2")
    with pytest.raises(MeshFormatError, match="repeats"):
        load_tet_mesh(_write(tmp_path, "m.txt", bad))


def test_mesh_roundtrip_bit_exact(tmp_path, rng):
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
                      [1, 1, 1]], dtype=float)
    verts += rng.normal(scale=1e-3, size=verts.shape)
    verts[4] = [1.0000000000000002, 1 / 3, 0.9999999999876543]
    mesh = make_tet_mesh(verts, [[0, 1, 2, 3], [1, 2, 3, 4]])
    p = tmp_path / "m.txt"
    save_tet_mesh(mesh, p)
    again = load_tet_mesh(p)
    assert np.array_equal(mesh.vertices, again.vertices)
    assert np.array_equal(mesh.tets, again.tets)
    save_tet_mesh(again, tmp_path / "m2.txt")
    assert (tmp_path / "m.txt").read_bytes() == (tmp_path / "m2.txt").read_bytes()


def test_stress_zero_field(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", TWO_TETS_SHARED_FACE))
    text = "stress v1 2\n" + "0 0 0 0 0 0\n" * 2
    tensors = load_stress_field(_write(tmp_path, "s.txt", text), mesh)
    assert tensors.shape == (2, 6)
    assert np.all(tensors == 0)


def test_stress_count_mismatch(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", TWO_TETS_SHARED_FACE))
    with pytest.raises(MeshFormatError, match="does not match"):
        load_stress_field(_write(tmp_path, "s.txt", "stress v1 1\n0 0 0 0 0 0\n"), mesh)
    short = "stress v1 2\n0 0 0 0 0 0\n"
    with pytest.raises(MeshFormatError, match="found 1"):
        load_stress_field(_write(tmp_path, "s.txt", short), mesh)


def test_stress_diagonal_encoding(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", SINGLE_TET))
    tensors = load_stress_field(_write(tmp_path, "s.txt", "stress v1 1\n5 -1 0 0 0 0\n"), mesh)
    m = tensor_matrices(tensors)[0]
    assert np.allclose(m, np.diag([5.0, -1.0, 0.0]))


def test_stress_non_finite_rejected(tmp_path):
    mesh = load_tet_mesh(_write(tmp_path, "m.txt", SINGLE_TET))
    with pytest.raises(MeshFormatError, match="non-finite"):
        load_stress_field(_write(tmp_path, "s.txt", "stress v1 1\nnan 0 0 0 0 0\n"), mesh)


def test_stress_roundtrip_bit_exact(tmp_path, rng):
    mesh = make_tet_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2, 3]])
    tensors = rng.normal(size=(1, 6)) * 13.7
    p = tmp_path / "s.txt"
    save_stress_field(tensors, p)
    again = load_stress_field(p, mesh)
    assert np.array_equal(tensors, again)


def test_adjacency_shared_face(tmp_path):
    mesh = build_adjacency(load_tet_mesh(_write(tmp_path, "m.txt", TWO_TETS_SHARED_FACE)))
    assert list(adjacency_neighbors(mesh.face_adjacency, 0)) == [1]
    assert list(adjacency_neighbors(mesh.face_adjacency, 1)) == [0]
    assert list(adjacency_neighbors(mesh.vertex_adjacency, 0)) == [1]


def test_adjacency_vertex_only():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
             [-1, 0, 0], [0, -1, 0], [0, 0, -1]]
    mesh = build_adjacency(make_tet_mesh(verts, [[0, 1, 2, 3], [0, 4, 6, 5]]))
    assert mesh.face_adjacency.nnz == 0
    assert list(adjacency_neighbors(mesh.vertex_adjacency, 0)) == [1]
    assert list(adjacency_neighbors(mesh.vertex_adjacency, 1)) == [0]


def test_adjacency_single_tet(tmp_path):
    mesh = build_adjacency(load_tet_mesh(_write(tmp_path, "m.txt", SINGLE_TET)))
    assert mesh.face_adjacency.nnz == 0
    assert mesh.vertex_adjacency.nnz == 0


def test_adjacency_idempotent(tmp_path):
    mesh = build_adjacency(load_tet_mesh(_write(tmp_path, "m.txt", TWO_TETS_SHARED_FACE)))
    again = build_adjacency(mesh)
    assert (mesh.face_adjacency != again.face_adjacency).nnz == 0
    assert (mesh.vertex_adjacency != again.vertex_adjacency).nnz == 0


def test_adjacency_symmetric_even_degree_sum():
    from fibrepath.synthetic import build_test_solid

    mesh, _ = build_test_solid("box", (3, 2, 2), 1.0)
    mesh = build_adjacency(mesh)
    fa = mesh.face_adjacency
    assert (fa != fa.T).nnz == 0
    assert fa.nnz % 2 == 0
    va = mesh.vertex_adjacency
    assert (va != va.T).nnz == 0
    # vertex adjacency contains face adjacency and excludes the diagonal
    assert (fa > va).nnz == 0
    assert va.diagonal().sum() == 0


def test_non_manifold_face_rejected():
    from fibrepath.mesh_io import tet_volumes

    # three tets all containing the face (0 1 2)
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0.3, 0.3, -1], [1, 1, 1]]
    tets = np.array([[0, 1, 2, 3], [0, 2, 1, 4], [1, 2, 5, 0]])
    v = np.asarray(verts, dtype=float)
    vols = tet_volumes(v, tets)
    tets[vols < 0] = tets[vols < 0][:, [0, 1, 3, 2]]
    mesh = make_tet_mesh(v, tets)
    with pytest.raises(MeshFormatError, match="non-manifold"):
        build_adjacency(mesh)
