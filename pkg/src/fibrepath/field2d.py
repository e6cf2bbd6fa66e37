"""Per-layer field completion, density weighting and scalar-field fitting.

Undefined face vectors are filled in and the whole face field smoothed by
iterated neighbour averaging; the smoothed directions are then scaled by a
power of the stress weight, and a piecewise-linear scalar field is fitted so
its per-triangle gradients match the weighted vectors in least squares.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .slicer import FaceField, face_edge_adjacency
from .stress3d import DEFINED, UNDEFINED

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING_ITERATIONS = 50
DEFAULT_DENSITY_EXPONENT = 1.0

#: Normal-equation residual (relative) beyond which the solve is rejected.
SOLVE_RESIDUAL_LIMIT = 1e-10


@dataclass
class ScalarField:
    """Piecewise-linear scalar field on layer vertices.

    ``values[anchor] == 0`` exactly for each per-component anchor vertex;
    ``residual`` is the final least-squares objective value.
    """

    values: np.ndarray
    residual: float
    anchors: list

    @property
    def value_range(self):
        return float(self.values.min()), float(self.values.max())


def _face_components(layer):
    adj = face_edge_adjacency(layer)
    n, labels = csgraph.connected_components(adj, directed=False)
    return n, labels


def complete_and_smooth(ff, layer, iterations=DEFAULT_SMOOTHING_ITERATIONS,
                        energy_trace=None):
    """Diffuse the face field until undefined faces acquire values.

    Runs Jacobi sweeps replacing every face's weight and vector by the mean
    over its edge-neighbour faces, while one face per connected component --
    the defined face with the largest initial weight -- is held fixed as the
    boundary condition. Undefined faces start from a zero vector and fill in
    by diffusion. After the final sweep all vectors are normalized to unit
    length and every face is marked defined.

    Passing a list as ``energy_trace`` records the neighbour-difference
    energies ``(weight, vector)`` of every raw sweep iterate, before the
    final normalization.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    nf = ff.num_faces
    defined = ff.status == DEFINED
    if not defined.any():
        raise ValueError("cannot smooth a layer with no defined faces")

    adj = face_edge_adjacency(layer)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.zeros(nf)
    inv[deg > 0] = 1.0 / deg[deg > 0]
    mean_op = sparse.diags(inv) @ adj

    n_comp, labels = _face_components(layer)
    fixed = []
    for c in range(n_comp):
        in_comp = labels == c
        cand = np.flatnonzero(in_comp & defined)
        if len(cand) == 0:
            raise ValueError(f"layer component {c} has no defined face to pin")
        fixed.append(int(cand[np.argmax(ff.sigma[cand])]))
    fixed = np.asarray(fixed, dtype=int)

    sigma = ff.sigma.astype(float).copy()
    v = ff.v.astype(float).copy()
    v[~defined] = 0.0
    sigma_fix = sigma[fixed].copy()
    v_fix = v[fixed].copy()
    isolated = deg == 0

    if energy_trace is not None:
        energy_trace.append(_raw_energies(sigma, v, adj))
    for _ in range(iterations):
        sigma_new = mean_op @ sigma
        v_new = mean_op @ v
        sigma_new[isolated] = sigma[isolated]
        v_new[isolated] = v[isolated]
        sigma_new[fixed] = sigma_fix
        v_new[fixed] = v_fix
        sigma, v = sigma_new, v_new
        if energy_trace is not None:
            energy_trace.append(_raw_energies(sigma, v, adj))

    norms = np.linalg.norm(v, axis=1)
    ok = norms > 0
    v[ok] /= norms[ok, None]
    if not ok.all():
        logger.warning("%d faces kept zero vectors after smoothing", int((~ok).sum()))
    status = np.full(nf, DEFINED, dtype=np.int8)
    return FaceField(v=v, sigma=sigma, u=np.zeros_like(v), status=status)


def _raw_energies(sigma, v, adj):
    n = len(sigma)
    indptr, indices = adj.indptr, adj.indices
    rows = np.repeat(np.arange(n), np.diff(indptr))
    deg = np.diff(indptr).astype(float)
    inv = np.zeros_like(deg)
    inv[deg > 0] = 1.0 / deg[deg > 0]
    ds = (sigma[rows] - sigma[indices]) ** 2
    dv = ((v[rows] - v[indices]) ** 2).sum(axis=1)
    e_sigma = float(np.bincount(rows, weights=ds, minlength=n) @ inv)
    e_vec = float(np.bincount(rows, weights=dv, minlength=n) @ inv)
    return e_sigma, e_vec


def smoothing_energies(ff, layer):
    """Neighbour-difference energies of the weights and of the vectors.

    Each face contributes the mean squared difference to its edge-neighbour
    faces; returns ``(weight_energy, vector_energy)``.
    """
    return _raw_energies(ff.sigma, ff.v, face_edge_adjacency(layer))


def weight_vectors(ff, exponent=DEFAULT_DENSITY_EXPONENT):
    """Scale unit directions by ``sigma**exponent`` to steer path density.

    ``exponent = 0`` yields unit vectors everywhere (uniform spacing); larger
    exponents widen the contrast between high- and low-stress regions.
    """
    if exponent < 0:
        raise ValueError("density exponent must be >= 0")
    norms = np.linalg.norm(ff.v, axis=1)
    if (norms == 0).any():
        raise ValueError("zero-length face vector; smoothing must run before weighting")
    u = (ff.sigma ** exponent)[:, None] * (ff.v / norms[:, None])
    return FaceField(v=ff.v.copy(), sigma=ff.sigma.copy(), u=u, status=ff.status.copy())


def face_gradient_operator(layer):
    """Sparse operator taking vertex values to stacked per-face gradients.

    Row ``2f`` is the x-component and row ``2f+1`` the y-component of the
    constant gradient of the piecewise-linear interpolant on face ``f``.
    """
    tri = layer.triangles
    p = layer.vertices[tri]
    area = layer.face_area
    nf = len(tri)
    rows = np.empty(nf * 6, dtype=np.int64)
    cols = np.empty(nf * 6, dtype=np.int64)
    vals = np.empty(nf * 6)
    for local in range(3):
        jj = p[:, (local + 1) % 3, :]
        kk = p[:, (local + 2) % 3, :]
        e = kk - jj
        # gradient of the hat function at vertex `local`: rotate the opposite
        # edge by +90 degrees and divide by twice the area
        gx = -e[:, 1] / (2.0 * area)
        gy = e[:, 0] / (2.0 * area)
        base = np.arange(nf)
        rows[local * 2 * nf: local * 2 * nf + nf] = 2 * base
        rows[local * 2 * nf + nf: (local + 1) * 2 * nf] = 2 * base + 1
        cols[local * 2 * nf: local * 2 * nf + nf] = tri[:, local]
        cols[local * 2 * nf + nf: (local + 1) * 2 * nf] = tri[:, local]
        vals[local * 2 * nf: local * 2 * nf + nf] = gx
        vals[local * 2 * nf + nf: (local + 1) * 2 * nf] = gy
    return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * nf, layer.num_vertices))


def face_gradients(layer, vertex_values):
    """Per-face constant gradient of a vertex field, shape ``(nf, 2)``."""
    g = face_gradient_operator(layer) @ np.asarray(vertex_values, dtype=float)
    return g.reshape(-1, 2)


def _vertex_components(layer):
    nv = layer.num_vertices
    tri = layer.triangles
    rows = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
    cols = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
    adj = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(nv, nv))
    n, labels = csgraph.connected_components(adj, directed=False)
    return n, labels


def solve_scalar_field(layer, ff, area_weight=True):
    """Fit vertex values so per-face gradients match the weighted vectors.

    Minimizes the (optionally area-weighted) squared difference between the
    piecewise-linear gradient and ``ff.u`` over all faces. Each connected
    component is solved independently with one anchor vertex pinned to zero:
    the lowest-index vertex of the component's highest-weight face.
    """
    nv = layer.num_vertices
    g = face_gradient_operator(layer)
    u_flat = ff.u.ravel()
    if area_weight:
        w = np.repeat(layer.face_area, 2)
    else:
        w = np.ones(2 * layer.num_faces)
    gw = g.multiply(w[:, None]).tocsr()
    k = (g.T @ gw).tocsr()
    b = g.T @ (w * u_flat)

    n_comp, labels = _vertex_components(layer)
    anchors = []
    for c in range(n_comp):
        faces = np.flatnonzero(labels[layer.triangles[:, 0]] == c)
        if len(faces) == 0:
            anchors.append(int(np.flatnonzero(labels == c)[0]))
            continue
        best = faces[np.argmax(ff.sigma[faces])]
        anchors.append(int(layer.triangles[best].min()))

    free = np.setdiff1d(np.arange(nv), np.asarray(anchors, dtype=int))
    k_ff = k[free][:, free]
    b_f = b[free]
    values = np.zeros(nv)
    if len(free):
        sol = spsolve(k_ff.tocsc(), b_f)
        if not np.isfinite(sol).all():
            raise RuntimeError("scalar-field system is singular; disconnected component not split?")
        rel = np.linalg.norm(k_ff @ sol - b_f) / max(np.linalg.norm(b_f), 1e-300)
        if rel > SOLVE_RESIDUAL_LIMIT:
            raise RuntimeError(f"scalar-field solve residual {rel:.3e} exceeds limit")
        values[free] = sol

    r = g @ values - u_flat
    residual = float((w * r * r).sum())
    return ScalarField(values=values, residual=residual, anchors=anchors)
