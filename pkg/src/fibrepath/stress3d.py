"""Tensile direction field on a tetrahedral mesh.

Turns per-element stress tensors into a sign-consistent field of tensile
directions: eigen-decomposition, tension-based direction selection,
orientation propagation along a minimum spanning tree of the face-adjacency
graph, and removal of locally incompatible vectors.
"""

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .mesh_io import adjacency_neighbors, build_adjacency, tensor_matrices

logger = logging.getLogger(__name__)

UNDEFINED = 0
DEFINED = 1
WEAK = 2

#: Stress weight assigned where no meaningful tensile direction exists; keeps
#: every element participating in orientation propagation without influence.
WEAK_SIGMA = 1e-5

#: Compression elements keep a tensile fallback only while |s1/s2| stays
#: below this ratio.
DEFAULT_TENSION_RATIO_LIMIT = 3.0

#: Neighbour-alignment threshold below which a vector counts as incompatible.
DEFAULT_COMPATIBILITY_THRESHOLD = 0.5


@dataclass
class PrincipalStress:
    """Eigen-decomposition of a symmetric stress tensor.

    ``values`` are sorted by descending absolute value; ``directions[i]`` is
    the unit eigenvector belonging to ``values[i]``.
    """

    values: np.ndarray
    directions: np.ndarray


@dataclass
class ElementField:
    """Per-element direction field.

    ``vectors`` are unit 3-vectors for defined and weak elements and zero for
    undefined ones. ``sigma`` is the positive stress weight (weak elements
    carry :data:`WEAK_SIGMA`). ``status`` holds ``DEFINED``, ``WEAK`` or
    ``UNDEFINED`` codes.
    """

    vectors: np.ndarray
    sigma: np.ndarray
    status: np.ndarray

    @property
    def num_elements(self):
        return len(self.sigma)


def _canonical_signs(dirs):
    """Flip eigenvectors so the largest-magnitude component is positive."""
    lead = np.argmax(np.abs(dirs), axis=-1)
    rows = np.take_along_axis(dirs, lead[..., None], axis=-1)[..., 0]
    return np.where(rows[..., None] < 0, -dirs, dirs)


def principal_decompose_batch(tensors):
    """Eigen-decompose ``(n, 6)`` tensors.

    Returns ``(values, directions)`` with values sorted by descending
    absolute value per element and ``directions[i, k]`` the unit eigenvector
    of ``values[i, k]``.
    """
    m = tensor_matrices(tensors)
    w, v = np.linalg.eigh(m)
    order = np.argsort(-np.abs(w), axis=1, kind="stable")
    values = np.take_along_axis(w, order, axis=1)
    dirs = np.take_along_axis(np.transpose(v, (0, 2, 1)), order[:, :, None], axis=1)
    return values, _canonical_signs(dirs)


def principal_decompose(tensor):
    """Eigen-decompose a single 6-component symmetric tensor."""
    values, dirs = principal_decompose_batch(np.asarray(tensor, dtype=float).reshape(1, 6))
    return PrincipalStress(values=values[0], directions=dirs[0])


def select_tensile_vector(p, ratio_limit=DEFAULT_TENSION_RATIO_LIMIT):
    """Pick the tensile direction and stress weight from a decomposition.

    Returns ``(vector, sigma, status)``:

    * the dominant principal stress is tensile -> its direction, ``DEFINED``;
    * it is compressive but the second is tensile and the compression does
      not dwarf it (``|s1/s2| < ratio_limit``) -> second direction,
      ``DEFINED``;
    * otherwise the dominant direction with :data:`WEAK_SIGMA`, ``WEAK``.
    """
    v, s, st = select_tensile_batch(p.values[None, :], p.directions[None, :, :], ratio_limit)
    return v[0], float(s[0]), int(st[0])


def select_tensile_batch(values, dirs, ratio_limit=DEFAULT_TENSION_RATIO_LIMIT):
    """Vectorized tensile-direction selection over all elements."""
    if ratio_limit <= 0:
        raise ValueError("ratio_limit must be positive")
    s1, s2 = values[:, 0], values[:, 1]
    n = len(values)
    vectors = dirs[:, 0, :].copy()
    sigma = np.full(n, WEAK_SIGMA)
    status = np.full(n, WEAK, dtype=np.int8)

    rule1 = s1 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(np.where(s2 != 0, s1 / np.where(s2 != 0, s2, 1.0), np.inf))
    rule2 = (~rule1) & (s1 < 0) & (s2 > 0) & (ratio < ratio_limit)

    vectors[rule2] = dirs[rule2, 1, :]
    sigma[rule1] = s1[rule1]
    sigma[rule2] = s2[rule2]
    status[rule1 | rule2] = DEFINED
    return vectors, sigma, status


def misalignment_weight(v_i, v_j):
    """Edge weight ``1 - |v_i . v_j|`` on normalized vectors, in [0, 1]."""
    vi = np.asarray(v_i, dtype=float)
    vj = np.asarray(v_j, dtype=float)
    ni = np.linalg.norm(vi)
    nj = np.linalg.norm(vj)
    if ni == 0 or nj == 0:
        return 1.0
    return float(1.0 - min(1.0, abs(np.dot(vi, vj)) / (ni * nj)))


def reorient_mst(field, mesh):
    """Propagate consistent vector signs along a minimum spanning tree.

    Elements with vectors form graph nodes; face-neighbour pairs form edges
    weighted by :func:`misalignment_weight`, so propagation avoids crossing
    regions where directions turn sharply. Each connected component is
    traversed by Prim's algorithm seeded at its highest-stress element (ties
    break to the lowest element index); a vector is flipped whenever it
    disagrees with the already-oriented vector it is reached from. Output
    vectors differ from the input only by sign.
    """
    if mesh.face_adjacency is None:
        raise ValueError("mesh adjacency not built; call build_adjacency first")
    has_vec = field.status != UNDEFINED
    if not has_vec.any():
        raise ValueError("field has no oriented elements")
    vectors = field.vectors.copy()
    adj = mesh.face_adjacency
    visited = ~has_vec  # undefined elements never enter the traversal
    remaining = int(has_vec.sum())

    while remaining > 0:
        cand = np.flatnonzero(~visited)
        seed = int(cand[np.argmax(field.sigma[cand])])
        heap = [(0.0, seed, -1)]
        while heap:
            w, j, i = heapq.heappop(heap)
            if visited[j]:
                continue
            visited[j] = True
            remaining -= 1
            if i >= 0 and float(np.dot(vectors[i], vectors[j])) < 0:
                vectors[j] = -vectors[j]
            vj = vectors[j]
            for k in adjacency_neighbors(adj, j):
                k = int(k)
                if not visited[k]:
                    # vectors are unit by construction; weight = 1 - |dot|
                    dot = abs(vj[0] * vectors[k, 0] + vj[1] * vectors[k, 1] + vj[2] * vectors[k, 2])
                    heapq.heappush(heap, (1.0 - min(1.0, dot), k, j))

    return ElementField(vectors=vectors, sigma=field.sigma.copy(), status=field.status.copy())


def remove_incompatible(field, mesh, threshold=DEFAULT_COMPATIBILITY_THRESHOLD):
    """Drop vectors that disagree with *every* neighbour.

    An element becomes undefined when its dot product with each
    vertex-sharing neighbour's vector stays at or below ``threshold``.
    Detection runs on the input field in a single pass (no cascading) and the
    stress weights of removed elements are retained. Elements with no
    oriented neighbour are left unchanged.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if mesh.vertex_adjacency is None:
        raise ValueError("mesh adjacency not built; call build_adjacency first")
    adj = mesh.vertex_adjacency
    n = field.num_elements
    has_vec = field.status != UNDEFINED

    indptr, indices = adj.indptr, adj.indices
    rows = np.repeat(np.arange(n), np.diff(indptr))
    valid = has_vec[rows] & has_vec[indices]
    dots = np.einsum("ij,ij->i", field.vectors[rows], field.vectors[indices])
    compatible = valid & (dots > threshold)

    has_neighbor = np.bincount(rows[valid], minlength=n) > 0
    keeps = np.bincount(rows[compatible], minlength=n) > 0
    removed = has_vec & has_neighbor & ~keeps

    status = field.status.copy()
    vectors = field.vectors.copy()
    status[removed] = UNDEFINED
    vectors[removed] = 0.0
    if removed.any():
        logger.debug("incompatibility filter removed %d of %d vectors", removed.sum(), n)
    return ElementField(vectors=vectors, sigma=field.sigma.copy(), status=status)


def neighbor_dot_products(field, mesh):
    """Dot products over all vertex-sharing element pairs with vectors.

    Useful for checking how well a compatibility threshold separates aligned
    regions from turbulent ones.
    """
    adj = mesh.vertex_adjacency
    if adj is None:
        raise ValueError("mesh adjacency not built")
    n = field.num_elements
    has_vec = field.status != UNDEFINED
    indptr, indices = adj.indptr, adj.indices
    rows = np.repeat(np.arange(n), np.diff(indptr))
    mask = (rows < indices) & has_vec[rows] & has_vec[indices]
    return np.einsum("ij,ij->i", field.vectors[rows[mask]], field.vectors[indices[mask]])


def compute_element_field(mesh, tensors, ratio_limit=DEFAULT_TENSION_RATIO_LIMIT,
                          threshold=DEFAULT_COMPATIBILITY_THRESHOLD):
    """Full 3D field stage: decompose, select, reorient, filter.

    Builds mesh adjacency on demand when the caller has not done so.
    """
    if mesh.face_adjacency is None or mesh.vertex_adjacency is None:
        mesh = build_adjacency(mesh)
    values, dirs = principal_decompose_batch(tensors)
    vectors, sigma, status = select_tensile_batch(values, dirs, ratio_limit)
    field = ElementField(vectors=vectors, sigma=sigma, status=status)
    field = reorient_mst(field, mesh)
    return remove_incompatible(field, mesh, threshold)


_STATUS_NAMES = {UNDEFINED: "undefined", DEFINED: "defined", WEAK: "weak"}


def dump_element_field(field, path):
    """Write a per-element ``<id> <status> <vx> <vy> <vz> <sigma>`` table."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(field.num_elements):
            v = field.vectors[i]
            fh.write(
                f"{i} {_STATUS_NAMES[int(field.status[i])]} "
                f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r} {float(field.sigma[i])!r}\n"
            )
