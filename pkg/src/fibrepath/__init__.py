"""Stress-oriented continuous-fibre toolpath generation on tetrahedral meshes.

From per-element stress tensors on a tetrahedral solid to adaptive,
tension-aligned fibre toolpaths per slicing layer: tensile-direction field
processing, per-layer scalar-field fitting, adaptive isocurve extraction and
boundary-conformal connection.
"""

from .boundary import (DistanceField, conformal_curves, filter_min_length,
                       heat_distance, select_boundary_edges, truncate_and_connect)
from .field2d import (ScalarField, complete_and_smooth, face_gradients,
                      solve_scalar_field, weight_vectors)
from .isopath import (Toolpath, adaptive_extract, extract_isocurves,
                      isocurve_levels, min_neighbor_distance)
from .mesh_io import (MeshFormatError, TetMesh, build_adjacency, load_stress_field,
                      load_tet_mesh, save_stress_field, save_tet_mesh)
from .pipeline import (LayerStats, PipelineConfig, PipelineError, PipelineReport,
                       load_config, run_pipeline, save_config)
from .slicer import EmptyLayerError, FaceField, LayerMesh, project_field, slice_at_height
from .stress3d import (ElementField, PrincipalStress, compute_element_field,
                       principal_decompose, remove_incompatible, reorient_mst,
                       select_tensile_vector)
from .synthetic import (build_test_solid, cantilever_stress, kirsch_stress,
                        zigzag_infill)

__version__ = "0.1.0"

__all__ = [
    "DistanceField", "ElementField", "EmptyLayerError", "FaceField", "LayerMesh",
    "LayerStats", "MeshFormatError", "PipelineConfig", "PipelineError",
    "PipelineReport", "PrincipalStress", "ScalarField", "TetMesh", "Toolpath",
    "adaptive_extract", "build_adjacency", "build_test_solid", "cantilever_stress",
    "complete_and_smooth", "compute_element_field", "conformal_curves",
    "extract_isocurves", "face_gradients", "filter_min_length", "heat_distance",
    "isocurve_levels", "kirsch_stress", "load_config", "load_stress_field",
    "load_tet_mesh", "min_neighbor_distance", "principal_decompose", "project_field",
    "remove_incompatible", "reorient_mst", "run_pipeline", "save_config",
    "save_stress_field", "save_tet_mesh", "select_boundary_edges",
    "select_tensile_vector", "slice_at_height", "solve_scalar_field",
    "truncate_and_connect", "weight_vectors", "zigzag_infill",
]
