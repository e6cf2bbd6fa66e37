"""End-to-end orchestration from a flat-text config to on-disk artifacts."""

import ast
import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import boundary as boundary_mod
from . import export
from .field2d import complete_and_smooth, solve_scalar_field, weight_vectors
from .isopath import adaptive_extract
from .mesh_io import build_adjacency, load_stress_field, load_tet_mesh
from .slicer import project_field, slice_at_height
from .stress3d import compute_element_field
from .synthetic import zigzag_infill

logger = logging.getLogger(__name__)

FIBRE_KINDS = ("stress", "boundary", "connector")


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name and layer index."""

    def __init__(self, stage, layer, cause):
        self.stage = stage
        self.layer = layer
        self.cause = cause
        where = f" on layer {layer}" if layer is not None else ""
        super().__init__(f"stage '{stage}'{where} failed: {cause}")


@dataclass
class PipelineConfig:
    """All tunables of a run; defaults match the recommended values.

    ``boundary_source_boxes`` are ``(xmin, ymin, xmax, ymax)`` rectangles
    selecting the boundary edges to reinforce; an empty list disables the
    boundary-conformal stage. ``zigzag_spacing = 0`` disables matrix infill
    output.
    """

    mesh: str = ""
    stress: str = ""
    out_dir: str = "out"
    min_spacing: float = 1.0
    density_exponent: float = 1.0
    tension_ratio_limit: float = 3.0
    compatibility_threshold: float = 0.5
    smoothing_iterations: int = 50
    layer_height: float = 1.0
    z_offset: float = 0.0
    min_path_length_mm: float = 42.0
    boundary_source_boxes: list = field(default_factory=list)
    heat_t_scale: float = 1.0
    eq6_area_weight: bool = True
    zigzag_spacing: float = 0.0
    zigzag_angle: float = 0.0

    def __post_init__(self):
        if self.min_spacing <= 0:
            raise ValueError("min_spacing must be > 0")
        if self.tension_ratio_limit <= 0:
            raise ValueError("tension_ratio_limit must be > 0")
        if not 0 < self.compatibility_threshold < 1:
            raise ValueError("compatibility_threshold must lie in (0, 1)")
        if self.density_exponent < 0:
            raise ValueError("density_exponent must be >= 0")
        if self.smoothing_iterations < 1:
            raise ValueError("smoothing_iterations must be >= 1")
        if self.min_path_length_mm < 0:
            raise ValueError("min_path_length_mm must be >= 0")
        if self.layer_height <= 0:
            raise ValueError("layer_height must be > 0")


_BOOL_TOKENS = {"true": True, "false": False, "yes": True, "no": False,
                "on": True, "off": False}


def load_config(path):
    """Parse a flat ``key = value`` config file.

    Values are parsed as Python literals where possible (numbers, booleans,
    bracketed lists/tuples); anything else is kept as a bare string. Unknown
    keys are rejected.
    """
    known = set(PipelineConfig.__dataclass_fields__)
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            if val.lower() in _BOOL_TOKENS:
                values[key] = _BOOL_TOKENS[val.lower()]
                continue
            try:
                values[key] = ast.literal_eval(val)
            except (ValueError, SyntaxError):
                values[key] = val
    cfg = PipelineConfig(**values)
    cfg.boundary_source_boxes = [tuple(float(v) for v in box)
                                 for box in cfg.boundary_source_boxes]
    return cfg


def save_config(cfg, path):
    """Write a config file that :func:`load_config` reads back identically."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in asdict(cfg).items():
            if isinstance(val, str):
                fh.write(f"{key} = {val}\n")
            elif isinstance(val, bool):
                fh.write(f"{key} = {'true' if val else 'false'}\n")
            elif isinstance(val, list):
                rendered = ", ".join("(" + ", ".join(repr(float(v)) for v in box) + ")"
                                     for box in val)
                fh.write(f"{key} = [{rendered}]\n")
            else:
                fh.write(f"{key} = {val!r}\n")


@dataclass
class LayerStats:
    layer: int
    z: float
    face_count: int
    curve_count: int
    min_spacing: float
    fibre_length: float
    removed_length: float
    removed_count: int


@dataclass
class PipelineReport:
    layers: list
    stage_seconds: dict
    total_seconds: float

    def total_fibre_length(self):
        return sum(s.fibre_length for s in self.layers)

    def to_json(self):
        return json.dumps(
            {
                "layers": [asdict(s) for s in self.layers],
                "stage_seconds": {k: round(v, 6) for k, v in self.stage_seconds.items()},
                "total_seconds": round(self.total_seconds, 6),
            },
            indent=2,
        )


def layer_heights(z_min, z_max, layer_height, z_offset=0.0):
    """Mid-cell slicing heights ``z_min + offset + (k + 0.5) h`` inside the solid."""
    heights = []
    k = 0
    while True:
        z = z_min + z_offset + (k + 0.5) * layer_height
        if z >= z_max:
            break
        heights.append(z)
        k += 1
    return heights


def fibre_length(paths):
    """Total deposited fibre length over stress, boundary and connector paths."""
    return sum(p.length() for p in paths if p.kind in FIBRE_KINDS)


def _timed(times, name, fn, *args, layer=None, **kwargs):
    t0 = time.perf_counter()
    try:
        result = fn(*args, **kwargs)
    except Exception as exc:
        raise PipelineError(name, layer, exc) from exc
    times[name] = times.get(name, 0.0) + (time.perf_counter() - t0)
    return result


def run_pipeline(cfg, layers=None, stop_after=None, write=True):
    """Run the full toolpath pipeline described by a config.

    ``layers`` optionally restricts processing to an inclusive index range
    ``(a, b)``. ``stop_after`` may be ``"field"`` (write per-layer meshes with
    the fitted scalar field and stop) or ``"paths"`` (skip connection and
    length filtering). With ``write=False`` no artifacts are written and only
    the report and paths are returned.

    Returns ``(report, paths)``.
    """
    times = {}
    t_start = time.perf_counter()
    out = Path(cfg.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)

    mesh = _timed(times, "load", load_tet_mesh, cfg.mesh)
    tensors = _timed(times, "load", load_stress_field, cfg.stress, mesh)
    mesh = _timed(times, "adjacency", build_adjacency, mesh)
    field3d = _timed(times, "element_field", compute_element_field, mesh, tensors,
                     cfg.tension_ratio_limit, cfg.compatibility_threshold)

    z_min, z_max = mesh.z_extent()
    heights = layer_heights(z_min, z_max, cfg.layer_height, cfg.z_offset)
    indexed = list(enumerate(heights))
    if layers is not None:
        a, b = layers
        indexed = [(k, z) for k, z in indexed if a <= k <= b]
    if not indexed:
        raise PipelineError("slice", None, ValueError("no layers selected"))

    stats = []
    all_paths = []
    catalog = []
    for k, z in indexed:
        layer = _timed(times, "slice", slice_at_height, mesh, z, layer=k)
        catalog.append((k, float(layer.z)))
        ff = _timed(times, "project", project_field, field3d, layer, layer=k)
        ff = _timed(times, "smooth", complete_and_smooth, ff, layer,
                    cfg.smoothing_iterations, layer=k)
        ff = _timed(times, "weight", weight_vectors, ff, cfg.density_exponent, layer=k)
        scalar = _timed(times, "scalar_field", solve_scalar_field, layer, ff,
                        area_weight=cfg.eq6_area_weight, layer=k)

        if stop_after == "field":
            if write:
                export.write_layer_mesh(layer, out / f"layer_{k}.mesh.txt", scalar.values)
                export.write_svg(layer, [], out / f"layer_{k}.svg", scalar.values)
            stats.append(LayerStats(layer=k, z=float(layer.z), face_count=layer.num_faces,
                                    curve_count=0, min_spacing=float("inf"),
                                    fibre_length=0.0, removed_length=0.0, removed_count=0))
            continue

        c_str, n_curves, gap = _timed(times, "extract", adaptive_extract, layer, scalar,
                                      cfg.min_spacing, layer=k, return_stats=True)

        if stop_after == "paths":
            paths = c_str
            removed_len = 0.0
            removed_count = 0
        else:
            source = boundary_mod.select_boundary_edges(layer, cfg.boundary_source_boxes)
            c_bnd = []
            df = None
            if len(source):
                df = _timed(times, "heat", boundary_mod.heat_distance, layer, source,
                            cfg.heat_t_scale, layer=k)
                c_bnd = _timed(times, "conformal", boundary_mod.conformal_curves, df, layer,
                               cfg.min_spacing, layer=k)
            paths = _timed(times, "connect", boundary_mod.truncate_and_connect,
                           c_str, c_bnd, df, cfg.min_spacing, layer=k)
            before_len = fibre_length(paths)
            before_count = len(paths)
            paths = _timed(times, "filter", boundary_mod.filter_min_length, paths,
                           cfg.min_path_length_mm, layer=k)
            removed_len = before_len - fibre_length(paths)
            removed_count = before_count - len(paths)

        if cfg.zigzag_spacing > 0 and stop_after is None:
            angle = cfg.zigzag_angle + 90.0 * (k % 2)
            paths = paths + _timed(times, "zigzag", zigzag_infill, layer,
                                   cfg.zigzag_spacing, angle, layer=k)

        for p in paths:
            p.layer = k
            p.z = float(layer.z)
        all_paths.extend(paths)
        stats.append(LayerStats(layer=k, z=float(layer.z), face_count=layer.num_faces,
                                curve_count=n_curves, min_spacing=float(gap),
                                fibre_length=fibre_length(paths),
                                removed_length=removed_len, removed_count=removed_count))
        if write:
            export.write_svg(layer, paths, out / f"layer_{k}.svg",
                             scalar.values if stop_after == "paths" else None)

    report = PipelineReport(layers=stats, stage_seconds=times,
                            total_seconds=time.perf_counter() - t_start)
    if write:
        if stop_after != "field":
            name = "toolpaths_raw.txt" if stop_after == "paths" else "toolpaths.txt"
            export.write_toolpaths(all_paths, out / name, layers=catalog)
            export.write_gcode([p for p in all_paths if p.kind in FIBRE_KINDS],
                               out / "fibre.gcode")
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    logger.info("pipeline finished: %d layers, %.1f mm fibre, %.2f s",
                len(stats), report.total_fibre_length(), report.total_seconds)
    return report, all_paths
