"""Serialization of toolpaths and layer artifacts.

All text formats use shortest round-trip float formatting so written files
re-parse bit-exactly and identical runs produce byte-identical output.
"""

import logging

import numpy as np

from .isopath import Toolpath
from .slicer import boundary_loops

logger = logging.getLogger(__name__)

SVG_COLORS = {"stress": "#1f5fd0", "boundary": "#1faa4b", "connector": "#d03a2f",
              "zigzag": "#9a9a9a"}


def _fmt(x):
    return repr(float(x))


def write_toolpaths(paths, path, layers=None):
    """Write a ``toolpaths v1`` file.

    ``layers`` optionally fixes the layer catalog as ``(index, z)`` pairs so
    layers whose paths were all filtered away still appear; by default the
    catalog is derived from the paths.
    """
    if layers is None:
        catalog = {}
        for p in paths:
            catalog.setdefault(int(p.layer), float(p.z))
        layers = sorted(catalog.items())
    by_layer = {int(k): [] for k, _ in layers}
    for p in paths:
        by_layer[int(p.layer)].append(p)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"toolpaths v1 {len(layers)}\n")
        for k, z in layers:
            group = by_layer[int(k)]
            fh.write(f"layer {int(k)} z={_fmt(z)} {len(group)}\n")
            for p in group:
                iso = "nan" if p.isovalue is None else _fmt(p.isovalue)
                fh.write(f"path {p.kind} {p.num_points} {int(p.closed)} iso={iso}\n")
                for x, y in p.points:
                    fh.write(f"{_fmt(x)} {_fmt(y)}\n")


def read_toolpaths(path):
    """Parse a ``toolpaths v1`` file into ``(paths, layer_catalog)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0

    def take():
        nonlocal pos
        while pos < len(lines) and (not lines[pos].strip() or lines[pos].lstrip().startswith("#")):
            pos += 1
        if pos >= len(lines):
            raise ValueError(f"{path}: unexpected end of file")
        pos += 1
        return lines[pos - 1]

    header = take().split()
    if header[:2] != ["toolpaths", "v1"]:
        raise ValueError(f"{path}: expected 'toolpaths v1' header")
    n_layers = int(header[2])
    paths = []
    catalog = []
    for _ in range(n_layers):
        parts = take().split()
        if parts[0] != "layer" or not parts[2].startswith("z="):
            raise ValueError(f"{path}: bad layer line {' '.join(parts)!r}")
        k = int(parts[1])
        z = float(parts[2][2:])
        n_paths = int(parts[3])
        catalog.append((k, z))
        for _ in range(n_paths):
            head = take().split()
            if head[0] != "path" or not head[4].startswith("iso="):
                raise ValueError(f"{path}: bad path line {' '.join(head)!r}")
            kind = head[1]
            m = int(head[2])
            closed = bool(int(head[3]))
            iso_tok = head[4][4:]
            iso = None if iso_tok == "nan" else float(iso_tok)
            pts = np.empty((m, 2))
            for i in range(m):
                x, y = take().split()
                pts[i] = (float(x), float(y))
            paths.append(Toolpath(points=pts, kind=kind, closed=closed, layer=k, z=z,
                                  isovalue=iso))
    return paths, catalog


def write_gcode(paths, path, travel_feed=3000.0, print_feed=300.0):
    """Write a simplified, illustrative machine-code export.

    Per path: a ``G0`` travel to the start, ``G1`` extrusion moves carrying a
    cumulative filament length ``E``, and a ``;CUT`` marker at the end.
    Layer changes appear as ``;LAYER <k> Z<z>`` comments. Closed paths get an
    explicit closing move. This is not a verified printer dialect.
    """
    e = 0.0
    current_layer = None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("; fibrepath gcode v1\n")
        fh.write(f"G0 F{_fmt(travel_feed)}\n")
        fh.write(f"G1 F{_fmt(print_feed)}\n")
        for p in paths:
            key = (int(p.layer), float(p.z))
            if key != current_layer:
                fh.write(f";LAYER {key[0]} Z{_fmt(key[1])}\n")
                current_layer = key
            pts = p.points
            fh.write(f"G0 X{_fmt(pts[0, 0])} Y{_fmt(pts[0, 1])}\n")
            for i in range(1, len(pts)):
                e += float(np.linalg.norm(pts[i] - pts[i - 1]))
                fh.write(f"G1 X{_fmt(pts[i, 0])} Y{_fmt(pts[i, 1])} E{_fmt(e)}\n")
            if p.closed:
                e += float(np.linalg.norm(pts[0] - pts[-1]))
                fh.write(f"G1 X{_fmt(pts[0, 0])} Y{_fmt(pts[0, 1])} E{_fmt(e)}\n")
            fh.write(";CUT\n")


def read_gcode_polylines(path):
    """Recover the deposited polylines from a G-code export.

    Returns ``(layer, z, points)`` tuples, one per ``;CUT``-terminated path;
    closed paths come back with their closing point repeated.
    """
    out = []
    layer, z = 0, 0.0
    current = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith(";LAYER"):
                parts = line.split()
                layer = int(parts[1])
                z = float(parts[2][1:])
            elif line.startswith(";CUT"):
                if current:
                    out.append((layer, z, np.asarray(current)))
                current = []
            elif line.startswith(("G0 X", "G1 X")):
                parts = line.split()
                current.append((float(parts[1][1:]), float(parts[2][1:])))
    return out


def write_layer_mesh(layer, path, scalar=None):
    """Write a ``layer v1`` dump; vertex lines carry the scalar field when given."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"layer v1 {_fmt(layer.z)} {layer.num_vertices} {layer.num_faces}\n")
        if scalar is None:
            for x, y in layer.vertices:
                fh.write(f"v {_fmt(x)} {_fmt(y)}\n")
        else:
            for (x, y), s in zip(layer.vertices, scalar):
                fh.write(f"v {_fmt(x)} {_fmt(y)} {_fmt(s)}\n")
        for a, b, c in layer.triangles:
            fh.write(f"t {a} {b} {c}\n")


def read_layer_mesh(path):
    """Parse a ``layer v1`` dump into ``(z, vertices, triangles, scalar_or_None)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if lines[0][:2] != ["layer", "v1"]:
        raise ValueError(f"{path}: expected 'layer v1' header")
    z = float(lines[0][2])
    nv, nf = int(lines[0][3]), int(lines[0][4])
    vlines = lines[1:1 + nv]
    has_scalar = len(vlines[0]) == 4 if vlines else False
    vertices = np.array([[float(p[1]), float(p[2])] for p in vlines])
    scalar = np.array([float(p[3]) for p in vlines]) if has_scalar else None
    triangles = np.array([[int(p[1]), int(p[2]), int(p[3])] for p in lines[1 + nv:1 + nv + nf]],
                         dtype=np.int64)
    return z, vertices, triangles, scalar


def _svg_path_data(points, closed):
    cmds = [f"M {points[0, 0]:.6f} {-points[0, 1]:.6f}"]
    cmds += [f"L {x:.6f} {-y:.6f}" for x, y in points[1:]]
    if closed:
        cmds.append("Z")
    return " ".join(cmds)


def _heat_color(t):
    t = min(1.0, max(0.0, t))
    r = int(255 * t)
    b = int(255 * (1.0 - t))
    g = int(96 * (1.0 - abs(2 * t - 1.0)))
    return f"#{r:02x}{g:02x}{b:02x}"


def write_svg(layer, paths, path, scalar=None):
    """Render one layer to SVG: outline, optional field heat map, curves.

    One SVG user unit is one millimetre (the y-axis is flipped so the layer
    appears in conventional orientation). Curves are colored by kind;
    connector spans inside merged paths are overdrawn in the connector color.
    """
    pts = layer.vertices
    pad = 1.0
    x0, y0 = pts.min(axis=0) - pad
    x1, y1 = pts.max(axis=0) + pad
    w, h = x1 - x0, y1 - y0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3f}mm" height="{h:.3f}mm" '
        f'viewBox="{x0:.6f} {-y1:.6f} {w:.6f} {h:.6f}">'
    ]
    if scalar is not None:
        s = np.asarray(scalar, dtype=float)
        lo, hi = float(s.min()), float(s.max())
        rng = hi - lo if hi > lo else 1.0
        parts.append('<g stroke="none">')
        for tri in layer.triangles:
            t = (float(s[tri].mean()) - lo) / rng
            p = pts[tri]
            d = (f"M {p[0, 0]:.6f} {-p[0, 1]:.6f} L {p[1, 0]:.6f} {-p[1, 1]:.6f} "
                 f"L {p[2, 0]:.6f} {-p[2, 1]:.6f} Z")
            parts.append(f'<path d="{d}" fill="{_heat_color(t)}"/>')
        parts.append("</g>")
    for loop in boundary_loops(layer):
        parts.append(
            f'<path d="{_svg_path_data(pts[loop], True)}" fill="none" '
            f'stroke="#222222" stroke-width="0.12"/>'
        )
    for p in paths:
        color = SVG_COLORS.get(p.kind, "#000000")
        parts.append(
            f'<path d="{_svg_path_data(p.points, p.closed)}" fill="none" '
            f'stroke="{color}" stroke-width="0.25" stroke-linejoin="round"/>'
        )
        for a, b in p.connector_spans:
            seg = p.points[a:b + 1] if b < p.num_points else np.vstack([p.points[a:], p.points[:1]])
            if len(seg) >= 2:
                parts.append(
                    f'<path d="{_svg_path_data(seg, False)}" fill="none" '
                    f'stroke="{SVG_COLORS["connector"]}" stroke-width="0.3"/>'
                )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
