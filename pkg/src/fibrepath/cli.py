"""Command-line interface.

Subcommands mirror the pipeline stages for stage-isolated debugging:

* ``pipeline`` -- full run from a config file.
* ``synth``    -- generate a synthetic test solid (mesh + stress + config).
* ``field``    -- stop after the scalar-field fit and dump it per layer.
* ``paths``    -- stop after isocurve extraction (no connection/filtering).
"""

import argparse
import logging
import sys
from pathlib import Path

from .mesh_io import save_stress_field, save_tet_mesh
from .pipeline import PipelineConfig, load_config, run_pipeline, save_config
from .synthetic import build_test_solid

logger = logging.getLogger(__name__)

_SYNTH_DEFAULTS = {
    "box": {"dims": (10.0, 10.0, 12.0), "edge": 0.8},
    "plate_hole": {"dims": (20.0, 20.0, 1.5), "edge": 0.5, "hole_radius": 2.0},
    "cantilever": {"dims": (60.0, 10.0, 6.0), "edge": 1.0, "load": 100.0},
}


def _parse_layer_range(text):
    try:
        a, b = text.split("..")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b', got {text!r}") from None


def _add_run_args(sub):
    sub.add_argument("--config", required=True, help="flat key = value config file")
    sub.add_argument("--out", default=None, help="output directory (overrides config)")
    sub.add_argument("--layers", type=_parse_layer_range, default=None,
                     help="inclusive layer index range a..b")
    sub.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="fibrepath",
                                     description="stress-oriented fibre toolpath generation")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, doc in (("pipeline", "run the full pipeline"),
                      ("field", "stop after the scalar-field fit"),
                      ("paths", "stop after isocurve extraction")):
        sub = subs.add_parser(name, help=doc)
        _add_run_args(sub)

    synth = subs.add_parser("synth", help="generate a synthetic test case")
    synth.add_argument("--kind", choices=sorted(_SYNTH_DEFAULTS), required=True)
    synth.add_argument("--out", required=True, help="directory for mesh/stress/config files")
    synth.add_argument("--dims", type=float, nargs=3, default=None,
                       metavar=("DX", "DY", "DZ"))
    synth.add_argument("--edge", type=float, default=None, help="target tet edge length (mm)")
    synth.add_argument("--far-stress", type=float, default=1.0, help="far-field stress (MPa)")
    synth.add_argument("--hole-radius", type=float, default=None)
    synth.add_argument("--load", type=float, default=None, help="cantilever tip load (N)")
    synth.add_argument("--verbose", action="store_true")
    return parser


def _cmd_synth(args):
    defaults = _SYNTH_DEFAULTS[args.kind]
    dims = tuple(args.dims) if args.dims else defaults["dims"]
    edge = args.edge if args.edge is not None else defaults["edge"]
    hole = args.hole_radius if args.hole_radius is not None else defaults.get("hole_radius")
    load = args.load if args.load is not None else defaults.get("load")

    mesh, tensors = build_test_solid(args.kind, dims, edge, far_stress=args.far_stress,
                                     hole_radius=hole, load=load)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_tet_mesh(mesh, out / "mesh.txt")
    save_stress_field(tensors, out / "stress.txt")
    cfg = PipelineConfig(mesh=str(out / "mesh.txt"), stress=str(out / "stress.txt"),
                         out_dir=str(out / "run"))
    save_config(cfg, out / "config.txt")
    print(f"{args.kind}: {mesh.num_vertices} vertices, {mesh.num_tets} tets -> {out}")
    return 0


def _cmd_run(args, stop_after):
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    report, _ = run_pipeline(cfg, layers=args.layers, stop_after=stop_after)
    for s in report.layers:
        gap = "-" if not s.min_spacing or s.min_spacing == float("inf") else f"{s.min_spacing:.3f}"
        print(f"layer {s.layer:3d} z={s.z:8.3f}  faces={s.face_count:5d} "
              f"curves={s.curve_count:3d} gap={gap} fibre={s.fibre_length:9.1f} mm")
    print(f"total fibre {report.total_fibre_length():.1f} mm in {report.total_seconds:.2f} s "
          f"-> {cfg.out_dir}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        return _cmd_synth(args)
    stop = {"pipeline": None, "field": "field", "paths": "paths"}[args.command]
    return _cmd_run(args, stop)


if __name__ == "__main__":
    sys.exit(main())
