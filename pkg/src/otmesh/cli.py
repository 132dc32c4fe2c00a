"""Command-line driver.

Subcommands:

- ``gen-base``: build a base mesh and export it as VTK.
- ``adapt``: full adaptation run (base mesh, monitor, solver, reports).
- ``diagnose``: recompute reports from an exported base + adapted mesh pair.
- ``repro``: canned cases (ring, bell, x2..x16, precip) with standard sizes.

Options may also come from a config file of ``key = value`` lines (keys are
the long option names with underscores); explicit command-line flags win.
Exit codes: 0 success, 2 solver finished without converging (reports are
still written), 1 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .base_meshes import HexIcosahedron, SquareGrid, build_base_mesh
from .diagnostics import build_quality_report
from .errors import OTMeshError
from .ma_solver import SolverConfig, equidistribution_constant, run
from .monitor import evaluate_monitor, load_gridded_monitor, named_monitor
from .voronoi_post import convexity_scan, voronoi_of_cell_centres

logger = logging.getLogger(__name__)

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_NOT_CONVERGED = 2

_CONFIG_COERCE = {
    "size": int,
    "bisections": int,
    "radius": float,
    "max_iterations": int,
    "stop_residual": float,
    "p_min": float,
    "smoothing": lambda s: s.lower() in ("1", "true", "yes", "on"),
}


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--hessian", choices=["auto", "fd", "geometric"],
                   default="auto", help="Hessian term: finite-difference "
                   "(plane only) or cell-volume ratio")
    p.add_argument("--vgrad", choices=["auto", "small", "goldilocks", "large"],
                   default="auto", help="vertex-gradient stencil")
    p.add_argument("--max-iterations", type=int, default=2000)
    p.add_argument("--stop-residual", type=float, default=1e-8)
    p.add_argument("--no-smoothing", dest="smoothing", action="store_false",
                   help="disable monitor smoothing for gridded monitors")


def _add_monitor_flags(p: argparse.ArgumentParser):
    p.add_argument("--monitor",
                   choices=["ring", "bell", "x2", "x4", "x8", "x16", "gridded"],
                   help="monitor preset, or 'gridded' with --gridded-file")
    p.add_argument("--gridded-file", type=Path,
                   help="lat-lon text file for the gridded monitor")
    p.add_argument("--p-min", type=float, default=1e-5,
                   help="gridded monitor floor parameter")


def _add_base_flags(p: argparse.ArgumentParser):
    p.add_argument("--geometry", choices=["plane", "sphere"])
    p.add_argument("--size", type=int, default=60,
                   help="square-grid cells per side (plane)")
    p.add_argument("--bisections", type=int, default=4,
                   help="icosahedron bisection count (sphere)")
    p.add_argument("--radius", type=float, default=1.0, help="sphere radius")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit 1 (2 means NotConverged)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(_EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path,
                        help="key = value file supplying option defaults")
    common.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    parser = _Parser(
        prog="otmesh",
        parents=[common],
        description="Monitor-equidistributed mesh generation by optimal "
                    "transport on the periodic plane and the sphere.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    g = add_parser("gen-base", help="build and export a base mesh")
    _add_base_flags(g)
    g.add_argument("--out", type=Path, required=True, help="output directory")

    a = add_parser("adapt", help="adapt a base mesh to a monitor")
    _add_base_flags(a)
    _add_monitor_flags(a)
    _add_solver_flags(a)
    a.add_argument("--post", choices=["none", "voronoi"], default="none",
                   help="post-process the result with a Voronoi re-tessellation")
    a.add_argument("--out", type=Path, required=True, help="output directory")

    d = add_parser("diagnose",
                       help="recompute reports for an exported mesh pair")
    d.add_argument("--base", type=Path, required=True, help="base mesh VTK")
    d.add_argument("--adapted", type=Path, required=True,
                   help="adapted mesh VTK sharing the base topology")
    _add_monitor_flags(d)
    d.add_argument("--out", type=Path, required=True, help="output directory")

    r = add_parser("repro", help="run a canned case at its standard size")
    r.add_argument("--case", required=True,
                   choices=["ring", "bell", "x2", "x4", "x8", "x16", "precip"])
    r.add_argument("--n", type=int,
                   help="sphere bisection count 3..6 (default 4)")
    r.add_argument("--size", type=int, default=60,
                   help="plane cells per side (ring/bell)")
    r.add_argument("--gridded-file", type=Path,
                   help="precipitation-style lat-lon file (precip case)")
    r.add_argument("--p-min", type=float, default=1e-5)
    _add_solver_flags(r)
    r.add_argument("--post", choices=["none", "voronoi"], default="none")
    r.add_argument("--out", type=Path, default=Path("otmesh-out"))

    parser.subcommand_parsers = {"gen-base": g, "adapt": a,
                                 "diagnose": d, "repro": r}
    return parser


def parse_config_file(path: Path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OTMeshError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise OTMeshError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = _CONFIG_COERCE.get(key, str)(value)
    return values


def _known_dests(parser: argparse.ArgumentParser) -> set:
    dests = set()
    for action in parser._actions:  # noqa: SLF001 - argparse has no public walk
        if isinstance(action, argparse._SubParsersAction):
            for p in action.choices.values():
                dests |= _known_dests(p)
        else:
            dests.add(action.dest)
    return dests


def _resolve_monitor(args, geometry_kind: str):
    name = getattr(args, "monitor", None)
    if name is None:
        name = "ring" if geometry_kind == "plane" else "x4"
        logger.info("no monitor given; defaulting to %s", name)
    if name == "gridded":
        if args.gridded_file is None:
            raise OTMeshError("--monitor gridded requires --gridded-file")
        return load_gridded_monitor(args.gridded_file, p_min=args.p_min)
    return named_monitor(name)


def _build_base(args):
    geometry = args.geometry
    if geometry is None:
        raise OTMeshError("--geometry plane|sphere is required")
    if geometry == "plane":
        return build_base_mesh(SquareGrid(args.size))
    return build_base_mesh(HexIcosahedron(args.bisections, args.radius))


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        hessian_mode=args.hessian,
        vertex_gradient=args.vgrad,
        max_fixed_point_iterations=args.max_iterations,
        fixed_point_stop_residual=args.stop_residual,
        smoothing=getattr(args, "smoothing", True),
    )


def _write_summary(path: Path, entries: dict) -> None:
    lines = [f"{k} = {v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def _adapt_outputs(outdir: Path, mesh, monitor, state, report, post: str) -> dict:
    """Write every artefact of an adaptation run; returns summary entries."""
    outdir.mkdir(parents=True, exist_ok=True)
    transported = state.transported
    quality = build_quality_report(transported, monitor, state.c, mesh.kind)
    m_cell = evaluate_monitor(monitor, transported.cell_centroid, mesh.geometry)
    r = transported.cell_volume / mesh.cell_volume
    nonorth_cell = np.zeros(mesh.n_cells)
    np.maximum.at(nonorth_cell, mesh.face_owner, quality.nonorthogonality_deg)
    np.maximum.at(nonorth_cell, mesh.face_neighbour, quality.nonorthogonality_deg)

    io.write_vtk(outdir / "base.vtk", mesh, role="base")
    io.write_vtk(outdir / "adapted.vtk", transported, {
        "r": r,
        "area_ratio": quality.equidistribution,
        "monitor": m_cell,
        "phi": state.phi.values,
        "nonorthogonality_deg": nonorth_cell,
    }, role="adapted")
    io.export_csv_reports(outdir, transported, quality, state)

    summary = {
        "converged": report.converged,
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "reason": report.reason,
        "runtime_seconds": round(report.runtime_seconds, 3),
        "c": state.c,
        "one_plus_alpha": state.one_plus_alpha,
        "min_r": float(r.min()),
        "max_r": float(r.max()),
        "cells": mesh.n_cells,
        "faces": mesh.n_faces,
    }
    summary.update(quality.summary())
    summary["nonconvex_count"] = len(convexity_scan(transported))

    if post == "voronoi":
        result = voronoi_of_cell_centres(transported)
        io.write_vtk(outdir / "voronoi.vtk", result.mesh, {
            "area_change": result.area_change,
        }, role="voronoi")
        summary["voronoi_connectivity_changed"] = result.connectivity_changed
        summary["voronoi_max_area_change"] = float(result.area_change.max())
        summary["voronoi_nonconvex_count"] = len(convexity_scan(result.mesh))
    _write_summary(outdir / "summary.txt", summary)
    return summary


def _cmd_gen_base(args) -> int:
    mesh = _build_base(args)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_vtk(args.out / "base.vtk", mesh, role="base")
    quality = build_quality_report(mesh)
    io.export_csv_reports(args.out, mesh, quality)
    _write_summary(args.out / "summary.txt", {
        "cells": mesh.n_cells,
        "faces": mesh.n_faces,
        "vertices": mesh.n_vertices,
        **quality.summary(),
    })
    return _EXIT_OK


def _cmd_adapt(args) -> int:
    mesh = _build_base(args)
    monitor = _resolve_monitor(args, mesh.geometry.kind)
    config = _solver_config(args)
    state, report = run(mesh, monitor, config)
    _adapt_outputs(args.out, mesh, monitor, state, report, args.post)
    return _EXIT_OK if report.converged else _EXIT_NOT_CONVERGED


def _cmd_diagnose(args) -> int:
    base = io.mesh_from_vtk(args.base)
    transported = io.transported_from_vtk(args.adapted, base)
    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    monitor = None
    if args.monitor is not None:
        monitor = _resolve_monitor(args, base.geometry.kind)
    c = None
    if monitor is not None:
        m = evaluate_monitor(monitor, transported.cell_centroid, base.geometry)
        c = equidistribution_constant(
            transported.cell_volume / base.cell_volume, m, base.cell_volume)
    quality = build_quality_report(transported, monitor, c, base.kind)
    io.export_csv_reports(outdir, transported, quality)
    summary = {"cells": base.n_cells, "faces": base.n_faces}
    if c is not None:
        summary["c"] = c
    summary.update(quality.summary())
    summary["nonconvex_count"] = len(convexity_scan(transported))
    _write_summary(outdir / "summary.txt", summary)
    return _EXIT_OK


_REPRO_PLANE = {"ring", "bell"}


def _cmd_repro(args) -> int:
    case = args.case
    if case in _REPRO_PLANE:
        args.geometry = "plane"
        args.monitor = case
    elif case == "precip":
        if args.gridded_file is None:
            raise OTMeshError("the precip case needs --gridded-file "
                              "(a lat-lon precipitation-like field)")
        args.geometry = "sphere"
        args.monitor = "gridded"
    else:
        args.geometry = "sphere"
        args.monitor = case
    n = args.n if args.n is not None else 4
    if case not in _REPRO_PLANE and not 3 <= n <= 6:
        raise OTMeshError(f"--n must be in 3..6, got {n}")
    args.bisections = n
    args.radius = 1.0
    return _cmd_adapt(args)


_COMMANDS = {
    "gen-base": _cmd_gen_base,
    "adapt": _cmd_adapt,
    "diagnose": _cmd_diagnose,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config is not None:
            overrides = parse_config_file(known.config)
            unknown = set(overrides) - _known_dests(parser)
            if unknown:
                raise OTMeshError(
                    f"unknown config keys: {', '.join(sorted(unknown))}")
            # subcommands parse into a fresh namespace, so the defaults must
            # be planted on each subparser, not just the root
            for p in (parser, *parser.subcommand_parsers.values()):
                p.set_defaults(**overrides)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=getattr(logging, args.log_level.upper()),
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s")
        return _COMMANDS[args.command](args)
    except OTMeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_ERROR
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
