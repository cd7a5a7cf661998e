"""Command-line entry point: silstruct <subcommand>.

Subcommands cover the pipeline end to end: gen-library, render,
sketch, deconstruct, evaluate, and sweep.  Exit codes are part of the
contract: 0 success, 2 usage or config problems, 3 mutually
inconsistent data files, 4 solver iteration limit (with a partial
summary written).  One --seed flag feeds every stage through the
key-derivation scheme in ``seeding``; all outputs except the run
summary JSON (which carries wall-clock timings) are byte-identical
across reruns with identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from time import perf_counter

import numpy as np

from . import geometry
from .camera import load_rig, save_rig  # noqa: F401 - save_rig re-exported for scripts
from .errors import (
    DimensionMismatchError,
    DuplicateTemplateIdError,
    EmptyFeasibleSetError,
    EmptyLibraryError,
    FormatError,
    PointAtInfinityError,
    UnknownTemplateIdError,
)
from .harness import (
    ExperimentConfig,
    emit_figures,
    false_positive_rate,
    fpe,
    recovery_fraction,
    run_sweep,
)
from .rasterizer import add_salt_pepper, load_measurement, render_scene, save_measurement
from .rounding import SearchConfig, round_max, round_search
from .seeding import derive_seed
from .simplex import ITERATION_LIMIT
from .sketch import build_sketch, save_basis, save_sketch, sketch_basis
from .solver import deconstruct as solve_deconstruction

_DATA_ERRORS = (
    FormatError,
    DimensionMismatchError,
    UnknownTemplateIdError,
    DuplicateTemplateIdError,
    PointAtInfinityError,
    EmptyFeasibleSetError,
)
_USAGE_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, EmptyLibraryError)


def _parse_bounds(text: str) -> geometry.Box:
    parts = text.split(",")
    if len(parts) != 6:
        raise ValueError(f"--bounds wants x0,y0,z0,x1,y1,z1, got {text!r}")
    values = [float(p) for p in parts]
    return geometry.Box(tuple(values[:3]), tuple(values[3:]))


def _load_shapes(path: Path) -> list[geometry.PrimitiveShape]:
    """Parse the SHAPES file: one BOX/WEDGE/ARCH/LEAF line per shape."""
    lines = path.read_text(encoding="ascii").splitlines()
    shapes: list[geometry.PrimitiveShape] = []
    if not lines or lines[0].split() != ["SHAPES", "1"]:
        raise FormatError(f"{path}: expected 'SHAPES 1' header")
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind, name, args = fields[0].upper(), fields[1] if len(fields) > 1 else "", fields[2:]
        try:
            if kind == "BOX" and len(args) in (3, 4):
                symmetry = int(args[3]) if len(args) == 4 else None
                shapes.append(
                    geometry.box_shape(name, float(args[0]), float(args[1]), float(args[2]), symmetry=symmetry)
                )
            elif kind == "WEDGE" and len(args) == 3:
                shapes.append(geometry.wedge_shape(name, float(args[0]), float(args[1]), float(args[2])))
            elif kind == "ARCH" and len(args) == 2:
                shapes.append(geometry.arch_shape(name, span=float(args[0]), height=float(args[1])))
            elif kind == "LEAF" and len(args) == 12:
                quad = np.array([float(v) for v in args]).reshape(4, 3)
                shapes.append(geometry.leaf_quad(name, quad))
            else:
                raise FormatError(f"{path}:{lineno}: unrecognized shape line {raw!r}")
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return shapes


def _cmd_gen_library(args) -> int:
    shapes = _load_shapes(Path(args.shapes))
    if not shapes:
        print("gen-library: shapes file defines no shapes", file=sys.stderr)
        return 2
    library = geometry.enumerate_library(shapes, _parse_bounds(args.bounds), args.pitch, args.layers)
    geometry.save_library(library, args.out)
    print(f"wrote {len(library.templates)} templates to {args.out}")
    return 0


def _cmd_render(args) -> int:
    library = geometry.load_library(args.library)
    rig = load_rig(args.cams)
    scene = geometry.compose_scene(geometry.load_scene(args.scene), library)
    measurement = render_scene(scene, rig)
    if args.noise > 0:
        measurement = add_salt_pepper(measurement, args.noise, derive_seed(args.seed, "noise"))
    save_measurement(measurement, args.out)
    print(f"wrote {measurement.count()} foreground bits over {rig.n_views} views to {args.out}")
    return 0


def _cmd_sketch(args) -> int:
    rig = load_rig(args.cams)
    phi = build_sketch(args.d, rig.n_bits, args.k, derive_seed(args.seed, "sketch"))
    save_sketch(phi, args.out)
    print(f"wrote {phi.n_rows}x{phi.n_cols} sketch to {args.out}")
    if args.basis_out:
        if not args.library:
            print("sketch: --basis-out requires --library", file=sys.stderr)
            return 2
        library = geometry.load_library(args.library)
        basis = sketch_basis(phi, library, rig)
        save_basis(basis, args.basis_out, phi)
        print(f"wrote {basis.entries.shape[1]}-column sketched basis to {args.basis_out}")
    return 0


def _search_config(args) -> SearchConfig:
    return SearchConfig(
        alpha_threshold=args.alpha_threshold,
        min_parts=args.min_parts,
        max_parts=args.max_parts,
        max_candidates=args.max_candidates,
        lambda_search=args.lambda_search,
        cardinality_reward=args.cardinality_reward,
    )


def _cmd_deconstruct(args) -> int:
    library = geometry.load_library(args.library)
    rig = load_rig(args.cams)
    target = load_measurement(args.target)
    if target.n_bits != rig.n_bits:
        raise DimensionMismatchError(
            f"target has {target.n_bits} bits, cameras expect {rig.n_bits}"
        )

    timings = {}
    t0 = perf_counter()
    phi = build_sketch(args.d, rig.n_bits, args.k, derive_seed(args.seed, "sketch"))
    timings["sketch"] = perf_counter() - t0

    t0 = perf_counter()
    solution, cull = solve_deconstruction(
        target,
        library,
        rig,
        phi,
        lam=args.lam,
        cull_threshold=args.cull_threshold,
        max_iters=args.max_iters,
    )
    timings["lp"] = perf_counter() - t0

    summary = {
        "schema_version": 1,
        "n_templates": len(library.templates),
        "n_retained": cull.n_retained,
        "n_dropped": cull.n_dropped,
        "lp_status": solution.status,
        "lp_iterations": solution.iterations,
        "lp_objective": solution.objective,
        "nnz_alpha": int(np.count_nonzero(solution.alpha > 1e-3)),
        "method": args.method,
    }
    summary_path = Path(args.out).with_name(Path(args.out).name + ".json")
    if solution.status == ITERATION_LIMIT:
        summary["status"] = "iteration_limit"
        summary["timings"] = timings
        _write_json(summary_path, summary)
        print(f"deconstruct: LP hit the iteration limit; partial summary at {summary_path}", file=sys.stderr)
        return 4

    t0 = perf_counter()
    if args.method == "search":
        estimate = round_search(solution, _search_config(args), target, library, rig)
    else:
        n = args.n_parts if args.n_parts is not None else args.max_parts
        estimate = round_max(solution, n, target, library, rig, args.lambda_search)
    timings["round"] = perf_counter() - t0

    comments = {
        "error_bits": estimate.error,
        "score": estimate.score,
        "method": args.method,
        "lambda": args.lam,
        "D": args.d,
        "k": args.k,
        "seed": args.seed,
        "cull_threshold": args.cull_threshold,
    }
    geometry.save_scene(estimate.template_ids, args.out, comments=comments)
    summary.update(
        {
            "status": "ok",
            "selected_ids": list(estimate.template_ids),
            "n_selected": len(estimate.template_ids),
            "error_bits": estimate.error,
            "score": estimate.score,
            "timings": timings,
        }
    )
    _write_json(summary_path, summary)
    print(
        f"selected {len(estimate.template_ids)} templates, error {estimate.error} bits; "
        f"estimate at {args.out}, summary at {summary_path}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    library = geometry.load_library(args.library)
    rig = load_rig(args.cams)
    target = load_measurement(args.target)
    estimate_ids = geometry.load_scene(args.estimate)
    rendered = render_scene(geometry.compose_scene(estimate_ids, library), rig)
    report = {
        "schema_version": 1,
        "n_parts": len(estimate_ids),
        "error_bits": int(
            np.bitwise_count(np.bitwise_xor(rendered.packed, target.packed)).sum()
        ),
        "fpe": fpe(rendered, target),
        "false_positive": false_positive_rate(rendered, target),
    }
    if args.truth:
        report["recovery_fraction"] = recovery_fraction(
            estimate_ids, geometry.load_scene(args.truth)
        )
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args) -> int:
    try:
        document = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        print(f"sweep: config is not valid JSON: {exc}", file=sys.stderr)
        return 2
    if isinstance(document, list):
        defaults, cells = {}, document
    elif isinstance(document, dict):
        defaults = document.get("defaults", {})
        cells = document.get("cells", [])
    else:
        print("sweep: config must be a JSON object or list", file=sys.stderr)
        return 2
    if not cells:
        print("sweep: config defines no cells", file=sys.stderr)
        return 2
    try:
        configs = [ExperimentConfig.from_dict({**defaults, **cell}) for cell in cells]
    except (ValueError, TypeError) as exc:
        print(f"sweep: bad config: {exc}", file=sys.stderr)
        return 2
    report = run_sweep(configs, threads=args.threads)
    report.write_csv(args.out)
    failed = sum(1 for r in report.rows if r["status"] != "ok")
    print(f"wrote {len(report.rows)} trial rows ({failed} failed) over {len(configs)} cells to {args.out}")
    if args.emit_figures:
        written = emit_figures(report, args.emit_figures)
        print(f"figure data: {', '.join(written) if written else '(none)'} in {args.emit_figures}")
    return 0


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="ascii")


def _add_deconstruct_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=1e-2, help="sparsity weight in the LP objective")
    parser.add_argument("--D", dest="d", type=int, default=441, help="sketch row count")
    parser.add_argument("--k", type=float, default=1e-2, help="sketch row density (fraction of S per row)")
    parser.add_argument("--seed", type=int, default=0, help="master seed; stage seeds are derived from it")
    parser.add_argument("--method", choices=("search", "max"), default="search", help="rounding method")
    parser.add_argument("--cull-threshold", type=float, default=0.05, help="drop templates whose silhouette exceeds this fraction outside the target")
    parser.add_argument("--alpha-threshold", type=float, default=1e-2, help="feasible-set cutoff on LP coefficients (search)")
    parser.add_argument("--min-parts", type=int, default=1, help="smallest subset size searched")
    parser.add_argument("--max-parts", type=int, default=20, help="largest subset size searched")
    parser.add_argument("--max-candidates", type=int, default=5000, help="candidate subset budget (search)")
    parser.add_argument("--lambda-search", type=float, default=1e-2, help="per-part penalty in the rounding score")
    parser.add_argument("--cardinality-reward", action="store_true", help="reward extra parts instead of penalizing them")
    parser.add_argument("--n-parts", type=int, default=None, help="subset size for --method max (default --max-parts)")
    parser.add_argument("--max-iters", type=int, default=50000, help="LP pivot budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="silstruct",
        description="Recover part-level structure from multi-view binary silhouettes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-library", help="enumerate a posed template library onto a grid")
    p.add_argument("--shapes", required=True, help="SHAPES file listing the primitive shapes")
    p.add_argument("--bounds", required=True, help="workspace box as x0,y0,z0,x1,y1,z1")
    p.add_argument("--pitch", type=float, required=True, help="horizontal grid spacing")
    p.add_argument("--layers", type=int, required=True, help="number of vertical layers")
    p.add_argument("--out", required=True, help="output TLIB path")
    p.set_defaults(func=_cmd_gen_library)

    p = sub.add_parser("render", help="render a scene to a multi-view measurement")
    p.add_argument("--library", required=True, help="TLIB file")
    p.add_argument("--cams", required=True, help="CAMS file")
    p.add_argument("--scene", required=True, help="SCENE file naming template ids")
    p.add_argument("--noise", type=float, default=0.0, help="salt-and-pepper fraction to apply")
    p.add_argument("--seed", type=int, default=0, help="master seed for the noise stage")
    p.add_argument("--out", required=True, help="output measurement manifest path")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("sketch", help="build (and optionally apply) a sparse projection")
    p.add_argument("--cams", required=True, help="CAMS file fixing the measurement length")
    p.add_argument("--D", dest="d", type=int, required=True, help="sketch row count")
    p.add_argument("--k", type=float, required=True, help="row density")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="output SKETCH path")
    p.add_argument("--library", help="TLIB file to project into a basis")
    p.add_argument("--basis-out", help="output basis path (requires --library)")
    p.set_defaults(func=_cmd_sketch)

    p = sub.add_parser("deconstruct", help="recover a template subset explaining a measurement")
    p.add_argument("--library", required=True, help="TLIB file")
    p.add_argument("--cams", required=True, help="CAMS file")
    p.add_argument("--target", required=True, help="measurement manifest to explain")
    p.add_argument("--out", required=True, help="output SCENE estimate path (summary at <out>.json)")
    _add_deconstruct_flags(p)
    p.set_defaults(func=_cmd_deconstruct)

    p = sub.add_parser("evaluate", help="score an estimate scene against a target measurement")
    p.add_argument("--library", required=True, help="TLIB file")
    p.add_argument("--cams", required=True, help="CAMS file")
    p.add_argument("--estimate", required=True, help="SCENE file to score")
    p.add_argument("--target", required=True, help="measurement manifest scored against")
    p.add_argument("--truth", help="optional ground-truth SCENE for recovery fraction")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="run an experiment grid to a CSV report")
    p.add_argument("--config", required=True, help="JSON config: {defaults, cells} or a list of cells")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=int, default=1, help="worker cap; results are order-independent")
    p.add_argument("--emit-figures", metavar="DIR", help="also write per-figure x,y data files")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"silstruct {args.command}: {exc}", file=sys.stderr)
        return 3
    except _USAGE_ERRORS as exc:
        print(f"silstruct {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"silstruct {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
