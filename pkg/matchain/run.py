#!/usr/bin/env python3
"""
MATCHAIN — CLI ENTRY POINT
==========================

Usage:
    # Quarter-wave heuristic on bare/coated tungsten at 450 nm:
    python3 matchain/run.py thinfilm heuristic --substrate Tungsten --lambda 450 --layers 2

    # Global optimum for 3 layers, stop once R >= 0.995:
    python3 matchain/run.py thinfilm solve --substrate Tungsten --lambda 450 --layers 3 \\
        --target 0.995 --out stack.csv

    # Antibiotics time machine from growth data:
    python3 matchain/run.py atm solve --growth growth.csv --model cpm --initial 0001 --steps 3

    # Same on a synthetic instance, exhaustively:
    python3 matchain/run.py atm enumerate --alleles 4 --drugs 5 --seed 42 --initial 1111 --steps 5

Reports go to stdout as JSON; logs go to stderr.
Exit codes: 0 success, 1 data/runtime error, 2 usage error, 3 solver limit reached.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Ensure the project root is importable when run as a script
_PARENT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if _PARENT_DIR not in sys.path:
    sys.path.insert(0, _PARENT_DIR)

# Load .env from the project root before config reads the environment
from dotenv import load_dotenv
load_dotenv(os.path.join(_PARENT_DIR, ".env"))

from matchain.config import DEFAULT_ENUM_BUDGET, DEFAULT_THREADS
from matchain.data_parser import library_at, parse_growth_csv, parse_refractive_csv, write_growth_csv
from matchain.disjunctive_milp import BBOptions, SolveReport, build_extended_formulation
from matchain.errors import MatchainError
from matchain.formulation_export import export_formulation
from matchain.optics import MaterialLibrary, bare_reflectance, quarter_wave_heuristic
from matchain.output_writer import render_report, write_matrices, write_table
from matchain.thinfilm import ThinFilmOptions, build_thinfilm_formulation, solve_thinfilm
from matchain.timemachine import (
    GrowthTable,
    atm_problem,
    build_model,
    gen_synthetic,
    solve_atm,
)

logger = logging.getLogger("matchain")

DEFAULT_DATA = os.path.join(_PARENT_DIR, "data", "refractive_index.csv")
EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3
LIMIT_STATUSES = ("node_limit", "time_limit", "gap_limit")

SCHEMA_HELP = """
Input schemas (see data/README.md):
  refractive-index CSV : material_name, wavelength_nm, n_real, n_imag[, role]
                         one substrate row (n_imag may be nonzero) + coating rows per wavelength
  growth CSV           : drug_name, genotype, growth_rate
                         genotype = 0/1 string, leftmost character is bit 0; complete drug x genotype grid
  formulation JSON     : {format, version, kind, metadata, variables, linear_constraints,
                          bilinear_constraints, objective}
"""


class _SchemaArgumentParser(argparse.ArgumentParser):
    """Argument parser that prints the input schemas on usage errors."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"❌ {self.prog}: {message}\n{SCHEMA_HELP}")
        self.exit(EXIT_USAGE)


class _UsageError(Exception):
    pass


def _emit(payload: Dict[str, Any], args: argparse.Namespace) -> None:
    print(render_report(payload, timestamp=not args.no_timestamp))


def _report_payload(report: SolveReport, args: argparse.Namespace) -> Dict[str, Any]:
    return report.to_dict(include_timing=not args.no_timestamp)


def _exit_for(report: SolveReport) -> int:
    return EXIT_LIMIT if report.status in LIMIT_STATUSES else EXIT_OK


# ───────────────────────────────────────────────────────────────
# thinfilm
# ───────────────────────────────────────────────────────────────

def _library(args: argparse.Namespace) -> MaterialLibrary:
    libraries = parse_refractive_csv(args.data, substrate=args.substrate)
    materials = [m.strip() for m in args.materials.split(",")] if args.materials else None
    return library_at(libraries, args.wavelength, materials)


def _cmd_thinfilm_heuristic(args: argparse.Namespace) -> int:
    lib = _library(args)
    design = quarter_wave_heuristic(lib, args.layers)
    payload = {
        "command": "thinfilm heuristic",
        "substrate": lib.substrate_name,
        "wavelength_nm": lib.wavelength,
        "layers": args.layers,
        "bare_reflectance": bare_reflectance(lib.substrate_index),
        "reflectance": design.reflectance,
        "table": [
            {"layers": n, "reflectance": quarter_wave_heuristic(lib, n).reflectance}
            for n in range(args.layers + 1)
        ],
        "design": design.to_dict(),
    }
    if args.out:
        payload["out"] = write_table(design.thickness_table(), args.out)
    _emit(payload, args)
    return EXIT_OK


def _cmd_thinfilm_solve(args: argparse.Namespace) -> int:
    lib = _library(args)
    opts = ThinFilmOptions(
        gap=args.gap,
        target=args.target,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        threads=args.threads,
        det_cut=not args.no_det_cut,
        symmetry_breaking=not args.no_symmetry_breaking,
    )
    report, design = solve_thinfilm(lib, args.layers, opts)
    payload = {"command": "thinfilm solve", **_report_payload(report, args), "design": design.to_dict()}
    if args.out:
        payload["out"] = write_table(design.thickness_table(), args.out)
    _emit(payload, args)
    return _exit_for(report)


def _cmd_thinfilm_export(args: argparse.Namespace) -> int:
    lib = _library(args)
    model = build_thinfilm_formulation(lib, args.layers, det_cut=not args.no_det_cut,
                                       symmetry_breaking=not args.no_symmetry_breaking)
    path = export_formulation(model, args.out, kind="miqcqp")
    _emit({
        "command": "thinfilm export", "out": path, "kind": "miqcqp",
        "variables": model.n_vars, "binaries": len(model.binary_indices),
        "linear_constraints": len(model.linear_constraints),
        "bilinear_constraints": len(model.quadratic_constraints),
    }, args)
    return EXIT_OK


# ───────────────────────────────────────────────────────────────
# atm
# ───────────────────────────────────────────────────────────────

def _growth(args: argparse.Namespace) -> GrowthTable:
    if args.growth:
        return parse_growth_csv(args.growth)
    if args.alleles is None or args.drugs is None:
        raise _UsageError("give --growth, or --alleles and --drugs (with --seed) for a synthetic instance")
    return gen_synthetic(args.alleles, args.drugs, args.seed)


def _cmd_atm_build(args: argparse.Namespace) -> int:
    growth = _growth(args)
    matrices = build_model(growth, args.model, args.mode)
    space = growth.space
    payload: Dict[str, Any] = {
        "command": "atm build", "model": args.model, "mode": args.mode,
        "alleles": space.g, "states": space.d, "drugs": growth.drugs,
        "absorbing_states": {
            drug: [space.label(j) for j in range(space.d) if T[j, j] == 1.0]
            for drug, T in zip(growth.drugs, matrices)
        },
        "empty_rows": {
            drug: [space.label(j) for j in range(space.d) if T[j].sum() == 0.0]
            for drug, T in zip(growth.drugs, matrices)
        },
    }
    if args.out:
        payload["out"] = write_matrices(matrices, growth.drugs, [space.label(j) for j in range(space.d)], args.out)
    _emit(payload, args)
    return EXIT_OK


def _atm_payload(command: str, growth: GrowthTable, args: argparse.Namespace, report: SolveReport) -> Dict[str, Any]:
    payload = {
        "command": command, "model": args.model, "mode": args.mode,
        "initial": args.initial, "target": args.target, "steps": args.steps,
        **_report_payload(report, args),
    }
    payload["sequence_indices"] = list(report.optimal_sequence)
    payload["optimal_sequence"] = [growth.drugs[k] for k in report.optimal_sequence]
    return payload


def _cmd_atm_solve(args: argparse.Namespace) -> int:
    growth = _growth(args)
    matrices = build_model(growth, args.model, args.mode)
    opts = BBOptions(gap=args.gap, bound_mode=args.bound, node_limit=args.node_limit,
                     time_limit=args.time_limit, threads=args.threads)
    report = solve_atm(matrices, args.initial, args.target, args.steps, opts, labels=growth.drugs)
    _emit(_atm_payload("atm solve", growth, args, report), args)
    return _exit_for(report)


def _cmd_atm_enumerate(args: argparse.Namespace) -> int:
    growth = _growth(args)
    matrices = build_model(growth, args.model, args.mode)
    report = solve_atm(matrices, args.initial, args.target, args.steps, method="enumerate",
                       labels=growth.drugs, budget=args.budget)
    _emit(_atm_payload("atm enumerate", growth, args, report), args)
    return EXIT_OK


def _cmd_atm_gen(args: argparse.Namespace) -> int:
    if args.alleles is None or args.drugs is None:
        raise _UsageError("atm gen needs --alleles and --drugs")
    growth = gen_synthetic(args.alleles, args.drugs, args.seed)
    path = write_growth_csv(growth, args.out)
    _emit({"command": "atm gen", "out": path, "alleles": growth.space.g, "drugs": growth.K,
           "seed": args.seed}, args)
    return EXIT_OK


def _cmd_atm_export(args: argparse.Namespace) -> int:
    growth = _growth(args)
    matrices = build_model(growth, args.model, args.mode)
    formulation = build_extended_formulation(atm_problem(matrices, args.initial, args.target, args.steps,
                                                         growth.drugs))
    path = export_formulation(formulation, args.out, kind="milp")
    model = formulation.model
    _emit({
        "command": "atm export", "out": path, "kind": "milp", "box_kind": formulation.box_kind,
        "variables": model.n_vars, "binaries": len(model.binary_indices),
        "linear_constraints": len(model.linear_constraints),
    }, args)
    return EXIT_OK


# ───────────────────────────────────────────────────────────────
# Parser
# ───────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    common.add_argument("--no-timestamp", action="store_true",
                        help="Omit timestamp and wall time so reports are byte-identical across runs")

    parser = _SchemaArgumentParser(
        prog="matchain",
        description="Optimization over products of matrices: thin-film coatings and antibiotic sequencing.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=SCHEMA_HELP + """
Examples:
  %(prog)s thinfilm heuristic --substrate Tungsten --lambda 450 --layers 2
  %(prog)s thinfilm solve --substrate Tantalum --lambda 600 --layers 3 --out stack.csv
  %(prog)s atm solve --growth growth.csv --model cpm --initial 0001 --steps 3
  %(prog)s atm gen --alleles 4 --drugs 15 --seed 42 --out synthetic.csv
        """,
    )
    domains = parser.add_subparsers(dest="domain", required=True)

    # thinfilm
    film = domains.add_parser("thinfilm", help="Multi-layer coating design")
    film_cmds = film.add_subparsers(dest="command", required=True)
    film_common = argparse.ArgumentParser(add_help=False)
    film_common.add_argument("--data", default=DEFAULT_DATA, help="Refractive-index CSV (default: bundled data)")
    film_common.add_argument("--substrate", required=True, help="Substrate material name, e.g. Tungsten")
    film_common.add_argument("--lambda", dest="wavelength", type=float, required=True,
                             help="Wavelength in nm (must appear in the data)")
    film_common.add_argument("--materials", default=None, help="Comma-separated subset of coatings")
    film_common.add_argument("--layers", type=int, required=True, help="Number of coating layers N")
    film_common.add_argument("--out", default=None, help="Output path (.csv/.xlsx table or .json formulation)")

    p = film_cmds.add_parser("heuristic", parents=[common, film_common], help="Quarter-wave stack")
    p.set_defaults(func=_cmd_thinfilm_heuristic)

    p = film_cmds.add_parser("solve", parents=[common, film_common], help="Global spatial branch-and-bound")
    p.add_argument("--gap", type=float, default=1e-3, help="Relative optimality gap (default: 0.001)")
    p.add_argument("--target", type=float, default=None, help="Stop once this reflectance is reached")
    p.add_argument("--time-limit", type=float, default=None, help="Seconds")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--threads", type=int, default=DEFAULT_THREADS,
                   help="Worker threads (default: MATCHAIN_THREADS or 1)")
    p.add_argument("--no-det-cut", action="store_true", help="Disable the det(w)=1 contraction")
    p.add_argument("--no-symmetry-breaking", action="store_true", help="Allow equal adjacent materials")
    p.set_defaults(func=_cmd_thinfilm_solve)

    p = film_cmds.add_parser("export", parents=[common, film_common], help="Write the bilinear formulation as JSON")
    p.add_argument("--no-det-cut", action="store_true")
    p.add_argument("--no-symmetry-breaking", action="store_true")
    p.set_defaults(func=_cmd_thinfilm_export)

    # atm
    atm = domains.add_parser("atm", help="Antibiotics time machine")
    atm_cmds = atm.add_subparsers(dest="command", required=True)
    atm_data = argparse.ArgumentParser(add_help=False)
    atm_data.add_argument("--growth", default=None, help="Growth-rate CSV")
    atm_data.add_argument("--alleles", type=int, default=None, help="Synthetic instance: allele count g")
    atm_data.add_argument("--drugs", type=int, default=None, help="Synthetic instance: drug count K")
    atm_data.add_argument("--seed", type=int, default=None, help="Synthetic instance: RNG seed")
    atm_data.add_argument("--model", choices=["cpm", "epm"], default="cpm")
    atm_data.add_argument("--mode", choices=["strict", "absorb"], default="strict",
                          help="Rows without a move: leave empty (strict) or self-loop (absorb)")
    atm_plan = argparse.ArgumentParser(add_help=False)
    atm_plan.add_argument("--initial", required=True, help="Initial genotype, e.g. 0001")
    atm_plan.add_argument("--target", default=None, help="Target genotype (default: wild type)")
    atm_plan.add_argument("--steps", type=int, required=True, help="Number of drugs N")

    p = atm_cmds.add_parser("build", parents=[common, atm_data], help="Build transition matrices")
    p.add_argument("--out", default=None, help="Directory for one CSV per drug")
    p.set_defaults(func=_cmd_atm_build)

    p = atm_cmds.add_parser("solve", parents=[common, atm_data, atm_plan], help="Branch-and-bound")
    p.add_argument("--gap", type=float, default=1e-3, help="Absolute optimality gap (default: 0.001)")
    p.add_argument("--bound", choices=["lp", "dp", "best"], default="best")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--threads", type=int, default=DEFAULT_THREADS)
    p.set_defaults(func=_cmd_atm_solve)

    p = atm_cmds.add_parser("enumerate", parents=[common, atm_data, atm_plan], help="Complete enumeration")
    p.add_argument("--budget", type=int, default=DEFAULT_ENUM_BUDGET, help="Refuse above this many sequences")
    p.set_defaults(func=_cmd_atm_enumerate)

    p = atm_cmds.add_parser("gen", parents=[common, atm_data], help="Write a synthetic growth CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_atm_gen)

    p = atm_cmds.add_parser("export", parents=[common, atm_data, atm_plan], help="Write the MILP as JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_atm_export)

    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.domain == "atm" and getattr(args, "initial", None) is not None and args.target is None:
        args.target = "0" * len(args.initial)

    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        print(SCHEMA_HELP, file=sys.stderr)
        return EXIT_USAGE
    except (MatchainError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
