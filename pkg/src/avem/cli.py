"""Command line driver for the benchmark problems.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .adapt import AdaptConfig, contraction_monitor, fem_mode, galerkin_loop
from .estimator import InvariantError, write_indicators_csv
from .io import (polygon_census, render_svg, write_mesh_json, write_records_csv,
                 write_records_jsonl)
from .kellogg import fan_integral
from .linsolve import SolverError
from .mesh import MeshError
from .problems import PROBLEMS, get_problem
from .refine import RefineError
from .vem import assemble, write_matrix_market

EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="avem", description="Adaptive lowest-order VEM on meshes with hanging nodes.")
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="lshape")
    p.add_argument("--theta", type=float, default=0.5, help="Doerfler parameter")
    p.add_argument("--lambda-max", type=int, default=10, help="admissibility threshold Lambda")
    p.add_argument("--gamma", type=float, default=1.0, help="stabilization parameter")
    p.add_argument("--nmax", type=int, default=None, help="stop once NDoFs >= NMAX")
    p.add_argument("--eps", type=float, default=None, help="stop once eta <= EPS")
    p.add_argument("--fem", action="store_true", help="conforming P1 FEM (Lambda = 0)")
    p.add_argument("--out-dir", type=Path, default=Path("avem_out"))
    p.add_argument("--svg", choices=["none", "final", "all"], default="none")
    p.add_argument("--zoom", type=float, default=None, metavar="W",
                   help="also draw the final mesh in the window (-W, W)^2")
    p.add_argument("--dump-mesh", action="store_true", help="write the final mesh as JSON")
    p.add_argument("--dump-indicators", action="store_true", help="per-iteration indicator CSV")
    p.add_argument("--dump-system", action="store_true", help="final system in Matrix Market format")
    p.add_argument("--audit", action="store_true", help="audit every refined mesh from scratch")
    p.add_argument("--seed-independent", action="store_true",
                   help="run twice and require byte-identical record files")
    p.add_argument("--cg-tol", type=float, default=1e-10)
    p.add_argument("-q", "--quiet", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _run_once(args, cfg, out: Path, tag: str = ""):
    prob = get_problem(args.problem)
    mesh = prob.make_mesh()
    stem = f"{args.problem}{'_fem' if args.fem else ''}{tag}"

    def on_iteration(rec, mesh, u, ind):
        if args.svg == "all":
            render_svg(mesh, out / f"{stem}_mesh_{rec.iter:03d}.svg")
        if args.dump_indicators:
            write_indicators_csv(ind, out / f"{stem}_indicators_{rec.iter:03d}.csv")

    res = galerkin_loop(mesh, cfg, prob.exact_u, prob.exact_grad, prob.grad_norm,
                        audit=args.audit, domain_area=prob.domain_area,
                        on_iteration=on_iteration,
                        singular_point=prob.info.get("singular_point"),
                        fan=fan_integral if prob.name == "kellogg" else None)
    csv_path = out / f"{stem}_records.csv"
    write_records_csv(res.records, csv_path)
    write_records_jsonl(res.records, out / f"{stem}_records.jsonl")
    if args.svg in ("final", "all"):
        render_svg(res.mesh, out / f"{stem}_mesh_final.svg")
        if args.zoom:
            w = args.zoom
            render_svg(res.mesh, out / f"{stem}_mesh_zoom.svg", window=(-w, w, -w, w))
    if args.dump_mesh:
        write_mesh_json(res.mesh, out / f"{stem}_mesh.json")
    if args.dump_system:
        system, _ = assemble(res.mesh, cfg.gamma)
        write_matrix_market(system, out / f"{stem}_system.mtx")
    return res, csv_path


def _summary(res) -> str:
    lines = [f"{'iter':>5} {'ndofs':>8} {'nelem':>8} {'eta':>12} {'ratio':>10} {'h1err':>10}"]
    for r in res.records:
        h1 = "" if r.h1_like_error is None else f"{r.h1_like_error:10.4e}"
        lines.append(f"{r.iter:5d} {r.n_dofs:8d} {r.n_elements:8d} {math.sqrt(r.eta2):12.5e} "
                     f"{r.ratio:10.3e} {h1:>10}")
    census = polygon_census(res.mesh)
    lines.append(f"final: {res.mesh.n_nodes} vertices, {res.mesh.n_active} elements, "
                 f"lambda_max {res.mesh.max_index()}, census {census}")
    if res.records and res.records[0].h1_like_error is not None and res.beta:
        _, amax, frac = contraction_monitor(res.records, res.beta)
        lines.append(f"contraction: beta {res.beta:.3e}, max factor {amax:.4f}, "
                     f"fraction contracting {frac:.3f}")
    return "\n".join(lines)


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.nmax is None and args.eps is None:
            raise ConfigError("give --nmax and/or --eps")
        cfg = AdaptConfig(theta=args.theta, Lambda=args.lambda_max, gamma=args.gamma, eps=args.eps,
                          nmax=args.nmax, cg_tol=args.cg_tol, problem=args.problem)
        if args.fem:
            cfg = fem_mode(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"avem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        res, csv_path = _run_once(args, cfg, args.out_dir)
        if args.seed_independent:
            _, csv2 = _run_once(args, cfg, args.out_dir, tag="_rerun")
            if csv_path.read_bytes() != csv2.read_bytes():
                raise InvariantError("repeated run produced different records")
    except OSError as exc:
        print(f"avem: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"avem: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvariantError, MeshError, RefineError) as exc:
        print(f"avem: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    if not args.quiet:
        print(_summary(res))
        print(f"records written to {csv_path}")
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
