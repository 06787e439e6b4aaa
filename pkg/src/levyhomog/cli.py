"""Command-line front end.

Exit status: 0 when every check passes, 1 on a failed property or solver
stage, 2 on invalid configuration or problem data.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import DEFAULT_CONFIG, ConfigError, StudyConfig
from .effective_operator import EffectiveOperatorTable, check_subellipticity
from .ergodic_cell import ergodic_constant
from .hjb_solver import SolverNotConverged, UnresolvedOscillationError, solve_eps_problem
from .study import (StageError, cell_family, effective_solution, run_almost_periodic_study,
                    run_homogenization_study, run_property_suite, validate_eps_specs,
                    write_solution)

log = logging.getLogger("levyhomog")

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def _load(args) -> StudyConfig:
    over = {"out_dir": args.out, "seed": args.seed}
    if args.config is None:
        return StudyConfig.from_string(DEFAULT_CONFIG, **over)
    return StudyConfig.from_file(args.config, **over)


def _out(cfg: StudyConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_solve_eps(cfg, args) -> int:
    specs = validate_eps_specs(cfg)
    out = _out(cfg)
    for spec in specs:
        u = solve_eps_problem(spec, cfg.tol)
        path = out / f"u_eps_{spec.eps1:.6g}.csv"
        write_solution(u, path)
        print(f"eps={spec.eps1:g}: residual {u.info['residual']:.2e}, "
              f"tail bound {u.info['tail_bound']:.2e} -> {path}")
    return EXIT_OK


def cmd_solve_cell(cfg, args) -> int:
    spec = cell_family(cfg)(cfg.cell_x, cfg.cell_p, cfg.cell_I)
    res = ergodic_constant(spec, cfg.lambda_schedule, cfg.tol)
    out = _out(cfg)
    res.write_trace(out / "lambda_trace.csv")
    print(f"d = {res.d:.10g} (extrapolated {res.d_extrapolated:.10g}, "
          f"uncertainty {res.uncertainty:.2e}){' FLAGGED non-ergodic' if res.flagged else ''}")
    return EXIT_FAIL if res.flagged else EXIT_OK


def cmd_tabulate(cfg, args) -> int:
    specs = validate_eps_specs(cfg)
    pilot = solve_eps_problem(specs[0], cfg.tol)
    _, table = effective_solution(cfg, pilot, workers=args.workers)
    out = _out(cfg)
    table.save(out / "table.csv")
    rep = check_subellipticity(table)
    print(f"table {table.values.shape} -> {out / 'table.csv'}; {rep}")
    if table.partial:
        print(f"partial table: non-ergodic cells {table.failed}")
    return EXIT_OK if rep.passed and not table.partial else EXIT_FAIL


def cmd_solve_effective(cfg, args) -> int:
    out = _out(cfg)
    if cfg.table_path is not None:
        table = EffectiveOperatorTable.load(cfg.table_path, cfg.a - abs(cfg.a_osc))
        ubar, _ = effective_solution(cfg, None, table=table)
    else:
        specs = validate_eps_specs(cfg)
        pilot = solve_eps_problem(specs[0], cfg.tol)
        ubar, table = effective_solution(cfg, pilot, workers=args.workers)
        table.save(out / "table.csv")
    write_solution(ubar, out / "ubar.csv")
    print(f"effective solve: residual {ubar.info['residual']:.2e} -> {out / 'ubar.csv'}")
    return EXIT_OK


def cmd_homogenize(cfg, args) -> int:
    rep = run_homogenization_study(cfg, _out(cfg), workers=args.workers)
    for r in rep.rows:
        print(f"eps={r.eps:<10g} sup error {r.sup_error:.4e}  interior error {r.interior_error:.4e}")
    print("homogenization:", "pass" if rep.passed else "FAIL (interior error increased)")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_almost_periodic(cfg, args) -> int:
    rep = run_almost_periodic_study(cfg, _out(cfg), workers=args.workers)
    for r in rep.rows:
        print(f"eps={r.eps:<10g} M={r.M}  c_M={r.c_M:.5f}  |u - u^M|={r.sandwich_error:.4e}  "
              f"margin {r.margin:.4e}")
    for note in rep.notes:
        print(note)
    print("sandwich:", "pass" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_properties(cfg, args) -> int:
    rep = run_property_suite(cfg, cfg.seed, _out(cfg))
    for r in rep.results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "solve-eps": (cmd_solve_eps, "solve the oscillating problem for every scheduled eps"),
    "solve-cell": (cmd_solve_cell, "ergodic constant of the [cell] frozen triple"),
    "tabulate": (cmd_tabulate, "tabulate the effective operator over an auto-sized box"),
    "solve-effective": (cmd_solve_effective, "solve the effective equation"),
    "homogenize": (cmd_homogenize, "eps-sweep against the effective solution"),
    "almost-periodic": (cmd_almost_periodic, "truncation sandwich study"),
    "properties": (cmd_properties, "run the structural property suite"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyhomog", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="INI study configuration")
        sp.add_argument("--out", help="output directory for CSV files")
        sp.add_argument("--seed", type=int, help="seed for randomized checks")
        sp.add_argument("--workers", type=int, default=1, help="concurrent solves")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command][0](cfg, args)
    except (ConfigError, UnresolvedOscillationError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StageError, SolverNotConverged) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"invalid problem data: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
