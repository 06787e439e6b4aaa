"""End-to-end studies: oscillating solves, effective limit, sandwich bounds, property suite."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, StudyConfig
from .effective_operator import (EffectiveOperatorTable, OutOfTableRange, check_subellipticity,
                                 tabulate)
from .ergodic_cell import CellProblemSpec, ergodic_constant
from .forcing import GOLDEN, MultiscaleForcing, build_trig_truncation, orbit_density
from .grid import GridFunction
from .hjb_solver import (DiscountedProblem, EpsProblemSpec, check_comparison,
                         discounted_residual, solve_discounted, solve_eps_problem, solve_effective,
                         strong_max_principle_check)
from .levy_kernel import apply_levy, build_kernel

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def eps_kernel(cfg: StudyConfig):
    h = cfg.grid_h
    return build_kernel(cfg.alpha, h, nu=cfg.nu_cells * h, far_radius=cfg.far_radius)


def eps_spec(cfg: StudyConfig, eps: float, forcing=None, kernel=None) -> EpsProblemSpec:
    return EpsProblemSpec(eps, kernel or eps_kernel(cfg), cfg.control_field(),
                          cfg.coefficient_field(), forcing or cfg.forcing(), cfg.domain,
                          cfg.exterior, max_denominator=cfg.max_denominator)


def cell_kernel(cfg: StudyConfig, lifted: bool):
    h = 1.0 / cfg.cell_n
    return build_kernel(cfg.alpha, h, nu=cfg.nu_cells * h, far_radius=cfg.far_radius,
                        fold_tail=not lifted)


def cell_family(cfg: StudyConfig, forcing: MultiscaleForcing | None = None):
    forcing = forcing or cfg.forcing()
    controls, coeffs, case = cfg.control_field(), cfg.coefficient_field(), cfg.case
    lifted = forcing.M > 1
    kernel = None if case == "I" else cell_kernel(cfg, lifted)

    def family(x, p, I):
        return CellProblemSpec(case, float(x), float(p), float(I), controls, coeffs, forcing,
                               kernel=kernel, alpha=cfg.alpha, n=cfg.cell_n)
    return family


def mean_value_table(cfg: StudyConfig, forcing: MultiscaleForcing, x_grid, p_grid, I_grid):
    """Exact table ``-a I - mean(g)`` for constant ``a`` and zero drift."""
    if cfg.a_osc != 0 or not cfg.control_field().is_zero():
        raise ConfigError("the mean-value table needs constant a and zero drift")
    I = np.asarray(I_grid, dtype=float)
    shape = (len(x_grid), len(p_grid), I.size)
    vals = np.broadcast_to(-cfg.a * I - forcing.mean(), shape)
    return EffectiveOperatorTable(x_grid, p_grid, I, vals, np.zeros(shape), cfg.a)


def _table_box(cfg: StudyConfig, u: GridFunction, kernel, pad: float):
    inner = np.flatnonzero(u.interior)
    p = 0.5 * (u.values[inner + 1] - u.values[inner - 1]) / u.h
    Iu = apply_levy(kernel, u)
    lo, hi = cfg.domain
    nx, npp, nI = cfg.table_counts
    P = (1 + pad) * max(float(np.max(np.abs(p))), 1e-3)
    span = max(float(np.ptp(Iu)), 1e-3)
    return (np.linspace(lo, hi, max(nx, 1)),
            np.linspace(-P, P, max(npp, 2)),
            np.linspace(Iu.min() - pad * span, Iu.max() + pad * span, max(nI, 2)))


def effective_solution(cfg: StudyConfig, pilot: GridFunction, forcing=None, table=None,
                       workers: int = 1, tabulator=None):
    """Solve the effective problem.

    A supplied table is used as is, so a query outside it is an error. An
    auto-sized table is built around the pilot solution's ``(p, I[u])`` range
    and grown if the solve leaves it.
    """
    kernel = eps_kernel(cfg)
    if table is not None:
        return solve_effective(table, kernel, cfg.domain, cfg.exterior, tol=cfg.tol), table
    forcing = forcing or cfg.forcing()
    pad = cfg.table_pad
    for _ in range(4):
        grids = _table_box(cfg, pilot, kernel, pad)
        if tabulator is not None:
            table = tabulator(*grids)
        else:
            table = tabulate(cell_family(cfg, forcing), *grids, a0=cfg.a - abs(cfg.a_osc),
                             lambda_schedule=cfg.lambda_schedule, tol=cfg.tol, workers=workers)
        try:
            return solve_effective(table, kernel, cfg.domain, cfg.exterior, tol=cfg.tol), table
        except OutOfTableRange as exc:
            logger.info("growing table box after %s", exc)
            pad = 2 * pad + 1
    raise StageError("effective", RuntimeError("table box could not cover the effective solve"))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    eps: float
    sup_error: float
    interior_error: float
    runtime: float
    tol: float
    tail_bound: float
    M: int | None = None
    c_M: float | None = None
    sandwich_error: float | None = None
    margin: float | None = None


@dataclass
class ConvergenceReport:
    rows: list
    passed: bool
    kind: str = "homogenization"
    notes: list = field(default_factory=list)
    table: EffectiveOperatorTable | None = None
    solutions: dict = field(default_factory=dict, repr=False)

    FIELDS = ("eps", "sup_error", "interior_error", "tol", "tail_bound", "M", "c_M",
              "sandwich_error", "margin")

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{self.kind}_report.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.FIELDS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, f)) for f in self.FIELDS])
        with open(out / f"{self.kind}_timings.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "M", "runtime_s"])
            for r in self.rows:
                w.writerow([_fmt(r.eps), _fmt(r.M), f"{r.runtime:.3f}"])
        return path

    @property
    def interior_errors(self) -> list:
        return [r.interior_error for r in self.rows]


def _interior_mask(u: GridFunction, lo: float, hi: float, eps: float) -> np.ndarray:
    x = u.nodes
    return u.interior & (x > lo + 2 * eps) & (x < hi - 2 * eps)


def write_solution(u: GridFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, v in zip(u.nodes, u.values):
            w.writerow([_fmt(x), _fmt(v)])


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def validate_eps_specs(cfg: StudyConfig, forcing=None) -> list:
    """Build and validate every scheduled problem before any solve."""
    kernel = eps_kernel(cfg)
    specs = []
    for eps in cfg.eps_schedule:
        spec = eps_spec(cfg, eps, forcing, kernel)
        spec.validate()
        specs.append(spec)
    return specs


def run_homogenization_study(cfg: StudyConfig, out_dir=None, workers: int = 1,
                             table: EffectiveOperatorTable | None = None) -> ConvergenceReport:
    """Solve every scheduled ``u_eps``, the effective ``ubar``, and tabulate the errors."""
    specs = validate_eps_specs(cfg)
    lo, hi = cfg.domain

    def solve(spec):
        t0 = time.perf_counter()
        try:
            u = solve_eps_problem(spec, cfg.tol)
        except Exception as exc:
            raise StageError(f"solve-eps eps={spec.eps1:g}", exc) from exc
        return u, time.perf_counter() - t0

    sols = _map(solve, specs, workers)
    if table is None and cfg.table_path is not None:
        table = EffectiveOperatorTable.load(cfg.table_path, cfg.a - abs(cfg.a_osc))
    try:
        ubar, table = effective_solution(cfg, sols[0][0], table=table, workers=workers)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("effective", exc) from exc
    rows = []
    kernel = specs[0].kernel
    for spec, (u, dt) in zip(specs, sols):
        diff = np.abs(u.values - ubar.values)
        m = _interior_mask(u, lo, hi, spec.eps1)
        rows.append(ConvergenceRow(spec.eps1, float(diff[u.interior].max()),
                                   float(diff[m].max()) if m.any() else float("nan"), dt, cfg.tol,
                                   kernel.tail_bound(u.sup_norm())))
    errs = [r.interior_error for r in rows]
    passed = all(np.isfinite(errs)) and all(b <= a for a, b in zip(errs, errs[1:]))
    rep = ConvergenceReport(rows, passed, "homogenization", table=table,
                            solutions={"ubar": ubar, **{s.eps1: u for s, (u, _) in zip(specs, sols)}})
    if out_dir is not None:
        rep.write(out_dir)
        write_solution(ubar, Path(out_dir) / "ubar.csv")
    return rep


def run_almost_periodic_study(cfg: StudyConfig, out_dir=None, workers: int = 1) -> ConvergenceReport:
    """Sandwich ``|u_eps - u_eps^M| <= c_M`` for each scheduled ``(eps, M)``."""
    series = cfg.forcing()
    if series.kind != "almost":
        raise ConfigError("the almost-periodic study needs [forcing] kind = almost")
    truncs = {}
    for M in cfg.M_schedule:
        if not 1 <= M <= series.M:
            raise ConfigError(f"truncation order {M} outside 1..{series.M}")
        truncs[M] = build_trig_truncation(series, M)
    specs_full = validate_eps_specs(cfg, series)
    kernel = specs_full[0].kernel
    jobs = [(spec, None) for spec in specs_full]
    jobs += [(eps_spec(cfg, spec.eps1, truncs[M][0], kernel), M)
             for spec in specs_full for M in cfg.M_schedule]

    def solve(job):
        spec, M = job
        t0 = time.perf_counter()
        try:
            u = solve_eps_problem(spec, cfg.tol)
        except Exception as exc:
            raise StageError(f"solve-eps eps={spec.eps1:g} M={M}", exc) from exc
        return u, time.perf_counter() - t0

    sols = _map(solve, jobs, workers)
    full = {spec.eps1: sols[i][0] for i, spec in enumerate(specs_full)}
    effective = {}
    notes = []
    lo, hi = cfg.domain
    try:
        for M in cfg.M_schedule:
            gM = truncs[M][0]
            effective[M], _ = effective_solution(
                cfg, full[specs_full[0].eps1], forcing=gM,
                tabulator=lambda x, p, I, gM=gM: mean_value_table(cfg, gM, x, p, I))
    except ConfigError as exc:
        notes.append(f"effective chain skipped: {exc}")
    rows, passed = [], True
    for (spec, M), (u, dt) in zip(jobs, sols):
        if M is None:
            continue
        c_M = truncs[M][1]
        diff = np.abs(full[spec.eps1].values - u.values)
        worst = int(np.argmax(diff))
        margin = c_M + 2 * cfg.tol - float(diff[worst])
        if margin < 0:
            passed = False
            notes.append(f"sandwich violated at eps={spec.eps1:g}, M={M}, x={u.nodes[worst]:.6f}, "
                         f"margin {margin:.3e}")
        if M in effective:
            e = np.abs(u.values - effective[M].values)
            sup_e = float(e[u.interior].max())
            mask = _interior_mask(u, lo, hi, spec.eps1)
            int_e = float(e[mask].max()) if mask.any() else float("nan")
        else:
            sup_e = int_e = float("nan")
        rows.append(ConvergenceRow(spec.eps1, sup_e, int_e, dt, cfg.tol,
                                   kernel.tail_bound(u.sup_norm()), M, c_M,
                                   float(diff[worst]), margin))
    rep = ConvergenceReport(rows, passed, "almost_periodic", notes,
                            solutions={"full": full, "effective": effective})
    if out_dir is not None:
        rep.write(out_dir)
    return rep


# ---------------------------------------------------------------------------
# property suite
# ---------------------------------------------------------------------------

def comparison_trials(problem: DiscountedProblem, lam: float, trials: int, rng, tol: float = 1e-9):
    """Randomized ordered pairs: solutions of data shifted down and up by random bumps.

    ``sub`` solves the problem with ``g - phi`` (``phi >= 0``) so its residual for
    ``g`` is ``<= tol``; ``sup`` likewise with ``g + psi``. Returns the reports.
    """
    y = problem.nodes
    reports = []
    res = lambda v: discounted_residual(problem, lam, v)
    for _ in range(trials):
        phis = []
        for _s in range(2):
            amp = rng.uniform(0.0, 1.0)
            c = rng.uniform(0, 1)
            w = rng.uniform(0.02, 0.3)
            d = np.abs(y - c)
            d = np.minimum(d, 1 - d)
            phis.append(amp * np.maximum(0.0, 1 - d / w) + rng.uniform(0, 0.1))
        sub = solve_discounted(problem, lam, tol, extra_source=-phis[0])
        sup = solve_discounted(problem, lam, tol, extra_source=phis[1])
        reports.append(check_comparison(sub, sup, res, tol))
    return reports


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str


@dataclass
class PropertyReport:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list:
        return [r.name for r in self.results if not r.passed]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "properties.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "passed", "detail"])
            for r in self.results:
                w.writerow([r.name, _fmt(r.passed), r.detail])
        return path


def run_property_suite(cfg: StudyConfig, seed: int | None = None, out_dir=None) -> PropertyReport:
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    forcing = cfg.forcing()
    results = []

    # nonlocal strong maximum principle
    k = build_kernel(cfg.alpha, 1.0 / cfg.smp_n, nu=cfg.nu_cells / cfg.smp_n)
    up = strong_max_principle_check(k, cfg.smp_n, bump_height=1.0, tol=cfg.tol)
    down = strong_max_principle_check(k, cfg.smp_n, bump_height=-1.0, tol=cfg.tol)
    results.append(PropertyResult(
        "strong_max_principle", up.passed and down.passed,
        f"oscillation {up.oscillation:.2e}; bump +1 shift [{up.min_shift:.3e}, {up.max_shift:.3e}]; "
        f"bump -1 shift [{down.min_shift:.3e}, {down.max_shift:.3e}]"))

    # randomized comparison on the configured coefficients, single-scale reduction
    n = min(cfg.cell_n, 128)
    kc = None if cfg.case == "I" else build_kernel(cfg.alpha, 1.0 / n, nu=cfg.nu_cells / n)
    g1 = lambda y: forcing.lifted(np.mod(np.asarray(y), 1.0)[..., None] * np.ones(forcing.M))
    prob = DiscountedProblem(n, kc, cfg.control_field().frozen(cfg.cell_x, cfg.cell_p),
                             cfg.coefficient_field(), g1, cfg.cell_I)
    reps = comparison_trials(prob, 0.1, cfg.trials, rng, cfg.tol)
    ok = sum(r.passed for r in reps)
    results.append(PropertyResult("comparison", ok == len(reps), f"{ok}/{len(reps)} ordered pairs"))

    # Holder bound across the discount sweep
    fam = cell_family(cfg, forcing)
    res = ergodic_constant(fam(cfg.cell_x, cfg.cell_p, cfg.cell_I), cfg.lambda_schedule, cfg.tol)
    q = res.corrector_holder
    ratio = max(q) / min(q) if min(q) > 0 else (1.0 if max(q) == 0 else np.inf)
    results.append(PropertyResult(
        "holder_bound", bool(ratio <= 2.0 and res.bound_ok),
        f"corrector quotients {min(q):.4e}..{max(q):.4e} (ratio {ratio:.3f}); "
        f"|lam v| bound {'held' if res.bound_ok else 'violated'}"))

    # subellipticity of a tabulated I-fiber; the single-scale reduction keeps the
    # full jump measure (folded tail), so entry uncertainties stay at solver level
    I_grid = np.linspace(-1.0, 1.0, 5)
    controls, coeffs, case = cfg.control_field(), cfg.coefficient_field(), cfg.case
    kf = None if case == "I" else build_kernel(cfg.alpha, 1.0 / n, nu=cfg.nu_cells / n)
    fam1 = lambda x, p, I: CellProblemSpec(case, x, p, I, controls, coeffs, g1, kernel=kf,
                                           alpha=cfg.alpha, n=n)
    table = tabulate(fam1, [cfg.cell_x], [cfg.cell_p], I_grid, a0=cfg.a - abs(cfg.a_osc),
                     lambda_schedule=cfg.lambda_schedule, tol=cfg.tol)
    if cfg.corrupt_table:
        table = table.corrupted((0, 0, 2), 0.1)
    sub = check_subellipticity(table)
    results.append(PropertyResult("subellipticity", sub.passed, str(sub)))

    # orbit equidistribution
    gamma = GOLDEN if cfg.orbit_gamma is None else cfg.orbit_gamma
    orb = orbit_density(gamma, cfg.orbit_delta)
    detail = (f"covered {orb.visited}/{orb.cells} cells by T={orb.covering_time}"
              if orb.covered else f"not covered ({orb.visited}/{orb.cells}); witness {orb.witness}")
    results.append(PropertyResult("orbit_density", orb.covered, detail))

    rep = PropertyReport(results)
    if out_dir is not None:
        rep.write(out_dir)
    return rep
