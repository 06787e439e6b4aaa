"""
Ergodic constants of the periodic cell problems by vanishing discount.

For a frozen triple ``(x, p, I)`` the discounted cell equation

    lam v + max_a { -beta(a) (v' + p) } - a(y) (I[v] + I) - g(y) = 0

is solved along a decreasing ``lam`` schedule and ``d = lim lam v_lam`` is read
off as the torus mean of ``lam v_lam``. Single-scale forcings live on the unit
torus; two-scale forcings are solved on the lifted 2-torus with jumps along
``(z, z / gamma)``.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .forcing import MultiscaleForcing
from .grid import GridFunction, Torus
from .hjb_solver import (CoefficientField, ControlField, DiscountedProblem, LiftedProblem,
                         _LiftedScheme, _torus_scheme, check_case_gate, lifted_parts,
                         solve_discounted)
from .levy_kernel import LevyKernel, LiftedDirection

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
LAMBDA_FLOOR = 1e-4


@dataclass
class CellProblemSpec:
    """Frozen cell problem; ``controls`` carries the unfrozen drift ``b(x, a)``.

    ``n`` is the torus resolution per unit period; it defaults to ``1 / kernel.h``
    and must be given when there is no jump term (case I).
    """

    case: str
    frozen_x: float
    frozen_p: float
    frozen_I: float
    controls: ControlField
    coeffs: CoefficientField
    forcing: MultiscaleForcing | Callable
    kernel: LevyKernel | None = None
    alpha: float | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kernel is not None:
            if self.alpha is not None and self.alpha != self.kernel.alpha:
                raise ValueError("alpha disagrees with the kernel")
            self.alpha = self.kernel.alpha
            if self.n is None:
                self.n = int(round(1.0 / self.kernel.h))
        if self.alpha is None or self.n is None:
            raise ValueError("alpha and the torus resolution n are required without a kernel")
        self.validate()

    @property
    def frozen_controls(self) -> ControlField:
        return self.controls.frozen(self.frozen_x, self.frozen_p)

    @property
    def is_lifted(self) -> bool:
        return isinstance(self.forcing, MultiscaleForcing) and self.forcing.M > 1

    def validate(self) -> None:
        a, case = self.alpha, self.case
        beta = np.asarray(self.frozen_controls.drifts, dtype=float)
        moving = bool(np.any(beta != 0.0))
        if case == "I":
            if not (0.0 < a < 1.0 and moving):
                raise ValueError("case I needs alpha in (0, 1) and a nonzero drift")
        elif case == "II":
            if not (a == 1.0 and moving):
                raise ValueError("case II needs alpha = 1 and a nonzero drift")
            check_case_gate(case, self.coeffs)
        elif case == "III":
            if not (1.0 < a < 2.0 or (0.0 < a <= 1.0 and not moving)):
                raise ValueError("case III needs alpha in (1, 2), or alpha <= 1 with zero drift")
        else:
            raise ValueError(f"unknown case {case!r}")
        if case != "I" and self.kernel is None:
            raise ValueError(f"case {case} requires a jump kernel")
        if self.is_lifted and max(self.n, self.n) > 256:
            raise ValueError("lifted torus resolution is limited to 256 per axis")

    @property
    def jump_kernel(self) -> LevyKernel | None:
        return None if self.case == "I" else self.kernel

    def forcing_1d(self) -> Callable:
        f = self.forcing
        if isinstance(f, MultiscaleForcing):
            gam = f.gammas[0]
            return lambda y: f.lifted(np.mod(gam * np.asarray(y), 1.0)[..., None])
        return f

    def discounted_problem(self) -> DiscountedProblem:
        return DiscountedProblem(self.n, self.jump_kernel, self.frozen_controls, self.coeffs,
                                 self.forcing_1d(), self.frozen_I, case=self.case)

    def lifted_problem(self) -> LiftedProblem:
        return LiftedProblem((self.n,) * self.forcing.M, self.jump_kernel,
                             LiftedDirection(self.forcing.gammas), self.frozen_controls,
                             self.coeffs, self.forcing, self.frozen_I)

    def sup_bound(self) -> float:
        """Uniform bound ``|g| + |a| |I| + max |c|`` on ``|lam v_lam|``."""
        if self.is_lifted:
            P = self.lifted_problem()
            g = np.max(np.abs(P.forcing.lifted(np.stack(P.grids(), axis=-1))))
            y = P.grids()[0]
        else:
            P = self.discounted_problem()
            y = P.nodes
            g = np.max(np.abs(np.asarray(P.forcing(y), dtype=float)))
        return float(g + self.coeffs.sup(y) * abs(self.frozen_I) + self.frozen_controls.cost_bound)

    def tail_bound(self, corrector) -> float:
        """Bound on ``a(y)`` times the jumps beyond the far radius acting on ``corrector``.

        The jump term annihilates constants, so the relevant size is half the
        oscillation. Zero on a single-scale torus, where the tail is folded in.
        """
        k = self.jump_kernel
        if k is None or (not self.is_lifted and k.fold_tail):
            return 0.0
        half_osc = 0.5 * float(np.ptp(corrector))
        return self.coeffs.sup() * k.tail_bound(half_osc)


@dataclass
class _Discounted:
    lam: float
    corrector: np.ndarray     # mean-free part of v_lam
    shift: float              # lam * kappa, the mean of lam v_lam
    residual: float
    weak_residual: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.shift + self.lam * self.corrector


def _solve(spec: CellProblemSpec, lam: float, tol: float) -> _Discounted:
    if spec.is_lifted:
        P = spec.lifted_problem()
        w, shift, res = lifted_parts(P, lam, tol)
        S = _LiftedScheme(P, lam)
        r = S.residual(w, shift / lam)
        return _Discounted(lam, w, shift, res, r - shift - lam * w)
    P = spec.discounted_problem()
    sol = solve_discounted(P, lam, tol)
    corr, shift = sol.info["corrector"], sol.info["shift"]
    scheme = _torus_scheme(P, lam)
    r = scheme.residual(corr, sol.info["kappa"])
    return _Discounted(lam, corr, shift, sol.info["residual"], r - shift - lam * corr)


@dataclass
class ErgodicResult:
    """Vanishing-discount estimate of ``d``.

    ``lambda_trace`` rows are ``(lam, sup m, inf m, mean m)`` with ``m = lam v_lam``.
    ``holder_quotient`` is measured on ``m`` at the smallest ``lam`` and
    ``corrector_holder`` on the mean-free ``v_lam`` for every ``lam``.
    """

    d: float
    d_raw: float
    d_extrapolated: float
    uncertainty: float
    lambda_trace: list
    corrector: GridFunction | np.ndarray
    holder_quotient: float
    corrector_holder: list = field(default_factory=list)
    m_holder: list = field(default_factory=list)
    sup_bound: float = np.inf
    bound_ok: bool = True
    flagged: bool = False
    tail_bound: float = 0.0
    residuals: list = field(default_factory=list)

    @property
    def oscillations(self) -> list:
        return [s - i for _, s, i, _ in self.lambda_trace]

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "sup_lam_v", "inf_lam_v", "mean_lam_v", "residual"])
            for row, res in zip(self.lambda_trace, self.residuals):
                w.writerow([repr(float(x)) for x in row] + [repr(float(res))])


def _check_schedule(schedule) -> list:
    lams = [float(s) for s in schedule]
    if not lams:
        raise ValueError("empty lambda schedule")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda schedule must be strictly decreasing")
    if lams[-1] < LAMBDA_FLOOR:
        raise ValueError(f"smallest lambda {lams[-1]:g} is below the floor {LAMBDA_FLOOR:g}")
    return lams


def _non_ergodic(osc: Sequence[float], floor: float) -> bool:
    for i in range(len(osc) - 2):
        a, b, c = osc[i:i + 3]
        if b >= a and c >= b and c > floor:
            return True
    return False


def ergodic_constant(spec: CellProblemSpec, lambda_schedule=DEFAULT_SCHEDULE,
                     tol: float = 1e-9, theta: float | None = None) -> ErgodicResult:
    """Vanishing-discount sweep; ``d`` is the torus mean of ``lam v_lam`` at the last ``lam``.

    The extrapolated value fits ``mean(lam v_lam) = d + k lam`` over the schedule;
    the uncertainty adds oscillation, raw/extrapolated disagreement and tail bound.
    """
    lams = _check_schedule(lambda_schedule)
    theta = spec.coeffs.theta0 if theta is None else theta
    bound = spec.sup_bound()
    trace, ch, mh, resid = [], [], [], []
    bound_ok = True
    last = None
    for lam in lams:
        sol = _solve(spec, lam, tol)
        m = sol.m
        trace.append((lam, float(m.max()), float(m.min()), float(np.mean(m))))
        resid.append(sol.residual)
        bound_ok &= bool(np.max(np.abs(m)) <= bound)
        v = sol.corrector - np.mean(sol.corrector)
        ch.append(holder_diagnostic(v, theta))
        mh.append(holder_diagnostic(m, theta))
        last = sol
    means = np.array([t[3] for t in trace])
    d_raw = float(means[-1])
    if len(lams) >= 2:
        slope, icpt = np.polyfit(np.array(lams), means, 1)
        d_ext = float(icpt)
    else:
        d_ext = d_raw
    osc = [s - i for _, s, i, _ in trace]
    corr = last.corrector - np.mean(last.corrector)
    tail = spec.tail_bound(corr)
    flagged = _non_ergodic(osc, 10 * tol + tail)
    if flagged:
        logger.warning("oscillation of lam v_lam does not decay: %s", osc)
    if not spec.is_lifted:
        corr = GridFunction(corr, Torus(1.0), 1.0 / spec.n)
    return ErgodicResult(
        d=d_raw, d_raw=d_raw, d_extrapolated=d_ext,
        uncertainty=float(osc[-1] + abs(d_raw - d_ext) + tail),
        lambda_trace=trace, corrector=corr, holder_quotient=mh[-1],
        corrector_holder=ch, m_holder=mh, sup_bound=bound, bound_ok=bound_ok,
        flagged=flagged, tail_bound=tail, residuals=resid,
    )


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def holder_diagnostic(m, theta: float) -> float:
    """Largest ``|m(y) - m(y')| / |y - y'|^theta`` over torus pairs at distance <= 1/2.

    ``m`` is a torus GridFunction or an array on the unit torus; for arrays
    with several axes the pairs are taken along one axis at a time.
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if isinstance(m, GridFunction):
        vals = m.values
        period = m.geometry.period if isinstance(m.geometry, Torus) else m.n * m.h
    else:
        vals = np.asarray(m, dtype=float)
        period = 1.0
    worst = 0.0
    for ax in range(vals.ndim):
        n = vals.shape[ax]
        h = period / n
        for s in range(1, n // 2 + 1):
            diff = np.abs(np.roll(vals, -s, axis=ax) - vals)
            worst = max(worst, float(diff.max()) / (s * h) ** theta)
    return worst


@dataclass
class WeakSolutionReport:
    passed: bool
    mu: float
    achieved_mu: float
    floor: float
    lam: float
    note: str = ""


def verify_weak_solution(spec: CellProblemSpec, d: float, mu: float, lam: float = 1e-3,
                         tol: float = 1e-9) -> WeakSolutionReport:
    """Check that ``v_lam`` is a ``mu``-sub and ``(-mu)``-supersolution with constant ``d``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    sol = _solve(spec, lam, tol)
    r = sol.weak_residual + d
    achieved = float(np.max(np.abs(r)))
    floor = spec.tail_bound(sol.corrector)
    if mu < floor:
        return WeakSolutionReport(False, mu, achieved, floor, lam,
                                  f"mu={mu:g} lies below the jump truncation floor {floor:g}")
    passed = achieved <= mu
    note = "" if passed else f"smallest achievable mu at lam={lam:g} is {achieved:g}"
    return WeakSolutionReport(passed, mu, achieved, floor, lam, note)


# ---------------------------------------------------------------------------
# case I control oracle
# ---------------------------------------------------------------------------

def _sweep(V, ks, ws, rhs, disc, n_sweeps: int = 6):
    """Alternating Gauss-Seidel value iteration; settles the policy before Howard steps."""
    n = V.size
    V = V.tolist()
    K, W, Rh = ks.T.tolist(), ws.T.tolist(), rhs.T.tolist()
    for s in range(n_sweeps):
        order = range(n) if s % 2 == 0 else range(n - 1, -1, -1)
        for i in order:
            V[i] = min(r + disc * ((1 - w) * V[k] + w * V[(k + 1) % n])
                       for k, w, r in zip(K[i], W[i], Rh[i]))
    return np.array(V)


def _interp_matrix(rows, k, w, n):
    return sparse.csr_matrix((np.concatenate([1 - w, w]),
                              (np.concatenate([rows, rows]), np.concatenate([k, (k + 1) % n]))),
                             shape=(n, n))


@dataclass
class ControlOracle:
    value: float
    lam: float
    controllable: bool
    grid: np.ndarray
    values: np.ndarray


def control_value_oracle(spec: CellProblemSpec, lam: float, y0=None, n_fine: int = 4096,
                         tol: float = 1e-11) -> ControlOracle:
    """Discounted optimal-control value by semi-Lagrangian dynamic programming.

    ``V(y) = min_a [ tau (f(y) + c(a)) + exp(-lam tau) V(y + beta(a) tau) ]`` on a
    fine periodic grid with linear interpolation, solved by policy iteration.
    ``f = a(y) I + g(y)``. Returns the value at ``y0`` (interpolated) or at 0.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    ctrl = spec.frozen_controls
    beta = np.asarray(ctrl.drifts, dtype=float)
    cost = np.asarray(ctrl.costs, dtype=float)
    controllable = bool(beta.max() > 0 and beta.min() < 0)
    if not controllable:
        warnings.warn("drifts do not span both directions; approximate controllability "
                      "cannot be verified", RuntimeWarning, stacklevel=2)
    n = int(n_fine)
    h = 1.0 / n
    y = np.arange(n) * h
    f = spec.coeffs.values(y) * spec.frozen_I + np.asarray(spec.forcing_1d()(y), dtype=float)
    bmax = float(np.max(np.abs(beta))) or 1.0
    tau = h / bmax
    disc = np.exp(-lam * tau)
    run = (1.0 - disc) / lam
    rows = np.arange(n)
    ks, ws, mats, rhs = [], [], [], []
    for b, c in zip(beta, cost):
        t = np.mod(y + b * tau, 1.0) / h
        k = np.floor(t).astype(int) % n
        w = t - np.floor(t)
        ks.append(k)
        ws.append(w)
        mats.append(_interp_matrix(rows, k, w, n))
        rhs.append(run * (f + c))
    ks, ws, rhs = np.array(ks), np.array(ws), np.array(rhs)
    V = _sweep(np.full(n, f.min() / lam), ks, ws, rhs, disc)
    pol = None
    for _ in range(10 * n):
        Q = rhs + disc * np.stack([P @ V for P in mats])
        new = np.argmin(Q, axis=0)
        if pol is not None and np.array_equal(new, pol):
            break
        pol = new
        Pm = _interp_matrix(rows, ks[pol, rows], ws[pol, rows], n)
        A = sparse.identity(n, format="csc") - disc * Pm.tocsc()
        V = spsolve(A, rhs[pol, rows])
    res = float(np.max(np.abs(V - np.min(rhs + disc * np.stack([P @ V for P in mats]), axis=0))))
    if res > tol * max(1.0, float(np.max(np.abs(V)))):
        logger.warning("control oracle residual %g", res)
    val = float(V[0]) if y0 is None else float(np.interp(np.mod(y0, 1.0), np.append(y, 1.0),
                                                          np.append(V, V[0])))
    return ControlOracle(val, lam, controllable, y, V)
