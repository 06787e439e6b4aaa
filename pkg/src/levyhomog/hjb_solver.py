"""
Monotone finite-difference solvers for the nonlocal Bellman equations

    lam v + max_a { -beta(a) v' - c(a) } - a(y) (I[v] + I0) - g(y) = 0     (torus)
    u + max_a { -b(x,a) u' - c(a) } - a(x/eps1) I[u] - g(x) = 0           (interval, u = h outside)

Gradients are upwinded per control; the jump term uses the positive-weight
quadrature of :mod:`levyhomog.levy_kernel`. The discrete system is solved by
policy iteration (Howard): each policy gives an M-matrix solved directly, and
the policy is updated by enumerating the finite control set (lowest index wins
ties). Every solve reports the sup-norm residual of the nonlinear scheme.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .forcing import MultiscaleForcing, check_nonresonance
from .grid import GridFunction, Torus, exterior_grid
from .levy_kernel import (LevyKernel, LiftedDirection, apply_levy_lifted,
                          levy_matrix_exterior, levy_matrix_torus)

logger = logging.getLogger(__name__)


class SolverNotConverged(RuntimeError):
    def __init__(self, message, residual_history):
        super().__init__(f"{message}; residual history {residual_history}")
        self.residual_history = list(residual_history)


class UnresolvedOscillationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

def _as_callable(f):
    if callable(f):
        return f
    c = float(f)
    return lambda x: np.full(np.shape(x), c)


@dataclass
class ControlField:
    """Finite control set with drifts ``b(x, a)`` and running costs ``c(a)``.

    ``drifts`` holds one entry per control: a constant or a callable of ``x``.
    """

    drifts: Sequence
    costs: Sequence | None = None
    labels: Sequence | None = None
    lipschitz: float | None = None

    def __post_init__(self):
        if len(self.drifts) == 0:
            raise ValueError("control set must be nonempty")
        if len(self.drifts) > 8:
            logger.warning("control set of size %d exceeds the desk-scale bound 8", len(self.drifts))
        if self.costs is None:
            self.costs = [0.0] * len(self.drifts)
        if len(self.costs) != len(self.drifts):
            raise ValueError("one cost per control required")
        self.costs = [float(c) for c in self.costs]
        if self.labels is None:
            self.labels = list(range(len(self.drifts)))

    @classmethod
    def none(cls) -> "ControlField":
        return cls([0.0])

    @property
    def size(self) -> int:
        return len(self.drifts)

    @property
    def cost_bound(self) -> float:
        return max(abs(c) for c in self.costs)

    def drift_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(_as_callable(b)(x), x.shape).astype(float)
                         for b in self.drifts])

    def is_zero(self, x=None) -> bool:
        x = np.linspace(0, 1, 17) if x is None else x
        return bool(np.all(self.drift_values(x) == 0.0))

    def frozen(self, x_hat: float, p: float = 0.0) -> "ControlField":
        """Constant drifts ``beta(a) = b(x_hat, a)`` with costs ``c(a) = b(x_hat, a) p``."""
        beta = self.drift_values(np.array([x_hat]))[:, 0]
        return ControlField(list(beta), list(beta * p), self.labels)

    def check_lipschitz(self, x) -> float:
        """Largest sampled ``|b(x,a) - b(y,a)| / |x - y|`` over consecutive samples."""
        x = np.sort(np.asarray(x, dtype=float))
        b = self.drift_values(x)
        dx = np.diff(x)
        q = np.abs(np.diff(b, axis=1)) / dx
        worst = float(q.max(initial=0.0))
        if self.lipschitz is not None and worst > self.lipschitz * (1 + 1e-9):
            raise ValueError(f"drift violates Lipschitz bound {self.lipschitz}: {worst}")
        return worst


@dataclass
class CoefficientField:
    """Jump intensity ``a(y) >= a0 > 0``, periodic with Holder data."""

    a: Callable | float
    a0: float | None = None
    theta0: float = 1.0
    holder_C: float | None = None

    def __post_init__(self):
        self._constant = not callable(self.a)
        if self._constant and self.a0 is None:
            self.a0 = float(self.a)
        if self.a0 is None or not self.a0 > 0:
            raise ValueError("a positive lower bound a0 is required")
        if not 0 < self.theta0 <= 1:
            raise ValueError("Holder exponent must lie in (0, 1]")

    @property
    def is_constant(self) -> bool:
        return self._constant

    def values(self, y) -> np.ndarray:
        return np.broadcast_to(_as_callable(self.a)(np.asarray(y, dtype=float)), np.shape(y)).astype(float)

    def validate(self, y) -> None:
        av = self.values(y)
        if np.any(av < self.a0 * (1 - 1e-12)):
            raise ValueError(f"a(y) drops below a0={self.a0}: min {av.min()}")
        if self.holder_C is not None and av.size > 1:
            y = np.asarray(y, dtype=float)
            i, j = np.triu_indices(min(av.size, 256), 1)
            d = np.abs(y[i] - y[j])
            d = np.minimum(d % 1.0, 1 - d % 1.0)
            ok = d > 0
            q = np.abs(av[i] - av[j])[ok] / d[ok] ** self.theta0
            if q.size and q.max() > self.holder_C * (1 + 1e-9):
                raise ValueError(f"a(y) violates the Holder bound {self.holder_C}")

    def sup(self, y=None) -> float:
        if self.is_constant:
            return float(self.a)
        y = np.linspace(0, 1, 257) if y is None else y
        return float(np.max(self.values(y)))


def case_of(alpha: float, controls: ControlField) -> str:
    zero = controls.is_zero()
    if alpha > 1 or zero:
        return "III"
    return "II" if alpha == 1 else "I"


def check_case_gate(case: str, coeffs: CoefficientField) -> None:
    if case == "II" and not coeffs.is_constant:
        raise ValueError("case II (alpha = 1 with nonzero drift) requires a constant coefficient a")


@dataclass
class DiscountedProblem:
    """Periodic cell data; ``forcing(y)`` returns ``g`` at torus nodes.

    ``kernel`` is ``None`` for first-order (case I) problems.
    """

    n: int
    kernel: LevyKernel | None
    controls: ControlField
    coeffs: CoefficientField
    forcing: Callable
    frozen_I: float = 0.0
    period: float = 1.0
    case: str | None = None

    def __post_init__(self):
        if self.kernel is not None and not np.isclose(self.kernel.h, self.h, rtol=1e-12):
            raise ValueError(f"kernel spacing {self.kernel.h} does not match torus spacing {self.h}")
        if self.case is not None:
            check_case_gate(self.case, self.coeffs)
        self.coeffs.validate(self.nodes)

    @property
    def h(self) -> float:
        return self.period / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def source(self) -> np.ndarray:
        """``a(y) I0 + g(y)`` at the nodes."""
        y = self.nodes
        return self.coeffs.values(y) * self.frozen_I + np.asarray(self.forcing(y), dtype=float)

    def sup_bound(self) -> float:
        """``|g| + |a| |I0| + max |c|``: bound on ``|lam v_lam|``."""
        y = self.nodes
        g = np.asarray(self.forcing(y), dtype=float)
        return float(np.max(np.abs(g)) + self.coeffs.sup(y) * abs(self.frozen_I)
                     + self.controls.cost_bound)


# ---------------------------------------------------------------------------
# 1-D scheme
# ---------------------------------------------------------------------------

@dataclass
class _Scheme:
    """Discrete operator on ``n`` unknowns.

    F(v) = diag0 v + max_a H_a(v) - a (Lin v + lsrc) - src
    """

    diag0: np.ndarray
    Lin: np.ndarray | None
    lsrc: np.ndarray
    a: np.ndarray
    beta: np.ndarray          # (nA, n)
    costs: np.ndarray         # (nA,)
    h: float
    right: np.ndarray         # unknown index of right neighbour, -1 if exterior
    left: np.ndarray
    right_val: np.ndarray     # exterior value used when right == -1
    left_val: np.ndarray
    src: np.ndarray
    levy_apply: Callable | None = None

    @property
    def n(self) -> int:
        return self.diag0.size

    def _neighbors(self, v):
        vr = np.where(self.right >= 0, v[np.maximum(self.right, 0)], self.right_val)
        vl = np.where(self.left >= 0, v[np.maximum(self.left, 0)], self.left_val)
        return vr, vl

    def hamiltonians(self, v) -> np.ndarray:
        vr, vl = self._neighbors(v)
        fwd = (vr - v) / self.h
        bwd = (v - vl) / self.h
        b = self.beta
        grad = np.where(b > 0, fwd[None, :], bwd[None, :])
        return -b * grad - self.costs[:, None]

    def levy(self, v) -> np.ndarray:
        if self.Lin is None:
            return np.zeros_like(v)
        if self.levy_apply is not None:
            return self.levy_apply(v)
        return self.Lin @ v + self.lsrc

    def residual(self, v, kappa: float = 0.0) -> np.ndarray:
        """Residual at ``kappa + v``; the constant is kept out of the difference operators."""
        return (self.diag0 * kappa + self.diag0 * v + self.hamiltonians(v).max(axis=0)
                - self.a * self.levy(v) - self.src)

    def policy_system(self, pol, kappa: float = 0.0):
        n = self.n
        A = np.diag(self.diag0).astype(float)
        if self.Lin is not None:
            A -= self.a[:, None] * self.Lin
        rhs = self.src - self.diag0 * kappa + (self.a * self.lsrc if self.Lin is not None else 0.0)
        rows = np.arange(n)
        b = self.beta[pol, rows]
        rhs = rhs + self.costs[pol]
        pos = b > 0
        neg = b < 0
        A[rows, rows] += np.abs(b) / self.h
        for mask, nb, val in ((pos, self.right, self.right_val), (neg, self.left, self.left_val)):
            inner = mask & (nb >= 0)
            A[rows[inner], nb[inner]] -= np.abs(b[inner]) / self.h
            outer = mask & (nb < 0)
            rhs[outer] += np.abs(b[outer]) / self.h * val[outer]
        return A, rhs

    def solve(self, tol: float = 1e-9, max_iter: int = 2000, kappa: float = 0.0, v0=None,
              recentre: bool = False):
        """Howard iteration; returns ``(v, residual, history, policy, kappa)``, solution ``kappa + v``.

        With ``recentre`` (periodic schemes only) the mean of ``v`` is moved into
        ``kappa`` after each solve, so refinement and residuals see O(1) data.
        """
        v = np.zeros(self.n) if v0 is None else np.array(v0, dtype=float)
        pol = np.argmax(self.hamiltonians(v), axis=0)
        history = []
        for it in range(max_iter):
            A, rhs = self.policy_system(pol, kappa)
            lu = sla.lu_factor(A, check_finite=False)
            v = sla.lu_solve(lu, rhs, check_finite=False)
            if recentre:
                m = float(np.mean(v))
                v -= m
                kappa += m
                rhs = rhs - self.diag0 * m
            for _ in range(2):
                r = rhs - A @ v
                v = v + sla.lu_solve(lu, r, check_finite=False)
            res = float(np.max(np.abs(self.residual(v, kappa))))
            history.append(res)
            new_pol = np.argmax(self.hamiltonians(v), axis=0)
            if res <= tol or np.array_equal(new_pol, pol):
                break
            pol = new_pol
        if history[-1] > tol:
            raise SolverNotConverged(f"policy iteration stalled after {len(history)} sweeps "
                                     f"(tol {tol:g})", history)
        return v, history[-1], history, pol, kappa


def _torus_scheme(problem: DiscountedProblem, diag0: float, extra_src=None) -> _Scheme:
    n = problem.n
    y = problem.nodes
    idx = np.arange(n)
    a = problem.coeffs.values(y)
    src = problem.source() if extra_src is None else problem.source() + extra_src
    Lin = None
    if problem.kernel is not None:
        Lin = levy_matrix_torus(problem.kernel, n)
    return _Scheme(
        diag0=np.full(n, float(diag0)), Lin=Lin, lsrc=np.zeros(n), a=a,
        beta=problem.controls.drift_values(y), costs=np.asarray(problem.controls.costs),
        h=problem.h, right=(idx + 1) % n, left=(idx - 1) % n,
        right_val=np.zeros(n), left_val=np.zeros(n), src=src,
    )


def discounted_residual(problem: DiscountedProblem, lam: float, v) -> np.ndarray:
    """Residual of the discounted scheme at ``v`` (values or GridFunction)."""
    vals = v.values if isinstance(v, GridFunction) else np.asarray(v, dtype=float)
    kappa = float(np.mean(vals))
    return _torus_scheme(problem, lam).residual(vals - kappa, kappa)


def solve_discounted(problem: DiscountedProblem, lam: float, tol: float = 1e-9,
                     max_iter: int = 2000, extra_source=None) -> GridFunction:
    """Periodic solution of the discounted problem; ``info`` carries residual and policy.

    ``extra_source`` adds a known array to ``g`` (used for residual-shifted
    comparison instances).
    """
    if not lam > 0:
        raise ValueError(f"discount lam must be positive, got {lam}")
    scheme = _torus_scheme(problem, lam, extra_source)
    # solve around the constant mean(src)/lam so difference operators act on O(1) data
    kappa = float(np.mean(scheme.src)) / lam
    v, res, hist, pol, kappa = scheme.solve(tol, max_iter, kappa, recentre=True)
    out = GridFunction(kappa + v, Torus(problem.period), problem.h)
    out.info = {"residual": res, "history": hist, "policy": pol, "lam": lam,
                "kappa": kappa, "corrector": v, "shift": lam * kappa,
                "source_mean": float(np.mean(scheme.src))}
    return out


# ---------------------------------------------------------------------------
# lifted problem on T^M
# ---------------------------------------------------------------------------

@dataclass
class LiftedProblem:
    """Discounted problem on the unit M-torus with jumps along ``Gamma z``.

    ``forcing`` is evaluated on lifted points (trailing axis M); ``coeffs`` is a
    function of the first lifted coordinate only.
    """

    shape: tuple
    kernel: LevyKernel | None
    direction: LiftedDirection
    controls: ControlField
    coeffs: CoefficientField
    forcing: MultiscaleForcing
    frozen_I: float = 0.0

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if len(self.shape) > 2:
            raise ValueError(f"lifted torus dimension M={len(self.shape)} not supported (M <= 2)")
        if len(self.shape) != self.direction.M:
            raise ValueError("grid shape does not match the lifted direction")
        if self.direction.M > 1:
            check = check_nonresonance(self.direction.gammas, 20)
            if not check.passed:
                raise ValueError(f"resonant direction {self.direction.gammas}: {check.witness}")

    def grids(self):
        axes = [np.arange(n) / n for n in self.shape]
        return np.meshgrid(*axes, indexing="ij")

    def source(self) -> np.ndarray:
        Y = self.grids()
        ybar = np.stack(Y, axis=-1)
        return self.coeffs.values(Y[0]) * self.frozen_I + self.forcing.lifted(ybar)


class _LiftedScheme:
    def __init__(self, prob: LiftedProblem, lam: float):
        self.p = prob
        self.lam = lam
        Y = prob.grids()
        self.a = prob.coeffs.values(Y[0])
        self.src = prob.source()
        beta = np.asarray([float(np.asarray(_as_callable(b)(0.0))) for b in prob.controls.drifts])
        self.B = beta[:, None] * np.asarray(prob.direction.gammas)[None, :]   # (nA, M)
        self.costs = np.asarray(prob.controls.costs)
        self.hs = [1.0 / n for n in prob.shape]

    def levy(self, w):
        if self.p.kernel is None:
            return np.zeros_like(w)
        return apply_levy_lifted(self.p.kernel, w, self.p.direction)

    def hamiltonians(self, w):
        out = []
        for k in range(self.B.shape[0]):
            t = -self.costs[k] * np.ones_like(w)
            for ax, bk in enumerate(self.B[k]):
                if bk > 0:
                    t -= bk * (np.roll(w, -1, axis=ax) - w) / self.hs[ax]
                elif bk < 0:
                    t -= bk * (w - np.roll(w, 1, axis=ax)) / self.hs[ax]
            out.append(t)
        return np.stack(out)

    def residual(self, w, kappa=0.0):
        return (self.lam * (kappa + w) + self.hamiltonians(w).max(axis=0)
                - self.a * self.levy(w) - self.src)

    def apply_policy(self, w, pol):
        H = self.hamiltonians(w)
        sel = np.take_along_axis(H, pol[None], axis=0)[0] + self.costs[pol]
        return self.lam * w + sel - self.a * self.levy(w)

    def preconditioner_symbol(self, pol):
        shape = self.p.shape
        delta = np.zeros(shape)
        delta[(0,) * len(shape)] = 1.0
        counts = np.bincount(pol.ravel(), minlength=self.B.shape[0])
        k = int(np.argmax(counts))
        col = self.lam * delta - float(np.mean(self.a)) * self.levy(delta)
        for ax, bk in enumerate(self.B[k]):
            if bk > 0:
                col -= bk * (np.roll(delta, -1, axis=ax) - delta) / self.hs[ax]
            elif bk < 0:
                col -= bk * (delta - np.roll(delta, 1, axis=ax)) / self.hs[ax]
        return np.fft.fftn(col)


def solve_discounted_lifted(problem: LiftedProblem, lam: float, tol: float = 1e-9,
                            max_iter: int = 50) -> np.ndarray:
    """Periodic ``w_lam`` on T^M (array of ``problem.shape``)."""
    corr, shift, _ = lifted_parts(problem, lam, tol, max_iter)
    return shift / lam + corr


def lifted_parts(problem: LiftedProblem, lam: float, tol: float = 1e-9, max_iter: int = 50):
    """``(w, lam kappa, residual)`` with mean-free ``w``; the solution is ``kappa + w``."""
    if not lam > 0:
        raise ValueError(f"discount lam must be positive, got {lam}")
    S = _LiftedScheme(problem, lam)
    kappa = float(np.mean(S.src)) / lam
    w = np.zeros(problem.shape)
    pol = np.argmax(S.hamiltonians(w), axis=0)
    N = w.size
    history = []
    for _ in range(max_iter):
        sym = S.preconditioner_symbol(pol)
        rhs = (S.src - lam * kappa + S.costs[pol]).ravel()
        op = LinearOperator((N, N), matvec=lambda x: S.apply_policy(x.reshape(problem.shape), pol).ravel())
        pre = LinearOperator((N, N), matvec=lambda x: np.real(
            np.fft.ifftn(np.fft.fftn(x.reshape(problem.shape)) / sym)).ravel())
        x, info = gmres(op, rhs, x0=w.ravel(), M=pre, rtol=1e-13, atol=tol * 1e-2,
                        restart=60, maxiter=200)
        w = x.reshape(problem.shape)
        m = float(np.mean(w))
        w = w - m
        kappa += m
        res = float(np.max(np.abs(S.residual(w, kappa))))
        history.append(res)
        new_pol = np.argmax(S.hamiltonians(w), axis=0)
        if res <= tol or np.array_equal(new_pol, pol):
            break
        pol = new_pol
    if history[-1] > tol:
        raise SolverNotConverged("lifted policy iteration did not reach tolerance", history)
    return w, lam * kappa, history[-1]


def sample_along_line(w: np.ndarray, gammas, y) -> np.ndarray:
    """Periodic multilinear interpolation of lifted ``w`` at ``(g_1 y, ..., g_M y) mod 1``."""
    y = np.asarray(y, dtype=float)
    pts = [np.mod(g * y, 1.0) for g in gammas]
    out = np.zeros_like(y)
    shape = w.shape
    corners = np.array(np.meshgrid(*[[0, 1]] * len(shape), indexing="ij")).reshape(len(shape), -1).T
    base, frac = [], []
    for ax, p in enumerate(pts):
        t = p * shape[ax]
        k = np.floor(t)
        base.append(k.astype(int))
        frac.append(t - k)
    for c in corners:
        wt = np.ones_like(y)
        idx = []
        for ax, ci in enumerate(c):
            wt = wt * (frac[ax] if ci else 1 - frac[ax])
            idx.append((base[ax] + ci) % shape[ax])
        out += wt * w[tuple(idx)]
    return out


# ---------------------------------------------------------------------------
# eps-problem on an interval with exterior data
# ---------------------------------------------------------------------------

@dataclass
class EpsProblemSpec:
    """Oscillating problem on ``(lo, hi)`` with ``u = h`` outside.

    ``forcing`` is a :class:`MultiscaleForcing` evaluated at ``x / eps1`` or a
    plain callable ``g(x)``; ``coeffs.a`` is read at ``x / eps1``.
    """

    eps1: float
    kernel: LevyKernel
    controls: ControlField
    coeffs: CoefficientField
    forcing: MultiscaleForcing | Callable
    domain: tuple = (0.0, 1.0)
    exterior: Callable | float = 0.0
    collar: float | None = None
    max_denominator: int = 20

    def validate(self) -> None:
        h = self.kernel.h
        if h > self.eps1 / 16 * (1 + 1e-12):
            raise UnresolvedOscillationError(
                f"grid spacing {h:g} does not resolve eps1={self.eps1:g} (need h <= eps1/16)")
        if isinstance(self.forcing, MultiscaleForcing) and self.forcing.M > 1:
            rep = check_nonresonance(self.forcing.gammas, self.max_denominator)
            if not rep.passed:
                raise ValueError(f"scale ratios {self.forcing.gammas} are resonant: "
                                 f"witness {rep.witness}")
        if self.collar is not None and self.collar < self.kernel.far_radius:
            raise ValueError(f"collar {self.collar} narrower than far radius {self.kernel.far_radius}")
        lo, hi = self.domain
        x = np.linspace(lo, hi, 257)
        self.controls.check_lipschitz(x)
        self.coeffs.validate(x / self.eps1)

    def grid(self) -> GridFunction:
        lo, hi = self.domain
        collar = self.kernel.far_radius + 1.0 if self.collar is None else self.collar
        return exterior_grid(lo, hi, self.kernel.h, collar, outside=_as_callable(self.exterior))

    def g(self, x) -> np.ndarray:
        if isinstance(self.forcing, MultiscaleForcing):
            return self.forcing.evaluate(x, self.eps1)
        return np.asarray(self.forcing(x), dtype=float)


def _exterior_scheme(spec: EpsProblemSpec, u: GridFunction, src) -> tuple[_Scheme, np.ndarray]:
    mask = u.interior
    inner = np.flatnonzero(mask)
    pos = -np.ones(u.n, dtype=int)
    pos[inner] = np.arange(inner.size)
    x = u.nodes[inner]
    A, B = levy_matrix_exterior(spec.kernel, u)
    lsrc = B @ u.values[~mask]
    right, left = pos[inner + 1], pos[inner - 1]
    scheme = _Scheme(
        diag0=np.ones(inner.size), Lin=A, lsrc=lsrc, a=spec.coeffs.values(x / spec.eps1),
        beta=spec.controls.drift_values(x), costs=np.asarray(spec.controls.costs),
        h=u.h, right=right, left=left, right_val=u.values[inner + 1],
        left_val=u.values[inner - 1], src=src,
    )
    return scheme, inner


def solve_eps_problem(spec: EpsProblemSpec, tol: float = 1e-9, max_iter: int = 2000) -> GridFunction:
    """Solution on the full node array (exterior nodes carry the data)."""
    spec.validate()
    u = spec.grid()
    inner = np.flatnonzero(u.interior)
    scheme, _ = _exterior_scheme(spec, u, spec.g(u.nodes[inner]))
    v, res, hist, pol, _ = scheme.solve(tol, max_iter)
    u.values[inner] = v
    u.info = {"residual": res, "history": hist, "policy": pol,
              "tail_bound": spec.kernel.tail_bound(float(np.max(np.abs(u.values))))}
    return u


def eps_residual(spec: EpsProblemSpec, u: GridFunction) -> np.ndarray:
    inner = np.flatnonzero(u.interior)
    scheme, _ = _exterior_scheme(spec, u, spec.g(u.nodes[inner]))
    return scheme.residual(u.values[inner])


# ---------------------------------------------------------------------------
# effective equation  u + Ibar(x, u', I[u]) = 0
# ---------------------------------------------------------------------------

def solve_effective(table, kernel: LevyKernel, domain=(0.0, 1.0), exterior=0.0,
                    collar: float | None = None, tol: float = 1e-9, max_iter: int = 50) -> GridFunction:
    """Newton iteration on the monotone scheme for the homogenized equation.

    The gradient enters through a Lax-Friedrichs flux with viscosity equal to
    the table's largest ``|dIbar/dp|``; the jump argument is ``I[u]`` from the
    same kernel as the oscillating problem.
    """
    from .effective_operator import check_subellipticity

    rep = check_subellipticity(table)
    if not rep.passed:
        raise ValueError(f"effective operator is not subelliptic: {rep.worst}")
    lo, hi = domain
    R = kernel.far_radius + 1.0 if collar is None else collar
    u = exterior_grid(lo, hi, kernel.h, R, outside=_as_callable(exterior))
    mask = u.interior
    inner = np.flatnonzero(mask)
    A, B = levy_matrix_exterior(kernel, u)
    lsrc = B @ u.values[~mask]
    x = u.nodes[inner]
    h = u.h
    n = inner.size
    theta = table.p_lipschitz()
    vals = u.values.copy()
    # start from the exterior mean to stay inside the table box
    v = np.full(n, float(np.mean(vals[~mask])))
    history = []

    def G(v):
        full = vals.copy()
        full[inner] = v
        pp = (full[inner + 1] - v) / h
        pm = (v - full[inner - 1]) / h
        Iu = A @ v + lsrc
        val, dp, dI = table.query_with_grad(x, 0.5 * (pp + pm), Iu)
        return v + val - 0.5 * theta * (pp - pm), pp, pm, dp, dI

    rows = np.arange(n)
    for it in range(max_iter):
        Gv, pp, pm, dp, dI = G(v)
        res = float(np.max(np.abs(Gv)))
        history.append(res)
        if res <= tol:
            break
        # Jacobian: identity + dIbar/dp * central diff - theta/2 * second diff + dIbar/dI * A
        J = np.eye(n) + dI[:, None] * A
        c_r = 0.5 * dp / h - 0.5 * theta / h
        c_l = -0.5 * dp / h - 0.5 * theta / h
        J[rows, rows] += theta / h
        has_r = mask[inner + 1]
        has_l = mask[inner - 1]
        J[rows[has_r], rows[has_r] + 1] += c_r[has_r]
        J[rows[has_l], rows[has_l] - 1] += c_l[has_l]
        step = np.linalg.solve(J, -Gv)
        t = 1.0
        while t > 1e-4:
            cand = v + t * step
            try:
                rc = float(np.max(np.abs(G(cand)[0])))
            except ValueError:
                rc = np.inf
            if rc < res or rc <= tol:
                break
            t *= 0.5
        v = cand
    else:
        Gv = G(v)[0]
        history.append(float(np.max(np.abs(Gv))))
    if history[-1] > tol:
        raise SolverNotConverged("effective Newton iteration did not converge", history)
    u.values[inner] = v
    u.info = {"residual": history[-1], "history": history}
    return u


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    passed: bool
    precondition_ok: bool
    max_violation: float
    violating_nodes: list = field(default_factory=list)
    sub_residual_max: float = 0.0
    super_residual_min: float = 0.0


def check_comparison(sub, sup, residual: Callable, tol: float = 1e-9) -> ComparisonReport:
    """Check ``sub <= sup + 2 tol`` given residual signs ``F(sub) <= tol``, ``F(sup) >= -tol``."""
    a = sub.values if isinstance(sub, GridFunction) else np.asarray(sub, dtype=float)
    b = sup.values if isinstance(sup, GridFunction) else np.asarray(sup, dtype=float)
    rs = np.asarray(residual(sub))
    rS = np.asarray(residual(sup))
    pre = bool(rs.max() <= tol and rS.min() >= -tol)
    gap = a - b
    bad = np.flatnonzero(gap > 2 * tol)
    return ComparisonReport(
        passed=bool(pre and bad.size == 0), precondition_ok=pre,
        max_violation=float(max(gap.max(), 0.0)), violating_nodes=bad.tolist(),
        sub_residual_max=float(rs.max()), super_residual_min=float(rS.min()),
    )


@dataclass
class MaxPrincipleReport:
    oscillation: float
    constant_ok: bool
    bump_height: float
    min_shift: float
    max_shift: float
    sign_consistent: bool

    @property
    def passed(self) -> bool:
        return self.constant_ok and self.sign_consistent


def strong_max_principle_check(kernel: LevyKernel, n: int, g0: float = 3.0, lam: float = 1.0,
                               bump_height: float = 1.0, bump_fraction: float = 0.01,
                               a: float = 1.0, tol: float = 1e-9) -> MaxPrincipleReport:
    """Constant data gives a constant solution; a localized bump moves every node."""
    coeffs = CoefficientField(a)
    base = DiscountedProblem(n, kernel, ControlField.none(), coeffs, lambda y: np.full(y.shape, g0))
    v0 = solve_discounted(base, lam, tol)
    osc = float(v0.values.max() - v0.values.min())
    width = max(1, int(round(bump_fraction * n)))
    bump = np.zeros(n)
    bump[:width] = bump_height
    v1 = solve_discounted(base, lam, tol, extra_source=bump)
    shift = v1.values - v0.values
    if bump_height > 0:
        ok = bool(np.all(shift > 0))
    elif bump_height < 0:
        ok = bool(np.all(shift < 0))
    else:
        ok = bool(np.all(shift == 0))
    return MaxPrincipleReport(osc, osc <= 10 * tol, bump_height, float(shift.min()),
                              float(shift.max()), ok)
