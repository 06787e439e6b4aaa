"""Tabulated effective operator ``Ibar(x, p, I) = -d_{x,p,I}`` with trilinear queries."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .ergodic_cell import DEFAULT_SCHEDULE, CellProblemSpec, ergodic_constant

logger = logging.getLogger(__name__)

AXES = ("x", "p", "I")


class OutOfTableRange(ValueError):
    pass


@dataclass
class EffectiveOperatorTable:
    x_grid: np.ndarray
    p_grid: np.ndarray
    I_grid: np.ndarray
    values: np.ndarray
    uncertainty: np.ndarray
    a0: float
    failed: list = field(default_factory=list)

    def __post_init__(self):
        self.x_grid, self.p_grid, self.I_grid = (np.asarray(g, dtype=float)
                                                 for g in (self.x_grid, self.p_grid, self.I_grid))
        shape = (self.x_grid.size, self.p_grid.size, self.I_grid.size)
        self.values = np.asarray(self.values, dtype=float).reshape(shape)
        self.uncertainty = np.asarray(self.uncertainty, dtype=float).reshape(shape)
        for name, g in zip(AXES, self.grids):
            if g.size == 0 or np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} grid must be nonempty and strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("table values must be finite")

    @property
    def grids(self):
        return (self.x_grid, self.p_grid, self.I_grid)

    @property
    def partial(self) -> bool:
        return bool(self.failed)

    @property
    def box(self):
        return tuple((float(g[0]), float(g[-1])) for g in self.grids)

    def _locate(self, g: np.ndarray, q: np.ndarray):
        if g.size == 1:
            return np.zeros(q.shape, dtype=int), np.zeros(q.shape), np.zeros(q.shape)
        k = np.clip(np.searchsorted(g, q, side="right") - 1, 0, g.size - 2)
        dx = g[k + 1] - g[k]
        return k, (q - g[k]) / dx, 1.0 / dx

    def _check_box(self, qs):
        tol = 1e-12
        for name, g, q in zip(AXES, self.grids, qs):
            span = max(1.0, abs(g[0]), abs(g[-1]))
            bad = (q < g[0] - tol * span) | (q > g[-1] + tol * span)
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                triple = tuple(float(np.ravel(a)[i]) for a in qs)
                raise OutOfTableRange(
                    f"query (x, p, I) = {triple} leaves the table box: {name} outside "
                    f"[{g[0]:g}, {g[-1]:g}]")

    def query_with_grad(self, x, p, I):
        """Trilinear value and its ``p`` and ``I`` derivatives (cell-wise)."""
        x, p, I = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, p, I)))
        self._check_box((x, p, I))
        (kx, tx, _), (kp, tp, ip), (kI, tI, iI) = (self._locate(g, q)
                                                   for g, q in zip(self.grids, (x, p, I)))
        V = self.values
        val = np.zeros(x.shape)
        dp = np.zeros(x.shape)
        dI = np.zeros(x.shape)
        sx, sp, sI = (min(1, g.size - 1) for g in self.grids)
        for cx, cp, cI in product((0, 1), repeat=3):
            if (cx and not sx) or (cp and not sp) or (cI and not sI):
                continue
            wx = tx if cx else 1 - tx
            wp = tp if cp else 1 - tp
            wI = tI if cI else 1 - tI
            node = V[kx + cx, kp + cp, kI + cI]
            val += wx * wp * wI * node
            dp += wx * (1 if cp else -1) * sp * ip * wI * node
            dI += wx * wp * (1 if cI else -1) * sI * iI * node
        return val, dp, dI

    def query(self, x, p, I):
        val = self.query_with_grad(x, p, I)[0]
        return float(val) if val.ndim == 0 else val

    def p_lipschitz(self) -> float:
        if self.p_grid.size < 2:
            return 0.0
        q = np.abs(np.diff(self.values, axis=1)) / np.diff(self.p_grid)[None, :, None]
        return float(q.max())

    def corrupted(self, index, delta: float) -> "EffectiveOperatorTable":
        """Copy with one entry shifted (negative controls)."""
        vals = self.values.copy()
        vals[tuple(index)] += delta
        return EffectiveOperatorTable(self.x_grid, self.p_grid, self.I_grid, vals,
                                      self.uncertainty.copy(), self.a0, list(self.failed))

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "p", "I", "value", "uncertainty"])
            for i, j, k in product(*(range(g.size) for g in self.grids)):
                w.writerow([repr(float(self.x_grid[i])), repr(float(self.p_grid[j])),
                            repr(float(self.I_grid[k])), repr(float(self.values[i, j, k])),
                            repr(float(self.uncertainty[i, j, k]))])

    @classmethod
    def load(cls, path, a0: float) -> "EffectiveOperatorTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"empty table file {path}")
        cols = {k: np.array([float(r[k]) for r in rows]) for k in ("x", "p", "I", "value", "uncertainty")}
        grids = [np.unique(cols[a]) for a in AXES]
        shape = tuple(g.size for g in grids)
        if np.prod(shape) != len(rows):
            raise ValueError("table file is not a full tensor grid")
        idx = tuple(np.searchsorted(g, cols[a]) for g, a in zip(grids, AXES))
        vals = np.full(shape, np.nan)
        unc = np.full(shape, np.nan)
        vals[idx] = cols["value"]
        unc[idx] = cols["uncertainty"]
        return cls(*grids, vals, unc, a0)


def tabulate(family: Callable[[float, float, float], CellProblemSpec], x_grid, p_grid, I_grid,
             a0: float, lambda_schedule=DEFAULT_SCHEDULE, tol: float = 1e-9,
             workers: int = 1) -> EffectiveOperatorTable:
    """Fill ``Ibar = -d`` by independent cell solves; flagged cells mark the table partial."""
    grids = [np.asarray(g, dtype=float) for g in (x_grid, p_grid, I_grid)]
    idx = list(product(*(range(g.size) for g in grids)))
    specs = [family(grids[0][i], grids[1][j], grids[2][k]) for i, j, k in idx]

    def run(spec):
        return ergodic_constant(spec, lambda_schedule, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, specs))
    else:
        results = [run(s) for s in specs]
    shape = tuple(g.size for g in grids)
    vals = np.empty(shape)
    unc = np.empty(shape)
    failed = []
    for ijk, res in zip(idx, results):
        vals[ijk] = -res.d
        unc[ijk] = res.uncertainty
        if res.flagged:
            failed.append(ijk)
    if failed:
        logger.warning("table is partial: non-ergodic cells at %s", failed)
    return EffectiveOperatorTable(*grids, vals, unc, a0, failed)


@dataclass
class SubellipticityReport:
    passed: bool
    worst_margin: float
    worst: tuple | None
    max_quotient: float

    def __str__(self) -> str:
        status = "pass" if self.passed else f"fail at {self.worst}"
        return f"subellipticity {status}: margin {self.worst_margin:.3e}, max slope {self.max_quotient:.6f}"


def check_subellipticity(table: EffectiveOperatorTable, atol: float = 1e-10) -> SubellipticityReport:
    """Check ``Ibar(I + J) <= Ibar(I) - a0 J + 2 (u_I + u_{I+J}) + atol`` on every fiber.

    ``atol`` only absorbs floating-point rounding of the equality case.

    ``worst_margin`` is the largest excess (negative when all pairs hold);
    ``worst`` names the higher-``I`` entry ``(x, p, I)`` of the worst pair.
    ``max_quotient`` is the largest adjacent difference quotient in ``I``.
    """
    V, U, Ig = table.values, table.uncertainty, table.I_grid
    nI = Ig.size
    if nI < 2:
        return SubellipticityReport(True, -np.inf, None, -np.inf)
    lo, hi = np.triu_indices(nI, 1)
    excess = (V[..., hi] - V[..., lo] + table.a0 * (Ig[hi] - Ig[lo])
              - 2 * (U[..., hi] + U[..., lo]))
    flat = int(np.argmax(excess))
    i, j, q = np.unravel_index(flat, excess.shape)
    worst_margin = float(excess[i, j, q])
    k = int(hi[q])
    quot = float(np.max(np.diff(V, axis=2) / np.diff(Ig)))
    worst = (float(table.x_grid[i]), float(table.p_grid[j]), float(Ig[k]))
    ok = worst_margin <= atol
    return SubellipticityReport(ok, worst_margin, None if ok else worst, quot)


@dataclass
class ContinuityReport:
    max_jump: dict
    suspects: list

    @property
    def passed(self) -> bool:
        return not self.suspects


def check_continuity(table: EffectiveOperatorTable, factor: float = 10.0) -> ContinuityReport:
    """Largest adjacent-sample jump per axis, plus a smell test for steps.

    A jump is suspect when its slope departs from both neighbouring slopes on
    the same line by more than ``factor`` times the local uncertainty (scaled
    back to a jump), i.e. when the table has a step rather than a trend. This is a heuristic with no modulus
    of continuity behind it.
    """
    V, U = table.values, table.uncertainty
    jumps, suspects = {}, []
    for ax, name in enumerate(AXES):
        n = V.shape[ax]
        if n < 2:
            jumps[name] = 0.0
            continue
        J = np.diff(V, axis=ax)
        jumps[name] = float(np.max(np.abs(J)))
        if n < 3:
            continue
        step = np.diff(table.grids[ax])
        shape = [1, 1, 1]
        shape[ax] = n - 1
        Q = J / step.reshape(shape)
        local = np.take(U, range(n - 1), axis=ax) + np.take(U, range(1, n), axis=ax)
        m = J.shape[ax]
        for s in range(m):
            nb = [t for t in (s - 1, s + 1) if 0 <= t < m]
            ref = np.stack([np.take(Q, t, axis=ax) for t in nb])
            dev = step[s] * np.min(np.abs(np.take(Q, s, axis=ax)[None] - ref), axis=0)
            bad = dev > factor * (np.take(local, s, axis=ax) + 1e-12)
            for pos in zip(*np.nonzero(bad)):
                ijk = list(pos)
                ijk.insert(ax, s)
                suspects.append((name, tuple(int(t) for t in ijk), float(np.take(J, s, axis=ax)[pos])))
    return ContinuityReport(jumps, suspects)
