"""Quasi-periodic and almost-periodic forcings built from trigonometric terms.

A forcing is ``g(y) = c0 + sum_k A_k cos(2 pi <n_k, ybar> + phi_k)`` with the
lifted argument ``ybar_i = gammas[i] * y / eps1 (mod 1)``. ``gammas`` stores the
reciprocal scale ratios ``eps1 / eps_i``; ``gammas[0]`` is 1 by convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class TrigTerm:
    amplitude: float
    freqs: tuple
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "freqs", tuple(int(k) for k in self.freqs))
        if not math.isfinite(self.amplitude):
            raise ValueError(f"non-finite amplitude {self.amplitude}")

    @property
    def scales(self) -> set:
        return {i for i, k in enumerate(self.freqs) if k != 0}


def term(amplitude: float, freq: int, scale: int, M: int, phase: float = 0.0) -> TrigTerm:
    """``amplitude * cos(2 pi freq * ybar[scale] + phase)`` on an M-dimensional lift."""
    f = [0] * M
    f[scale] = freq
    return TrigTerm(float(amplitude), tuple(f), phase)


@dataclass
class MultiscaleForcing:
    terms: list
    gammas: tuple
    constant: float = 0.0
    kind: str = "quasi"
    tail_bound: float = 0.0
    theta0: float = 1.0

    def __post_init__(self):
        self.gammas = tuple(float(g) for g in self.gammas)
        if any(g == 0 or not math.isfinite(g) for g in self.gammas):
            raise ValueError("scale reciprocals must be finite and nonzero")
        M = len(self.gammas)
        for t in self.terms:
            if len(t.freqs) != M:
                raise ValueError(f"term {t} does not match lift dimension {M}")
        if self.kind not in ("quasi", "almost"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")

    @property
    def M(self) -> int:
        return len(self.gammas)

    @property
    def holder_C(self) -> float:
        """Componentwise Lipschitz constant (Holder exponent 1)."""
        if not self.terms:
            return 0.0
        return max(sum(abs(t.amplitude) * 2 * math.pi * abs(t.freqs[i]) for t in self.terms)
                   for i in range(self.M))

    def sup_bound(self) -> float:
        return abs(self.constant) + sum(abs(t.amplitude) for t in self.terms)

    def mean(self) -> float:
        """Mean over the lifted torus (the constant plus all zero-frequency terms)."""
        return self.constant + sum(t.amplitude * math.cos(t.phase)
                                   for t in self.terms if not t.scales)

    def lifted(self, ybar) -> np.ndarray:
        """Evaluate ``g_M`` on the torus; ``ybar`` has trailing axis of length M."""
        ybar = np.asarray(ybar, dtype=float)
        out = np.full(ybar.shape[:-1], float(self.constant))
        for t in self.terms:
            ph = np.zeros(ybar.shape[:-1])
            for i, k in enumerate(t.freqs):
                if k:
                    ph = ph + k * ybar[..., i]
            out = out + t.amplitude * np.cos(2 * math.pi * ph + t.phase)
        return out

    def lift_point(self, y, eps1: float = 1.0) -> np.ndarray:
        """``ybar_i = gammas[i] * y / eps1`` reduced mod 1 per component."""
        s = np.asarray(y, dtype=float) / eps1
        return np.stack([np.mod(g * s, 1.0) for g in self.gammas], axis=-1)

    def evaluate(self, y, eps1: float = 1.0) -> np.ndarray:
        return self.lifted(self.lift_point(y, eps1))

    __call__ = evaluate

    def periodic_approximant(self, period: float) -> "MultiscaleForcing":
        """Same terms with each reciprocal rounded so the forcing has period ``period``."""
        g = tuple(max(1, round(gi * period)) / period for gi in self.gammas)
        return MultiscaleForcing(list(self.terms), g, self.constant, self.kind,
                                 self.tail_bound, self.theta0)

    def shifted(self, kappa: float) -> "MultiscaleForcing":
        return MultiscaleForcing(list(self.terms), self.gammas, self.constant + kappa,
                                 self.kind, self.tail_bound, self.theta0)

    def check_holder(self, n_pairs: int = 2000, seed: int = 0) -> float:
        """Worst ratio of sampled componentwise increments to ``holder_C |dy|^theta0``."""
        rng = np.random.default_rng(seed)
        C = self.holder_C
        if C == 0:
            return 0.0
        worst = 0.0
        for i in range(self.M):
            y = rng.random((n_pairs, self.M))
            y2 = y.copy()
            y2[:, i] = rng.random(n_pairs)
            d = np.abs(y[:, i] - y2[:, i])
            d = np.minimum(d, 1 - d)
            ok = d > 0
            ratio = np.abs(self.lifted(y) - self.lifted(y2))[ok] / (C * d[ok] ** self.theta0)
            worst = max(worst, float(ratio.max(initial=0.0)))
        return worst


def constant_forcing(value: float, M: int = 1) -> MultiscaleForcing:
    return MultiscaleForcing([], (1.0,) + tuple(GOLDEN ** -(i) for i in range(1, M)), value)


# ---------------------------------------------------------------------------
# non-resonance
# ---------------------------------------------------------------------------

@dataclass
class NonResonanceReport:
    passed: bool
    values: tuple
    max_denominator: int
    witness: tuple | None = None
    residual: float | None = None
    scope: str = ("finite certificate: no integer relation with coefficients bounded by "
                  "max_denominator; not a proof of irrationality")


def check_nonresonance(values, max_denominator: int = 50, rtol: float = 1e-12) -> NonResonanceReport:
    """Exhaustive search for ``sum a_i v_i = 0`` with integer ``|a_i| <= max_denominator``.

    The last coefficient is solved for by rounding, so the search costs
    ``(2D+1)^(k-1)`` evaluations.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a nonempty vector of values")
    if np.any(v == 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be finite and nonzero")
    if max_denominator < 2:
        raise ValueError("max_denominator must be at least 2")
    D = int(max_denominator)
    vals = tuple(float(x) for x in v)
    if v.size == 1:
        return NonResonanceReport(True, vals, D)
    # order by magnitude so the solved coefficient has the best conditioning
    order = np.argsort(-np.abs(v), kind="stable")
    vs = v[order]
    head = vs[:-1]
    last = vs[-1]
    rng = np.arange(-D, D + 1)
    scale = np.max(np.abs(v)) * D
    for combo_block in _blocks(rng, head.size):
        s = combo_block @ head
        a_last = np.rint(-s / last)
        ok = np.abs(a_last) <= D
        res = np.abs(s + a_last * last)
        nontrivial = np.any(combo_block != 0, axis=1) | (a_last != 0)
        hit = ok & nontrivial & (res <= rtol * scale)
        if np.any(hit):
            k = int(np.flatnonzero(hit)[0])
            coeffs = np.append(combo_block[k], a_last[k]).astype(int)
            g = math.gcd(*[abs(int(c)) for c in coeffs])
            witness = np.zeros(v.size, dtype=int)
            witness[order] = coeffs // max(g, 1)
            if witness[np.flatnonzero(witness)[0]] < 0:
                witness = -witness
            return NonResonanceReport(False, vals, D, tuple(int(c) for c in witness),
                                      float(res[k]))
    return NonResonanceReport(True, vals, D)


def _blocks(rng: np.ndarray, k: int, block: int = 200_000):
    if k == 0:
        yield np.zeros((1, 0))
        return
    total = rng.size ** k
    for start in range(0, total, block):
        idx = np.arange(start, min(total, start + block))
        cols = []
        for _ in range(k):
            cols.append(rng[idx % rng.size])
            idx = idx // rng.size
        yield np.stack(cols[::-1], axis=1).astype(float)


# ---------------------------------------------------------------------------
# truncations of almost-periodic series
# ---------------------------------------------------------------------------

def build_trig_truncation(series: MultiscaleForcing, M: int):
    """Keep the terms living on the first ``M`` scales; return ``(g_M, c_M)``.

    ``c_M`` is the sum of dropped amplitudes plus the series' declared tail,
    which bounds ``sup |g - g_M|``.
    """
    amps = np.array([t.amplitude for t in series.terms], dtype=float)
    if not np.all(np.isfinite(amps)) or not math.isfinite(series.tail_bound) \
            or not math.isfinite(float(np.abs(amps).sum())):
        raise ValueError("series coefficients are not absolutely summable")
    if M < 1:
        raise ValueError("truncation order must be at least 1")
    kept, dropped = [], 0.0
    for t in series.terms:
        if all(i < M for i in t.scales):
            kept.append(t)
        else:
            dropped += abs(t.amplitude)
    g_M = MultiscaleForcing(kept, series.gammas, series.constant, series.kind, 0.0, series.theta0)
    return g_M, dropped + series.tail_bound


def geometric_series(n_terms: int = 5, gammas=None, ratio: float = 0.5) -> MultiscaleForcing:
    """``sum_{k=1..n} ratio^k cos(2 pi ybar_k)`` on ``n`` non-resonant scales.

    Default reciprocals are ``1, sqrt(2), sqrt(3), sqrt(5), sqrt(7), ...``.
    """
    if gammas is None:
        primes = [p for p in range(2, 200) if all(p % q for q in range(2, p))]
        gammas = (1.0,) + tuple(math.sqrt(p) for p in primes[: n_terms - 1])
    terms = [term(ratio ** (k + 1), 1, k, n_terms) for k in range(n_terms)]
    return MultiscaleForcing(terms, tuple(gammas[:n_terms]), kind="almost")


# ---------------------------------------------------------------------------
# equidistribution of the line (t, t/gamma)
# ---------------------------------------------------------------------------

@dataclass
class OrbitReport:
    covered: bool
    covering_time: float | None
    cells: int
    visited: int
    t_max: float
    history: list = field(default_factory=list)
    witness: tuple | None = None
    message: str = ""


def orbit_density(gamma: float, delta: float, t_max: float = 1e4, start=(0.0, 0.0),
                  max_denominator: int = 50) -> OrbitReport:
    """First time the orbit ``start + (t, t/gamma) mod 1`` has met every cell of a delta-mesh.

    Cell crossings are enumerated exactly (a 2-D DDA walk), so the reported time
    is the entry time into the last unvisited cell. ``history`` records
    ``(t, visited)`` at each new cell.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    nr = check_nonresonance((1.0, gamma), max_denominator)
    ncell = int(round(1.0 / delta))
    total = ncell * ncell
    if not nr.passed:
        return OrbitReport(False, None, total, 0, t_max, witness=nr.witness,
                           message=f"rational slope: integer relation {nr.witness} "
                                   f"closes the orbit on a periodic line")
    vx, vy = 1.0, 1.0 / gamma
    x0, y0 = start[0] % 1.0, start[1] % 1.0
    seen = np.zeros((ncell, ncell), dtype=bool)
    cx, cy = int(x0 * ncell) % ncell, int(y0 * ncell) % ncell
    seen[cx, cy] = True
    visited = 1
    history = [(0.0, 1)]
    sx = 1 if vx > 0 else -1
    sy = 1 if vy > 0 else -1
    # next crossing times along each axis
    def first_cross(p, v, c):
        edge = (c + (1 if v > 0 else 0)) / ncell
        return (edge - p) / v
    tx = first_cross(x0, vx, cx)
    ty = first_cross(y0, vy, cy)
    dtx = 1.0 / (ncell * abs(vx))
    dty = 1.0 / (ncell * abs(vy))
    t = 0.0
    while visited < total:
        if tx <= ty:
            t = tx
            tx += dtx
            cx = (cx + sx) % ncell
        else:
            t = ty
            ty += dty
            cy = (cy + sy) % ncell
        if t > t_max:
            return OrbitReport(False, None, total, visited, t_max, history,
                               message=f"t_max={t_max} insufficient")
        if not seen[cx, cy]:
            seen[cx, cy] = True
            visited += 1
            history.append((t, visited))
    return OrbitReport(True, t, total, visited, t_max, history)
