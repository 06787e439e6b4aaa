"""
Quadrature for the compensated symmetric alpha-stable jump operator

    I[u](x) = int [u(x+z) - u(x) - 1_{|z|<=1} z u'(x)] |z|^{-1-alpha} dz

in one space dimension, plus its push-forward along a line in a 2-torus.

Pairing +z with -z removes the gradient compensator identically, so every
evaluation is written as a sum of nonnegative weights times symmetric second
differences ``u(x+jh) + u(x-jh) - 2u(x)``. The weight for offset ``j`` comes
from product integration of ``q(z) = delta u(z) / z**2``, interpolated
piecewise linearly between nodes and held constant on ``[0, h]``. This is exact
for quadratics on the near field and keeps every weight positive, so the
discrete operator is monotone and annihilates constants bit-for-bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .grid import GridFunction, Torus

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class InsufficientCollarError(ValueError):
    """Exterior data does not reach every far-field quadrature node."""


@dataclass(frozen=True)
class LiftedDirection:
    """Scale reciprocals ``(1/gamma_1, ..., 1/gamma_M)`` for the line ``Gamma z``."""

    gammas: tuple

    def __post_init__(self):
        g = tuple(float(v) for v in np.atleast_1d(self.gammas))
        object.__setattr__(self, "gammas", g)
        if not 1 <= len(g) <= 2:
            raise ValueError(f"lifted torus dimension M={len(g)} not supported (M <= 2)")
        if any(v == 0 or not np.isfinite(v) for v in g):
            raise ValueError("direction components must be finite and nonzero")

    @property
    def M(self) -> int:
        return len(self.gammas)


@dataclass
class LevyKernel:
    alpha: float
    h: float
    nu: float
    far_radius: float
    near_weights: np.ndarray
    far_weights: np.ndarray
    tail_constant: float
    fold_tail: bool = True
    _torus_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def weights(self) -> np.ndarray:
        """Pair weights for offsets ``1..J`` (``J = far_radius / h``)."""
        return np.concatenate([self.near_weights, self.far_weights])

    @property
    def n_near(self) -> int:
        return self.near_weights.size

    @property
    def n_offsets(self) -> int:
        return self.near_weights.size + self.far_weights.size

    def tail_bound(self, sup_norm: float) -> float:
        """Bound on the contribution of jumps longer than ``far_radius``."""
        return self.tail_constant * sup_norm

    def torus_weights(self, n: int) -> np.ndarray:
        """Periodized weights ``W[r]`` acting on ``u[i+r] - u[i]`` for an ``n``-node torus.

        With ``fold_tail`` the jumps beyond ``far_radius`` are wrapped onto the
        torus in closed form (Hurwitz zeta), so nothing is truncated.
        """
        key = int(n)
        if key not in self._torus_cache:
            self._torus_cache[key] = _periodize(self, key)
        return self._torus_cache[key]


def _cell_moments(h: float, alpha: float, J: int) -> np.ndarray:
    """c_j = int hat_j(z) z^{1-alpha} dz for j = 1..J (hat_J truncated at J h)."""
    p = 2.0 - alpha
    c = np.zeros(J + 1)
    # [0, h]: q held at q_1
    c[1] += h**p / p
    # cell [k h, (k+1) h] feeds node k (falling) and node k+1 (rising)
    k = np.arange(1, J)
    a = k * h
    t = 0.5 * (_GL_NODES[None, :] + 1.0)
    z = a[:, None] + h * t
    wz = 0.5 * h * _GL_WEIGHTS[None, :] * z ** (1.0 - alpha)
    c[1:J] += np.sum(wz * (1.0 - t), axis=1)
    c[2:J + 1] += np.sum(wz * t, axis=1)
    return c[1:]


def build_kernel(alpha: float, h: float, nu: float | None = None,
                 far_radius: float = 2.0, fold_tail: bool = True) -> LevyKernel:
    """Precompute the pair weights for step ``h``.

    ``nu`` defaults to ``4 h``. Both ``nu`` and ``far_radius`` are rounded to
    the nearest multiple of ``h``.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    if nu is None:
        nu = 4.0 * h
    if nu < h * (1 - 1e-12):
        raise ValueError(f"near radius nu={nu} is below the grid spacing h={h}")
    if far_radius < 1.0:
        raise ValueError(f"far_radius must be >= 1, got {far_radius}")
    m = max(1, int(round(nu / h)))
    J = max(m, int(round(far_radius / h)))
    c = _cell_moments(h, alpha, J)
    W = c / (np.arange(1, J + 1) * h) ** 2
    R = J * h
    return LevyKernel(
        alpha=float(alpha), h=float(h), nu=m * h, far_radius=R,
        near_weights=W[:m].copy(), far_weights=W[m:].copy(),
        tail_constant=4.0 * R ** (-alpha) / alpha, fold_tail=fold_tail,
    )


def _periodize(kernel: LevyKernel, n: int) -> np.ndarray:
    W = kernel.weights
    J = W.size
    out = np.zeros(n)
    j = np.arange(1, J + 1)
    np.add.at(out, j % n, W)
    np.add.at(out, (-j) % n, W)
    if kernel.fold_tail:
        a, h = kernel.alpha, kernel.h
        R = J * h
        # trapezoid end correction at z = R, then h*K(jh) for j > J wrapped by residue
        half = 0.5 * h * R ** (-1.0 - a)
        out[J % n] += half
        out[(-J) % n] += half
        r = np.arange(n)
        j0 = r + n * ((J - r) // n + 1)          # first j > J with j = r mod n
        tail = h ** (-a) * n ** (-1.0 - a) * special.zeta(1.0 + a, j0 / n)
        out += tail + tail[(-r) % n]
    out[0] = 0.0
    return out


def _check_collar(kernel: LevyKernel, u: GridFunction):
    nc = u.ncollar
    need = kernel.n_offsets
    if nc < need:
        raise InsufficientCollarError(
            f"exterior collar of {nc * u.h:g} does not cover the far radius "
            f"{kernel.far_radius:g}: missing {(need - nc) * u.h:g}")


def apply_levy(kernel: LevyKernel, u: GridFunction) -> np.ndarray:
    """Evaluate ``I[u]`` at the interior nodes of ``u`` (all nodes on a torus)."""
    if not np.isclose(u.h, kernel.h, rtol=1e-12, atol=0.0):
        raise ValueError(f"kernel spacing {kernel.h} differs from grid spacing {u.h}")
    v = u.values
    if isinstance(u.geometry, Torus):
        Wp = kernel.torus_weights(u.n)
        out = np.zeros(u.n)
        for r in range(1, u.n):
            if Wp[r] != 0.0:
                out += Wp[r] * (np.roll(v, -r) - v)
        return out
    _check_collar(kernel, u)
    idx = np.flatnonzero(u.interior)
    W = kernel.weights
    out = np.zeros(idx.size)
    base = v[idx]
    for j in range(1, W.size + 1):
        out += W[j - 1] * ((v[idx + j] - base) + (v[idx - j] - base))
    return out


def levy_matrix_torus(kernel: LevyKernel, n: int) -> np.ndarray:
    """Dense circulant matrix of the periodic operator (rows sum to zero)."""
    Wp = kernel.torus_weights(n)
    i = np.arange(n)
    L = Wp[(i[None, :] - i[:, None]) % n]
    L[i, i] = -Wp.sum()
    return L


def levy_matrix_exterior(kernel: LevyKernel, u: GridFunction):
    """Interior block ``A`` and exterior coupling ``B`` with ``I[u] = A u_in + B u_out``.

    Row sums of ``A`` plus those of ``B`` vanish.
    """
    _check_collar(kernel, u)
    mask = u.interior
    idx = np.flatnonzero(mask)
    full = np.zeros((idx.size, u.n))
    W = kernel.weights
    rows = np.arange(idx.size)
    for j in range(1, W.size + 1):
        full[rows, idx + j] += W[j - 1]
        full[rows, idx - j] += W[j - 1]
    full[rows, idx] -= 2.0 * W.sum()
    return full[:, mask], full[:, ~mask]


# ---------------------------------------------------------------------------
# lifted operator on T^M along Gamma z
# ---------------------------------------------------------------------------

def _shift_periodic(w: np.ndarray, s) -> np.ndarray:
    """Periodic multilinear interpolation of ``w`` at ``y + s`` on the unit M-torus."""
    out = w
    for axis, sa in enumerate(s):
        n = w.shape[axis]
        t = sa * n
        k = np.floor(t)
        frac = t - k
        k = int(k) % n
        a = np.roll(out, -k, axis=axis)
        if frac != 0.0:
            out = (1.0 - frac) * a + frac * np.roll(a, -1, axis=axis)
        else:
            out = a
    return out


def lifted_stencil(kernel: LevyKernel, direction: LiftedDirection, shape) -> list:
    """List of ``(weight, shift)`` pairs realizing the lifted operator on a grid of ``shape``.

    Near-field second differences are taken at the wide offset ``nu`` (quadratic
    profile assumed below it) so sub-cell interpolation kinks are not amplified
    by the singular weights.
    """
    if len(shape) != direction.M:
        raise ValueError(f"grid dimension {len(shape)} does not match direction M={direction.M}")
    g = np.asarray(direction.gammas)
    W = kernel.weights
    m = kernel.n_near
    h = kernel.h
    near_mass = np.sum(W[:m] * (np.arange(1, m + 1) / m) ** 2)
    stencil = [(near_mass, g * (m * h))]
    for j in range(m + 1, W.size + 1):
        stencil.append((W[j - 1], g * (j * h)))
    return stencil


def apply_levy_lifted(kernel: LevyKernel, w: np.ndarray, direction: LiftedDirection) -> np.ndarray:
    """``y -> int [w(y + Gamma z) - w(y) - 1_{|z|<=1} <Gamma z, grad w(y)>] dq(z)`` on T^M.

    ``w`` holds samples on the unit M-torus (shape ``(n1,)`` or ``(n1, n2)``).
    Jumps are truncated at ``far_radius``; the line is dense in T^2 so no
    periodic folding is available.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim > 2:
        raise ValueError(f"lifted torus dimension M={w.ndim} not supported (M <= 2)")
    out = np.zeros_like(w)
    for weight, s in lifted_stencil(kernel, direction, w.shape):
        out += weight * ((_shift_periodic(w, s) - w) + (_shift_periodic(w, -s) - w))
    return out


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def analytic_symbol(alpha: float, k: float, radius: float | None = None) -> float:
    """sigma(alpha, k) = 2 int_0^R (1 - cos(2 pi k s)) s^{-1-alpha} ds by adaptive quadrature.

    ``radius=None`` integrates to infinity. ``k`` may be any nonnegative real.
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if k < 0:
        raise ValueError("mode index must be nonnegative")
    if k == 0:
        return 0.0
    om = 2.0 * np.pi * k
    R = np.inf if radius is None else float(radius)
    s0 = min(1.0 / k, R)
    # (1 - cos(om s)) / s^2 is smooth; the algebraic weight carries s^{1-alpha}
    head, _ = integrate.quad(lambda s: 2.0 * np.sinc(om * s / (2.0 * np.pi)) ** 2 * (om / 2.0) ** 2,
                             0.0, s0, weight="alg", wvar=(1.0 - alpha, 0.0),
                             epsabs=1e-14, epsrel=1e-13, limit=200)
    if s0 >= R:
        return 2.0 * head
    kern = lambda s: s ** (-1.0 - alpha)
    if np.isinf(R):
        mass = s0 ** (-alpha) / alpha
        # QAWF flags slow cycle convergence at small alpha although the sum is accurate
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            osc, _ = integrate.quad(kern, s0, np.inf, weight="cos", wvar=om, epsabs=1e-14, limlst=100)
    else:
        mass = (s0 ** (-alpha) - R ** (-alpha)) / alpha
        osc, _ = integrate.quad(kern, s0, R, weight="cos", wvar=om, epsabs=1e-14,
                                epsrel=1e-13, limit=400)
    return 2.0 * (head + mass - osc)
