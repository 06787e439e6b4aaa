"""Sampled real functions on a periodic cell or on an interval with exterior data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class Torus:
    """Periodic geometry; node ``n`` is identified with node 0."""

    period: float = 1.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"torus period must be positive, got {self.period}")


@dataclass(frozen=True)
class ExteriorData:
    """Open interval ``(lo, hi)`` with prescribed values on a collar outside it.

    The full node array runs from ``lo - collar`` to ``hi + collar``; the
    interior unknowns are the nodes strictly inside ``(lo, hi)``.
    """

    lo: float
    hi: float
    collar: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"empty domain ({self.lo}, {self.hi})")
        if self.collar < 0:
            raise ValueError("collar width must be nonnegative")


Geometry = Union[Torus, ExteriorData]


@dataclass
class GridFunction:
    """Real samples on a uniform grid.

    For a :class:`Torus` the ``n`` nodes are ``k * h`` with ``h = period / n``.
    For :class:`ExteriorData` the nodes are ``lo - ncollar*h + k*h`` covering the
    collar on both sides; ``interior`` marks the unknowns.
    """

    values: np.ndarray
    geometry: Geometry
    h: float
    info: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("GridFunction holds one-dimensional samples")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction values must be finite")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def ncollar(self) -> int:
        if isinstance(self.geometry, Torus):
            return 0
        return collar_nodes(self.geometry, self.h)

    @property
    def nodes(self) -> np.ndarray:
        k = np.arange(self.n)
        if isinstance(self.geometry, Torus):
            return k * self.h
        return self.geometry.lo + (k - self.ncollar) * self.h

    @property
    def interior(self) -> np.ndarray:
        """Boolean mask of the unknown nodes."""
        if isinstance(self.geometry, Torus):
            return np.ones(self.n, dtype=bool)
        x = self.nodes
        tol = 1e-9 * self.h
        return (x > self.geometry.lo + tol) & (x < self.geometry.hi - tol)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self, values=None) -> "GridFunction":
        v = self.values.copy() if values is None else values
        return GridFunction(v, self.geometry, self.h)


def collar_nodes(geom: ExteriorData, h: float) -> int:
    return int(np.ceil(geom.collar / h - 1e-9))


def torus_grid(n: int, period: float = 1.0, f: Callable | None = None) -> GridFunction:
    """Grid function on ``n`` torus nodes, sampled from ``f`` (zero if omitted)."""
    if n < 2:
        raise ValueError("need at least two torus nodes")
    h = period / n
    x = np.arange(n) * h
    vals = np.zeros(n) if f is None else np.broadcast_to(np.asarray(f(x), dtype=float), (n,))
    return GridFunction(np.array(vals, dtype=float), Torus(period), h)


def exterior_grid(lo: float, hi: float, h: float, collar: float,
                  inside: Callable | None = None, outside: Callable | None = None) -> GridFunction:
    """Grid on ``(lo, hi)`` plus collars; ``outside`` samples the exterior data."""
    ncell = (hi - lo) / h
    if abs(ncell - round(ncell)) > 1e-9 * max(1.0, ncell):
        raise ValueError(f"grid spacing {h} does not divide the domain length {hi - lo}")
    geom = ExteriorData(lo, hi, collar)
    nc = collar_nodes(geom, h)
    n = int(round(ncell)) + 1 + 2 * nc
    gf = GridFunction(np.zeros(n), geom, h)
    x = gf.nodes
    mask = gf.interior
    vals = np.zeros(n)
    if outside is not None:
        vals[~mask] = np.broadcast_to(np.asarray(outside(x[~mask]), dtype=float), ((~mask).sum(),))
    if inside is not None:
        vals[mask] = np.broadcast_to(np.asarray(inside(x[mask]), dtype=float), (mask.sum(),))
    gf.values = vals
    return gf
