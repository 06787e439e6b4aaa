"""INI study configuration.

Example::

    [problem]
    alpha = 1.0
    a = 1.0
    drifts = 0.0
    domain = 0.0, 1.0
    exterior = 1.0

    [forcing]
    kind = quasi
    gammas = 1, 1/golden
    terms = 1.0 1 0; 1.0 1 1

    [schedule]
    eps = 1/8, 1/16, 1/32

Real-valued entries accept decimals, fractions, ``golden``, ``pi`` and
``sqrt(n)``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ergodic_cell import DEFAULT_SCHEDULE
from .forcing import GOLDEN, MultiscaleForcing, geometric_series, term
from .hjb_solver import CoefficientField, ControlField, case_of


class ConfigError(ValueError):
    pass


_NAMED = {"golden": GOLDEN, "pi": math.pi}


def parse_real(text: str) -> float:
    s = text.strip().lower()
    if not s:
        raise ConfigError("empty number")
    if s.startswith("-"):
        return -parse_real(s[1:])
    if "/" in s:
        num, den = s.split("/", 1)
        return parse_real(num) / parse_real(den)
    if s in _NAMED:
        return _NAMED[s]
    m = re.fullmatch(r"sqrt\((.+)\)", s)
    if m:
        return math.sqrt(parse_real(m.group(1)))
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}") from None


def parse_list(text: str) -> list:
    return [parse_real(t) for t in text.split(",") if t.strip()]


@dataclass
class StudyConfig:
    alpha: float = 1.0
    a: float = 1.0
    a_osc: float = 0.0
    drifts: list = field(default_factory=lambda: [0.0])
    costs: list | None = None
    domain: tuple = (0.0, 1.0)
    exterior: float = 1.0
    far_radius: float = 2.0
    nu_cells: int = 4
    forcing_kind: str = "quasi"
    gammas: tuple = (1.0, 1.0 / GOLDEN)
    terms: list = field(default_factory=lambda: [(1.0, 1, 0), (1.0, 1, 1)])
    forcing_constant: float = 0.0
    series_terms: int = 5
    series_ratio: float = 0.5
    eps_schedule: list = field(default_factory=lambda: [1 / 8, 1 / 16, 1 / 32])
    lambda_schedule: list = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    M_schedule: list = field(default_factory=lambda: [1, 3, 5])
    h: float | None = None
    cell_n: int = 64
    table_counts: tuple = (5, 7, 9)
    table_pad: float = 0.5
    tol: float = 1e-9
    max_denominator: int = 20
    cell_x: float = 0.5
    cell_p: float = 0.0
    cell_I: float = 0.5
    table_path: str | None = None
    out_dir: str = "out"
    seed: int = 0
    trials: int = 100
    smp_n: int = 256
    corrupt_table: bool = False
    orbit_gamma: float | None = None
    orbit_delta: float = 0.1
    workers: int = 1

    def __post_init__(self):
        self.validate()

    # -- validation -------------------------------------------------------
    def validate(self) -> None:
        if not 0 < self.alpha < 2:
            raise ConfigError(f"alpha must lie in (0, 2), got {self.alpha}")
        for name, sched in (("eps", self.eps_schedule), ("lambda", self.lambda_schedule)):
            if not sched or any(b >= a for a, b in zip(sched, sched[1:])):
                raise ConfigError(f"{name} schedule must be nonempty and strictly decreasing")
            if sched[-1] <= 0:
                raise ConfigError(f"{name} schedule must be positive")
        if any(b <= a for a, b in zip(self.M_schedule, self.M_schedule[1:])):
            raise ConfigError("M schedule must be strictly increasing")
        if self.a - abs(self.a_osc) <= 0:
            raise ConfigError("a(y) must stay positive")
        lo, hi = self.domain
        if not hi > lo:
            raise ConfigError("empty domain")
        if self.forcing_kind not in ("quasi", "almost"):
            raise ConfigError(f"unknown forcing kind {self.forcing_kind!r}")
        if self.grid_h > min(self.eps_schedule) / 16 * (1 + 1e-12):
            raise ConfigError(f"grid h={self.grid_h:g} does not resolve eps={min(self.eps_schedule):g}")
        n = (hi - lo) / self.grid_h
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigError("grid spacing must divide the domain length")
        if self.far_radius < 1:
            raise ConfigError("far_radius must be at least 1")

    # -- derived objects -------------------------------------------------
    @property
    def grid_h(self) -> float:
        if self.h is not None:
            return self.h
        return min(self.eps_schedule) / 16

    @property
    def case(self) -> str:
        return case_of(self.alpha, self.control_field())

    def coefficient_field(self) -> CoefficientField:
        if self.a_osc == 0:
            return CoefficientField(self.a)
        a, b = self.a, self.a_osc
        return CoefficientField(lambda y: a + b * np.cos(2 * np.pi * y), a0=a - abs(b),
                                theta0=1.0, holder_C=2 * np.pi * abs(b))

    def control_field(self) -> ControlField:
        return ControlField(list(self.drifts), None if self.costs is None else list(self.costs))

    def forcing(self) -> MultiscaleForcing:
        if self.forcing_kind == "almost":
            return geometric_series(self.series_terms, None, self.series_ratio)
        M = len(self.gammas)
        terms = []
        for amp, freq, scale in self.terms:
            if not 0 <= scale < M:
                raise ConfigError(f"scale index {scale} outside 0..{M - 1}")
            terms.append(term(amp, freq, scale, M))
        return MultiscaleForcing(terms, self.gammas, self.forcing_constant)

    # -- io ---------------------------------------------------------------
    @classmethod
    def from_file(cls, path, **overrides) -> "StudyConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        return cls.from_parser(cp, **overrides)

    @classmethod
    def from_string(cls, text: str, **overrides) -> "StudyConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        cp.read_string(text)
        return cls.from_parser(cp, **overrides)

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser, **overrides) -> "StudyConfig":
        kw = {}
        known = {
            "problem": {"alpha": ("alpha", parse_real), "a": ("a", parse_real),
                        "a_osc": ("a_osc", parse_real), "drifts": ("drifts", parse_list),
                        "costs": ("costs", parse_list),
                        "domain": ("domain", lambda s: tuple(parse_list(s))),
                        "exterior": ("exterior", parse_real),
                        "far_radius": ("far_radius", parse_real),
                        "nu_cells": ("nu_cells", int)},
            "forcing": {"kind": ("forcing_kind", str.strip),
                        "gammas": ("gammas", lambda s: tuple(parse_list(s))),
                        "terms": ("terms", _parse_terms),
                        "constant": ("forcing_constant", parse_real),
                        "series_terms": ("series_terms", int),
                        "series_ratio": ("series_ratio", parse_real)},
            "schedule": {"eps": ("eps_schedule", parse_list),
                         "lambda": ("lambda_schedule", parse_list),
                         "M": ("M_schedule", lambda s: [int(v) for v in parse_list(s)])},
            "grid": {"h": ("h", parse_real), "cell_n": ("cell_n", int)},
            "table": {"counts": ("table_counts", lambda s: tuple(int(v) for v in parse_list(s))),
                      "pad": ("table_pad", parse_real), "path": ("table_path", str.strip)},
            "cell": {"x": ("cell_x", parse_real), "p": ("cell_p", parse_real),
                     "I": ("cell_I", parse_real)},
            "tolerances": {"solver": ("tol", parse_real),
                           "max_denominator": ("max_denominator", int)},
            "output": {"dir": ("out_dir", str.strip)},
            "properties": {"seed": ("seed", int), "trials": ("trials", int),
                           "smp_n": ("smp_n", int),
                           "corrupt_table": ("corrupt_table", _parse_bool),
                           "orbit_gamma": ("orbit_gamma", parse_real),
                           "orbit_delta": ("orbit_delta", parse_real)},
        }
        for section in cp.sections():
            if section not in known:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in cp.items(section):
                entry = known[section].get(key) or known[section].get(key.upper())
                if entry is None:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                name, conv = entry
                try:
                    kw[name] = conv(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from None
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


def _parse_terms(text: str) -> list:
    out = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise ConfigError(f"term {chunk!r} needs amplitude, frequency and scale index")
        out.append((parse_real(parts[0]), int(parts[1]), int(parts[2])))
    return out


def _parse_bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def write_default(path) -> None:
    Path(path).write_text(DEFAULT_CONFIG)


DEFAULT_CONFIG = """\
[problem]
alpha = 1.0
a = 1.0
drifts = 0.0
domain = 0.0, 1.0
exterior = 1.0
far_radius = 2.0

[forcing]
kind = quasi
gammas = 1, 1/golden
terms = 1.0 1 0; 1.0 1 1

[schedule]
eps = 1/8, 1/16, 1/32
lambda = 0.1, 0.03, 0.01, 0.003, 0.001
M = 1, 3, 5

[grid]
cell_n = 64

[tolerances]
solver = 1e-9
"""
