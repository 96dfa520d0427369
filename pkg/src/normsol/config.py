"""Sectioned key-value run configuration with deterministic serialization."""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError, ParameterError
from .field import DEFAULT_POINTS, BOUNDARY_SHELL, Grid
from .optimizer import SolverSettings
from .params import ProblemParams
from .potential import Peak, PotentialSpec, build_potential

_PEAK_KEY = re.compile(r"peak_(\d+)_(center|amplitude|radius)$")


@dataclass
class DynamicsSettings:
    dt: float = 1e-3
    T: float = 10.0
    gammas: tuple[float, ...] = (1e-2,)
    stability_dt: float = 1e-2
    stability_T: float = 50.0
    sample_every: int = 100
    theta_target: float = 0.1


@dataclass
class RunConfig:
    params: ProblemParams
    h_infty: float
    peaks: tuple[Peak, ...]
    L: float
    M: int
    solver: SolverSettings = field(default_factory=SolverSettings)
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)
    output: str = "out"
    seed: int = 0

    # ---- derived objects -------------------------------------------------
    def potential(self) -> PotentialSpec:
        return build_potential(self.h_infty, self.peaks)

    def grid(self) -> Grid:
        return Grid(self.params.N, self.L, self.M)

    def validate(self) -> None:
        """Cross-section checks that need no heavy computation."""
        pot = self.potential()
        if pot.N != self.params.N:
            raise ConfigError(f"peak centres have dimension {pot.N}, problem has N = {self.params.N}")
        reach = max(math.sqrt(sum(c * c for c in m)) for m in pot.maxima) / self.params.epsilon
        limit = BOUNDARY_SHELL * self.L
        if reach >= limit:
            raise ConfigError(
                f"box too small: translate max|a_i|/eps = {reach:.6g} must stay below "
                f"{BOUNDARY_SHELL} L = {limit:.6g}; need L > {reach / BOUNDARY_SHELL:.6g}"
            )

    # ---- serialization ---------------------------------------------------
    def to_text(self) -> str:
        p, s, d = self.params, self.solver, self.dynamics
        out = ["[problem]"]
        out += [f"N = {p.N}", f"a = {_num(p.a)}", f"epsilon = {_num(p.epsilon)}",
                f"eta = {_num(p.eta)}", f"p = {_num(p.p)}", f"q = {_num(p.q)}", ""]
        out += ["[potential]", f"h_infty = {_num(self.h_infty)}"]
        for j, pk in enumerate(self.peaks, 1):
            out += [f"peak_{j}_center = {' '.join(_num(c) for c in pk.center)}",
                    f"peak_{j}_amplitude = {_num(pk.amplitude)}",
                    f"peak_{j}_radius = {_num(pk.radius)}"]
        out += ["", "[grid]", f"L = {_num(self.L)}", f"M = {self.M}", ""]
        out += ["[solver]"]
        for f in fields(SolverSettings):
            if f.name == "seed":
                continue
            out.append(f"{f.name} = {_value(getattr(s, f.name))}")
        out += ["", "[dynamics]"]
        for f in fields(DynamicsSettings):
            out.append(f"{f.name} = {_value(getattr(d, f.name))}")
        out += ["", "[output]", f"directory = {self.output}", f"seed = {self.seed}", ""]
        return "\n".join(out)

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        lines = _line_index(text)
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
        known = {"problem", "potential", "grid", "solver", "dynamics", "output"}
        for sec in cp.sections():
            if sec not in known:
                raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)))
        reader = _Reader(cp, lines)

        N = reader.get("problem", "N", int)
        try:
            params = ProblemParams(
                N=N,
                a=reader.get("problem", "a", float),
                epsilon=reader.get("problem", "epsilon", float),
                eta=reader.get("problem", "eta", float),
                p=reader.get("problem", "p", float),
                q=reader.get("problem", "q", float),
            )
        except ParameterError as exc:
            raise ConfigError(f"[problem] {exc}", lines.get(("problem", None))) from None
        reader.done("problem")

        h_inf = reader.get("potential", "h_infty", float)
        raw: dict[int, dict[str, str]] = {}
        for key in list(cp["potential"].keys()) if cp.has_section("potential") else []:
            m = _PEAK_KEY.match(key)
            if m:
                raw.setdefault(int(m.group(1)), {})[m.group(2)] = key
        peaks = []
        for j in sorted(raw):
            keys = raw[j]
            for part in ("center", "amplitude", "radius"):
                if part not in keys:
                    raise ConfigError(f"peak {j} lacks peak_{j}_{part}", lines.get(("potential", None)))
            center = reader.get("potential", keys["center"], _floats)
            try:
                peaks.append(Peak(center, reader.get("potential", keys["amplitude"], float),
                                  reader.get("potential", keys["radius"], float)))
            except ValueError as exc:
                raise ConfigError(str(exc), lines.get(("potential", keys["radius"]))) from None
        reader.done("potential")

        L = reader.get("grid", "L", float)
        M = reader.get("grid", "M", int, DEFAULT_POINTS.get(N))
        reader.done("grid")

        solver_kw = {}
        for f in fields(SolverSettings):
            if f.name == "seed":
                continue
            conv = _converter(f.default)
            solver_kw[f.name] = reader.get("solver", f.name, conv, f.default)
        reader.done("solver")
        dyn_kw = {}
        for f in fields(DynamicsSettings):
            default = f.default
            dyn_kw[f.name] = reader.get("dynamics", f.name, _converter(default), default)
        reader.done("dynamics")
        output = reader.get("output", "directory", str, "out")
        seed = reader.get("output", "seed", int, 0)
        reader.done("output")
        try:
            solver = SolverSettings(seed=seed, **solver_kw)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}", lines.get(("solver", None))) from None
        cfg = cls(params, h_inf, tuple(peaks), L, M, solver, DynamicsSettings(**dyn_kw), output, seed)
        try:
            cfg.grid()
        except ValueError as exc:
            key = "M" if str(exc).startswith("M ") else "L" if str(exc).startswith("L ") else None
            raise ConfigError(f"[grid] {exc}", lines.get(("grid", key), lines.get(("grid", None)))) from None
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def with_seed(self, seed: int) -> "RunConfig":
        from dataclasses import replace

        return replace(self, seed=seed, solver=replace(self.solver, seed=seed))


def _num(x: float) -> str:
    return repr(float(x))


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return " ".join(_num(x) for x in v)
    if isinstance(v, int):
        return str(v)
    return _num(v)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split())


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optional_float(s: str):
    return None if s.strip().lower() in ("auto", "none") else float(s)


def _converter(default):
    if isinstance(default, bool):
        return _bool
    if default is None:
        return _optional_float
    if isinstance(default, tuple):
        return _floats
    if isinstance(default, int):
        return int
    return float


def _line_index(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            index[(section, None)] = n
        elif "=" in stripped and not stripped.startswith(("#", ";")):
            index[(section, stripped.split("=", 1)[0].strip())] = n
    return index


class _Reader:
    """Typed access that remembers consumed keys so leftovers can be reported."""

    _MISSING = object()

    def __init__(self, cp, lines):
        self.cp, self.lines, self.used = cp, lines, set()

    def get(self, section, key, conv, default=_MISSING):
        if not self.cp.has_section(section) or not self.cp.has_option(section, key):
            if default is self._MISSING:
                raise ConfigError(f"missing key {key!r} in [{section}]", self.lines.get((section, None)))
            return default
        self.used.add((section, key))
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", self.lines.get((section, key))) from None

    def done(self, section):
        if not self.cp.has_section(section):
            return
        for key in self.cp[section]:
            if (section, key) not in self.used:
                raise ConfigError(f"unknown key {key!r} in [{section}]", self.lines.get((section, key)))
