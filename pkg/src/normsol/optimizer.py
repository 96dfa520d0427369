"""Local minimization on the mass sphere.

One descent per maximum point of the potential: start from the autonomous
minimizer translated onto that maximum, run projected gradient descent with
Armijo backtracking and renormalization, and keep the barycenter inside the
region around the chosen maximum.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import (
    LandscapeViolated,
    NotConverged,
    RegionEscape,
    SupportOverflow,
)
from .field import EnergyModel, Field, Grid, dilate, gaussian, normalize_to_mass, translate
from .landscape import TruncationProfile
from .params import ProblemParams
from .potential import (
    LocalizationConfig,
    PotentialSpec,
    chi,
    default_localization,
    in_core,
)

log = logging.getLogger(__name__)

PLATEAU_TOL = 1e-12
BOUNDARY_TOL = 1e-8
STARTER_OVERFLOW = 1e-6


@dataclass
class SolverSettings:
    """Descent controls. ``tol_res=None`` means ``1e-8 * a``."""

    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_step: float = 1e3
    min_step: float = 1e-14
    tol_res: float | None = None
    max_iter: int = 200_000
    seed: int = 0
    restarts: int = 0
    precondition: bool = True
    workers: int = 1

    def __post_init__(self):
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack < 1):
            raise ValueError("Armijo constants must lie in (0, 1)")
        if self.tol_res is not None and not self.tol_res > 0:
            raise ValueError("tol_res must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    def residual_tol(self, a: float, lam: float) -> float:
        base = self.tol_res if self.tol_res is not None else 1e-8 * a
        return base * max(1.0, abs(lam) * a)


@dataclass
class DescentResult:
    values: np.ndarray
    energy: float
    lam: float
    residual: float
    iterations: int
    converged: bool
    energy_drop: float = 0.0  # last accepted decrease


def project_tangent(g: Field, u: Field) -> tuple[Field, float]:
    """Split off the radial component: ``g = g_tan + lam u`` with ``<g_tan, u> = 0``."""
    grid = u.grid
    m = grid.inner(u.values, u.values)
    lam = grid.inner(g.values, u.values) / m
    return Field(grid, g.values - lam * u.values), lam


def _descend(
    model: EnergyModel,
    start: np.ndarray,
    a: float,
    settings: SolverSettings,
    monitor: Callable[[np.ndarray, int], None] | None = None,
) -> DescentResult:
    grid = model.grid
    m = a * a
    u = start * np.sqrt(m / grid.inner(start, start))
    E, g = model.energy_and_gradient(u)
    alpha = settings.initial_step
    shift = None
    drop = 0.0
    for it in range(settings.max_iter):
        lam = grid.inner(g, u) / m
        r = g - lam * u
        res = np.sqrt(grid.inner(r, r))
        if res <= settings.residual_tol(a, lam):
            return DescentResult(u, E, lam, res, it, True, drop)
        if settings.precondition:
            if shift is None:
                shift = max(abs(lam), 1e-12)
            d = grid.apply_multiplier(r, 1.0 / (shift + grid.k2), 1.0 / (shift + grid.k2_real))
            d = d - (grid.inner(d, u) / m) * u
        else:
            d = r
        slope = grid.inner(r, d)
        if it:
            alpha = min(2.0 * alpha, settings.max_step)
        floor = 64 * np.finfo(float).eps * (abs(E) + model_scale(model, u))
        while True:
            v = u - alpha * d
            v *= np.sqrt(m / grid.inner(v, v))
            Ev, gv = model.energy_and_gradient(v)
            if Ev <= E - settings.armijo_c * alpha * slope:
                break
            # below the rounding floor only monotonicity can be asked for
            if settings.armijo_c * alpha * slope < floor and Ev <= E:
                break
            alpha *= settings.backtrack
            if alpha < settings.min_step:
                return DescentResult(u, E, lam, res, it, False, drop)
        drop = E - Ev
        u, E, g = v, Ev, gv
        if monitor is not None:
            monitor(u, it)
    lam = grid.inner(g, u) / m
    r = g - lam * u
    res = np.sqrt(grid.inner(r, r))
    return DescentResult(u, E, lam, res, settings.max_iter, res <= settings.residual_tol(a, lam), drop)


def model_scale(model: EnergyModel, u: np.ndarray) -> float:
    """Magnitude of the kinetic term, a proxy for rounding in the energy."""
    return abs(model.grid.inner(u, model.grid.neg_laplacian(u)))


def autonomous_starter(mu: float, a1: float, params: ProblemParams, profile, grid: Grid,
                       width: float | None = None, max_halvings: int = 40) -> tuple[Field, float]:
    """Gaussian of mass a1^2 dilated by 2^-k until the autonomous energy is negative.

    Returns the starter and the dilation factor used.
    """
    model = EnergyModel(grid, mu, params.eta, params.p, params.q, profile)
    w0 = width if width is not None else grid.L / 64.0
    base = normalize_to_mass(gaussian(grid, w0), a1)
    for k in range(max_halvings):
        t = 2.0**-k
        try:
            cand = dilate(base, t)
        except SupportOverflow:
            break
        cand = normalize_to_mass(cand, a1)
        if model.energy(cand.values) < 0:
            return cand, t
    raise NotConverged("no dilation of the Gaussian starter has negative energy inside the box")


def autonomous_minimize(mu: float, a1: float, params: ProblemParams, profile: TruncationProfile,
                        grid: Grid, settings: SolverSettings | None = None) -> tuple[float, Field]:
    """Minimize the truncated autonomous energy with weight ``mu`` over mass ``a1^2``."""
    settings = settings or SolverSettings()
    if not 0 < a1 <= params.a * (1 + 1e-15):
        raise ValueError("need 0 < a1 <= a")
    if not mu > 0:
        raise ValueError("mu must be positive")
    model = EnergyModel(grid, mu, params.eta, params.p, params.q, profile)
    start, _ = autonomous_starter(mu, a1, params, profile, grid)
    res = _descend(model, start.values, a1, settings)
    if not res.converged:
        raise NotConverged(
            f"autonomous descent stopped after {res.iterations} iterations, residual {res.residual:.3g}",
            state=Field(grid, res.values),
        )
    return res.energy, Field(grid, res.values)


@dataclass
class MinimizerRecord:
    u: Field
    region: int
    beta: float
    lam: float
    residual: float
    barycenter: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool
    energy_full: float = float("nan")
    plateau_gap: float = float("nan")
    boundary_fraction: float = float("nan")
    mass_error: float = float("nan")
    center_distance: float = float("nan")
    flags: tuple[str, ...] = ()

    def to_text(self, header: dict | None = None) -> str:
        lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
        for f in fields(self):
            if f.name == "u":
                continue
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_text(text: str) -> dict:
        out = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
        return out

    @classmethod
    def from_text(cls, text: str, u: Field) -> "MinimizerRecord":
        raw = cls.parse_text(text)
        kw = {}
        for f in fields(cls):
            if f.name == "u":
                continue
            v = raw[f.name]
            if f.name in ("region", "iterations"):
                kw[f.name] = int(v)
            elif f.name == "converged":
                kw[f.name] = v == "true"
            elif f.name == "barycenter":
                kw[f.name] = np.array([float(s) for s in v.split()])
            elif f.name == "flags":
                kw[f.name] = tuple(s for s in v.split(",") if s)
            else:
                kw[f.name] = float(v)
        return cls(u=u, **kw)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, np.ndarray):
        return " ".join(f"{x:.17g}" for x in v)
    if isinstance(v, tuple):
        return ",".join(v)
    return f"{v:.17g}"


def starter_profile(i: int, epsilon: float, params: ProblemParams, grid: Grid, base: Field,
                    potential: PotentialSpec) -> Field:
    """Translate ``base`` onto the slow-variable maximum ``a_i`` (1-based ``i``)."""
    center = np.asarray(potential.maxima[i - 1], dtype=float)
    shift = center / epsilon
    if np.any(np.abs(shift) >= 0.5 * grid.L):
        raise SupportOverflow(
            f"translate a_{i}/eps = {shift} lies outside the box of edge {grid.L}; "
            f"need L > 2 max|a_i|/eps + profile width"
        )
    moved = translate(base, shift)
    if moved.boundary_fraction > STARTER_OVERFLOW:
        raise SupportOverflow(
            f"translated starter puts {moved.boundary_fraction:.3g} of its mass in the box shell"
        )
    return normalize_to_mass(moved, params.a)


@dataclass
class Levels:
    upsilon_max: float
    upsilon_inf: float

    @property
    def rho1_proxy(self) -> float:
        return 0.5 * (self.upsilon_inf - self.upsilon_max)


def minimize_localized(i: int, params: ProblemParams, potential: PotentialSpec,
                       profile: TruncationProfile, grid: Grid,
                       settings: SolverSettings | None = None, base: Field | None = None,
                       localization: LocalizationConfig | None = None,
                       levels: Levels | None = None) -> MinimizerRecord:
    """Local minimizer of the truncated energy in the region about ``a_i``.

    ``base`` defaults to the autonomous minimizer with weight h_max.
    Raises RegionEscape, LandscapeViolated or NotConverged.
    """
    settings = settings or SolverSettings()
    loc = localization or default_localization(potential)
    eps, a = params.epsilon, params.a
    if base is None:
        _, base = autonomous_minimize(potential.h_max, a, params, profile, grid, settings)
    start = starter_profile(i, eps, params, grid, base, potential)
    weight = potential.sample(grid, eps)
    model = EnergyModel(grid, weight, params.eta, params.p, params.q, profile)
    center = np.asarray(potential.maxima[i - 1], dtype=float)
    cx = chi(eps * grid.points, loc.r_tilde)
    axes = tuple(range(grid.N))

    def barycenter(v):
        dens = v * v if not np.iscomplexobj(v) else np.abs(v) ** 2
        return np.tensordot(dens, cx, axes=(axes, axes)) / np.sum(dens)

    last_inside = {"u": start.values}

    def monitor(v, it):
        q = barycenter(v)
        if np.linalg.norm(q - center) > loc.rho_tilde:
            raise RegionEscape(
                f"region {i}: barycenter {q} left the ball of radius {loc.rho_tilde:.4g} "
                f"about {center} at iteration {it}",
                region=i,
                last_inside=Field(grid, last_inside["u"]),
                barycenter=q,
            )
        if it % 64 == 0:
            sigma = np.sqrt(max(grid.inner(v, grid.neg_laplacian(v)), 0.0))
            if sigma >= profile.R1:
                raise LandscapeViolated(
                    f"region {i}: gradient norm {sigma:.4g} crossed R1 = {profile.R1:.4g}"
                )
        last_inside["u"] = v

    res = _descend(model, start.values, a, settings, monitor)
    u = Field(grid, res.values)
    if not res.converged:
        raise NotConverged(
            f"region {i}: descent stopped after {res.iterations} iterations, "
            f"residual {res.residual:.3g}",
            state=u,
        )
    return _finish_record(i, u, res, params, potential, profile, loc, settings, levels)


def _finish_record(i, u, res, params, potential, profile, loc, settings, levels) -> MinimizerRecord:
    grid = u.grid
    a = params.a
    weight = potential.sample(grid, params.epsilon)
    full = EnergyModel(grid, weight, params.eta, params.p, params.q, None)
    E_full, g_full = full.energy_and_gradient(u.values)
    lam = grid.inner(g_full, u.values) / (a * a)
    r = g_full - lam * u.values
    residual = float(np.sqrt(grid.inner(r, r)))
    qpt = np.atleast_1d(barycenter_of(u, params.epsilon, loc.r_tilde))
    center = np.asarray(potential.maxima[i - 1], dtype=float)
    dist = float(np.linalg.norm(qpt - center))
    flags = []
    sigma = u.grad_norm
    if not sigma < profile.R0:
        flags.append("gradient-above-R0")
    if not res.energy < 0:
        flags.append("energy-nonnegative")
    if not lam < 0:
        flags.append("multiplier-nonnegative")
    if dist > loc.rho_tilde:
        flags.append("outside-region")
    if u.boundary_fraction >= BOUNDARY_TOL:
        flags.append("DomainTooSmall")
    if residual > settings.residual_tol(a, lam):
        flags.append("residual")
    mass_err = abs(u.mass - a * a) / (a * a)
    if mass_err > 1e-10:
        flags.append("mass")
    plateau = abs(res.energy - E_full)
    if plateau > PLATEAU_TOL:
        flags.append("plateau")
    if levels is not None and res.energy <= levels.upsilon_max + levels.rho1_proxy:
        if not in_core(qpt, potential, loc):
            log.warning("region %d: low-energy minimizer with barycenter %s outside the core balls", i, qpt)
            flags.append("core-check")
    return MinimizerRecord(
        u=u,
        region=i,
        beta=float(res.energy),
        lam=float(lam),
        residual=residual,
        barycenter=qpt,
        grad_norm=float(sigma),
        iterations=res.iterations,
        converged=not flags,
        energy_full=float(E_full),
        plateau_gap=float(plateau),
        boundary_fraction=float(u.boundary_fraction),
        mass_error=float(mass_err),
        center_distance=dist,
        flags=tuple(flags),
    )


def barycenter_of(u: Field, epsilon: float, r_tilde: float) -> np.ndarray:
    from .potential import barycenter_Q

    return barycenter_Q(u, epsilon, r_tilde)


@dataclass
class OrderingReport:
    upsilon_max: float
    upsilon_inf: float
    records: list[MinimizerRecord]
    failures: dict[int, str] = field(default_factory=dict)
    restart_energies: list[float] = field(default_factory=list)

    @property
    def gamma_proxy(self) -> float:
        """Smallest energy found: an upper estimate of the global infimum."""
        vals = [r.beta for r in self.records if r.converged] + list(self.restart_energies)
        return min(vals) if vals else float("nan")

    @property
    def chain_ok(self) -> bool:
        return self.upsilon_max < self.upsilon_inf < 0

    @property
    def excess(self) -> float:
        """``gamma_proxy - upsilon_max``; nonnegative up to solver tolerance."""
        return self.gamma_proxy - self.upsilon_max

    @property
    def levels(self) -> Levels:
        return Levels(self.upsilon_max, self.upsilon_inf)


def solve_regions(params: ProblemParams, potential: PotentialSpec, profile: TruncationProfile,
                  grid: Grid, settings: SolverSettings, base: Field,
                  localization: LocalizationConfig | None = None,
                  levels: Levels | None = None) -> tuple[list[MinimizerRecord], dict[int, str]]:
    """Run every region; results are ordered by region regardless of scheduling."""
    loc = localization or default_localization(potential)

    def run(i):
        try:
            return i, minimize_localized(i, params, potential, profile, grid, settings, base, loc, levels), None
        except (RegionEscape, NotConverged, LandscapeViolated, SupportOverflow) as exc:
            return i, None, f"{type(exc).__name__}: {exc}"

    regions = range(1, potential.l + 1)
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            results = list(pool.map(run, regions))
    else:
        results = [run(i) for i in regions]
    records = [rec for _, rec, _ in sorted(results, key=lambda t: t[0]) if rec is not None]
    failures = {i: msg for i, _, msg in results if msg is not None}
    return records, failures


def ordering_report(params: ProblemParams, potential: PotentialSpec, profile: TruncationProfile,
                    grid: Grid, settings: SolverSettings | None = None,
                    localization: LocalizationConfig | None = None) -> OrderingReport:
    """Autonomous levels at h_max and h_infty plus one localized minimizer per maximum."""
    settings = settings or SolverSettings()
    up_max, base = autonomous_minimize(potential.h_max, params.a, params, profile, grid, settings)
    up_inf, _ = autonomous_minimize(potential.h_infty, params.a, params, profile, grid, settings)
    levels = Levels(up_max, up_inf)
    records, failures = solve_regions(params, potential, profile, grid, settings, base, localization, levels)
    report = OrderingReport(up_max, up_inf, records, failures)
    if settings.restarts:
        report.restart_energies = _restart_probes(params, potential, profile, grid, settings, base)
    return report


def _restart_probes(params, potential, profile, grid, settings, base) -> list[float]:
    rng = np.random.default_rng(settings.seed)
    weight = potential.sample(grid, params.epsilon)
    model = EnergyModel(grid, weight, params.eta, params.p, params.q, profile)
    out = []
    reach = 0.5 * (0.8 * grid.L / 2)
    for _ in range(settings.restarts):
        shift = rng.uniform(-reach, reach, size=grid.N)
        start = normalize_to_mass(translate(base, shift), params.a)
        res = _descend(model, start.values, params.a, settings)
        if res.converged:
            out.append(float(res.energy))
    return out
