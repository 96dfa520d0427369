"""Bump-sum potentials and the barycenter localization machinery.

A potential is a constant background ``h_infty`` plus compactly supported
smooth bumps ``A exp(1 - 1/(1 - |x - c|^2/R^2))``. Bumps with disjoint
supports peak exactly at their centres, so the set of global maximum
points is known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import H1Violated, H2Violated, H3Violated, ZeroField
from .field import Field, Grid


@dataclass(frozen=True)
class Peak:
    center: tuple[float, ...]
    amplitude: float
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")


def bump(points: np.ndarray, center, radius: float) -> np.ndarray:
    """Unit-height C-infinity bump supported in the open ball B_radius(center)."""
    s = np.sum((points - np.asarray(center)) ** 2, axis=-1) / radius**2
    out = np.zeros(s.shape)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """Validated potential; build through :func:`build_potential`."""

    h_infty: float
    peaks: tuple[Peak, ...]
    N: int
    h_max: float
    h_0: float
    maxima: tuple[tuple[float, ...], ...]  # a_1 = origin first
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.maxima)

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if self.N == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        if pts.shape[-1] != self.N:
            raise ValueError(f"points must have a trailing axis of length {self.N}")
        out = np.full(pts.shape[:-1], self.h_infty, dtype=float)
        for pk in self.peaks:
            out += pk.amplitude * bump(pts, pk.center, pk.radius)
        return out

    def sample(self, grid: Grid, epsilon: float) -> np.ndarray:
        """``h(eps x)`` on the grid; cached per (grid, eps)."""
        key = (grid, float(epsilon))
        if key not in self._cache:
            arr = self(epsilon * grid.points)
            arr.flags.writeable = False
            self._cache[key] = arr
        return self._cache[key]

    def support_extent(self) -> float:
        """Largest |x| reached by any bump support."""
        return max(np.linalg.norm(pk.center) + pk.radius for pk in self.peaks)


def build_potential(h_infty: float, peaks) -> PotentialSpec:
    """Validate the positivity, decay and maxima hypotheses and derive h_max, h_0, l.

    Raises H1Violated, H2Violated or H3Violated carrying a witnessing point.
    """
    peaks = tuple(pk if isinstance(pk, Peak) else Peak(*pk) for pk in peaks)
    if not peaks:
        raise H3Violated("at least one peak is required (the origin must be a maximum)")
    dims = {len(pk.center) for pk in peaks}
    if len(dims) != 1:
        raise ValueError("peak centres have inconsistent dimensions")
    N = dims.pop()
    origin = (0.0,) * N

    for p1, p2 in combinations(peaks, 2):
        d = math.dist(p1.center, p2.center)
        if d <= p1.radius + p2.radius:
            mid = tuple(np.add(p1.center, p2.center) / 2)
            raise H3Violated(
                f"bumps at {p1.center} and {p2.center} have overlapping supports", point=mid
            )

    # disjoint supports: every extremum of h is a bump centre or the background
    values = [h_infty + pk.amplitude for pk in peaks]
    h_max = max([h_infty] + values)
    h_0 = min([h_infty] + values)
    if not h_0 > 0:
        where = peaks[int(np.argmin(values))].center if min(values) < h_infty else None
        raise H1Violated(f"inf h = {h_0:.6g} is not positive", point=where)
    if not h_infty < h_max:
        raise H2Violated(
            f"h_infty = {h_infty:.6g} must lie strictly below max h = {h_max:.6g}",
            point=None,
        )
    maxima = [pk.center for pk, v in zip(peaks, values) if v == h_max]
    if origin not in maxima:
        raise H3Violated("the origin is not a global maximum point of h", point=origin)
    maxima.remove(origin)
    return PotentialSpec(
        h_infty=float(h_infty),
        peaks=peaks,
        N=N,
        h_max=float(h_max),
        h_0=float(h_0),
        maxima=(origin, *maxima),
    )


def chi(x, r_tilde: float) -> np.ndarray:
    """Radial clamp: identity inside the ball of radius r_tilde, projection outside."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(r > r_tilde, r_tilde / np.where(r > 0, r, 1.0), 1.0)
    return x * scale


def barycenter_Q(u: Field, epsilon: float, r_tilde: float) -> np.ndarray:
    """Clamped centre of mass of ``|u|^2`` in the slow variable ``eps x``."""
    g = u.grid
    dens = np.abs(u.values) ** 2
    total = float(np.sum(dens))
    if total == 0:
        raise ZeroField("barycenter of the zero field is undefined")
    cx = chi(epsilon * g.points, r_tilde)
    return np.tensordot(dens, cx, axes=(tuple(range(g.N)), tuple(range(g.N)))) / total


@dataclass(frozen=True)
class LocalizationConfig:
    rho_tilde: float
    r_tilde: float


def default_localization(spec: PotentialSpec) -> LocalizationConfig:
    """Region radius 0.49 x (smallest centre gap), so the closed balls stay disjoint."""
    centers = np.array(spec.maxima)
    if spec.l > 1:
        gap = min(math.dist(c1, c2) for c1, c2 in combinations(spec.maxima, 2))
    else:
        gap = 2.0 * max(pk.radius for pk in spec.peaks)
    rho = 0.49 * gap
    r_tilde = float(np.max(np.linalg.norm(centers, axis=-1))) + rho + 1.0
    return LocalizationConfig(rho, r_tilde)


def region_of_point(qpoint, spec: PotentialSpec, config: LocalizationConfig, tol: float = 1e-9):
    """``(i, on_boundary)`` with 1-based region index, or None outside every region."""
    d = np.linalg.norm(np.array(spec.maxima) - np.asarray(qpoint), axis=-1)
    i = int(np.argmin(d))
    if d[i] > config.rho_tilde * (1 + tol):
        return None
    return i + 1, bool(abs(d[i] - config.rho_tilde) <= tol * config.rho_tilde)


def region_index(u: Field, epsilon: float, config: LocalizationConfig, spec: PotentialSpec):
    return region_of_point(barycenter_Q(u, epsilon, config.r_tilde), spec, config)


def in_core(qpoint, spec: PotentialSpec, config: LocalizationConfig) -> bool:
    """Membership in the union of closed balls of radius rho/2 about the maxima."""
    d = np.linalg.norm(np.array(spec.maxima) - np.asarray(qpoint), axis=-1)
    return bool(np.min(d) <= 0.5 * config.rho_tilde)
