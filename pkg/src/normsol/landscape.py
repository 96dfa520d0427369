"""Scalar energy-landscape analysis of the constrained functional.

Every quantity here is a closed-form or one-dimensional function of the
problem scalars and the best interpolation constants: the lower envelope
``g_a(r) = r^2 w_a(r)`` of the energy in terms of ``r = ||grad u||_2``, its
two zeros ``R0 < R1``, the admissibility inequalities, and the smooth cutoff
``tau`` that removes the supercritical term above ``R1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from . import gn
from .errors import NoRoots
from .params import ProblemParams

TOL_ROOT = 1e-10


@dataclass(frozen=True)
class Constants:
    """Interpolation exponents and best constants for one (N, q, p)."""

    gamma_q: float
    gamma_p: float
    C_q: float
    C_p: float
    S: float | None = None

    @classmethod
    def for_params(cls, params: ProblemParams) -> "Constants":
        N = params.N
        S = gn.sobolev_constant(N) if params.critical else None
        return cls(
            gamma_q=gn.gamma(params.q, N),
            gamma_p=gn.gamma(params.p, N),
            C_q=gn.gn_constant(N, params.q),
            C_p=gn.gn_constant(N, params.p),
            S=S,
        )


def _coefficients(params: ProblemParams, h_max: float, c: Constants):
    """Return (A, Bp, s, u) with w_a(r) = 1/2 - A r^s - Bp r^u, s < 0 < u."""
    q, p, a, eta = params.q, params.p, params.a, params.eta
    A = h_max * c.C_q**q * a ** (q * (1.0 - c.gamma_q)) / q
    Bp = eta * c.C_p**p * a ** (p * (1.0 - c.gamma_p)) / p
    return A, Bp, q * c.gamma_q - 2.0, p * c.gamma_p - 2.0


def coefficient_B(params: ProblemParams, h_max: float, c: Constants) -> float:
    """Composite coefficient in the closed form of ``max w_a``.

    ``h_max`` is unused by the formula itself; it is accepted so every
    landscape function shares one signature.
    """
    q, p = params.q, params.p
    qg, pg = q * c.gamma_q, p * c.gamma_p
    D = pg - qg
    return (
        D
        / (2.0 - qg)
        * ((2.0 - qg) / (pg - 2.0)) ** ((pg - 2.0) / D)
        * (c.C_q**q / q) ** ((pg - 2.0) / D)
        * (c.C_p**p / p) ** ((2.0 - qg) / D)
    )


def w_a(r, params: ProblemParams, h_max: float, c: Constants):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("w_a is defined for r > 0 only")
    A, Bp, s, u = _coefficients(params, h_max, c)
    out = 0.5 - A * r**s - Bp * r**u
    return float(out) if out.ndim == 0 else out


def w_a_prime(r, params: ProblemParams, h_max: float, c: Constants):
    r = np.asarray(r, dtype=float)
    A, Bp, s, u = _coefficients(params, h_max, c)
    out = -A * s * r ** (s - 1.0) - Bp * u * r ** (u - 1.0)
    return float(out) if out.ndim == 0 else out


def g_a(r, params: ProblemParams, h_max: float, c: Constants):
    """Lower envelope of the energy on the sphere as a function of ||grad u||_2."""
    r = np.asarray(r, dtype=float)
    A, Bp, s, u = _coefficients(params, h_max, c)
    out = 0.5 * r**2 - A * r ** (s + 2.0) - Bp * r ** (u + 2.0)
    return float(out) if out.ndim == 0 else out


def g_bar(r, params: ProblemParams, h_max: float, c: Constants, profile: "TruncationProfile"):
    """Envelope of the truncated energy (supercritical term damped by tau)."""
    r = np.asarray(r, dtype=float)
    A, Bp, s, u = _coefficients(params, h_max, c)
    out = 0.5 * r**2 - A * r ** (s + 2.0) - tau(r, profile) * Bp * r ** (u + 2.0)
    return float(out) if out.ndim == 0 else out


def r0(params: ProblemParams, h_max: float, c: Constants) -> float:
    """Unique critical point of w_a (its maximum)."""
    A, Bp, s, u = _coefficients(params, h_max, c)
    return ((-s) * A / (u * Bp)) ** (1.0 / (u - s))


def w_max_closed_form(params: ProblemParams, h_max: float, c: Constants) -> float:
    """``w_a(r0)`` via the composite coefficient B."""
    q, p, a, eta = params.q, params.p, params.a, params.eta
    qg, pg = q * c.gamma_q, p * c.gamma_p
    D = pg - qg
    X = (h_max * a ** (q * (1 - c.gamma_q))) ** ((pg - 2) / D)
    Y = (eta * a ** (p * (1 - c.gamma_p))) ** ((2 - qg) / D)
    return 0.5 - coefficient_B(params, h_max, c) * X * Y


def mass_condition_lhs(params: ProblemParams, h_max: float, c: Constants) -> float:
    q, p, a, eta = params.q, params.p, params.a, params.eta
    qg, pg = q * c.gamma_q, p * c.gamma_p
    D = pg - qg
    return (h_max * a ** (q * (1 - c.gamma_q))) ** ((pg - 2) / D) * (
        eta * a ** (p * (1 - c.gamma_p))
    ) ** ((2 - qg) / D)


def check_mass_condition(params: ProblemParams, h_max: float, c: Constants) -> tuple[bool, float]:
    """Mass/coupling smallness ensuring w_a has a positive maximum.

    Returns ``(holds, margin)`` with ``margin = 1/(2B) - lhs``; strict.
    """
    margin = 1.0 / (2.0 * coefficient_B(params, h_max, c)) - mass_condition_lhs(params, h_max, c)
    return bool(margin > 0), float(margin)


def sobolev_bound(params: ProblemParams, c: Constants) -> float:
    """``eta^(-(N-2)/4) S^(N/4)``: the gradient level below which the
    critical term cannot concentrate."""
    N = params.N
    return params.eta ** (-(N - 2) / 4.0) * c.S ** (N / 4.0)


def check_critical_condition(params: ProblemParams, h_max: float, c: Constants) -> tuple[bool, float]:
    """Extra smallness needed at the Sobolev exponent, tested as ``r0 < bound``.

    Vacuously true (infinite margin) below the Sobolev exponent.
    """
    if not params.critical:
        return True, math.inf
    margin = sobolev_bound(params, c) - r0(params, h_max, c)
    return bool(margin > 0), float(margin)


def critical_condition_sides(params: ProblemParams, h_max: float, c: Constants) -> tuple[float, float]:
    """Both sides of the expanded form of the critical-case condition."""
    N, q, p, a, eta, S = params.N, params.q, params.p, params.a, params.eta, c.S
    qg, pg = q * c.gamma_q, p * c.gamma_p
    D = pg - qg
    crit = params.sobolev_exponent
    lhs = (h_max * a ** (q * (1 - c.gamma_q))) ** (1 / D) * eta ** ((N - 2) / 4 - 1 / D)
    inner = (2 - qg) * c.C_q**q * crit * S ** (crit / 2) / (q * (p - 2))
    rhs = inner ** (-1 / D) * S ** (N / 4)
    return lhs, rhs


def _bisect(f: Callable[[float], float], lo: float, hi: float) -> float:
    """Bisection on a certified sign-change bracket, run to machine resolution."""
    flo = f(lo)
    if flo == 0:
        return lo
    if f(hi) == 0:
        return hi
    if (flo > 0) == (f(hi) > 0):
        raise ValueError("bracket has no sign change")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo if abs(f(lo)) <= abs(f(hi)) else hi


def find_R0_R1(params: ProblemParams, h_max: float, c: Constants) -> tuple[float, float]:
    """The two zeros of w_a, located by a geometric scan about r0 then bisection."""
    rc = r0(params, h_max, c)
    f = lambda r: w_a(r, params, h_max, c)  # noqa: E731
    if not f(rc) > 0:
        raise NoRoots(f"max w_a = {f(rc):.6g} <= 0; no thresholds R0 < R1")
    lo = rc
    while f(lo) > 0:
        lo *= 0.5
        if lo < 1e-8 * rc:
            raise NoRoots("left zero of w_a not bracketed")
    hi = rc
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e8 * rc:
            raise NoRoots("right zero of w_a not bracketed")
    R0 = _bisect(f, lo, min(2.0 * lo, rc))
    R1 = _bisect(f, max(0.5 * hi, rc), hi)
    return R0, R1


@dataclass(frozen=True)
class TruncationProfile:
    """Smooth non-increasing cutoff: 1 up to R0, 0 from R1 on."""

    R0: float
    R1: float

    def __post_init__(self):
        if not 0 < self.R0 < self.R1:
            raise ValueError("need 0 < R0 < R1")


def _phi(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def tau(r, profile: TruncationProfile | None):
    """Cutoff value; ``profile=None`` means no truncation (tau = 1)."""
    r = np.asarray(r, dtype=float)
    if profile is None:
        out = np.ones_like(r)
    else:
        s = (r - profile.R0) / (profile.R1 - profile.R0)
        left, right = _phi(1.0 - s), _phi(s)
        with np.errstate(invalid="ignore"):
            out = np.where(s <= 0, 1.0, np.where(s >= 1, 0.0, left / (left + right)))
    return float(out) if out.ndim == 0 else out


def tau_prime(r, profile: TruncationProfile | None):
    r = np.asarray(r, dtype=float)
    if profile is None:
        out = np.zeros_like(r)
    else:
        width = profile.R1 - profile.R0
        s = np.atleast_1d((r - profile.R0) / width)
        out = np.zeros_like(s)
        inner = (s > 0) & (s < 1)
        si = s[inner]
        A, B = _phi(1.0 - si), _phi(si)
        dA = -A / (1.0 - si) ** 2
        dB = B / si**2
        out[inner] = (dA * B - A * dB) / (A + B) ** 2 / width
        out = out.reshape(np.shape(r))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LandscapeReport:
    gamma_q: float
    gamma_p: float
    C_q: float
    C_p: float
    S: float | None
    B: float
    r0: float
    R0: float | None
    R1: float | None
    mass_condition: bool
    mass_margin: float
    critical_condition: bool
    critical_margin: float
    w_max: float
    h_max: float

    @property
    def constants(self) -> Constants:
        return Constants(self.gamma_q, self.gamma_p, self.C_q, self.C_p, self.S)

    @property
    def profile(self) -> TruncationProfile:
        if self.R0 is None:
            raise NoRoots("landscape has no thresholds")
        return TruncationProfile(self.R0, self.R1)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LandscapeReport":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
        kw = {}
        for f in fields(cls):
            raw = values[f.name]
            if raw == "none":
                kw[f.name] = None
            elif raw in ("true", "false"):
                kw[f.name] = raw == "true"
            else:
                kw[f.name] = float(raw)
        return cls(**kw)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return f"{v:.17g}"


def compute_landscape(params: ProblemParams, h_max: float, constants: Constants | None = None) -> LandscapeReport:
    """Evaluate every threshold; roots are left as None when the mass condition fails."""
    c = constants or Constants.for_params(params)
    mass_ok, mass_m = check_mass_condition(params, h_max, c)
    crit_ok, crit_m = check_critical_condition(params, h_max, c)
    rc = r0(params, h_max, c)
    R0 = R1 = None
    if mass_ok:
        R0, R1 = find_R0_R1(params, h_max, c)
    return LandscapeReport(
        gamma_q=c.gamma_q,
        gamma_p=c.gamma_p,
        C_q=c.C_q,
        C_p=c.C_p,
        S=c.S,
        B=coefficient_B(params, h_max, c),
        r0=rc,
        R0=R0,
        R1=R1,
        mass_condition=mass_ok,
        mass_margin=mass_m,
        critical_condition=crit_ok,
        critical_margin=crit_m,
        w_max=w_a(rc, params, h_max, c),
        h_max=h_max,
    )
