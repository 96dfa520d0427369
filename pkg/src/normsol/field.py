"""Periodic-box fields with spectral derivatives and the energy functionals.

The whole space is replaced by the box ``[-L/2, L/2)^N`` sampled on ``M``
points per axis. Integrals use equal weights (spectrally accurate for
periodic integrands) and derivatives use the FFT.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .errors import SupportOverflow, ZeroField
from .landscape import TruncationProfile, tau, tau_prime

BOUNDARY_SHELL = 0.4  # |x_i| >= 0.4 L marks the outer shell of the box
DILATE_OVERFLOW = 1e-6
NSF_MAGIC = b"NSF1"
DEFAULT_POINTS = {1: 256, 2: 128, 3: 64}


@dataclass(frozen=True)
class Grid:
    N: int
    L: float
    M: int

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise ValueError("only N = 1, 2, 3 are supported")
        if self.M < 16 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two and at least 16")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def dV(self) -> float:
        return self.h**self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.N

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.M)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.N), indexing="ij"))

    @cached_property
    def points(self) -> np.ndarray:
        """Grid coordinates stacked on a trailing axis of length N."""
        return np.stack(self.coords, axis=-1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)

    @cached_property
    def k2(self) -> np.ndarray:
        ks = np.meshgrid(*([self.wavenumbers] * self.N), indexing="ij")
        return sum(k * k for k in ks)

    @cached_property
    def k2_real(self) -> np.ndarray:
        """|k|^2 laid out for the half-spectrum of a real transform."""
        ks = [self.wavenumbers] * (self.N - 1) + [
            2.0 * np.pi * np.fft.rfftfreq(self.M, d=self.h)
        ]
        grids = np.meshgrid(*ks, indexing="ij")
        return sum(k * k for k in grids)

    @property
    def k_max(self) -> float:
        return np.pi / self.h

    @cached_property
    def shell_mask(self) -> np.ndarray:
        dist = np.max(np.abs(self.points), axis=-1)
        return dist >= BOUNDARY_SHELL * self.L

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.dV)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Real L2 inner product ``Re <u, v>``."""
        if np.iscomplexobj(u) or np.iscomplexobj(v):
            return float(np.sum((np.conj(u) * v).real) * self.dV)
        return float(np.dot(u.ravel(), v.ravel()) * self.dV)

    def apply_multiplier(self, values: np.ndarray, mult_full, mult_real=None) -> np.ndarray:
        """Multiply by a Fourier symbol; real inputs stay real."""
        if np.iscomplexobj(values):
            return sfft.ifftn(mult_full * sfft.fftn(values))
        if mult_real is None:
            raise ValueError("real transform needs the half-spectrum symbol")
        return sfft.irfftn(mult_real * sfft.rfftn(values), s=self.shape)

    def neg_laplacian(self, values: np.ndarray) -> np.ndarray:
        return self.apply_multiplier(values, self.k2, self.k2_real)

    def gradient(self, values: np.ndarray) -> list[np.ndarray]:
        """Spectral partial derivatives, one array per axis."""
        spec = sfft.fftn(values)
        out = []
        for j in range(self.N):
            shape = [1] * self.N
            shape[j] = self.M
            k = self.wavenumbers.reshape(shape).copy()
            if self.M % 2 == 0:
                # odd derivative of the Nyquist mode is ambiguous; drop it
                k.reshape(-1)[self.M // 2] = 0.0
            d = sfft.ifftn(1j * k * spec)
            out.append(d if np.iscomplexobj(values) else d.real)
        return out

    def boundary_fraction(self, values: np.ndarray) -> float:
        dens = np.abs(values) ** 2
        total = float(np.sum(dens))
        if total == 0:
            return 0.0
        return float(np.sum(dens[self.shell_mask]) / total)


class Field:
    """Samples of a function on a grid; read-only once built."""

    __slots__ = ("grid", "values", "_cache")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, copy=True)
        if arr.shape != grid.shape:
            arr = arr.reshape(grid.shape)
        arr = arr.astype(np.complex128 if np.iscomplexobj(arr) else np.float64, copy=False)
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr
        self._cache = {}

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"Field({self.grid!r}, {kind}, mass={self.mass:.6g})"

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def mass(self) -> float:
        return self._cached("mass", lambda: self.grid.integrate(np.abs(self.values) ** 2))

    @property
    def grad_norm(self) -> float:
        def compute():
            v = self.values
            val = self.grid.inner(v, self.grid.neg_laplacian(v))
            return float(np.sqrt(max(val, 0.0)))

        return self._cached("grad_norm", compute)

    @property
    def boundary_fraction(self) -> float:
        return self._cached("boundary", lambda: self.grid.boundary_fraction(self.values))

    def lp_norm(self, t: float) -> float:
        if t < 1:
            raise ValueError("t must be >= 1")
        return self._cached(
            ("lp", t), lambda: self.grid.integrate(np.abs(self.values) ** t) ** (1.0 / t)
        )

    @property
    def h1_norm(self) -> float:
        return float(np.sqrt(self.mass + self.grad_norm**2))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, c):
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "Field"):
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field"):
        return Field(self.grid, self.values - other.values)


def mass(u: Field) -> float:
    return u.mass


def grad_norm(u: Field) -> float:
    return u.grad_norm


def lp_norm(u: Field, t: float) -> float:
    return u.lp_norm(t)


def h1_inner(u: Field, v: Field) -> complex:
    """Complex H1 inner product ``<u, v> + <grad u, grad v>``."""
    g = u.grid
    w = np.conj(u.values) * (v.values + g.neg_laplacian(v.values))
    return complex(np.sum(w) * g.dV)


def normalize_to_mass(u: Field, a: float) -> Field:
    """Rescale so that ``||u||_2^2 = a^2``."""
    m = u.mass
    if not m > 0:
        raise ZeroField("cannot normalize the zero field")
    return Field(u.grid, u.values * (a / np.sqrt(m)))


def _interp_matrix(grid: Grid, targets: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation from grid samples to ``targets`` (1D)."""
    M = grid.M
    k = grid.wavenumbers
    x0 = grid.axis[0]
    phase = np.exp(1j * np.outer(targets - x0, k))
    if M % 2 == 0:
        phase[:, M // 2] = np.cos(k[M // 2] * (targets - x0))
    dft = np.exp(-1j * np.outer(k, grid.axis - x0))
    return (phase @ dft) / M


def dilate(u: Field, t: float) -> Field:
    """Mass-preserving dilation ``u_t(x) = t^(N/2) u(t x)``.

    Evaluated by exact trigonometric interpolation, so band-limited inputs
    dilate without interpolation error. Raises SupportOverflow when the
    result leaks into the outer shell of the box.
    """
    if not t > 0:
        raise ValueError("dilation factor must be positive")
    if t == 1:
        return u
    grid = u.grid
    A = _interp_matrix(grid, t * grid.axis)
    out = u.values.astype(np.complex128)
    for ax in range(grid.N):
        out = np.moveaxis(np.tensordot(A, out, axes=([1], [ax])), 0, ax)
    if not u.is_complex:
        out = out.real
    res = Field(grid, out * t ** (grid.N / 2.0))
    if res.boundary_fraction > DILATE_OVERFLOW:
        raise SupportOverflow(
            f"dilated profile puts {res.boundary_fraction:.3g} of its mass in the box shell"
        )
    return res


def translate(u: Field, shift) -> Field:
    """Periodic translate ``u(x - shift)``; whole-cell shifts are exact rolls."""
    grid = u.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (grid.N,))
    cells = shift / grid.h
    if np.allclose(cells, np.round(cells), rtol=0, atol=1e-9):
        return Field(grid, np.roll(u.values, tuple(int(c) for c in np.round(cells)), axis=tuple(range(grid.N))))
    ks = np.meshgrid(*([grid.wavenumbers] * grid.N), indexing="ij")
    phase = np.exp(-1j * sum(k * s for k, s in zip(ks, shift)))
    out = sfft.ifftn(phase * sfft.fftn(u.values))
    return Field(grid, out if u.is_complex else out.real)


def gaussian(grid: Grid, width: float, center=None) -> Field:
    x = grid.points
    c = np.zeros(grid.N) if center is None else np.asarray(center, dtype=float)
    r2 = np.sum((x - c) ** 2, axis=-1)
    return Field(grid, np.exp(-r2 / (2.0 * width**2)))


def _power(absu: np.ndarray, e: float) -> np.ndarray:
    """``|u|^e`` with integer exponents done by multiplication."""
    if float(e).is_integer():
        return absu ** int(e)
    return absu**e


@dataclass
class EnergyBreakdown:
    value: float
    kinetic: float
    q_term: float  # (1/q) * integral of weight |u|^q
    p_term: float  # (eta/p) * integral of |u|^p, before the cutoff
    tau: float
    grad_norm: float
    boundary_fraction: float


class EnergyModel:
    """``1/2 ||grad u||^2 - (1/q) int w |u|^q - (eta/p) tau(||grad u||) int |u|^p``.

    ``weight`` is either a scalar (the autonomous functionals) or the sampled
    potential ``h(eps x)``. ``profile=None`` switches the cutoff off.
    """

    def __init__(self, grid: Grid, weight, eta: float, p: float, q: float,
                 profile: TruncationProfile | None = None):
        self.grid = grid
        self.weight = weight
        self.eta = eta
        self.p = p
        self.q = q
        self.profile = profile

    def _parts(self, v: np.ndarray):
        g = self.grid
        lap = g.neg_laplacian(v)
        sigma2 = max(g.inner(v, lap), 0.0)
        absu = np.abs(v)
        uq2 = _power(absu, self.q - 2.0)
        up2 = _power(absu, self.p - 2.0)
        au2 = absu * absu
        q_int = g.integrate(self.weight * uq2 * au2)
        p_int = g.integrate(up2 * au2)
        return lap, sigma2, uq2, up2, q_int, p_int

    def breakdown(self, v: np.ndarray) -> EnergyBreakdown:
        _, sigma2, _, _, q_int, p_int = self._parts(v)
        sigma = float(np.sqrt(sigma2))
        t = tau(sigma, self.profile)
        kin = 0.5 * sigma2
        qt = q_int / self.q
        pt = self.eta * p_int / self.p
        return EnergyBreakdown(kin - qt - t * pt, kin, qt, pt, t, sigma, self.grid.boundary_fraction(v))

    def energy(self, v: np.ndarray) -> float:
        _, sigma2, _, _, q_int, p_int = self._parts(v)
        t = tau(np.sqrt(sigma2), self.profile)
        return 0.5 * sigma2 - q_int / self.q - t * self.eta * p_int / self.p

    def energy_and_gradient(self, v: np.ndarray):
        lap, sigma2, uq2, up2, q_int, p_int = self._parts(v)
        sigma = np.sqrt(sigma2)
        t = tau(sigma, self.profile)
        E = 0.5 * sigma2 - q_int / self.q - t * self.eta * p_int / self.p
        coef = 1.0
        if self.profile is not None and sigma > 0:
            tp = tau_prime(sigma, self.profile)
            if tp != 0.0:
                coef = 1.0 - self.eta / self.p * tp * p_int / sigma
        grad = coef * lap - (self.weight * uq2) * v - (self.eta * t) * (up2 * v)
        return E, grad

    def gradient(self, v: np.ndarray) -> np.ndarray:
        return self.energy_and_gradient(v)[1]


def _model(u: Field, weight, params, profile):
    return EnergyModel(u.grid, weight, params.eta, params.p, params.q, profile)


def energy_full(u: Field, params, potential) -> float:
    """Untruncated energy with the dilated potential h(eps x)."""
    w = potential.sample(u.grid, params.epsilon)
    return _model(u, w, params, None).energy(u.values)


def energy_truncated(u: Field, params, potential, profile: TruncationProfile) -> float:
    w = potential.sample(u.grid, params.epsilon)
    return _model(u, w, params, profile).energy(u.values)


def j_mu(u: Field, mu: float, params) -> float:
    """Autonomous energy with constant weight mu."""
    return _model(u, mu, params, None).energy(u.values)


def j_mu_truncated(u: Field, mu: float, params, profile: TruncationProfile) -> float:
    return _model(u, mu, params, profile).energy(u.values)


def energy_breakdown(u: Field, params, potential, profile=None) -> EnergyBreakdown:
    w = potential.sample(u.grid, params.epsilon)
    return _model(u, w, params, profile).breakdown(u.values)


def gradient_truncated(u: Field, params, potential, profile: TruncationProfile) -> Field:
    """L2 gradient of the truncated energy, including the cutoff chain-rule term."""
    w = potential.sample(u.grid, params.epsilon)
    return Field(u.grid, _model(u, w, params, profile).gradient(u.values))


def gradient_full(u: Field, params, potential) -> Field:
    w = potential.sample(u.grid, params.epsilon)
    return Field(u.grid, _model(u, w, params, None).gradient(u.values))


# --- persistence -----------------------------------------------------------

def write_field(path, u: Field) -> None:
    """Binary NSF1 layout: magic, u32 N, u32 M, f64 L, u8 iscomplex, f64 samples."""
    g = u.grid
    header = NSF_MAGIC + struct.pack("<IIdB", g.N, g.M, g.L, 1 if u.is_complex else 0)
    dtype = "<c16" if u.is_complex else "<f8"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype=dtype).tobytes(order="C"))


def read_field(path) -> Field:
    data = Path(path).read_bytes()
    if data[:4] != NSF_MAGIC:
        raise ValueError(f"{path}: not an NSF1 field file")
    N, M, L, iscomplex = struct.unpack_from("<IIdB", data, 4)
    offset = 4 + struct.calcsize("<IIdB")
    grid = Grid(int(N), float(L), int(M))
    dtype = "<c16" if iscomplex else "<f8"
    values = np.frombuffer(data, dtype=dtype, offset=offset)
    if values.size != M**N:
        raise ValueError(f"{path}: expected {M**N} samples, found {values.size}")
    return Field(grid, values.reshape(grid.shape))


def write_profile_csv(path, u: Field) -> None:
    """Axis profile through the box centre along the first coordinate."""
    g = u.grid
    idx = (slice(None),) + (g.M // 2,) * (g.N - 1)
    line = u.values[idx]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re", "im", "abs"])
        for x, v in zip(g.axis, line):
            w.writerow([f"{x:.17g}", f"{np.real(v):.17g}", f"{np.imag(v):.17g}", f"{abs(v):.17g}"])
