from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError


@dataclass(frozen=True)
class ProblemParams:
    """Scalar data of the stationary problem.

    ``a`` is the L2 norm (the mass is ``a**2``), ``q`` the mass-subcritical
    exponent and ``p`` the mass-supercritical one.
    """

    N: int
    a: float
    epsilon: float
    eta: float
    p: float
    q: float

    def __post_init__(self):
        N, p, q = self.N, self.p, self.q
        if int(N) != N or N < 1:
            raise ParameterError(f"dimension must be a positive integer, got {N!r}")
        for name in ("a", "epsilon", "eta"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        pbar = 2.0 + 4.0 / N
        if not 2.0 < q < pbar:
            raise ParameterError(f"need 2 < q < {pbar:g}, got q={q!r}")
        if not p > pbar:
            raise ParameterError(f"need p > {pbar:g}, got p={p!r}")
        if not math.isfinite(p):
            raise ParameterError("p must be finite")
        if N >= 3 and p > self.sobolev_exponent * (1 + 1e-14):
            raise ParameterError(f"need p <= 2N/(N-2) = {self.sobolev_exponent:g}")

    @property
    def sobolev_exponent(self) -> float:
        """2N/(N-2) for N >= 3, infinity otherwise."""
        return 2.0 * self.N / (self.N - 2) if self.N >= 3 else math.inf

    @property
    def critical(self) -> bool:
        return self.N >= 3 and math.isclose(self.p, self.sobolev_exponent, rel_tol=1e-14)

    @property
    def mass(self) -> float:
        return self.a * self.a

    def replace(self, **changes) -> "ProblemParams":
        from dataclasses import replace

        return replace(self, **changes)
