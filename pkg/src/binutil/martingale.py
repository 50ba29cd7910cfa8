"""Martingale-measure density coefficients for the binomial market.

The change of measure that prices the one-step exponential lattice move has
density exp(-a * omega - b) against the standardized binomial law; a is fixed
by the one-step risk-neutral equation and b is the log normalizer. Both are
evaluated in closed form with expm1/log1p kernels, because every exponent is
O(n^{-1/2}) and naive exponentials lose the leading digits.

For p = 1/2 the coefficients collapse to a = 1/2, b = n log cosh(1/(2 sqrt n)),
with b strictly increasing in n toward 1/8. For p > 1/2 the two-term
expansions a ~ 1/2 - (2p-1)/(24 sqrt(pq)) n^{-1/2} and
b ~ 1/8 - (1-p+p^2)/(576 pq) n^{-1} are attached to every result; their
remainders are O(n^{-3/2}) and O(n^{-2}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binomial_core import BinomialGrid
from .errors import DomainError, UsageError
from .stable import exp_sum


def _validate_np(n: int, p: float, probe: bool) -> float:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise DomainError(f"step count must be a positive integer, got {n!r}")
    p = float(p)
    if not math.isfinite(p) or not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if not probe and not 0.5 <= p < 1.0:
        raise DomainError(
            f"p = {p} is outside [1/2, 1); pass probe=True to evaluate anyway"
        )
    return p


def _one_step_moves(n: int, p: float) -> tuple[float, float]:
    """Per-step standardized moves divided by sqrt(n): (up, down)."""
    q = 1.0 - p
    rn = math.sqrt(n)
    return math.sqrt(q / p) / rn, -math.sqrt(p / q) / rn


@dataclass(frozen=True)
class MartingaleCoefficients:
    """Density coefficients (a, b) with their two-term large-n expansions."""

    n: int
    p: float
    a: float
    b: float
    a_asym2: float
    b_asym2: float


def coefficients(n: int, p: float, probe: bool = False) -> MartingaleCoefficients:
    """Exact density coefficients for the n-step law with parameter p.

    p = 1/2 takes the symmetric closed form; otherwise a comes from the
    one-step risk-neutral equation written with expm1 kernels and b is the
    log normalizer n log E[exp(-a * move)]. probe=True allows p < 1/2
    (no bound guarantees are implied there).

    Raises
    ------
    DomainError
        If n < 1 or p is outside [1/2, 1) without probe.
    """
    p = _validate_np(n, p, probe)
    q = 1.0 - p
    if p == 0.5:
        a = 0.5
        t = 0.5 / math.sqrt(n)
        # log cosh t = log1p(2 sinh^2(t/2)), stable as t -> 0
        b = n * math.log1p(2.0 * math.sinh(0.5 * t) ** 2)
    else:
        s_up, s_dn = _one_step_moves(n, p)
        a = math.sqrt(n * p * q) * (
            math.log(p / q) + math.log(math.expm1(s_up)) - math.log(-math.expm1(s_dn))
        )
        e_minus_1 = p * math.expm1(-a * s_up) + q * math.expm1(-a * s_dn)
        b = n * math.log1p(e_minus_1)
    a2 = 0.5 - (2.0 * p - 1.0) / (24.0 * math.sqrt(p * q)) / math.sqrt(n)
    b2 = 0.125 - (1.0 - p + p * p) / (576.0 * p * q) / n
    return MartingaleCoefficients(n=int(n), p=p, a=a, b=b, a_asym2=a2, b_asym2=b2)


def one_step_risk_neutral_check(
    n: int, p: float, coeffs: MartingaleCoefficients | None = None
) -> float:
    """Residual of the one-step martingale equation under the tilted weights.

    Builds the risk-neutral up-weight q_up = p exp(-a * up - b/n) and returns
    |q_up e^{up} + (1 - q_up) e^{down} - 1|, which is zero in exact arithmetic
    by the construction of (a, b).
    """
    if coeffs is None:
        coeffs = coefficients(n, p)
    if coeffs.n != n or coeffs.p != float(p):
        raise UsageError("coefficients were built for a different (n, p)")
    s_up, s_dn = _one_step_moves(n, p)
    q_up = p * math.exp(-coeffs.a * s_up - coeffs.b / n)
    return abs(q_up * math.exp(s_up) + (1.0 - q_up) * math.exp(s_dn) - 1.0)


@dataclass(frozen=True)
class DensityEval:
    """Martingale density on a grid, in log space.

    log_values[k] = -a z[k] - b, so values() are the density weights whose
    f-weighted sum is 1. The continuous-model counterpart exp(-x/2 - 1/8) is
    exposed as static functions.
    """

    grid: BinomialGrid
    coeffs: MartingaleCoefficients
    log_values: np.ndarray

    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def normalization_residual(self) -> float:
        """|E[density] - 1| under the grid law, compensated summation."""
        return abs(exp_sum(self.grid.logf + self.log_values) - 1.0)

    @staticmethod
    def continuous_log_density(x):
        x = np.asarray(x, dtype=float)
        out = -0.5 * x - 0.125
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def continuous_density(x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-0.5 * x - 0.125)
        return float(out) if out.ndim == 0 else out


def density_on_grid(grid: BinomialGrid, coeffs: MartingaleCoefficients) -> DensityEval:
    """Evaluate the discrete density at every grid point, in log space.

    Raises
    ------
    UsageError
        If grid and coefficients were built for different (n, p).
    """
    if grid.n != coeffs.n or grid.p != coeffs.p:
        raise UsageError(
            f"grid (n={grid.n}, p={grid.p}) does not match "
            f"coefficients (n={coeffs.n}, p={coeffs.p})"
        )
    log_values = -coeffs.a * grid.z - coeffs.b
    log_values.setflags(write=False)
    return DensityEval(grid=grid, coeffs=coeffs, log_values=log_values)
