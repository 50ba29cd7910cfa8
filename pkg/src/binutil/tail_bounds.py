"""Gaussian dominance of the standardized binomial law.

Three layers of evidence are produced:

* sharp per-law constants from exact scans over all admissible cells
  (``minimal_constant``, ``local_ratio``),
* global cdf/survival dominance constants from log-space prefix sums
  (``global_tail_dominance``), structurally never larger than the local
  constants because summing the local cell bounds over a tail dominates the
  tail sum,
* the analytic certificate ``g(w, n) = alpha(w) n + beta(w, n)`` whose
  nonpositivity over the right-hand cells implies the local bound there
  (``g_bound_check``, ``BoundFunctions``).

Skew warning: for p > 1/2 the law has a heavy left tail, and the left-side
constants grow without bound as n grows. Linear fields can overflow to inf;
the log-space fields are always finite and are the authoritative record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binomial_core import BinomialGrid, GaussianRef, build_grid
from .errors import DomainError, UsageError
from .stable import log_prefix_sums, log_suffix_sums


def _exp_or_inf(x: float) -> float:
    # math.exp raises OverflowError past ~709.78; the linear field is then inf
    return math.exp(x) if x < 709.0 else math.inf


def _validate_half_open_p(p: float, probe: bool) -> float:
    p = float(p)
    if not math.isfinite(p) or not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if not probe and p < 0.5:
        raise DomainError(
            f"p = {p} is outside [1/2, 1); pass probe=True to evaluate anyway"
        )
    return p


@dataclass(frozen=True)
class BoundFunctions:
    """Closed forms of the exponent bound family for one fixed p in [1/2, 1).

    alpha is the quadratic-minus-entropy exponent
        alpha(w) = (w - p)^2 / (2 p q) - KL(w || p),        q = 1 - p,
    which vanishes to second order at w = p and is strictly negative and
    decreasing on (p, 1). beta collects the subexponential part; it is
    strictly positive and strictly increasing on (p, 1).
    """

    p: float

    def __post_init__(self):
        _validate_half_open_p(self.p, probe=False)

    @staticmethod
    def _check_w(w) -> np.ndarray:
        arr = np.asarray(w, dtype=float)
        if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any((arr <= 0.0) | (arr >= 1.0)):
            raise DomainError("w must lie strictly inside (0, 1)")
        return arr

    def _ret(self, w, out: np.ndarray):
        return float(out) if (np.isscalar(w) or np.asarray(w).ndim == 0) else out

    def alpha(self, w):
        arr = self._check_w(w)
        p, q = self.p, 1.0 - self.p
        kl = arr * np.log(arr / p) + (1.0 - arr) * np.log((1.0 - arr) / q)
        return self._ret(w, (arr - p) ** 2 / (2.0 * p * q) - kl)

    def alpha_prime(self, w):
        arr = self._check_w(w)
        p, q = self.p, 1.0 - self.p
        out = -np.log(arr / (1.0 - arr)) + arr / (p * q) + math.log(p / q) - 1.0 / q
        return self._ret(w, out)

    def alpha_second(self, w):
        arr = self._check_w(w)
        p, q = self.p, 1.0 - self.p
        return self._ret(w, 1.0 / (p * q) - 1.0 / arr - 1.0 / (1.0 - arr))

    def alpha_third(self, w):
        arr = self._check_w(w)
        return self._ret(w, 1.0 / arr**2 - 1.0 / (1.0 - arr) ** 2)

    def alpha_fourth(self, w):
        arr = self._check_w(w)
        return self._ret(w, -2.0 / arr**3 - 2.0 / (1.0 - arr) ** 3)

    def beta(self, w, n: int):
        arr = self._check_w(w)
        p, q = self.p, 1.0 - self.p
        out = (
            -0.5 * np.log(arr * (1.0 - arr))
            + arr / (p * q)
            - math.log(2.0)
            - 1.0 / q
            + (1.0 / 12.0 + 1.0 / (2.0 * p * q)) / n
        )
        return self._ret(w, out)

    def g(self, w, n: int):
        arr = self._check_w(w)
        return self._ret(w, self.alpha(arr) * n + self.beta(arr, n))


def _fd5_first(f, w: np.ndarray, h: np.ndarray) -> np.ndarray:
    # five-point central first-derivative stencil, O(h^4)
    return (f(w - 2 * h) - 8 * f(w - h) + 8 * f(w + h) - f(w + 2 * h)) / (12.0 * h)


@dataclass(frozen=True)
class AlphaDerivativeCheck:
    """Finite-difference verification record for the exponent derivatives."""

    p: float
    rel_err_first: float
    rel_err_second: float
    rel_err_third: float
    rel_err_fourth: float
    stationary_residuals: tuple  # (alpha(p), alpha'(p), alpha''(p))
    negative_decreasing_on_interval: bool
    third_negative_on_interval: bool
    fourth_negative_on_interval: bool
    third_at_center: float
    third_center_reference: float  # (1 - 2p) / ((1-p)^2 p^2)
    third_range_on_interval: tuple  # (min, max) over sampled (p, 1)
    third_is_constant_on_interval: bool


def alpha_derivative_check(p: float) -> AlphaDerivativeCheck:
    """Cross-validate the exponent derivatives against finite differences.

    Each closed-form derivative is differenced once and compared with the
    closed form one order higher, on 16 interior points of (p, 1) with a
    stencil width proportional to the distance from the endpoints. Also
    records the behavior of the third derivative 1/w^2 - 1/(1-w)^2: it is
    negative on (p, 1) and equals (1 - 2p) / ((1-p)^2 p^2) at w = p, but it
    is not constant in w (its sampled range is reported).
    """
    bf = BoundFunctions(p)
    q = 1.0 - p
    w = p + np.linspace(0.05, 0.90, 16) * q
    h = 2e-3 * np.minimum(w, 1.0 - w)

    def rel_err(fd, closed):
        scale = np.maximum(np.abs(closed), 1e-8)
        return float(np.max(np.abs(fd - closed) / scale))

    e1 = rel_err(_fd5_first(bf.alpha, w, h), bf.alpha_prime(w))
    e2 = rel_err(_fd5_first(bf.alpha_prime, w, h), bf.alpha_second(w))
    e3 = rel_err(_fd5_first(bf.alpha_second, w, h), bf.alpha_third(w))
    e4 = rel_err(_fd5_first(bf.alpha_third, w, h), bf.alpha_fourth(w))

    fine = p + np.linspace(1e-4, 1.0 - 1e-4, 512) * q
    a = bf.alpha(fine)
    neg_dec = bool(np.all(a < 0.0) and np.all(np.diff(a) < 0.0))
    third = bf.alpha_third(fine)
    fourth = bf.alpha_fourth(fine)
    third_at_p = bf.alpha_third(p) if p > 0.0 else math.nan
    ref = (1.0 - 2.0 * p) / (q * q * p * p)
    t_min, t_max = float(np.min(third)), float(np.max(third))
    return AlphaDerivativeCheck(
        p=p,
        rel_err_first=e1,
        rel_err_second=e2,
        rel_err_third=e3,
        rel_err_fourth=e4,
        stationary_residuals=(bf.alpha(p), bf.alpha_prime(p), bf.alpha_second(p)),
        negative_decreasing_on_interval=neg_dec,
        third_negative_on_interval=bool(np.all(third < 0.0)),
        fourth_negative_on_interval=bool(np.all(fourth < 0.0)),
        third_at_center=float(third_at_p),
        third_center_reference=ref,
        third_range_on_interval=(t_min, t_max),
        third_is_constant_on_interval=bool(t_max - t_min <= 1e-9 * max(1.0, abs(t_min))),
    )


def local_ratio(grid: BinomialGrid, k: int, side: str, log: bool = False) -> float:
    """Cell-level dominance ratio f_{n,k} / (dz * phi(z neighbor)).

    side="right" uses the neighbor z[k+1] and admits floor(np) <= k <= n;
    side="left" uses z[k-1] and admits 0 <= k <= ceil(np). With log=True the
    log-ratio is returned instead (the linear value can overflow far in the
    heavy tail of a skewed law).

    Raises
    ------
    UsageError
        If side is not "left" or "right".
    DomainError
        If k lies outside the admissible range for the side.
    """
    if side not in ("left", "right"):
        raise UsageError(f"side must be 'left' or 'right', got {side!r}")
    n, mean = grid.n, grid.n * grid.p
    if side == "right":
        lo, hi, shift = math.floor(mean), n, +1
    else:
        lo, hi, shift = 0, math.ceil(mean), -1
    if not isinstance(k, (int, np.integer)) or k < lo or k > hi:
        raise DomainError(f"k = {k} outside the {side}-side range [{lo}, {hi}]")
    log_r = float(
        grid.logf[k] - math.log(grid.dz) - GaussianRef.logpdf(grid.z_at(k + shift))
    )
    return log_r if log else _exp_or_inf(log_r)


@dataclass(frozen=True)
class GlobalDominance:
    """Global cdf/survival dominance constants; iterates as (left, right)."""

    c_global_left: float
    c_global_right: float
    log_c_global_left: float
    log_c_global_right: float
    argmax_left: int
    argmax_right: int

    def __iter__(self):
        yield self.c_global_left
        yield self.c_global_right


def global_tail_dominance(grid: BinomialGrid, gauss=GaussianRef) -> GlobalDominance:
    """sup of F_n/Phi over grid points <= 0 and of survival ratios over >= 0.

    The sup over grid points is the true sup: between atoms the binomial cdf
    is flat while the Gaussian factor moves monotonically, so each ratio is
    piecewise monotone between atoms and peaks at an atom.
    """
    log_cdf_atoms = log_prefix_sums(grid.logf)
    log_sf_atoms = log_suffix_sums(grid.logf)  # inclusive: P[law >= z[k]]
    left = grid.z <= 0.0
    right = grid.z >= 0.0
    lr_left = log_cdf_atoms[left] - gauss.log_cdf(grid.z[left])
    lr_right = log_sf_atoms[right] - gauss.log_survival(grid.z[right])
    i_left = int(np.argmax(lr_left))
    i_right = int(np.argmax(lr_right))
    log_cl = float(lr_left[i_left])
    log_cr = float(lr_right[i_right])
    return GlobalDominance(
        c_global_left=_exp_or_inf(log_cl),
        c_global_right=_exp_or_inf(log_cr),
        log_c_global_left=log_cl,
        log_c_global_right=log_cr,
        argmax_left=int(np.nonzero(left)[0][i_left]),
        argmax_right=int(np.nonzero(right)[0][i_right]),
    )


@dataclass(frozen=True)
class TailBoundReport:
    """Sharp dominance constants for one (n, p), from exhaustive cell scans.

    Linear constants can overflow to inf for the heavy tail of a skewed law
    (p > 1/2, left side); the log_* fields are always finite.
    """

    n: int
    p: float
    c_right: float
    c_left: float
    argmax_right: int
    argmax_left: int
    c_global_right: float
    c_global_left: float
    log_c_right: float
    log_c_left: float
    log_c_global_right: float
    log_c_global_left: float

    def remark_consistent(self, slack: float = 1e-9) -> bool:
        """Global constants never exceed the local ones (tail-sum argument)."""
        return (
            self.log_c_global_right <= self.log_c_right + slack
            and self.log_c_global_left <= self.log_c_left + slack
        )

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "c_right": self.c_right,
            "c_left": self.c_left,
            "argmax_right": self.argmax_right,
            "argmax_left": self.argmax_left,
            "c_global_right": self.c_global_right,
            "c_global_left": self.c_global_left,
            "log_c_right": self.log_c_right,
            "log_c_left": self.log_c_left,
            "log_c_global_right": self.log_c_global_right,
            "log_c_global_left": self.log_c_global_left,
        }


def minimal_constant(n: int, p: float, probe: bool = False) -> TailBoundReport:
    """Scan every admissible cell on both sides and report sharp constants.

    The right scan covers floor(np) <= k <= n against the neighbor z[k+1];
    the left scan covers 0 <= k <= ceil(np) against z[k-1]. Global constants
    come from the same grid via log-space prefix sums. probe=True allows
    p < 1/2 (observation only; no dominance guarantee exists there).
    """
    p = _validate_half_open_p(p, probe)
    grid = build_grid(n, p)
    mean = n * p
    log_dz = math.log(grid.dz)

    ks_r = np.arange(math.floor(mean), n + 1)
    lr_r = grid.logf[ks_r] - log_dz - GaussianRef.logpdf(grid.z_at(ks_r + 1))
    i_r = int(np.argmax(lr_r))

    ks_l = np.arange(0, math.ceil(mean) + 1)
    lr_l = grid.logf[ks_l] - log_dz - GaussianRef.logpdf(grid.z_at(ks_l - 1))
    i_l = int(np.argmax(lr_l))

    gd = global_tail_dominance(grid)
    log_cr = float(lr_r[i_r])
    log_cl = float(lr_l[i_l])
    return TailBoundReport(
        n=n,
        p=p,
        c_right=_exp_or_inf(log_cr),
        c_left=_exp_or_inf(log_cl),
        argmax_right=int(ks_r[i_r]),
        argmax_left=int(ks_l[i_l]),
        c_global_right=gd.c_global_right,
        c_global_left=gd.c_global_left,
        log_c_right=log_cr,
        log_c_left=log_cl,
        log_c_global_right=gd.log_c_global_right,
        log_c_global_left=gd.log_c_global_left,
    )


@dataclass(frozen=True)
class GBoundCheck:
    """Worst margin of the analytic certificate over the right-hand cells."""

    n: int
    p: float
    max_margin: float
    argmax_k: int | None
    checked_count: int


def g_bound_check(n: int, p: float) -> GBoundCheck:
    """Max over floor(np) < k <= n-1 of the certificate margin.

    The margin is log(sqrt(np(1-p)) f_{n,k} / phi(z[k+1])) - g(k/n, n); the
    certificate holds when the max is <= 0 (up to rounding). The extreme cell
    k = n is excluded here and handled by its explicit decay comparison in
    the scans and tests.
    """
    p = _validate_half_open_p(p, probe=False)
    grid = build_grid(n, p)
    bf = BoundFunctions(p)
    lo = math.floor(n * p) + 1
    ks = np.arange(lo, n)  # floor(np) < k <= n-1
    if ks.size == 0:
        return GBoundCheck(n=n, p=p, max_margin=-math.inf, argmax_k=None, checked_count=0)
    log_ratio = grid.logf[ks] - math.log(grid.dz) - GaussianRef.logpdf(grid.z_at(ks + 1))
    margins = log_ratio - bf.g(ks / n, n)
    i = int(np.argmax(margins))
    return GBoundCheck(
        n=n,
        p=p,
        max_margin=float(margins[i]),
        argmax_k=int(ks[i]),
        checked_count=int(ks.size),
    )
