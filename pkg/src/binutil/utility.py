"""Utility functions with marginal-inverse and convex-conjugate access.

A spec bundles U, U', the inverse marginal I = (U')^{-1}, and the conjugate
V(y) = sup_x {U(x) - x y}, with U strictly increasing, strictly concave, and
marginal utility running from +inf at 0+ to 0 at +inf. Three families ship:

* power: U(x) = x^(1-gamma) / (1-gamma), gamma > 0, gamma != 1,
* log:   U(x) = log x,
* custom: caller-supplied (U, U') callables or a tabulated CSV, validated by
  sampling and inverted by bracketed root-finding. Tabulated specs are only
  piecewise-smooth between nodes and only defined on the tabulated range;
  arguments whose optimizer falls outside that range raise DomainError.

The closed CRRA families also expose log-argument evaluation paths
(V(e^t), log I(e^t)) so lattice expectations can be assembled entirely in
log space without intermediate overflow.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, EvaluationError, InvalidUtilityError, UsageError
from .stable import MACHINE_EPS


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a finite positive number, got {value}")
    return value


@dataclass(frozen=True)
class UtilitySpec:
    """One utility family instance; construct via power(), log_utility(),
    custom(), from_table(), or parse()."""

    family: str  # "power" | "log" | "custom"
    label: str
    gamma: float | None = None
    u_fn: Callable[[float], float] | None = field(default=None, repr=False)
    du_fn: Callable[[float], float] | None = field(default=None, repr=False)
    x_lo: float = 1e-12
    x_hi: float = 1e12

    # ---- direct evaluations -------------------------------------------------

    def evaluate(self, x: float) -> float:
        """U(x) for x > 0."""
        x = _check_positive("x", x)
        if self.family == "power":
            g = self.gamma
            return x ** (1.0 - g) / (1.0 - g)
        if self.family == "log":
            return math.log(x)
        return float(self.u_fn(x))

    def marginal(self, x: float) -> float:
        """U'(x) for x > 0."""
        x = _check_positive("x", x)
        if self.family == "power":
            return x ** (-self.gamma)
        if self.family == "log":
            return 1.0 / x
        return float(self.du_fn(x))

    def inverse_marginal(self, y: float) -> float:
        """x with U'(x) = y, accurate to 1e-10 relative in the marginal."""
        y = _check_positive("y", y)
        if self.family == "power":
            return y ** (-1.0 / self.gamma)
        if self.family == "log":
            return 1.0 / y
        return self._invert_marginal_custom(y)

    def conjugate(self, y: float) -> float:
        """V(y) = sup_x {U(x) - x y} for y > 0."""
        y = _check_positive("y", y)
        if self.family == "power":
            g = self.gamma
            return (g / (1.0 - g)) * y ** ((g - 1.0) / g)
        if self.family == "log":
            return -math.log(y) - 1.0
        x_star = self._invert_marginal_custom(y)
        return float(self.u_fn(x_star)) - x_star * y

    def conjugate_derivative(self, y: float) -> float:
        """V'(y) = -I(y)."""
        return -self.inverse_marginal(y)

    # ---- log-argument evaluations ------------------------------------------

    def conjugate_log_arg(self, t):
        """V(e^t); vectorized and overflow-safe for the closed families."""
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            g = self.gamma
            s = (g - 1.0) / g
            out = (g / (1.0 - g)) * np.exp(s * t)
        elif self.family == "log":
            out = -t - 1.0
        else:
            out = np.vectorize(lambda tt: self.conjugate(math.exp(tt)))(t)
        return float(out) if out.ndim == 0 else out

    def log_inverse_marginal_log_arg(self, t):
        """log I(e^t); linear in t for the closed families."""
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            out = -t / self.gamma
        elif self.family == "log":
            out = -t
        else:
            out = np.vectorize(
                lambda tt: math.log(self._invert_marginal_custom(math.exp(tt)))
            )(t)
        return float(out) if out.ndim == 0 else out

    def conjugate_weighted_sum(self, log_args, log_weights) -> tuple[float, float]:
        """(sum_k V(e^{t_k}) w_k, sum_k |V(e^{t_k})| w_k) with w_k = e^{lw_k}.

        Assembled in log space for the closed families so that no
        intermediate conjugate value overflows; compensated summation gives
        a correctly rounded total. For custom specs each term is evaluated
        directly; a term whose conjugate cannot be evaluated is dropped only
        when its weight is an exact floating-point zero.
        """
        t = np.asarray(log_args, dtype=float)
        lw = np.asarray(log_weights, dtype=float)
        if self.family == "power":
            g = self.gamma
            s = (g - 1.0) / g
            c = g / (1.0 - g)
            # A term that overflows is genuinely astronomically large; let it
            # saturate to inf so callers can flag divergence.
            with np.errstate(over="ignore"):
                terms = c * np.exp(s * t + lw)
        elif self.family == "log":
            terms = (-t - 1.0) * np.exp(lw)
        else:
            terms = np.empty(t.shape)
            for i, (tt, lwi) in enumerate(zip(t, lw)):
                try:
                    terms[i] = self.conjugate(math.exp(tt)) * math.exp(lwi)
                except (DomainError, OverflowError):
                    if math.exp(lwi) == 0.0:
                        terms[i] = 0.0
                    else:
                        raise EvaluationError(
                            f"conjugate not evaluable at log-argument {tt} "
                            f"with non-negligible weight exp({lwi})"
                        )
        return math.fsum(terms), math.fsum(np.abs(terms))

    # ---- custom-spec internals ----------------------------------------------

    def _invert_marginal_custom(self, y: float) -> float:
        du_lo = float(self.du_fn(self.x_lo))
        du_hi = float(self.du_fn(self.x_hi))
        if not du_hi <= y <= du_lo:
            raise DomainError(
                f"y = {y} outside the sampled marginal range "
                f"[{du_hi:.6g}, {du_lo:.6g}] of this custom spec"
            )
        t = brentq(
            lambda tt: float(self.du_fn(math.exp(tt))) - y,
            math.log(self.x_lo),
            math.log(self.x_hi),
            xtol=1e-13,
            rtol=8.9e-16,
            maxiter=200,
        )
        x_star = math.exp(t)
        if abs(float(self.du_fn(x_star)) - y) > 1e-10 * y:
            raise EvaluationError(f"marginal inversion stalled at y = {y}")
        return x_star


def _validate_custom(spec: UtilitySpec) -> None:
    xs = np.logspace(math.log10(spec.x_lo), math.log10(spec.x_hi), 64)
    u = np.array([float(spec.u_fn(x)) for x in xs])
    du = np.array([float(spec.du_fn(x)) for x in xs])
    if not np.all(np.isfinite(u)) or not np.all(np.isfinite(du)):
        raise InvalidUtilityError("custom spec produced non-finite samples")
    if np.any(du <= 0.0) or np.any(np.diff(du) >= 0.0):
        raise InvalidUtilityError(
            "custom marginal must be strictly positive and strictly decreasing"
        )
    if np.any(np.diff(u) <= 0.0):
        raise InvalidUtilityError("custom utility must be strictly increasing")
    mid = np.array([float(spec.u_fn(0.5 * (a + b))) for a, b in zip(xs[:-1], xs[1:])])
    if np.any(mid < 0.5 * (u[:-1] + u[1:]) - 1e-12 * np.maximum(1.0, np.abs(u[:-1]))):
        raise InvalidUtilityError("custom utility fails midpoint concavity")


def power(gamma: float) -> UtilitySpec:
    """Constant-relative-risk-aversion power utility, gamma > 0, gamma != 1."""
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0.0 or gamma == 1.0:
        raise DomainError(f"power utility needs gamma > 0, gamma != 1, got {gamma}")
    return UtilitySpec(family="power", label=f"power:{gamma:g}", gamma=gamma)


def log_utility() -> UtilitySpec:
    """Logarithmic utility."""
    return UtilitySpec(family="log", label="log")


def custom(
    u_fn: Callable[[float], float],
    du_fn: Callable[[float], float],
    x_lo: float = 1e-12,
    x_hi: float = 1e12,
    label: str = "custom",
) -> UtilitySpec:
    """Wrap caller-supplied (U, U') callables after sampling validation.

    Raises
    ------
    InvalidUtilityError
        If sampled U is not strictly increasing and midpoint-concave, or
        sampled U' is not strictly positive and strictly decreasing.
    """
    x_lo = _check_positive("x_lo", x_lo)
    x_hi = _check_positive("x_hi", x_hi)
    if x_hi <= x_lo:
        raise DomainError("x_hi must exceed x_lo")
    spec = UtilitySpec(
        family="custom", label=label, u_fn=u_fn, du_fn=du_fn, x_lo=x_lo, x_hi=x_hi
    )
    _validate_custom(spec)
    return spec


def from_table(path: str) -> UtilitySpec:
    """Load a tabulated spec from CSV rows (x, U(x), U'(x)), x strictly increasing.

    Values are joined by monotone piecewise-cubic interpolation, so the
    wrapped spec is continuous with monotone U' but only approximately smooth
    between the tabulated nodes.
    """
    xs, us, dus = [], [], []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if len(row) != 3:
                    raise InvalidUtilityError(
                        f"table rows need exactly (x, U, U'), got {row!r}"
                    )
                xs.append(float(row[0]))
                us.append(float(row[1]))
                dus.append(float(row[2]))
    except OSError as exc:
        raise UsageError(f"cannot read utility table {path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidUtilityError(f"non-numeric entry in utility table: {exc}") from exc
    if len(xs) < 4:
        raise InvalidUtilityError("utility table needs at least 4 rows")
    x = np.asarray(xs)
    if np.any(np.diff(x) <= 0.0):
        raise InvalidUtilityError("table x column must be strictly increasing")
    u_interp = PchipInterpolator(x, np.asarray(us), extrapolate=False)
    du_interp = PchipInterpolator(x, np.asarray(dus), extrapolate=False)

    def u_fn(xx: float) -> float:
        v = float(u_interp(xx))
        if math.isnan(v):
            raise DomainError(f"x = {xx} outside the tabulated range")
        return v

    def du_fn(xx: float) -> float:
        v = float(du_interp(xx))
        if math.isnan(v):
            raise DomainError(f"x = {xx} outside the tabulated range")
        return v

    spec = UtilitySpec(
        family="custom",
        label=f"table:{path}",
        u_fn=u_fn,
        du_fn=du_fn,
        x_lo=float(x[0]),
        x_hi=float(x[-1]),
    )
    _validate_custom(spec)
    return spec


def parse(spec_string: str) -> UtilitySpec:
    """Parse a CLI utility selector: "power:<gamma>", "log", "table:<path>".

    Raises
    ------
    UsageError
        If the selector has an unknown form.
    """
    s = spec_string.strip()
    if s == "log":
        return log_utility()
    if s.startswith("power:"):
        try:
            return power(float(s.split(":", 1)[1]))
        except ValueError as exc:
            raise UsageError(f"bad power selector {spec_string!r}") from exc
    if s.startswith("table:"):
        return from_table(s.split(":", 1)[1])
    raise UsageError(
        f"unknown utility selector {spec_string!r}; "
        "expected 'power:<gamma>', 'log', or 'table:<path>'"
    )
