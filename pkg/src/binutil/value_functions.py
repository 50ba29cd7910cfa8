"""Dual and primal value functions for the lattice and Gaussian markets.

The Gaussian market prices with density exp(-x/2 - 1/8) against a standard
normal factor; the n-step lattice prices with exp(-a z - b) against the
standardized binomial grid. For a utility conjugate V the dual values are

    v(y)   = integral of V(y exp(-x/2 - 1/8)) phi(x) dx,
    v_n(y) = sum_k V(y exp(-a z_k - b)) f_k,

and the primal values come from u(x) = inf_y [v(y) + x y], located by
root-finding on v'(y) + x = 0. Dual integrands are assembled through the
log-argument utility kernels so extreme grid points never overflow.

All evaluations return a ValuePoint carrying an error estimate: adaptive
quadrature remainder plus truncation mass for the continuous model, a
compensated-summation bound for the lattice. Divergent or non-evaluable
points are reported as non-finite values with a reason, not exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import log_ndtr, logsumexp

from .binomial_core import BinomialGrid, GaussianRef, build_grid
from .errors import DomainError, EvaluationError, UsageError
from .martingale import DensityEval, MartingaleCoefficients, coefficients
from .stable import MACHINE_EPS, exp_sum, recursive_sum_error_bound
from .tail_bounds import TailBoundReport, minimal_constant

_QUAD_EPSABS = 1e-13
_QUAD_EPSREL = 1e-12
_EDGE_TARGET = 1e-17
_L_START = 8.0
_L_MAX = 400.0
_L_STEP = 4.0
_BRACKET_LO = math.log(1e-12)
_BRACKET_HI = math.log(1e12)
_NEGLIGIBLE_LOG_WEIGHT = -700.0


@dataclass(frozen=True)
class ValuePoint:
    """One evaluated value with its numerical error estimate.

    n is None for continuous-model values. A point that could not be
    produced as a finite number carries finite=False and a reason.
    """

    argument: float
    value: float
    error_estimate: float
    n: int | None = None
    finite: bool = True
    reason: str | None = None


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    value: float
    gap: float
    error_estimate: float
    finite: bool = True
    reason: str | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    """Lattice values against the continuous limit, sorted by n.

    gap is row value minus continuous value, as stored (no re-rounding).
    """

    p: float
    utility: str
    argument: float
    mode: str  # "dual" | "primal"
    rows: tuple[ConvergenceRow, ...]
    continuous: ValuePoint

    def final_gap(self) -> float:
        last = self.rows[-1]
        if not last.finite or not self.continuous.finite:
            return math.inf
        return abs(last.gap)

    def gaps_below(self, tol: float) -> bool:
        return self.final_gap() <= tol

    def dual_sign_consistent(self, tol: float) -> bool:
        """Large-n rows sit in [v - tol, v + tol]; vacuous for primal mode."""
        if self.mode != "dual":
            return True
        tail = self.rows[-max(1, len(self.rows) // 4):]
        if not all(r.finite for r in tail) or not self.continuous.finite:
            return False
        v = self.continuous.value
        return all(v - tol <= r.value <= v + tol for r in tail)


def _check_positive_arg(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a finite positive number, got {value}")
    return value


def _check_pair(grid: BinomialGrid, coeffs: MartingaleCoefficients) -> None:
    if grid.n != coeffs.n or grid.p != coeffs.p:
        raise UsageError(
            f"grid (n={grid.n}, p={grid.p}) does not match "
            f"coefficients (n={coeffs.n}, p={coeffs.p})"
        )


def continuous_payoff(spec, y: float, x):
    """H(x) = V(y exp(-x/2 - 1/8)); scalar or array in x."""
    logy = math.log(_check_positive_arg("y", y))
    return spec.conjugate_log_arg(logy + DensityEval.continuous_log_density(x))


def discrete_payoff(spec, y: float, coeffs: MartingaleCoefficients, z):
    """H_n(z) = V(y exp(-a z - b)); scalar or array in z."""
    logy = math.log(_check_positive_arg("y", y))
    z = np.asarray(z, dtype=float)
    out = spec.conjugate_log_arg(logy - coeffs.a * z - coeffs.b)
    return out


def _domain_edge(f, good: float, bad: float) -> float:
    """Largest |x| toward bad where f still evaluates; f(good) must work."""
    for _ in range(60):
        mid = 0.5 * (good + bad)
        try:
            f(mid)
            good = mid
        except DomainError:
            bad = mid
    return good


def _gaussian_quadrature(f, lo: float | None = None, hi: float | None = None):
    """Integrate f(x) phi(x) dx with expanding truncation.

    Returns (value, error_estimate, reason). The window grows from
    [-8, 8] until the boundary integrand magnitude drops below 1e-17 or
    the window hits +-400; a still-large boundary at the cap is reported
    as divergence. A DomainError at the boundary (tabulated utilities)
    clamps the window to the evaluable range and books the edge magnitude
    times the remaining Gaussian mass as extra truncation error.
    """
    lo = -_L_START if lo is None else lo
    hi = _L_START if hi is None else hi
    reason = None
    extra = 0.0
    lo_done = False
    hi_done = False
    mag_lo = 0.0
    mag_hi = 0.0

    def edge_mag(x: float) -> float:
        return abs(f(x)) * GaussianRef.pdf(x)

    while not (lo_done and hi_done):
        if not hi_done:
            try:
                mag_hi = edge_mag(hi)
            except DomainError:
                hi = _domain_edge(f, 0.0, hi)
                extra += abs(f(hi)) * (GaussianRef.pdf(hi) + GaussianRef.survival(hi))
                reason = "integrand undefined beyond the tabulated range; truncated"
                mag_hi = 0.0
                hi_done = True
            if mag_hi <= _EDGE_TARGET:
                hi_done = True
            elif hi >= _L_MAX:
                return math.inf, math.inf, (
                    f"integrand magnitude {mag_hi:.3e} at the x={_L_MAX:g} "
                    "truncation cap; integral treated as divergent"
                )
            else:
                hi += _L_STEP
        if not lo_done:
            try:
                mag_lo = edge_mag(lo)
            except DomainError:
                lo = _domain_edge(f, 0.0, lo)
                extra += abs(f(lo)) * (GaussianRef.pdf(lo) + GaussianRef.cdf(lo))
                reason = "integrand undefined beyond the tabulated range; truncated"
                mag_lo = 0.0
                lo_done = True
            if mag_lo <= _EDGE_TARGET:
                lo_done = True
            elif lo <= -_L_MAX:
                return math.inf, math.inf, (
                    f"integrand magnitude {mag_lo:.3e} at the x=-{_L_MAX:g} "
                    "truncation cap; integral treated as divergent"
                )
            else:
                lo -= _L_STEP
    value, quad_err = quad(
        lambda x: f(x) * GaussianRef.pdf(x),
        lo,
        hi,
        epsabs=_QUAD_EPSABS,
        epsrel=_QUAD_EPSREL,
        limit=400,
    )
    return value, quad_err + 2.0 * max(mag_lo, mag_hi) + extra, reason


def v_continuous(spec, y: float) -> ValuePoint:
    """Dual value of the Gaussian market at y, by adaptive quadrature."""
    y = _check_positive_arg("y", y)
    logy = math.log(y)

    def payoff(x: float) -> float:
        return spec.conjugate_log_arg(logy - 0.5 * x - 0.125)

    value, err, reason = _gaussian_quadrature(payoff)
    if not math.isfinite(value):
        return ValuePoint(
            argument=y, value=math.inf, error_estimate=math.inf,
            finite=False, reason=reason,
        )
    return ValuePoint(argument=y, value=value, error_estimate=err, n=None,
                      finite=True, reason=reason)


def v_discrete(spec, grid: BinomialGrid, coeffs: MartingaleCoefficients,
               y: float) -> ValuePoint:
    """Dual value of the n-step lattice at y, by compensated summation."""
    _check_pair(grid, coeffs)
    y = _check_positive_arg("y", y)
    t = math.log(y) - coeffs.a * grid.z - coeffs.b
    lw = grid.logf
    if spec.family == "custom":
        # A tabulated conjugate is bounded on its domain, so terms whose
        # weight underflows past 1e-304 cannot move the sum.
        keep = lw > _NEGLIGIBLE_LOG_WEIGHT
        t, lw = t[keep], lw[keep]
    value, abs_sum = spec.conjugate_weighted_sum(t, lw)
    err = recursive_sum_error_bound(int(t.size), abs_sum)
    if not math.isfinite(value):
        return ValuePoint(
            argument=y, value=math.copysign(math.inf, value) if not math.isnan(value) else math.inf,
            error_estimate=math.inf, n=grid.n, finite=False,
            reason="lattice sum overflowed despite log-range evaluation",
        )
    return ValuePoint(argument=y, value=value, error_estimate=err, n=grid.n)


class ContinuousDual:
    """v(y) and v'(y) for the Gaussian market, both by quadrature.

    v'(y) = -E[exp(-x/2 - 1/8) I(y exp(-x/2 - 1/8))] with I the inverse
    marginal; the integrand is assembled in log space.
    """

    def __init__(self, spec):
        self.spec = spec

    def value(self, y: float) -> ValuePoint:
        return v_continuous(self.spec, y)

    def derivative(self, y: float) -> float:
        y = _check_positive_arg("y", y)
        logy = math.log(y)

        def mass(x: float) -> float:
            lx = -0.5 * x - 0.125
            return -math.exp(lx + self.spec.log_inverse_marginal_log_arg(logy + lx))

        value, _err, reason = _gaussian_quadrature(mass)
        if not math.isfinite(value):
            raise EvaluationError(f"dual derivative diverged at y={y}: {reason}")
        return value


class DiscreteDual:
    """v_n(y) and v_n'(y) on a fixed (grid, coeffs) pair.

    v_n'(y) = -sum_k m_k I(y m_k) f_k with m_k = exp(-a z_k - b), summed as
    exponentials of logs so extreme grid points stay harmless.
    """

    def __init__(self, spec, grid: BinomialGrid, coeffs: MartingaleCoefficients):
        _check_pair(grid, coeffs)
        self.spec = spec
        self.grid = grid
        self.coeffs = coeffs
        self._log_mult = -coeffs.a * grid.z - coeffs.b

    def value(self, y: float) -> ValuePoint:
        return v_discrete(self.spec, self.grid, self.coeffs, y)

    def derivative(self, y: float) -> float:
        y = _check_positive_arg("y", y)
        logy = math.log(y)
        lm = self._log_mult
        lw = self.grid.logf
        if self.spec.family == "custom":
            keep = lw > _NEGLIGIBLE_LOG_WEIGHT
            lm, lw = lm[keep], lw[keep]
        log_terms = lm + self.spec.log_inverse_marginal_log_arg(logy + lm) + lw
        return -exp_sum(log_terms)


def u_from_v(spec, v_evaluator, x: float) -> ValuePoint:
    """Primal value u(x) = inf_y [v(y) + x y] via the first-order condition.

    Root-finds v'(y) + x = 0 on log y over [log 1e-12, log 1e12], expanding
    the bracket if the sign change lies outside, and requires the first-order
    residual |v'(y*) + x| <= 1e-8 x.

    Raises
    ------
    EvaluationError
        If no minimizer is bracketed after expansion or the residual check
        fails.
    """
    x = _check_positive_arg("x", x)

    def slope(t: float) -> float:
        try:
            return v_evaluator.derivative(math.exp(t))
        except DomainError:
            # Out-of-domain y on a tabulated spec: small y drives the
            # optimizer argument up (slope -> -inf side), large y down.
            return -math.inf if t < 0.0 else -0.0

    lo, hi = _BRACKET_LO, _BRACKET_HI
    while slope(lo) + x > 0.0 and lo > -700.0:
        lo -= 50.0
    while slope(hi) + x < 0.0 and hi < 700.0:
        hi += 50.0
    if not (slope(lo) + x <= 0.0 <= slope(hi) + x):
        raise EvaluationError(
            f"no stationary y for x={x} in [exp({lo:.0f}), exp({hi:.0f})]"
        )
    t_star = brentq(lambda t: slope(t) + x, lo, hi,
                    xtol=1e-13, rtol=8.9e-16, maxiter=200)
    y_star = math.exp(t_star)
    residual = abs(v_evaluator.derivative(y_star) + x)
    if residual > 1e-8 * x:
        raise EvaluationError(
            f"first-order residual {residual:.3e} exceeds 1e-8*x at x={x}"
        )
    vp = v_evaluator.value(y_star)
    value = vp.value + x * y_star
    err = vp.error_estimate + residual * y_star + 4.0 * MACHINE_EPS * (
        abs(vp.value) + x * y_star
    )
    return ValuePoint(argument=x, value=value, error_estimate=err, n=vp.n,
                      finite=vp.finite, reason=vp.reason)


def _validate_n_list(n_list) -> tuple[int, ...]:
    ns = []
    for n in n_list:
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise UsageError(f"n values must be positive integers, got {n!r}")
        ns.append(int(n))
    if len(ns) == 0:
        raise UsageError("n list is empty")
    if any(b <= a for a, b in zip(ns[:-1], ns[1:])):
        raise UsageError(f"n list must be strictly ascending, got {ns}")
    return tuple(ns)


def convergence_sweep(spec, p: float, argument: float, mode: str,
                      n_list, probe: bool = False) -> ConvergenceTable:
    """Evaluate v_n (dual) or u_n (primal) along ascending n against the limit.

    Rows that fail to evaluate are recorded non-finite with the failure
    reason instead of aborting the sweep.
    """
    if mode not in ("dual", "primal"):
        raise UsageError(f"mode must be 'dual' or 'primal', got {mode!r}")
    ns = _validate_n_list(n_list)
    argument = _check_positive_arg("argument", argument)
    if mode == "dual":
        limit = v_continuous(spec, argument)
    else:
        limit = u_from_v(spec, ContinuousDual(spec), argument)
    rows = []
    for n in ns:
        grid = build_grid(n, p)
        coeffs = coefficients(n, p, probe=probe)
        try:
            if mode == "dual":
                pt = v_discrete(spec, grid, coeffs, argument)
            else:
                pt = u_from_v(spec, DiscreteDual(spec, grid, coeffs), argument)
            rows.append(ConvergenceRow(
                n=n, value=pt.value, gap=pt.value - limit.value,
                error_estimate=pt.error_estimate, finite=pt.finite,
                reason=pt.reason,
            ))
        except (DomainError, EvaluationError) as exc:
            rows.append(ConvergenceRow(
                n=n, value=math.nan, gap=math.nan, error_estimate=math.inf,
                finite=False, reason=str(exc),
            ))
    return ConvergenceTable(p=p, utility=spec.label, argument=argument,
                            mode=mode, rows=tuple(rows), continuous=limit)


# ---- uniform integrability ---------------------------------------------------


@dataclass(frozen=True)
class UIProbeReport:
    """Tail sums of the continuous payoff under the lattice laws.

    right_sums[i][j] is sum_k H(z_k) 1{H(z_k) > M_j} f_k on the n_i grid;
    left_sums uses |H| on {H < -M_j}. sup_* are sups over n per M.
    *_integrals[j] are the Gaussian integrals of H phi (resp. |H| phi) over
    the same super-level sets; dominance compares each lattice tail sum
    against the scanned per-(n, side) constant times that integral, in log
    space so astronomically large left-tail constants stay usable.
    """

    p: float
    utility: str
    y: float
    m_values: tuple[float, ...]
    n_values: tuple[int, ...]
    right_sums: tuple[tuple[float, ...], ...]
    left_sums: tuple[tuple[float, ...], ...]
    sup_right: tuple[float, ...]
    sup_left: tuple[float, ...]
    right_integrals: tuple[float, ...]
    left_integrals: tuple[float, ...]
    dominance_ok: bool
    dominance_failures: tuple[tuple[int, float, str, float, float], ...]
    probe: bool

    def sup_nonincreasing(self, slack: float = 1e-12) -> bool:
        r = all(b <= a + slack for a, b in zip(self.sup_right[:-1], self.sup_right[1:]))
        l = all(b <= a + slack for a, b in zip(self.sup_left[:-1], self.sup_left[1:]))
        return r and l

    def final_sups(self) -> tuple[float, float]:
        return self.sup_left[-1], self.sup_right[-1]


def _log_tail_sum(h: np.ndarray, logf: np.ndarray, mask: np.ndarray) -> float:
    """log of sum over mask of |h| f, with -inf for an empty set."""
    if not np.any(mask):
        return -math.inf
    return float(logsumexp(np.log(np.abs(h[mask])) + logf[mask]))


def _log_gauss_tail_integral(spec, y: float, m: float, side: str) -> float:
    """log of the Gaussian integral of |H| phi over {H > m} or {H < -m}.

    Closed lognormal-moment forms for the power and log families; adaptive
    quadrature over the level-set window for custom specs. Returns -inf for
    an empty set.
    """
    logy = math.log(y)
    if spec.family == "log":
        # H(x) = x/2 + c with c = -log y - 7/8.
        c = -logy - 0.875
        if side == "right":
            t = 2.0 * (m - c)
            mills = math.exp(log_ndtr(-t) - GaussianRef.logpdf(t))
            return GaussianRef.logpdf(t) + math.log(0.5 + c * mills)
        s = 2.0 * (-m - c)
        # integral of (-x/2 - c) phi over (-inf, s] = phi(s)/2 - c Phi(s)
        mills = math.exp(log_ndtr(s) - GaussianRef.logpdf(s))
        return GaussianRef.logpdf(s) + math.log(0.5 - c * mills)
    if spec.family == "power":
        g = spec.gamma
        s_exp = (g - 1.0) / g
        lam = -0.5 * s_exp
        log_cy = math.log(abs(g / (1.0 - g))) + s_exp * logy - s_exp * 0.125
        if g > 1.0:
            if side == "right":
                return -math.inf  # H < 0 everywhere
            thr = (2.0 / s_exp) * (log_cy - math.log(m))
            return log_cy + 0.5 * lam * lam + float(log_ndtr(thr - lam))
        if side == "left":
            return -math.inf  # H > 0 everywhere
        thr = (2.0 / s_exp) * (log_cy - math.log(m))
        return log_cy + 0.5 * lam * lam + float(log_ndtr(-(thr - lam)))
    # custom: locate the level-set window by bisection on H, then integrate.
    def payoff(x: float) -> float:
        return spec.conjugate_log_arg(logy - 0.5 * x - 0.125)

    def magnitude(x: float) -> float:
        return abs(payoff(x))

    # H is decreasing in the market factor direction of the argument, i.e.
    # increasing in x; {H > m} is a right ray, {H < -m} a left ray.
    probe_pts = np.linspace(-40.0, 40.0, 4001)
    vals = np.array([_safe_payoff(payoff, x) for x in probe_pts])
    if side == "right":
        mask = vals > m
    else:
        mask = vals < -m
    if not np.any(mask):
        return -math.inf
    xs = probe_pts[mask]
    lo, hi = float(xs.min()) - 0.02, float(xs.max()) + 0.02
    val, _err, _reason = _gaussian_quadrature(magnitude, lo=lo, hi=hi)
    return math.log(val) if val > 0.0 else -math.inf


def _safe_payoff(payoff, x: float) -> float:
    try:
        return payoff(x)
    except DomainError:
        return 0.0


def uniform_integrability_probe(
    spec,
    p: float,
    y: float,
    m_list,
    n_list,
    probe: bool = False,
    constants: dict[int, TailBoundReport] | None = None,
    slack: float = 1e-9,
) -> UIProbeReport:
    """Tail sums of H under the lattice laws, against Gaussian dominating bounds.

    For each (n, M) computes the positive tail sum over {H > M} and the
    magnitude sum over {H < -M}, reports sups over n per M, and checks each
    nonempty tail sum against c_side(n) times the Gaussian integral over the
    same super-level set (log-space comparison with relative slack).

    constants maps n to an already-computed TailBoundReport so a caller can
    reuse scan results across calls; missing entries are computed here and
    stored back into the mapping. Entries scanned at a different p are
    rejected.
    """
    y = _check_positive_arg("y", y)
    ns = _validate_n_list(n_list)
    ms = tuple(float(m) for m in m_list)
    if len(ms) == 0 or any(not math.isfinite(m) or m <= 0.0 for m in ms):
        raise UsageError(f"M values must be finite positive reals, got {m_list}")
    if any(b <= a for a, b in zip(ms[:-1], ms[1:])):
        raise UsageError("M list must be strictly ascending")
    if constants is None:
        constants = {}

    log_int_right = [_log_gauss_tail_integral(spec, y, m, "right") for m in ms]
    log_int_left = [_log_gauss_tail_integral(spec, y, m, "left") for m in ms]

    right_rows, left_rows, failures = [], [], []
    for n in ns:
        grid = build_grid(n, p)
        report = constants.get(n)
        if report is not None and report.p != p:
            raise UsageError(
                f"cached constants for n={n} were scanned at p={report.p}, not {p}"
            )
        if report is None:
            report = minimal_constant(n, p, probe=probe)
            constants[n] = report
        h = continuous_payoff(spec, y, grid.z)
        h = np.atleast_1d(np.asarray(h, dtype=float))
        log_dz = math.log(grid.dz)
        row_r, row_l = [], []
        for j, m in enumerate(ms):
            log_s_r = _log_tail_sum(h, grid.logf, h > m)
            log_s_l = _log_tail_sum(h, grid.logf, h < -m)
            row_r.append(math.exp(log_s_r) if log_s_r > -math.inf else 0.0)
            row_l.append(math.exp(log_s_l) if log_s_l > -math.inf else 0.0)
            bound_r = report.log_c_right + log_int_right[j]
            bound_l = report.log_c_left + log_int_left[j]
            if log_s_r > -math.inf and log_s_r > bound_r + math.log1p(slack):
                failures.append((n, m, "right", log_s_r, bound_r))
            if log_s_l > -math.inf and log_s_l > bound_l + math.log1p(slack):
                failures.append((n, m, "left", log_s_l, bound_l))
        right_rows.append(tuple(row_r))
        left_rows.append(tuple(row_l))

    sup_right = tuple(max(row[j] for row in right_rows) for j in range(len(ms)))
    sup_left = tuple(max(row[j] for row in left_rows) for j in range(len(ms)))
    return UIProbeReport(
        p=p, utility=spec.label, y=y, m_values=ms, n_values=ns,
        right_sums=tuple(right_rows), left_sums=tuple(left_rows),
        sup_right=sup_right, sup_left=sup_left,
        right_integrals=tuple(math.exp(v) for v in log_int_right),
        left_integrals=tuple(math.exp(v) for v in log_int_left),
        dominance_ok=len(failures) == 0,
        dominance_failures=tuple(failures),
        probe=probe,
    )
