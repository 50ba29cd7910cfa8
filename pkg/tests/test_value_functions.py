"""Tests for the dual and primal value evaluators.

Closed-form targets below were derived by hand for the three CRRA families
and reproduced independently with adaptive quadrature before freezing.
"""

import math

import numpy as np
import pytest

from binutil import (
    ContinuousDual,
    DiscreteDual,
    DomainError,
    UsageError,
    build_grid,
    coefficients,
    continuous_payoff,
    convergence_sweep,
    u_from_v,
    uniform_integrability_probe,
    v_continuous,
    v_discrete,
)
from binutil import value_functions as vf
from binutil.utility import custom, from_table, log_utility, power

# closed-form continuous values at y = 1 or x = 1
V_SPOTS = [
    ("log", None, -0.875),
    ("power", 2.0, -1.9384664689526883),  # -2 exp(-1/32)
    ("power", 0.5, 1.2840254166877414),  # exp(1/4)
    ("power", 5.0, -1.2252483416334441),  # -1.25 exp(-1/50)
]
U_SPOTS = [
    ("log", None, 0.125),
    ("power", 2.0, -0.93941306281347581),  # -exp(-1/16)
    ("power", 0.5, 2.2662969061336526),  # 2 exp(1/8)
    ("power", 5.0, -0.22620935450898988),  # -0.25 exp(-1/10)
]


def make_spec(family, gamma):
    return log_utility() if family == "log" else power(gamma)


@pytest.mark.parametrize("family,gamma,target", V_SPOTS)
def test_v_continuous_frozen_spots(family, gamma, target):
    vp = v_continuous(make_spec(family, gamma), 1.0)
    assert vp.value == pytest.approx(target, abs=1e-10)
    assert vp.finite and vp.error_estimate < 1e-9
    assert vp.reason is None


@pytest.mark.parametrize("family,gamma,target", U_SPOTS)
def test_u_continuous_frozen_spots(family, gamma, target):
    spec = make_spec(family, gamma)
    up = u_from_v(spec, ContinuousDual(spec), 1.0)
    assert up.value == pytest.approx(target, abs=1e-10)
    assert up.finite


def test_u_continuous_log_at_two():
    spec = log_utility()
    up = u_from_v(spec, ContinuousDual(spec), 2.0)
    assert up.value == pytest.approx(math.log(2.0) + 0.125, abs=1e-10)
    assert up.value == pytest.approx(0.81814718055994529, abs=1e-10)


def test_v_continuous_log_shift_rule():
    # v(y) = -log y - 1 + 1/8, so differences in y enter only through log y
    spec = log_utility()
    for y in (0.25, 1.0, 7.5):
        vp = v_continuous(spec, y)
        assert vp.value == pytest.approx(-math.log(y) - 0.875, abs=1e-11)


def test_v_continuous_power_scaling_rule():
    # the power conjugate is homogeneous: v(y) = v(1) y^((gamma-1)/gamma)
    spec = power(2.0)
    base = v_continuous(spec, 1.0).value
    for y in (0.5, 3.0):
        assert v_continuous(spec, y).value == pytest.approx(
            base * y**0.5, rel=1e-11
        )


def test_v_discrete_two_point_hand_values():
    grid = build_grid(1, 0.5)
    co = coefficients(1, 0.5)
    z0, z1 = grid.z
    m0 = math.exp(-co.a * z0 - co.b)
    m1 = math.exp(-co.a * z1 - co.b)
    hand_log = 0.5 * (-math.log(m0) - 1.0) + 0.5 * (-math.log(m1) - 1.0)
    vp = v_discrete(log_utility(), grid, co, 1.0)
    assert vp.value == pytest.approx(hand_log, rel=1e-15)
    assert vp.value == pytest.approx(-0.87988549304172237, rel=1e-14)
    hand_pow = 0.5 * (-2.0 * math.sqrt(m0)) + 0.5 * (-2.0 * math.sqrt(m1))
    vp2 = v_discrete(power(2.0), grid, co, 1.0)
    assert vp2.value == pytest.approx(hand_pow, rel=1e-15)
    assert vp2.value == pytest.approx(-1.942585330928901, rel=1e-14)


@pytest.mark.parametrize("family,gamma", [("log", None), ("power", 2.0), ("power", 0.5)])
def test_v_discrete_matches_direct_sum(family, gamma):
    spec = make_spec(family, gamma)
    grid = build_grid(64, 0.6)
    co = coefficients(64, 0.6)
    y = 1.3
    f = np.exp(grid.logf)
    mult = np.exp(-co.a * grid.z - co.b)
    direct = math.fsum(fk * spec.conjugate(y * mk) for fk, mk in zip(f, mult))
    vp = v_discrete(spec, grid, co, y)
    assert vp.value == pytest.approx(direct, rel=1e-13)
    assert vp.error_estimate < 1e-12 * abs(direct) + 1e-15


def test_log_gap_is_exactly_the_normalizer_shift():
    # for log utility v_n(y) - v(y) = b_n - 1/8 for every y, since the
    # density enters only through E[log density]
    spec = log_utility()
    for n, y in ((1, 1.0), (16, 0.5), (256, 2.0)):
        grid = build_grid(n, 0.5)
        co = coefficients(n, 0.5)
        gap = v_discrete(spec, grid, co, y).value - (-math.log(y) - 0.875)
        assert gap == pytest.approx(co.b - 0.125, abs=5e-15)


def test_pointwise_payoff_dominance_symmetric():
    # at p = 1/2 the lattice normalizer b_n < 1/8 inflates the density, and a
    # decreasing conjugate then sits below the continuous payoff cellwise
    grid = build_grid(32, 0.5)
    co = coefficients(32, 0.5)
    for spec in (log_utility(), power(2.0)):
        for y in (0.5, 1.0, 2.0):
            lattice = [
                spec.conjugate(y * math.exp(-co.a * z - co.b)) for z in grid.z
            ]
            cont = [
                spec.conjugate(y * math.exp(-0.5 * z - 0.125)) for z in grid.z
            ]
            assert all(l <= c + 1e-15 for l, c in zip(lattice, cont))


def test_continuous_payoff_matches_conjugate():
    spec = power(2.0)
    for x in (-2.0, 0.0, 1.5):
        direct = spec.conjugate(1.2 * math.exp(-0.5 * x - 0.125))
        assert continuous_payoff(spec, 1.2, x) == pytest.approx(direct, rel=1e-13)


def test_weak_duality_discrete():
    spec = power(2.0)
    grid = build_grid(32, 0.5)
    co = coefficients(32, 0.5)
    dual = DiscreteDual(spec, grid, co)
    x = 1.0
    u_val = u_from_v(spec, dual, x).value
    rng = np.random.default_rng(11)
    for y in np.exp(rng.uniform(-3, 3, size=16)):
        assert u_val <= v_discrete(spec, grid, co, float(y)).value + x * y + 1e-10


@pytest.mark.parametrize("family,gamma", [("log", None), ("power", 2.0), ("power", 5.0)])
def test_reconjugation_recovers_dual_value(family, gamma):
    """u(x*) = v(y) + x* y at the first-order point x* = -v'(y)."""
    spec = make_spec(family, gamma)
    grid = build_grid(48, 0.6)
    co = coefficients(48, 0.6)
    dual = DiscreteDual(spec, grid, co)
    rng = np.random.default_rng(3)
    for y in np.exp(rng.uniform(-2, 2, size=8)):
        y = float(y)
        xstar = -dual.derivative(y)
        assert xstar > 0
        u_val = u_from_v(spec, dual, xstar).value
        assert u_val == pytest.approx(
            v_discrete(spec, grid, co, y).value + xstar * y, abs=1e-6
        )


def test_dual_derivative_log_is_exact():
    spec = log_utility()
    dual = ContinuousDual(spec)
    for y in (0.3, 1.0, 4.0):
        assert dual.derivative(y) == pytest.approx(-1.0 / y, rel=1e-12)
    grid = build_grid(64, 0.5)
    co = coefficients(64, 0.5)
    ddual = DiscreteDual(spec, grid, co)
    # E[density] = 1 makes the discrete log derivative -1/y as well
    for y in (0.3, 1.0, 4.0):
        assert ddual.derivative(y) == pytest.approx(-1.0 / y, rel=1e-12)


def test_convergence_sweep_frozen_rows():
    tb = convergence_sweep(log_utility(), 0.5, 1.0, "dual", [16, 64, 256])
    assert tb.continuous.value == pytest.approx(-0.875, abs=1e-11)
    got = [(r.n, r.value, r.gap) for r in tb.rows]
    assert got[0][0] == 16
    assert got[0][1] == pytest.approx(-0.87532417089763292, rel=1e-13)
    assert got[0][2] == pytest.approx(-0.00032417089763281393, rel=1e-9)
    assert got[2][1] == pytest.approx(-0.87502033975546301, rel=1e-13)
    assert tb.final_gap() == pytest.approx(2.0339755462894793e-05, rel=1e-9)
    assert tb.mode == "dual" and tb.p == 0.5
    assert all(r.finite for r in tb.rows)


def test_convergence_sweep_gaps_shrink_primal():
    tb = convergence_sweep(power(2.0), 0.5, 1.0, "primal", [4, 16, 64, 256])
    gaps = [abs(r.gap) for r in tb.rows]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert tb.dual_sign_consistent(1e-3)


def test_convergence_sweep_dual_sign_at_half():
    # symmetric lattice values sit below the continuous value, so dual gaps
    # keep one sign while shrinking
    tb = convergence_sweep(log_utility(), 0.5, 1.0, "dual", [8, 32, 128])
    assert all(r.gap < 0 for r in tb.rows)
    assert tb.dual_sign_consistent(1e-3)


def test_convergence_sweep_validation():
    with pytest.raises(UsageError):
        convergence_sweep(log_utility(), 0.5, 1.0, "dual", [16, 8])
    with pytest.raises(UsageError):
        convergence_sweep(log_utility(), 0.5, 1.0, "dual", [0, 8])
    with pytest.raises(UsageError):
        convergence_sweep(log_utility(), 0.5, 1.0, "sideways", [8, 16])
    with pytest.raises(DomainError):
        convergence_sweep(log_utility(), 0.4, 1.0, "dual", [8, 16])
    tb = convergence_sweep(log_utility(), 0.4, 1.0, "dual", [8, 16], probe=True)
    assert len(tb.rows) == 2


def test_quadrature_window_expands(monkeypatch):
    # start the window far too narrow; the edge criterion must widen it until
    # the frozen spot value is still reproduced
    monkeypatch.setattr(vf, "_L_START", 2.0)
    vp = v_continuous(power(2.0), 1.0)
    assert vp.value == pytest.approx(-1.9384664689526883, abs=1e-10)


@pytest.mark.filterwarnings("ignore::UserWarning")
@pytest.mark.filterwarnings("ignore:The occurrence of roundoff error")
def test_table_utility_truncation_is_flagged(tmp_path):
    # a narrow tabulated domain forces integration cutoffs; the result must
    # stay finite and carry an explanatory reason
    xs = np.exp(np.linspace(-2.0, 2.0, 400))
    path = tmp_path / "narrow.csv"
    with open(path, "w") as fh:
        for x in xs:
            fh.write(f"{float(x)!r},{math.log(x)!r},{1.0 / float(x)!r}\n")
    spec = from_table(str(path))
    vp = v_continuous(spec, 1.0)
    assert vp.finite
    assert vp.reason is not None and "truncated" in vp.reason
    # still close to the untruncated log value, the tails carry little mass
    assert vp.value == pytest.approx(-0.875, abs=0.05)


def test_custom_value_matches_log_closed_form():
    spec = custom(math.log, lambda x: 1.0 / x)
    vp = v_continuous(spec, 1.0)
    assert vp.value == pytest.approx(-0.875, abs=1e-6)


UI_M = (1, 2, 4, 8)
UI_N = (16, 64, 256, 1024)


def test_ui_probe_frozen_sup_curves():
    rep = uniform_integrability_probe(log_utility(), 0.5, 1.0, UI_M, UI_N)
    assert rep.sup_right == pytest.approx(
        [8.7014280013510931e-05, 7.0940098010107059e-09, 1.2705986993167595e-22,
         3.4663217079326927e-74],
        rel=1e-10,
    )
    assert rep.sup_left == pytest.approx(
        [0.54796409606933982, 0.024594346814263125, 6.0429837418127893e-10,
         2.886110967883004e-47],
        rel=1e-10,
    )
    assert rep.right_integrals == pytest.approx(
        [9.8932716633019549e-05, 9.2918151206889439e-09, 3.7357184725561427e-22,
         6.9182845542879636e-70],
        rel=1e-10,
    )
    assert rep.dominance_ok
    assert rep.sup_nonincreasing()
    assert rep.dominance_failures == ()


def test_ui_probe_skewed_left_tail_slower():
    rep = uniform_integrability_probe(log_utility(), 0.75, 1.0, UI_M, UI_N)
    assert rep.sup_left == pytest.approx(
        [0.57753205562708554, 0.057791239130234595, 4.6277319239732053e-08,
         6.4378863667521759e-38],
        rel=1e-10,
    )
    assert rep.dominance_ok and rep.sup_nonincreasing()
    # the skewed left tail at the same cutoff holds more mass than symmetric
    sym = uniform_integrability_probe(log_utility(), 0.5, 1.0, UI_M, UI_N)
    assert rep.sup_left[2] > sym.sup_left[2]


def test_ui_probe_one_sided_families():
    # gamma > 1 keeps the payoff negative, so the right tail set is empty;
    # gamma < 1 keeps it positive, emptying the left set
    rep2 = uniform_integrability_probe(power(2.0), 0.5, 1.0, (1, 2), (16, 64))
    assert rep2.sup_right == (0.0, 0.0)
    assert all(s > 0 for s in rep2.sup_left)
    rep05 = uniform_integrability_probe(power(0.5), 0.5, 1.0, (1, 2), (16, 64))
    assert rep05.sup_left == (0.0, 0.0)
    assert all(s > 0 for s in rep05.sup_right)


def test_ui_probe_validation_and_probe_gate():
    with pytest.raises(UsageError):
        uniform_integrability_probe(log_utility(), 0.5, 1.0, (2, 1), (16,))
    with pytest.raises(UsageError):
        uniform_integrability_probe(log_utility(), 0.5, 1.0, (0, 1), (16,))
    with pytest.raises(DomainError):
        uniform_integrability_probe(log_utility(), 0.4, 1.0, (1, 2), (16,))
    rep = uniform_integrability_probe(
        log_utility(), 0.4, 1.0, (1, 2), (16,), probe=True
    )
    assert rep.probe


def test_ui_probe_reuses_constant_cache():
    cache = {}
    rep1 = uniform_integrability_probe(
        log_utility(), 0.5, 1.0, (1, 2), (16, 64), constants=cache
    )
    assert set(cache) == {16, 64}
    kept = {n: id(v) for n, v in cache.items()}
    rep2 = uniform_integrability_probe(
        power(2.0), 0.5, 1.0, (1, 2), (16, 64), constants=cache
    )
    assert {n: id(v) for n, v in cache.items()} == kept
    assert rep1.dominance_ok and rep2.dominance_ok
    # entries scanned at another p must not be silently reused
    with pytest.raises(UsageError):
        uniform_integrability_probe(
            log_utility(), 0.75, 1.0, (1, 2), (16,), constants=cache
        )


def test_value_point_rejects_bad_arguments():
    with pytest.raises(DomainError):
        v_continuous(log_utility(), 0.0)
    with pytest.raises(DomainError):
        v_continuous(log_utility(), -1.0)
    grid = build_grid(8, 0.5)
    co = coefficients(8, 0.5)
    with pytest.raises(DomainError):
        v_discrete(log_utility(), grid, co, float("nan"))
    with pytest.raises(UsageError):
        v_discrete(log_utility(), grid, coefficients(16, 0.5), 1.0)
    spec = log_utility()
    with pytest.raises(DomainError):
        u_from_v(spec, ContinuousDual(spec), -2.0)
