import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asympode.kernels import green_eval, make_roots
from asympode.poincare import PoincareProblem, riccati_reduction
from asympode.rhs import (MULTI_INDICES, CoefficientTable, QuadConfig, TailError, eval_rhs,
                          functionals_GL, hypothesis_report, omega_level_sum, parse_index,
                          tends_to_zero)

EX2 = PoincareProblem((24, 50, 35, 10), ("3/((cos(t)+2)*log(t))", 0, 0, 0), t0=2)


@pytest.fixture(scope="module")
def ex2_table():
    return riccati_reduction(EX2, -1.0).table


def test_multi_indices():
    assert len(MULTI_INDICES) == 35
    assert parse_index("1,2,0") == (1, 2, 0)
    with pytest.raises(ValueError):
        parse_index("3,2,0")


def test_eval_examples(ex2_table):
    tab = CoefficientTable({"1,0,0": "t", "0,2,1": "3"})
    assert eval_rhs(tab, 1.0, 0, 0, 0) == 0
    assert eval_rhs(CoefficientTable({"4,0,0": "-1"}), 1.0, 2, 0, 0) == -16
    r0 = 3 / ((math.cos(2) + 2) * math.log(2))
    assert eval_rhs(ex2_table, 2.0, 0, 0, 0) == pytest.approx(-r0, rel=1e-14)


def test_level_sums(ex2_table):
    assert omega_level_sum(CoefficientTable({}), 2, 1.0) == 0
    for t in (2.0, 5.0, 40.0):
        assert omega_level_sum(ex2_table, 4, t) == pytest.approx(1.0)
        # rows (2,0,0) and (0,2,0) give |-11| + 3 = 14; (1,1,0) and (1,0,1)
        # also have |alpha| = 2 and add 18 + 4
        two = abs(ex2_table.values(t)[(2, 0, 0)]) + abs(ex2_table.values(t)[(0, 2, 0)])
        assert two == pytest.approx(14.0)
        assert omega_level_sum(ex2_table, 2, t) == pytest.approx(36.0)
    signed = omega_level_sum(CoefficientTable({"0,0,0": "-2"}), 0, 1.0, signed=True)
    assert signed == -2


def test_split_invariant():
    tab = CoefficientTable({"1,0,0": {"lambda_p": 2.0, "omega_p": "1/t", "lambda_c": -0.5}})
    assert tab.split_errors(np.linspace(1, 10, 20))[(1, 0, 0)] < 1e-12
    assert eval_rhs(tab, 4.0, 1.0, 0, 0) == pytest.approx(0.0)


@given(st.floats(-2, 2), st.floats(0.5, 5.0), st.integers(1, 4))
def test_homogeneity(x, t, k):
    tab = CoefficientTable({f"{k},0,0": "1+1/t"})
    assert eval_rhs(tab, t, 2 * x, 0, 0) == pytest.approx(2**k * eval_rhs(tab, t, x, 0, 0), rel=1e-12, abs=1e-300)


@given(st.lists(st.floats(-0.5, 0.5), min_size=6, max_size=6), st.floats(0.0, 5.0))
def test_lipschitz_on_unit_ball(xs, t):
    tab = CoefficientTable({"0,0,0": "sin(t)", "1,0,0": "0.3", "1,1,0": "-exp(-t)",
                            "0,0,2": "0.1", "2,1,1": "0.05*cos(t)"})
    x, y = xs[:3], xs[3:]
    lhs = abs(eval_rhs(tab, t, *x) - eval_rhs(tab, t, *y))
    d = max(abs(a - b) for a, b in zip(x, y))
    # on the unit ball each degree-k monomial is k-Lipschitz in the max norm
    bound = sum(k * omega_level_sum(tab, k, t) for k in range(1, 5)) * d
    assert lhs <= bound + 1e-15


def _closed_L_of_one_negative(roots, t, t0):
    # L(1)(t) for the all-negative case: int_{t0}^t sum_d |sum_i w_i g_i^d e^{g_i u}| du
    from scipy.integrate import quad
    g, w = roots.gammas, roots.weights
    f = lambda u: sum(abs(sum(wi * gi**d * math.exp(gi * u) for gi, wi in zip(g, w))) for d in range(3))
    return quad(f, 0, t - t0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def test_GL_examples():
    r = make_roots(-1, -2, -3)
    q = QuadConfig(t0=0.0)
    res = functionals_GL(r, 0.0, 3.0, q)
    assert res.G == 0 and res.L == 0
    L3 = functionals_GL(r, 1.0, 3.0, q).L
    L6 = functionals_GL(r, 1.0, 6.0, q).L
    assert L3 == pytest.approx(_closed_L_of_one_negative(r, 3.0, 0.0), rel=1e-9)
    assert L6 == pytest.approx(_closed_L_of_one_negative(r, 6.0, 0.0), rel=1e-9)
    assert L3 != pytest.approx(L6, rel=1e-6)


def test_G_le_L_random():
    rng = np.random.default_rng(2)
    for g in ((-1, -2, -3), (1.5, -1, -2), (2, 1, -1), (3, 2, 1)):
        r = make_roots(*g)
        q = QuadConfig(t0=0.0)
        for _ in range(25):
            a, b, c = rng.normal(size=3)
            E = lambda s, a=a, b=b, c=c: a * np.sin(b * s) + c * np.exp(-0.1 * s)
            res = functionals_GL(r, E, float(rng.uniform(0, 8)), q)
            assert 0 <= res.G <= res.L + 1e-14


def test_GL_matches_direct_quadrature():
    from scipy.integrate import quad
    r = make_roots(2, -1, -3)
    E = lambda s: np.exp(-0.3 * s) * np.cos(s)
    t = 2.0
    vals = []
    for d in range(3):
        f = lambda s: green_eval(r, t, s, d) * E(s)
        vals.append(quad(f, 0, t, limit=200)[0] + quad(f, t, 60, limit=400)[0])
    res = functionals_GL(r, E, t, QuadConfig(t0=0.0))
    assert res.G == pytest.approx(sum(abs(v) for v in vals), rel=1e-8)


def test_tail_certification():
    r = make_roots(2, -1, -3)
    with pytest.raises(TailError):
        functionals_GL(r, 1.0, 2.0, QuadConfig(t0=0.0), require_certified=True)
    res = functionals_GL(r, 1.0, 2.0, QuadConfig(t0=0.0, sup_E=1.0), require_certified=True)
    assert res.certified and res.tail_bound < 1e-8
    longer = functionals_GL(r, 1.0, 2.0, QuadConfig(t0=0.0, sup_E=1.0, tail_rel=1e-14))
    assert abs(longer.L - res.L) <= res.tail_bound


def test_tends_to_zero_rule():
    ts = np.geomspace(1, 1e3, 20)
    assert tends_to_zero(ts, 1 / ts**2, 1.0)[0] == "pass"
    assert tends_to_zero(ts, 1 + 0 * ts, 1.0)[0] == "fail"
    assert tends_to_zero(ts, 1 / np.log(ts + 2), 1.0)[0] == "indeterminate"


def test_report_zero_table():
    rep = hypothesis_report(CoefficientTable({}), make_roots(-1, -2, -3), -0.5, 0.0, 200.0, n=8)
    assert all(c.status == "pass" for c in rep.checks)


def test_report_constant_level1_fails():
    tab = CoefficientTable({"1,0,0": "1"})
    rep = hypothesis_report(tab, make_roots(-1, -2, -3), -0.5, 0.0, 200.0, n=10)
    assert rep.status("L(level 1) -> 0") == "fail"
    assert rep.status("rho condition") == "fail"


def test_report_example2_level0_decreasing(ex2_table):
    roots = riccati_reduction(EX2, -1.0).roots
    rep = hypothesis_report(ex2_table, roots, roots.default_beta(), 2.0, 1e3, n=12)
    chk = [c for c in rep.checks if c.name == "G(level 0) -> 0"][0]
    assert chk.slope < 0
    # the first sample sits at t0 where the causal integral is empty
    assert chk.values[-1] < max(chk.values[1:])
