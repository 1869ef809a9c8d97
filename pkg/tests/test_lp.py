import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asympode.kernels import make_roots
from asympode.lp import (MissingSplitError, decompose_solution, m_of_p, window_lp_growth,
                         window_lp_norm)
from asympode.examples import EX2_A
from asympode.poincare import PoincareProblem, riccati_reduction
from asympode.rhs import CoefficientTable
from asympode.solver import GridFunction, make_grid, solve_fixed_point

# level >= 1 rows carry a lambda_p / lambda_c split
SPLIT_TABLE = {
    "0,0,0": "0.5/(1+t)",
    "1,0,0": {"expr": "0.01 + 0.02/(1+t)", "lambda_p": 0.02, "omega_p": "1/(1+t)", "lambda_c": 0.01},
    "2,0,0": {"expr": "0.003", "omega_p": "0", "lambda_p": 0.0, "lambda_c": 0.003},
    "0,1,1": {"expr": "0.004/(1+t)^2", "lambda_p": 0.004, "omega_p": "1/(1+t)^2", "lambda_c": 0.0},
    "3,0,0": {"expr": "0.001", "lambda_p": 0.0, "omega_p": "0", "lambda_c": 0.001},
    "2,2,0": {"expr": "0.001*exp(-t)", "lambda_p": 0.001, "omega_p": "exp(-t)", "lambda_c": 0.0},
}


@pytest.mark.parametrize("p,m", [(1.5, 1), (2, 1), (2.5, 2), (3, 2), (3.5, 3), (4, 3), (10, 4),
                                 (1.0001, 1), (4.0001, 4)])
def test_m_of_p(p, m):
    assert m_of_p(p) == m


def test_m_of_p_rejects_p_le_one():
    with pytest.raises(ValueError):
        m_of_p(1.0)


def test_zero_norm():
    t = np.linspace(0, 5, 50)
    assert window_lp_norm(np.zeros_like(t), 2, t=t) == 0.0


def test_exponential_l2_norm():
    t0 = 0.5
    t = np.linspace(t0, t0 + 40, 40001)
    got = window_lp_norm(np.exp(-t), 2, t=t)
    assert math.isclose(got, math.sqrt(math.exp(-2 * t0) / 2), rel_tol=1e-6)


@given(st.floats(1, 6), st.floats(0.5, 9), st.floats(0.5, 9))
def test_norm_monotone_in_T(p, T1, T2):
    t = np.linspace(0, 10, 401)
    f = np.sin(3 * t) * np.exp(-0.1 * t)
    a, b = sorted((T1, T2))
    assert window_lp_norm(f, p, b, t=t) >= window_lp_norm(f, p, a, t=t) - 1e-15


def test_window_beyond_grid_rejected():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        window_lp_norm(np.ones_like(t), 2, 2.0, t=t)


@pytest.fixture(scope="module")
def solved():
    roots = make_roots(-1, -2, -3)
    tab = CoefficientTable(SPLIT_TABLE)
    z, _ = solve_fixed_point(tab, roots, 0.0, t_max=80.0)
    return z, tab, roots


@pytest.mark.parametrize("p", [1.5, 2, 2.5, 3, 3.5, 4, 10])
def test_reconstruction(solved, p):
    z, tab, roots = solved
    dec = decompose_solution(z, tab, roots, p)
    assert dec.m == m_of_p(p)
    assert len(dec.theta) == dec.m
    assert dec.reconstruction_error(z) < 1e-8


def test_grouping_tables(solved):
    z, tab, roots = solved
    d = decompose_solution(z, tab, roots, 1.5)
    assert d.groups["Theta1"] == ["I0", "I1c"]
    assert d.groups["Psi"] == ["I1p", "I2c", "I2p", "I3c", "I3p", "I4c", "I4p"]
    d = decompose_solution(z, tab, roots, 10)
    assert d.groups["Psi"] == ["I4p"]
    assert d.exponents["I2p"] == pytest.approx(10 / 3) and d.exponents["I2c"] == 5


def test_zero_table_exact():
    roots = make_roots(-1, -2, -3)
    t = make_grid(roots, 0.0, 10.0)
    z = GridFunction.zeros(t)
    dec = decompose_solution(z, CoefficientTable({}), roots, 2.5)
    assert dec.reconstruction_error(z) == 0.0
    assert all(np.all(c == 0) for th in dec.theta for c in th.channels)


def test_missing_split():
    roots = make_roots(-1, -2, -3)
    tab = CoefficientTable({"2,0,0": "1"})
    t = make_grid(roots, 0.0, 5.0)
    with pytest.raises(MissingSplitError):
        decompose_solution(GridFunction.zeros(t), tab, roots, 2)


def test_norm_stabilizes_for_lp_forcing():
    # Example 2 with r0 replaced by 1/(1+t), which lies in L^p for p > 1
    red = riccati_reduction(PoincareProblem(EX2_A, ("1/(1+t)", 0, 0, 0), t0=2.0), -1.0)
    z, diag = solve_fixed_point(red.table, red.roots, 2.0, t_max=1000.0)
    assert diag.max_ratio < 1
    g = [window_lp_growth(z, 3, channel=c) for c in range(3)]
    assert max(g) < 1e-2
