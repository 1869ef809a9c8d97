import math

import pytest

from asympode.examples import reproduce_example


@pytest.fixture(scope="module")
def ex2():
    return reproduce_example(2)


@pytest.fixture(scope="module")
def ex1():
    return reproduce_example(1)


def test_example_two_roots_match(ex2):
    assert ex2.row("root set").match


def test_example_two_F_values(ex2):
    assert ex2.row("F1(1)(t=5) [1]").match
    # printed form grows; flagged with the computed one
    r = ex2.row("F2(1)(t=5) [2-e^(t-2)]")
    assert not r.match and "e^(-1(t-2))" in r.note
    assert ex2.row("F3(1)(t=5) [2-e^-(t-2)]").match
    assert math.isclose(ex2.row("F2(1)(t=5) [2-e^(t-2)]").computed, 2 - math.exp(-3), rel_tol=1e-12)


def test_example_two_A_values(ex2):
    a1 = ex2.row("A1")
    assert not a1.match and a1.computed == pytest.approx(15.0)
    assert ex2.row("A2").match
    assert ex2.row("A3").match


def test_example_two_prefactors_and_betas(ex2):
    for i in range(1, 5):
        assert ex2.row(f"exponent prefactor y{i}").match
        assert ex2.row(f"beta interval root {i}").match


def test_every_row_labelled(ex2, ex1):
    for rep in (ex1, ex2):
        for r in rep.rows:
            assert r.flag in ("match", "MISMATCH")
            if not r.match:
                assert r.computed is not None


def test_example_one_root_set_flagged(ex1):
    r = ex1.row("root set (printed coefficients)")
    assert not r.match and r.computed == "complex"
    assert not ex1.row("a2 consistent with claimed roots").match


def test_example_one_F_gap(ex1):
    assert ex1.row("F1(1)(t=5) [1/2]").match


def test_example_three_battery():
    rep = reproduce_example(3)
    assert not rep.mismatches


def test_outputs_render(ex1):
    txt = ex1.text()
    assert "MISMATCH" in txt and "Example 1" in txt
    lines = ex1.csv().strip().splitlines()
    assert lines[0] == "example,item,printed,computed,match,note"
    assert len(lines) == len(ex1.rows) + 1


def test_runtime_budget(ex1, ex2):
    assert ex1.runtime < 60 and ex2.runtime < 60


def test_bad_example_number():
    with pytest.raises(ValueError):
        reproduce_example(4)
