import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from asympode.expr import (ExprDomainError, ExprSyntaxError, UnknownIdentifierError,
                           compile_expr, diff_expr, eval_expr, parse_expr, to_string)

from fd import central_fd


def test_example2_r0():
    e = parse_expr("3/((cos(t)+2)*log(t))")
    for t in (1.5, 2.0, 7.3, 100.0):
        assert eval_expr(e, t) == pytest.approx(3 / ((math.cos(t) + 2) * math.log(t)), rel=1e-15)


def test_zero_is_constant():
    e = parse_expr("0")
    assert e.kind == "const" and e.value == 0


def test_cancellation_by_evaluation():
    e = parse_expr("t^2 - t^2")
    for t in (1, 2.5, 10):
        assert eval_expr(e, t) == 0


def test_precedence_and_associativity():
    t = 1.7
    assert eval_expr(parse_expr("2^3^2"), t) == 2 ** 9
    assert eval_expr(parse_expr("-t^2"), t) == pytest.approx(-(t**2))
    assert eval_expr(parse_expr("1-2-3"), t) == -4
    assert eval_expr(parse_expr("8/2/2"), t) == 2
    assert eval_expr(parse_expr("2*3^2"), t) == 18
    assert eval_expr(parse_expr("2^-1"), t) == 0.5


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as ei:
        parse_expr("1 + * t")
    assert ei.value.offset == 4
    with pytest.raises(ExprSyntaxError):
        parse_expr("(t + 1")
    with pytest.raises(ExprSyntaxError):
        parse_expr("")


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse_expr("tan(t)")
    with pytest.raises(UnknownIdentifierError):
        parse_expr("x + 1")


def test_params_substitute():
    assert eval_expr(parse_expr("t^a", {"a": 2.5}), 4.0) == pytest.approx(32.0)


def test_domain_errors():
    with pytest.raises(ExprDomainError):
        eval_expr(parse_expr("log(t)"), 0.0)
    with pytest.raises(ExprDomainError):
        eval_expr(parse_expr("1/(t-1)"), 1.0)
    with pytest.raises(ExprDomainError):
        eval_expr(parse_expr("t^0.5"), -1.0)
    with pytest.raises(ExprDomainError):
        eval_expr(parse_expr("sqrt(t)"), -4.0)
    # integer exponents allow negative bases
    assert eval_expr(parse_expr("t^3"), -2.0) == -8.0


def test_vector_evaluation():
    e = parse_expr("sin(t)*t")
    ts = np.linspace(0, 3, 7)
    np.testing.assert_allclose(eval_expr(e, ts), np.sin(ts) * ts)


def test_diff_examples():
    e = parse_expr("t^3.5")
    d4 = diff_expr(e, 4)
    a = 3.5
    for t in (2, 5, 10):
        assert eval_expr(d4, t) == pytest.approx(a * (a - 1) * (a - 2) * (a - 3) * t ** (a - 4), rel=1e-12)
    d2 = diff_expr(parse_expr("sin(t)"), 2)
    assert eval_expr(d2, 0.7) == pytest.approx(-math.sin(0.7))
    z = diff_expr(parse_expr("5"), 1)
    assert z.kind == "const" and z.value == 0


def test_compile_matches_eval():
    for s in ("3/((cos(t)+2)*log(t))", "t^2.5 - exp(-t)", "sqrt(t)*sin(2*t)"):
        e = parse_expr(s)
        f = compile_expr(e)
        for t in (1.3, 4.0, 9.5):
            assert f(t) == pytest.approx(eval_expr(e, t), rel=1e-15)
    with pytest.raises(ExprDomainError):
        compile_expr(parse_expr("log(t)"))(-1.0)


# -- properties ------------------------------------------------------------

_leaf = st.one_of(st.just("t"), st.integers(1, 5).map(str), st.sampled_from(["0.5", "1.5", "2"]))


def _combine(children):
    un = st.tuples(st.sampled_from(["sin", "cos", "exp", "-"]), children).map(
        lambda p: f"{p[0]}({p[1]})" if p[0] != "-" else f"-({p[1]})")
    bi = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda p: f"({p[0]}){p[1]}({p[2]})")
    pw = st.tuples(children, st.integers(2, 3)).map(lambda p: f"({p[0]})^{p[1]}")
    return st.one_of(un, bi, pw)


expressions = st.recursive(_leaf, _combine, max_leaves=6)


@given(expressions, st.floats(0.3, 3.0))
def test_roundtrip_print_parse(text, t):
    e = parse_expr(text)
    e2 = parse_expr(to_string(e))
    v1 = eval_expr(e, t, strict=False)
    v2 = eval_expr(e2, t, strict=False)
    if math.isfinite(v1):
        assert v2 == pytest.approx(v1, rel=1e-12, abs=1e-12)


@given(expressions, st.floats(0.5, 4.0), st.integers(1, 4))
def test_diff_matches_fd(text, t, k):
    e = parse_expr(text)
    exact = eval_expr(diff_expr(e, k), t, strict=False)
    f0 = eval_expr(e, t, strict=False)
    if not (math.isfinite(exact) and math.isfinite(f0)) or abs(exact) > 1e12:
        return
    approx = central_fd(e, t, k)
    assert abs(approx - exact) <= 1e-5 * max(abs(exact), 1e-9 * max(1.0, abs(f0)))


def test_rejects_garbage():
    for bad in ("t t", "3 +", "sin t", "2**3", "t^", "()", "1.2.3"):
        with pytest.raises((ExprSyntaxError, UnknownIdentifierError)):
            parse_expr(bad)
