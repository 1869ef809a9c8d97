"""Unbounded coefficients

    y'''' - 2 q^{1/2} y''' - q y'' + 2 q^{3/2} y' + r y = 0,   q -> oo,

handled through s = int q^{1/2}, z = y q^{1/4}, which turns the equation into
z'''' + (-2 + r3) z''' + (-1 + r2) z'' + (2 + r1) z' + r0 z = 0 (derivatives
in s). The coefficients r0..r3 are the displayed closed formulas in q and its
derivatives, kept verbatim; :func:`derived_coefficients` recovers the exact
coefficients numerically so the two can be compared.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .expr import as_expr, diff_expr, eval_expr, mul, pow_, const, to_string, parse_expr
from .rhs import QuadConfig, _integrate

R_TEMPLATES = {
    "r0": (
        "-Q4/(4*Q) + Q3/(2*Q) - 5*Q3/(8*Q^(5/2)) + 5*Q3*Q1/(4*Q^2)"
        " + (3/(8*Q^3) + 15/(16*Q^2))*Q2^2"
        " - (15/(8*Q^2) - 1/(8*Q^(7/2)) - 1/(4*Q^3))*Q2*Q1 + Q2/(4*Q)"
        " - (135/(32*Q^3) - 5/(4*Q^(7/2)) - 11/(16*Q^4) - 3/(16*Q^(9/2)))*Q2*Q1^2"
        " - Q1/(2*Q)"
        " + (1/(8*Q^(5/2)) - 5/(16*Q^2))*Q1^2"
        " + (45/(32*Q^3) - 15/(16*Q^(7/2)) - 1/(8*Q^4))*Q1^3"
        " + (585/(256*Q^4) - 135/(64*Q^(9/2)) - 5/(64*Q^5) - 3/(32*Q^(11/2)))*Q1^4"
        " + R/Q^2"
    ),
    "r1": (
        "(1/(2*Q^(5/2)) - 1/Q)*Q3 + (3/(2*Q) - 1/Q^2)*Q2"
        " + (15/(4*Q^2) - 17/(8*Q^(5/2)) - 1/Q^3 - 3/(4*Q^(7/2)))*Q2*Q1"
        " - (45/(16*Q^3) + 45/(16*Q^(7/2)) - 3/(8*Q^(9/2)) - 1/(8*Q^4))*Q1^3"
        " - (15/(8*Q^2) - 3/(2*Q^(5/2)) - 1/(2*Q^3))*Q1^2"
        " + (1/(2*Q) - 1/(2*Q^(3/2)))*Q1"
        " - 17/(8*Q^(5/2))"
    ),
    "r2": (
        "(1/(2*Q^4) + 3/(2*Q^2) - 3/(2*Q))*Q2"
        " + (15/(16*Q^2) - 3/(4*Q^(5/2)) - 1/(4*Q^3) - 3/(8*Q^4))*Q1^2"
        " - (9/(8*Q^(5/2)) + 15/(16*Q^2) + 3/Q^(3/2) - 3/(2*Q))*Q1"
    ),
    "r3": "(3/Q^(3/2) - 1/(4*Q))*Q1 - 3/(4*Q)",
}

# exponent c_i of int q^{1/2}, factor and weights of the r-correction integral
HANDLES = (
    (-1.0, 1.0 / 6.0, (1.0, -1.0, 1.0, -1.0)),
    (0.0, -0.5, (1.0, 0.0, 0.0, 0.0)),
    (1.0, 0.5, (1.0, 1.0, 1.0, 1.0)),
    (2.0, -1.0 / 6.0, (1.0, 2.0, 4.0, 8.0)),
)

CONSTANT_PART = (1.0, -2.0, -1.0, 2.0, 0.0)  # z'''' - 2 z''' - z'' + 2 z' + 0 z


def _subst(template, names):
    out = template
    for key in ("Q4", "Q3", "Q2", "Q1"):
        out = out.replace(key, f"({names[key]})")
    out = out.replace("Q", f"({names['Q']})").replace("R", f"({names['R']})")
    return out


class UnboundedProblem:
    def __init__(self, q, r="1", t0=1.0, params=None):
        self.q = as_expr(q, params)
        self.r = as_expr(r, params)
        self.t0 = float(t0)
        self.dq = [self.q] + [diff_expr(self.q, k) for k in range(1, 5)]
        names = {"Q": to_string(self.q), "R": to_string(self.r)}
        for k in range(1, 5):
            names[f"Q{k}"] = to_string(self.dq[k])
        self.r_expr = tuple(parse_expr(_subst(R_TEMPLATES[f"r{j}"], names)) for j in range(4))
        self.sqrt_q = pow_(self.q, const(0.5))

    def qk(self, k, t):
        return eval_expr(self.dq[k], t)


def transform_coefficients(problem, t):
    """(r0, r1, r2, r3) at ``t`` from the displayed formulas."""
    qv = eval_expr(problem.q, t)
    if np.any(np.asarray(qv) <= 0):
        from .expr import ExprDomainError
        raise ExprDomainError("q must be positive")
    return tuple(eval_expr(e, t) for e in problem.r_expr)


def s_of_t(problem, t, quad=None):
    """s(t) = int_{t0}^t q^{1/2}; accepts scalars or increasing arrays."""
    quad = quad or QuadConfig(t0=problem.t0, panel=1.0, rtol=1e-13)

    def f(x):
        return eval_expr(problem.sqrt_q, x)

    if np.ndim(t) == 0:
        return float(_integrate(f, problem.t0, float(t), quad))
    ts = np.asarray(t, dtype=float)
    order = np.argsort(ts)
    out = np.empty_like(ts)
    acc, prev = 0.0, problem.t0
    for idx in order:
        acc += _integrate(f, prev, ts[idx], quad) if ts[idx] > prev else 0.0
        prev = max(prev, ts[idx])
        out[idx] = acc
    return out


# -- hypothesis battery ------------------------------------------------------

def hypothesis_quantities(problem):
    """The listed integrability quantities as expressions in t."""
    q, q1, q2, q3, q4 = (f"({to_string(e)})" for e in problem.dq)
    r = f"({to_string(problem.r)})"
    out = {}
    for k in range(1, 5):
        out[f"(q'/q)^{2 * k}"] = f"({q1}/{q})^{2 * k}"
    for k in (1, 2):
        out[f"(q''/q)^{2 * k}"] = f"({q2}/{q})^{2 * k}"
    for k in (0, 1):
        out[f"(q'')^2 (q')^{2 * (k + 1)}/q^{2 * (k + 2)}"] = \
            f"{q2}^2*{q1}^{2 * (k + 1)}/{q}^{2 * (k + 2)}"
    out["r^2/q^4"] = f"{r}^2/{q}^4"
    out["q'''q'/q^2"] = f"{q3}*{q1}/{q}^2"
    out["(q'''/q)^2"] = f"({q3}/{q})^2"
    out["(q''''/q)^2"] = f"({q4}/{q})^2"
    return {k: parse_expr(v) for k, v in out.items()}


def power_law_closed_forms(alpha, t):
    """The displayed values of the battery for q = t^alpha, r = 1."""
    a = float(alpha)
    t = np.asarray(t, dtype=float)
    out = {}
    for k in range(1, 5):
        out[f"(q'/q)^{2 * k}"] = (a / t) ** (2 * k)
    for k in (1, 2):
        out[f"(q''/q)^{2 * k}"] = (a * (a - 1) / t**2) ** (2 * k)
    for k in (0, 1):
        out[f"(q'')^2 (q')^{2 * (k + 1)}/q^{2 * (k + 2)}"] = \
            a ** (2 * k + 4) * (a - 1) ** 2 / t ** (2 * (k + 3))
    out["r^2/q^4"] = 1.0 / t ** (4 * a)
    out["q'''q'/q^2"] = a * (a - 1) * (a - 2) / t**4
    out["(q'''/q)^2"] = a**2 * (a - 1) * (a - 2) ** 2 / t**6
    out["(q''''/q)^2"] = a**2 * (a - 1) ** 2 * (a - 2) ** 2 * (a - 3) ** 2 / t**8
    return out


def power_law_exact_forms(alpha, t):
    """Direct evaluation of the battery for q = t^alpha from the derivatives."""
    a = float(alpha)
    t = np.asarray(t, dtype=float)
    out = power_law_closed_forms(alpha, t)
    out["q'''q'/q^2"] = a**2 * (a - 1) * (a - 2) / t**4
    out["(q'''/q)^2"] = a**2 * (a - 1) ** 2 * (a - 2) ** 2 / t**6
    return out


def windowed_l1(expr, t0, T, n_panels=400):
    """int_{t0}^T |f| on geometric panels (power-law friendly)."""
    edges = t0 - 1.0 + np.geomspace(1.0, T - t0 + 1.0, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(16)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        total += h * float(w @ np.abs(eval_expr(expr, m + h * x)))
    return total


@dataclass
class BatteryItem:
    name: str
    l1_window: float
    l1_decade: float
    rel_growth: float
    status: str


@dataclass
class L1Report:
    items: list
    q_increasing: bool
    q_unbounded: bool
    t_end: float

    @property
    def ok(self):
        return self.q_increasing and self.q_unbounded and all(i.status == "pass" for i in self.items)


def l1_hypothesis_check(problem, t_end=None, growth_tol=1e-2):
    """Windowed L1 stabilization of every battery quantity plus q trends."""
    t0 = problem.t0
    T = t_end if t_end is not None else t0 + 1e4
    probe = t0 - 1.0 + np.geomspace(1.0, T - t0 + 1.0, 400)
    qp = eval_expr(problem.q, probe, strict=False)
    with np.errstate(over="ignore", invalid="ignore"):
        finite = np.isfinite(qp**6) & (np.abs(qp**6) < 1e290)
    if not np.all(finite):
        # keep the window where every battery quantity is representable
        T = float(probe[np.argmin(finite) - 1]) if np.argmin(finite) > 0 else T
    T1 = t0 + (T - t0) / 10.0
    items = []
    for name, e in hypothesis_quantities(problem).items():
        try:
            full = windowed_l1(e, t0, T)
            part = windowed_l1(e, t0, T1)
        except ArithmeticError:
            items.append(BatteryItem(name, float("nan"), float("nan"), float("nan"), "fail"))
            continue
        growth = (full - part) / full if full > 0 else 0.0
        items.append(BatteryItem(name, full, part, growth,
                                 "pass" if np.isfinite(full) and growth < growth_tol else "fail"))
    ts = t0 - 1.0 + np.geomspace(1.0, T - t0 + 1.0, 200)
    qv = eval_expr(problem.q, ts, strict=False)
    inc = bool(np.all(np.diff(qv) > 0) and np.all(eval_expr(problem.dq[1], ts, strict=False) >= 0))
    unb = bool(qv[-1] >= 100.0 * max(1.0, abs(qv[0])) and
               qv[-1] > qv[len(qv) // 2] > qv[0])
    return L1Report(items, inc, unb, T)


# -- asymptotic fundamental system ------------------------------------------

@dataclass
class AsymptoticHandle:
    """y_i(t) ~ q^{-1/4} exp(c int q^{1/2} + kappa int (w . r) q^{1/2})."""

    i: int
    c: float
    kappa: float
    weights: tuple
    problem: UnboundedProblem = field(repr=False)

    def __post_init__(self):
        p = self.problem
        comb = " + ".join(f"({w!r})*({to_string(e)})" for w, e in zip(self.weights, p.r_expr)
                          if w != 0)
        sq = to_string(p.sqrt_q)
        self.correction = parse_expr(f"({self.kappa!r})*({comb})*({sq})")
        q, q1 = to_string(p.q), to_string(p.dq[1])
        # logarithmic derivative of the handle
        self.logd = parse_expr(f"-({q1})/(4*({q})) + ({self.c!r})*({sq}) + "
                               f"({to_string(self.correction)})")

    def log_y(self, t):
        p = self.problem
        qv = eval_expr(p.q, t)
        quad = QuadConfig(t0=p.t0, panel=1.0, rtol=1e-13)
        f = lambda s: eval_expr(p.sqrt_q, s) * self.c + eval_expr(self.correction, s)
        if np.ndim(t) == 0:
            return -0.25 * math.log(qv) + float(_integrate(f, p.t0, float(t), quad))
        ts = np.asarray(t, dtype=float)
        acc, prev, out = 0.0, p.t0, np.empty_like(ts)
        for k, x in enumerate(ts):
            acc += _integrate(f, prev, x, quad)
            prev = x
            out[k] = -0.25 * math.log(qv[k]) + acc
        return out

    def ratios(self, t):
        """(y'/y, y''/y, y'''/y) of the handle at ``t`` (without o(1))."""
        if not hasattr(self, "_logd_ders"):
            self._logd_ders = [self.logd] + [diff_expr(self.logd, k) for k in (1, 2)]
        L0, L1, L2 = (eval_expr(e, t) for e in self._logd_ders)
        return L0, L1 + L0**2, L2 + 3 * L0 * L1 + L0**3


def unbounded_fundamental_system(problem, check=True, t_end=None):
    if check:
        rep = l1_hypothesis_check(problem, t_end)
        if not rep.ok:
            bad = [i.name for i in rep.items if i.status != "pass"]
            raise HypothesisError(f"integrability battery fails: {bad}", rep)
    return [AsymptoticHandle(i + 1, c, k, w, problem) for i, (c, k, w) in enumerate(HANDLES)]


class HypothesisError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# -- consistency of the transformed equation ---------------------------------

def _s_derivatives(problem, y_expr):
    """Expressions for d^k z/ds^k, k = 0..4, with z = y q^{1/4}."""
    q = problem.q
    z = mul(y_expr, pow_(q, const(0.25)))
    inv = pow_(q, const(-0.5))
    out = [z]
    for _ in range(4):
        out.append(mul(inv, diff_expr(out[-1], 1)))
    return out


def _original_operator(problem, y_expr, t):
    ys = [eval_expr(diff_expr(y_expr, k), t) for k in range(5)]
    q = eval_expr(problem.q, t)
    r = eval_expr(problem.r, t)
    terms = [ys[4], -2 * q**0.5 * ys[3], -q * ys[2], 2 * q**1.5 * ys[1], r * ys[0]]
    return terms


TEST_FUNCTIONS = ("1", "t", "t^2", "t^3")


def derived_coefficients(problem, t):
    """Exact transformed coefficients (r0, r1, r2, r3) at ``t``, obtained by
    applying the change of variable to four test functions and solving the
    resulting linear system."""
    rows, rhs = [], []
    for y in TEST_FUNCTIONS:
        ye = parse_expr(y)
        ders = [eval_expr(e, t) for e in _s_derivatives(problem, ye)]
        orig = sum(_original_operator(problem, ye, t))
        q = eval_expr(problem.q, t)
        target = q ** (-1.75) * orig - ders[4]
        rows.append(ders[:4])
        rhs.append(target)
    c = np.linalg.solve(np.array(rows), np.array(rhs))
    # c = (c0, c1, c2, c3) = (r0, 2 + r1, -1 + r2, -2 + r3)
    return (c[0], c[1] - 2.0, c[2] + 1.0, c[3] + 2.0)


def consistency_residual(problem, ts, coeffs=None, test="exp(sin(t))+t^2"):
    """Max relative residual of transformed-vs-original operator on ``test``.

    ``coeffs(t)`` returns (r0..r3); default is the displayed formulas.
    """
    ye = parse_expr(test)
    sd = _s_derivatives(problem, ye)
    worst = 0.0
    for t in np.atleast_1d(ts):
        r = transform_coefficients(problem, t) if coeffs is None else coeffs(t)
        d = [eval_expr(e, t) for e in sd]
        q = eval_expr(problem.q, t)
        lhs_terms = [d[4], (-2 + r[3]) * d[3], (-1 + r[2]) * d[2], (2 + r[1]) * d[1], r[0] * d[0]]
        rhs_terms = [q ** (-1.75) * x for x in _original_operator(problem, ye, t)]
        scale = max(max(abs(x) for x in lhs_terms), max(abs(x) for x in rhs_terms))
        worst = max(worst, abs(sum(lhs_terms) - sum(rhs_terms)) / scale)
    return worst
