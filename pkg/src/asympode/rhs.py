"""Polynomial right-hand side P(t, x1, x2, x3) = sum Omega_a(t) x^a, |a| <= 4,
the kernel functionals G and L, and numeric hypothesis reporting."""

from dataclasses import dataclass, field
from itertools import product
import math

import numpy as np

from .expr import ExprNode, ZERO, as_expr, eval_expr, to_string
from .kernels import asymptotic_constants

MULTI_INDICES = tuple(a for a in product(range(5), repeat=3) if sum(a) <= 4)


def check_index(a):
    a = tuple(int(x) for x in a)
    if len(a) != 3 or min(a) < 0 or sum(a) > 4:
        raise ValueError(f"invalid multi-index {a}")
    return a


def parse_index(key):
    if isinstance(key, str):
        key = [int(x) for x in key.replace("(", "").replace(")", "").split(",")]
    return check_index(key)


@dataclass(frozen=True)
class P3Split:
    """Omega = lam_p * omega_p(t) + lam_c."""

    lam_p: float
    omega_p: ExprNode
    lam_c: float


@dataclass(frozen=True)
class OmegaEntry:
    expr: ExprNode
    split: P3Split = None


class CoefficientTable:
    """Immutable mapping multi-index -> coefficient; missing entries are zero."""

    def __init__(self, entries=None, params=None):
        data = {}
        for key, val in (entries or {}).items():
            a = parse_index(key)
            if isinstance(val, OmegaEntry):
                entry = val
            elif isinstance(val, dict):
                split = None
                if "lambda_p" in val or "omega_p" in val:
                    split = P3Split(float(val.get("lambda_p", 0.0)),
                                    as_expr(val.get("omega_p", 0.0), params),
                                    float(val.get("lambda_c", 0.0)))
                if "expr" in val:
                    expr = as_expr(val["expr"], params)
                elif split is not None:
                    expr = as_expr(f"({split.lam_p!r})*({to_string(split.omega_p)})"
                                   f"+({split.lam_c!r})")
                else:
                    raise ValueError(f"entry {key} has neither expr nor split")
                entry = OmegaEntry(expr, split)
            else:
                entry = OmegaEntry(as_expr(val, params))
            data[a] = entry
        self._data = data

    def __iter__(self):
        return iter(sorted(self._data))

    def __len__(self):
        return len(self._data)

    def __contains__(self, a):
        return tuple(a) in self._data

    def items(self):
        return [(a, self._data[a]) for a in sorted(self._data)]

    def get(self, a):
        return self._data.get(tuple(a))

    def level(self, k):
        return [a for a in sorted(self._data) if sum(a) == k]

    def is_zero(self):
        return all(e.expr.kind == "const" and e.expr.value == 0 for e in self._data.values())

    def values(self, t):
        """Evaluate every coefficient at ``t`` (scalar or array)."""
        return {a: eval_expr(e.expr, t) for a, e in self._data.items()}

    def to_mapping(self):
        out = {}
        for a, e in self.items():
            key = ",".join(map(str, a))
            if e.split is None:
                out[key] = to_string(e.expr)
            else:
                out[key] = {"expr": to_string(e.expr), "lambda_p": e.split.lam_p,
                            "omega_p": to_string(e.split.omega_p),
                            "lambda_c": e.split.lam_c}
        return out

    def split_errors(self, ts):
        """Max |split - Omega| per index over sample times (indices with a split)."""
        ts = np.asarray(ts, dtype=float)
        errs = {}
        for a, e in self.items():
            if e.split is None:
                continue
            direct = eval_expr(e.expr, ts)
            s = e.split
            rebuilt = s.lam_p * eval_expr(s.omega_p, ts) + s.lam_c
            errs[a] = float(np.max(np.abs(direct - rebuilt)))
        return errs


def monomial(x1, x2, x3, a):
    out = 1.0
    for x, k in zip((x1, x2, x3), a):
        for _ in range(k):
            out = out * x
    return out


def eval_rhs(table, t, x1, x2, x3, values=None):
    """P(t, x1, x2, x3); ``values`` may carry pre-evaluated coefficients."""
    vals = values if values is not None else table.values(t)
    total = 0.0
    for a, v in vals.items():
        total = total + v * monomial(x1, x2, x3, a)
    return total


def omega_level_sum(table, k, t, signed=False):
    """Sum of |Omega_a(t)| over |a| = k, or the signed sum if ``signed``."""
    acc = 0.0
    for a in table.level(k):
        v = eval_expr(table.get(a).expr, t)
        acc = acc + (v if signed else np.abs(v))
    if np.ndim(t) and np.ndim(acc) == 0:
        acc = np.full(np.shape(t), float(acc))
    return acc


# -- kernel functionals ------------------------------------------------------

@dataclass
class QuadConfig:
    t0: float = 0.0
    tail_rel: float = 1e-10
    t_cap: float = 1e7
    panel: float = 0.5
    rtol: float = 1e-10
    max_depth: int = 12
    sup_E: float = None  # certified bound of |E| on [t0, oo), when known


@dataclass
class GLResult:
    G: float
    L: float
    tail_bound: float
    certified: bool


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X2, _GL_W2 = np.polynomial.legendre.leggauss(20)


def _gl_panel(fun, a, b, x, w):
    m = 0.5 * (a + b)
    r = 0.5 * (b - a)
    return r * (fun(m + r * x) @ w)


def _adaptive(fun, a, b, rtol, depth, scale):
    lo = _gl_panel(fun, a, b, _GL_X, _GL_W)
    hi = _gl_panel(fun, a, b, _GL_X2, _GL_W2)
    err = np.max(np.abs(hi - lo))
    if depth <= 0 or err <= rtol * max(scale, np.max(np.abs(hi))) or b - a < 1e-9:
        return hi
    m = 0.5 * (a + b)
    return (_adaptive(fun, a, m, rtol, depth - 1, scale)
            + _adaptive(fun, m, b, rtol, depth - 1, scale))


def _integrate(fun, a, b, quad, scale=1e-300):
    if b <= a:
        return 0.0
    n = max(1, int(math.ceil((b - a) / quad.panel)))
    edges = np.linspace(a, b, n + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total = total + _adaptive(fun, lo, hi, quad.rtol, quad.max_depth, scale)
    return total


def _as_callable(E):
    if isinstance(E, ExprNode):
        return lambda s: eval_expr(E, s)
    if isinstance(E, (int, float)):
        c = float(E)
        return lambda s: np.full(np.shape(s), c)
    return E


def functionals_GL(roots, E, t, quad=None, require_certified=False):
    """G(E)(t) and L(E)(t) with the bounded Green function over [t0, oo).

    Integration windows are truncated where the kernel factor has decayed
    below ``quad.tail_rel``; when ``quad.sup_E`` is given the remaining tail
    is bounded rigorously and the result is marked certified.
    """
    quad = quad or QuadConfig()
    Ef = _as_callable(E)
    g = roots.gammas
    w = roots.weights
    neg = [(gi, wi) for gi, wi in zip(g, w) if gi < 0]
    pos = [(gi, wi) for gi, wi in zip(g, w) if gi > 0]

    def side_terms(terms, s):
        u = t - s
        out = np.zeros((3,) + np.shape(s))
        for gi, wi in terms:
            base = wi * np.exp(gi * u)
            for d in range(3):
                out[d] = out[d] + base * gi**d
        return out

    chunks = []
    tail = 0.0
    certified = True
    cap_hit = False
    for terms, sign in ((neg, 1.0), (pos, -1.0)):
        if not terms:
            continue
        kappa = min(abs(gi) for gi, _ in terms)
        length = math.log(1.0 / quad.tail_rel) / kappa
        if sign > 0:
            a, b = max(quad.t0, t - length), t
            truncated = a > quad.t0
        else:
            a, b = t, t + length
            if b > quad.t_cap:
                b = quad.t_cap
                cap_hit = True
            truncated = True

        def fun(s, terms=terms, sign=sign):
            k = sign * side_terms(terms, s)
            e = Ef(s)
            return np.stack([k[0] * e, k[1] * e, k[2] * e,
                             (np.abs(k[0]) + np.abs(k[1]) + np.abs(k[2])) * np.abs(e)])

        chunks.append(_integrate(fun, a, b, quad))
        if truncated:
            gap = (t - a) if sign > 0 else (b - t)
            coef = sum(abs(wi) * (1 + abs(gi) + gi * gi) * math.exp(-abs(gi) * gap) / abs(gi)
                       for gi, wi in terms)
            if quad.sup_E is not None and not cap_hit:
                tail += quad.sup_E * coef
            else:
                certified = False
                probe = np.linspace(a, b, 33)
                tail += float(np.max(np.abs(Ef(probe)))) * coef
    if not chunks:
        vals = np.zeros(4)
    else:
        vals = np.zeros(4) + sum(chunks)  # empty ranges integrate to a scalar 0
    if require_certified and not certified:
        raise TailError("tail bound not certifiable: supply a sup bound for |E|")
    G = abs(vals[0]) + abs(vals[1]) + abs(vals[2])
    return GLResult(G=float(G), L=float(vals[3]), tail_bound=float(tail), certified=certified)


class TailError(RuntimeError):
    pass


# -- hypothesis reporting ----------------------------------------------------

@dataclass
class Check:
    name: str
    status: str  # pass | fail | indeterminate
    slope: float = float("nan")
    detail: str = ""
    t: list = field(default_factory=list)
    values: list = field(default_factory=list)


@dataclass
class HypothesisReport:
    checks: list
    rho_sup: float
    rho_max: float

    def status(self, name):
        for c in self.checks:
            if c.name == name:
                return c.status
        raise KeyError(name)

    @property
    def ok(self):
        return all(c.status != "fail" for c in self.checks)

    def lines(self):
        out = []
        for c in self.checks:
            out.append(f"{c.name:28s} {c.status:14s} slope={c.slope:+.4f} {c.detail}")
        return out


def report_grid(t0, t_report, n=25):
    tau = np.geomspace(1.0, t_report - t0 + 1.0, n)
    return t0 + tau - 1.0


def trend(ts, vals, t0):
    """Least-squares log-log slope over the last decade of the sample grid."""
    tau = np.asarray(ts) - t0 + 1.0
    v = np.asarray(vals, dtype=float)
    sel = tau >= tau[-1] / 10.0
    pos = sel & (v > 0)
    if np.count_nonzero(pos) < 2:
        return float("-inf") if np.all(v[sel] == 0) else float("nan")
    x = np.log(tau[pos])
    y = np.log(v[pos])
    return float(np.polyfit(x, y, 1)[0])


def tends_to_zero(ts, vals, t0):
    vals = np.asarray(vals, dtype=float)
    if np.all(vals == 0):
        return "pass", float("-inf")
    slope = trend(ts, vals, t0)
    first = vals[0] if vals[0] > 0 else np.max(vals)
    if slope < -0.1 and vals[-1] < 1e-3 * first:
        return "pass", slope
    if not np.isfinite(slope) or slope > -0.01:
        return "fail", slope
    return "indeterminate", slope


def hypothesis_report(table, roots, beta=None, t0=0.0, t_report=None, n=25, quad=None):
    """Numeric surrogate checks of the smallness hypotheses on a sample grid."""
    if t_report is None:
        t_report = t0 + 1e3
    consts = asymptotic_constants(roots, beta)
    ts = report_grid(t0, t_report, n)
    quad = quad or QuadConfig(t0=t0)
    quad.t0 = t0

    def level_fun(k, signed):
        def f(s):
            return omega_level_sum(table, k, s, signed=signed)
        return f

    checks = []
    g0 = [functionals_GL(roots, level_fun(0, True), t, quad).G for t in ts]
    st, sl = tends_to_zero(ts, g0, t0)
    checks.append(Check("G(level 0) -> 0", st, sl, "", list(ts), g0))
    l1 = [functionals_GL(roots, level_fun(1, False), t, quad).L for t in ts]
    st, sl = tends_to_zero(ts, l1, t0)
    checks.append(Check("L(level 1) -> 0", st, sl, "", list(ts), l1))
    lsum = np.zeros(len(ts))
    for k in range(1, 5):
        if table.level(k):
            lsum += [functionals_GL(roots, level_fun(k, False), t, quad).L for t in ts]
    if np.all(lsum == 0):
        st, sl = "pass", float("-inf")
    else:
        sl = trend(ts, lsum, t0)
        st = "pass" if np.all(np.isfinite(lsum)) and sl < 0.05 else "indeterminate"
    checks.append(Check("sum_k L(level k) bounded", st, sl, f"max={np.max(lsum):.4g}",
                        list(ts), list(lsum)))
    dense = np.unique(np.concatenate([ts, np.linspace(t0, t_report, 2001)]))
    tot = np.zeros(dense.size)
    for k in range(1, 5):
        tot = tot + omega_level_sum(table, k, dense)
    rho_sup = float(np.max(tot)) if tot.size else 0.0
    st = "pass" if rho_sup < consts.rho_max else "fail"
    checks.append(Check("rho condition", st, float("nan"),
                        f"sup={rho_sup:.4g} rho_max={consts.rho_max:.4g}"))
    return HypothesisReport(checks, rho_sup, consts.rho_max)
