"""Fourth-order Poincare-type equations

    y'''' + (a3 + r3) y''' + (a2 + r2) y'' + (a1 + r1) y' + (a0 + r0) y = 0

reduced, for each characteristic root mu, to a third-order equation for
z = y'/y - mu, solved by the fixed-point machinery of ``solver``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
import math

import numpy as np

from .expr import ZERO, as_expr, eval_expr, to_string
from .kernels import CharRoots, RootError, asymptotic_constants, cubic_roots, make_roots
from .rhs import CoefficientTable, OmegaEntry, P3Split, QuadConfig, _integrate, report_grid, tends_to_zero, trend
from .solver import (GridFunction, Problem3, envelope_weight, make_grid, solve_fixed_point,
                     tail_margin)


# -- roots -------------------------------------------------------------------

def quartic_roots(a0, a1, a2, a3, tol=1e-9, allow_zero=True):
    """Real simple roots of l^4 + a3 l^3 + a2 l^2 + a1 l + a0, descending."""
    coeffs = [1.0, float(a3), float(a2), float(a1), float(a0)]
    raw = np.roots(coeffs)
    if raw.size < 4:
        raise RootError("repeated root at 0")
    scale = max(1.0, float(np.max(np.abs(raw))))
    if np.any(np.abs(raw.imag) > 1e-7 * scale):
        raise RootError("complex-root pair: computed roots "
                        + ", ".join(f"{z:.6g}" for z in raw))
    lams = []
    for x in np.sort(raw.real)[::-1]:
        for _ in range(2):
            f = np.polyval(coeffs, x)
            df = np.polyval(np.polyder(coeffs), x)
            if df == 0:
                break
            x = x - f / df
        lams.append(float(x))
    lams.sort(reverse=True)
    for u, v in zip(lams, lams[1:]):
        if u - v <= tol * scale:
            raise RootError(f"repeated root within tolerance: {lams}")
    if not allow_zero and any(abs(x) <= tol * scale for x in lams):
        raise RootError(f"zero root: {lams}")
    return tuple(lams)


def quartic_from_roots(lams):
    c = np.poly(lams)
    return float(c[4]), float(c[3]), float(c[2]), float(c[1])


# -- problem and reduction ---------------------------------------------------

class PoincareProblem:
    """Constants a0..a3 and perturbations r0..r3 (expressions in t)."""

    def __init__(self, a, r=(0, 0, 0, 0), t0=0.0, tags=None, params=None):
        self.a = tuple(float(x) for x in a)
        if len(self.a) != 4:
            raise ValueError("need a0..a3")
        self.r = tuple(as_expr(x, params) for x in r)
        self.t0 = float(t0)
        self.tags = dict(tags or {})
        self._lams = None

    @property
    def lams(self):
        if self._lams is None:
            self._lams = quartic_roots(*self.a)
        return self._lams

    def all_l1(self):
        return all(self.r[j].kind == "const" and self.r[j].value == 0
                   or str(self.tags.get(f"r{j}", "")).upper() == "L1" for j in range(4))


@dataclass
class Reduction:
    mu: float
    b: tuple
    table: CoefficientTable
    p: object  # ExprNode
    roots: CharRoots = None
    printed_table: CoefficientTable = None

    @property
    def case(self):
        return self.roots.case if self.roots is not None else None


def _s(e):
    return f"({to_string(e)})"


def riccati_reduction(problem, mu, tol=1e-9):
    """Coefficients and Omega table of the reduced equation for z = y'/y - mu.

    The table is the expansion of the substitution (verified symbolically).
    The displayed version differs in two rows; it is kept as
    ``printed_table`` for comparison.
    """
    a0, a1, a2, a3 = problem.a
    r0, r1, r2, r3 = (_s(x) for x in problem.r)
    m = repr(float(mu))
    b0 = 4 * mu**3 + 3 * mu**2 * a3 + 2 * mu * a2 + a1
    b1 = 6 * mu**2 + 3 * mu * a3 + a2
    b2 = 4 * mu + a3
    c110 = -(12 * mu + 3 * a3)
    c200 = -(6 * mu**2 + 3 * mu * a3 + a2)
    c300 = -(4 * mu + a3)
    p = as_expr(f"-({m}^3*{r3}+{m}^2*{r2}+{m}*{r1}+{r0})")
    om100 = as_expr(f"-(3*{m}^2*{r3}+2*{m}*{r2}+{r1})")
    om010 = as_expr(f"-(3*{m}*{r3}+{r2})")
    om001 = as_expr(f"-{r3}")
    r3e = problem.r[3]
    om200p = as_expr(f"{r2}+3*{m}*{r3}")

    def split(lp, op, lc):
        return OmegaEntry(as_expr(f"({lp!r})*({to_string(op)})+({lc!r})"),
                          P3Split(float(lp), op, float(lc)))

    def cst(c):
        return OmegaEntry(as_expr(c), P3Split(0.0, ZERO, float(c)))

    entries = {
        (0, 0, 0): OmegaEntry(p),
        (1, 0, 0): OmegaEntry(om100, P3Split(1.0, om100, 0.0)),
        (0, 1, 0): OmegaEntry(om010, P3Split(1.0, om010, 0.0)),
        (0, 0, 1): OmegaEntry(om001, P3Split(1.0, om001, 0.0)),
        (1, 1, 0): split(-3.0, r3e, c110),
        (1, 0, 1): cst(-4.0),
        (2, 0, 0): split(-1.0, om200p, c200),
        (0, 2, 0): cst(-3.0),
        (2, 1, 0): cst(-6.0),
        (3, 0, 0): split(-1.0, r3e, c300),
        (4, 0, 0): cst(-1.0),
    }
    table = CoefficientTable(entries)
    printed = dict(entries)
    printed[(1, 1, 0)] = OmegaEntry(as_expr(f"-(12*{m}+3*{a3!r}+{r3})"))
    printed[(3, 0, 0)] = OmegaEntry(as_expr(f"-(4+{r3})"))
    printed_table = CoefficientTable(printed)
    try:
        roots = cubic_roots(b0, b1, b2, tol)
    except RootError:
        roots = None
    return Reduction(float(mu), (b0, b1, b2), table, p, roots, printed_table)


def table_discrepancies(red, ts):
    """Indices where the displayed table differs from the expansion."""
    out = {}
    for a, e in red.table.items():
        pe = red.printed_table.get(a)
        d = float(np.max(np.abs(eval_expr(e.expr, ts) - eval_expr(pe.expr, ts))))
        if d > 1e-12:
            out[a] = d
    return out


def root_cases(lams):
    """Case tag of each reduced cubic, from the signs of l_j - l_i."""
    out = []
    for i, li in enumerate(lams):
        diffs = sorted((lj - li for j, lj in enumerate(lams) if j != i), reverse=True)
        out.append("".join("+" if d > 0 else "-" for d in diffs))
    return out


# -- Levinson constants ------------------------------------------------------

@dataclass
class RootLevinson:
    i: int
    lam: float
    pi: float
    upsilon: float
    index_set: list
    sigma: float
    sigma_parts: tuple
    A: float
    A_reduced: float
    exponents: list  # [(rate c, range)] with F_i(E)(t) = sum int e^{c (t-s)} |E|

    def F_one(self, t, t0):
        """Closed form of F_i(1)(t)."""
        total = 0.0
        for c, rng in self.exponents:
            if rng == "past":  # c < 0
                total += (1.0 - math.exp(c * (t - t0))) / (-c)
            else:  # c > 0
                total += 1.0 / c
        return total

    def F_one_text(self, t0):
        parts = []
        for c, rng in self.exponents:
            if rng == "past":
                parts.append(f"(1-e^({c:g}(t-{t0:g})))/{-c:g}")
            else:
                parts.append(f"1/{c:g}")
        return " + ".join(parts)

    def rho(self, t, t0):
        return min(self.F_one(t, t0), 1.0 / (self.A * self.sigma))

    def F(self, E, t, t0, quad=None):
        """F_i(E)(t) by Gauss-Legendre panels; the future part is truncated
        where the exponential factor drops below 1e-13."""
        quad = quad or QuadConfig(t0=t0)
        f = E if callable(E) else (lambda s, E=as_expr(E): eval_expr(E, s))
        total = 0.0
        for c, rng in self.exponents:
            if rng == "past":
                a, b = max(t0, t - 30.0 / abs(c)), t
            else:
                a, b = t, t + 30.0 / c
            total += _integrate(lambda s, c=c: np.exp(c * (t - s)) * np.abs(f(s)), a, b, quad)
        return float(total)


@dataclass
class LevinsonData:
    lams: tuple
    eta: float
    roots: list

    def __getitem__(self, i):
        return self.roots[i]


def index_set(i, n=4):
    return [(j, k, l) for j, k, l in product(range(n), repeat=3)
            if (j, k, l) != (i, i, i) and (k, l) != (j, j)]


def levinson_data(lams, a, eta=0.25):
    """Per-root constants pi_i, Upsilon_i, I_i, sigma_i, A_i and F_i setup.

    ``A`` follows the displayed triple sum over I_i; ``A_reduced`` is the
    kernel constant A-hat of the reduced cubic (roots l_j - l_i).
    """
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in ]0, 1/2[")
    lams = tuple(float(x) for x in lams)
    a0, a1, a2, a3 = a
    l1, l2, l3, l4 = lams
    exps = [
        [(-(l1 - l2), "future")],
        [(-(l1 - l2), "past"), (-(l2 - l3), "future")],
        [(-(l2 - l3), "past"), (-(l3 - l4), "future")],
        [(-(l3 - l4), "past")],
    ]
    # future ranges integrate e^{c (t-s)} over s > t, here with c = -(l_j - l_i)
    # for the printed pairs; rewrite future rates as positive decay rates.
    fixed = []
    for lst in exps:
        row = []
        for c, rng in lst:
            row.append((abs(c), "future") if rng == "future" else (-abs(c), "past"))
        fixed.append(row)
    out = []
    for i, li in enumerate(lams):
        others = [j for j in range(4) if j != i]
        pi = float(np.prod([lams[k] - li for k in others]))
        ups = 1.0
        for x in others:
            for y in others:
                if y > x:
                    ups *= lams[y] - lams[x]
        I = index_set(i)
        s = sum(abs(lams[k] - lams[l]) * (1 + abs(lams[j] - li) + (lams[j] - li) ** 2)
                for j, k, l in I)
        A = s / abs(ups)
        const_part = 3 * li * li + 5 * abs(li) + 3
        eta_part = 19 + 7 * abs(li) + abs(12 * li + 3 * a3) + abs(6 * li * li + 3 * li * a3 + a2)
        try:
            rr = make_roots(*[lams[j] - li for j in others])
            A_red = asymptotic_constants(rr).A_hat
        except (RootError, ValueError):
            A_red = float("nan")
        out.append(RootLevinson(i + 1, li, pi, ups, I, const_part + eta_part * eta,
                                (const_part, eta_part), A, A_red, fixed[i]))
    return LevinsonData(lams, eta, out)


@dataclass
class MembershipResult:
    i: int
    status: str  # pass | fail
    trend: str  # verdict of the "tends to 0" rule on F_i(E)
    holds_from: float
    max_excess: float
    t: list
    F: list
    rho: list


def check_F_membership(data, E, t0, t_report=None, n=20, quad=None):
    """Compare F_i(E)(t) with rho_i(t) on a geometric sample grid."""
    if t_report is None:
        t_report = t0 + 1e3
    ts = report_grid(t0, t_report, n)
    out = []
    for rl in data.roots:
        Fv = [rl.F(E, t, t0, quad) for t in ts]
        rv = [rl.rho(t, t0) for t in ts]
        ok = np.array(Fv) <= np.array(rv)
        if np.all(ok):
            status, start = "pass", ts[0]
        else:
            status = "fail"
            bad = np.nonzero(~ok)[0][-1]
            start = ts[bad + 1] if bad + 1 < len(ts) else float("nan")
        tr, _ = tends_to_zero(ts, Fv, t0)
        out.append(MembershipResult(rl.i, status, tr, float(start),
                                    float(np.max(np.array(Fv) - np.array(rv))),
                                    list(ts), Fv, rv))
    return out


# -- fundamental system ------------------------------------------------------

@dataclass
class FundamentalSolution:
    i: int
    lam: float
    reduction: Reduction
    z: GridFunction
    diagnostics: object

    @property
    def t(self):
        return self.z.t

    def int_z(self):
        """Cumulative integral of z using the cubic Hermite interpolant."""
        t, z, dz = self.z.t, self.z.z, self.z.dz
        h = np.diff(t)
        cell = h * (z[:-1] + z[1:]) / 2 + h * h * (dz[:-1] - dz[1:]) / 12
        return np.concatenate([[0.0], np.cumsum(cell)])

    def log_y(self):
        return self.lam * (self.t - self.t[0]) + self.int_z()

    def z3(self):
        z = self.z
        if z.d3z is not None:
            return z.d3z
        return z.third_derivative_fd()

    def ratios(self):
        """y^(k)/y for k = 1..4 from the logarithmic-derivative identities."""
        w = self.lam + self.z.z
        z1, z2, z3 = self.z.dz, self.z.d2z, self.z3()
        return {
            1: w,
            2: w * w + z1,
            3: w**3 + 3 * w * z1 + z2,
            4: w**4 + 6 * w * w * z1 + 3 * z1 * z1 + 4 * w * z2 + z3,
        }

    def ratio4_printed(self):
        """Fourth ratio with the displayed last term z'' in place of z'''."""
        w = self.lam + self.z.z
        z1, z2 = self.z.dz, self.z.d2z
        return w**4 + 6 * w * w * z1 + 3 * z1 * z1 + 4 * w * z2 + z2

    @property
    def report_end(self):
        return self.diagnostics.report_end


def fundamental_system(problem, t_max=None, tol=1e-10, nodes=40, max_iter=300,
                       eta=0.5, grid=None, raise_on_failure=True, workers=1):
    """Solve the reduced equation for every root; return four solutions."""
    lams = problem.lams
    reds = [riccati_reduction(problem, mu) for mu in lams]
    for r in reds:
        if r.roots is None:
            raise RootError(f"reduced cubic for mu={r.mu} has no admissible roots")
    if grid is None:
        if t_max is None:
            t_max = max(problem.t0 + 30.0 / abs(r.roots.default_beta()) for r in reds)
        rate = max(float(np.max(np.abs(r.roots.gammas))) for r in reds)
        fake = make_roots(rate, rate / 2, rate / 3)
        grid = make_grid(fake, problem.t0, t_max, nodes)
    def one(i):
        red = reds[i]
        z, diag = solve_fixed_point(red.table, red.roots, problem.t0, grid=grid, tol=tol,
                                    max_iter=max_iter, eta=eta,
                                    raise_on_failure=raise_on_failure)
        return FundamentalSolution(i + 1, lams[i], red, z, diag)

    if workers > 1:
        # per-root solves are independent; results keep root order
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, range(4)))
    return [one(i) for i in range(4)]


# -- reporting ---------------------------------------------------------------

def window_maxima(t, v, width):
    """Maxima of |v| over consecutive windows of the given width."""
    edges = np.arange(t[0], t[-1] + width, width)
    idx = np.searchsorted(t, edges)
    out = []
    for lo, hi in zip(idx[:-1], idx[1:]):
        if hi > lo:
            out.append(float(np.max(np.abs(v[lo:hi]))))
    return np.array(out)


@dataclass
class RatioCurve:
    i: int
    k: int
    end_value: float
    monotone_last_decade: bool
    window_max: list


@dataclass
class AsymptoticReport:
    window_end: float
    curves: list
    wronskian_t: np.ndarray
    wronskian_ratio: np.ndarray
    envelopes: list
    levinson: list
    harris_lutz: dict
    notes: list = field(default_factory=list)

    def curve(self, i, k):
        for c in self.curves:
            if c.i == i and c.k == k:
                return c
        raise KeyError((i, k))

    @property
    def wronskian_end(self):
        return float(self.wronskian_ratio[-1])


def vandermonde(lams):
    v = 1.0
    for k in range(4):
        for l in range(k + 1, 4):
            v *= lams[l] - lams[k]
    return v


def asymptotic_report(problem, sols, window_end=None, osc_width=2 * math.pi):
    lams = problem.lams
    t = sols[0].t
    t0 = t[0]
    end = min(s.report_end for s in sols)
    if window_end is not None:
        end = min(end, window_end)
    sel = t <= end
    ts = t[sel]
    curves = []
    for s in sols:
        R = s.ratios()
        for k in range(1, 5):
            dev = np.abs(R[k][sel] - s.lam**k)
            tau = ts - t0 + 1.0
            dec = tau >= tau[-1] / 10.0
            wm = window_maxima(ts[dec], dev[dec], osc_width)
            mono = bool(wm.size >= 2 and np.all(np.diff(wm) <= 0))
            curves.append(RatioCurve(s.i, k, float(dev[-1]), mono, list(wm)))
    M = np.empty((ts.size, 4, 4))
    for col, s in enumerate(sols):
        R = s.ratios()
        M[:, 0, col] = 1.0
        for k in range(1, 4):
            M[:, k, col] = R[k][sel]
    wr = np.linalg.det(M) / vandermonde(lams)
    envs = []
    for s in sols:
        roots = s.reduction.roots
        beta = roots.default_beta()
        prob = Problem3(s.reduction.table, roots, t)
        lvl0 = prob.values[(0, 0, 0)] + np.zeros_like(t)
        E, truncated = envelope_weight(roots, t, lvl0, beta)
        lhs = s.z.pointwise()
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(E > 0, lhs / E, np.where(lhs > 0, np.inf, 0.0))
        consts = asymptotic_constants(roots, beta)
        envs.append({"i": s.i, "case": roots.case, "beta": beta,
                     "measured_constant": float(np.max(ratio[sel])),
                     "phi_bound_at_rho0": consts.A_hat, "rho_max": consts.rho_max,
                     "truncated": truncated})
    lev = []
    for s in sols:
        iz = s.int_z()[sel]
        b0 = s.reduction.b[0]
        prob = Problem3(s.reduction.table, s.reduction.roots, t)
        Pint = np.concatenate([[0.0], np.cumsum(np.diff(t) * 0.5 *
                                                (prob.rhs(s.z)[1:] + prob.rhs(s.z)[:-1]))])[sel]
        pi = -b0
        tau = ts - t0 + 1.0
        dec = tau >= tau[-1] / 10.0
        span = float(np.max(iz[dec]) - np.min(iz[dec]))
        lev.append({"i": s.i, "int_z_end": float(iz[-1]), "last_decade_spread": span,
                    "drift_minus_inv_pi": float(iz[-1] - (-1.0 / pi) * Pint[-1]),
                    "drift_plus_inv_pi": float(iz[-1] - (1.0 / pi) * Pint[-1]),
                    "levinson_applicable": problem.all_l1()})
    hl = {}
    for j in range(4):
        tag = str(problem.tags.get(f"r{j}", ""))
        if tag.upper().startswith("L") and tag[1:]:
            try:
                p = float(tag[1:])
            except ValueError:
                continue
            from .lp import m_of_p
            m = m_of_p(p)
            hl[f"r{j}"] = {"p": p, "m": m,
                           "I_kp_exponents": [p / (1 + k) for k in range(m + 1)],
                           "I_kc_exponents": [p / k for k in range(1, m + 1)]}
    return AsymptoticReport(float(end), curves, ts, wr, envs, lev, hl)
