"""Fixed-point solution of z''' + b2 z'' + b1 z' + b0 z = P(t, z, z', z'').

The operator (T w)(t) = int G(t, s) P(s, w, w', w'') ds is applied on a
uniform grid. Each root contributes an exponential convolution computed by a
linear-time sweep (see ``_accel``); derivative channels reuse the same sweeps
multiplied by powers of the root.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _accel
from .kernels import asymptotic_constants, check_beta
from .rhs import eval_rhs, monomial


class SolverError(RuntimeError):
    pass


class NonContractionError(SolverError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class MaxIterError(SolverError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class GridFunction:
    """Samples of (z, z', z'') on a strictly increasing grid."""

    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    d2z: np.ndarray
    d3z: np.ndarray = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or self.t.size < 2 or np.any(np.diff(self.t) <= 0):
            raise ValueError("grid must be strictly increasing with at least 2 nodes")
        for name in ("z", "dz", "d2z"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def zeros(cls, t):
        t = np.asarray(t, dtype=float)
        return cls(t, np.zeros_like(t), np.zeros_like(t), np.zeros_like(t))

    @property
    def channels(self):
        return (self.z, self.dz, self.d2z)

    def pointwise(self):
        return np.abs(self.z) + np.abs(self.dz) + np.abs(self.d2z)

    def norm0(self, upto=None):
        p = self.pointwise()
        if upto is not None:
            p = p[self.t <= upto]
        return float(np.max(p))

    def __sub__(self, other):
        return GridFunction(self.t, self.z - other.z, self.dz - other.dz,
                            self.d2z - other.d2z)

    def __add__(self, other):
        return GridFunction(self.t, self.z + other.z, self.dz + other.dz,
                            self.d2z + other.d2z)

    def __call__(self, tq):
        """Interpolate (z, z', z'') at ``tq``."""
        spl = CubicHermiteSpline(self.t, self.z, self.dz)
        tq = np.asarray(tq, dtype=float)
        return spl(tq), spl(tq, 1), np.interp(tq, self.t, self.d2z)

    def third_derivative_fd(self):
        """z''' by a 5-point central difference of z'' (one-sided at the ends)."""
        return _fd5(self.t, self.d2z)


def _fd5(t, f):
    h = np.diff(t)
    out = np.gradient(f, t, edge_order=2)
    if t.size >= 5 and np.allclose(h, h[0], rtol=1e-9, atol=0):
        hh = h[0]
        out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * hh)
    return out


def make_grid(roots, t0, t_max, nodes=40):
    """Uniform grid resolving the fastest kernel exponential with ``nodes``
    samples per e-fold (and at least that many per unit length)."""
    if t_max <= t0:
        raise ValueError("t_max must exceed t0")
    rate = max(1.0, float(np.max(np.abs(roots.gammas))))
    n = int(math.ceil((t_max - t0) * nodes * rate)) + 1
    return np.linspace(t0, t_max, max(n, 5))


def default_t_max(roots, t0, beta=None):
    if beta is None:
        beta = roots.default_beta()
    return t0 + 30.0 / abs(beta)


def tail_margin(roots):
    pos = [g for g in roots.gammas if g > 0]
    return 25.0 / min(pos) if pos else 0.0


# -- kernel sweeps -----------------------------------------------------------

def kernel_sweeps(roots, t, f, tail=True):
    """Signed per-root convolutions X_i with G = sum_i X_i / p'(g_i).

    Causal roots give int_{t0}^t e^{g(t-s)} f, anticausal roots give
    -int_t^T e^{g(t-s)} f (plus the constant-continuation estimate f(T)/g of
    the part beyond T when ``tail`` is set).
    """
    out = []
    for g in roots.gammas:
        if g < 0:
            out.append(_accel.exp_sweep(t, f, g, +1, 0.0))
        else:
            init = f[-1] / g if tail else 0.0
            out.append(-_accel.exp_sweep(t, f, g, -1, init))
    return np.array(out)


def convolve_green(roots, t, f, tail=True):
    """(z, z', z'', z''') of int G(t,s) f(s) ds for samples ``f`` on ``t``."""
    X = kernel_sweeps(roots, t, f, tail)
    g = roots.gammas
    w = roots.weights
    z = (w[:, None] * X).sum(0)
    dz = (w[:, None] * g[:, None] * X).sum(0)
    d2z = (w[:, None] * g[:, None] ** 2 * X).sum(0)
    d3z = f + (w[:, None] * g[:, None] ** 3 * X).sum(0)
    return z, dz, d2z, d3z


class Problem3:
    """Grid-bound data of one nonlinear third-order problem."""

    def __init__(self, table, roots, t):
        self.table = table
        self.roots = roots
        self.t = np.asarray(t, dtype=float)
        self.values = table.values(self.t)

    def rhs(self, w):
        return np.asarray(eval_rhs(self.table, self.t, w.z, w.dz, w.d2z, values=self.values)
                          + np.zeros_like(self.t))

    def level_abs(self, k):
        acc = np.zeros_like(self.t)
        for a, v in self.values.items():
            if sum(a) == k:
                acc += np.abs(v)
        return acc

    def level_part(self, k, w):
        acc = np.zeros_like(self.t)
        for a, v in self.values.items():
            if sum(a) == k:
                acc = acc + v * monomial(w.z, w.dz, w.d2z, a)
        return acc


def apply_T(table, roots, w, problem=None, tail=True):
    """One application of the integral operator to ``w``."""
    prob = problem or Problem3(table, roots, w.t)
    f = prob.rhs(w)
    z, dz, d2z, d3z = convolve_green(roots, w.t, f, tail)
    return GridFunction(w.t, z, dz, d2z, d3z)


# -- Picard iteration --------------------------------------------------------

@dataclass
class Diagnostics:
    iterations: int = 0
    diffs: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    residual: float = float("nan")
    ball_max: float = 0.0
    left_ball: bool = False
    invariance: str = "unchecked"
    invariance_sup: float = float("nan")
    lipschitz_bound: float = float("nan")
    tail_influence: float = 0.0
    report_end: float = float("nan")
    warnings: list = field(default_factory=list)

    @property
    def max_ratio(self):
        r = [x for x in self.ratios if np.isfinite(x)]
        return max(r) if r else 0.0


def level_bounds(prob):
    """Upper bounds of L(level k)(t) on the grid for k = 1..4 via the
    triangle inequality on the exponential terms of the kernel."""
    roots = prob.roots
    g = roots.gammas
    w = roots.weights
    out = {}
    for k in range(1, 5):
        f = prob.level_abs(k)
        if not np.any(f):
            out[k] = np.zeros_like(f)
            continue
        acc = np.zeros_like(f)
        for gi, wi in zip(g, w):
            if gi < 0:
                x = _accel.exp_sweep(prob.t, f, gi, +1, 0.0)
            else:
                x = _accel.exp_sweep(prob.t, f, gi, -1, f[-1] / gi)
            acc += abs(wi) * (1 + abs(gi) + gi * gi) * x
        out[k] = acc
    return out


def invariance_check(prob, eta):
    """Evaluate ||T 0||(t) + sum_k eta^k L_k(t) <= eta on the grid.

    Returns (status, sup, first_time_it_holds_from): status is "holds",
    "tail-only" or "fails".
    """
    w0 = GridFunction.zeros(prob.t)
    first = apply_T(prob.table, prob.roots, w0, prob).pointwise()
    lb = level_bounds(prob)
    tot = first + sum(eta**k * lb[k] for k in lb)
    ok = tot <= eta
    sup = float(np.max(tot))
    if np.all(ok):
        return "holds", sup, float(prob.t[0])
    if ok[-1]:
        bad = np.nonzero(~ok)[0][-1]
        return "tail-only", sup, float(prob.t[min(bad + 1, len(prob.t) - 1)])
    return "fails", sup, float("nan")


def solve_fixed_point(table, roots, t0, t_max=None, tol=1e-10, max_iter=200,
                      grid=None, w0=None, nodes=40, eta=0.5, tail=True,
                      check_invariance=True, raise_on_failure=True):
    """Picard iteration w_{n+1} = T w_n from w_0 = 0 (or ``w0``).

    Returns (GridFunction, Diagnostics). The sup-norm of successive
    differences drives termination; three consecutive ratios >= 1 abort.
    """
    if grid is None:
        if t_max is None:
            t_max = default_t_max(roots, t0)
        grid = make_grid(roots, t0, t_max, nodes)
    prob = Problem3(table, roots, grid)
    diag = Diagnostics(report_end=float(grid[-1] - tail_margin(roots)))
    if check_invariance:
        status, sup, _ = invariance_check(prob, eta)
        diag.invariance, diag.invariance_sup = status, sup
        if status != "holds":
            diag.warnings.append(f"invariance inequality {status} (sup {sup:.3g} vs eta {eta})")
    w = w0 if w0 is not None else GridFunction.zeros(grid)
    bad = 0
    prev = None
    for it in range(1, max_iter + 1):
        new = apply_T(table, roots, w, prob, tail)
        # non-finite iterates count as divergence
        d = (new - w).norm0()
        diag.diffs.append(d)
        ratio = d / prev if prev else float("nan")
        if prev is not None and prev == 0:
            ratio = 0.0 if d == 0 else float("inf")
        if prev is not None:
            diag.ratios.append(ratio)
        diag.ball_max = max(diag.ball_max, new.norm0())
        diag.iterations = it
        w = new
        if not np.isfinite(d):
            bad = 3
        elif prev is not None and ratio >= 1.0:
            bad += 1
        else:
            bad = 0
        if bad >= 3:
            diag.left_ball = diag.ball_max > 1.0
            if raise_on_failure:
                raise NonContractionError("non-contraction: ratio >= 1 on 3 consecutive iterations",
                                          diag)
            diag.warnings.append("non-contraction")
            break
        if d < tol:
            break
        prev = d
    else:
        if raise_on_failure:
            raise MaxIterError(f"no convergence in {max_iter} iterations", diag)
        diag.warnings.append("max_iter exceeded")
    diag.left_ball = diag.ball_max > 1.0
    if diag.left_ball:
        diag.warnings.append("iterates left the unit ball")
    final = apply_T(table, roots, w, prob, tail)
    diag.residual = (final - w).norm0()
    w.d3z = final.d3z
    lb = level_bounds(prob)
    eta_w = max(diag.ball_max, 1e-300)
    lip = sum(k * eta_w ** (k - 1) * lb[k] for k in lb)
    diag.lipschitz_bound = float(np.max(lip)) if np.ndim(lip) else 0.0
    if tail and any(g > 0 for g in roots.gammas):
        diag.tail_influence = float(np.max(np.abs(prob.rhs(w)[-1:])) /
                                    min(g for g in roots.gammas if g > 0))
    return w, diag


def ode_residual(z, table, roots, use_fd=True, window=None):
    """Max normalized residual of the third-order equation on the grid.

    z''' is a 5-point finite difference of the stored z'' unless ``use_fd``
    is false and the GridFunction carries it.
    """
    b0, b1, b2 = roots.b
    d3 = z.third_derivative_fd() if (use_fd or z.d3z is None) else z.d3z
    P = eval_rhs(table, z.t, z.z, z.dz, z.d2z) + np.zeros_like(z.t)
    terms = np.abs(np.stack([d3, b2 * z.d2z, b1 * z.dz, b0 * z.z, P]))
    res = np.abs(d3 + b2 * z.d2z + b1 * z.dz + b0 * z.z - P)
    sel = np.ones_like(z.t, dtype=bool)
    sel[:2] = sel[-2:] = False
    if window is not None:
        sel &= (z.t >= window[0]) & (z.t <= window[1])
    scale = max(float(np.max(terms[:, sel])), 1e-300)
    return float(np.max(res[sel]) / scale)


# -- envelopes ---------------------------------------------------------------

@dataclass
class DominationReport:
    holds: bool
    max_ratio: float
    violations: int
    nodes: int
    window_end: float
    truncated: bool
    rho_effective: float
    rho_covers: bool
    E: np.ndarray = None


def envelope_weight(roots, t, level0, beta):
    """E_case(t) = int e^{beta (t-s)} |Omega_0(s)| ds over the case range.

    Mixed cases integrate over the whole window; the part beyond the window
    end is omitted, so the value is a lower bound of the infinite integral.
    """
    f = np.abs(level0)
    c = roots.case
    if c == "---":
        return _accel.exp_sweep(t, f, beta, +1, 0.0), False
    if c == "+++":
        return _accel.exp_sweep(t, f, beta, -1, f[-1] / beta), False
    with np.errstate(over="ignore"):
        left = _accel.exp_sweep(t, f, beta, +1, 0.0)
        right = _accel.exp_sweep(t, f, beta, -1, 0.0)
    return left + right, True


def envelope(table, roots, beta, rho, n, z=None):
    """Phi recursion, its limit and (given ``z``) the domination check."""
    consts = asymptotic_constants(roots, beta)
    check_beta(roots, beta)
    if not 0 <= rho < consts.rho_max:
        raise ValueError(f"rho={rho} outside [0, {consts.rho_max}[")
    A_hat, sig = consts.A_hat, consts.sigma
    phis = [A_hat]
    for _ in range(1, n):
        phis.append(A_hat * (1.0 + phis[-1] * rho * sig))
    phi_lim = A_hat / (1.0 - rho * A_hat * sig)
    report = None
    if z is not None:
        prob = Problem3(table, roots, z.t)
        lvl0 = np.zeros_like(z.t)
        for a, v in prob.values.items():
            if sum(a) == 0:
                lvl0 = lvl0 + v
        E, truncated = envelope_weight(roots, z.t, lvl0, beta)
        end = z.t[-1] - tail_margin(roots)
        sel = z.t <= end
        lhs = z.pointwise()[sel]
        rhs = phi_lim * E[sel]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        eta_z = z.norm0()
        rho_eff = float(np.max(sum(prob.level_abs(k) * eta_z ** (k - 1) for k in range(1, 5))))
        report = DominationReport(
            holds=bool(np.all(lhs <= rhs)), max_ratio=float(np.max(ratio)),
            violations=int(np.count_nonzero(lhs > rhs)), nodes=int(sel.sum()),
            window_end=float(end), truncated=truncated, rho_effective=rho_eff,
            rho_covers=rho >= rho_eff, E=E)
    return phis, phi_lim, report
