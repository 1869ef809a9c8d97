"""Reference integrator: Dormand-Prince 5(4) with PI step control.

Used as a brute-force check on the kernel/fixed-point machinery. Linear
fourth-order problems are renormalized on the fly (the state is kept O(1) and
its log scale accumulated), so growing or decaying modes can be followed over
long spans without overflow.
"""

from dataclasses import dataclass
import csv
import math

import numpy as np

from .expr import ExprDomainError, as_expr, compile_expr
from .rhs import CoefficientTable, monomial

RTOL = 1e-10
ATOL = 1e-14
BLOWUP = 1e6

# Dormand-Prince tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (order 4), columns multiply theta, theta^2, theta^3, theta^4
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class OracleError(RuntimeError):
    pass


class StepUnderflowError(OracleError):
    pass


class BlowUpError(OracleError):
    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


@dataclass
class Trajectory:
    """Accepted steps of an integration.

    ``y[i]`` is the state at ``t[i]`` divided by ``exp(log_scale[i])``.
    ``err[i]`` is the normalized local error estimate of step i (<= 1 when
    accepted) and ``err_abs[i]`` the raw max-norm estimate in scaled units.
    """

    t: np.ndarray
    y: np.ndarray
    log_scale: np.ndarray
    K: np.ndarray
    err: np.ndarray
    err_abs: np.ndarray
    rtol: float
    atol: float
    fevals: int = 0

    @property
    def dim(self):
        return self.y.shape[1]

    def _locate(self, tq):
        tq = np.atleast_1d(np.asarray(tq, dtype=float))
        lo, hi = min(self.t[0], self.t[-1]), max(self.t[0], self.t[-1])
        if np.any(tq < lo - 1e-12) or np.any(tq > hi + 1e-12):
            raise ValueError("query outside the integrated span")
        forward = self.t[-1] >= self.t[0]
        tt = self.t if forward else self.t[::-1]
        idx = np.searchsorted(tt, tq, side="right") - 1
        idx = np.clip(idx, 0, len(tt) - 2)
        if not forward:
            idx = len(self.t) - 2 - idx
        return tq, idx

    def scaled(self, tq):
        """Dense-output state at ``tq`` in the scale of the enclosing step.

        Returns (states, log_scale) with states of shape (n, dim).
        """
        tq, idx = self._locate(tq)
        h = self.t[idx + 1] - self.t[idx]
        th = (tq - self.t[idx]) / h
        pw = np.stack([th, th ** 2, th ** 3, th ** 4], axis=1)
        # Q[i] = K[i].T @ P has shape (dim, 4)
        Q = np.einsum("nsd,sk->ndk", self.K[idx], _P)
        out = self.y[idx] + h[:, None] * np.einsum("ndk,nk->nd", Q, pw)
        return out, self.log_scale[idx]

    def __call__(self, tq):
        s, ls = self.scaled(tq)
        return s * np.exp(ls)[:, None]

    def log_abs(self, tq, comp=0):
        s, ls = self.scaled(tq)
        with np.errstate(divide="ignore"):
            return np.log(np.abs(s[:, comp])) + ls

    def ratios(self, tq):
        """y^(k)/y for k = 1..dim-1, free of the overall scale."""
        s, _ = self.scaled(tq)
        return s[:, 1:] / s[:, :1]

    def nodes(self):
        """Unscaled node states (may overflow for long spans)."""
        return self.y * np.exp(self.log_scale)[:, None]

    def to_csv(self, path, names=None):
        names = names or [f"y{k}" for k in range(self.dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *names, "log_scale", "err"])
            errs = np.concatenate([[0.0], self.err])
            for i in range(len(self.t)):
                w.writerow([repr(float(self.t[i])), *(repr(float(v)) for v in self.y[i]),
                            repr(float(self.log_scale[i])), repr(float(errs[i]))])


def _norm(e, y, ynew, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
    return math.sqrt(float(np.mean((e / sc) ** 2)))


def dopri(fun, span, y0, rtol=RTOL, atol=ATOL, h0=None, renorm=False,
          blowup=None, max_steps=2_000_000):
    """Integrate y' = fun(t, y) over ``span`` = (t0, t1)."""
    t0, t1 = map(float, span)
    direction = 1.0 if t1 >= t0 else -1.0
    y = np.array(y0, dtype=float)
    d = y.size
    ls = 0.0
    if renorm:
        m = float(np.max(np.abs(y)))
        if m == 0:
            raise OracleError("renormalized integration needs a nonzero initial state")
        y = y / m
        ls = math.log(m)
    ts, ys, lss, Ks, errs, eabs = [t0], [y.copy()], [ls], [], [], []
    t = t0
    f0 = np.asarray(fun(t, y), dtype=float)
    nfev = 1
    if h0 is None:
        sc = atol + rtol * np.abs(y)
        d0 = math.sqrt(float(np.mean((y / sc) ** 2)))
        d1 = math.sqrt(float(np.mean((f0 / sc) ** 2)))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t1 - t0))
    h = abs(h0)
    alpha, beta_, safety = 0.7 / 5, 0.4 / 5, 0.9
    err_prev = 1e-4
    K = np.empty((7, d))
    steps = 0
    while direction * (t1 - t) > 0:
        if steps > max_steps:
            raise OracleError("maximum number of steps exceeded")
        hmin = 16 * np.spacing(abs(t)) + 1e-300
        if h < hmin:
            raise StepUnderflowError(f"step size underflow at t = {t:.6g} (stiff or singular problem)")
        if direction * (t + direction * h - t1) > 0:
            h = abs(t1 - t)
        hs = direction * h
        K[0] = f0
        for s in range(1, 7):
            ys_ = y + hs * (np.dot(_A[s], K[:s]))
            K[s] = fun(t + _C[s] * hs, ys_)
        nfev += 6
        ynew = y + hs * np.dot(_B, K)
        e = hs * np.dot(_E, K)
        err = _norm(e, y, ynew, rtol, atol)
        if not np.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            tnew = t + hs if abs(t1 - (t + hs)) > 4 * np.spacing(abs(t1)) else t1
            Ks.append(K.copy())
            errs.append(err)
            eabs.append(float(np.max(np.abs(e))))
            t = tnew
            f0 = K[6].copy()
            y = ynew
            if blowup is not None and float(np.max(np.abs(y))) * math.exp(ls) > blowup:
                raise BlowUpError(f"state norm exceeded {blowup:g} at t = {t:.6g}", t)
            if renorm:
                m = float(np.max(np.abs(y)))
                if m > 2.0 or m < 0.5:
                    y = y / m
                    f0 = f0 / m
                    ls += math.log(m)
            ts.append(t)
            ys.append(y.copy())
            lss.append(ls)
            fac = safety * max(err, 1e-10) ** (-alpha) * err_prev ** beta_
            fac = min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
            h *= fac
            steps += 1
        else:
            h *= max(0.2, safety * err ** (-alpha))
    return Trajectory(np.array(ts), np.array(ys), np.array(lss),
                      np.array(Ks).reshape(-1, 7, d), np.array(errs), np.array(eabs),
                      rtol, atol, nfev)


# -- equations -----------------------------------------------------------------

@dataclass
class Linear4:
    """y'''' + (a3+r3) y''' + (a2+r2) y'' + (a1+r1) y' + (a0+r0) y = 0."""

    a: tuple
    r: tuple

    @classmethod
    def make(cls, a, r=None, params=None):
        r = r if r is not None else ("0", "0", "0", "0")
        return cls(tuple(float(x) for x in a), tuple(as_expr(x, params) for x in r))

    def coeff_funcs(self):
        fs = [compile_expr(e) for e in self.r]
        a = self.a
        return lambda t: [a[j] + fs[j](t) for j in range(4)]

    def terms(self, t, Y, d4):
        c = self.coeff_funcs()
        C = np.array([c(float(x)) for x in t])
        return np.stack([d4, C[:, 3] * Y[:, 3], C[:, 2] * Y[:, 2],
                         C[:, 1] * Y[:, 1], C[:, 0] * Y[:, 0]])


@dataclass
class Nonlinear3:
    """z''' + b2 z'' + b1 z' + b0 z = P(t, z, z', z'')."""

    b: tuple
    table: CoefficientTable

    def rhs_func(self):
        items = [(a, compile_expr(e.expr)) for a, e in self.table.items()]

        def P(t, x1, x2, x3):
            acc = 0.0
            for a, f in items:
                acc += f(t) * x1 ** a[0] * x2 ** a[1] * x3 ** a[2]
            return acc
        return P

    def terms(self, t, Y, d3):
        b0, b1, b2 = self.b
        P = np.array([self.rhs_func()(float(x), *Y[i, :3]) for i, x in enumerate(t)])
        return np.stack([d3, b2 * Y[:, 2], b1 * Y[:, 1], b0 * Y[:, 0], P])


def integrate_linear4(a, r, y0, span, rtol=RTOL, atol=ATOL, params=None, renorm=True):
    """Integrate the linear fourth-order equation from state (y, y', y'', y''')."""
    eq = a if isinstance(a, Linear4) else Linear4.make(a, r, params)
    c = eq.coeff_funcs()

    def f(t, y):
        c0, c1, c2, c3 = c(t)
        return np.array([y[1], y[2], y[3], -(c3 * y[3] + c2 * y[2] + c1 * y[1] + c0 * y[0])])
    try:
        return dopri(f, span, y0, rtol, atol, renorm=renorm)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ExprDomainError(str(exc)) from exc


def integrate_nonlinear3(b, table, z0, span, rtol=RTOL, atol=ATOL, blowup=BLOWUP):
    """Integrate z''' + b2 z'' + b1 z' + b0 z = P from state (z, z', z'')."""
    b0, b1, b2 = (float(x) for x in b)
    P = Nonlinear3((b0, b1, b2), table).rhs_func()

    def f(t, y):
        return np.array([y[1], y[2], -(b2 * y[2] + b1 * y[1] + b0 * y[0]) + P(t, y[0], y[1], y[2])])
    try:
        return dopri(f, span, z0, rtol, atol, blowup=blowup)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ExprDomainError(str(exc)) from exc


def wronskian_scaled(trajs, tq):
    """log|W| at ``tq`` for four linear trajectories."""
    tq = np.atleast_1d(np.asarray(tq, dtype=float))
    logs = np.zeros_like(tq)
    M = np.empty((tq.size, 4, 4))
    for j, tr in enumerate(trajs):
        s, ls = tr.scaled(tq)
        M[:, :, j] = s
        logs += ls
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.linalg.det(M))) + logs


def _fd_central(g, t, h):
    """4th-order central difference of a callable."""
    return (g(t - 2 * h) - 8 * g(t - h) + 8 * g(t + h) - g(t + 2 * h)) / (12 * h)


def residual_check(sol, eq, n=400, window=None, fd_step=None):
    """Max normalized residual of ``eq`` on ``sol``.

    ``sol`` may be a Trajectory, a solver GridFunction, or a pair (t, states).
    The highest derivative is formed by finite differences unless the states
    array carries it as an extra column. For
    trajectories the normalization is pointwise (by the largest term at each
    sample), since renormalized states carry no absolute scale.
    """
    from .solver import GridFunction, _fd5

    if isinstance(sol, GridFunction):
        t = sol.t
        Y = np.stack([sol.z, sol.dz, sol.d2z], axis=1)
        top = sol.third_derivative_fd()
        return _residual_from(eq, t, Y, top, window, trim=2, pointwise=False)
    if isinstance(sol, Trajectory):
        lo, hi = sorted((sol.t[0], sol.t[-1]))
        if window is not None:
            lo, hi = max(lo, window[0]), min(hi, window[1])
        hh = fd_step or min(1e-2, (hi - lo) / 50)
        tq = np.linspace(lo + 2 * hh, hi - 2 * hh, n)
        Y, ls = sol.scaled(tq)
        d = sol.dim

        def top_comp(x):
            s, l2 = sol.scaled(x)
            return s[:, d - 1] * np.exp(l2 - ls)
        top = _fd_central(top_comp, tq, hh)
        return _residual_from(eq, tq, Y, top, None, trim=0, pointwise=True)
    t, Y = sol
    t = np.asarray(t, dtype=float)
    Y = np.asarray(Y, dtype=float)
    order = 4 if isinstance(eq, Linear4) else 3
    if Y.shape[1] > order:
        # highest derivative supplied
        return _residual_from(eq, t, Y[:, :order], Y[:, order], window, trim=0, pointwise=False)
    top = _fd5(t, Y[:, -1])
    return _residual_from(eq, t, Y, top, window, trim=2, pointwise=False)


def _residual_from(eq, t, Y, top, window, trim, pointwise):
    T = eq.terms(t, Y, top)
    signs = np.ones(T.shape[0])
    if isinstance(eq, Nonlinear3):
        signs[-1] = -1.0
    res = np.abs(np.tensordot(signs, T, axes=1))
    mag = np.abs(T)
    sel = np.ones(t.size, dtype=bool)
    if trim:
        sel[:trim] = sel[-trim:] = False
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    if pointwise:
        scale = np.maximum(np.max(mag, axis=0), 1e-300)
        return float(np.max(res[sel] / scale[sel]))
    return float(np.max(res[sel]) / max(float(np.max(mag[:, sel])), 1e-300))
