"""Exponential-convolution sweeps, the hot loop of every kernel integral.

Two interchangeable backends compute

    causal:      X_n = int_{t_0}^{t_n} exp(r (t_n - s)) f(s) ds
    anticausal:  X_n = int_{t_n}^{t_N} exp(r (t_n - s)) f(s) ds

for a piecewise-linear f sampled on a strictly increasing grid. The numba
backend is a scalar recursion; the numpy backend works blockwise with dense
triangular matrices. Set ``ASYMPODE_NO_NUMBA=1`` to force numpy.
"""

import os

import numpy as np

_SMALL = 1e-3


def _phi_psi(x):
    """Return (expm1(x)/x, ((x-1)e^x+1)/x^2) elementwise, stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL
    xs = np.where(small, 1.0, x)
    phi = np.where(small, 1.0 + x / 2 + x * x / 6 + x**3 / 24,
                   np.expm1(xs) / xs)
    psi = np.where(small, 0.5 + x / 3 + x * x / 8 + x**3 / 30,
                   (xs * np.exp(xs) - np.expm1(xs)) / (xs * xs))
    return phi, psi


def step_weights(h, rate, direction):
    """Weights (w_near, w_far) of the local integral over one grid cell.

    For the causal sweep the cell [t_n, t_{n+1}] contributes
    w_far * f_n + w_near * f_{n+1}; for the anticausal sweep it contributes
    w_near * f_n + w_far * f_{n+1}.
    """
    h = np.asarray(h, dtype=float)
    if h.size > 1 and np.ptp(h) <= 1e-9 * np.max(np.abs(h)):
        # uniform grid up to rounding: one cell weight for all cells
        wn, wf = step_weights(np.array([np.mean(h)]), rate, direction)
        return np.full(h.shape, wn[0]), np.full(h.shape, wf[0])
    x = rate * h if direction > 0 else -rate * h
    phi, psi = _phi_psi(x)
    return h * (phi - psi), h * psi


def _sweep_numpy(t, f, rate, direction, init, block=64):
    n = t.size
    out = np.empty(n)
    if n == 0:
        return out
    h = np.diff(t)
    w_near, w_far = step_weights(h, rate, direction)
    if direction > 0:
        b = w_far * f[:-1] + w_near * f[1:]
        tt = t
    else:
        b = (w_near * f[:-1] + w_far * f[1:])[::-1]
        tt = -t[::-1]
    # X_{j+1} = exp(r (tt_{j+1} - tt_j)) X_j + b_j, solved per block of rows
    r_eff = rate if direction > 0 else -rate
    res = np.empty(n)
    res[0] = init
    pos = 0
    while pos < n - 1:
        stop = min(pos + block, n - 1)
        tb = tt[pos:stop + 1]
        # rows i = pos+1..stop, columns m = pos..stop-1 (source index b_m)
        gap = tb[1:, None] - tb[None, 1:]
        mask = np.tril(np.ones((stop - pos, stop - pos), dtype=bool))
        with np.errstate(over="ignore", invalid="ignore"):
            mat = np.where(mask, np.exp(r_eff * np.where(mask, gap, 0.0)), 0.0)
            carry = np.exp(r_eff * (tb[1:] - tb[0])) * res[pos]
        res[pos + 1:stop + 1] = carry + mat @ b[pos:stop]
        pos = stop
    if direction > 0:
        out[:] = res
    else:
        out[:] = res[::-1]
    return out


def _sweep_loop(t, f, rate, direction, init, w_near, w_far):
    n = t.shape[0]
    out = np.empty(n)
    if direction > 0:
        out[0] = init
        for j in range(n - 1):
            e = np.exp(rate * (t[j + 1] - t[j]))
            out[j + 1] = e * out[j] + w_far[j] * f[j] + w_near[j] * f[j + 1]
    else:
        out[n - 1] = init
        for j in range(n - 2, -1, -1):
            e = np.exp(-rate * (t[j + 1] - t[j]))
            out[j] = e * out[j + 1] + w_near[j] * f[j] + w_far[j] * f[j + 1]
    return out


def _want_numba():
    return os.environ.get("ASYMPODE_NO_NUMBA", "").strip() not in ("1", "true", "yes")


_loop_jit = None
if _want_numba():
    try:
        from numba import njit

        _loop_jit = njit(cache=True, nogil=True)(_sweep_loop)
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _loop_jit = None


def backend():
    return "numba" if _loop_jit is not None else "numpy"


def exp_sweep(t, f, rate, direction, init=0.0, use=None):
    """Exponential convolution of samples ``f`` on grid ``t``.

    ``direction`` is +1 (integrate from the left end) or -1 (from the right
    end). ``init`` seeds the value at the starting end, so a known tail can be
    carried in. ``use`` picks "numba" or "numpy"; default follows
    :func:`backend`.
    """
    t = np.ascontiguousarray(t, dtype=float)
    f = np.ascontiguousarray(f, dtype=float)
    kind = use or backend()
    if kind == "numba" and _loop_jit is not None:
        w_near, w_far = step_weights(np.diff(t), rate, direction)
        return _loop_jit(t, f, float(rate), int(direction), float(init),
                         np.ascontiguousarray(w_near), np.ascontiguousarray(w_far))
    return _sweep_numpy(t, f, float(rate), int(direction), float(init))
