"""Finite-difference oracle for symbolic derivatives.

The expression tree is evaluated in 40-digit arithmetic so that the stencil
error is pure truncation (O(h^4) for these stencils), not round-off.
"""

import mpmath as mp

# central stencils of accuracy order 4 on offsets -3..3, as exact fractions
_STENCILS = {
    1: [(0, 1), (1, 12), (-8, 12), (0, 1), (8, 12), (-1, 12), (0, 1)],
    2: [(0, 1), (-1, 12), (16, 12), (-30, 12), (16, 12), (-1, 12), (0, 1)],
    3: [(1, 8), (-1, 1), (13, 8), (0, 1), (-13, 8), (1, 1), (-1, 8)],
    4: [(-1, 6), (2, 1), (-13, 2), (28, 3), (-13, 2), (2, 1), (-1, 6)],
}


def mp_eval(e, t):
    k = e.kind
    if k == "const":
        return mp.mpf(e.value)
    if k == "var":
        return t
    a = [mp_eval(x, t) for x in e.args]
    if k == "neg":
        return -a[0]
    if k == "add":
        return a[0] + a[1]
    if k == "sub":
        return a[0] - a[1]
    if k == "mul":
        return a[0] * a[1]
    if k == "div":
        return a[0] / a[1]
    if k == "pow":
        if e.args[1].kind == "const" and float(e.args[1].value).is_integer():
            return a[0] ** int(e.args[1].value)
        return a[0] ** a[1]
    return {"sin": mp.sin, "cos": mp.cos, "exp": mp.exp, "log": mp.log, "sqrt": mp.sqrt}[k](a[0])


def central_fd(e, t, k, h=None):
    """k-th derivative of expression ``e`` at ``t``; h = max(1e-3, 1e-3|t|)."""
    with mp.workdps(40):
        t = mp.mpf(t)
        h = mp.mpf(h) if h is not None else max(mp.mpf("1e-3"), mp.mpf("1e-3") * abs(t))
        if k == 0:
            return float(mp_eval(e, t))
        acc = mp.mpf(0)
        for (p, q), o in zip(_STENCILS[k], range(-3, 4)):
            if p != 0:
                acc += mp.mpf(p) / q * mp_eval(e, t + o * h)
        return float(acc / h**k)
