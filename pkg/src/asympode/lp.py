"""Windowed L^p norms and the decomposition z = Theta_1 + ... + Theta_m + Psi.

Each level k of the right-hand side, P_k = sum_{|a|=k} Omega_a z^a, is
convolved with the Green kernel to give I_k. For k >= 1 the coefficient split
Omega_a = lam_p Omega_p + lam_c separates I_k into I_{k,p} + I_{k,c}. The
groups H_1 = I_0 + I_{1,c}, H_{k+1} = I_{k,p} + I_{k+1,c} are assigned to the
Theta's (first m of them) and the rest to Psi.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .expr import eval_expr
from .rhs import monomial
from .solver import GridFunction, convolve_green


def m_of_p(p):
    p = float(p)
    if not p > 1:
        raise ValueError("p must exceed 1")
    if p > 4:
        return 4
    return int(math.ceil(p)) - 1


def window_lp_norm(f, p, T=None, t=None, channel=0):
    """(int_{t0}^T |f|^p)^{1/p} by the trapezoid rule on the grid.

    ``f`` is a GridFunction (``channel`` selects z, z' or z'') or an array of
    samples with the grid passed as ``t``.
    """
    if isinstance(f, GridFunction):
        t = f.t
        vals = f.channels[channel]
    else:
        vals = np.asarray(f, dtype=float)
        t = np.asarray(t, dtype=float)
    if T is None:
        T = t[-1]
    if T > t[-1] + 1e-12:
        raise ValueError("window end beyond grid")
    g = np.abs(vals) ** p
    k = np.searchsorted(t, T, side="right")
    tt = t[:k]
    gg = g[:k]
    if tt[-1] < T:
        gT = np.interp(T, t, g)
        tt = np.append(tt, T)
        gg = np.append(gg, gT)
    total = float(np.sum(np.diff(tt) * (gg[1:] + gg[:-1]) / 2))
    return total ** (1.0 / p)


def window_lp_growth(f, p, t=None, channel=0):
    """Relative growth of the windowed norm over the last decade of the grid."""
    tg = f.t if isinstance(f, GridFunction) else np.asarray(t)
    t0 = tg[0]
    T = tg[-1]
    T1 = t0 + (T - t0) / 10.0
    n1 = window_lp_norm(f, p, T1, t, channel)
    n2 = window_lp_norm(f, p, T, t, channel)
    return (n2 - n1) / n2 if n2 > 0 else 0.0


class MissingSplitError(ValueError):
    pass


@dataclass
class LpDecomposition:
    p: float
    m: int
    theta: list
    psi: GridFunction
    pieces: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    exponents: dict = field(default_factory=dict)

    def reconstruct(self):
        total = self.psi
        for th in self.theta:
            total = total + th
        return total

    def reconstruction_error(self, z):
        d = self.reconstruct() - z
        return max(float(np.max(np.abs(c))) for c in d.channels)


def _gf(t, parts):
    z, dz, d2z, _ = parts
    return GridFunction(t, z, dz, d2z)


def decompose_solution(z, table, roots, p, tail=True):
    m = m_of_p(p)
    t = z.t
    src = {}
    zero = np.zeros_like(t)
    src["I0"] = zero.copy()
    for k in range(1, 5):
        src[f"I{k}p"] = zero.copy()
        src[f"I{k}c"] = zero.copy()
    for a, e in table.items():
        k = sum(a)
        mono = monomial(z.z, z.dz, z.d2z, a) + zero
        if k == 0:
            src["I0"] = src["I0"] + eval_expr(e.expr, t) * mono
            continue
        if e.split is None:
            raise MissingSplitError(f"coefficient {a} has no lambda_p/lambda_c split")
        s = e.split
        src[f"I{k}p"] = src[f"I{k}p"] + s.lam_p * eval_expr(s.omega_p, t) * mono
        src[f"I{k}c"] = src[f"I{k}c"] + s.lam_c * mono
    pieces = {name: _gf(t, convolve_green(roots, t, f, tail)) for name, f in src.items()}
    groups = {
        "H1": ["I0", "I1c"],
        "H2": ["I1p", "I2c"],
        "H3": ["I2p", "I3c"],
        "H4": ["I3p", "I4c"],
    }

    def total(names):
        acc = GridFunction.zeros(t)
        for n in names:
            acc = acc + pieces[n]
        return acc

    H = [total(groups[f"H{k}"]) for k in range(1, 5)]
    theta = H[:m]
    psi = total(["I4p"])
    for h in H[m:]:
        psi = psi + h
    assignment = {f"Theta{k + 1}": groups[f"H{k + 1}"] for k in range(m)}
    assignment["Psi"] = sum((groups[f"H{k + 1}"] for k in range(m, 4)), []) + ["I4p"]
    exps = {"I0": p}
    for k in range(1, 5):
        exps[f"I{k}p"] = p / (1 + k)
        exps[f"I{k}c"] = p / k
    return LpDecomposition(p, m, theta, psi, pieces, assignment, exps)
