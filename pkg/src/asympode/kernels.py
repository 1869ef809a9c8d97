"""Characteristic roots of the cubic, the Green kernel and its bound constants.

The operator is L z = z''' + b2 z'' + b1 z' + b0 z with real simple nonzero
roots g1 > g2 > g3. The bounded Green function used in every integral is

    G(t, s) =  sum_{g_i < 0}  e^{g_i (t-s)} / p'(g_i)   for t > s
    G(t, s) = -sum_{g_i > 0}  e^{g_i (t-s)} / p'(g_i)   for t < s

so negative roots act causally (memory of [t0, t]) and positive roots act
anticausally (look-ahead over [t, oo)). ``printed_kernel`` keeps the original
branch table g1..g4 verbatim for comparison; it is the transpose in (t, s) of
the function above and is not used by the solver.
"""

from dataclasses import dataclass
import math

import numpy as np

SEP_TOL = 1e-9

CASES = ("---", "+--", "++-", "+++")


class RootError(ValueError):
    """Characteristic roots violate the real, simple, nonzero requirement."""


@dataclass(frozen=True)
class CharRoots:
    g1: float
    g2: float
    g3: float

    @property
    def gammas(self):
        return np.array([self.g1, self.g2, self.g3])

    @property
    def case(self):
        return "".join("+" if g > 0 else "-" for g in (self.g1, self.g2, self.g3))

    @property
    def n_pos(self):
        return sum(g > 0 for g in (self.g1, self.g2, self.g3))

    @property
    def D(self):
        g1, g2, g3 = self.g1, self.g2, self.g3
        return (g2 - g1) * (g3 - g2) * (g3 - g1)

    @property
    def b(self):
        """(b0, b1, b2) of the monic cubic with these roots."""
        g1, g2, g3 = self.g1, self.g2, self.g3
        return (-g1 * g2 * g3, g1 * g2 + g1 * g3 + g2 * g3, -(g1 + g2 + g3))

    @property
    def weights(self):
        """1/p'(g_i) for each root."""
        g = self.gammas
        return np.array([1.0 / np.prod([g[i] - g[j] for j in range(3) if j != i])
                         for i in range(3)])

    def bound_rate(self):
        """Exponent of the printed bound A e^{-rate (t-s)} for this case."""
        return {"---": self.g1, "+--": self.g2, "++-": self.g3, "+++": self.g3}[self.case]

    def beta_interval(self):
        """Open interval admissible for the envelope exponent beta."""
        c = self.case
        if c == "---":
            return (self.g1, 0.0)
        if c == "+--":
            return (self.g2, 0.0)
        if c == "++-":
            return (self.g3, 0.0)
        return (0.0, self.g3)

    def default_beta(self):
        lo, hi = self.beta_interval()
        return 0.5 * (lo + hi)


def make_roots(g1, g2, g3, tol=SEP_TOL):
    gs = sorted((float(g1), float(g2), float(g3)), reverse=True)
    _validate(gs, tol)
    return CharRoots(*gs)


def _validate(gs, tol):
    scale = max(1.0, max(abs(g) for g in gs))
    if gs[0] - gs[1] <= tol * scale or gs[1] - gs[2] <= tol * scale:
        raise RootError(f"repeated root within tolerance: {gs}")
    for g in gs:
        if abs(g) <= tol * scale:
            raise RootError(f"zero root within tolerance: {gs}")


def cubic_roots(b0, b1, b2, tol=SEP_TOL):
    """Real roots of g^3 + b2 g^2 + b1 g + b0, sorted descending.

    Trigonometric method on the depressed cubic followed by one Newton step
    per root. Raises :class:`RootError` for complex, repeated or zero roots.
    """
    b0, b1, b2 = float(b0), float(b1), float(b2)
    shift = b2 / 3.0
    p = b1 - b2 * b2 / 3.0
    q = 2.0 * b2**3 / 27.0 - b2 * b1 / 3.0 + b0
    scale = max(1.0, abs(b0) ** (1 / 3), abs(b1) ** 0.5, abs(b2))
    disc = 4.0 * p**3 + 27.0 * q * q  # negative for three distinct real roots
    if p >= 0 or disc > 1e-12 * scale**6:
        if p == 0 and q == 0:
            raise RootError("triple root")
        if abs(disc) <= 1e-12 * scale**6:
            raise RootError("repeated root within tolerance")
        raise RootError(f"complex-root pair (discriminant {-disc:.3e} < 0)")
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * m)
    arg = max(-1.0, min(1.0, arg))
    theta = math.acos(arg) / 3.0
    xs = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]
    roots = []
    for x in xs:
        g = x - shift
        f = ((g + b2) * g + b1) * g + b0
        df = (3.0 * g + 2.0 * b2) * g + b1
        if df != 0.0:
            g -= f / df
        roots.append(g)
    roots.sort(reverse=True)
    _validate(roots, tol)
    return CharRoots(*roots)


# -- kernel evaluation -------------------------------------------------------

def green_eval(roots, t, s, deriv=0):
    """d^deriv/dt^deriv G(t, s) for the bounded Green function.

    At t == s the value for deriv 0 and 1 is the common one-sided limit;
    for deriv 2 the t < s side is returned.
    """
    g = roots.gammas
    w = roots.weights
    u = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    out = np.zeros(np.shape(u))
    for gi, wi in zip(g, w):
        with np.errstate(over="ignore"):
            term = wi * gi**deriv * np.exp(gi * u)
        if gi < 0:
            out = out + np.where(u > 0, term, 0.0)
        else:
            out = out - np.where(u <= 0, term, 0.0)
    if deriv < 2:
        # both one-sided formulas agree at u == 0; use the causal one only
        at = u == 0
        if np.any(at):
            val = sum(wi * gi**deriv for gi, wi in zip(g, w) if gi < 0)
            out = np.where(at, val, out)
    return float(out) if np.ndim(out) == 0 else out


def green_unnormalized(roots, t, s, deriv=0):
    """D * G, the branch values without the 1/D prefactor."""
    return roots.D * green_eval(roots, t, s, deriv)


def printed_kernel(roots, t, s, deriv=0, normalized=True):
    """The branch table g1..g4 exactly as displayed, with t-derivatives.

    Branch rows use e^{-g_i (t-s)}. For t == s the upper row (t >= s) is taken.
    """
    g1, g2, g3 = roots.g1, roots.g2, roots.g3
    u = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)

    def e(g):
        with np.errstate(over="ignore"):
            return (-g) ** deriv * np.exp(-g * u)

    upper = u >= 0
    c = roots.case
    if c == "---":
        val = np.where(upper, 0.0,
                       (g2 - g3) * e(g1) + (g3 - g1) * e(g2) + (g1 - g2) * e(g3))
    elif c == "+--":
        val = np.where(upper, (g2 - g3) * e(g1),
                       (g3 - g1) * e(g2) + (g1 - g2) * e(g3))
    elif c == "++-":
        val = np.where(upper, (g3 - g2) * e(g1) + (g1 - g3) * e(g2),
                       (g2 - g1) * e(g3))
    else:
        val = np.where(upper,
                       (g3 - g2) * e(g1) + (g1 - g3) * e(g2) + (g2 - g1) * e(g3), 0.0)
    if normalized:
        val = val / roots.D
    return float(val) if np.ndim(val) == 0 else val


# -- constants ---------------------------------------------------------------

@dataclass(frozen=True)
class KernelConstants:
    A: float
    A_hat: float
    beta: float
    sigma: float

    @property
    def rho_max(self):
        return 1.0 / (self.sigma * self.A_hat)


def constant_A(roots):
    g1, g2, g3 = roots.g1, roots.g2, roots.g3

    def f(g):
        return 1.0 + abs(g) + g * g

    return abs(g3 - g2) * f(g1) + abs(g3 - g1) * f(g2) + abs(g2 - g1) * f(g3)


def sigma_constant(roots, beta):
    """The four-case table for the envelope constant, evaluated as written."""
    g1, g2, g3 = roots.g1, roots.g2, roots.g3
    c = roots.case
    if c == "---":
        return 1.0 / (-g1 + beta)
    if c == "+--":
        return 1.0 / (-(-g1 + beta)) + 1.0 / (-g2 + beta)
    if c == "++-":
        return 1.0 / (-(-g2 + beta)) + 1.0 / (-g3 + beta)
    return 1.0 / (-(-g3 + beta))


def check_beta(roots, beta):
    lo, hi = roots.beta_interval()
    if not lo < beta < hi:
        raise ValueError(
            f"beta={beta} outside ]{lo}, {hi}[ required for case {roots.case}")


def asymptotic_constants(roots, beta=None):
    if beta is None:
        beta = roots.default_beta()
    check_beta(roots, beta)
    A = constant_A(roots)
    return KernelConstants(A=A, A_hat=A / abs(roots.D), beta=float(beta),
                           sigma=sigma_constant(roots, beta))
