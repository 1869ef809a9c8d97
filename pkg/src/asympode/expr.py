"""Coefficient expressions in one variable ``t``.

Grammar (``^`` is right-associative and binds tighter than ``*`` and ``/``)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | "t" | NAME | FUNC "(" expr ")" | "(" expr ")"

``NAME`` is accepted only when bound through the ``params`` argument of
:func:`parse_expr`; it is substituted as a literal constant.
"""

from dataclasses import dataclass
import math

import numpy as np

FUNCS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class ExprNode:
    """Immutable expression tree node.

    ``kind`` is one of "const", "var", "neg", "add", "sub", "mul", "div",
    "pow" or a function name. ``value`` is set for constants only.
    """

    kind: str
    args: tuple = ()
    value: float = 0.0

    def __str__(self):
        return to_string(self)

    def __call__(self, t):
        return eval_expr(self, t)


ZERO = ExprNode("const", value=0.0)
ONE = ExprNode("const", value=1.0)
T = ExprNode("var")


def const(v):
    return ExprNode("const", value=float(v))


def is_const(e, v=None):
    return e.kind == "const" and (v is None or e.value == v)


# -- construction with constant folding --------------------------------------

def _fold(kind, args):
    node = ExprNode(kind, tuple(args))
    if all(a.kind == "const" for a in args):
        try:
            return const(eval_expr(node, 1.0))
        except ExprDomainError:
            return node
    return node


def neg(a):
    return _fold("neg", (a,))


def add(a, b):
    return _fold("add", (a, b))


def sub(a, b):
    return _fold("sub", (a, b))


def mul(a, b):
    return _fold("mul", (a, b))


def div(a, b):
    return _fold("div", (a, b))


def pow_(a, b):
    return _fold("pow", (a, b))


def func(name, a):
    return _fold(name, (a,))


# -- parsing -----------------------------------------------------------------

class _Parser:
    def __init__(self, text, params):
        self.text = text
        self.params = params or {}
        self.tokens = self._lex(text)
        self.i = 0

    @staticmethod
    def _lex(text):
        toks = []
        i = 0
        n = len(text)
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
            elif c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                while j < n and (text[j].isdigit() or text[j] == "."):
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        j = k
                        while j < n and text[j].isdigit():
                            j += 1
                lit = text[i:j]
                try:
                    val = float(lit)
                except ValueError:
                    raise ExprSyntaxError(f"malformed number {lit!r}", _byte(text, i))
                toks.append(("num", val, i))
                i = j
            elif c.isalpha() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                toks.append(("name", text[i:j], i))
                i = j
            elif c in "+-*/^()":
                toks.append((c, c, i))
                i += 1
            else:
                raise ExprSyntaxError(f"unexpected character {c!r}", _byte(text, i))
        toks.append(("end", None, n))
        return toks

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprSyntaxError(f"expected {kind!r}, found {what}", self.off(tok))
        self.i += 1
        return tok

    def off(self, tok):
        return _byte(self.text, tok[2])

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected {tok[1]!r}", self.off(tok))
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] in "+-":
            op = self.take()[0]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        kind = self.peek()[0]
        if kind == "-":
            self.take()
            return neg(self.unary())
        if kind == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            return pow_(base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind = tok[0]
        if kind == "num":
            self.take()
            return const(tok[1])
        if kind == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if kind == "name":
            self.take()
            name = tok[1]
            if name == "t":
                return T
            if name in FUNCS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return func(name, arg)
            if name in self.params:
                return const(self.params[name])
            raise UnknownIdentifierError(f"unknown identifier {name!r}", self.off(tok))
        what = "end of input" if kind == "end" else repr(tok[1])
        raise ExprSyntaxError(f"unexpected {what}", self.off(tok))


def _byte(text, i):
    return len(text[:i].encode("utf-8"))


def parse_expr(text, params=None):
    """Parse ``text`` into an :class:`ExprNode`.

    ``params`` maps extra identifiers (for example ``alpha``) to numbers.
    """
    return _Parser(text, params).parse()


def as_expr(x, params=None):
    if isinstance(x, ExprNode):
        return x
    if isinstance(x, (int, float)):
        return const(x)
    return parse_expr(str(x), params)


# -- evaluation --------------------------------------------------------------

def _is_int(v):
    return float(v).is_integer()


def _ev(e, t):
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        return t
    a = [_ev(c, t) for c in e.args]
    if k == "neg":
        return -a[0]
    if k == "add":
        return a[0] + a[1]
    if k == "sub":
        return a[0] - a[1]
    if k == "mul":
        return a[0] * a[1]
    if k == "div":
        if np.any(a[1] == 0):
            raise ExprDomainError("division by zero")
        return a[0] / a[1]
    if k == "pow":
        base, ex = a
        ex_const = e.args[1].kind == "const"
        if ex_const and _is_int(ex):
            if ex < 0 and np.any(base == 0):
                raise ExprDomainError("division by zero in negative power")
            if np.ndim(base) == 0:
                return float(base) ** int(ex)
            return np.power(base, ex)
        if np.any(base < 0):
            raise ExprDomainError("fractional power of a negative number")
        if np.any((base == 0) & (np.asarray(ex) < 0)):
            raise ExprDomainError("division by zero in negative power")
        if np.ndim(base) == 0 and np.ndim(ex) == 0:
            return float(base) ** float(ex)
        return np.power(base, ex)
    x = a[0]
    if k == "sin":
        return np.sin(x)
    if k == "cos":
        return np.cos(x)
    if k == "exp":
        return np.exp(x)
    if k == "log":
        if np.any(x <= 0):
            raise ExprDomainError("log of a nonpositive number")
        return np.log(x)
    if k == "sqrt":
        if np.any(x < 0):
            raise ExprDomainError("sqrt of a negative number")
        return np.sqrt(x)
    raise ExprError(f"unknown node kind {k!r}")


def eval_expr(e, t, strict=True):
    """Evaluate ``e`` at a scalar ``t`` (float result) or an array of times.

    With ``strict`` false, overflow to inf/nan is returned instead of raised.
    """
    scalar = np.ndim(t) == 0
    tt = float(t) if scalar else np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = _ev(e, tt)
    if not strict:
        return float(val) if scalar else np.broadcast_to(np.asarray(val, dtype=float), tt.shape).copy()
    if scalar:
        val = float(val)
        if not math.isfinite(val):
            raise ExprDomainError(f"non-finite value at t={t}")
        return val
    val = np.broadcast_to(np.asarray(val, dtype=float), tt.shape).copy()
    if not np.all(np.isfinite(val)):
        raise ExprDomainError("non-finite value on the sample set")
    return val


# -- differentiation ---------------------------------------------------------

def _d(e):
    r = _d_raw(e)
    return ZERO if r is None else r


def _d_raw(e):
    k = e.kind
    if k == "const":
        return ZERO
    if k == "var":
        return ONE
    if k == "neg":
        return neg(_d(e.args[0]))
    if k in ("add", "sub"):
        da, db = _d(e.args[0]), _d(e.args[1])
        if is_const(db, 0.0):
            return da
        if is_const(da, 0.0):
            return db if k == "add" else neg(db)
        return add(da, db) if k == "add" else sub(da, db)
    if k == "mul":
        a, b = e.args
        return _sum(_prod(_d(a), b), _prod(a, _d(b)))
    if k == "div":
        a, b = e.args
        da, db = _d(a), _d(b)
        first = _quot(da, b)
        if is_const(db, 0.0):
            return first
        second = _quot(_prod(a, db), pow_(b, const(2)))
        if second is None:
            return first
        if first is None:
            return neg(second)
        return sub(first, second)
    if k == "pow":
        a, b = e.args
        da = _d(a)
        if b.kind == "const":
            if b.value == 0 or first_zero(da):
                return ZERO
            lead = _prod(b, pow_(a, const(b.value - 1)))
            return _prod(lead, da)
        db = _d(b)
        inner = _sum(_prod(db, func("log", a)), _prod(b, _quot(da, a)))
        return _prod(e, inner)
    a = e.args[0]
    da = _d(a)
    if first_zero(da):
        return ZERO
    if k == "sin":
        outer = func("cos", a)
    elif k == "cos":
        outer = neg(func("sin", a))
    elif k == "exp":
        outer = e
    elif k == "log":
        return _quot(da, a)
    elif k == "sqrt":
        return _quot(da, mul(const(2), e))
    else:
        raise ExprError(f"unknown node kind {k!r}")
    return _prod(outer, da)


def first_zero(e):
    return e is None or is_const(e, 0.0)


def _prod(a, b):
    # zero factors arising from derivative rules are dropped, not simplified
    if first_zero(a) or first_zero(b):
        return None
    if is_const(a, 1.0):
        return b
    if is_const(b, 1.0):
        return a
    return mul(a, b)


def _quot(a, b):
    if first_zero(a):
        return None
    return div(a, b)


def _sum(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return add(a, b)


def diff_expr(e, order=1):
    """Symbolic ``order``-th derivative of ``e`` with respect to ``t``."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    for _ in range(order):
        e = _d(e)
    return e


# -- printing ----------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def to_string(e):
    k = e.kind
    if k == "const":
        s = repr(e.value)
        if s.endswith(".0"):
            s = s[:-2]
        return f"({s})" if e.value < 0 or s in ("inf", "nan") else s
    if k == "var":
        return "t"
    if k in FUNCS:
        return f"{k}({to_string(e.args[0])})"
    if k == "neg":
        inner = to_string(e.args[0])
        if _PREC.get(e.args[0].kind, 5) < 4:
            inner = f"({inner})"
        return f"-{inner}"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}[k]
    p = _PREC[k]
    a, b = e.args
    sa, sb = to_string(a), to_string(b)
    pa, pb = _PREC.get(a.kind, 5), _PREC.get(b.kind, 5)
    if k == "pow":
        if pa <= p:
            sa = f"({sa})"
        if pb < p:
            sb = f"({sb})"
    else:
        if pa < p:
            sa = f"({sa})"
        if pb < p or (pb == p and k in ("sub", "div", "mul", "add")):
            sb = f"({sb})"
    return f"{sa}{sym}{sb}"


# -- compilation to scalar Python callables ---------------------------------

def _c_pow(a, b):
    if float(b).is_integer():
        if b < 0 and a == 0:
            raise ExprDomainError("division by zero in negative power")
        return a ** int(b)
    if a < 0:
        raise ExprDomainError("fractional power of a negative number")
    if a == 0 and b < 0:
        raise ExprDomainError("division by zero in negative power")
    return a ** b


def _c_div(a, b):
    if b == 0:
        raise ExprDomainError("division by zero")
    return a / b


def _c_log(a):
    if a <= 0:
        raise ExprDomainError("log of a nonpositive number")
    return math.log(a)


def _c_sqrt(a):
    if a < 0:
        raise ExprDomainError("sqrt of a negative number")
    return math.sqrt(a)


def _c_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        raise ExprDomainError("exp overflow")


_C_ENV = {"_pow": _c_pow, "_div": _c_div, "_log": _c_log, "_sqrt": _c_sqrt,
          "_exp": _c_exp, "_sin": math.sin, "_cos": math.cos}


def _py(e):
    k = e.kind
    if k == "const":
        return repr(e.value)
    if k == "var":
        return "t"
    if k == "neg":
        return f"(-{_py(e.args[0])})"
    if k in ("add", "sub", "mul"):
        op = {"add": "+", "sub": "-", "mul": "*"}[k]
        return f"({_py(e.args[0])}{op}{_py(e.args[1])})"
    if k == "div":
        return f"_div({_py(e.args[0])},{_py(e.args[1])})"
    if k == "pow":
        return f"_pow({_py(e.args[0])},{_py(e.args[1])})"
    return f"_{k}({_py(e.args[0])})"


def compile_expr(e):
    """Fast scalar evaluator for ``e`` with the same domain errors."""
    src = f"lambda t: {_py(e)}"
    return eval(src, dict(_C_ENV))
