"""Drift expressions: parsing, printing, evaluation and the built-in families.

Grammar (whitespace insignificant)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" ["-"] number)?
    unary  := "-" unary | atom
    atom   := number | "x" | ident "(" expr ("," expr)* ")" | "(" expr ")"

``ind(lo, hi)`` is the indicator of ``x`` in ``[lo, hi)`` and
``piece(c, t, e)`` is ``t`` where ``c > 0`` and ``e`` elsewhere.  Named
parameters passed to :func:`parse_drift` are substituted as constants at
parse time, so an exponent may be a parameter name.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq


class DriftSyntaxError(ValueError):
    """Malformed drift text; ``column`` is 1-based."""

    def __init__(self, message: str, column: int, expected: str = ""):
        self.column = column
        self.expected = expected
        text = f"column {column}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class UnknownIdentifier(DriftSyntaxError):
    pass


class NonConstantExponent(DriftSyntaxError):
    pass


class EvaluationSingularity(ArithmeticError):
    """The drift is not finite at some point and no convention was given."""

    def __init__(self, points):
        self.points = np.atleast_1d(points)
        super().__init__(f"drift not finite at x = {self.points[:5].tolist()}")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # neg, abs, sign, floor, sqrt, phi
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # add, sub, mul, div, pow, min, max
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Indicator:
    lo: "Node"
    hi: "Node"


@dataclass(frozen=True)
class Piecewise:
    cond: "Node"
    then: "Node"
    other: "Node"


Node = Union[Const, Var, Unary, Binary, Indicator, Piecewise]
DriftExpr = Node

UNARY_FUNCS = ("abs", "sign", "sqrt", "floor", "phi")
BINARY_FUNCS = ("min", "max")
ARITY = {"abs": 1, "sign": 1, "sqrt": 1, "floor": 1, "phi": 1,
         "min": 2, "max": 2, "ind": 2, "piece": 3}
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def phi(y):
    """+1 where floor(y) is odd, -1 where it is even (nan stays nan)."""
    y = np.asarray(y, dtype=float)
    with np.errstate(invalid="ignore"):
        fl = np.floor(y)
        out = np.where(np.mod(fl, 2.0) == 1.0, 1.0, -1.0)
    return np.where(np.isfinite(y), out, np.nan)


def _apply_unary(op, v):
    with np.errstate(all="ignore"):
        if op == "neg":
            return -v
        if op == "abs":
            return np.abs(v)
        if op == "sign":
            return np.sign(v)
        if op == "floor":
            return np.floor(v)
        if op == "sqrt":
            return np.sqrt(v)
        if op == "phi":
            return phi(v)
    raise ValueError(op)


def _apply_binary(op, a, b):
    with np.errstate(all="ignore"):
        if op == "add":
            return a + b
        if op == "sub":
            return a - b
        if op == "mul":
            return a * b
        if op == "div":
            return np.true_divide(a, b)
        if op == "pow":
            return np.power(a, b)
        if op == "min":
            return np.minimum(a, b)
        if op == "max":
            return np.maximum(a, b)
    raise ValueError(op)


def _fold(node: Node) -> Node:
    """Replace ``node`` by a constant when all its children are constant."""
    if isinstance(node, Unary) and isinstance(node.arg, Const):
        v = float(_apply_unary(node.op, np.float64(node.arg.value)))
    elif (isinstance(node, Binary) and isinstance(node.left, Const)
          and isinstance(node.right, Const)):
        v = float(_apply_binary(node.op, np.float64(node.left.value),
                                np.float64(node.right.value)))
    elif isinstance(node, Piecewise) and isinstance(node.cond, Const):
        return node.then if node.cond.value > 0 else node.other
    else:
        return node
    return Const(v) if math.isfinite(v) else node


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


class _Parser:
    def __init__(self, text: str, params: Mapping[str, float]):
        self.text = text
        self.params = dict(params)
        self.tokens = []  # (kind, value, column)
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
                raise DriftSyntaxError(f"unexpected character {text[col - 1]!r}", col)
            kind = m.lastgroup
            col = m.start(kind) + 1
            self.tokens.append((kind, m.group(kind), col))
            pos = m.end()
        self.tokens.append(("end", "", len(text) + 1))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, col = self.take()
        if v != value or kind == "end":
            raise DriftSyntaxError(f"unexpected {v or 'end of input'!r}", col, repr(value))

    def parse(self) -> Node:
        node = self.expr()
        kind, v, col = self.peek()
        if kind != "end":
            raise DriftSyntaxError(f"unexpected {v!r}", col, "operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            node = _fold(Binary(op, node, self.term()))
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            node = _fold(Binary(op, node, self.factor()))
        return node

    def factor(self):
        base = self.unary()
        if self.peek()[1] == "^":
            self.take()
            sign = 1.0
            if self.peek()[1] == "-":
                self.take()
                sign = -1.0
            kind, v, col = self.take()
            if kind == "num":
                e = float(v)
            elif kind == "id" and v in self.params:
                e = float(self.params[v])
            elif kind == "id" or v == "(":
                raise NonConstantExponent("exponent must be a constant", col, "number")
            else:
                raise DriftSyntaxError(f"unexpected {v or 'end of input'!r}", col, "number")
            base = _fold(Binary("pow", base, Const(sign * e)))
        return base

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return _fold(Unary("neg", self.unary()))
        return self.atom()

    def atom(self):
        kind, v, col = self.take()
        if kind == "num":
            return Const(float(v))
        if kind == "id":
            if v == "x":
                return Var()
            if v in self.params:
                return Const(float(self.params[v]))
            if v not in ARITY:
                raise UnknownIdentifier(f"unknown identifier {v!r}", col)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            kind2, v2, col2 = self.peek()
            if v2 != ")":
                raise DriftSyntaxError(f"unexpected {v2 or 'end of input'!r}", col2, "')' or ','")
            self.take()
            if len(args) != ARITY[v]:
                raise DriftSyntaxError(f"{v} takes {ARITY[v]} argument(s), got {len(args)}", col)
            if v in UNARY_FUNCS:
                return _fold(Unary(v, args[0]))
            if v in BINARY_FUNCS:
                return _fold(Binary(v, args[0], args[1]))
            if v == "ind":
                return Indicator(args[0], args[1])
            return _fold(Piecewise(*args))
        if v == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise DriftSyntaxError(f"unexpected {v or 'end of input'!r}", col, "number, 'x', function or '('")


def parse_drift(text: str, params: Optional[Mapping[str, float]] = None) -> Node:
    """Parse drift text into an AST with constant subtrees folded."""
    return _Parser(text, params or {}).parse()


def to_text(node: Node) -> str:
    """Print an AST so that ``parse_drift(to_text(n)) == n``."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = to_text(node.arg)
            if not isinstance(node.arg, (Var, Const)):
                inner = f"({inner})"  # "-" binds tighter than "^"
            return f"(-{inner})"
        return f"{node.op}({to_text(node.arg)})"
    if isinstance(node, Binary):
        if node.op in BINARY_FUNCS:
            return f"{node.op}({to_text(node.left)}, {to_text(node.right)})"
        if node.op == "pow":
            base = to_text(node.left)
            if not isinstance(node.left, Var):
                base = f"({base})"
            return f"{base}^{repr(float(node.right.value))}"
        return f"({to_text(node.left)} {_SYMBOL[node.op]} {to_text(node.right)})"
    if isinstance(node, Indicator):
        return f"ind({to_text(node.lo)}, {to_text(node.hi)})"
    if isinstance(node, Piecewise):
        return f"piece({to_text(node.cond)}, {to_text(node.then)}, {to_text(node.other)})"
    raise TypeError(node)


def evaluate(node: Node, x):
    """Evaluate an AST on an array; singular points come back non-finite."""
    x = np.asarray(x, dtype=float)
    if isinstance(node, Const):
        return np.full(x.shape, node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Unary):
        return _apply_unary(node.op, evaluate(node.arg, x))
    if isinstance(node, Binary):
        return _apply_binary(node.op, evaluate(node.left, x), evaluate(node.right, x))
    if isinstance(node, Indicator):
        lo, hi = evaluate(node.lo, x), evaluate(node.hi, x)
        return ((x >= lo) & (x < hi)).astype(float)
    if isinstance(node, Piecewise):
        c = evaluate(node.cond, x)
        out = np.where(c > 0, evaluate(node.then, x), evaluate(node.other, x))
        return np.where(np.isnan(c), np.nan, out)
    raise TypeError(node)


def substitute_x(node: Node, repl: Node) -> Node:
    """Replace every occurrence of ``x`` by ``repl``."""
    if isinstance(node, Var):
        return repl
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return _fold(Unary(node.op, substitute_x(node.arg, repl)))
    if isinstance(node, Binary):
        return _fold(Binary(node.op, substitute_x(node.left, repl),
                            substitute_x(node.right, repl)))
    if isinstance(node, Indicator):
        # ind(lo, hi) is tied to x itself: rewrite as piece((x'-lo)*(hi-x'), ...)
        # is not exact at the endpoints, so keep an explicit composition
        lo, hi = substitute_x(node.lo, repl), substitute_x(node.hi, repl)
        ge = Piecewise(Binary("sub", repl, lo), Const(1.0),
                       Piecewise(Binary("sub", lo, repl), Const(0.0), Const(1.0)))
        return Binary("mul", ge, Piecewise(Binary("sub", hi, repl), Const(1.0), Const(0.0)))
    if isinstance(node, Piecewise):
        return _fold(Piecewise(substitute_x(node.cond, repl), substitute_x(node.then, repl),
                               substitute_x(node.other, repl)))
    raise TypeError(node)


def _level_nodes(node: Node):
    """Yield (subexpression, kind) for every discontinuous node."""
    if isinstance(node, (Const, Var)):
        return
    if isinstance(node, Unary):
        if node.op in ("sign",):
            yield node.arg, "zero"
        elif node.op in ("floor", "phi"):
            yield node.arg, "integer"
        yield from _level_nodes(node.arg)
    elif isinstance(node, Binary):
        yield from _level_nodes(node.left)
        yield from _level_nodes(node.right)
    elif isinstance(node, Indicator):
        yield Binary("sub", Var(), node.lo), "zero"
        yield Binary("sub", Var(), node.hi), "zero"
        yield from _level_nodes(node.lo)
        yield from _level_nodes(node.hi)
    elif isinstance(node, Piecewise):
        yield node.cond, "zero"
        for child in (node.cond, node.then, node.other):
            yield from _level_nodes(child)


def level_crossings(g: Callable, lo: float, hi: float, integer: bool,
                    cap: int, nsample: int = 65) -> Optional[np.ndarray]:
    """Points in (lo, hi) where ``g`` crosses an integer (or zero).

    ``g`` is sampled on ``nsample`` interior points and assumed monotone
    between neighbouring samples; every crossing is then located by
    vectorised bisection.  Returns None when more than ``cap`` crossings
    are found.
    """
    xs = np.linspace(lo, hi, nsample)
    xs[0] = lo + (hi - lo) * 1e-12
    xs[-1] = hi - (hi - lo) * 1e-12
    gv = g(xs)
    ok = np.isfinite(gv)
    a_x, b_x = xs[:-1], xs[1:]
    ga, gb = gv[:-1], gv[1:]
    good = ok[:-1] & ok[1:]
    if integer:
        fa, fb = np.floor(ga), np.floor(gb)
        counts = np.where(good, np.abs(fb - fa), 0.0)
    else:
        counts = np.where(good & (np.sign(ga) != np.sign(gb)), 1.0, 0.0)
    total = counts.sum()
    if total > cap:
        return None
    if total == 0:
        return np.empty(0)
    idx = np.repeat(np.arange(len(counts)), counts.astype(int))
    if integer:
        # targets: integers strictly passed between the two samples
        starts = np.minimum(fa, fb)[idx]
        offs = np.concatenate([np.arange(int(c)) for c in counts if c > 0])
        targets = starts + 1 + offs
    else:
        targets = np.zeros(len(idx))
    left, right = a_x[idx].copy(), b_x[idx].copy()
    gl = g(left) - targets
    for _ in range(60):
        mid = 0.5 * (left + right)
        gm = g(mid) - targets
        same = np.sign(gm) == np.sign(gl)
        left = np.where(same, mid, left)
        gl = np.where(same, gm, gl)
        right = np.where(same, right, mid)
        if np.all(right - left <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(right))):
            break
    return np.unique(0.5 * (left + right))


# ---------------------------------------------------------------------------
# Drift

@dataclass(frozen=True)
class SignClassification:
    left_sign: str
    right_sign: str
    osgood_left: str
    osgood_right: str
    regime: str
    osgood_left_value: float = math.nan
    osgood_right_value: float = math.nan


@dataclass(eq=False)
class Drift:
    """An evaluable drift ``a(x)``.

    ``func`` must accept and return float arrays.  Non-finite values are
    replaced by ``at_singular`` when given, otherwise they raise
    :class:`EvaluationSingularity`.
    """

    func: Callable
    name: str = "drift"
    expr: Optional[Node] = None
    params: dict = field(default_factory=dict)
    window: tuple = (-10.0, 10.0)
    at_singular: Optional[float] = None
    breakpoints_func: Optional[Callable] = None
    _sup: Optional[float] = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.array(self.func(x), dtype=float, copy=True)
        if y.shape != x.shape:
            y = np.broadcast_to(y, x.shape).copy()
        bad = ~np.isfinite(y)
        if bad.any():
            if self.at_singular is None:
                raise EvaluationSingularity(x[bad])
            y[bad] = self.at_singular
        return y

    def value(self, x: float) -> float:
        return float(self(np.array([x]))[0])

    @property
    def sup_bound(self) -> float:
        """max |a| over a dense grid of the window."""
        if self._sup is None:
            lo, hi = self.window
            grid = np.concatenate([np.linspace(lo, hi, 20001),
                                   np.geomspace(1e-12, 1.0, 400) * min(1.0, hi),
                                   -np.geomspace(1e-12, 1.0, 400) * min(1.0, -lo)])
            grid = grid[(grid >= lo) & (grid <= hi)]
            self._sup = float(np.max(np.abs(self(grid))))
        return self._sup

    def breakpoints(self, lo: float, hi: float, cap: int = 20000) -> Optional[np.ndarray]:
        """Discontinuity/kink locations in (lo, hi), or None if more than cap."""
        if self.breakpoints_func is not None:
            return self.breakpoints_func(lo, hi, cap)
        if self.expr is None:
            return np.empty(0)
        pts = []
        for sub, kind in _level_nodes(self.expr):
            g = lambda x, sub=sub: evaluate(sub, x)
            found = level_crossings(g, lo, hi, kind == "integer", cap)
            if found is None:
                return None
            pts.append(found)
            if sum(len(p) for p in pts) > cap:
                return None
        if not pts:
            return np.empty(0)
        return np.unique(np.concatenate(pts))

    def reflected(self) -> "Drift":
        """The drift ``x -> -a(-x)``, used to turn left problems into right ones."""
        f = self.func
        bp = self.breakpoints_func
        lo, hi = self.window
        expr = None
        if self.expr is not None:
            expr = _fold(Unary("neg", substitute_x(self.expr, _fold(Unary("neg", Var())))))
        if bp is not None:
            def rbp(a, b, cap, bp=bp):
                got = bp(-b, -a, cap)
                return None if got is None else np.sort(-got)
        elif self.expr is not None:
            def rbp(a, b, cap, orig=self):
                got = orig.breakpoints(-b, -a, cap)
                return None if got is None else np.sort(-got)
        else:
            rbp = None
        return Drift(lambda x: -f(-x), name=f"reflect({self.name})", expr=expr,
                     params=dict(self.params), window=(-hi, -lo),
                     at_singular=None if self.at_singular is None else -self.at_singular,
                     breakpoints_func=rbp)

    def shifted(self, delta: float) -> "Drift":
        """``a + delta`` (drift perturbation)."""
        f = self.func
        return Drift(lambda x: f(x) + delta, name=f"{self.name}+{delta:g}", window=self.window,
                     at_singular=None if self.at_singular is None else self.at_singular + delta,
                     breakpoints_func=self.breakpoints)

    def describe(self) -> dict:
        out = {"name": self.name, "window": list(self.window)}
        if self.expr is not None:
            out["expr"] = to_text(self.expr)
        if self.params:
            out["params"] = dict(self.params)
        return out


def drift_from_expr(expr: Node, name: str = "expr", window=(-10.0, 10.0),
                    at_singular: Optional[float] = None, params=None) -> Drift:
    return Drift(lambda x: evaluate(expr, x), name=name, expr=expr, params=dict(params or {}),
                 window=tuple(window), at_singular=at_singular)


def drift_from_text(text: str, params: Optional[Mapping[str, float]] = None,
                    window=(-10.0, 10.0), at_singular: Optional[float] = None) -> Drift:
    expr = parse_drift(text, params)
    return drift_from_expr(expr, name=text, window=window, at_singular=at_singular, params=params)


def eval_drift(drift: Drift, x):
    return drift(x)


# ---------------------------------------------------------------------------
# built-in families

EXAMPLE1_TEXT = "sign(x)*abs(x)^r*(1+0.5*phi(1/x))"


def builtin_example1(rho: float = 0.5, window=(-10.0, 10.0)) -> Drift:
    """Oscillating repulsive drift sign(x)|x|^rho (1 + phi(1/x)/2), a(0) = 0."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    d = drift_from_text(EXAMPLE1_TEXT, {"r": rho}, window=window, at_singular=0.0)
    d.name = f"example1(rho={rho:g})"
    return d


def builtin_power(rho: float = 0.5, c: float = 1.0, rho_minus: Optional[float] = None,
                  window=(-10.0, 10.0)) -> Drift:
    """x^rho for x > 0 and -c |x|^rho_minus for x < 0."""
    rm = rho if rho_minus is None else rho_minus
    text = f"piece(x, abs(x)^{rho!r}, -{c!r}*abs(x)^{rm!r})"
    d = drift_from_text(text, window=window, at_singular=0.0)
    d.name = f"power(rho={rho:g}, c={c:g}, rho_minus={rm:g})"
    d.params = {"rho": rho, "c": c, "rho_minus": rm}
    return d


def builtin_constant(c: float = 1.0, window=(-10.0, 10.0)) -> Drift:
    d = drift_from_text(repr(float(c)), window=window)
    d.name = f"constant({c:g})"
    return d


class _Example2Left:
    """Left half of the continuous, non-Osgood extension of x^beta.

    On each I_k = [-2^-k, -2^-k + 4^-k] the modulus |a| ramps linearly from
    the boundary values |x|^beta to a floor m_k over a quarter of the
    interval on either side, and is flat in the middle;  m_k is chosen so
    that the integral of 1/|a| over I_k equals max(1, natural value).
    Outside the union of the I_k, a(x) = -|x|^beta.
    """

    def __init__(self, beta: float, kmax: int = 200):
        self.beta = beta
        self.kmax = kmax
        ks = np.arange(1, kmax + 1)
        self.left = 2.0 ** (-ks.astype(float))       # |x| at the outer end
        self.width = 4.0 ** (-ks.astype(float))
        self.floor = np.array([self._solve_floor(k) for k in ks])

    def tent_integral(self, k: int, m: float) -> float:
        u0, w = 2.0 ** -k, 4.0 ** -k
        bl, br = u0 ** self.beta, (u0 - w) ** self.beta
        r = w / 4

        def ramp(b):
            return r / b if b == m else r * math.log(b / m) / (b - m)

        return ramp(bl) + ramp(br) + (w - 2 * r) / m

    def natural_integral(self, k: int) -> float:
        u0, w = 2.0 ** -k, 4.0 ** -k
        b = 1 - self.beta
        return (u0 ** b - (u0 - w) ** b) / b

    def _solve_floor(self, k: int) -> float:
        u0, w = 2.0 ** -k, 4.0 ** -k
        target = max(1.0, self.natural_integral(k))
        br = (u0 - w) ** self.beta
        if self.tent_integral(k, br) >= target:
            return br
        # the integral is decreasing in m; solve in log m for scale-freedom
        g = lambda t: math.log(self.tent_integral(k, math.exp(t)) / target)
        hi = math.log(br)
        lo = hi - 1.0
        while g(lo) < 0:
            lo -= 2 * (hi - lo)
        return math.exp(brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))

    def modulus(self, u):
        """|a(-u)| for u > 0."""
        u = np.asarray(u, dtype=float)
        out = np.power(u, self.beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.floor(-np.log2(np.where(u > 0, u, 1.0))).astype(np.int64)
        k = np.where(u > 0, k, 0)
        valid = (k >= 1) & (k <= self.kmax)
        kk = np.clip(k, 1, self.kmax) - 1
        u0, w, m = self.left[kk], self.width[kk], self.floor[kk]
        s = u0 - u
        inside = valid & (s >= 0) & (s <= w)
        if not inside.any():
            return out
        r = w / 4
        bl = u0 ** self.beta
        br = (u0 - w) ** self.beta
        tent = np.where(s < r, bl + (m - bl) * s / r,
                        np.where(s > w - r, m + (br - m) * (s - (w - r)) / r, m))
        return np.where(inside, tent, out)

    def breakpoints(self, lo_u: float, hi_u: float, cap: int):
        """Kinks of the modulus, in u = |x| coordinates, inside (lo_u, hi_u)."""
        r = self.width / 4
        pts = np.concatenate([self.left, self.left - r, self.left - self.width + r,
                              self.left - self.width])
        pts = pts[(pts > lo_u) & (pts < hi_u)]
        if len(pts) > cap:
            return None
        return np.sort(pts)


def builtin_example2(beta: float = 0.5, window=(-10.0, 10.0), kmax: int = 200) -> Drift:
    """x^beta for x > 0, extended continuously to x < 0 so that the left
    Osgood integral diverges while -|x|^beta <= a(x) <= (tilde a)(x)."""
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    left = _Example2Left(beta, kmax)

    def func(x):
        x = np.asarray(x, dtype=float)
        pos = np.power(np.maximum(x, 0.0), beta)
        neg = -left.modulus(np.maximum(-x, 0.0))
        return np.where(x > 0, pos, np.where(x < 0, neg, 0.0))

    def bps(lo, hi, cap):
        pts = []
        if lo < 0:
            got = left.breakpoints(max(-hi, 0.0), -lo, cap)
            if got is None:
                return None
            pts.append(-got)
        if lo < 0 < hi:
            pts.append(np.array([0.0]))
        return np.sort(np.concatenate(pts)) if pts else np.empty(0)

    d = Drift(func, name=f"example2(beta={beta:g})", params={"beta": beta},
              window=tuple(window), at_singular=0.0, breakpoints_func=bps)
    d._cache["example2"] = left
    return d


def example2_intervals(k: int):
    """The k-th interval [-2^-k, -2^-k + 4^-k] of the set A."""
    return -(2.0 ** -k), -(2.0 ** -k) + 4.0 ** -k


BUILTINS = {
    "example1": lambda rho=0.5, **kw: builtin_example1(rho, **kw),
    "example2": lambda beta=0.5, **kw: builtin_example2(beta, **kw),
    "power": lambda rho=0.5, c=1.0, rho_minus=None, **kw: builtin_power(rho, c, rho_minus, **kw),
    "constant": lambda c=1.0, **kw: builtin_constant(c, **kw),
}


def builtin_drift(name: str, **params) -> Drift:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# classification near the origin

def _side_sign(values: np.ndarray) -> str:
    if np.all(values == 0):
        return "zero"
    if np.all(values >= 0):
        return "positive"
    if np.all(values <= 0):
        return "negative"
    return "mixed"


def sample_side(drift: Drift, delta0: float, side: str, n_geom: int = 61,
                n_uniform: int = 1000) -> np.ndarray:
    """Drift values on the geometric + uniform classification grid of one side."""
    geom = delta0 * 2.0 ** -np.arange(n_geom)
    unif = np.linspace(0, delta0, n_uniform + 1)[1:]
    pts = np.concatenate([geom, unif])
    if side == "left":
        pts = -pts
    return drift(pts)


def classify_near_zero(drift: Drift, delta0: float = 0.5, R: Optional[float] = None,
                       tol: float = 1e-8) -> SignClassification:
    """Decide which limit theorem applies near the origin.

    Signs are read off sampled values; the one-sided Osgood flags come from
    divergence-detecting quadrature of 1/a towards 0 over (0, R).
    """
    from zeronoise.calculus import osgood_integral

    R = delta0 if R is None else R
    signs = {side: _side_sign(sample_side(drift, delta0, side)) for side in ("left", "right")}
    flags, values = {}, {}
    for side, want in (("left", "negative"), ("right", "positive")):
        if signs[side] != want:
            flags[side], values[side] = "divergent", math.inf
            continue
        res = osgood_integral(drift, side, R, tol)
        flags[side] = "divergent" if res.verdict == "divergent" else "finite"
        values[side] = res.value if flags[side] == "finite" else math.inf
    ls, rs = signs["left"], signs["right"]
    if ls == "negative" and rs == "positive" and flags["left"] == flags["right"] == "finite":
        regime = "repulsive"
    elif rs == "positive" and flags["right"] == "finite" and ls in ("positive", "zero"):
        regime = "positive-drift"
    elif ls == "negative" and flags["left"] == "finite" and rs in ("negative", "zero"):
        regime = "negative-drift"
    else:
        regime = "unsupported"
    return SignClassification(ls, rs, flags["left"], flags["right"], regime,
                              values["left"], values["right"])
