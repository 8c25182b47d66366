"""Coefficient mini-language: parse, print and evaluate p(x), q(x), r(x).

Grammar (precedence from loosest to tightest)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := sin cos tan exp log sqrt sinh cosh abs

Errors carry 0-based byte offsets into the source text.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "abs")


class CoeffError(ValueError):
    """Base class for coefficient-language errors."""


class ParseError(CoeffError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] | None = None):
        self.offset = offset
        self.expected = frozenset(expected or ())
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset,
                         frozenset(("x", "pi") + FUNCTIONS))


class DomainError(CoeffError, ArithmeticError):
    def __init__(self, func: str, arg: float):
        self.func = func
        self.arg = arg
        super().__init__(f"domain error in {func}({arg!r})")


# -- tree ------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Neg | BinOp | Call

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _checked(name: str, raw: Callable[[float], float], ok: Callable[[float], bool]):
    def f(v: float) -> float:
        if not ok(v):
            raise DomainError(name, v)
        try:
            out = raw(v)
        except (ValueError, OverflowError):
            raise DomainError(name, v) from None
        if not math.isfinite(out):
            raise DomainError(name, v)
        return out
    return f


_ALWAYS = lambda v: True  # noqa: E731
_FUNC_IMPL: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": _checked("tan", math.tan, _ALWAYS),
    "exp": _checked("exp", math.exp, _ALWAYS),
    "log": _checked("log", math.log, lambda v: v > 0.0),
    "sqrt": _checked("sqrt", math.sqrt, lambda v: v >= 0.0),
    "sinh": _checked("sinh", math.sinh, _ALWAYS),
    "cosh": _checked("cosh", math.cosh, _ALWAYS),
    "abs": abs,
}


def _div(u: float, v: float) -> float:
    if v == 0.0:
        raise DomainError("/", u)
    return u / v


def _pow(u: float, v: float) -> float:
    if u == 0.0 and v < 0.0:
        raise DomainError("^", u)
    if u < 0.0 and v != math.floor(v):
        raise DomainError("^", u)
    try:
        out = math.pow(u, v)
    except (ValueError, OverflowError):
        raise DomainError("^", u) from None
    if not math.isfinite(out):
        raise DomainError("^", u)
    return out


def _mul(u: float, v: float) -> float:
    out = u * v
    if not math.isfinite(out):
        raise DomainError("*", u)
    return out


def _compile(node: Node) -> Callable[[float], float]:
    if isinstance(node, Num):
        val = node.value
        return lambda x: val
    if isinstance(node, Var):
        return lambda x: x
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda x: -f(x)
    if isinstance(node, Call):
        g = _FUNC_IMPL[node.func]
        f = _compile(node.arg)
        return lambda x: g(f(x))
    lf, rf = _compile(node.left), _compile(node.right)
    if node.op == "+":
        return lambda x: lf(x) + rf(x)
    if node.op == "-":
        return lambda x: lf(x) - rf(x)
    if node.op == "*":
        return lambda x: _mul(lf(x), rf(x))
    if node.op == "/":
        return lambda x: _div(lf(x), rf(x))
    return lambda x: _pow(lf(x), rf(x))


def _fold(node: Node) -> float | None:
    """Value of a subtree that does not depend on x, else None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return None
    kids = [node.arg] if isinstance(node, (Neg, Call)) else [node.left, node.right]
    if any(_fold(k) is None for k in kids):
        return None
    return _compile(node)(0.0)


@dataclass(frozen=True)
class CoeffExpr:
    """Immutable parsed coefficient expression."""

    ast: Node
    source: str = ""
    _fn: Callable[[float], float] = field(init=False, repr=False, compare=False)
    _const: float | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.ast))
        try:
            const = _fold(self.ast)
        except DomainError:
            const = None
        object.__setattr__(self, "_const", const)

    def __call__(self, x: float) -> float:
        return self._fn(float(x))

    @property
    def is_constant(self) -> bool:
        return self._const is not None

    @property
    def constant_value(self) -> float | None:
        return self._const

    def is_zero(self) -> bool:
        return self._const == 0.0

    def vectorized(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if self._const is not None:
            return np.full(xs.shape, self._const)
        return np.array([self._fn(float(v)) for v in xs.ravel()]).reshape(xs.shape)

    def __str__(self) -> str:
        return to_text(self)


# -- lexer / parser ----------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    text = src
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", _byte_offset(src, start),
                             frozenset({"number", "x", "pi", "function", "(", "-"}))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), _byte_offset(src, m.start(kind))))
        pos = m.end()
    toks.append(_Tok("end", "", len(src.encode("utf-8"))))
    return toks


def _byte_offset(src: str, char_index: int) -> int:
    return len(src[:char_index].encode("utf-8"))


_ATOM_START = frozenset({"number", "x", "pi", "function", "("})


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        t = self.peek()
        if t.kind != "op" or t.text != op:
            raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.offset, frozenset({op}))
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.offset,
                             frozenset({"+", "-", "*", "/", "^", "end of input"}))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        t = self.peek()
        if t.kind == "op" and t.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.take()
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "name":
            if t.text == "x":
                return Var()
            if t.text == "pi":
                return Num(math.pi)
            if t.text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(t.text, arg)
            raise UnknownIdentifierError(t.text, t.offset)
        if t.kind == "op" and t.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        expected = _ATOM_START | {"-"}
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.offset, expected)


def parse_expr(text: str) -> CoeffExpr:
    """Parse ``text`` into an immutable :class:`CoeffExpr`."""
    return CoeffExpr(_Parser(text).parse(), text)


def eval_expr(e: CoeffExpr, x: float) -> float:
    """Evaluate ``e`` at ``x``; domain violations raise :class:`DomainError`."""
    if not math.isfinite(x):
        raise DomainError("eval", x)
    return e(x)


def shift_argument(e: CoeffExpr, s: float) -> CoeffExpr:
    """Expression for x -> e(x - s)."""
    def sub(node: Node) -> Node:
        if isinstance(node, Var):
            return BinOp("-", Var(), Num(float(s)))
        if isinstance(node, Num):
            return node
        if isinstance(node, Neg):
            return Neg(sub(node.arg))
        if isinstance(node, Call):
            return Call(node.func, sub(node.arg))
        return BinOp(node.op, sub(node.left), sub(node.right))
    out = CoeffExpr(sub(e.ast))
    return CoeffExpr(out.ast, to_text(out))


def combine(op: str, left: CoeffExpr, right: CoeffExpr) -> CoeffExpr:
    out = CoeffExpr(BinOp(op, left.ast, right.ast))
    return CoeffExpr(out.ast, to_text(out))


def constant(value: float) -> CoeffExpr:
    return CoeffExpr(Num(float(value)), repr(float(value)))


def as_expr(value) -> CoeffExpr:
    """Accept a CoeffExpr, a number or an expression string."""
    if isinstance(value, CoeffExpr):
        return value
    if isinstance(value, (int, float)):
        return constant(value)
    return parse_expr(str(value))


# -- printing --------------------------------------------------------------

def _fmt_num(v: float) -> str:
    if v == math.pi:
        return "pi"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    s = repr(float(v))
    if s in ("inf", "nan"):
        raise CoeffError(f"cannot print non-finite literal {s}")
    return s


def _show(node: Node) -> tuple[str, int]:
    """Text of node and its binding strength."""
    if isinstance(node, Num):
        if node.value < 0:
            return "-" + _fmt_num(-node.value), _PREC["neg"]
        return _fmt_num(node.value), 9
    if isinstance(node, Var):
        return "x", 9
    if isinstance(node, Call):
        return f"{node.func}({_show(node.arg)[0]})", 9
    if isinstance(node, Neg):
        s, p = _show(node.arg)
        if p < _PREC["neg"]:
            s = f"({s})"
        return "-" + s, _PREC["neg"]
    prec = _PREC[node.op]
    ls, lp = _show(node.left)
    rs, rp = _show(node.right)
    if node.op == "^":
        # left operand must bind tighter than ^, right may be any unary
        if lp <= prec:
            ls = f"({ls})"
        if rp < _PREC["neg"]:
            rs = f"({rs})"
    else:
        if lp < prec:
            ls = f"({ls})"
        if rp <= prec:
            rs = f"({rs})"
    return f"{ls} {node.op} {rs}", prec


def to_text(e: CoeffExpr | Node) -> str:
    node = e.ast if isinstance(e, CoeffExpr) else e
    return _show(node)[0]


# -- hypothesis check --------------------------------------------------------

@dataclass
class HypothesisReport:
    p_positive: bool
    r_positive: bool
    inv_p_finite: bool
    r_finite: bool
    q_finite: bool
    pr_smooth: bool
    dpr_over_r_smooth: bool
    integrals: dict[str, float]
    messages: list[str]

    @property
    def ok(self) -> bool:
        return all((self.p_positive, self.r_positive, self.inv_p_finite, self.r_finite,
                    self.q_finite, self.pr_smooth, self.dpr_over_r_smooth))


def _sample(e: CoeffExpr, xs: np.ndarray) -> np.ndarray:
    out = np.empty_like(xs)
    for i, v in enumerate(xs):
        try:
            out[i] = e(v)
        except DomainError:
            out[i] = np.nan
    return out


def _jumpy(vals: np.ndarray) -> bool:
    """Heuristic: a first difference far larger than its neighbours suggests a jump."""
    d = np.abs(np.diff(vals))
    if not np.all(np.isfinite(d)):
        return True
    scale = np.median(d) + 1e-12 * (1.0 + np.max(np.abs(vals)))
    return bool(np.max(d) > 1e3 * scale and np.max(d) > 1e-6 * (1.0 + np.max(np.abs(vals))))


def check_hypothesis(p: CoeffExpr, q: CoeffExpr, r: CoeffExpr, a: float, b: float,
                     n: int = 10_000, threshold: float = 1e8) -> HypothesisReport:
    """Advisory sampling check of the regularity assumptions on [a, b]."""
    xs = np.linspace(a, b, n)
    pv, qv, rv = _sample(p, xs), _sample(q, xs), _sample(r, xs)
    msgs: list[str] = []

    p_pos = bool(np.all(pv > 0))
    r_pos = bool(np.all(rv > 0))
    if not p_pos:
        msgs.append("p is not positive on the sample grid")
    if not r_pos:
        msgs.append("r is not positive on the sample grid")

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_p = np.where(pv != 0, 1.0 / pv, np.inf)
    integrals = {}
    finite = {}
    for name, vals in (("1/p", np.abs(inv_p)), ("r", np.abs(rv)), ("|q|", np.abs(qv))):
        val = float(trapezoid(vals, xs)) if np.all(np.isfinite(vals)) else math.inf
        integrals[name] = val
        finite[name] = math.isfinite(val) and val < threshold
        if not finite[name]:
            msgs.append(f"integral of {name} appears divergent (> {threshold:g})")

    pr = pv * rv
    pr_ok = not _jumpy(pr)
    h = xs[1] - xs[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        dpr = np.gradient(pr, h) / rv
    dpr_ok = not _jumpy(dpr)
    if not pr_ok:
        msgs.append("p*r looks discontinuous")
    if not dpr_ok:
        msgs.append("(p*r)'/r looks discontinuous")
    return HypothesisReport(p_pos, r_pos, finite["1/p"], finite["r"], finite["|q|"],
                            pr_ok, dpr_ok, integrals, msgs)
