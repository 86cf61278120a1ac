"""Small arithmetic expression language for user-specified scalar functions.

Grammar (see docs/expr-grammar.md): infix + - * / ^ with ^ binding tightest
and right-associative, unary minus, parentheses, the free variable ``x``,
late-bound named parameters, and the builtin calls exp, log, sqrt, abs,
min, max, pow.  Expressions are immutable after parsing and evaluation is
pure, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

__all__ = [
    "Expression",
    "Lit",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ParseError",
    "EvalError",
    "parse",
    "evaluate",
    "pretty",
    "check_nonneg_sampled",
    "chebyshev_points",
    "SampleCheck",
    "FUNCTIONS",
]

# builtin name -> (min arity, max arity)
FUNCTIONS = {
    "exp": (1, 1),
    "log": (1, 1),
    "sqrt": (1, 1),
    "abs": (1, 1),
    "min": (2, 8),
    "max": (2, 8),
    "pow": (2, 2),
}


class ParseError(ValueError):
    """Syntax error with a 0-based byte offset and the expected-token set."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvalError(ValueError):
    """Domain or binding error, reporting the offending subexpression."""

    def __init__(self, message: str, subexpr: str):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{subexpr}'")


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    lhs: "Expression"
    rhs: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expression", ...]


Expression = Lit | Var | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# tokenizer

_OPS = "+-*/^"


@dataclass(frozen=True)
class _Token:
    kind: str  # num ident op lparen rparen comma eof
    text: str
    offset: int  # byte offset into the utf-8 source


def _tokenize(source: str) -> list[_Token]:
    toks: list[_Token] = []
    data = source
    i = 0
    byte_of = [len(data[:k].encode("utf-8")) for k in range(len(data) + 1)]
    n = len(data)
    while i < n:
        c = data[i]
        if c.isspace():
            i += 1
            continue
        off = byte_of[i]
        if c in _OPS:
            toks.append(_Token("op", c, off))
            i += 1
        elif c == "(":
            toks.append(_Token("lparen", c, off))
            i += 1
        elif c == ")":
            toks.append(_Token("rparen", c, off))
            i += 1
        elif c == ",":
            toks.append(_Token("comma", c, off))
            i += 1
        elif c.isdigit():
            j = i
            while j < n and data[j].isdigit():
                j += 1
            if j < n and data[j] == ".":
                j += 1
                while j < n and data[j].isdigit():
                    j += 1
            if j < n and data[j] in "eE":
                k = j + 1
                if k < n and data[k] in "+-":
                    k += 1
                if k < n and data[k].isdigit():
                    j = k
                    while j < n and data[j].isdigit():
                        j += 1
            text = data[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number '{text}'", off) from None
            toks.append(_Token("num", text, off))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (data[j].isalnum() or data[j] == "_"):
                j += 1
            toks.append(_Token("ident", data[i:j], off))
            i = j
        else:
            raise ParseError(f"unexpected character '{c}'", off)
    toks.append(_Token("eof", "", byte_of[n]))
    return toks


# ---------------------------------------------------------------------------
# parser (recursive descent, precedence: ^ > unary - > * / > + -)


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.toks = tokens
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.toks[self.pos]

    def advance(self) -> _Token:
        t = self.cur
        self.pos += 1
        return t

    def fail(self, expected: tuple[str, ...]):
        t = self.cur
        what = "end of input" if t.kind == "eof" else f"'{t.text}'"
        raise ParseError(f"unexpected {what}", t.offset, expected)

    def parse(self) -> Expression:
        e = self.expr()
        if self.cur.kind != "eof":
            if self.cur.kind == "rparen":
                raise ParseError("unbalanced ')'", self.cur.offset)
            self.fail(("operator", "end of input"))
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.advance().text
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.advance().text
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expression:
        if self.cur.kind == "op" and self.cur.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self.advance()
            return BinOp("^", base, self.exponent())
        return base

    def exponent(self) -> Expression:
        # exponents admit a leading sign and chain right-associatively
        if self.cur.kind == "op" and self.cur.text == "-":
            self.advance()
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Expression:
        t = self.cur
        if t.kind == "num":
            self.advance()
            return Lit(float(t.text))
        if t.kind == "ident":
            self.advance()
            if self.cur.kind == "lparen":
                if t.text not in FUNCTIONS:
                    raise ParseError(f"unknown function '{t.text}'", t.offset)
                self.advance()
                args = [self.expr()]
                while self.cur.kind == "comma":
                    self.advance()
                    args.append(self.expr())
                if self.cur.kind != "rparen":
                    raise ParseError("unbalanced '('", self.cur.offset, (")", ","))
                self.advance()
                lo, hi = FUNCTIONS[t.text]
                if not (lo <= len(args) <= hi):
                    raise ParseError(
                        f"{t.text} takes {lo}" + (f"..{hi}" if hi != lo else "") + " arguments",
                        t.offset,
                    )
                return Call(t.text, tuple(args))
            return Var(t.text)
        if t.kind == "lparen":
            self.advance()
            e = self.expr()
            if self.cur.kind != "rparen":
                raise ParseError("unbalanced '('", self.cur.offset, (")",))
            self.advance()
            return e
        self.fail(("number", "identifier", "'('", "'-'"))


def parse(source: str) -> Expression:
    """Parse source text into an immutable expression tree."""
    if not source or not source.strip():
        raise ParseError("empty expression", 0, ("number", "identifier", "'('", "'-'"))
    return _Parser(_tokenize(source)).parse()


# ---------------------------------------------------------------------------
# evaluation


def _power(base: float, exp: float, node: Expression) -> float:
    if base == 0.0:
        if exp > 0.0:
            return 0.0
        if exp == 0.0:
            return 1.0
        raise EvalError("zero raised to a negative power", pretty(node))
    if base < 0.0:
        if not (math.isfinite(exp) and exp == math.floor(exp) and abs(exp) < 2**53):
            raise EvalError("negative base with non-integer exponent", pretty(node))
    try:
        return math.pow(base, exp)
    except OverflowError:
        return math.inf


def _eval(node: Expression, env: Mapping[str, float]) -> float:
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise EvalError(f"unbound identifier '{node.name}'", node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.lhs, env)
        b = _eval(node.rhs, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvalError("division by zero", pretty(node))
            return a / b
        if op == "^":
            return _power(a, b, node)
        raise AssertionError(op)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        fn = node.fn
        if fn == "exp":
            try:
                return math.exp(args[0])
            except OverflowError:
                return math.inf
        if fn == "log":
            if args[0] <= 0.0:
                raise EvalError(f"log of non-positive value {args[0]:g}", pretty(node))
            return math.log(args[0])
        if fn == "sqrt":
            if args[0] < 0.0:
                raise EvalError(f"sqrt of negative value {args[0]:g}", pretty(node))
            return math.sqrt(args[0])
        if fn == "abs":
            return abs(args[0])
        if fn == "min":
            return min(args)
        if fn == "max":
            return max(args)
        if fn == "pow":
            return _power(args[0], args[1], node)
        raise AssertionError(fn)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: Expression, x: float, bindings: Mapping[str, float] | None = None) -> float:
    """Evaluate at the point x with the given parameter bindings.

    Raises EvalError on domain violations (log of non-positive, sqrt of
    negative, division by zero, 0^negative, negative base with fractional
    exponent) and on unbound identifiers.
    """
    env = dict(bindings) if bindings else {}
    env["x"] = float(x)
    return float(_eval(expr, env))


# ---------------------------------------------------------------------------
# pretty printing (minimal parentheses; round-trips through parse)

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(node: Expression) -> int:
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _LEVEL_ADD
        if node.op in "*/":
            return _LEVEL_MUL
        return _LEVEL_POW
    if isinstance(node, Neg):
        return _LEVEL_NEG
    return _LEVEL_ATOM


def _wrap(text: str, need: bool) -> str:
    return f"({text})" if need else text


def pretty(node: Expression) -> str:
    """Render to source text that reparses to a structurally identical tree."""
    if isinstance(node, Lit):
        v = node.value
        if v == math.floor(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        return "-" + _wrap(inner, _level(node.operand) < _LEVEL_NEG)
    if isinstance(node, BinOp):
        lhs, rhs = pretty(node.lhs), pretty(node.rhs)
        # these operators parse left-associatively, so a same-level right
        # operand needs parentheses to reproduce the tree shape exactly
        if node.op in "+-":
            rhs = _wrap(rhs, _level(node.rhs) <= _LEVEL_ADD)
            return f"{lhs} {node.op} {rhs}"
        if node.op in "*/":
            lhs = _wrap(lhs, _level(node.lhs) < _LEVEL_MUL)
            return f"{lhs}{node.op}{_wrap(rhs, _level(node.rhs) <= _LEVEL_MUL)}"
        # ^ binds tightest: parenthesize any non-atom base; exponents may
        # carry a sign or another power without parens
        lhs = _wrap(lhs, _level(node.lhs) < _LEVEL_ATOM)
        rhs = _wrap(rhs, _level(node.rhs) < _LEVEL_NEG)
        return f"{lhs}^{rhs}"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(pretty(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# sampled nonnegativity check


def chebyshev_points(lo: float, hi: float, n: int) -> list[float]:
    """n Chebyshev-spaced interior points plus the two endpoints, ascending."""
    if n < 2:
        raise ValueError("need at least 2 sample points")
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = [mid + half * math.cos(math.pi * (2 * k - 1) / (2 * n)) for k in range(1, n + 1)]
    return [lo] + sorted(pts) + [hi]


@dataclass(frozen=True)
class SampleCheck:
    passed: bool
    witness_x: float | None = None
    witness_value: float | None = None
    reason: str = ""


def check_nonneg_sampled(
    expr: Expression,
    lo: float,
    hi: float,
    n: int,
    bindings: Mapping[str, float] | None = None,
) -> SampleCheck:
    """Sampled nonnegativity of expr on [lo, hi]; fails at the first point
    (ascending) with a negative value, or on an evaluation domain error."""
    for x in chebyshev_points(lo, hi, n):
        try:
            y = evaluate(expr, x, bindings)
        except EvalError as e:
            return SampleCheck(passed=False, witness_x=x, reason=str(e))
        if y < 0.0:
            return SampleCheck(passed=False, witness_x=x, witness_value=y)
    return SampleCheck(passed=True)
