"""A tiny expression language for node dynamics.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' factor)?
    atom   := number | 'x[' int ']' | 'u[' int '][' int ']' | 'p["' name '"]'
            | func '(' expr ')' | '(' expr ')' | '-' atom

``x[i]`` is the node's own coordinate ``i``, ``u[s][i]`` coordinate ``i`` of
input slot ``s``, ``p["k"]`` a named parameter. ``^`` is right-associative.
Unary minus applies to an atom, so ``-x[0]^2`` is ``(-x[0])^2``.

Evaluation follows IEEE double semantics: domain errors give NaN, poles and
overflow give infinities, nothing raises.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

__all__ = [
    "Num", "SelfVar", "InputVar", "Param", "Neg", "BinOp", "Call", "Expr",
    "FUNCTIONS", "DslSyntaxError", "DslShapeError", "SystemSignature",
    "parse", "to_text", "validate", "evaluate", "compile_expr",
    "self_vars", "input_vars", "param_names",
]


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class SelfVar:
    index: int


@dataclass(frozen=True)
class InputVar:
    slot: int
    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, SelfVar, InputVar, Param, Neg, BinOp, Call]


@dataclass(frozen=True)
class SystemSignature:
    self_dim: int
    input_dims: tuple[int, ...] = ()
    params: Mapping[str, float] | None = None

    @property
    def n_slots(self) -> int:
        return len(self.input_dims)


class DslSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: frozenset[str]):
        self.offset = offset
        self.expected = expected
        want = ", ".join(sorted(expected))
        super().__init__(f"{message} at byte {offset}" + (f" (expected one of: {want})" if want else ""))


class DslShapeError(ValueError):
    pass


# -- IEEE-total elementary functions -------------------------------------

def _div(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a != a or a == 0.0:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _is_odd_integer(y: float) -> bool:
    return math.isfinite(y) and y == math.floor(y) and math.fmod(y, 2.0) != 0.0


def _pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except OverflowError:
        return -math.inf if a < 0 and _is_odd_integer(b) else math.inf
    except ValueError:
        if a == 0.0 and b < 0:
            return math.copysign(math.inf, a) if _is_odd_integer(b) else math.inf
        return math.nan


def _guard(f: Callable[[float], float], overflow: float = math.inf) -> Callable[[float], float]:
    def g(v: float) -> float:
        try:
            return f(v)
        except OverflowError:
            return overflow
        except ValueError:
            return math.nan
    g.__name__ = f.__name__
    return g


def _log(v: float) -> float:
    if v == 0.0:
        return -math.inf
    try:
        return math.log(v)
    except ValueError:
        return math.nan


FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": _guard(math.sin),
    "cos": _guard(math.cos),
    "tan": _guard(math.tan),
    "tanh": _guard(math.tanh),
    "exp": _guard(math.exp),
    "log": _log,
    "sqrt": _guard(math.sqrt),
    "abs": abs,
}

_BINARY: dict[str, Callable[[float, float], float]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


# -- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>"[^"\\]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[-+*/^()\[\]])
""", re.VERBOSE)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, str, ident, punct, end
    text: str
    offset: int  # byte offset


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", byte, frozenset())
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), byte))
        byte += len(m.group().encode("utf-8"))
        pos = m.end()
    toks.append(_Tok("end", "", byte))
    return toks


_ATOM_START = frozenset({"number", "x[", "u[", 'p["', "function", "(", "-"})


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected, what=None):
        t = self.tok
        shown = "end of input" if t.kind == "end" else repr(t.text)
        raise DslSyntaxError(what or f"unexpected {shown}", t.offset, frozenset(expected))

    def punct(self, ch: str) -> None:
        if self.tok.kind == "punct" and self.tok.text == ch:
            self.i += 1
        else:
            self.fail({ch})

    def at(self, ch: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == ch

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.fail({"integer"})
        self.i += 1
        return int(t.text)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.i += 1
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "punct":
            if t.text == "-":
                self.i += 1
                return Neg(self.atom())
            if t.text == "(":
                self.i += 1
                e = self.expr()
                self.punct(")")
                return e
            self.fail(_ATOM_START)
        if t.kind == "ident":
            self.i += 1
            if t.text == "x":
                self.punct("[")
                k = self.integer()
                self.punct("]")
                return SelfVar(k)
            if t.text == "u":
                self.punct("[")
                s = self.integer()
                self.punct("]")
                self.punct("[")
                k = self.integer()
                self.punct("]")
                return InputVar(s, k)
            if t.text == "p":
                self.punct("[")
                if self.tok.kind != "str":
                    self.fail({"quoted parameter name"})
                name = self.tok.text[1:-1]
                if not _NAME_RE.fullmatch(name):
                    self.fail({"parameter name"}, f"invalid parameter name {name!r}")
                self.i += 1
                self.punct("]")
                return Param(name)
            if t.text in FUNCTIONS:
                self.punct("(")
                e = self.expr()
                self.punct(")")
                return Call(t.text, e)
            self.i -= 1
            self.fail(_ATOM_START, f"unknown name {t.text!r}")
        self.fail(_ATOM_START)


def parse(text: str) -> Expr:
    """Parse ``text``; raises :class:`DslSyntaxError` with a byte offset."""
    return _Parser(text).parse()


def to_text(e: Expr) -> str:
    """Fully parenthesised canonical form; ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, SelfVar):
        return f"x[{e.index}]"
    if isinstance(e, InputVar):
        return f"u[{e.slot}][{e.index}]"
    if isinstance(e, Param):
        return f'p["{e.name}"]'
    if isinstance(e, Neg):
        return f"-({to_text(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


def _walk(e: Expr):
    yield e
    if isinstance(e, Neg):
        yield from _walk(e.operand)
    elif isinstance(e, BinOp):
        yield from _walk(e.left)
        yield from _walk(e.right)
    elif isinstance(e, Call):
        yield from _walk(e.arg)


def self_vars(e: Expr) -> set[int]:
    return {n.index for n in _walk(e) if isinstance(n, SelfVar)}


def input_vars(e: Expr) -> set[tuple[int, int]]:
    return {(n.slot, n.index) for n in _walk(e) if isinstance(n, InputVar)}


def param_names(e: Expr) -> set[str]:
    return {n.name for n in _walk(e) if isinstance(n, Param)}


def validate(e: Expr, sig: SystemSignature) -> list[str]:
    """Report out-of-range variables and undeclared parameters."""
    out = []
    for i in sorted(self_vars(e)):
        if i >= sig.self_dim:
            out.append(f"x[{i}] out of range for self dimension {sig.self_dim}")
    for s, i in sorted(input_vars(e)):
        if s >= sig.n_slots:
            out.append(f"u[{s}][{i}] refers to slot {s} but only {sig.n_slots} slots are declared")
        elif i >= sig.input_dims[s]:
            out.append(f"u[{s}][{i}] out of range for slot {s} of dimension {sig.input_dims[s]}")
    declared = sig.params or {}
    for name in sorted(param_names(e)):
        if name not in declared:
            out.append(f'undeclared parameter "{name}"')
    for n in _walk(e):
        if isinstance(n, Call) and n.func not in FUNCTIONS:
            out.append(f"unknown function {n.func!r}")
    return out


def _check_shapes(e: Expr, x: Sequence[float], inputs: Sequence[Sequence[float]],
                  params: Mapping[str, float]) -> None:
    for i in self_vars(e):
        if i >= len(x):
            raise DslShapeError(f"x[{i}] but self vector has length {len(x)}")
    for s, i in input_vars(e):
        if s >= len(inputs) or i >= len(inputs[s]):
            raise DslShapeError(f"u[{s}][{i}] not available in the supplied inputs")
    for name in param_names(e):
        if name not in params:
            raise DslShapeError(f'parameter "{name}" not supplied')


def evaluate(e: Expr, x: Sequence[float], inputs: Sequence[Sequence[float]] = (),
             params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` by walking the tree."""
    params = params or {}
    _check_shapes(e, x, inputs, params)
    return _eval(e, x, inputs, params)


def _eval(e, x, inputs, params) -> float:
    if isinstance(e, Num):
        return float(e.value)
    if isinstance(e, SelfVar):
        return float(x[e.index])
    if isinstance(e, InputVar):
        return float(inputs[e.slot][e.index])
    if isinstance(e, Param):
        return float(params[e.name])
    if isinstance(e, Neg):
        return -_eval(e.operand, x, inputs, params)
    if isinstance(e, BinOp):
        return _BINARY[e.op](_eval(e.left, x, inputs, params), _eval(e.right, x, inputs, params))
    if isinstance(e, Call):
        return FUNCTIONS[e.func](_eval(e.arg, x, inputs, params))
    raise TypeError(f"not an expression: {e!r}")


Compiled = Callable[[Sequence[float], Sequence[Sequence[float]], Mapping[str, float]], float]


def compile_expr(e: Expr) -> Compiled:
    """Turn ``e`` into a closure ``f(x, inputs, params)``.

    Performs exactly the same floating point operations as :func:`evaluate`,
    without the per-call shape check. Arguments must hold Python floats.
    """
    if isinstance(e, Num):
        v = float(e.value)
        return lambda x, u, p: v
    if isinstance(e, SelfVar):
        i = e.index
        return lambda x, u, p: x[i]
    if isinstance(e, InputVar):
        s, i = e.slot, e.index
        return lambda x, u, p: u[s][i]
    if isinstance(e, Param):
        name = e.name
        return lambda x, u, p: p[name]
    if isinstance(e, Neg):
        f = compile_expr(e.operand)
        return lambda x, u, p: -f(x, u, p)
    if isinstance(e, BinOp):
        lf, rf = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda x, u, p: lf(x, u, p) + rf(x, u, p)
        if e.op == "-":
            return lambda x, u, p: lf(x, u, p) - rf(x, u, p)
        if e.op == "*":
            return lambda x, u, p: lf(x, u, p) * rf(x, u, p)
        op = _BINARY[e.op]
        return lambda x, u, p: op(lf(x, u, p), rf(x, u, p))
    if isinstance(e, Call):
        fn = FUNCTIONS[e.func]
        af = compile_expr(e.arg)
        return lambda x, u, p: fn(af(x, u, p))
    raise TypeError(f"not an expression: {e!r}")
