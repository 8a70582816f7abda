"""A small expression language for smooth functions of (x, y).

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the declared variables (x1..xm, y1..yr by default) and the
constants ``pi`` and ``e``.  Functions are sin, cos, exp, log, sqrt and the
two-argument pow, each with a closed-form jet rule.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from . import jet as _jet
from .errors import ArityError, DomainError, ExprSyntaxError, UnknownIdentifier


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a function name
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: object
    right: object


Node = Num | Var | Const | Unary | Binary

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "pow": 2}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def default_variables(m: int, r: int) -> list[str]:
    return [f"x{i + 1}" for i in range(m)] + [f"y{a + 1}" for a in range(r)]


def _tokenize(src: str):
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        mt = _TOKEN.match(src, pos)
        if mt is None or mt.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte(src, pos))
        kind = mt.lastgroup
        start = mt.start(kind)
        toks.append((kind, mt.group(kind), start))
        pos = mt.end()
    toks.append(("end", "", len(src)))
    return toks


def _byte(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, variables):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.vars = {name: k for k, name in enumerate(variables)}

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok):
        raise ExprSyntaxError(msg, _byte(self.src, tok[2]))

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] != "op":
            self.fail(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(f"unexpected {tok[1]!r}", tok)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def primary(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                return self.call(tok)
            if text in self.vars:
                return Var(text, self.vars[text])
            if text in CONSTANTS:
                return Const(text)
            raise UnknownIdentifier(f"unknown identifier {text!r}", _byte(self.src, tok[2]))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {text or 'end of input'!r}", tok)

    def call(self, name_tok):
        name = name_tok[1]
        if name not in FUNCTIONS:
            raise UnknownIdentifier(f"unknown function {name!r}", _byte(self.src, name_tok[2]))
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                _byte(self.src, name_tok[2]),
            )
        if name == "pow":
            return Binary("^", args[0], args[1])
        return Unary(name, args[0])


def parse_expression(src: str, m: int = 0, r: int = 0, variables=None) -> Node:
    """Parse ``src`` over variables x1..xm, y1..yr (or an explicit name list)."""
    if variables is None:
        variables = default_variables(m, r)
    return _Parser(src, list(variables)).parse()


# printing ---------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return 3
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 0
    return 5


def _wrap(node, need: int) -> str:
    s = to_source(node)
    return s if _prec(node) >= need else f"({s})"


def to_source(node) -> str:
    """Print an AST so that parsing the text gives the same AST back."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + _wrap(node.arg, 3)
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Binary):
        p = _PREC[node.op]
        if node.op == "^":
            return f"{_wrap(node.left, 5)}^{_wrap(node.right, 3)}"
        return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Unary):
        return free_variables(node.arg)
    if isinstance(node, Binary):
        return free_variables(node.left) | free_variables(node.right)
    return set()


# evaluation ---------------------------------------------------------------------


def _exp_float(v):
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _apply_unary(op, v):
    if op == "neg":
        return -v
    if op == "exp" and not isinstance(v, _jet.Jet):
        return _exp_float(v)
    return getattr(_jet, op)(v)


def _apply_binary(op, a, b, right_node):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if not isinstance(b, _jet.Jet) and b == 0.0:
            raise DomainError("division by zero")
        return a / b
    # '^'
    if isinstance(right_node, Num) or not isinstance(b, _jet.Jet):
        p = right_node.value if isinstance(right_node, Num) else b
        if isinstance(a, _jet.Jet):
            return _jet.power(a, float(p))
        return _jet.float_power(a, p)
    if not isinstance(a, _jet.Jet):
        if a <= 0.0:
            raise DomainError("non-positive base raised to a varying power")
        return _jet.exp(b * math.log(a))
    return a**b


def compile_node(node):
    """Turn an AST into a closure ``env -> value`` (floats or jets)."""
    if isinstance(node, Num):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, Const):
        v = CONSTANTS[node.name]
        return lambda env: v
    if isinstance(node, Var):
        k = node.index
        return lambda env: env[k]
    if isinstance(node, Unary):
        f = compile_node(node.arg)
        op = node.op

        def unary(env):
            try:
                return _apply_unary(op, f(env))
            except DomainError as exc:
                if exc.node is None:
                    raise DomainError(str(exc), node) from None
                raise

        return unary
    if isinstance(node, Binary):
        fl = compile_node(node.left)
        fr = compile_node(node.right)
        op = node.op
        rnode = node.right

        def binary(env):
            try:
                return _apply_binary(op, fl(env), fr(env), rnode)
            except DomainError as exc:
                if exc.node is None:
                    raise DomainError(str(exc), node) from None
                raise

        return binary
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node, env):
    return compile_node(node)(env)
