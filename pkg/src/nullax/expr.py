"""A small language for analytic scalar functions of (x, y, t).

    >>> f = parse("x1 + 2*t3")
    >>> float(f.evaluate({"x1": 1.0, "t3": 5.0}))
    11.0

Precedence from loosest to tightest is ``+ -``, ``* /``, unary ``-``, ``^``.
``^`` is right associative, so ``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is
``2^(3^2)``.  Derivatives come from dual numbers (:func:`eval_jet`) or, when
an explicit derivative expression is wanted, from :meth:`ScalarField.derivative`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import dual
from .dual import Dual

X_VARS = ("x1", "x2", "x3")
Y_VARS = ("y1", "y2", "y3")
T_VARS = ("t1", "t2", "t3")
STATE_VARS = X_VARS + Y_VARS + T_VARS
FUNCTION_NAMES = tuple(dual.FUNCTIONS)


class ExprError(ValueError):
    """Base class for expression errors; carries a source position."""

    def __init__(self, message: str, source: str = "", offset: int = 0):
        self.source = source
        self.offset = offset
        self.line = source.count("\n", 0, offset) + 1
        self.column = offset - (source.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{message} (line {self.line}, column {self.column}, offset {offset})")
        self.message = message


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Neg, Bin, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


# -- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z][A-Za-z0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while True:
        m = _TOKEN.match(src, pos)
        if m is None:
            rest = len(src) - len(src[pos:].lstrip())
            if rest == len(src):
                break
            raise ExprSyntaxError(f"unexpected character {src[rest]!r}", src, rest)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("eof", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, variables: Iterable[str]):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = frozenset(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, self.src, tok[2])

    def expect(self, text: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != text:
            self.fail(f"expected {text!r}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "eof":
            self.fail("unexpected trailing input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return Bin("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self.take()
        kind, text, off = tok
        if kind == "num":
            return Num(float(text))
        if kind == "id":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in dual.FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {text!r}", self.src, off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text not in self.variables:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", self.src, off)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", self.src, off)
        raise ExprSyntaxError(f"unexpected {text!r}", self.src, off)


def parse(src: str, variables: Iterable[str] = STATE_VARS) -> "ScalarField":
    """Parse ``src`` into a :class:`ScalarField` over the given variable names."""
    return ScalarField(_Parser(src, variables).parse())


# -- constructors with light folding ---------------------------------------


def add(a: Node, b: Node) -> Node:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if isinstance(b, Neg):
        return Bin("-", a, b.arg)
    return Bin("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def div(a: Node, b: Node) -> Node:
    if b == ONE:
        return a
    if a == ZERO:
        return ZERO
    return Bin("/", a, b)


def pow_(a: Node, b: Node) -> Node:
    if b == ONE:
        return a
    if b == ZERO:
        return ONE
    return Bin("^", a, b)


def call(fn: str, a: Node) -> Node:
    return Call(fn, a)


# -- symbolic derivative ---------------------------------------------------


def _d(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(_d(node.arg, var))
    if isinstance(node, Call):
        a = node.arg
        da = _d(a, var)
        if da == ZERO:
            return ZERO
        outer = {
            "sin": lambda: call("cos", a),
            "cos": lambda: neg(call("sin", a)),
            "exp": lambda: node,
            "log": lambda: div(ONE, a),
            "sqrt": lambda: div(Num(0.5), node),
            "tanh": lambda: sub(ONE, pow_(node, Num(2.0))),
        }[node.fn]()
        return mul(outer, da)
    op, a, b = node.op, node.left, node.right
    da, db = _d(a, var), _d(b, var)
    if op == "+":
        return add(da, db)
    if op == "-":
        return sub(da, db)
    if op == "*":
        return add(mul(da, b), mul(a, db))
    if op == "/":
        if db == ZERO:
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), pow_(b, Num(2.0)))
    # power
    if isinstance(b, Num):
        if da == ZERO:
            return ZERO
        return mul(mul(b, pow_(a, Num(b.value - 1.0))), da)
    term = mul(db, call("log", a))
    if da != ZERO:
        term = add(term, div(mul(b, da), a))
    return mul(node, term)


def _variables(node: Node, acc: set) -> set:
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, (Neg, Call)):
        _variables(node.arg, acc)
    elif isinstance(node, Bin):
        _variables(node.left, acc)
        _variables(node.right, acc)
    return acc


# -- pretty printing -------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY = 3


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _prec(node: Node) -> int:
    if isinstance(node, Bin):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY
    if isinstance(node, Num) and (node.value < 0 or str(node.value).startswith("-")):
        return _UNARY
    return 5


def _fmt(node: Node, ctx: int) -> str:
    if isinstance(node, Num):
        s = _fmt_num(node.value)
    elif isinstance(node, Var):
        s = node.name
    elif isinstance(node, Call):
        s = f"{node.fn}({_fmt(node.arg, 0)})"
    elif isinstance(node, Neg):
        s = "-" + _fmt(node.arg, _UNARY)
    else:
        p = _PREC[node.op]
        if node.op == "^":
            s = f"{_fmt(node.left, 5)}^{_fmt(node.right, _UNARY)}"
        else:
            sep = f" {node.op} " if p == 1 else node.op
            s = f"{_fmt(node.left, p)}{sep}{_fmt(node.right, p + 1)}"
    return f"({s})" if _prec(node) < ctx else s


# -- numeric evaluation ----------------------------------------------------


def _eval(node: Node, env: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name] if node.name in env else 0.0
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        return dual.FUNCTIONS[node.fn](_eval(node.arg, env))
    a = _eval(node.left, env)
    op = node.op
    if op == "^" and isinstance(node.right, Num):
        return dual.power(a, node.right.value)
    b = _eval(node.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if not isinstance(b, Dual) and np.any(np.asarray(b) == 0.0):
            raise dual.DomainError("division by zero")
        if isinstance(b, Dual) and np.any(b.value == 0.0):
            raise dual.DomainError("division by zero")
        return a / b
    # variable exponent
    if isinstance(a, Dual) or isinstance(b, Dual):
        if not isinstance(a, Dual):
            return b.__rpow__(a)
        return a**b
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise dual.DomainError("negative base with variable exponent")
    return a**b


@dataclass(frozen=True)
class ScalarField:
    """Immutable parsed expression."""

    ast: Node
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        return cls(Num(float(value)))

    @property
    def variables(self) -> frozenset:
        return frozenset(_variables(self.ast, set()))

    @property
    def is_zero(self) -> bool:
        return self.ast == ZERO

    def derivative(self, var: str) -> "ScalarField":
        if var not in self._cache:
            self._cache[var] = ScalarField(_d(self.ast, var))
        return self._cache[var]

    def evaluate(self, env: Mapping[str, object]):
        """Evaluate with variables bound in ``env``; unbound names read as 0."""
        return _eval(self.ast, env)

    def pretty(self) -> str:
        return _fmt(self.ast, 0)

    def __str__(self) -> str:
        return self.pretty()

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(add(self.ast, other.ast))

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(sub(self.ast, other.ast))

    def __mul__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(mul(self.ast, other.ast))

    def __neg__(self) -> "ScalarField":
        return ScalarField(neg(self.ast))


def as_field(f) -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if isinstance(f, str):
        return parse(f)
    return ScalarField.constant(float(f))


def broadcast_result(r, batch: tuple, sizes=None):
    """Coerce an evaluation result to the batch shape (and to a Dual if asked)."""
    if isinstance(r, Dual):
        if r.shape != batch:
            r = r + np.zeros(batch)
        return r
    r = np.broadcast_to(np.asarray(r, dtype=float), batch).copy()
    return Dual.constant(r, sizes) if sizes is not None else r


# -- jets --------------------------------------------------------------------


@dataclass
class Jet:
    value: np.ndarray
    grad: np.ndarray | None = None
    hess: np.ndarray | None = None


def _point(x, y, t):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.concatenate(np.broadcast_arrays(x, y, t), axis=-1)


def eval_jet(f: ScalarField, x, y=(0.0, 0.0, 0.0), t=(0.0, 0.0, 0.0), order: int = 2) -> Jet:
    """Value, gradient and Hessian in the order (x1..x3, y1..y3, t1..t3).

    Points may be batched along leading axes; derivative axes are trailing.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    z = _point(x, y, t)
    batch = z.shape[:-1]
    if order == 0:
        env = {name: z[..., k] for k, name in enumerate(STATE_VARS)}
        return Jet(broadcast_result(f.evaluate(env), batch))
    sizes = (9,) * order
    eye = np.eye(9)
    env = {}
    for k, name in enumerate(STATE_VARS):
        seed = np.broadcast_to(eye[k].reshape((9,) + (1,) * len(batch)), (9,) + batch)
        env[name] = Dual.seeded(z[..., k], sizes, {g: seed for g in range(order)})
    r = broadcast_result(f.evaluate(env), batch, sizes)
    grad = np.moveaxis(r.part(1), 0, -1)
    hess = np.moveaxis(r.part(3), (0, 1), (-2, -1)) if order == 2 else None
    return Jet(r.value, grad, hess)


# -- placement / rotation fields ----------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """Placement chi(x) and Gibbs rotation coordinates theta(x) on a box.

    ``dim`` is 3 for bodies and 2 for shells; fields may only reference the
    first ``dim`` coordinates.
    """

    chi: tuple
    theta: tuple
    dim: int = 3
    name: str = ""

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        chi = tuple(self._coerce(f) for f in self.chi)
        theta = tuple(self._coerce(f) for f in self.theta)
        if len(chi) != 3 or len(theta) != 3:
            raise ValueError("chi and theta need three components each")
        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "theta", theta)

    def _coerce(self, f) -> ScalarField:
        allowed = X_VARS[: self.dim]
        if isinstance(f, str):
            return parse(f, allowed)
        f = as_field(f)
        bad = f.variables - set(allowed)
        if bad:
            raise UnknownIdentifierError(f"field may only depend on {allowed}, got {sorted(bad)}")
        return f

    @classmethod
    def from_strings(cls, chi: Sequence[str], theta: Sequence[str] = ("0", "0", "0"), dim: int = 3, name: str = ""):
        return cls(tuple(chi), tuple(theta), dim, name)

    def pretty(self) -> str:
        return "; ".join(
            [f"chi[{i + 1}] = {f}" for i, f in enumerate(self.chi)]
            + [f"theta[{i + 1}] = {f}" for i, f in enumerate(self.theta)]
        )


@dataclass
class FieldJet:
    chi: np.ndarray
    theta: np.ndarray
    F: np.ndarray
    G: np.ndarray
    d2chi: np.ndarray
    d2theta: np.ndarray


def field_jet(spec: FieldSpec, x) -> FieldJet:
    """Values, gradients and second gradients of chi and theta at ``x``.

    ``F[..., i, A] = d chi_i / d x_A`` and ``d2chi[..., i, A, B]`` is the
    second derivative; ``x`` has ``spec.dim`` trailing components.
    """
    x = np.asarray(x, dtype=float)
    n = spec.dim
    if x.shape[-1] != n:
        raise ValueError(f"expected {n} coordinates")
    batch = x.shape[:-1]
    sizes = (n, n)
    eye = np.eye(n)
    env = {}
    for a in range(n):
        seed = np.broadcast_to(eye[a].reshape((n,) + (1,) * len(batch)), (n,) + batch)
        env[X_VARS[a]] = Dual.seeded(x[..., a], sizes, {0: seed, 1: seed})

    def jets(fields):
        vals, grads, hess = [], [], []
        for f in fields:
            r = broadcast_result(f.evaluate(env), batch, sizes)
            vals.append(r.value)
            grads.append(np.moveaxis(r.part(1), 0, -1))
            hess.append(np.moveaxis(r.part(3), (0, 1), (-2, -1)))
        return np.stack(vals, -1), np.stack(grads, -2), np.stack(hess, -3)

    chi, F, d2chi = jets(spec.chi)
    theta, G, d2theta = jets(spec.theta)
    return FieldJet(chi, theta, F, G, d2chi, d2theta)
