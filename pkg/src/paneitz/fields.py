"""Closed-form scalar expressions of chart coordinates.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' uint)? | '-' factor
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp | sqrt | log
    ident  := x0 ... x9 | t | chi | theta | phi     (aliases only in dimension 4)

Expressions are frozen dataclass trees, so structural equality and hashing
come for free.  All differentiation happens on jets, never on the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .jets import EPS_DET, DomainError, Jet

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "log")
ALIASES = {"t": 0, "chi": 1, "theta": 2, "phi": 3}
ALIAS_NAMES = {v: k for k, v in ALIASES.items()}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {text!r}")


class UnknownIdentifier(ExprSyntaxError):
    pass


class VariableOutOfRange(ExprSyntaxError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "FieldExpr"


@dataclass(frozen=True)
class Add:
    left: "FieldExpr"
    right: "FieldExpr"


@dataclass(frozen=True)
class Sub:
    left: "FieldExpr"
    right: "FieldExpr"


@dataclass(frozen=True)
class Mul:
    left: "FieldExpr"
    right: "FieldExpr"


@dataclass(frozen=True)
class Div:
    left: "FieldExpr"
    right: "FieldExpr"


@dataclass(frozen=True)
class Pow:
    base: "FieldExpr"
    exponent: int

    def __post_init__(self):
        if int(self.exponent) != self.exponent or self.exponent < 0:
            raise ValueError(f"exponent must be a nonnegative integer, got {self.exponent}")


@dataclass(frozen=True)
class Call:
    func: str
    arg: "FieldExpr"

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")


FieldExpr = Union[Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call]


# tokenizer / parser ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            skip = len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[pos + skip]!r}", text, pos + skip)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> FieldExpr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", self.text, pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.factor())
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an unsigned integer", self.text, pos)
            node = Pow(node, int(val))
        return node

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            return Var(self._variable(val, pos))
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.text, pos)

    def _variable(self, name: str, pos: int) -> int:
        m = re.fullmatch(r"x(\d)", name)
        if m:
            index = int(m.group(1))
        elif name in ALIASES and self.dim == 4:
            index = ALIASES[name]
        elif name in ALIASES:
            raise UnknownIdentifier(f"alias {name!r} is only valid in dimension 4", self.text, pos)
        else:
            raise UnknownIdentifier(f"unknown identifier {name!r}", self.text, pos)
        if index >= self.dim:
            raise VariableOutOfRange(
                f"variable {name!r} out of range for dimension {self.dim}", self.text, pos
            )
        return index


def parse_expression(text: str, dim: int) -> FieldExpr:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", text, 0)
    return _Parser(text, dim).parse()


# printing ------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e) -> int:
    return _PREC.get(type(e), 5)


def to_text(e: FieldExpr, aliases: bool = False) -> str:
    """Render an expression so that ``parse_expression`` reproduces its values."""

    def wrap(sub, min_prec):
        s = to_text(sub, aliases)
        return f"({s})" if _prec(sub) < min_prec else s

    if isinstance(e, Num):
        s = repr(float(e.value))
        if s in ("inf", "-inf", "nan"):
            raise ValueError(f"cannot print non-finite literal {e.value}")
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return ALIAS_NAMES[e.index] if aliases else f"x{e.index}"
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, 3)
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg, aliases)})"
    if isinstance(e, Pow):
        return f"{wrap(e.base, 5)}^{e.exponent}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    p = _prec(e)
    # left-associative: right operand of equal precedence needs parentheses
    return f"{wrap(e.left, p)} {op} {wrap(e.right, p + 1)}" if p == 1 else f"{wrap(e.left, p)}{op}{wrap(e.right, p + 1)}"


def max_variable(e: FieldExpr) -> int:
    """Largest variable index used, -1 for constants."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Num):
        return -1
    if isinstance(e, (Neg,)):
        return max_variable(e.operand)
    if isinstance(e, Call):
        return max_variable(e.arg)
    if isinstance(e, Pow):
        return max_variable(e.base)
    return max(max_variable(e.left), max_variable(e.right))


def substitute(e: FieldExpr, mapping: dict) -> FieldExpr:
    """Replace ``Var(i)`` by ``mapping[i]`` wherever a replacement is given."""
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, mapping))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


def literals(e: FieldExpr) -> list[float]:
    if isinstance(e, Num):
        return [e.value]
    if isinstance(e, Var):
        return []
    if isinstance(e, Neg):
        return literals(e.operand)
    if isinstance(e, Call):
        return literals(e.arg)
    if isinstance(e, Pow):
        return literals(e.base)
    return literals(e.left) + literals(e.right)


# evaluation ----------------------------------------------------------------

def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1:] != (dim,):
        raise ValueError(f"evaluation point must have {dim} coordinates, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation point has non-finite coordinates")
    return pts


class JetEvaluator:
    """Evaluates many expressions at the same points, sharing common subtrees.

    Memoisation is by node identity, so expressions assembled from shared
    pieces (a conformal factor reused in every metric component) are
    evaluated once.
    """

    def __init__(self, x, dim: int, order: int, eps_det: float = EPS_DET):
        self.points = _as_points(x, dim)
        self.dim = dim
        self.order = order
        self.eps_det = eps_det
        self._memo: dict[int, tuple[FieldExpr, Jet]] = {}
        self._vars = [
            Jet.variable(self.points[..., i], i, dim, order) for i in range(dim)
        ]

    def __call__(self, e: FieldExpr) -> Jet:
        hit = self._memo.get(id(e))
        if hit is not None and hit[0] is e:
            return hit[1]
        out = self._eval(e)
        self._memo[id(e)] = (e, out)
        return out

    def _eval(self, e) -> Jet:
        if isinstance(e, Num):
            return Jet.constant(np.full(self.points.shape[:-1], e.value), self.dim, self.order)
        if isinstance(e, Var):
            if e.index >= self.dim:
                raise ValueError(f"variable x{e.index} out of range for dimension {self.dim}")
            return self._vars[e.index]
        if isinstance(e, Neg):
            return -self(e.operand)
        if isinstance(e, Add):
            return self(e.left) + self(e.right)
        if isinstance(e, Sub):
            return self(e.left) - self(e.right)
        if isinstance(e, Mul):
            return self(e.left) * self(e.right)
        if isinstance(e, Div):
            den = self(e.right)
            if np.any(np.abs(den.value) <= self.eps_det):
                raise DomainError("division by an expression that vanishes at the evaluation point")
            return self(e.left) * jets.recip(den)
        if isinstance(e, Pow):
            return jets.jet_apply_univariate("integer_pow", self(e.base), e.exponent)
        if isinstance(e, Call):
            return jets.jet_apply_univariate(e.func, self(e.arg))
        raise TypeError(f"not an expression node: {e!r}")


def eval_jet(e: FieldExpr, x, order: int, dim: int | None = None) -> Jet:
    """Order-``order`` jet of ``e`` at ``x`` (a point or a batch of points)."""
    pts = np.asarray(x, dtype=float)
    dim = pts.shape[-1] if dim is None else dim
    return JetEvaluator(pts, dim, order)(e)


def evaluate(e: FieldExpr, x) -> np.ndarray:
    """Plain pointwise value, computed directly with numpy (no jets)."""
    pts = np.asarray(x, dtype=float)

    def ev(n):
        if isinstance(n, Num):
            return np.full(pts.shape[:-1], n.value)
        if isinstance(n, Var):
            return pts[..., n.index]
        if isinstance(n, Neg):
            return -ev(n.operand)
        if isinstance(n, Add):
            return ev(n.left) + ev(n.right)
        if isinstance(n, Sub):
            return ev(n.left) - ev(n.right)
        if isinstance(n, Mul):
            return ev(n.left) * ev(n.right)
        if isinstance(n, Div):
            return ev(n.left) / ev(n.right)
        if isinstance(n, Pow):
            return ev(n.base) ** n.exponent
        return getattr(np, n.func)(ev(n.arg))

    return ev(e)


# random fields -------------------------------------------------------------

def _monomial(alpha) -> FieldExpr | None:
    node = None
    for i, a in enumerate(alpha):
        if a == 0:
            continue
        f = Var(i) if a == 1 else Pow(Var(i), a)
        node = f if node is None else Mul(node, f)
    return node


def _sum(terms):
    node = terms[0]
    for t in terms[1:]:
        node = Add(node, t)
    return node


def random_field(seed, dim: int, degree: int = 3, amplitude: float = 1.0) -> FieldExpr:
    """Seeded random polynomial of total degree <= ``degree`` plus a small
    trigonometric term ``c * sin(x_a) * cos(x_b)``.

    Every numeric literal in the tree is drawn from ``[-amplitude, amplitude]``.
    """
    if not 0 <= degree <= 3:
        raise ValueError(f"degree must lie in [0, 3], got {degree}")
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    rng = np.random.default_rng(seed)
    exps = jets.basis(dim, degree).exponents
    coeffs = rng.uniform(-amplitude, amplitude, size=len(exps) + 1)
    a, b = rng.integers(0, dim, size=2)
    terms = []
    for alpha, c in zip(exps, coeffs):
        mono = _monomial(alpha)
        terms.append(Num(float(c)) if mono is None else Mul(Num(float(c)), mono))
    terms.append(Mul(Num(float(coeffs[-1])), Mul(Call("sin", Var(int(a))), Call("cos", Var(int(b))))))
    return _sum(terms)


def random_positive_factor(seed, dim: int, amplitude: float = 0.5) -> FieldExpr:
    """``exp(r)`` with ``r`` a degree-2 random field: positive by construction."""
    if amplitude > 1:
        raise ValueError(f"amplitude must be <= 1, got {amplitude}")
    return Call("exp", random_field(seed, dim, 2, amplitude))


def random_wave_factor(seed, dim: int, amplitude: float = 0.5, frequency: float = 4.0) -> FieldExpr:
    """``exp(a * sin(w . x + c))`` with a random direction ``w`` of norm ``frequency``.

    Bounded between ``exp(-a)`` and ``exp(a)`` yet strongly curved, which
    makes it a good generic factor for sensitivity experiments.
    """
    rng = np.random.default_rng(seed)
    w = rng.normal(size=dim)
    w *= frequency / np.linalg.norm(w)
    arg: FieldExpr = Num(float(rng.uniform(0.0, 2 * np.pi)))
    for i, wi in enumerate(w):
        arg = Add(arg, Mul(Num(float(wi)), Var(i)))
    return Call("exp", Mul(Num(float(amplitude)), Call("sin", arg)))


def power(p: FieldExpr, k) -> FieldExpr:
    """Expression for ``p**k`` with ``k`` rational; non-integer or negative
    powers go through ``exp(k log p)`` and so need ``p > 0``."""
    k = float(k)
    if k == 0:
        return Num(1.0)
    if k.is_integer() and k > 0:
        return p if k == 1 else Pow(p, int(k))
    return Call("exp", Mul(Num(k), Call("log", p)))


def product(*factors: FieldExpr) -> FieldExpr:
    node = factors[0]
    for f in factors[1:]:
        node = Mul(node, f)
    return node
