"""Expression language used inside map specs.

Grammar (precedence low to high)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | IDENT | IDENT '(' args ')' | '(' expr (',' expr)* ')'

``(a, b)`` with two or more entries is a tuple literal; it is only legal
where a leaf expects a point.  The tree is built from frozen dataclasses so
that parse -> serialize -> parse yields an equal tree; source positions are
carried along but excluded from equality.
"""
from dataclasses import dataclass, field
import re

import numpy as np
import sympy

from .errors import ParseError, ValidationError

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "bump": 1}
CONSTANTS = {"pi"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),\[\]])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text, line=1, col=1):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind != "ws":
                tokens.append(Token(kind, m.group(), line, col))
            col += m.end() - m.start()
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class Node:
    pos: tuple = field(default=(0, 0), compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Unary(Node):
    op: str
    arg: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple


@dataclass(frozen=True)
class Tuple(Node):
    items: tuple


class Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def accept(self, text):
        if self.tok.kind in ("op", "id") and self.tok.text == text:
            return self.advance()
        return None

    def expect(self, text):
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return t

    def expression(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            t = self.advance()
            node = Binary(t.text, node, self.term(), pos=(t.line, t.col))
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            t = self.advance()
            node = Binary(t.text, node, self.unary(), pos=(t.line, t.col))
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in "-+":
            t = self.advance()
            arg = self.unary()
            return arg if t.text == "+" else Unary("-", arg, pos=(t.line, t.col))
        return self.power()

    def power(self):
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            t = self.advance()
            return Binary("^", base, self.unary(), pos=(t.line, t.col))
        return base

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), pos=(t.line, t.col))
        if t.kind == "id":
            self.advance()
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    args.append(self.expression())
                    while self.accept(","):
                        args.append(self.expression())
                    self.expect(")")
                return Call(t.text, tuple(args), pos=(t.line, t.col))
            return Var(t.text, pos=(t.line, t.col))
        if self.accept("("):
            items = [self.expression()]
            while self.accept(","):
                items.append(self.expression())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return Tuple(tuple(items), pos=(t.line, t.col))
        found = t.text or "end of input"
        raise self.error(f"unexpected {found!r}")


def parse_expression(text, line=1, col=1):
    p = Parser(tokenize(text, line, col))
    node = p.expression()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after expression")
    return node


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_text(node):
    """Serialize a tree; the output parses back to an equal tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Tuple):
        return f"({', '.join(to_text(a) for a in node.items)})"
    raise TypeError(node)


def free_names(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Unary):
        return free_names(node.arg)
    if isinstance(node, Binary):
        return free_names(node.left) | free_names(node.right)
    if isinstance(node, (Call, Tuple)):
        items = node.args if isinstance(node, Call) else node.items
        return set().union(*[free_names(a) for a in items])
    raise TypeError(node)


def validate(node, variables):
    """Reject unknown identifiers, functions and arities, with positions."""
    if isinstance(node, Var):
        if node.name not in variables and node.name not in CONSTANTS:
            allowed = ", ".join(sorted(set(variables) | CONSTANTS))
            raise ValidationError(f"unknown identifier {node.name!r} (allowed: {allowed})",
                                  *node.pos)
    elif isinstance(node, Unary):
        validate(node.arg, variables)
    elif isinstance(node, Binary):
        validate(node.left, variables)
        validate(node.right, variables)
    elif isinstance(node, Call):
        if node.name not in FUNCTIONS:
            raise ValidationError(f"unknown function {node.name!r}", *node.pos)
        if len(node.args) != FUNCTIONS[node.name]:
            raise ParseError(f"arity: {node.name} takes {FUNCTIONS[node.name]} argument(s), "
                             f"got {len(node.args)}", *node.pos)
        for a in node.args:
            validate(a, variables)
    elif isinstance(node, Tuple):
        raise ValidationError("tuple not allowed inside an expression", *node.pos)


def _quintic(u):
    return u**3 * (10 - 15 * u + 6 * u**2)


def bump_profile(u):
    """The canonical C^2 cutoff: 1 for u <= 0, 0 for u >= 1, quintic between."""
    return sympy.Piecewise((1, u <= 0), (1 - _quintic(u), u < 1), (0, True))


class Bump(sympy.Function):
    """``bump`` as a sympy function with branch-free derivatives.

    The quintic has vanishing first and second derivatives at 0 and 1, so
    bump' and bump'' are the quintic's derivatives at the clipped argument.
    """

    @classmethod
    def eval(cls, u):
        if u.is_Number:
            return bump_profile(u)

    def fdiff(self, argindex=1):
        return BumpD1(self.args[0])


class BumpD1(sympy.Function):
    @classmethod
    def eval(cls, u):
        if u.is_Number:
            return sympy.diff(bump_profile(sympy.Symbol("t")), "t").subs("t", u)

    def fdiff(self, argindex=1):
        return BumpD2(self.args[0])


class BumpD2(sympy.Function):
    @classmethod
    def eval(cls, u):
        if u.is_Number:
            return sympy.diff(bump_profile(sympy.Symbol("t")), "t", 2).subs("t", u)

    def fdiff(self, argindex=1):
        # the third derivative jumps at 0 and 1
        t = sympy.Symbol("t")
        return sympy.diff(bump_profile(t), t, 3).subs(t, self.args[0])


def _np_bump(u):
    c = np.clip(u, 0.0, 1.0)
    return 1.0 - c**3 * (10.0 - 15.0 * c + 6.0 * c**2)


def _np_bump_d1(u):
    c = np.clip(u, 0.0, 1.0)
    return -30.0 * c**2 * (1.0 - c) ** 2


def _np_bump_d2(u):
    c = np.clip(u, 0.0, 1.0)
    return -60.0 * c * (1.0 - c) * (1.0 - 2.0 * c)


_NUMPY_BUMP = {"Bump": _np_bump, "BumpD1": _np_bump_d1, "BumpD2": _np_bump_d2}

BUMP_DESCRIPTION = "bump(u) = 1 (u<=0); 1 - (10u^3 - 15u^4 + 6u^5) (0<u<1); 0 (u>=1)"

_SYMPY_FUNCS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp,
                "sqrt": sympy.sqrt, "bump": Bump}


def to_sympy(node, symbols):
    if isinstance(node, Num):
        return sympy.Rational(node.value)
    if isinstance(node, Var):
        if node.name == "pi":
            return sympy.pi
        return symbols[node.name]
    if isinstance(node, Unary):
        return -to_sympy(node.arg, symbols)
    if isinstance(node, Binary):
        a, b = to_sympy(node.left, symbols), to_sympy(node.right, symbols)
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "/": lambda: a / b, "^": lambda: a**b}[node.op]()
    if isinstance(node, Call):
        return _SYMPY_FUNCS[node.name](*[to_sympy(a, symbols) for a in node.args])
    raise TypeError(node)


def constant_value(node):
    """Evaluate a variable-free expression to a float."""
    validate(node, ())
    return float(to_sympy(node, {}))


def _lambdify(args, exprs):
    f = sympy.lambdify(args, exprs, modules=[_NUMPY_BUMP, "numpy"], cse=True)

    def call(*vals):
        shape = np.broadcast(*vals).shape
        with np.errstate(all="ignore"):
            out = f(*vals)
        return [np.broadcast_to(np.asarray(o, dtype=float), shape) for o in out]
    return call


class Function2D:
    """A compiled scalar field of two variables with derivatives up to order 2."""

    def __init__(self, node, names):
        validate(node, names)
        self.node = node
        self.names = tuple(names)
        syms = sympy.symbols(self.names, real=True)
        u, v = syms
        self.sym = to_sympy(node, dict(zip(self.names, syms)))
        gu, gv = sympy.diff(self.sym, u), sympy.diff(self.sym, v)
        self._value = _lambdify(syms, [self.sym])
        self._grad = _lambdify(syms, [gu, gv])
        self._hess = _lambdify(syms, [gu, gv, sympy.diff(gu, u), sympy.diff(gu, v),
                                      sympy.diff(gv, v)])

    def __call__(self, u, v):
        return self._value(u, v)[0]

    def grad(self, u, v):
        return self._grad(u, v)

    def grad_hess(self, u, v):
        """(f_u, f_v, f_uu, f_uv, f_vv)."""
        return self._hess(u, v)


class Function1D:
    """A compiled scalar function of one variable with its first derivative."""

    def __init__(self, node, name):
        validate(node, (name,))
        self.node = node
        s = sympy.Symbol(name, real=True)
        self.sym = to_sympy(node, {name: s})
        self._both = _lambdify((s,), [self.sym, sympy.diff(self.sym, s)])

    def __call__(self, s):
        return self._both(s)[0]

    def value_and_derivative(self, s):
        return self._both(s)
