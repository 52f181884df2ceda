"""Propositional formulas over configuration options.

Formulas are immutable trees of :class:`Const`, :class:`Var`, :class:`Not`,
:class:`And` and :class:`Or`.  ``And``/``Or`` are n-ary (at least two
operands); the parser flattens chains such as ``a && b && c`` into one node,
and the printer parenthesises a nested node of the same kind so that
``parse_formula(print_formula(f)) == f`` holds structurally.

The text grammar is the boolean subset of C preprocessor expressions::

    expr    := or
    or      := and ('||' and)*
    and     := unary ('&&' unary)*
    unary   := '!' unary | primary
    primary := '(' expr ')' | 'defined' '(' NAME ')' | 'defined' NAME
             | NAME | INTEGER

Anything else a C preprocessor accepts (comparisons, arithmetic, function-like
macros, ``?:``) is recognised by the tokenizer and either rejected with
:class:`UnsupportedExpression` or, when an ``opaque`` callback is supplied,
abstracted into a fresh boolean variable.
"""

from __future__ import annotations

import hashlib
import itertools
import re
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field

__all__ = [
    "Formula", "Const", "Var", "Not", "And", "Or", "TRUE", "FALSE",
    "conj", "disj", "neg", "implies", "variables", "simplify",
    "parse_formula", "print_formula", "evaluate", "opaque_name",
    "FormulaError", "FormulaSyntaxError", "UnsupportedExpression", "UnboundOption",
    "Configuration", "CnfFormula", "to_cnf", "is_identifier",
]

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_identifier(name: str) -> bool:
    return bool(_IDENT_RE.match(name))


class FormulaError(ValueError):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnsupportedExpression(FormulaError):
    """A well-formed preprocessor expression outside the boolean subset."""

    def __init__(self, substring: str, position: int = 0):
        self.substring = substring
        self.position = position
        super().__init__(f"unsupported expression {substring!r} at position {position}")


class UnboundOption(KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"option {self.name!r} is not assigned in the configuration"


# ---------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()

    def __and__(self, other: Formula) -> Formula:
        return conj(self, other)

    def __or__(self, other: Formula) -> Formula:
        return disj(self, other)

    def __invert__(self) -> Formula:
        return neg(self)

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self) -> str:
        return "TRUE" if self.value else "FALSE"


@dataclass(frozen=True, repr=False)
class Var(Formula):
    name: str

    def __post_init__(self):
        if not is_identifier(self.name):
            raise FormulaError(f"invalid option name {self.name!r}")

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self) -> str:
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    args: tuple[Formula, ...]

    def __init__(self, *args: Formula):
        if len(args) < 2:
            raise FormulaError("And needs at least two operands; use conj()")
        object.__setattr__(self, "args", tuple(args))

    def __repr__(self) -> str:
        return f"And({', '.join(map(repr, self.args))})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    args: tuple[Formula, ...]

    def __init__(self, *args: Formula):
        if len(args) < 2:
            raise FormulaError("Or needs at least two operands; use disj()")
        object.__setattr__(self, "args", tuple(args))

    def __repr__(self) -> str:
        return f"Or({', '.join(map(repr, self.args))})"


TRUE = Const(True)
FALSE = Const(False)


def conj(*fs: Formula) -> Formula:
    """Conjunction with constant folding and flattening of nested ``And``."""
    out: list[Formula] = []
    for f in fs:
        if isinstance(f, Const):
            if not f.value:
                return FALSE
            continue
        if isinstance(f, And):
            out.extend(f.args)
        else:
            out.append(f)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(*out)


def disj(*fs: Formula) -> Formula:
    out: list[Formula] = []
    for f in fs:
        if isinstance(f, Const):
            if f.value:
                return TRUE
            continue
        if isinstance(f, Or):
            out.extend(f.args)
        else:
            out.append(f)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(*out)


def neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def variables(f: Formula) -> frozenset[str]:
    out: set[str] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Var):
            out.add(g.name)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, (And, Or)):
            stack.extend(g.args)
    return frozenset(out)


def simplify(f: Formula) -> Formula:
    """Fold constants and double negations bottom-up (no other rewriting)."""
    if isinstance(f, (Const, Var)):
        return f
    if isinstance(f, Not):
        return neg(simplify(f.arg))
    if isinstance(f, And):
        return conj(*(simplify(a) for a in f.args))
    return disj(*(simplify(a) for a in f.args))


def opaque_name(text: str) -> str:
    """Stable option name standing in for an unsupported ``#if`` sub-expression."""
    normalized = " ".join(text.split())
    digest = hashlib.sha1(normalized.encode("utf-8")).hexdigest()[:10]
    return f"__OPAQUE_{digest}"


# ---------------------------------------------------------------------------
# Printing

_PREC = {Or: 1, And: 2, Not: 3}


def print_formula(f: Formula) -> str:
    if isinstance(f, Const):
        return "1" if f.value else "0"
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Not):
        inner = print_formula(f.arg)
        if isinstance(f.arg, (And, Or)):
            inner = f"({inner})"
        return "!" + inner
    sep = " && " if isinstance(f, And) else " || "
    parts = []
    for a in f.args:
        s = print_formula(a)
        # same-kind children keep their grouping; lower precedence needs parens
        if isinstance(a, (And, Or)) and _PREC[type(a)] <= _PREC[type(f)]:
            s = f"({s})"
        parts.append(s)
    return sep.join(parts)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:0[xX][0-9A-Fa-f]+|\d+)[uUlL]*)
  | (?P<char>'(?:\\.|[^\\'])+')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\|\||&&|==|!=|<=|>=|<<|>>|[!~()?:,<>+\-*/%&|^])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# Generic C constant-expression tree.  Boolean nodes are converted to
# formulas; everything else is "foreign" and reported or abstracted.
@dataclass
class _Node:
    kind: str  # or, and, not, defined, ident, num, paren, foreign
    start: int
    end: int
    children: list = field(default_factory=list)
    value: object = None


_BINARY_LEVELS = [
    ("||",), ("&&",), ("|",), ("^",), ("&",), ("==", "!="),
    ("<", ">", "<=", ">="), ("<<", ">>"), ("+", "-"), ("*", "/", "%"),
]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "eof":
            what = self.tok.text or "end of input"
            raise FormulaSyntaxError(f"expected {text!r}, found {what!r}", self.tok.pos, self.text)
        return self.take()

    def parse(self) -> _Node:
        if self.tok.kind == "eof":
            raise FormulaSyntaxError("empty expression", 0, self.text)
        node = self.conditional()
        if self.tok.kind != "eof":
            raise FormulaSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.pos, self.text)
        return node

    def conditional(self) -> _Node:
        cond = self.binary(0)
        if self.tok.text == "?":
            self.take()
            a = self.conditional()
            self.expect(":")
            b = self.conditional()
            return _Node("foreign", cond.start, b.end, [cond, a, b])
        return cond

    def binary(self, level: int) -> _Node:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        ops = _BINARY_LEVELS[level]
        left = self.binary(level + 1)
        operands = [left]
        kinds = set()
        while self.tok.kind == "op" and self.tok.text in ops:
            kinds.add(self.take().text)
            operands.append(self.binary(level + 1))
        if len(operands) == 1:
            return left
        start, end = operands[0].start, operands[-1].end
        if kinds == {"||"}:
            return _Node("or", start, end, operands)
        if kinds == {"&&"}:
            return _Node("and", start, end, operands)
        return _Node("foreign", start, end, operands)

    def unary(self) -> _Node:
        t = self.tok
        if t.kind == "op" and t.text == "!":
            self.take()
            arg = self.unary()
            return _Node("not", t.pos, arg.end, [arg])
        if t.kind == "op" and t.text in ("~", "-", "+"):
            self.take()
            arg = self.unary()
            return _Node("foreign", t.pos, arg.end, [arg])
        return self.primary()

    def primary(self) -> _Node:
        t = self.take()
        if t.kind == "op" and t.text == "(":
            inner = self.conditional()
            close = self.expect(")")
            return _Node("paren", t.pos, close.pos + 1, [inner])
        if t.kind == "num":
            digits = t.text.rstrip("uUlL")
            base = 16 if digits[:2] in ("0x", "0X") else 8 if digits.startswith("0") and len(digits) > 1 else 10
            try:
                value = int(digits, base)
            except ValueError:
                raise FormulaSyntaxError(f"malformed number {t.text!r}", t.pos, self.text) from None
            return _Node("num", t.pos, t.pos + len(t.text), value=value)
        if t.kind == "char":
            return _Node("foreign", t.pos, t.pos + len(t.text))
        if t.kind == "ident":
            if t.text == "defined":
                if self.tok.text == "(":
                    self.take()
                    name = self.tok
                    if name.kind != "ident":
                        raise FormulaSyntaxError("expected macro name after 'defined('", name.pos, self.text)
                    self.take()
                    close = self.expect(")")
                    return _Node("defined", t.pos, close.pos + 1, value=name.text)
                name = self.tok
                if name.kind != "ident":
                    raise FormulaSyntaxError("expected macro name after 'defined'", name.pos, self.text)
                self.take()
                return _Node("defined", t.pos, name.pos + len(name.text), value=name.text)
            if self.tok.text == "(":
                # function-like macro invocation: consume balanced argument list
                depth = 0
                while True:
                    u = self.take()
                    if u.kind == "eof":
                        raise FormulaSyntaxError("unbalanced parentheses in macro call", u.pos, self.text)
                    if u.text == "(":
                        depth += 1
                    elif u.text == ")":
                        depth -= 1
                        if depth == 0:
                            return _Node("foreign", t.pos, u.pos + 1)
            return _Node("ident", t.pos, t.pos + len(t.text), value=t.text)
        what = t.text or "end of input"
        raise FormulaSyntaxError(f"unexpected token {what!r}", t.pos, self.text)


def _convert(node: _Node, text: str, opaque: Callable[[str], Formula] | None) -> Formula:
    k = node.kind
    if k == "paren":
        return _convert(node.children[0], text, opaque)
    if k == "or":
        # a chain `a || b || c` is one n-ary node; parenthesised groups stay nested
        return Or(*(_convert(c, text, opaque) for c in node.children))
    if k == "and":
        return And(*(_convert(c, text, opaque) for c in node.children))
    if k == "not":
        return Not(_convert(node.children[0], text, opaque))
    if k in ("defined", "ident"):
        return Var(node.value)
    if k == "num":
        return TRUE if node.value else FALSE
    sub = text[node.start:node.end]
    if opaque is None:
        raise UnsupportedExpression(sub, node.start)
    return opaque(sub)


def parse_formula(text: str, opaque: Callable[[str], Formula] | None = None) -> Formula:
    """Parse a boolean preprocessor expression.

    ``defined(X)``, ``defined X`` and a bare ``X`` all denote ``Var("X")``;
    integer literals denote ``TRUE`` when non-zero.  Without ``opaque``,
    non-boolean constructs raise :class:`UnsupportedExpression`; with it, each
    maximal non-boolean sub-expression is replaced by ``opaque(substring)``.
    """
    tree = _Parser(text).parse()
    return _convert(tree, text, opaque)


# ---------------------------------------------------------------------------
# Configurations and evaluation


class Configuration(Mapping):
    """Total, immutable assignment of booleans to option names."""

    __slots__ = ("_items", "_map", "_hash")

    def __init__(self, assignment: Mapping[str, bool] | Iterable[tuple[str, bool]] = ()):
        items = dict(assignment)
        self._items = tuple(sorted((str(k), bool(v)) for k, v in items.items()))
        self._map = dict(self._items)
        self._hash = hash(self._items)

    @classmethod
    def from_bits(cls, options: Iterable[str], bits: Iterable[bool | int]) -> Configuration:
        return cls(zip(options, (bool(b) for b in bits)))

    @classmethod
    def uniform(cls, options: Iterable[str], value: bool) -> Configuration:
        return cls((o, value) for o in options)

    def __getitem__(self, name: str) -> bool:
        return self._map[name]

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Configuration):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._map == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{k}={int(v)}" for k, v in self._items)
        return f"Configuration({body})"

    @property
    def options(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self._items)

    @property
    def enabled(self) -> frozenset[str]:
        return frozenset(k for k, v in self._items if v)

    def bits(self, order: Iterable[str]) -> tuple[int, ...]:
        return tuple(int(self._map[o]) for o in order)

    def project(self, options: Iterable[str], default: bool | None = None) -> Configuration:
        if default is None:
            return Configuration((o, self._map[o]) for o in options)
        return Configuration((o, self._map.get(o, default)) for o in options)

    def updated(self, changes: Mapping[str, bool]) -> Configuration:
        merged = dict(self._map)
        merged.update(changes)
        return Configuration(merged)


def evaluate(f: Formula, c: Mapping[str, bool]) -> bool:
    if isinstance(f, Var):
        try:
            return bool(c[f.name])
        except KeyError:
            raise UnboundOption(f.name) from None
    if isinstance(f, Not):
        return not evaluate(f.arg, c)
    if isinstance(f, And):
        return all(evaluate(a, c) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, c) for a in f.args)
    return f.value


# ---------------------------------------------------------------------------
# CNF


@dataclass(frozen=True)
class CnfFormula:
    """Clauses over integer literals plus the variable table.

    Variables ``1..len(options)`` are the options in ``options`` order; higher
    indices are Tseitin auxiliaries, each mapped to the subformula it names.
    """

    clauses: tuple[tuple[int, ...], ...]
    num_vars: int
    options: tuple[str, ...]
    aux: Mapping[int, Formula] = field(default_factory=dict)

    @property
    def index(self) -> dict[str, int]:
        return {name: i + 1 for i, name in enumerate(self.options)}

    def name_of(self, var: int) -> str:
        if 1 <= var <= len(self.options):
            return self.options[var - 1]
        return f"_aux{var}"

    def with_clauses(self, extra: Iterable[Iterable[int]]) -> CnfFormula:
        extra = tuple(tuple(c) for c in extra)
        top = max([self.num_vars] + [abs(l) for c in extra for l in c])
        return CnfFormula(self.clauses + extra, top, self.options, self.aux)


def to_cnf(f: Formula, space: Iterable[str] | None = None) -> CnfFormula:
    """Tseitin translation; one auxiliary variable per distinct And/Or node.

    ``space`` fixes the option variables (sorted by name) so that models are
    total over it even if some options do not occur in ``f``.
    """
    names = set(variables(f))
    if space is not None:
        names |= set(space)
    options = tuple(sorted(names))
    index = {n: i + 1 for i, n in enumerate(options)}
    f = simplify(f)
    if f == TRUE:
        return CnfFormula((), len(options), options, {})
    if f == FALSE:
        return CnfFormula(((),), len(options), options, {})

    clauses: list[tuple[int, ...]] = []
    aux: dict[int, Formula] = {}
    memo: dict[Formula, int] = {}
    counter = itertools.count(len(options) + 1)

    def lit(g: Formula) -> int:
        if isinstance(g, Var):
            return index[g.name]
        if isinstance(g, Not):
            return -lit(g.arg)
        if g in memo:
            return memo[g]
        subs = [lit(a) for a in g.args]
        x = next(counter)
        memo[g] = x
        aux[x] = g
        if isinstance(g, And):
            for s in subs:
                clauses.append((-x, s))
            clauses.append((x, *(-s for s in subs)))
        else:
            for s in subs:
                clauses.append((x, -s))
            clauses.append((-x, *subs))
        return x

    root = lit(f)
    clauses.append((root,))
    num_vars = max(len(options), max(aux, default=0))
    return CnfFormula(tuple(clauses), num_vars, options, aux)
