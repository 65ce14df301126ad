"""Smooth expression DAGs with exact forward-mode derivatives.

Expressions are immutable trees of :class:`SmoothExpr` nodes over numbered
variables ``x_1, x_2, ...`` (1-based, matching the text form ``(var 1)``).
Derivatives are computed by evaluating the tree on truncated multivariate
dual numbers (:class:`Jet`): each requested partial derivative gets its own
nilpotent perturbation ``e_b`` with ``e_b**2 == 0``, so the coefficient of
``e_1 e_2 ... e_k`` in the result is exactly the k-th mixed partial.

Evaluation accepts scalar coordinates or numpy arrays of equal shape, in
which case every value is computed elementwise in one pass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ParseError

__all__ = [
    "SmoothExpr",
    "SmoothMap",
    "Jet",
    "const",
    "var",
    "variables",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "diff",
    "compose",
    "substitute",
    "normalize",
    "evaluate",
    "partial",
    "mixed_partial",
    "jacobian",
    "parse_expr",
    "to_text",
    "ZERO",
    "ONE",
]

_UNARY = ("exp", "log", "sin", "cos", "sqrt")
_KINDS = ("const", "var", "add", "mul", "neg", "div", "pow", "diff", "compose") + _UNARY


# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True, eq=False, repr=False)
class SmoothExpr:
    """One node of an expression DAG.

    ``arg`` carries the node payload: the value of a constant, the index of
    a variable, the integer exponent of ``pow`` or the sorted index tuple of
    ``diff``. Structural equality and hashing go through :attr:`text`.
    """

    kind: str
    children: tuple = ()
    arg: object = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown node kind {self.kind!r}")

    @cached_property
    def text(self) -> str:
        return to_text(self)

    @cached_property
    def arity(self) -> int:
        """Number of leading variables the expression may reference."""
        if self.kind == "var":
            return self.arg
        if self.kind == "compose":
            return max((c.arity for c in self.children[1:]), default=0)
        return max((c.arity for c in self.children), default=0)

    @cached_property
    def free_vars(self) -> frozenset:
        if self.kind == "var":
            return frozenset((self.arg,))
        if self.kind == "compose":
            out = frozenset()
            for c in self.children[1:]:
                out |= c.free_vars
            return out
        out = frozenset()
        for c in self.children:
            out |= c.free_vars
        return out

    @cached_property
    def has_diff(self) -> bool:
        return self.kind == "diff" or any(c.has_diff for c in self.children)

    def __eq__(self, other):
        if not isinstance(other, SmoothExpr):
            return NotImplemented
        return self.text == other.text

    def __hash__(self):
        return hash(self.text)

    def __repr__(self):
        return f"SmoothExpr({self.text})"

    # arithmetic sugar -----------------------------------------------------

    def __add__(self, other):
        return SmoothExpr("add", (self, _lift(other)))

    def __radd__(self, other):
        return SmoothExpr("add", (_lift(other), self))

    def __sub__(self, other):
        return SmoothExpr("add", (self, SmoothExpr("neg", (_lift(other),))))

    def __rsub__(self, other):
        return SmoothExpr("add", (_lift(other), SmoothExpr("neg", (self,))))

    def __mul__(self, other):
        return SmoothExpr("mul", (self, _lift(other)))

    def __rmul__(self, other):
        return SmoothExpr("mul", (_lift(other), self))

    def __truediv__(self, other):
        return SmoothExpr("div", (self, _lift(other)))

    def __rtruediv__(self, other):
        return SmoothExpr("div", (_lift(other), self))

    def __neg__(self):
        return SmoothExpr("neg", (self,))

    def __pow__(self, n):
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        return SmoothExpr("pow", (self,), int(n))

    # evaluation shortcuts -------------------------------------------------

    def eval(self, p):
        return evaluate(self, p)

    def partial(self, p, i: int):
        return partial(self, p, i)

    def mixed_partial(self, p, indices):
        return mixed_partial(self, p, indices)


def _lift(x) -> SmoothExpr:
    if isinstance(x, SmoothExpr):
        return x
    if isinstance(x, (int, float, Fraction, np.integer, np.floating)):
        return const(x)
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def const(c) -> SmoothExpr:
    return SmoothExpr("const", (), float(c))


def var(i: int) -> SmoothExpr:
    if i < 1:
        raise ValueError("variables are numbered from 1")
    return SmoothExpr("var", (), int(i))


def variables(n: int) -> tuple:
    return tuple(var(i) for i in range(1, n + 1))


def exp(e) -> SmoothExpr:
    return SmoothExpr("exp", (_lift(e),))


def log(e) -> SmoothExpr:
    return SmoothExpr("log", (_lift(e),))


def sin(e) -> SmoothExpr:
    return SmoothExpr("sin", (_lift(e),))


def cos(e) -> SmoothExpr:
    return SmoothExpr("cos", (_lift(e),))


def sqrt(e) -> SmoothExpr:
    return SmoothExpr("sqrt", (_lift(e),))


def diff(e, *indices: int) -> SmoothExpr:
    """Node for the mixed partial of ``e`` in the given variables.

    Repeated indices mean higher derivatives in the same variable.
    """
    if not indices:
        return _lift(e)
    return SmoothExpr("diff", (_lift(e),), tuple(sorted(int(i) for i in indices)))


def compose(outer, inners: Sequence) -> SmoothExpr:
    """``outer(inners[0], inners[1], ...)``; outer's variable i reads inners[i-1]."""
    outer = _lift(outer)
    inners = tuple(_lift(c) for c in inners)
    if outer.arity > len(inners):
        raise ValueError(
            f"outer expression has arity {outer.arity} but only {len(inners)} inner expressions"
        )
    return SmoothExpr("compose", (outer,) + inners)


ZERO = const(0.0)
ONE = const(1.0)


# ---------------------------------------------------------------------------
# text form


def to_text(e: SmoothExpr) -> str:
    if e.kind == "const":
        return f"(const {e.arg!r})"
    if e.kind == "var":
        return f"(var {e.arg})"
    inner = " ".join(c.text for c in e.children)
    if e.kind == "pow":
        return f"(pow {inner} {e.arg})"
    if e.kind == "diff":
        return f"(diff {inner} {' '.join(str(i) for i in e.arg)})"
    return f"({e.kind} {inner})"


_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"cannot tokenize expression near {text[pos:pos + 20]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def _number(tok: str) -> float:
    try:
        if "/" in tok:
            return float(Fraction(tok))
        return float(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"expected a number, got {tok!r}") from None


def _integer(tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}") from None


def parse_expr(text: str) -> SmoothExpr:
    """Parse the prefix text form, e.g. ``(mul (var 1) (add (var 2) 3))``.

    Bare numbers stand for constants; ``sub`` is accepted as sugar for
    ``a + (-b)``.
    """
    if not isinstance(text, str):
        raise ParseError(f"expression text must be a string, got {type(text).__name__}")
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression")
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'")
        if tok != "(":
            return const(_number(tok))
        if pos >= len(tokens):
            raise ParseError("unexpected end of expression")
        head = tokens[pos]
        pos += 1
        if head == "const":
            out = const(_number(tokens[pos]))
            pos += 1
        elif head == "var":
            out = var(_integer(tokens[pos]))
            pos += 1
        elif head in ("pow", "diff"):
            base = node()
            ints = []
            while pos < len(tokens) and tokens[pos] != ")":
                ints.append(_integer(tokens[pos]))
                pos += 1
            if head == "pow":
                if len(ints) != 1:
                    raise ParseError("pow takes exactly one integer exponent")
                out = base ** ints[0]
            else:
                if not ints:
                    raise ParseError("diff needs at least one variable index")
                out = diff(base, *ints)
        else:
            args = []
            while pos < len(tokens) and tokens[pos] != ")":
                args.append(node())
            if head in ("add", "mul"):
                if not args:
                    raise ParseError(f"{head} needs at least one argument")
                out = args[0] if len(args) == 1 else SmoothExpr(head, tuple(args))
            elif head == "sub":
                if len(args) != 2:
                    raise ParseError("sub takes two arguments")
                out = args[0] - args[1]
            elif head in ("neg",) + _UNARY:
                if len(args) != 1:
                    raise ParseError(f"{head} takes one argument")
                out = SmoothExpr(head, (args[0],))
            elif head == "div":
                if len(args) != 2:
                    raise ParseError("div takes two arguments")
                out = SmoothExpr("div", tuple(args))
            elif head == "compose":
                if len(args) < 1:
                    raise ParseError("compose needs an outer expression")
                try:
                    out = compose(args[0], args[1:])
                except ValueError as exc:
                    raise ParseError(str(exc)) from None
            else:
                raise ParseError(f"unknown node kind {head!r}")
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ParseError(f"missing ')' after {head}")
        pos += 1
        return out

    out = node()
    if pos != len(tokens):
        raise ParseError(f"trailing tokens after expression: {' '.join(tokens[pos:])}")
    return out


# ---------------------------------------------------------------------------
# truncated multivariate dual numbers


def _popcount(m: int) -> int:
    return bin(m).count("1")


class Jet:
    """Truncated polynomial in nilpotent perturbations ``e_b`` (``e_b**2 = 0``).

    ``terms`` maps a bitmask of perturbations to its coefficient; mask 0 is
    the value. Monomials above ``order`` total perturbations are dropped.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict):
        self.terms = terms

    @property
    def value(self):
        return self.terms[0]

    def coefficient(self, mask: int):
        return self.terms.get(mask, 0.0)

    def add(self, other: "Jet") -> "Jet":
        out = dict(self.terms)
        for m, v in other.terms.items():
            out[m] = out[m] + v if m in out else v
        return Jet(out)

    def scale(self, c) -> "Jet":
        return Jet({m: c * v for m, v in self.terms.items()})

    def mul(self, other: "Jet", order: int) -> "Jet":
        out: dict = {}
        for ma, va in self.terms.items():
            for mb, vb in other.terms.items():
                if ma & mb:
                    continue
                m = ma | mb
                if m and _popcount(m) > order:
                    continue
                prod = va * vb
                out[m] = out[m] + prod if m in out else prod
        return Jet(out)

    def apply(self, derivatives, order: int) -> "Jet":
        """``f(self)`` given ``derivatives(a, j) -> [f(a), f'(a), ..., f^(j)(a)]``."""
        a = self.terms[0]
        delta = {m: v for m, v in self.terms.items() if m and np.any(v != 0)}
        if not delta:
            return Jet({0: derivatives(a, 0)[0]})
        bits = 0
        for m in delta:
            bits |= m
        jmax = min(order, _popcount(bits))
        ders = derivatives(a, jmax)
        out = {0: ders[0]}
        d = Jet(delta)
        power = Jet({0: 1.0})
        fact = 1.0
        for j in range(1, jmax + 1):
            power = power.mul(d, order)
            fact *= j
            c = ders[j] / fact
            for m, v in power.terms.items():
                term = c * v
                out[m] = out[m] + term if m in out else term
        return Jet(out)


def _bad(mask) -> bool:
    return bool(np.any(mask))


def _d_exp(a, j):
    v = np.exp(a)
    return [v] * (j + 1)


def _d_log(a, j):
    if _bad(np.asarray(a) <= 0):
        raise DomainError("log of a non-positive number")
    out = [np.log(a)]
    for r in range(1, j + 1):
        out.append((-1) ** (r - 1) * math.factorial(r - 1) / a**r)
    return out


def _d_sin(a, j):
    s, c = np.sin(a), np.cos(a)
    cyc = [s, c, -s, -c]
    return [cyc[r % 4] for r in range(j + 1)]


def _d_cos(a, j):
    s, c = np.sin(a), np.cos(a)
    cyc = [c, -s, -c, s]
    return [cyc[r % 4] for r in range(j + 1)]


def _d_sqrt(a, j):
    arr = np.asarray(a)
    if _bad(arr < 0):
        raise DomainError("sqrt of a negative number")
    if j > 0 and _bad(arr == 0):
        raise DomainError("sqrt is not differentiable at 0")
    out = [np.sqrt(a)]
    coef = 1.0
    for r in range(1, j + 1):
        coef *= 0.5 - (r - 1)
        out.append(coef * a ** (0.5 - r))
    return out


def _d_pow(n):
    def ders(a, j):
        if n < 0 and _bad(np.asarray(a) == 0):
            raise DomainError("negative power of zero")
        out = []
        coef = 1.0
        for r in range(j + 1):
            if r > 0:
                coef *= n - (r - 1)
            if coef == 0:
                out.append(0.0 * a)
            else:
                out.append(coef * a ** (n - r) if n - r != 0 else coef + 0.0 * a)
        return out

    return ders


_UNARY_DERIVS = {"exp": _d_exp, "log": _d_log, "sin": _d_sin, "cos": _d_cos, "sqrt": _d_sqrt}


class _Ctx:
    __slots__ = ("env", "order", "nbits", "memo")

    def __init__(self, env, order, nbits):
        self.env = env
        self.order = order
        self.nbits = nbits
        self.memo = {}


def _ev(e: SmoothExpr, ctx: _Ctx) -> Jet:
    key = id(e)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    k = e.kind
    if k == "const":
        out = Jet({0: e.arg})
    elif k == "var":
        if e.arg > len(ctx.env):
            raise ValueError(f"point has {len(ctx.env)} coordinates, expression reads x_{e.arg}")
        out = ctx.env[e.arg - 1]
    elif k == "add":
        out = _ev(e.children[0], ctx)
        for c in e.children[1:]:
            out = out.add(_ev(c, ctx))
    elif k == "mul":
        out = _ev(e.children[0], ctx)
        for c in e.children[1:]:
            out = out.mul(_ev(c, ctx), ctx.order)
    elif k == "neg":
        out = _ev(e.children[0], ctx).scale(-1.0)
    elif k == "div":
        num = _ev(e.children[0], ctx)
        den = _ev(e.children[1], ctx)
        if _bad(np.asarray(den.value) == 0):
            raise DomainError("division by zero")
        out = num.mul(den.apply(_d_pow(-1), ctx.order), ctx.order)
    elif k == "pow":
        base = _ev(e.children[0], ctx)
        n = e.arg
        if n >= 0:
            out = Jet({0: 1.0})
            for _ in range(n):
                out = out.mul(base, ctx.order)
        else:
            out = base.apply(_d_pow(n), ctx.order)
    elif k in _UNARY_DERIVS:
        out = _ev(e.children[0], ctx).apply(_UNARY_DERIVS[k], ctx.order)
    elif k == "compose":
        inner = [_ev(c, ctx) for c in e.children[1:]]
        out = _ev(e.children[0], _Ctx(inner, ctx.order, ctx.nbits))
    elif k == "diff":
        out = _ev_diff(e, ctx)
    else:  # pragma: no cover - guarded in __post_init__
        raise ValueError(k)
    ctx.memo[key] = out
    return out


def _ev_diff(e: SmoothExpr, ctx: _Ctx) -> Jet:
    indices = e.arg
    env = list(ctx.env)
    full = 0
    for s, v in enumerate(indices):
        if v > len(env):
            return Jet({0: 0.0})
        bit = 1 << (ctx.nbits + s)
        full |= bit
        env[v - 1] = env[v - 1].add(Jet({bit: 1.0}))
    inner = _ev(e.children[0], _Ctx(env, ctx.order + len(indices), ctx.nbits + len(indices)))
    out: dict = {}
    for m, val in inner.terms.items():
        if m & full == full:
            r = m & ~full
            out[r] = out[r] + val if r in out else val
    if 0 not in out:
        out[0] = 0.0
    return Jet(out)


def _coords(p) -> tuple:
    if isinstance(p, np.ndarray):
        if p.ndim == 0:
            return (float(p),)
        return tuple(np.asarray(row, dtype=float) for row in p)
    if isinstance(p, (int, float, Fraction, np.integer, np.floating)):
        return (float(p),)
    out = []
    for c in p:
        if isinstance(c, np.ndarray):
            out.append(np.asarray(c, dtype=float))
        else:
            out.append(float(c))
    return tuple(out)


def _shape(coords) -> tuple:
    shapes = [np.shape(c) for c in coords]
    return np.broadcast_shapes(*shapes) if shapes else ()


def _finish(v, shape):
    if shape == ():
        return float(v)
    return np.broadcast_to(np.asarray(v, dtype=float), shape).copy()


def _run(e: SmoothExpr, coords, seeds: Sequence[tuple], order: int) -> Jet:
    """Evaluate ``e`` with perturbation bit ``b`` attached to each (var, bit) seed."""
    env = [Jet({0: c}) for c in coords]
    for v, bit in seeds:
        if v > len(env):
            raise ValueError(f"point has {len(env)} coordinates, cannot perturb x_{v}")
        env[v - 1] = env[v - 1].add(Jet({1 << bit: 1.0}))
    nbits = max((b for _, b in seeds), default=-1) + 1
    return _ev(e, _Ctx(env, order, nbits))


def evaluate(e: SmoothExpr, p):
    """Value of ``e`` at ``p``; raises :class:`DomainError` outside the natural domain."""
    coords = _coords(p)
    return _finish(_run(e, coords, (), 0).value, _shape(coords))


def partial(e: SmoothExpr, p, i: int):
    """Exact first partial derivative of ``e`` in variable ``i`` (1-based)."""
    coords = _coords(p)
    jet = _run(e, coords, ((i, 0),), 1)
    return _finish(jet.coefficient(1), _shape(coords))


def mixed_partial(e: SmoothExpr, p, indices: Iterable[int]):
    """k-th mixed partial in the distinct variables ``indices``.

    Mixed partials of smooth functions commute, so the indices are sorted
    before seeding; the result does not depend on their order.
    """
    indices = tuple(int(i) for i in indices)
    if len(set(indices)) != len(indices):
        raise ValueError("mixed_partial indices must be distinct")
    coords = _coords(p)
    seeds = tuple((v, b) for b, v in enumerate(sorted(indices)))
    jet = _run(e, coords, seeds, len(indices))
    return _finish(jet.coefficient((1 << len(indices)) - 1), _shape(coords))


# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True, eq=False, repr=False)
class SmoothMap:
    """A tuple of expressions sharing one input dimension."""

    components: tuple
    input_dim: int

    def __post_init__(self):
        comps = tuple(_lift(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if self.input_dim < 0:
            raise ValueError("input_dim must be non-negative")
        for c in comps:
            if c.arity > self.input_dim:
                raise ValueError(
                    f"component {c.text} reads x_{c.arity} but the map has input dim {self.input_dim}"
                )

    @classmethod
    def of(cls, components, input_dim: int | None = None) -> "SmoothMap":
        comps = tuple(_lift(c) for c in components)
        if input_dim is None:
            input_dim = max((c.arity for c in comps), default=0)
        return cls(comps, input_dim)

    @classmethod
    def identity(cls, n: int) -> "SmoothMap":
        return cls(variables(n), n)

    @property
    def output_dim(self) -> int:
        return len(self.components)

    @cached_property
    def key(self) -> tuple:
        return ("map", self.input_dim, tuple(c.text for c in self.components))

    def __eq__(self, other):
        if not isinstance(other, SmoothMap):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"SmoothMap({', '.join(c.text for c in self.components)}; n={self.input_dim})"

    def __call__(self, p):
        coords = _coords(p) if self.input_dim else ()
        ctx = _Ctx([Jet({0: c}) for c in coords], 0, 0)
        shape = _shape(coords)
        vals = [_finish(_ev(c, ctx).value, shape) for c in self.components]
        if shape == ():
            return np.array(vals, dtype=float)
        return np.stack(vals) if vals else np.zeros((0,) + shape)

    def jacobian(self, p) -> np.ndarray:
        """Matrix of partials, shape ``(output_dim, input_dim) + batch``."""
        coords = _coords(p) if self.input_dim else ()
        n = self.input_dim
        shape = _shape(coords)
        env = [Jet({0: c, 1 << i: 1.0}) for i, c in enumerate(coords)]
        ctx = _Ctx(env, 1, n)
        out = np.zeros((self.output_dim, n) + shape)
        for r, comp in enumerate(self.components):
            jet = _ev(comp, ctx)
            for j in range(n):
                out[r, j] = jet.coefficient(1 << j)
        return out

    def normalized(self) -> "SmoothMap":
        return SmoothMap(tuple(normalize(c) for c in self.components), self.input_dim)

    def substitute(self, mapping: Mapping[int, SmoothExpr], input_dim: int) -> "SmoothMap":
        comps = tuple(normalize(substitute(c, mapping)) for c in self.components)
        return SmoothMap(comps, input_dim)

    def then(self, outer: Sequence[SmoothExpr]) -> "SmoothMap":
        """The map ``outer o self`` for outer expressions on the output space."""
        return SmoothMap(tuple(normalize(compose(o, self.components)) for o in outer), self.input_dim)


def jacobian(m: SmoothMap, p) -> np.ndarray:
    return m.jacobian(p)


# ---------------------------------------------------------------------------
# substitution and normalization


def substitute(e: SmoothExpr, mapping: Mapping[int, SmoothExpr]) -> SmoothExpr:
    """Replace variables by expressions (variables missing from ``mapping`` stay)."""
    mapping = {int(k): _lift(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(node: SmoothExpr) -> SmoothExpr:
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if node.kind == "var":
            out = mapping.get(node.arg, node)
        elif node.kind == "const":
            out = node
        elif node.kind == "compose":
            out = SmoothExpr("compose", (node.children[0],) + tuple(go(c) for c in node.children[1:]))
        elif node.kind == "diff":
            # a derivative node is tied to its own variables: wrap it instead
            n = node.arity
            out = SmoothExpr("compose", (node,) + tuple(mapping.get(j, var(j)) for j in range(1, n + 1)))
        else:
            out = SmoothExpr(node.kind, tuple(go(c) for c in node.children), node.arg)
        memo[id(node)] = out
        return out

    return go(e)


def _split_coef(e: SmoothExpr):
    """Write a normalized term as (constant factor, remaining expression)."""
    if e.kind == "mul" and e.children[0].kind == "const":
        rest = e.children[1:]
        return e.children[0].arg, rest[0] if len(rest) == 1 else SmoothExpr("mul", rest)
    return 1.0, e


def _scaled(c: float, base: SmoothExpr) -> SmoothExpr:
    if c == 1.0:
        return base
    if base.kind == "mul":
        return SmoothExpr("mul", (const(c),) + base.children)
    return SmoothExpr("mul", (const(c), base))


def _make_add(children) -> SmoothExpr:
    flat = []
    for c in children:
        if c.kind == "add":
            flat.extend(c.children)
        else:
            flat.append(c)
    total = 0.0
    terms: dict = {}
    order = []
    for c in flat:
        if c.kind == "const":
            total += c.arg
            continue
        coef, base = _split_coef(c)
        if base.text in terms:
            terms[base.text][0] += coef
        else:
            terms[base.text] = [coef, base]
            order.append(base.text)
    parts = [
        _scaled(terms[t][0], terms[t][1]) for t in sorted(order) if terms[t][0] != 0.0
    ]
    if total != 0.0:
        parts.insert(0, const(total))
    if not parts:
        return ZERO
    if len(parts) == 1:
        return parts[0]
    return SmoothExpr("add", tuple(parts))


def _make_mul(children) -> SmoothExpr:
    flat = []
    for c in children:
        if c.kind == "mul":
            flat.extend(c.children)
        else:
            flat.append(c)
    coef = 1.0
    powers: dict = {}
    bases: dict = {}
    for c in flat:
        if c.kind == "const":
            coef *= c.arg
            continue
        if c.kind == "pow":
            base, n = c.children[0], c.arg
        else:
            base, n = c, 1
        powers[base.text] = powers.get(base.text, 0) + n
        bases[base.text] = base
    if coef == 0.0:
        return ZERO
    factors = []
    for t in sorted(powers):
        n = powers[t]
        if n == 0:
            continue
        factors.append(bases[t] if n == 1 else SmoothExpr("pow", (bases[t],), n))
    if not factors:
        return const(coef)
    if coef == 1.0 and len(factors) == 1:
        return factors[0]
    if coef != 1.0:
        factors.insert(0, const(coef))
    return SmoothExpr("mul", tuple(factors))


def _fold_unary(kind: str, c: float):
    if kind == "exp":
        return math.exp(c)
    if kind == "sin":
        return math.sin(c)
    if kind == "cos":
        return math.cos(c)
    if kind == "log" and c > 0:
        return math.log(c)
    if kind == "sqrt" and c >= 0:
        return math.sqrt(c)
    return None


def normalize(e: SmoothExpr) -> SmoothExpr:
    """Canonical structural form used for equality checks.

    Flattens sums and products, folds constants, sorts children by their
    text, merges like terms and equal factors, and applies the linear rules
    of ``diff`` (sums, constant factors, independence from a variable).
    """
    memo: dict = {}

    def go(node: SmoothExpr) -> SmoothExpr:
        hit = memo.get(node.text)
        if hit is not None:
            return hit
        out = _norm(node, go)
        memo[node.text] = out
        return out

    return go(e)


def _norm(node: SmoothExpr, go) -> SmoothExpr:
    k = node.kind
    if k in ("const", "var"):
        return node
    if k == "neg":
        return _make_mul([const(-1.0), go(node.children[0])])
    if k == "add":
        return _make_add([go(c) for c in node.children])
    if k == "mul":
        return _make_mul([go(c) for c in node.children])
    if k == "div":
        num, den = go(node.children[0]), go(node.children[1])
        if den.kind == "const" and den.arg == 1.0:
            return num
        if den.kind == "const" and den.arg == -1.0:
            return _make_mul([const(-1.0), num])
        if num.kind == "const" and num.arg == 0.0 and den.kind == "const" and den.arg != 0.0:
            return ZERO
        return SmoothExpr("div", (num, den))
    if k == "pow":
        base, n = go(node.children[0]), node.arg
        if n == 0:
            return ONE
        if n == 1:
            return base
        if base.kind == "const" and not (base.arg == 0.0 and n < 0):
            return const(base.arg**n)
        if base.kind == "pow":
            return go(SmoothExpr("pow", base.children, base.arg * n))
        return SmoothExpr("pow", (base,), n)
    if k in _UNARY:
        c = go(node.children[0])
        if c.kind == "const":
            folded = _fold_unary(k, c.arg)
            if folded is not None:
                return const(folded)
        return SmoothExpr(k, (c,))
    if k == "compose":
        outer = go(node.children[0])
        inners = tuple(go(c) for c in node.children[1:])
        if outer.kind == "const":
            return outer
        if outer.kind == "var":
            return inners[outer.arg - 1]
        if not outer.has_diff:
            return go(substitute(outer, {i + 1: c for i, c in enumerate(inners)}))
        return SmoothExpr("compose", (outer,) + inners)
    if k == "diff":
        return _norm_diff(go(node.children[0]), node.arg, go)
    raise ValueError(k)  # pragma: no cover


def _norm_diff(inner: SmoothExpr, indices: tuple, go) -> SmoothExpr:
    if inner.kind == "diff":
        return _norm_diff(inner.children[0], tuple(sorted(indices + inner.arg)), go)
    if not set(indices) <= inner.free_vars:
        return ZERO
    if inner.kind == "var":
        return ONE if indices == (inner.arg,) else ZERO
    if inner.kind == "add":
        return _make_add([_norm_diff(c, indices, go) for c in inner.children])
    if inner.kind == "mul" and inner.children[0].kind == "const":
        coef, rest = _split_coef(inner)
        return _make_mul([const(coef), _norm_diff(rest, indices, go)])
    return SmoothExpr("diff", (inner,), indices)
