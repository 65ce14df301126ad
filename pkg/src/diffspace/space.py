"""Differential spaces presented inside an ambient R^d, and dense cube domains.

Carrier conventions
-------------------
Membership predicates are decided on *exact* values. ``fractions.Fraction``
and ``int`` coordinates are exact rationals; sympy numbers are exact reals
(``sqrt(2)/2``, ``pi/4``); a Python ``float`` stands for an arbitrary real
known to double precision and is therefore never certified rational. So a
float is a member of the full cube but not of ``Q ∩ [0,1]^n``, and image
points of cubes are checked by exact evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import BoundError, DomainError, SamplerFailure, ValidationError
from .smoothfn import SmoothExpr, SmoothMap, evaluate

MEMBERSHIP_KINDS = ("all", "rational", "dyadic", "sqrt-rational", "zero-set")
DOMAIN_KINDS = ("full", "rational", "dyadic", "custom")
BOUND_SLACK = 1e-12


# ---------------------------------------------------------------------------
# exact evaluation


class _Inexact(Exception):
    pass


def _is_sympy(x) -> bool:
    return type(x).__module__.startswith("sympy")


def _is_exact_rational(x) -> bool:
    if isinstance(x, bool):
        return False
    if isinstance(x, (int, Fraction, np.integer)):
        return True
    if _is_sympy(x):
        return x.is_rational is True
    return False


def _frac_eval(e: SmoothExpr, point: tuple):
    k = e.kind
    if k == "const":
        return Fraction(e.arg)
    if k == "var":
        c = point[e.arg - 1]
        if isinstance(c, (int, Fraction, np.integer)) and not isinstance(c, bool):
            return Fraction(int(c)) if isinstance(c, (int, np.integer)) else c
        raise _Inexact
    if k == "add":
        return sum((_frac_eval(c, point) for c in e.children), Fraction(0))
    if k == "mul":
        out = Fraction(1)
        for c in e.children:
            out *= _frac_eval(c, point)
        return out
    if k == "neg":
        return -_frac_eval(e.children[0], point)
    if k == "div":
        den = _frac_eval(e.children[1], point)
        if den == 0:
            raise DomainError("division by zero")
        return _frac_eval(e.children[0], point) / den
    if k == "pow":
        base = _frac_eval(e.children[0], point)
        if base == 0 and e.arg < 0:
            raise DomainError("negative power of zero")
        return base**e.arg
    if k == "sqrt":
        x = _frac_eval(e.children[0], point)
        if x < 0:
            raise DomainError("sqrt of a negative number")
        rn, rd = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if rn * rn == x.numerator and rd * rd == x.denominator:
            return Fraction(rn, rd)
        raise _Inexact
    if k in ("exp", "sin", "cos", "log"):
        x = _frac_eval(e.children[0], point)
        exact = {("exp", 0): 1, ("sin", 0): 0, ("cos", 0): 1, ("log", 1): 0}
        if (k, x) in exact:
            return Fraction(exact[(k, x)])
        if k == "log" and x <= 0:
            raise DomainError("log of a non-positive number")
        raise _Inexact
    if k == "compose":
        inner = tuple(_frac_eval(c, point) for c in e.children[1:])
        return _frac_eval(e.children[0], inner)
    raise _Inexact


def to_sympy(e: SmoothExpr, symbols: Sequence):
    """Symbolic counterpart of an expression over the given sympy symbols."""
    import sympy

    k = e.kind
    if k == "const":
        return sympy.Rational(Fraction(e.arg))
    if k == "var":
        return symbols[e.arg - 1]
    args = [to_sympy(c, symbols) for c in e.children] if k not in ("compose",) else None
    if k == "add":
        return sympy.Add(*args)
    if k == "mul":
        return sympy.Mul(*args)
    if k == "neg":
        return -args[0]
    if k == "div":
        return args[0] / args[1]
    if k == "pow":
        return args[0] ** e.arg
    if k == "diff":
        return sympy.diff(args[0], *[symbols[i - 1] for i in e.arg])
    if k in ("exp", "log", "sin", "cos", "sqrt"):
        return getattr(sympy, k)(args[0])
    if k == "compose":
        outer = e.children[0]
        inner = [to_sympy(c, symbols) for c in e.children[1:]]
        local = sympy.symbols(f"c1:{len(inner) + 1}")
        return to_sympy(outer, local).subs(dict(zip(local, inner)), simultaneous=True)
    raise ValueError(k)  # pragma: no cover


def _sympy_eval(e: SmoothExpr, point: tuple):
    import sympy

    syms = sympy.symbols(f"x1:{len(point) + 2}")
    vals = {s: (sympy.Rational(c) if isinstance(c, (int, Fraction)) else c) for s, c in zip(syms, point)}
    out = to_sympy(e, syms).subs(vals, simultaneous=True)
    if out.has(sympy.zoo, sympy.nan) or out.is_real is False:
        raise DomainError(f"{e.text} is undefined at the given point")
    return sympy.nsimplify(out) if out.is_Float else out


def exact_value(e: SmoothExpr, point):
    """Evaluate exactly when the point is exact; floats give float results."""
    point = tuple(point) if isinstance(point, (tuple, list)) else (point,)
    if any(isinstance(c, (float, np.floating)) for c in point):
        return evaluate(e, point)
    if not any(_is_sympy(c) for c in point):
        try:
            return _frac_eval(e, point)
        except _Inexact:
            pass
    return _sympy_eval(e, point)


def _is_zero(v) -> bool:
    if isinstance(v, Fraction):
        return v == 0
    if _is_sympy(v):
        import sympy

        return sympy.simplify(v) == 0
    return abs(float(v)) <= 1e-12


def _leq(a, b) -> bool:
    if _is_sympy(a) or _is_sympy(b):
        import sympy

        d = sympy.sympify(b) - sympy.sympify(a)
        r = d.is_nonnegative
        return bool(r) if r is not None else float(d) >= 0.0
    return a <= b


# ---------------------------------------------------------------------------
# membership


@dataclass(frozen=True)
class Membership:
    """Decidable carrier of M inside R^d, optionally cut by a closed box."""

    kind: str = "all"
    exprs: tuple = ()
    box: tuple | None = None

    def __post_init__(self):
        if self.kind not in MEMBERSHIP_KINDS:
            raise ValidationError(f"unknown membership kind {self.kind!r}")
        if self.kind == "zero-set" and not self.exprs:
            raise ValidationError("zero-set membership needs at least one expression")
        if self.box is not None:
            object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))

    @classmethod
    def zero_set(cls, exprs, box=None) -> "Membership":
        return cls("zero-set", tuple(exprs), box)

    def contains(self, m) -> bool:
        m = tuple(m)
        if self.box is not None:
            if len(self.box) != len(m):
                return False
            for c, (lo, hi) in zip(m, self.box):
                if not (_leq(lo, c) and _leq(c, hi)):
                    return False
        if self.kind == "all":
            return True
        if self.kind == "rational":
            return all(_is_exact_rational(c) for c in m)
        if self.kind == "dyadic":
            return all(_is_exact_rational(c) and _is_pow2(Fraction(str(c)) if _is_sympy(c) else Fraction(c)) for c in m)
        if self.kind == "sqrt-rational":
            for c in m:
                if isinstance(c, (float, np.floating)):
                    return False
                sq = c * c
                if not _is_exact_rational(sq if not _is_sympy(sq) else sq.expand()):
                    return False
                if not (_leq(0, c) and c != 0 and _leq(c, 1) and c != 1):
                    return False
            return True
        if self.kind == "zero-set":
            try:
                return all(_is_zero(exact_value(h, m)) for h in self.exprs)
            except DomainError:
                return False
        raise AssertionError(self.kind)  # pragma: no cover

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.exprs:
            out["exprs"] = [e.text for e in self.exprs]
        if self.box is not None:
            out["box"] = [list(b) for b in self.box]
        return out


def _is_pow2(q: Fraction) -> bool:
    d = q.denominator
    return d & (d - 1) == 0


def _as_membership(m) -> Membership:
    if isinstance(m, Membership):
        return m
    if isinstance(m, str):
        return Membership(m)
    raise ValidationError(f"cannot interpret {m!r} as a membership declaration")


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class EmbeddingImage:
    source: tuple
    coords: np.ndarray


@dataclass(frozen=True, eq=False)
class DifferentialSpace:
    """(M, C) with C generated by a finite family of ambient expressions."""

    dim: int
    membership: Membership
    generators: tuple
    bound: float | None = None
    bounded: bool = False
    samples: tuple = field(default=(), repr=False)
    name: str | None = None

    @property
    def generator_map(self) -> SmoothMap:
        return SmoothMap(self.generators, self.dim)

    def contains(self, m) -> bool:
        m = _point(m)
        return len(m) == self.dim and self.membership.contains(m)

    def embed(self, m) -> EmbeddingImage:
        """Coordinates u_i = g_i(m) in [-1, 1]^N."""
        m = _point(m)
        if not self.bounded:
            raise BoundError("the generator family is not certified bounded; rescale it first")
        if not self.contains(m):
            raise ValidationError(f"{m} is not a point of the space")
        u = self.generator_map(m)
        worst = float(np.max(np.abs(u))) if u.size else 0.0
        if worst > 1.0 + BOUND_SLACK:
            raise BoundError(f"generator value {worst} exceeds 1 at {m}")
        return EmbeddingImage(m, u)

    def rescaled(self, c: float) -> "DifferentialSpace":
        """Same space with generators g / c; c is taken as a bound on sup |g|."""
        if c <= 0:
            raise ValueError("rescaling constant must be positive")
        gens = tuple(g / c for g in self.generators)
        return make_space(self.dim, self.membership, gens, bound=1.0, samples=self.samples, name=self.name)

    def to_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "membership": self.membership.to_dict(),
            "generators": [g.text for g in self.generators],
        }
        if self.bound is not None:
            out["bound"] = self.bound
        return out


def _point(m) -> tuple:
    if isinstance(m, np.ndarray):
        return tuple(float(c) for c in m.ravel())
    if isinstance(m, (tuple, list)):
        return tuple(m)
    return (m,)


def sweep_points(d: int, membership: Membership, per_axis: int = 17) -> list:
    """Exact dyadic grid points of the membership box lying in M."""
    if membership.box is not None:
        axes = [[Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(j, per_axis - 1) for j in range(per_axis)]
                for lo, hi in membership.box]
    else:
        axes = [[Fraction(-2) + Fraction(4 * j, per_axis - 1) for j in range(per_axis)]] * d
    if membership.kind == "sqrt-rational":
        axes = [[Fraction(j, per_axis + 1) for j in range(1, per_axis + 1)]] * d
    pts = []
    for p in itertools.product(*axes):
        if membership.contains(p):
            pts.append(p)
        if len(pts) >= 400:
            break
    return pts


def make_space(d: int, membership, generators, bound: float | None = None, samples=None,
               name: str | None = None) -> DifferentialSpace:
    """Validate a space declaration.

    Every generator must be defined at every sweep point of M. With a
    declared ``bound`` the boundedness flag is taken from the certificate
    (and checked on the explicit ``samples``, if any); without one it is
    decided by the sweep.
    """
    membership = _as_membership(membership)
    gens = tuple(generators)
    if not gens:
        raise ValidationError("a space needs at least one generator")
    for g in gens:
        if not isinstance(g, SmoothExpr):
            raise ValidationError(f"generator {g!r} is not an expression")
        if g.arity > d:
            raise ValidationError(f"generator {g.text} reads x_{g.arity} but the ambient dimension is {d}")
    if membership.box is not None and len(membership.box) != d:
        raise ValidationError("membership box dimension does not match the ambient dimension")
    pts = list(samples) if samples is not None else sweep_points(d, membership)
    gmap = SmoothMap(gens, d)
    worst = 0.0
    for p in pts:
        try:
            u = gmap(tuple(float(c) for c in p))
        except DomainError as exc:
            raise ValidationError(f"generator undefined at sample point {p}: {exc}") from None
        worst = max(worst, float(np.max(np.abs(u))))
    if bound is not None:
        if samples is not None and worst > bound + BOUND_SLACK:
            raise ValidationError(f"declared bound {bound} violated on samples (max |g| = {worst})")
        bounded = bound <= 1.0 + BOUND_SLACK
    else:
        bounded = worst <= 1.0 + BOUND_SLACK and bool(pts)
    return DifferentialSpace(d, membership, gens, bound, bounded, tuple(pts), name)


# ---------------------------------------------------------------------------
# dense domains


def _resolution(eps: float) -> float:
    """Accuracy targeted by the built-in samplers for a requested tolerance ``eps``."""
    return min(eps, eps * eps) / 2.0


@dataclass(frozen=True)
class DenseDomain:
    """A dense subset D of [0,1]^n with a deterministic sampler.

    Built-in kinds: ``full`` ([0,1]^n), ``rational`` (Q^n ∩ [0,1]^n) and
    ``dyadic``; ``open`` removes the boundary. Built-in samplers return a
    point within ``min(eps, eps**2)/2`` of the target, so limits of functions
    with square-root type behaviour at the boundary still settle. Custom
    domains supply ``membership``, ``sampler`` and ``face_factory``.
    """

    dim: int
    kind: str = "full"
    open: bool = False
    membership: Callable | None = field(default=None, compare=False)
    sampler: Callable | None = field(default=None, compare=False)
    face_factory: Callable | None = field(default=None, compare=False)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValidationError(f"unknown domain kind {self.kind!r}")
        if self.kind == "custom" and (self.membership is None or self.sampler is None):
            raise ValidationError("custom domains need membership and sampler callables")

    @property
    def key(self) -> tuple:
        return ("domain", self.kind, self.dim, self.open, self.name if self.kind == "custom" else None)

    def _in_range(self, c) -> bool:
        if self.open:
            return _leq(0, c) and _leq(c, 1) and c != 0 and c != 1
        return _leq(0, c) and _leq(c, 1)

    def contains(self, p) -> bool:
        p = _point(p)
        if len(p) != self.dim:
            return False
        if self.kind == "custom":
            return bool(self.membership(p))
        try:
            if not all(self._in_range(c) for c in p):
                return False
        except TypeError:
            return False
        if self.kind == "full":
            return True
        if self.kind == "rational":
            return all(_is_exact_rational(c) for c in p)
        return all(_is_exact_rational(c) and _is_pow2(Fraction(c) if not _is_sympy(c) else Fraction(str(c))) for c in p)

    def sample(self, t, eps: float) -> tuple:
        """A point p of D with |p - t|_inf <= eps."""
        t = tuple(float(c) for c in _point(t))
        if len(t) != self.dim:
            raise SamplerFailure(f"target has {len(t)} coordinates, domain has dim {self.dim}")
        if eps <= 0:
            raise SamplerFailure("resolution must be positive")
        if any(c < -eps or c > 1 + eps for c in t):
            raise SamplerFailure(f"target {t} is outside [0,1]^{self.dim}")
        if self.kind == "custom":
            p = tuple(self.sampler(t, eps))
        else:
            delta = _resolution(eps)
            near = {"full": _full_near, "rational": _rational_near, "dyadic": _dyadic_near}[self.kind]
            p = tuple(near(min(max(c, 0.0), 1.0), delta, self.open) for c in t)
        if not self.contains(p) or any(abs(float(a) - b) > eps for a, b in zip(p, t)):
            raise SamplerFailure(f"sampler could not place a point of D within {eps} of {t}")
        return p

    def face(self, i: int, alpha: int) -> "DenseDomain":
        """Dense set of the (i, alpha) face, as an (n-1)-dimensional domain."""
        if not 1 <= i <= self.dim:
            raise ValueError(f"face axis {i} out of range for dim {self.dim}")
        if self.kind == "custom":
            if self.face_factory is None:
                raise ValidationError("custom domain does not declare face-restricted samplers")
            return self.face_factory(i, alpha)
        return DenseDomain(self.dim - 1, self.kind, self.open)

    def grid(self, per_axis: int = 5) -> list:
        """Tensor grid of targets in the closed cube (floats)."""
        axis = np.linspace(0.0, 1.0, per_axis) if per_axis > 1 else np.array([0.5])
        return [tuple(float(c) for c in p) for p in itertools.product(axis, repeat=self.dim)]

    def validation_points(self, count: int = 8) -> list:
        """Exact points of D used to check that a cube maps D into M."""
        vals = _VALIDATION_VALUES[self.kind if self.kind != "custom" else "rational"]()
        if self.open:
            vals = [v for v in vals if v != 0 and v != 1]
        if self.dim == 0:
            return [()]
        pts = []
        for j in range(count):
            p = tuple(vals[(j + 3 * a) % len(vals)] for a in range(self.dim))
            if self.kind != "custom" or self.contains(p):
                pts.append(p)
        return pts

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.open:
            out["open"] = True
        return out


def _full_values():
    import sympy

    return [sympy.sqrt(2) / 2, sympy.pi / 4, sympy.sqrt(3) / 3, sympy.E / 4,
            Fraction(1, 3), sympy.pi / 5, Fraction(0), Fraction(1), sympy.sqrt(5) / 7]


def _rational_values():
    return [Fraction(1, 3), Fraction(2, 7), Fraction(5, 8), Fraction(0), Fraction(1),
            Fraction(9, 11), Fraction(1, 2), Fraction(4, 13)]


def _dyadic_values():
    return [Fraction(1, 2), Fraction(1, 4), Fraction(3, 8), Fraction(0), Fraction(1),
            Fraction(13, 16), Fraction(5, 32)]


_VALIDATION_VALUES = {"full": _full_values, "rational": _rational_values, "dyadic": _dyadic_values}


def _full_near(t: float, delta: float, open_: bool):
    if open_:
        if t <= 0.0:
            return delta
        if t >= 1.0:
            return 1.0 - delta
    return t


def _rational_near(t: float, delta: float, open_: bool) -> Fraction:
    n = max(2, math.ceil(1.0 / delta))
    q = Fraction(t).limit_denominator(n)
    if open_:
        if q <= 0:
            q = Fraction(1, n)
        elif q >= 1:
            q = 1 - Fraction(1, n)
    return q


def _dyadic_near(t: float, delta: float, open_: bool) -> Fraction:
    k = max(1, math.ceil(math.log2(1.0 / delta)))
    q = Fraction(round(t * 2**k), 2**k)
    if open_:
        if q <= 0:
            q = Fraction(1, 2**k)
        elif q >= 1:
            q = 1 - Fraction(1, 2**k)
    return q
