"""Skew-symmetric k-forms in sorted multi-index representation.

Two flavours share one term algebra:

* :class:`AmbientForm` -- a form on R^N in the coordinates u_1..u_N, with
  coefficient expressions in those coordinates;
* :class:`PointForm` -- a point form on a space presented in R^d, written
  as ``sum c_I(x) dα_{i_1} ∧ ... ∧ dα_{i_k}`` over a family of functions α
  (by default the space generators). ``dα(v) = ∇α(m)·v``.

The wedge of 1-forms is evaluated as ``det[dα_{i_r}(v_s)]`` with no
factorial normalization, so ``∫ dx∧dy`` over the unit square is 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BoundError, DimensionMismatch, HomogeneityError, ValidationError
from .smoothfn import (
    ONE,
    ZERO,
    SmoothExpr,
    SmoothMap,
    compose,
    const,
    diff,
    normalize,
    parse_expr,
    substitute,
    var,
    variables,
)


def _coerce_expr(c) -> SmoothExpr:
    if isinstance(c, SmoothExpr):
        return c
    if isinstance(c, str):
        return parse_expr(c)
    return const(c)


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if it has repeated entries."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _canonical_terms(degree: int, raw, dim: int | None) -> tuple:
    buckets: dict = {}
    for coeff, index in raw:
        index = tuple(int(i) for i in index)
        if len(index) != degree:
            raise ValidationError(f"term index {index} does not match degree {degree}")
        if dim is not None and any(i < 1 or i > dim for i in index):
            raise ValidationError(f"term index {index} out of range 1..{dim}")
        sign = perm_sign(index)
        if sign == 0:
            continue
        c = _coerce_expr(coeff)
        buckets.setdefault(tuple(sorted(index)), []).append(c if sign > 0 else -c)
    terms = []
    for index in sorted(buckets):
        parts = buckets[index]
        c = normalize(parts[0] if len(parts) == 1 else SmoothExpr("add", tuple(parts)))
        if c != ZERO:
            terms.append((c, index))
    return tuple(terms)


def _det(mat: np.ndarray) -> float:
    k = mat.shape[0]
    if k == 0:
        return 1.0
    return float(np.linalg.det(mat)) if k > 2 else (
        float(mat[0, 0]) if k == 1 else float(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])
    )


def det_expr(rows: Sequence[Sequence[SmoothExpr]]) -> SmoothExpr:
    """Leibniz expansion of a small determinant of expressions."""
    k = len(rows)
    if k == 0:
        return ONE
    parts = []
    for perm in itertools.permutations(range(k)):
        s = perm_sign(perm)
        prod = rows[0][perm[0]]
        for r in range(1, k):
            prod = prod * rows[r][perm[r]]
        parts.append(prod if s > 0 else -prod)
    return normalize(SmoothExpr("add", tuple(parts)) if len(parts) > 1 else parts[0])


class _FormAlgebra:
    """Term algebra shared by ambient and point forms."""

    degree: int
    terms: tuple

    def _like(self, degree: int, terms) -> "_FormAlgebra":
        raise NotImplementedError

    def _check_compatible(self, other):
        if type(self) is not type(other) or self.frame_key != other.frame_key:
            raise DimensionMismatch("forms live on different spaces or frames")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, index) -> SmoothExpr:
        index = tuple(index)
        for c, i in self.terms:
            if i == index:
                return c
        return ZERO

    def __add__(self, other):
        self._check_compatible(other)
        if self.degree != other.degree:
            raise DimensionMismatch("cannot add forms of different degree")
        return self._like(self.degree, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "_FormAlgebra":
        c = _coerce_expr(c)
        return self._like(self.degree, [(c * t, i) for t, i in self.terms])

    def wedge(self, other) -> "_FormAlgebra":
        self._check_compatible(other)
        raw = [(a * b, ia + ib) for a, ia in self.terms for b, ib in other.terms]
        return self._like(self.degree + other.degree, raw)

    def __xor__(self, other):
        return self.wedge(other)

    def term_list(self) -> list:
        return [{"coeff": c.text, "index": list(i)} for c, i in self.terms]

    def _eval_with(self, m, grads: np.ndarray, vectors) -> float:
        vectors = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
        if len(vectors) != self.degree:
            raise ValidationError(f"a {self.degree}-form needs {self.degree} vectors, got {len(vectors)}")
        if vectors and grads.size:
            dual = grads @ np.stack(vectors, axis=1)  # rows: dα_i, cols: vectors
        else:
            dual = np.zeros((grads.shape[0], len(vectors)))
        total = 0.0
        for c, index in self.terms:
            rows = dual[[i - 1 for i in index], :] if index else np.zeros((0, 0))
            total += c.eval(m) * _det(rows)
        return total


@dataclass(frozen=True, eq=False)
class AmbientForm(_FormAlgebra):
    """k-form on R^N in coordinates u_1..u_N."""

    dim: int
    degree: int
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _canonical_terms(self.degree, self.terms, self.dim))
        for c, _ in self.terms:
            if c.arity > self.dim:
                raise ValidationError(f"coefficient {c.text} reads beyond u_{self.dim}")

    @property
    def frame_key(self):
        return ("ambient", self.dim)

    def _like(self, degree, terms):
        return AmbientForm(self.dim, degree, tuple(terms))

    def eval(self, u, vectors) -> float:
        return self._eval_with(u, np.eye(self.dim), vectors)

    def __repr__(self):
        body = " + ".join(f"{c.text}*du{list(i)}" for c, i in self.terms) or "0"
        return f"AmbientForm[{self.degree}]({body})"


@dataclass(frozen=True, eq=False)
class PointForm(_FormAlgebra):
    """Point k-form ``sum c_I dα_I`` over a function family on a space in R^d."""

    family: tuple
    dim: int
    degree: int
    terms: tuple = ()
    space: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        fam = tuple(_coerce_expr(a) for a in self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "terms", _canonical_terms(self.degree, self.terms, len(fam)))
        for c, _ in self.terms:
            if c.arity > self.dim:
                raise ValidationError(f"coefficient {c.text} reads beyond x_{self.dim}")

    @property
    def frame_key(self):
        return ("point", self.dim, tuple(a.text for a in self.family))

    @property
    def family_map(self) -> SmoothMap:
        return SmoothMap(self.family, self.dim)

    def _like(self, degree, terms):
        return PointForm(self.family, self.dim, degree, tuple(terms), self.space)

    def eval(self, m, vectors) -> float:
        m = tuple(float(c) for c in np.ravel(m)) if not isinstance(m, tuple) else m
        grads = self.family_map.jacobian(m) if self.family else np.zeros((0, self.dim))
        return self._eval_with(m, grads, vectors)

    def __repr__(self):
        fam = [a.text for a in self.family]
        body = " + ".join(f"{c.text}*dα{list(i)}" for c, i in self.terms) or "0"
        return f"PointForm[{self.degree}]({body}; α={fam})"


def point_form(space, terms, degree: int | None = None) -> PointForm:
    """Point form over the generators of ``space`` from (coeff, index) pairs."""
    terms = [(c, tuple(i)) for c, i in terms]
    if degree is None:
        if not terms:
            raise ValidationError("degree is required for an empty form")
        degree = len(terms[0][1])
    return PointForm(space.generators, space.dim, degree, tuple(terms), space)


def ambient_form(dim: int, terms, degree: int | None = None) -> AmbientForm:
    terms = [(c, tuple(i)) for c, i in terms]
    if degree is None:
        if not terms:
            raise ValidationError("degree is required for an empty form")
        degree = len(terms[0][1])
    return AmbientForm(dim, degree, tuple(terms))


def forms_from_list(items, degree: int) -> list:
    return [(_coerce_expr(t["coeff"]), tuple(t["index"])) for t in items]


def eval_form(form, m, vectors) -> float:
    return form.eval(m, vectors)


def wedge(a, b):
    return a.wedge(b)


# ---------------------------------------------------------------------------
# exterior derivative, restriction, pullback


def exterior_derivative(form: AmbientForm) -> AmbientForm:
    """``sum_I sum_j ∂c_I/∂u_j du_j ∧ du_I``, coefficient-wise."""
    raw = []
    for c, index in form.terms:
        for j in range(1, form.dim + 1):
            if j in index:
                continue
            raw.append((diff(c, j), (j,) + index))
    return AmbientForm(form.dim, form.degree + 1, tuple(raw))


def restrict(form: AmbientForm, space) -> PointForm:
    """Pull an ambient form on [-1,1]^N back along the generator embedding."""
    if not space.bounded:
        raise BoundError("restriction needs a bounded generator family")
    if form.dim != len(space.generators):
        raise DimensionMismatch(
            f"ambient form lives on R^{form.dim}, space has {len(space.generators)} generators"
        )
    raw = [(compose(c, space.generators), index) for c, index in form.terms]
    return PointForm(space.generators, space.dim, form.degree, tuple(raw), space)


def pullback_form(form: AmbientForm, fmap: SmoothMap) -> AmbientForm:
    """Pullback along ``fmap: R^n -> R^N`` as a form on R^n (expression level)."""
    if fmap.output_dim != form.dim:
        raise DimensionMismatch(f"map lands in R^{fmap.output_dim}, form lives on R^{form.dim}")
    n, k = fmap.input_dim, form.degree
    grads = [[normalize(diff(fc, j)) for j in range(1, n + 1)] for fc in fmap.components]
    raw = []
    for c, index in form.terms:
        pulled = compose(c, fmap.components)
        for axes in itertools.combinations(range(1, n + 1), k):
            rows = [[grads[i - 1][s - 1] for s in axes] for i in index]
            raw.append((pulled * det_expr(rows), axes))
    return AmbientForm(n, k, tuple(raw))


def eval_pullback(form, fmap: SmoothMap, p, vectors) -> float:
    """``(F^* form)_p(v_1..v_k) = form_{F(p)}(JF v_1, ..., JF v_k)``."""
    image = tuple(float(c) for c in fmap(p))
    jac = fmap.jacobian(p)
    pushed = [jac @ np.asarray(v, dtype=float) for v in vectors]
    return form.eval(image, pushed)


def factorize(form: PointForm):
    """Write ``form = F^* eta`` with F a tuple of functions and eta on R^len(F).

    F lists the ambient coordinates read by the coefficients followed by the
    family members used in the indices, with structural duplicates merged.
    """
    coords = sorted(set().union(*[c.free_vars for c, _ in form.terms]) if form.terms else set())
    used = sorted({i for _, index in form.terms for i in index})
    comps: list = []
    slot: dict = {}

    def place(e: SmoothExpr) -> int:
        e = normalize(e)
        if e.text not in slot:
            comps.append(e)
            slot[e.text] = len(comps)
        return slot[e.text]

    coord_pos = {j: place(var(j)) for j in coords}
    gen_pos = {i: place(form.family[i - 1]) for i in used}
    fmap = SmoothMap(tuple(comps), form.dim)
    raw = []
    for c, index in form.terms:
        moved = normalize(substitute(c, {j: var(coord_pos[j]) for j in coords}))
        raw.append((moved, tuple(gen_pos[i] for i in index)))
    return fmap, AmbientForm(len(comps), form.degree, tuple(raw))


# ---------------------------------------------------------------------------
# sigma-presented forms


@dataclass(frozen=True, eq=False)
class SigmaPresentedForm:
    """``ω(v_1..v_k) = σ(β⁰(m), dβ¹(v_1), ..., dβᵏ(v_k))``.

    ``sigma`` reads its variables in blocks: first the ``len(base)``
    base values, then one block per slot holding ``dβ^r_j(v_r)``.
    """

    dim: int
    base: tuple
    slots: tuple
    sigma: SmoothExpr

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(_coerce_expr(b) for b in self.base))
        object.__setattr__(self, "slots", tuple(tuple(_coerce_expr(b) for b in s) for s in self.slots))
        object.__setattr__(self, "sigma", _coerce_expr(self.sigma))
        if self.sigma.arity > self.total_args:
            raise ValidationError(f"sigma reads {self.sigma.arity} arguments, only {self.total_args} supplied")

    @property
    def degree(self) -> int:
        return len(self.slots)

    @property
    def block_sizes(self) -> tuple:
        return (len(self.base),) + tuple(len(s) for s in self.slots)

    @property
    def total_args(self) -> int:
        return sum(self.block_sizes)

    def slot_offset(self, r: int) -> int:
        """Index of the variable before slot r's block (r is 1-based)."""
        return sum(self.block_sizes[:r])

    def arguments(self, m, vectors) -> list:
        m = tuple(m)
        args = [b.eval(m) for b in self.base]
        for funcs, v in zip(self.slots, vectors):
            if funcs:
                grads = SmoothMap(funcs, self.dim).jacobian(m)
                args.extend(float(x) for x in grads @ np.asarray(v, dtype=float))
        return args

    def eval(self, m, vectors) -> float:
        if len(vectors) != self.degree:
            raise ValidationError(f"need {self.degree} vectors")
        return self.sigma.eval(self.arguments(m, vectors))


@dataclass
class HomogeneityResult:
    passed: bool
    max_deviation: float
    witness: dict | None = None

    def __bool__(self):
        return self.passed


_T_PROBES = (1.25, -0.25, 0.5)


def homogeneity_check(s: SigmaPresentedForm, samples: int = 32, seed: int = 0,
                      rtol: float = 1e-9) -> HomogeneityResult:
    """Test σ(w, t₁u¹, ..., t_k uᵏ) = t₁⋯t_k σ(w, u¹, ..., uᵏ) on random points.

    Scale factors are drawn from (-0.5, 1.5); the first few samples use the
    fixed factors 1.25, -0.25, 0.5 in rotation so each block is scaled away
    from 1 deterministically.
    """
    rng = np.random.default_rng(seed)
    sizes = s.block_sizes
    worst = 0.0
    for n in range(samples):
        w = rng.uniform(-1.0, 1.0, sizes[0])
        blocks = [rng.uniform(-1.0, 1.0, size) for size in sizes[1:]]
        if n < len(_T_PROBES) * max(1, s.degree):
            ts = np.ones(s.degree)
            if s.degree:
                ts[n % s.degree] = _T_PROBES[(n // max(1, s.degree)) % len(_T_PROBES)]
        else:
            ts = rng.uniform(-0.5, 1.5, s.degree)
        base_args = list(w) + [x for b in blocks for x in b]
        scaled_args = list(w) + [t * x for t, b in zip(ts, blocks) for x in b]
        plain = s.sigma.eval(base_args) if base_args else s.sigma.eval(())
        scaled = s.sigma.eval(scaled_args) if scaled_args else s.sigma.eval(())
        expected = float(np.prod(ts)) * plain
        dev = abs(scaled - expected)
        worst = max(worst, dev)
        if dev > rtol * (1.0 + abs(expected)):
            witness = {
                "w": w.tolist(),
                "u": [b.tolist() for b in blocks],
                "t": ts.tolist(),
                "scaled": scaled,
                "expected": expected,
            }
            return HomogeneityResult(False, dev, witness)
    return HomogeneityResult(True, worst)


def slot_family(s: SigmaPresentedForm):
    """Unique slot functions (structural) and, per slot, their family positions."""
    family: list = []
    pos: dict = {}
    slot_pos = []
    for funcs in s.slots:
        row = []
        for f in funcs:
            f = normalize(f)
            if f.text not in pos:
                family.append(f)
                pos[f.text] = len(family)
            row.append(pos[f.text])
        slot_pos.append(row)
    return tuple(family), slot_pos


def canonical_tensor(s: SigmaPresentedForm):
    """General k-tensor coefficients ``∂ᵏσ/∂u¹_{j₁}⋯∂uᵏ_{j_k}(β⁰, 0, ..., 0)``.

    Returns ``(family, {family index tuple: coefficient})``; index tuples
    may repeat entries and are not sorted.
    """
    family, slot_pos = slot_family(s)
    inner = list(s.base) + [ZERO] * (s.total_args - len(s.base))
    tensor: dict = {}
    ranges = [range(len(funcs)) for funcs in s.slots]
    for js in itertools.product(*ranges):
        sig_vars = [s.slot_offset(r + 1) + j + 1 for r, j in enumerate(js)]
        coeff = normalize(compose(diff(s.sigma, *sig_vars), inner))
        if coeff == ZERO:
            continue
        key = tuple(slot_pos[r][j] for r, j in enumerate(js))
        tensor[key] = normalize(tensor[key] + coeff) if key in tensor else coeff
    return family, tensor


def canonicalize(s: SigmaPresentedForm, check: bool = True, seed: int = 0) -> PointForm:
    """Skew-symmetric canonical form of a multi-homogeneous σ-presentation."""
    if check:
        result = homogeneity_check(s, seed=seed)
        if not result.passed:
            err = HomogeneityError("sigma is not multi-homogeneous in its slot blocks")
            err.witness = result.witness
            raise err
    family, tensor = canonical_tensor(s)
    k = s.degree
    weight = 1.0 / math.factorial(k)
    raw = [(const(weight) * c, key) for key, c in tensor.items()]
    return PointForm(family, s.dim, k, tuple(raw))


def as_sigma(form: PointForm) -> SigmaPresentedForm:
    """Present a canonical point form as σ over base = coordinates, slots = family."""
    d, k, nf = form.dim, form.degree, len(form.family)
    parts = []
    for c, index in form.terms:
        for perm in itertools.permutations(range(k)):
            sgn = perm_sign(perm)
            prod = c
            for s_ in range(k):
                prod = prod * var(d + s_ * nf + index[perm[s_]])
            parts.append(prod if sgn > 0 else -prod)
    if not parts:
        sigma = ZERO
    else:
        sigma = normalize(SmoothExpr("add", tuple(parts)) if len(parts) > 1 else parts[0])
    return SigmaPresentedForm(d, variables(d), tuple(form.family for _ in range(k)), sigma)
