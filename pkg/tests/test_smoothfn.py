import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from diffspace.errors import DomainError, ParseError
from diffspace.smoothfn import (
    SmoothMap,
    compose,
    const,
    cos,
    diff,
    evaluate,
    exp,
    jacobian,
    log,
    mixed_partial,
    normalize,
    parse_expr,
    partial,
    sin,
    sqrt,
    substitute,
    var,
)
from diffspace.space import to_sympy

x, y, z = var(1), var(2), var(3)


def central_difference(e, p, i, h=1e-5):
    p = np.asarray(p, dtype=float)
    step = np.zeros_like(p)
    step[i - 1] = h
    return (evaluate(e, tuple(p + step)) - evaluate(e, tuple(p - step))) / (2 * h)


class TestEval:
    def test_zero_case(self):
        assert evaluate(x**2 + y, (0, 0)) == 0

    def test_product(self):
        assert evaluate(x * y, (2, 3)) == 6

    def test_sqrt_outside_domain(self):
        with pytest.raises(DomainError):
            evaluate(sqrt(x), (-1,))

    def test_division_by_zero(self):
        with pytest.raises(DomainError):
            evaluate(x / y, (1, 0))

    def test_log_nonpositive(self):
        with pytest.raises(DomainError):
            evaluate(log(x), (0,))

    def test_batch(self):
        t = np.linspace(0, 1, 7)
        np.testing.assert_allclose(evaluate(x * x + 1, (t,)), t**2 + 1)


class TestPartial:
    def test_identity(self):
        assert partial(x, (5,), 1) == 1

    def test_x2y_against_finite_difference(self):
        e = x**2 * y
        assert partial(e, (2, 3), 1) == pytest.approx(12)
        assert abs(partial(e, (2, 3), 1) - central_difference(e, (2, 3), 1)) <= 1e-6

    def test_sin(self):
        assert partial(sin(x), (0,), 1) == pytest.approx(central_difference(sin(x), (0,), 1), abs=1e-9)
        assert partial(sin(x), (0,), 1) == 1

    def test_sqrt_at_zero_needs_derivative(self):
        assert evaluate(sqrt(x), (0,)) == 0
        with pytest.raises(DomainError):
            partial(sqrt(x), (0,), 1)


class TestMixedPartial:
    def test_wuv(self):
        assert mixed_partial(x * y * z, (3, 0, 0), (2, 3)) == 3

    def test_affine(self):
        assert mixed_partial(x + y, (0, 0), (1, 2)) == 0

    def test_u2v(self):
        assert mixed_partial(x**2 * y, (1, 1), (1, 2)) == 2

    def test_indices_must_be_distinct(self):
        with pytest.raises(ValueError):
            mixed_partial(x * y, (1, 1), (1, 1))

    def test_against_sympy(self):
        e = exp(x * y) * sin(z) + x**3 * z
        u = sympy.symbols("u1:4")
        ref = sympy.diff(to_sympy(e, u), u[0], u[2])
        p = (0.3, -0.7, 1.1)
        expect = float(ref.subs(dict(zip(u, p))))
        assert mixed_partial(e, p, (1, 3)) == pytest.approx(expect, rel=1e-12)


class TestJacobian:
    def test_identity(self):
        np.testing.assert_array_equal(jacobian(SmoothMap.identity(2), (0.4, -3.0)), np.eye(2))

    def test_column(self):
        m = SmoothMap.of([x**2, x])
        np.testing.assert_allclose(jacobian(m, (3,)), [[6], [1]])

    def test_symbolic(self):
        m = SmoothMap.of([x * y, x + y])
        np.testing.assert_allclose(jacobian(m, (1, 2)), [[2, 1], [1, 1]])


class TestText:
    @pytest.mark.parametrize("text", [
        "(mul (var 1) (var 2))",
        "(add (pow (var 1) 2) (sin (var 2)))",
        "(diff (mul (var 1) (var 2)) 1 2)",
        "(compose (mul (var 1) (var 2)) (sin (var 1)) (const 2.5))",
    ])
    def test_round_trip(self, text):
        e = parse_expr(text)
        assert parse_expr(e.text) == e

    def test_sugar(self):
        assert evaluate(parse_expr("(sub (var 1) 1/2)"), (2,)) == 1.5

    @pytest.mark.parametrize("bad", ["", "(var 1", "(frob (var 1))", "(pow (var 1) 1.5)", ")"])
    def test_malformed(self, bad):
        with pytest.raises(ParseError):
            parse_expr(bad)


class TestNormalize:
    def test_like_terms(self):
        assert normalize(x + y - x) == normalize(y)

    def test_commutation(self):
        assert normalize(x * y) == normalize(y * x)

    def test_dd_cancels(self):
        e = diff(x * y, 1, 2) - diff(y * x, 2, 1)
        assert normalize(e) == const(0)

    def test_substitute(self):
        e = substitute(x * y, {2: const(3)})
        assert evaluate(e, (2,)) == 6


def test_compose_chain_rule():
    e = compose(sin(x) * y, [x * x, exp(x)])
    p = (0.7,)
    assert partial(e, p, 1) == pytest.approx(central_difference(e, p, 1), rel=1e-8)


# --- properties -----------------------------------------------------------

coeffs = st.floats(-2, 2, allow_nan=False)


@st.composite
def polynomials(draw):
    dim = draw(st.integers(1, 4))
    terms = draw(st.lists(st.tuples(coeffs, st.lists(st.integers(0, 2), min_size=dim, max_size=dim)),
                          min_size=1, max_size=5))
    e = const(0)
    for c, exps in terms:
        mono = const(c)
        for i, p in enumerate(exps[:dim], start=1):
            if sum(exps[:i]) <= 4 and p:
                mono = mono * var(i) ** p
        e = e + mono
    point = draw(st.lists(st.floats(-1.5, 1.5), min_size=dim, max_size=dim))
    return e, dim, tuple(point)


@settings(max_examples=1000, deadline=None)
@given(polynomials(), st.data())
def test_partial_matches_finite_difference(case, data):
    e, dim, p = case
    i = data.draw(st.integers(1, dim))
    value = evaluate(e, p)
    assert abs(partial(e, p, i) - central_difference(e, p, i)) <= 1e-5 * (1 + abs(value))


@settings(max_examples=200, deadline=None)
@given(polynomials())
def test_mixed_partials_symmetric(case):
    e, dim, p = case
    if dim < 2:
        return
    assert mixed_partial(e, p, (1, 2)) == mixed_partial(e, p, (2, 1))


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_mixed_partials_symmetric_transcendental(a, u, v):
    e = exp(a * x * y) + sin(x) * cos(y)
    assert abs(mixed_partial(e, (u, v), (1, 2)) - mixed_partial(e, (u, v), (2, 1))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(polynomials(), polynomials(), st.floats(-3, 3))
def test_partial_linear(c1, c2, a):
    e1, d1, p1 = c1
    e2, d2, _ = c2
    dim = max(d1, d2)
    p = tuple(list(p1) + [0.5] * (dim - len(p1)))
    combo = const(a) * e1 + e2
    lhs = partial(combo, p, 1)
    rhs = a * partial(e1, p, 1) + partial(e2, p, 1)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@settings(max_examples=200, deadline=None)
@given(polynomials())
def test_normalize_preserves_value(case):
    e, _, p = case
    assert normalize(e).eval(p) == pytest.approx(e.eval(p), rel=1e-12, abs=1e-12)
    assert normalize(normalize(e)) == normalize(e)
