import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffspace.errors import HomogeneityError
from diffspace.forms import (
    SigmaPresentedForm,
    ambient_form,
    as_sigma,
    canonical_tensor,
    canonicalize,
    eval_form,
    eval_pullback,
    exterior_derivative,
    factorize,
    homogeneity_check,
    point_form,
    pullback_form,
    restrict,
    wedge,
)
from diffspace.smoothfn import ONE, ZERO, SmoothMap, const, normalize, sin, var
from diffspace.space import Membership, make_space
from diffspace.suites import random_ambient_form, random_sigma_form

x, y, z = var(1), var(2), var(3)
E = np.eye(3)

R1 = make_space(1, Membership("all", box=((-1, 1),)), [x], bound=1.0)
R2 = make_space(2, Membership("all", box=((-1, 1), (-1, 1))), [x, y], bound=1.0)
R3 = make_space(3, Membership("all"), [x, y, z])
CROSS = make_space(2, Membership.zero_set([x * y], box=((-1, 1), (-1, 1))), [x, y], bound=1.0)


class TestWedge:
    def test_antisymmetry(self):
        dxdy = wedge(point_form(R2, [(ONE, (1,))]), point_form(R2, [(ONE, (2,))]))
        assert eval_form(dxdy, (0, 0), [E[0, :2], E[1, :2]]) == 1
        assert eval_form(dxdy, (0, 0), [E[1, :2], E[0, :2]]) == -1

    def test_repeated_index(self):
        dx = point_form(R2, [(ONE, (1,))])
        assert wedge(dx, dx).is_zero

    def test_hand_product(self):
        a = point_form(R3, [(x, (2,))])
        b = point_form(R3, [(ONE, (3,))])
        w = wedge(a, b)
        assert w.terms == ((normalize(x), (2, 3)),)

    def test_sign_bookkeeping(self):
        dy = point_form(R3, [(ONE, (2,))])
        dx = point_form(R3, [(ONE, (1,))])
        assert wedge(dy, dx).terms == ((normalize(const(-1)), (1, 2)),)


class TestEvalForm:
    def test_dx_real_line(self):
        assert eval_form(point_form(R1, [(ONE, (1,))]), (0.3,), [[1.0]]) == 1

    def test_x_dy(self):
        assert eval_form(point_form(R3, [(x, (2,))]), (2, 0, 0), [E[1]]) == 2

    def test_generator_family(self):
        S = make_space(2, Membership("all"), [x * y, sin(x)])
        w = point_form(S, [(ONE, (1,))])  # d(xy)
        assert eval_form(w, (2.0, 3.0), [[1.0, 0.0]]) == pytest.approx(3.0)


class TestExteriorDerivative:
    def test_u1_du2(self):
        assert exterior_derivative(ambient_form(2, [(x, (2,))])).terms == ((ONE, (1, 2)),)

    def test_rotation_form(self):
        d = exterior_derivative(ambient_form(2, [(x, (2,)), (-y, (1,))]))
        assert d.terms == ((normalize(const(2)), (1, 2)),)

    def test_constant_coefficients(self):
        assert exterior_derivative(ambient_form(2, [(ONE, (1,))])).is_zero

    def test_dd_structural(self):
        f = ambient_form(3, [(x * y * sin(z), (1,)), (x**3, (3,))])
        assert exterior_derivative(exterior_derivative(f)).is_zero


class TestRestrict:
    def test_identity_embedding(self):
        r = restrict(ambient_form(1, [(ONE, (1,))]), R1)
        assert eval_form(r, (0.5,), [[1.0]]) == 1

    def test_cross_origin(self):
        r = restrict(ambient_form(2, [(ONE, (1, 2))]), CROSS)
        assert eval_form(r, (0, 0), [E[0, :2], E[1, :2]]) == 1

    def test_zero(self):
        assert restrict(ambient_form(2, [], 1), R2).is_zero


class TestFactorize:
    def test_x_dy(self):
        F, eta = factorize(point_form(R2, [(x, (2,))]))
        assert F.components == (x, y)
        assert eta.terms == ((var(1), (2,)),)

    def test_dx(self):
        F, eta = factorize(point_form(R2, [(ONE, (1,))]))
        assert F.components == (x,)
        assert eta.terms == ((ONE, (1,)),)

    def test_zero(self):
        _, eta = factorize(point_form(R2, [], 1))
        assert eta.is_zero

    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        S = make_space(3, Membership("all"), [x, y * z, sin(x) + y])
        amb = random_ambient_form(rng, 3, 2)
        w = point_form(S, [(c, i) for c, i in amb.terms], 2)
        F, eta = factorize(w)
        for _ in range(100):
            m = tuple(rng.uniform(-1, 1, 3))
            vs = [rng.uniform(-1, 1, 3) for _ in range(2)]
            assert abs(eval_pullback(eta, F, m, vs) - eval_form(w, m, vs)) <= 1e-10


class TestHomogeneity:
    def test_multilinear(self):
        s = SigmaPresentedForm(1, (x,), ((x,), (x,)), var(1) * var(2) * var(3))
        assert homogeneity_check(s).passed

    def test_square_single_block(self):
        s = SigmaPresentedForm(1, (), ((x,),), var(1) ** 2)
        res = homogeneity_check(s)
        assert not res.passed
        # scaling u by 1.25 gives 1.5625 u^2, not 1.25 u^2
        assert res.witness["t"] == [1.25]
        assert res.witness["scaled"] == pytest.approx(1.25**2 / 1.25 * res.witness["expected"])

    def test_sum_of_blocks(self):
        s = SigmaPresentedForm(1, (), ((x,), (x,)), var(1) + var(2))
        assert not homogeneity_check(s).passed

    def test_canonicalize_rejects(self):
        s = SigmaPresentedForm(1, (), ((x,),), var(1) ** 2)
        with pytest.raises(HomogeneityError) as info:
            canonicalize(s)
        assert info.value.witness is not None


class TestCanonicalize:
    def test_wuv(self):
        s = SigmaPresentedForm(1, (x,), ((x,), (x,)), var(1) * var(2) * var(3))
        _, tensor = canonical_tensor(s)
        assert list(tensor) == [(1, 1)]
        assert tensor[(1, 1)].eval((0.7,)) == pytest.approx(0.7)
        assert canonicalize(s).is_zero

    def test_determinant(self):
        sigma = var(1) * var(4) - var(2) * var(3)
        s = SigmaPresentedForm(2, (), ((x, y), (x, y)), sigma)
        w = canonicalize(s)
        assert [i for _, i in w.terms] == [(1, 2)]
        assert w.terms[0][0].eval((0.2, 0.9)) == pytest.approx(1.0)
        assert eval_form(w, (0.1, 0.1), [E[0, :2], E[1, :2]]) == pytest.approx(1.0)

    def test_zero_sigma(self):
        s = SigmaPresentedForm(2, (x,), ((x, y),), ZERO)
        assert canonicalize(s).is_zero

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_sigma(self, seed):
        s = random_sigma_form(seed)
        w = canonicalize(s)
        rng = np.random.default_rng(seed)
        for _ in range(10):
            m = tuple(rng.uniform(-1, 1, s.dim))
            vs = [rng.uniform(-1, 1, s.dim) for _ in range(s.degree)]
            assert w.eval(m, vs) == pytest.approx(s.eval(m, vs), abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent_in_value(self, seed):
        w = canonicalize(random_sigma_form(seed))
        w2 = canonicalize(as_sigma(w))
        rng = np.random.default_rng(100 + seed)
        for _ in range(10):
            m = tuple(rng.uniform(-1, 1, w.dim))
            vs = [rng.uniform(-1, 1, w.dim) for _ in range(w.degree)]
            assert abs(w2.eval(m, vs) - w.eval(m, vs)) <= 1e-10


def test_pullback_form_matches_pointwise():
    F = SmoothMap.of([x * x, x * y, sin(y)])
    chi = ambient_form(3, [(z, (1, 2)), (x * y, (2, 3))])
    pulled = pullback_form(chi, F)
    p = (0.3, 0.8)
    vs = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    assert pulled.eval(p, vs) == pytest.approx(eval_pullback(chi, F, p, vs), rel=1e-12)


# --- properties -----------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_alternation(seed, k):
    rng = np.random.default_rng(seed)
    form = random_ambient_form(rng, 4, k)
    m = tuple(rng.uniform(-1, 1, 4))
    vs = [rng.uniform(-1, 1, 4) for _ in range(k)]
    base = form.eval(m, vs)
    for a, b in itertools.combinations(range(k), 2):
        swapped = list(vs)
        swapped[a], swapped[b] = swapped[b], swapped[a]
        assert form.eval(m, swapped) == pytest.approx(-base, rel=1e-12, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_multilinear_in_each_slot(seed):
    rng = np.random.default_rng(seed)
    form = random_ambient_form(rng, 3, 2)
    m = tuple(rng.uniform(-1, 1, 3))
    u, v, w = (rng.uniform(-1, 1, 3) for _ in range(3))
    a = float(rng.uniform(-2, 2))
    lhs = form.eval(m, [a * u + w, v])
    rhs = a * form.eval(m, [u, v]) + form.eval(m, [w, v])
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_wedge_degree_and_factorial_convention():
    k = 3
    dxs = [point_form(R3, [(ONE, (i,))]) for i in (1, 2, 3)]
    top = wedge(wedge(dxs[0], dxs[1]), dxs[2])
    assert top.degree == k
    assert eval_form(top, (0, 0, 0), list(E)) == 1  # det convention, no 1/k!
    assert math.factorial(k) == 6
