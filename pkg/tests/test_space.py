import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from diffspace.errors import BoundError, SamplerFailure, ValidationError
from diffspace.smoothfn import const, log, sin, var
from diffspace.space import DenseDomain, Membership, make_space

x, y = var(1), var(2)


class TestMakeSpace:
    def test_rationals(self):
        M = make_space(1, Membership("rational"), [x])
        assert M.contains((Fraction(1, 3),))
        assert not M.contains((sympy.sqrt(2),))
        assert not M.contains((0.5,))  # floats are generic reals, never certified rational

    def test_cross(self):
        M = make_space(2, Membership.zero_set([x * y]), [x, y])
        assert M.contains((Fraction(1, 2), 0))
        assert M.contains((0, sympy.pi))
        assert not M.contains((Fraction(1, 2), Fraction(1, 3)))

    def test_real_line(self):
        M = make_space(1, Membership("all"), [x])
        assert M.contains((math.pi,))
        assert not M.bounded

    def test_undefined_generator(self):
        with pytest.raises(ValidationError):
            make_space(1, Membership("all"), [log(x)])

    def test_bound_certificate(self):
        M = make_space(1, Membership("all", box=((-1, 1),)), [x], bound=1.0)
        assert M.bounded
        M2 = make_space(1, Membership("all", box=((-1, 1),)), [x], bound=3.0)
        assert not M2.bounded

    def test_sweep_decides_without_certificate(self):
        assert make_space(1, Membership("all", box=((-1, 1),)), [x / 2]).bounded
        assert not make_space(1, Membership("all"), [x]).bounded

    def test_sqrt_rationals(self):
        M = make_space(1, Membership("sqrt-rational"), [x], bound=1.0)
        assert M.contains((sympy.sqrt(Fraction(1, 2)),))
        assert not M.contains((sympy.root(2, 3) / 2,))
        assert not M.contains((0,))

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            Membership("complex")


class TestEmbed:
    def test_bounded_generator_at_zero(self):
        M = make_space(1, Membership("all"), [sin(x)], bound=1.0)
        np.testing.assert_array_equal(M.embed(0.0).coords, [0.0])

    def test_cross_half_generators(self):
        M = make_space(2, Membership.zero_set([x * y], box=((-1, 1), (-1, 1))), [x / 2, y / 2], bound=1.0)
        np.testing.assert_array_equal(M.embed((Fraction(1, 2), 0)).coords, [0.25, 0.0])

    def test_bound_violation(self):
        M = make_space(1, Membership("all"), [const(2) * x], bound=1.0, samples=[(Fraction(1, 4),)])
        with pytest.raises(BoundError):
            M.embed((1.0,))

    def test_unbounded_family_refused(self):
        M = make_space(1, Membership("all"), [x])
        with pytest.raises(BoundError):
            M.embed((0.5,))

    def test_rescaling(self):
        M = make_space(1, Membership("all", box=((-2, 2),)), [x, x * x])
        assert not M.bounded
        R = M.rescaled(4.0)
        assert R.bounded
        m = (Fraction(3, 2),)
        assert R.contains(m) == M.contains(m)
        np.testing.assert_allclose(R.embed(m).coords, M.generator_map(m) / 4.0, rtol=0, atol=0)

    def test_generator_exact(self):
        M = make_space(2, Membership("all", box=((-1, 1), (-1, 1))), [x * y, sin(x)], bound=1.0)
        m = (0.3, -0.8)
        u = M.embed(m).coords
        assert u[0] == (x * y).eval(m) and u[1] == sin(x).eval(m)


class TestSample:
    def test_full(self):
        assert DenseDomain(1).sample((0.3,), 1e-3) == (0.3,)

    def test_rational_near_inverse_pi(self):
        D = DenseDomain(1, "rational")
        (p,) = D.sample((1 / math.pi,), 1e-4)
        assert isinstance(p, Fraction)
        assert abs(float(p) - 1 / math.pi) <= 1e-4

    def test_rational_boundary(self):
        assert DenseDomain(1, "rational").sample((0.0,), 1e-6) == (0,)
        (p,) = DenseDomain(1, "rational", open=True).sample((0.0,), 1e-6)
        assert 0 < p <= 1e-6

    def test_outside_cube(self):
        with pytest.raises(SamplerFailure):
            DenseDomain(1, "rational").sample((2.0,), 1e-3)

    def test_custom_needs_faces(self):
        D = DenseDomain(1, "custom", membership=lambda p: True, sampler=lambda t, e: t)
        with pytest.raises(ValidationError):
            D.face(1, 0)

    def test_dyadic_grid_density(self):
        for kind in ("rational", "dyadic"):
            D = DenseDomain(2, kind, open=True)
            for k in range(1, 12):
                for t in [(j / 8, 1 - j / 8) for j in range(9)]:
                    p = D.sample(t, 2.0**-k)
                    assert D.contains(p)


@settings(max_examples=500, deadline=None)
@given(st.sampled_from(["full", "rational", "dyadic"]), st.booleans(),
       st.lists(st.floats(0, 1), min_size=1, max_size=3), st.integers(0, 20))
def test_sampler_contract(kind, is_open, t, k):
    D = DenseDomain(len(t), kind, open=is_open)
    eps = 2.0**-k
    p = D.sample(tuple(t), eps)
    assert D.contains(p)
    assert max(abs(float(a) - b) for a, b in zip(p, t)) <= eps


def test_sampler_contract_seeded_sweep():
    rng = np.random.default_rng(7)
    domains = [DenseDomain(2, kind, open=o) for kind in ("full", "rational", "dyadic") for o in (False, True)]
    for j in range(10_000):
        D = domains[j % len(domains)]
        t = tuple(rng.uniform(0, 1, 2))
        eps = 2.0 ** -int(rng.integers(0, 21))
        p = D.sample(t, eps)
        assert D.contains(p)
        assert max(abs(float(a) - b) for a, b in zip(p, t)) <= eps
