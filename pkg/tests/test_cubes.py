import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffspace.cubes import (
    ExtensionConfig,
    ExtendedMap,
    cube,
    extend,
    extendability_report,
    face,
    face_insert,
    identity_cube,
    partition_certificate,
    pullback,
)
from diffspace.errors import ExtensionRequired, SamplerFailure
from diffspace.forms import ambient_form, point_form, wedge
from diffspace.smoothfn import ONE, SmoothMap, const, exp, sin, sqrt, var
from diffspace.space import DenseDomain, Membership, make_space
from diffspace.suites import random_ambient_form, random_bounded_map

x, y, z = var(1), var(2), var(3)
LINE = make_space(1, Membership("all", box=((-1, 1),)), [x], bound=1.0)
PLANE = make_space(2, Membership("all", box=((-1, 1), (-1, 1))), [x, y], bound=1.0)
QOPEN = DenseDomain(1, "rational", open=True)


class TestFace:
    def test_identity_square_left(self):
        f = face(identity_cube(2), 1, 0)
        assert f.dim == 1
        np.testing.assert_array_equal(f.map((0.3,)), [0.0, 0.3])

    def test_parabola_endpoint(self):
        f = face(cube(DenseDomain(1), [x * x]), 1, 1)
        assert f.dim == 0
        np.testing.assert_array_equal(f.map(()), [1.0])

    def test_identity_square_top(self):
        f = face(identity_cube(2), 2, 1)
        np.testing.assert_array_equal(f.map((0.6,)), [0.6, 1.0])

    def test_face_through_extension(self):
        # t*sqrt(s) / sqrt(s) is undefined on s = 0 but extends to t there
        phi = cube(DenseDomain(2, open=True), [x * sqrt(y) / sqrt(y), y])
        f = face(phi, 2, 0)
        assert isinstance(f.map, ExtendedMap)
        np.testing.assert_allclose(f.map((0.4,)), [0.4, 0.0], atol=1e-9)

    def test_face_without_extension(self):
        phi = cube(DenseDomain(2, open=True), [sin(const(1) / y), y])
        with pytest.raises(ExtensionRequired) as info:
            face(phi, 2, 0)
        assert info.value.witness is not None

    def test_axis_range(self):
        with pytest.raises(ValueError):
            face(identity_cube(2), 3, 0)


class TestPullback:
    def test_identity_dx(self):
        pb = pullback(identity_cube(1, LINE), point_form(LINE, [(ONE, (1,))]))
        np.testing.assert_array_equal(pb(np.linspace(0, 1, 5)[None, :]), np.ones(5))

    def test_parabola_x_dx(self):
        phi = cube(DenseDomain(1), [x * x], LINE)
        pb = pullback(phi, point_form(LINE, [(x, (1,))]))
        t = np.linspace(0, 1, 11)
        np.testing.assert_allclose(pb((t,)), 2 * t**3, rtol=1e-14)

    def test_identity_area(self):
        pb = pullback(identity_cube(2, PLANE), point_form(PLANE, [(ONE, (1, 2))]))
        assert pb((0.3, 0.9)) == 1

    def test_lower_degree_coefficients(self):
        phi = cube(DenseDomain(2), [x * y, y], PLANE)
        pb = pullback(phi, point_form(PLANE, [(ONE, (1,))]))
        coeffs = pb.coefficients()
        assert set(coeffs) == {(1,), (2,)}
        assert coeffs[(1,)]((0.2, 0.5)) == pytest.approx(0.5)
        assert coeffs[(2,)]((0.2, 0.5)) == pytest.approx(0.2)

    def test_reproduces_eval_form(self):
        phi = cube(DenseDomain(2), [x * x - y, x * y], PLANE)
        w = point_form(PLANE, [(x + y, (1, 2))])
        t = (0.3, 0.7)
        J = phi.map.jacobian(t)
        direct = w.eval(tuple(phi.map(t)), [J[:, 0], J[:, 1]])
        assert pullback(phi, w)(t) == pytest.approx(direct, rel=1e-12)


class TestExtend:
    def test_rational_limit_at_irrational(self):
        res = extend(lambda t: float(t[0]), DenseDomain(1, "rational"), probes=[(1 / math.pi,)])
        assert res.extended
        assert res((1 / math.pi,)) == pytest.approx(0.3183098861837907, abs=1e-12)

    def test_divergent_derivative_of_sqrt(self):
        def f(t):
            return 1 / (2 * math.sqrt(float(t[0])))

        res = extend(f, QOPEN, probes=[(0.0,)])
        assert not res.extended
        w = res.witness
        assert w["target"] == [0.0]
        vals = w["values"]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        ratios = [b / a for a, b in zip(vals, vals[1:])]
        # the sampler lands within eps^2/2 of 0, so values grow by 2 per level
        assert all(r == pytest.approx(2.0, rel=1e-6) for r in ratios)

    def test_constant(self):
        res = extend(lambda t: 3.5, QOPEN)
        assert res.extended
        assert all(c["value"] == 3.5 for c in res.certificates)

    def test_divergence_bound(self):
        res = extend(lambda t: 1 / float(t[0]) ** 2, QOPEN, probes=[(0.0,)])
        assert not res.extended
        assert res.witness["reason"] == "divergence bound exceeded"

    def test_config_overrides(self):
        cfg = ExtensionConfig(k0=2, kmax=6)
        res = extend(lambda t: float(t[0]), QOPEN, cfg, probes=[(0.0,)])
        assert res.extended
        assert res.certificates[0]["residuals"]
        assert len(res.certificates[0]["residuals"]) == 4

    def test_agrees_on_domain_points(self):
        res = extend(lambda t: float(t[0]) ** 2, DenseDomain(1, "rational"), probes=[(0.5,)])
        from fractions import Fraction

        assert res((Fraction(1, 3),)) == float(Fraction(1, 3)) ** 2

    def test_sampler_failure_propagates(self):
        with pytest.raises(SamplerFailure):
            extend(lambda t: 0.0, QOPEN, probes=[(3.0,)])


class TestExtendability:
    def test_sqrt_on_rationals(self):
        M = make_space(1, Membership("sqrt-rational"), [x], bound=1.0)
        rep = extendability_report(cube(QOPEN, [sqrt(x)], M))
        assert rep.uniform
        assert not rep.tangent
        failing = [e for e in rep.entries if e["verdict"] == "NonExtendable"]
        assert failing[0]["witness"]["target"] == [0.0]

    def test_identity_polynomial_generators(self):
        S = make_space(2, Membership("all", box=((-1, 1), (-1, 1))), [x, x * y, y**3], bound=1.0)
        rep = extendability_report(identity_cube(2, S), forms={"w": point_form(S, [(y, (1, 2))])})
        assert rep.uniform and rep.tangent and rep.forms == {"w": True}

    def test_constant_on_rationals(self):
        Q = make_space(1, Membership("rational"), [x])
        phi = cube(DenseDomain(1), [const(0.5)], Q)
        w = point_form(Q, [(exp(x), (1,))])
        rep = extendability_report(phi, forms={"w": w})
        assert rep.uniform and rep.tangent and rep.forms["w"]
        np.testing.assert_array_equal(pullback(phi, w)((np.linspace(0, 1, 4),)), np.zeros(4))

    def test_partition_certificate(self):
        gammas = [x * x, 1 - x * x]
        regions = [const(1), const(1)]
        cert = partition_certificate(identity_cube(1, LINE), regions, gammas)
        assert cert["passed"]
        bad = partition_certificate(identity_cube(1, LINE), [x, const(1)], gammas)
        assert not bad["subordinate"]


# --- properties -----------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3))
def test_pullback_linear(seed, a):
    rng = np.random.default_rng(seed)
    phi = cube(DenseDomain(2), random_bounded_map(rng, 2, 2).components, PLANE)
    w1 = random_ambient_form(rng, 2, 2)
    w2 = random_ambient_form(rng, 2, 2)
    combo = w1.scale(a) + w2
    t = tuple(rng.uniform(0, 1, (2, 20)))
    lhs = pullback(phi, combo)(t)
    rhs = a * pullback(phi, w1)(t) + pullback(phi, w2)(t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_pullback_wedge_is_determinant(seed):
    rng = np.random.default_rng(seed)
    S = make_space(3, Membership("all"), [x * y + z, sin(x), y * z * z])
    phi = cube(DenseDomain(3), random_bounded_map(rng, 3, 3).components, S)
    ds = [point_form(S, [(ONE, (i,))]) for i in (1, 2, 3)]
    top = wedge(wedge(ds[0], ds[1]), ds[2])
    t = tuple(rng.uniform(0, 1, 3))
    rows = [[pullback(phi, d).coefficient(t, (j,)) for j in (1, 2, 3)] for d in ds]
    assert pullback(phi, top)(t) == pytest.approx(np.linalg.det(np.array(rows)), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_extension_consistency(seed):
    rng = np.random.default_rng(seed)
    fmap = random_bounded_map(rng, 1, 1)
    e = fmap.components[0]
    targets = [(float(v),) for v in rng.uniform(0, 1, 5)] + [(0.0,), (1.0,)]
    res = extend(e.eval, DenseDomain(1, "rational"), probes=targets)
    assert res.extended
    for c in res.certificates:
        assert abs(c["value"] - e.eval(tuple(c["target"]))) <= 1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_face_composition_identities(n):
    grid = DenseDomain(n - 2).grid(4)
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            for a in (0, 1):
                for b in (0, 1):
                    for p in grid:
                        lhs = face_insert(face_insert(p, j - 1, b), i, a)
                        rhs = face_insert(face_insert(p, i, a), j, b)
                        assert max((abs(u - v) for u, v in zip(lhs, rhs)), default=0.0) <= 1e-12


def test_nested_faces_of_extended_map():
    phi = cube(DenseDomain(3, open=True), [x * sqrt(z) / sqrt(z), y, z])
    f = face(face(phi, 3, 0), 1, 1)
    np.testing.assert_allclose(f.map((0.25,)), [1.0, 0.25, 0.0], atol=1e-9)


def test_smoothmap_cube_dimension_checks():
    from diffspace.errors import ValidationError

    with pytest.raises(ValueError):
        cube(DenseDomain(1), [x * y], PLANE)
    with pytest.raises(ValidationError):
        cube(DenseDomain(2), [x], PLANE)
    assert SmoothMap.identity(2).input_dim == 2
