"""Seeded random instances for the property suites (Stokes, dd = 0, commutation, canonical forms)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chains import Chain
from .cubes import GeneralizedCube
from .forms import (
    AmbientForm,
    PointForm,
    SigmaPresentedForm,
    ambient_form,
    canonicalize,
    exterior_derivative,
    homogeneity_check,
    restrict,
)
from .integrate import QuadConfig, d_commutes_pullback_check, verify_stokes
from .smoothfn import ONE, ZERO, SmoothExpr, SmoothMap, const, normalize, substitute, var
from .space import DenseDomain, Membership, make_space


def monomials(nvars: int, degree: int) -> list:
    """Exponent tuples of total degree <= ``degree``."""
    return [e for e in itertools.product(range(degree + 1), repeat=nvars) if sum(e) <= degree]


def monomial(exps) -> SmoothExpr:
    out = ONE
    for i, p in enumerate(exps, start=1):
        if p:
            out = out * (var(i) ** p)
    return out


def random_polynomial(rng: np.random.Generator, nvars: int, degree: int, nterms: int = 4,
                      scale: float = 1.0) -> SmoothExpr:
    mons = monomials(nvars, degree)
    picks = rng.choice(len(mons), size=min(nterms, len(mons)), replace=False)
    out = ZERO
    for j in sorted(picks):
        out = out + const(round(float(rng.uniform(-scale, scale)), 6)) * monomial(mons[j])
    return normalize(out)


def random_ambient_form(rng: np.random.Generator, dim: int, degree: int, poly_degree: int = 3,
                        nterms: int = 3) -> AmbientForm:
    terms = []
    for index in itertools.combinations(range(1, dim + 1), degree):
        if rng.uniform() < 0.8 or not terms:
            terms.append((random_polynomial(rng, dim, poly_degree, nterms), index))
    return ambient_form(dim, terms, degree)


def random_bounded_map(rng: np.random.Generator, n: int, d: int, degree: int = 2) -> SmoothMap:
    """Polynomial map whose coefficient l1 norm is <= 1, so |φ| <= 1 on [0,1]^n."""
    comps = []
    mons = monomials(n, degree)
    for _ in range(d):
        coeffs = rng.uniform(-1.0, 1.0, len(mons))
        coeffs *= rng.uniform(0.5, 0.98) / np.abs(coeffs).sum()
        e = ZERO
        for c, m in zip(coeffs, mons):
            e = e + const(round(float(c), 6)) * monomial(m)
        comps.append(normalize(e))
    return SmoothMap(tuple(comps), n)


@dataclass
class StokesInstance:
    space: object
    cube: GeneralizedCube
    eta: PointForm
    eta_tilde: AmbientForm

    @property
    def chain(self) -> Chain:
        return Chain.of(self.cube)


def stokes_instance(seed: int, n: int = 2, dims=(2, 3), form_degree: int = 3,
                    map_degree: int = 2) -> StokesInstance:
    rng = np.random.default_rng(seed)
    d = int(rng.choice(dims))
    space = make_space(d, Membership("all", box=tuple((-1, 1) for _ in range(d))),
                       [var(i) for i in range(1, d + 1)], bound=1.0, name=f"box{d}")
    fmap = random_bounded_map(rng, n, d, map_degree)
    cube = GeneralizedCube(DenseDomain(n), fmap, space, name=f"phi{seed}")
    eta_tilde = random_ambient_form(rng, d, n - 1, form_degree)
    return StokesInstance(space, cube, restrict(eta_tilde, space), eta_tilde)


def run_stokes_suite(count: int = 20, seed: int = 0, tol: float = 1e-6, quad: QuadConfig | None = None) -> list:
    out = []
    for j in range(count):
        inst = stokes_instance(seed + j)
        report = verify_stokes(inst.chain, inst.eta, inst.eta_tilde, inst.space, quad, tol=tol)
        out.append({"seed": seed + j, "lhs": report.lhs, "rhs": report.rhs,
                    "deviation": report.deviation, "passed": report.passed})
    return out


def dd_zero_suite(count: int = 100, points: int = 100, seed: int = 0) -> float:
    """Largest coefficient of d(dη̃) over random polynomial forms and points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        dim = int(rng.integers(2, 5))
        degree = int(rng.integers(0, dim - 1))
        form = random_ambient_form(rng, dim, degree)
        dd = exterior_derivative(exterior_derivative(form))
        pts = tuple(rng.uniform(-1.0, 1.0, size=(dim, points)))
        for c, _ in dd.terms:
            worst = max(worst, float(np.max(np.abs(np.asarray(c.eval(pts)) * np.ones(points)))))
    return worst


def commutation_pair(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    d = int(rng.integers(2, 4))
    fmap = random_bounded_map(rng, n, d, 2)
    k = int(rng.integers(0, min(n - 1, d) + 1))
    k = min(k, n - 1)
    chi = random_ambient_form(rng, d, k)
    return fmap, chi


def commutation_suite(count: int = 50, points: int = 100, seed: int = 0) -> list:
    return [d_commutes_pullback_check(*commutation_pair(seed + j), samples=points, seed=seed + j)
            for j in range(count)]


# ---------------------------------------------------------------------------
# sigma-presented forms


def _alternate(sigma0: SmoothExpr, nbase: int, nslot: int, k: int) -> SmoothExpr:
    """Σ_π sgn(π) σ₀ with slot blocks permuted by π."""
    parts = []
    for perm in itertools.permutations(range(k)):
        inv = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        mapping = {}
        for r, pr in enumerate(perm):
            for j in range(1, nslot + 1):
                mapping[nbase + r * nslot + j] = var(nbase + pr * nslot + j)
        term = substitute(sigma0, mapping)
        parts.append(-term if inv % 2 else term)
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return normalize(out)


def random_sigma_form(seed: int) -> SigmaPresentedForm:
    """Alternating σ multilinear in its slot blocks, with polynomial base and slot functions."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    nslot = int(rng.integers(2, 4))
    k = int(rng.integers(1, min(nslot, 3) + 1))
    base = tuple(var(i) for i in range(1, d + 1))
    family = tuple(random_polynomial(rng, d, 2, 3) + var(i % d + 1) for i in range(nslot))
    sigma0 = ZERO
    for js in itertools.product(range(1, nslot + 1), repeat=k):
        if rng.uniform() < 0.5:
            continue
        term = random_polynomial(rng, d, 2, 2)
        for r, j in enumerate(js):
            term = term * var(d + r * nslot + j)
        sigma0 = sigma0 + term
    if sigma0 == ZERO:
        sigma0 = ONE
        for r in range(k):
            sigma0 = sigma0 * var(d + r * nslot + r + 1)
    sigma = _alternate(sigma0, d, nslot, k)
    return SigmaPresentedForm(d, base, tuple(family for _ in range(k)), sigma)


def random_nonhomogeneous_sigma(seed: int) -> SigmaPresentedForm:
    """A σ-form spoiled by a term of the wrong degree in some slot block."""
    s = random_sigma_form(seed)
    rng = np.random.default_rng(10_000 + seed)
    nslot = len(s.slots[0])
    d = s.dim
    r = int(rng.integers(0, s.degree))
    j = int(rng.integers(1, nslot + 1))
    u = var(d + r * nslot + j)
    kind = int(rng.integers(0, 3))
    if kind == 0:
        spoil = u * u
    elif kind == 1:
        spoil = const(1.0) + var(1) * var(1)
    else:
        spoil = u * u * u + u
    for rr in range(s.degree):
        if rr != r:
            spoil = spoil * var(d + rr * nslot + 1)
    return SigmaPresentedForm(d, s.base, s.slots, normalize(s.sigma + spoil))


def canonical_deviation(s: SigmaPresentedForm, samples: int = 20, seed: int = 0) -> float:
    """Max |canonical form - σ| on random base points and tangent tuples."""
    form = canonicalize(s)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        m = tuple(rng.uniform(-1.0, 1.0, s.dim))
        vectors = [rng.uniform(-1.0, 1.0, s.dim) for _ in range(s.degree)]
        a = form.eval(m, vectors)
        b = s.eval(m, vectors)
        worst = max(worst, abs(a - b))
    return worst


def canonical_suite(count: int = 50, seed: int = 0) -> list:
    return [canonical_deviation(random_sigma_form(seed + j), seed=seed + j) for j in range(count)]


def rejection_suite(count: int = 20, seed: int = 0) -> list:
    return [homogeneity_check(random_nonhomogeneous_sigma(seed + j), seed=seed + j) for j in range(count)]


__all__ = [
    "StokesInstance",
    "canonical_deviation",
    "canonical_suite",
    "commutation_pair",
    "commutation_suite",
    "dd_zero_suite",
    "monomial",
    "monomials",
    "random_ambient_form",
    "random_bounded_map",
    "random_nonhomogeneous_sigma",
    "random_polynomial",
    "random_sigma_form",
    "rejection_suite",
    "run_stokes_suite",
    "stokes_instance",
]
