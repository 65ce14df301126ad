"""Quadrature on [0,1]^n, integrals over cubes and chains, and the Stokes verifier."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .chains import Chain, boundary_chain
from .cubes import (
    DEFAULT_EXTENSION,
    ExtensionConfig,
    GeneralizedCube,
    extend_pullback,
)
from .errors import (
    BoundError,
    DomainError,
    ExtensionMismatch,
    ExtensionRequired,
    NoConvergence,
    NotIntegrable,
    ValidationError,
)
from .forms import AmbientForm, PointForm, exterior_derivative, pullback_form, restrict
from .smoothfn import SmoothMap


@dataclass(frozen=True)
class QuadConfig:
    """Tensor Gauss–Legendre order per axis and adaptive subdivision limits."""

    order: int = 8
    max_depth: int = 10
    atol: float = 1e-10
    rtol: float = 1e-8

    def __post_init__(self):
        if self.order < 1:
            raise ValidationError("quadrature order must be at least 1")
        if self.atol <= 0 or self.rtol <= 0:
            raise ValidationError("atol and rtol must be positive")
        if self.max_depth < 0:
            raise ValidationError("max_depth must be nonnegative")

    def to_dict(self) -> dict:
        return {"order": self.order, "max_depth": self.max_depth, "atol": self.atol, "rtol": self.rtol}


DEFAULT_QUAD = QuadConfig()


@lru_cache(maxsize=None)
def _rule(order: int, n: int):
    """Nodes ``(n, q^n)`` and weights ``(q^n,)`` on [0,1]^n."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    nodes = np.array(list(itertools.product(x, repeat=n))).T.reshape(n, -1)
    weights = np.prod(np.array(list(itertools.product(w, repeat=n))).reshape(-1, n), axis=1)
    return nodes, weights


def _cell_integrals(f, corners: np.ndarray, h: np.ndarray, order: int) -> np.ndarray:
    """Gauss rule on each cell ``corner + [0,h]^n``; corners has shape (C, n)."""
    n = corners.shape[1]
    nodes, weights = _rule(order, n)
    pts = corners.T[:, :, None] + h[None, :, None] * nodes[:, None, :]  # (n, C, q)
    vals = np.asarray(f(pts.reshape(n, -1)), dtype=float).reshape(corners.shape[0], -1)
    if not np.all(np.isfinite(vals)):
        raise NoConvergence("integrand is not finite at a quadrature node")
    return vals @ weights * h**n


def quadrature(f: Callable, n: int, cfg: QuadConfig | None = None) -> float:
    """Integrate a batch integrand ``f((n, B) array) -> (B,)`` over [0,1]^n.

    Globally adaptive: every cell carries the error estimate
    ``|rule(children) - rule(cell)|`` and the worst cells are split
    dyadically until the summed estimate is within ``atol + rtol·|I|``.
    """
    cfg = cfg or DEFAULT_QUAD
    if n == 0:
        return float(np.asarray(f(np.zeros((0, 1))), dtype=float).reshape(-1)[0])
    offsets = np.array(list(itertools.product((0.0, 1.0), repeat=n)))  # (2^n, n)

    def kids_of(corners, h):
        kc = (corners[:, None, :] + (h / 2)[:, None, None] * offsets[None, :, :]).reshape(-1, n)
        kh = np.repeat(h / 2, len(offsets))
        return kc, kh, _cell_integrals(f, kc, kh, cfg.order).reshape(corners.shape[0], -1)

    corners = np.zeros((1, n))
    h = np.ones(1)
    depth = np.zeros(1, dtype=int)
    coarse = _cell_integrals(f, corners, h, cfg.order)
    _, _, fine = kids_of(corners, h)
    while True:
        err = np.abs(fine.sum(axis=1) - coarse)
        total = float(fine.sum())
        if err.sum() <= cfg.atol + cfg.rtol * abs(total):
            return total
        split = err >= 0.25 * err.max()
        if np.any(depth[split] >= cfg.max_depth):
            raise NoConvergence(f"adaptive quadrature did not converge within depth {cfg.max_depth}")
        sc, sh = corners[split], h[split]
        kc = (sc[:, None, :] + (sh / 2)[:, None, None] * offsets[None, :, :]).reshape(-1, n)
        kh = np.repeat(sh / 2, len(offsets))
        kcoarse = fine[split].reshape(-1)
        _, _, kfine = kids_of(kc, kh)
        keep = ~split
        corners = np.concatenate([corners[keep], kc])
        h = np.concatenate([h[keep], kh])
        depth = np.concatenate([depth[keep], np.repeat(depth[split] + 1, len(offsets))])
        coarse = np.concatenate([coarse[keep], kcoarse])
        fine = np.concatenate([fine[keep], kfine])


# ---------------------------------------------------------------------------
# cubes and chains


def integrate_cube(phi: GeneralizedCube, form, cfg: QuadConfig | None = None,
                   ext: ExtensionConfig | None = None) -> float:
    """``∫_φ ω`` via the continuous extension of the pullback coefficient."""
    if form.degree != phi.dim:
        return 0.0
    ext = ext or DEFAULT_EXTENSION
    try:
        res = extend_pullback(phi, form, ext)
    except ExtensionRequired as exc:
        raise NotIntegrable(str(exc), witness=exc.witness, cube=phi.label) from exc
    if not res.extended:
        raise NotIntegrable(
            f"pullback coefficient on {phi.label} has no continuous extension", witness=res.witness, cube=phi.label
        )
    if phi.dim == 0:
        return float(res(()))
    return quadrature(res.batch, phi.dim, cfg)


def integrate_chain(chain: Chain, form, cfg: QuadConfig | None = None,
                    ext: ExtensionConfig | None = None) -> float:
    total = 0.0
    for cube, a in chain.entries:
        total += a * integrate_cube(cube, form, cfg, ext)
    return total


# ---------------------------------------------------------------------------
# Stokes


@dataclass
class StokesReport:
    lhs: float
    rhs: float
    tolerance: float
    faces: list = field(default_factory=list)
    cubes: list = field(default_factory=list)
    certificates: list = field(default_factory=list)

    @property
    def deviation(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "faces": self.faces,
            "cubes": self.cubes,
            "certificates": self.certificates,
        }


def _tangent_probes(phi: GeneralizedCube, per_axis: int):
    for t in phi.domain.grid(per_axis):
        try:
            m = np.asarray(phi.map(t), dtype=float)
            jac = np.asarray(phi.map.jacobian(t), dtype=float)
        except (DomainError, ExtensionRequired):
            continue
        yield t, m, jac


def check_extension_consistency(chain: Chain, eta: PointForm, eta_tilde: AmbientForm, space,
                                per_axis: int = 4, tol: float = 1e-9) -> float:
    """Max deviation between ``restrict(η̃)`` and η on cube tangent tuples."""
    if eta.degree != eta_tilde.degree:
        raise ExtensionMismatch(f"η has degree {eta.degree}, η̃ has degree {eta_tilde.degree}")
    restricted = restrict(eta_tilde, space)
    worst = 0.0
    k = eta.degree
    for cube, _ in chain.entries:
        for t, m, jac in _tangent_probes(cube, per_axis):
            for axes in itertools.combinations(range(cube.dim), k):
                vectors = [jac[:, a] for a in axes]
                dev = abs(eta.eval(tuple(m), vectors) - restricted.eval(tuple(m), vectors))
                worst = max(worst, dev)
                if dev > tol:
                    raise ExtensionMismatch(
                        f"restriction of η̃ differs from η by {dev:.3e} at t={tuple(float(c) for c in t)} on {cube.label}"
                    )
    return worst


def _check_bounds(chain: Chain, space, per_axis: int):
    gmap = space.generator_map
    for cube, _ in chain.entries:
        for t, m, _ in _tangent_probes(cube, per_axis):
            u = np.asarray(gmap(tuple(m)), dtype=float)
            if np.max(np.abs(u), initial=0.0) > 1.0 + 1e-12:
                raise BoundError(f"generator value {np.max(np.abs(u)):.6g} outside [-1, 1] on {cube.label}")


def verify_stokes(chain: Chain, eta: PointForm | None, eta_tilde: AmbientForm, space,
                  cfg: QuadConfig | None = None, ext: ExtensionConfig | None = None,
                  tol: float = 1e-6, per_axis: int = 4) -> StokesReport:
    """Compare ``∫_{∂Φ} η`` (through ``restrict(η̃)`` on faces) with ``∫_Φ dη̃``."""
    if eta_tilde.degree != chain.dim - 1:
        raise ValidationError(f"η̃ must have degree {chain.dim - 1} for a {chain.dim}-chain")
    certs = []
    if eta is not None:
        dev = check_extension_consistency(chain, eta, eta_tilde, space, per_axis)
        certs.append({"check": "extension-consistency", "max_deviation": dev})
    _check_bounds(chain, space, per_axis)
    certs.append({"check": "generator-bounds", "passed": True})
    restricted = restrict(eta_tilde, space)
    d_restricted = restrict(exterior_derivative(eta_tilde), space)
    faces = []
    lhs = 0.0
    for cube, a in boundary_chain(chain, ext).entries:
        value = integrate_cube(cube, restricted, cfg, ext)
        faces.append({"face": cube.label, "coeff": a, "integral": value})
        lhs += a * value
    cubes = []
    rhs = 0.0
    for cube, a in chain.entries:
        value = integrate_cube(cube, d_restricted, cfg, ext)
        cubes.append({"cube": cube.label, "coeff": a, "integral": value})
        rhs += a * value
    return StokesReport(lhs, rhs, tol, faces, cubes, certs)


# ---------------------------------------------------------------------------
# d commutes with pullback


@dataclass
class CommutationResult:
    passed: bool
    max_deviation: float
    samples: int
    witness: dict | None = None

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        out = {"passed": self.passed, "max_deviation": self.max_deviation, "samples": self.samples}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def d_commutes_pullback_check(fmap: SmoothMap, chi: AmbientForm, samples: int = 100, seed: int = 0,
                              d_op: Callable = exterior_derivative, tol: float = 1e-8) -> CommutationResult:
    """Compare ``d(F^*χ)`` with ``F^*(dχ)`` coefficientwise at random points of [0,1]^n."""
    if chi.degree > fmap.input_dim - 1:
        raise ValidationError("χ must have degree at most n-1")
    left = exterior_derivative(pullback_form(chi, fmap))
    right = pullback_form(d_op(chi), fmap)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(fmap.input_dim, samples))
    coords = tuple(pts)
    worst = 0.0
    witness = None
    for axes in itertools.combinations(range(1, fmap.input_dim + 1), chi.degree + 1):
        lv = np.asarray(left.coefficient(axes).eval(coords), dtype=float) * np.ones(samples)
        rv = np.asarray(right.coefficient(axes).eval(coords), dtype=float) * np.ones(samples)
        dev = np.abs(lv - rv)
        j = int(np.argmax(dev))
        if dev[j] > worst:
            worst = float(dev[j])
            witness = {"point": pts[:, j].tolist(), "index": list(axes), "left": float(lv[j]), "right": float(rv[j])}
    passed = worst <= tol
    return CommutationResult(passed, worst, samples, None if passed else witness)
