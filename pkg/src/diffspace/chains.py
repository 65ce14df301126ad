"""Finitely supported real chains of cubes and their boundary."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cubes import ExtensionConfig, GeneralizedCube, face
from .errors import DimensionMismatch, DomainError, ExtensionRequired
from .space import DenseDomain


@dataclass(frozen=True)
class Chain:
    """``Σ c_j φ_j`` keyed by structural cube identity; zero coefficients are never stored."""

    dim: int
    entries: tuple = field(default=())

    @staticmethod
    def zero(dim: int) -> "Chain":
        return Chain(dim, ())

    @staticmethod
    def of(cube: GeneralizedCube, coeff: float = 1.0) -> "Chain":
        return Chain._build(cube.dim, [(cube, coeff)])

    @staticmethod
    def from_terms(dim: int, terms) -> "Chain":
        return Chain._build(dim, list(terms))

    @staticmethod
    def _build(dim: int, terms) -> "Chain":
        acc: dict = {}
        order = []
        for cube, coeff in terms:
            if cube.dim != dim:
                raise DimensionMismatch(f"{cube.dim}-cube in a {dim}-chain")
            k = cube.key
            if k not in acc:
                acc[k] = [cube, 0.0]
                order.append(k)
            acc[k][1] += float(coeff)
        return Chain(dim, tuple((acc[k][0], acc[k][1]) for k in order if acc[k][1] != 0.0))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def coefficient(self, cube: GeneralizedCube) -> float:
        for c, a in self.entries:
            if c.key == cube.key:
                return a
        return 0.0

    def _check(self, other: "Chain"):
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot combine a {self.dim}-chain with a {other.dim}-chain")

    def __add__(self, other: "Chain") -> "Chain":
        self._check(other)
        return Chain._build(self.dim, list(self.entries) + list(other.entries))

    def __neg__(self) -> "Chain":
        return self.scale(-1.0)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def scale(self, c: float) -> "Chain":
        return Chain._build(self.dim, [(cube, c * a) for cube, a in self.entries])

    def __rmul__(self, c: float) -> "Chain":
        return self.scale(c)

    def support(self) -> list:
        return [cube for cube, _ in self.entries]

    def is_zero(self) -> bool:
        return not self.entries

    def describe(self) -> list:
        return [{"coeff": a, "cube": cube.label} for cube, a in self.entries]


def add(a: Chain, b: Chain) -> Chain:
    return a + b


def scale(c: float, a: Chain) -> Chain:
    return a.scale(c)


def support(a: Chain) -> list:
    return a.support()


def boundary(phi: GeneralizedCube, cfg: ExtensionConfig | None = None) -> Chain:
    """``Σ_i Σ_α (-1)^{i+α} φ̃_(i,α)`` as an (n-1)-chain."""
    if phi.dim == 0:
        raise DimensionMismatch("a 0-cube has no boundary")
    terms = []
    for i in range(1, phi.dim + 1):
        for alpha in (0, 1):
            terms.append((face(phi, i, alpha, cfg), (-1.0) ** (i + alpha)))
    return Chain._build(phi.dim - 1, terms)


def boundary_chain(chain: Chain, cfg: ExtensionConfig | None = None) -> Chain:
    if chain.dim == 0:
        raise DimensionMismatch("a 0-chain has no boundary")
    out = Chain.zero(chain.dim - 1)
    for cube, a in chain.entries:
        out = out + boundary(cube, cfg).scale(a)
    return out


def _samples(cube: GeneralizedCube, grid: list) -> np.ndarray | None:
    try:
        return np.array([np.asarray(cube.map(t), dtype=float) for t in grid])
    except (DomainError, ExtensionRequired):
        return None


def identify(chain: Chain, per_axis: int = 5, tol: float = 1e-12) -> Chain:
    """Merge cubes on equal domains whose maps agree to ``tol`` on a grid."""
    grid = DenseDomain(chain.dim).grid(per_axis)
    reps: list = []  # [cube, coeff, samples]
    for cube, a in chain.entries:
        vals = _samples(cube, grid)
        for rep in reps:
            same_domain = rep[0].domain.key == cube.domain.key
            if same_domain and vals is not None and rep[2] is not None and \
                    np.max(np.abs(rep[2] - vals), initial=0.0) <= tol:
                rep[1] += a
                break
        else:
            reps.append([cube, a, vals])
    return Chain._build(chain.dim, [(c, a) for c, a, _ in reps if abs(a) > 1e-15])


def is_zero(chain: Chain, per_axis: int = 5, tol: float = 1e-12) -> bool:
    """True if the chain vanishes after pointwise identification."""
    return identify(chain, per_axis, tol).is_zero()
