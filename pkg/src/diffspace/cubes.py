"""Generalized cubes on dense domains, faces, pullbacks and continuous extension.

A generalized n-cube is a smooth map defined on a dense set D ⊂ [0,1]^n.
Integration needs the continuous extension of the pulled-back coefficient
to the closed cube; :func:`extend` builds it pointwise as the limit of the
function along sampler points of D approaching each target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ExtensionRequired, SamplerFailure, ValidationError
from .forms import AmbientForm, PointForm
from .smoothfn import SmoothExpr, SmoothMap, compose, const, diff, normalize, var
from .space import DenseDomain, DifferentialSpace, exact_value


@dataclass(frozen=True)
class ExtensionConfig:
    """Cauchy schedule of the extension engine.

    Values are taken at resolutions 2^-k for k = k0..kmax and accepted when
    the last ``tail`` increments satisfy ``|v_k - v_{k-1}| <= tol_base*2^-k + tol_floor``.
    """

    k0: int = 4
    kmax: int = 24
    tol_base: float = 10.0
    tol_floor: float = 1e-9
    divergence_bound: float = 1e9
    tail: int = 4
    fast_path: bool = True
    probes_per_axis: int = 5

    def tol(self, k: int) -> float:
        return self.tol_base * 2.0**-k + self.tol_floor

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "kmax": self.kmax,
            "tol_base": self.tol_base,
            "tol_floor": self.tol_floor,
            "divergence_bound": self.divergence_bound,
            "tail": self.tail,
            "fast_path": self.fast_path,
            "probes_per_axis": self.probes_per_axis,
        }


DEFAULT_EXTENSION = ExtensionConfig()


def _plain(t) -> list:
    return [float(c) for c in t]


def _limit(f: Callable, domain: DenseDomain, t: tuple, cfg: ExtensionConfig):
    """Follow f along sampler points approaching t. Returns (ok, value, record)."""
    ks, values, residuals = [], [], []
    for k in range(cfg.k0, cfg.kmax + 1):
        p = domain.sample(t, 2.0**-k)
        try:
            v = float(f(p))
        except DomainError as exc:
            return False, None, {"target": _plain(t), "reason": f"undefined at a point of D: {exc}",
                                 "resolutions": ks, "values": values}
        ks.append(k)
        values.append(v)
        if not math.isfinite(v) or abs(v) > cfg.divergence_bound:
            return False, None, {"target": _plain(t), "reason": "divergence bound exceeded",
                                 "resolutions": ks, "values": values}
        if len(values) > 1:
            residuals.append(abs(values[-1] - values[-2]))
    tail = [(k, r) for k, r in zip(ks[1:], residuals)][-cfg.tail:]
    ok = all(r <= cfg.tol(k) for k, r in tail)
    record = {"target": _plain(t), "resolutions": ks, "values": values, "residuals": residuals}
    if not ok:
        record["reason"] = "not Cauchy at kmax"
    return ok, values[-1], record


@dataclass
class ExtensionResult:
    """Verdict of :func:`extend` on a probe set, plus the extended evaluator."""

    verdict: str
    certificates: list = field(default_factory=list)
    witness: dict | None = None
    f: Callable = field(default=None, repr=False)
    domain: DenseDomain = field(default=None, repr=False)
    cfg: ExtensionConfig = field(default=DEFAULT_EXTENSION, repr=False)
    closed_form: bool = False

    @property
    def extended(self) -> bool:
        return self.verdict == "Extended"

    def __call__(self, t) -> float:
        value, mode, record = _value_at(self.f, self.domain, tuple(t), self.cfg, self.closed_form)
        if mode is None:
            raise ExtensionRequired(f"no continuous extension at {tuple(t)}", witness=record)
        return value

    def batch(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at the columns of an ``(n, B)`` array of targets."""
        if self.closed_form and self.cfg.fast_path:
            try:
                return np.asarray(self.f(tuple(pts)), dtype=float) * np.ones(pts.shape[1])
            except DomainError:
                pass
        return np.array([self(tuple(pts[:, j])) for j in range(pts.shape[1])])

    def summary(self) -> dict:
        out = {"verdict": self.verdict, "probes": len(self.certificates)}
        modes: dict = {}
        for c in self.certificates:
            modes[c["mode"]] = modes.get(c["mode"], 0) + 1
        out["modes"] = dict(sorted(modes.items()))
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _value_at(f, domain, t, cfg, closed_form):
    if closed_form and cfg.fast_path:
        try:
            return float(f(t)), "direct", None
        except DomainError:
            pass
    if domain.contains(t):
        return float(f(t)), "member", None
    ok, value, record = _limit(f, domain, t, cfg)
    return (value, "limit", record) if ok else (None, None, record)


def extend(f: Callable, domain: DenseDomain, cfg: ExtensionConfig | None = None,
           probes: Sequence | None = None, closed_form: bool = False) -> ExtensionResult:
    """Certify (or refute) a continuous extension of ``f`` from D to [0,1]^n.

    ``closed_form`` declares that ``f`` is built from expressions, so direct
    evaluation wherever it succeeds already is the continuous extension.
    Targets where that fails, or all targets otherwise, are sent through
    the sampler limit unless they are exact members of D.
    """
    cfg = cfg or DEFAULT_EXTENSION
    if probes is None:
        probes = domain.grid(cfg.probes_per_axis)
    certs = []
    for t in probes:
        t = tuple(t)
        value, mode, record = _value_at(f, domain, t, cfg, closed_form)
        if mode is None:
            return ExtensionResult("NonExtendable", certs, record, f, domain, cfg, closed_form)
        cert = {"target": _plain(t), "mode": mode, "value": value}
        if record is not None:
            cert["residuals"] = record["residuals"]
        certs.append(cert)
    return ExtensionResult("Extended", certs, None, f, domain, cfg, closed_form)


# ---------------------------------------------------------------------------
# maps on faces


def face_insert(x: Sequence, i: int, alpha) -> tuple:
    """The face embedding I^n_(i,alpha): insert alpha at (1-based) slot i."""
    x = tuple(x)
    return x[: i - 1] + (alpha,) + x[i - 1:]


@dataclass(frozen=True, eq=False)
class ExtendedMap:
    """Continuous extension of a cube map restricted to a face slab.

    ``fixed`` maps root axes to their inserted constants; the remaining root
    axes, in order, are the coordinates of this map. Values and first
    partials are limits through the root domain's sampler.
    """

    root: SmoothMap
    domain: DenseDomain
    fixed: tuple
    cfg: ExtensionConfig = DEFAULT_EXTENSION

    @property
    def input_dim(self) -> int:
        return self.root.input_dim - len(self.fixed)

    @property
    def output_dim(self) -> int:
        return self.root.output_dim

    @property
    def free_axes(self) -> list:
        fixed = dict(self.fixed)
        return [a for a in range(1, self.root.input_dim + 1) if a not in fixed]

    @property
    def key(self) -> tuple:
        return ("ext", self.root.key, self.domain.key, tuple(sorted(self.fixed)))

    def lift(self, x) -> tuple:
        fixed = dict(self.fixed)
        it = iter(x)
        return tuple(float(fixed[a]) if a in fixed else float(next(it)) for a in range(1, self.root.input_dim + 1))

    def face(self, i: int, alpha: int) -> "ExtendedMap":
        axis = self.free_axes[i - 1]
        return ExtendedMap(self.root, self.domain, tuple(sorted(self.fixed + ((axis, alpha),))), self.cfg)

    def _limit_of(self, e: SmoothExpr, x) -> float:
        value, mode, record = _value_at(e.eval, self.domain, self.lift(x), self.cfg, True)
        if mode is None:
            raise ExtensionRequired(f"{e.text} has no limit on the face at {tuple(x)}", witness=record)
        return value

    def _pointwise(self, x, fn):
        x = [np.asarray(c, dtype=float) for c in x] if self.input_dim else []
        shape = np.broadcast_shapes(*[c.shape for c in x]) if x else ()
        if shape == ():
            return fn(tuple(float(c) for c in x))
        flat = [np.broadcast_to(c, shape).ravel() for c in x]
        cols = [fn(tuple(c[j] for c in flat)) for j in range(flat[0].size)]
        out = np.stack(cols, axis=-1)
        return out.reshape(out.shape[:-1] + shape)

    def __call__(self, x):
        return self._pointwise(x, lambda p: np.array([self._limit_of(c, p) for c in self.root.components]))

    def jacobian(self, x):
        partials = [[normalize(diff(c, a)) for a in self.free_axes] for c in self.root.components]

        def one(p):
            return np.array([[self._limit_of(e, p) for e in row] for row in partials]).reshape(
                self.output_dim, self.input_dim)

        return self._pointwise(x, one)


# ---------------------------------------------------------------------------
# cubes


@dataclass
class CubeValidation:
    valid: bool
    reason: str = ""
    point: tuple | None = None

    def __bool__(self):
        return self.valid


@dataclass(frozen=True, eq=False)
class GeneralizedCube:
    """Smooth map ``D -> M`` on a dense ``D ⊂ [0,1]^n``."""

    domain: DenseDomain
    map: object
    space: DifferentialSpace | None = None
    name: str | None = None

    def __post_init__(self):
        if self.map.input_dim != self.domain.dim:
            raise ValidationError(
                f"cube map has input dim {self.map.input_dim}, domain has dim {self.domain.dim}"
            )
        if self.space is not None and self.map.output_dim != self.space.dim:
            raise ValidationError(
                f"cube map lands in R^{self.map.output_dim}, space is in R^{self.space.dim}"
            )

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def key(self) -> tuple:
        return (self.domain.key, self.map.key)

    @property
    def label(self) -> str:
        return self.name or repr(self.map)

    def __call__(self, t):
        return self.map(t)

    def validate(self, count: int = 8) -> CubeValidation:
        """Check that D's validation points map to defined points of M."""
        for p in self.domain.validation_points(count):
            try:
                approx = self.map(tuple(float(c) for c in p))
            except DomainError as exc:
                return CubeValidation(False, f"map undefined at a point of D: {exc}", _plain(p))
            if self.space is None:
                continue
            if isinstance(self.map, SmoothMap) and self.space.membership.kind != "all":
                image = tuple(exact_value(c, p) for c in self.map.components)
            else:
                image = tuple(float(c) for c in approx)
            if not self.space.contains(image):
                return CubeValidation(False, "image point is not in M", tuple(str(c) for c in p))
        return CubeValidation(True)

    def with_name(self, name: str) -> "GeneralizedCube":
        return GeneralizedCube(self.domain, self.map, self.space, name)


def cube(domain: DenseDomain, components, space=None, name=None) -> GeneralizedCube:
    return GeneralizedCube(domain, SmoothMap(tuple(components), domain.dim), space, name)


def identity_cube(n: int, space=None, kind: str = "full", name=None) -> GeneralizedCube:
    return GeneralizedCube(DenseDomain(n, kind), SmoothMap.identity(n), space, name)


def face(phi: GeneralizedCube, i: int, alpha: int, cfg: ExtensionConfig | None = None) -> GeneralizedCube:
    """The (i, alpha) face ``φ̃ ∘ I^n_(i,alpha)`` as an (n-1)-cube."""
    cfg = cfg or DEFAULT_EXTENSION
    n = phi.dim
    if not 1 <= i <= n:
        raise ValueError(f"face axis {i} out of range 1..{n}")
    if alpha not in (0, 1):
        raise ValueError("alpha must be 0 or 1")
    fdom = phi.domain.face(i, alpha)
    name = f"{phi.name}|({i},{alpha})" if phi.name else None
    grid = DenseDomain(n - 1).grid(cfg.probes_per_axis)
    if isinstance(phi.map, SmoothMap):
        mapping = {j: var(j) for j in range(1, i)}
        mapping[i] = const(alpha)
        mapping.update({j: var(j - 1) for j in range(i + 1, n + 1)})
        fmap = phi.map.substitute(mapping, n - 1)
        try:
            for x in grid:
                fmap(x)
            return GeneralizedCube(fdom, fmap, phi.space, name)
        except DomainError:
            emap = ExtendedMap(phi.map, phi.domain, ((i, alpha),), cfg)
    else:
        emap = phi.map.face(i, alpha)
    for x in grid:
        emap(x)  # raises ExtensionRequired with a witness if a limit fails
    return GeneralizedCube(fdom, emap, phi.space, name)


# ---------------------------------------------------------------------------
# pullback


def _family_jacobian(form, m: np.ndarray) -> np.ndarray:
    if isinstance(form, AmbientForm):
        d = m.shape[0]
        return np.eye(d).reshape((d, d) + (1,) * (m.ndim - 1)) * np.ones((1, 1) + m.shape[1:])
    if not form.family:
        return np.zeros((0, form.dim) + m.shape[1:])
    return form.family_map.jacobian(tuple(m))


def _batched_det(a: np.ndarray) -> np.ndarray:
    k = a.shape[0]
    if k == 0:
        return np.ones(a.shape[2:])
    if k == 1:
        return a[0, 0]
    if k == 2:
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.linalg.det(np.moveaxis(a, (0, 1), (-2, -1)))


def pullback_coefficient(cube_map, form, t, axes: Sequence[int] | None = None):
    """Coefficient of ``dt^{axes}`` in ``cube_map^* form`` at t (batch-capable).

    ``Σ_I c_I(φ(t)) · det[∂(α_{i_r}∘φ)/∂t^{s}]`` with the Jacobian of the
    composite taken by the chain rule.
    """
    n = cube_map.input_dim
    if axes is None:
        axes = tuple(range(1, n + 1))
    axes = [a - 1 for a in axes]
    if len(axes) != form.degree:
        raise ValidationError(f"{len(axes)} axes for a {form.degree}-form")
    m = np.asarray(cube_map(t), dtype=float)
    jac = np.asarray(cube_map.jacobian(t), dtype=float)[:, axes]
    grads = _family_jacobian(form, m)
    composite = np.einsum("id...,dj...->ij...", grads, jac) if grads.size else grads
    coords = tuple(m)
    total = np.zeros(m.shape[1:]) if m.ndim > 1 else 0.0
    for c, index in form.terms:
        sub = composite[[i - 1 for i in index]] if index else np.zeros((0, 0) + m.shape[1:])
        total = total + c.eval(coords) * _batched_det(sub)
    return total


@dataclass(frozen=True)
class PulledBackForm:
    """``φ^*ω``: a top-degree coefficient ω₀, or per-tuple coefficients below top degree."""

    cube: GeneralizedCube
    form: object

    @property
    def degree(self) -> int:
        return self.form.degree

    def coefficient(self, t, axes=None):
        return pullback_coefficient(self.cube.map, self.form, t, axes)

    def __call__(self, t):
        return self.coefficient(t)

    def coefficients(self) -> dict:
        import itertools

        return {
            axes: (lambda t, a=axes: self.coefficient(t, a))
            for axes in itertools.combinations(range(1, self.cube.dim + 1), self.degree)
        }


def pullback(phi: GeneralizedCube, form) -> PulledBackForm:
    if isinstance(form, PointForm) and phi.space is not None and form.dim != phi.space.dim:
        raise ValidationError("form and cube live in different ambient dimensions")
    return PulledBackForm(phi, form)


def extend_pullback(phi: GeneralizedCube, form, cfg: ExtensionConfig | None = None) -> ExtensionResult:
    """Extension certificate for the top-degree pullback coefficient ω₀."""
    pb = pullback(phi, form)
    return extend(pb.coefficient, phi.domain, cfg, closed_form=True)


# ---------------------------------------------------------------------------
# extendability


@dataclass
class ExtendabilityReport:
    cube: str
    uniform: bool
    tangent: bool
    forms: dict
    entries: list
    partition: dict | None = None

    @property
    def smoothly_extendable(self) -> bool:
        return self.uniform and self.tangent

    def to_dict(self) -> dict:
        out = {
            "cube": self.cube,
            "uniform": self.uniform,
            "tangent": self.tangent,
            "forms": dict(self.forms),
            "entries": self.entries,
        }
        if self.partition is not None:
            out["partition"] = self.partition
        return out


def _expr_callable(phi: GeneralizedCube, outer: SmoothExpr):
    if isinstance(phi.map, SmoothMap):
        e = normalize(compose(outer, phi.map.components))
        return e.eval, e
    return (lambda t: outer.eval(tuple(phi.map(t)))), None


def extendability_report(phi: GeneralizedCube, generators=None, forms: dict | None = None,
                         cfg: ExtensionConfig | None = None, partition=None) -> ExtendabilityReport:
    """Certificates for (a) g∘φ, (b) ∂(g∘φ)/∂t^j and (c) each form's ω₀.

    Failures are recorded with their witnesses, never raised.
    """
    cfg = cfg or DEFAULT_EXTENSION
    if generators is None:
        generators = phi.space.generators if phi.space is not None else ()
    entries = []

    def record(check, target, res: ExtensionResult):
        entry = {"check": check, "target": target, "verdict": res.verdict}
        if res.witness is not None:
            entry["witness"] = res.witness
        entries.append(entry)
        return res.extended

    uniform = True
    tangent = True
    for gi, g in enumerate(generators, start=1):
        f, e = _expr_callable(phi, g)
        try:
            ok = record("uniform", f"g{gi}∘φ", extend(f, phi.domain, cfg, closed_form=True))
        except SamplerFailure as exc:
            entries.append({"check": "uniform", "target": f"g{gi}∘φ", "verdict": "NonExtendable",
                            "witness": {"reason": str(exc)}})
            ok = False
        uniform &= ok
        for j in range(1, phi.dim + 1):
            if e is not None:
                de = normalize(diff(e, j))
                fj = de.eval
            else:
                def fj(t, g=g, j=j):
                    jac = phi.map.jacobian(t)
                    m = tuple(phi.map(t))
                    return float(SmoothMap((g,), len(m)).jacobian(m)[0] @ jac[:, j - 1])
            try:
                ok = record("tangent", f"∂(g{gi}∘φ)/∂t{j}", extend(fj, phi.domain, cfg, closed_form=True))
            except SamplerFailure as exc:
                entries.append({"check": "tangent", "target": f"∂(g{gi}∘φ)/∂t{j}",
                                "verdict": "NonExtendable", "witness": {"reason": str(exc)}})
                ok = False
            tangent &= ok
    form_ok = {}
    for name, form in (forms or {}).items():
        if form.degree != phi.dim:
            form_ok[name] = True
            entries.append({"check": "form", "target": name, "verdict": "Extended",
                            "note": "degree differs from cube dimension; pullback is zero"})
            continue
        form_ok[name] = record("form", name, extend_pullback(phi, form, cfg))
    part = partition_certificate(phi, *partition, cfg=cfg) if partition else None
    return ExtendabilityReport(phi.label, uniform, tangent, form_ok, entries, part)


def partition_certificate(phi: GeneralizedCube, regions: Sequence[SmoothExpr], gammas: Sequence[SmoothExpr],
                          cfg: ExtensionConfig | None = None, tol: float = 1e-9) -> dict:
    """Check a user-supplied partition of unity subordinate to a finite cover.

    The cover is ``U_i = {h_i > 0}``. On the space's sweep points and on
    cube image points: ``Σγ_i = 1``, ``γ_i >= 0`` and ``γ_i ≠ 0 ⇒ h_i > 0``;
    each ``γ_i∘φ`` must extend continuously to the closed cube.
    """
    cfg = cfg or DEFAULT_EXTENSION
    if len(regions) != len(gammas):
        raise ValidationError("need one partition function per cover set")
    pts = [tuple(float(c) for c in p) for p in (phi.space.samples if phi.space is not None else ())]
    for t in phi.domain.grid(cfg.probes_per_axis):
        try:
            pts.append(tuple(float(c) for c in phi.map(t)))
        except (DomainError, ExtensionRequired):
            continue
    sum_ok, support_ok, sign_ok = True, True, True
    worst = 0.0
    for m in pts:
        vals = [g.eval(m) for g in gammas]
        worst = max(worst, abs(sum(vals) - 1.0))
        sum_ok &= abs(sum(vals) - 1.0) <= tol
        sign_ok &= all(v >= -tol for v in vals)
        for h, v in zip(regions, vals):
            if abs(v) > tol and h.eval(m) <= 0:
                support_ok = False
    uniform_ok = True
    for g in gammas:
        f, _ = _expr_callable(phi, g)
        uniform_ok &= extend(f, phi.domain, cfg, closed_form=True).extended
    return {
        "sum_to_one": sum_ok,
        "max_sum_deviation": worst,
        "nonnegative": sign_ok,
        "subordinate": support_ok,
        "uniform": uniform_ok,
        "passed": sum_ok and sign_ok and support_ok and uniform_ok,
        "probes": len(pts),
    }
