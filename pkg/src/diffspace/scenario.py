"""Declarative scenario documents: parsing, validation, canonical serialization and task execution."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import suites
from .chains import Chain
from .cubes import ExtensionConfig, GeneralizedCube, extend, extendability_report
from .errors import DiffSpaceError, NotIntegrable, ParseError, ValidationError
from .forms import AmbientForm, PointForm, exterior_derivative, restrict
from .integrate import QuadConfig, d_commutes_pullback_check, integrate_chain, integrate_cube, verify_stokes
from .smoothfn import SmoothMap, compose, normalize, parse_expr
from .space import DenseDomain, Membership, make_space

TASK_TYPES = (
    "validate",
    "integrate",
    "extendability",
    "stokes",
    "d-commute",
    "derivative",
    "eval-form",
    "property-suite",
)


def _expr(text, where: str):
    try:
        return parse_expr(text)
    except ParseError as exc:
        raise ParseError(f"{where}: {exc}") from exc


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ParseError(f"{where}: missing field {key!r}")
    return d[key]


def _number(x):
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError as exc:
            raise ParseError(f"not a number: {x!r}") from exc
    return x


@dataclass
class Scenario:
    """A parsed scenario with resolved objects and its canonical document."""

    doc: dict
    space: Any
    domains: dict
    cubes: dict
    forms: dict
    chains: dict
    quad: QuadConfig
    ext: ExtensionConfig
    tasks: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.doc["name"]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.doc))

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, ensure_ascii=False) + "\n"


def _configs(doc_config: dict, defaults: dict | None):
    merged: dict = {"quadrature": {}, "extension": {}}
    for src in (defaults or {}, doc_config or {}):
        for key in merged:
            merged[key].update(src.get(key, {}))
    try:
        quad = QuadConfig(**merged["quadrature"])
        ext = ExtensionConfig(**merged["extension"])
    except TypeError as exc:
        raise ParseError(f"config: {exc}") from exc
    return quad, ext


def _canonical_terms(terms, where):
    out = []
    for j, t in enumerate(terms):
        coeff = _expr(_need(t, "coeff", f"{where}.terms[{j}]"), f"{where}.terms[{j}].coeff")
        index = [int(i) for i in t.get("index", [])]
        out.append({"coeff": coeff.text, "index": index})
    return out


def load_scenario(doc: dict, defaults: dict | None = None) -> Scenario:
    """Parse and validate a scenario document.

    Raises ParseError for malformed documents and ValidationError for
    declarations that parse but are inconsistent.
    """
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object")
    name = _need(doc, "name", "scenario")
    sdoc = _need(doc, "space", "scenario")
    mdoc = sdoc.get("membership", {"kind": "all"})
    mexprs = tuple(_expr(e, "space.membership.exprs") for e in mdoc.get("exprs", []))
    box = mdoc.get("box")
    membership = Membership(mdoc.get("kind", "all"), mexprs,
                            tuple(tuple(_number(v) for v in b) for b in box) if box is not None else None)
    dim = int(_need(sdoc, "dim", "space"))
    gens = [_expr(g, "space.generators") for g in _need(sdoc, "generators", "space")]
    bound = sdoc.get("bound")
    samples = sdoc.get("samples")
    if samples is not None:
        samples = [tuple(_number(c) for c in p) for p in samples]
    space = make_space(dim, membership, gens, bound=bound, samples=samples, name=sdoc.get("name"))
    canon = {
        "name": name,
        "description": doc.get("description", ""),
        "anchor": doc.get("anchor", ""),
        "space": space.to_dict(),
    }
    if samples is not None:
        canon["space"]["samples"] = [[str(c) for c in p] for p in samples]

    domains = {}
    canon["domains"] = {}
    for dname, dd in doc.get("domains", {}).items():
        dom = DenseDomain(int(_need(dd, "dim", f"domains.{dname}")), dd.get("kind", "full"),
                          open=bool(dd.get("open", False)), name=dname)
        domains[dname] = dom
        canon["domains"][dname] = dom.to_dict()

    cubes = {}
    canon["cubes"] = {}
    for cname, cd in doc.get("cubes", {}).items():
        dref = _need(cd, "domain", f"cubes.{cname}")
        if dref not in domains:
            raise ValidationError(f"cube {cname!r} references unknown domain {dref!r}")
        comps = [_expr(e, f"cubes.{cname}.map") for e in _need(cd, "map", f"cubes.{cname}")]
        dom = domains[dref]
        if any(max(c.free_vars, default=0) > dom.dim for c in comps):
            raise ValidationError(f"cube {cname!r} reads more variables than its domain has")
        cubes[cname] = GeneralizedCube(dom, SmoothMap(tuple(comps), dom.dim), space, cname)
        canon["cubes"][cname] = {"domain": dref, "map": [c.text for c in comps]}

    forms = {}
    canon["forms"] = {}
    for fname, fd in doc.get("forms", {}).items():
        kind = fd.get("kind", "point")
        degree = int(_need(fd, "degree", f"forms.{fname}"))
        terms = _canonical_terms(fd.get("terms", []), f"forms.{fname}")
        raw = [(parse_expr(t["coeff"]), tuple(t["index"])) for t in terms]
        if kind == "point":
            forms[fname] = PointForm(space.generators, space.dim, degree, tuple(raw), space)
        elif kind == "ambient":
            forms[fname] = AmbientForm(len(space.generators), degree, tuple(raw))
        else:
            raise ParseError(f"forms.{fname}: unknown kind {kind!r}")
        canon["forms"][fname] = {"kind": kind, "degree": degree, "terms": terms}

    chains = {}
    canon["chains"] = {}
    for chname, entries in doc.get("chains", {}).items():
        terms = []
        for j, e in enumerate(entries):
            cref = _need(e, "cube", f"chains.{chname}[{j}]")
            if cref not in cubes:
                raise ValidationError(f"chain {chname!r} references unknown cube {cref!r}")
            terms.append((cubes[cref], float(e.get("coeff", 1.0))))
        dims = {c.dim for c, _ in terms}
        if len(dims) > 1:
            raise ValidationError(f"chain {chname!r} mixes cube dimensions {sorted(dims)}")
        chains[chname] = Chain.from_terms(dims.pop() if dims else 0, terms)
        canon["chains"][chname] = [{"coeff": float(e.get("coeff", 1.0)), "cube": e["cube"]} for e in entries]

    quad, ext = _configs(doc.get("config", {}), defaults)
    canon["config"] = {"quadrature": quad.to_dict(), "extension": ext.to_dict()}

    tasks = []
    seen = set()
    for j, t in enumerate(_need(doc, "tasks", "scenario")):
        tid = str(t.get("id", f"task{j + 1}"))
        if tid in seen:
            raise ValidationError(f"duplicate task id {tid!r}")
        seen.add(tid)
        ttype = _need(t, "type", f"tasks[{j}]")
        if ttype not in TASK_TYPES:
            raise ParseError(f"tasks[{j}]: unknown task type {ttype!r}")
        task = dict(t)
        task["id"] = tid
        _check_refs(task, cubes, forms, chains)
        tasks.append(task)
    canon["tasks"] = tasks
    canon = _jsonable(canon)
    return Scenario(canon, space, domains, cubes, forms, chains, quad, ext, tasks)


def _check_refs(task: dict, cubes, forms, chains):
    def ref(key, table, what):
        name = task.get(key)
        if name is not None and name not in table:
            raise ValidationError(f"task {task['id']!r} references unknown {what} {name!r}")

    ref("cube", cubes, "cube")
    ref("chain", chains, "chain")
    for key in ("form", "eta", "eta_tilde"):
        ref(key, forms, "form")
    for name in task.get("forms", []):
        if name not in forms:
            raise ValidationError(f"task {task['id']!r} references unknown form {name!r}")
    t = task["type"]
    if t in ("validate", "extendability") and "cube" not in task:
        raise ValidationError(f"task {task['id']!r} needs a cube")
    if t == "integrate" and ("form" not in task or ("cube" in task) == ("chain" in task)):
        raise ValidationError(f"task {task['id']!r} needs a form and exactly one of cube/chain")
    if t == "stokes" and ("chain" not in task or "eta_tilde" not in task):
        raise ValidationError(f"task {task['id']!r} needs a chain and eta_tilde")
    if t == "stokes":
        et = forms[task["eta_tilde"]]
        if not isinstance(et, AmbientForm) or et.degree != chains[task["chain"]].dim - 1:
            raise ValidationError(f"task {task['id']!r}: eta_tilde must be an ambient form of degree n-1")
    if t in ("derivative", "d-commute") and not isinstance(forms.get(task.get("form")), AmbientForm):
        raise ValidationError(f"task {task['id']!r} needs an ambient form")
    if t == "integrate":
        target = cubes[task["cube"]] if "cube" in task else chains[task["chain"]]
        f = forms[task["form"]]
        if isinstance(f, AmbientForm) and f.dim != target_dim(target):
            raise ValidationError(f"task {task['id']!r}: ambient form does not match the space")
    if t == "property-suite" and task.get("suite") not in SUITES:
        raise ValidationError(f"task {task['id']!r}: unknown suite {task.get('suite')!r}")


def target_dim(target) -> int:
    if isinstance(target, GeneralizedCube):
        return target.map.output_dim
    return target.entries[0][0].map.output_dim if target.entries else 0


# ---------------------------------------------------------------------------
# task execution


def _close(value, expect, tol) -> bool:
    if expect is None:
        return True
    if tol == 0:
        return value == expect
    return abs(value - expect) <= tol


def _run_validate(sc: Scenario, task: dict, opts: dict):
    res = sc.cubes[task["cube"]].validate()
    out = {"valid": res.valid}
    if not res.valid:
        out["reason"] = res.reason
        out["point"] = [str(c) for c in res.point] if res.point is not None else None
    return res.valid, out


def _run_integrate(sc: Scenario, task: dict, opts: dict):
    form = sc.forms[task["form"]]
    tol = opts.get("tol", task.get("tol", 1e-8))
    try:
        if "cube" in task:
            value = integrate_cube(sc.cubes[task["cube"]], form, sc.quad, sc.ext)
        else:
            value = integrate_chain(sc.chains[task["chain"]], form, sc.quad, sc.ext)
    except NotIntegrable as exc:
        return False, {"error": "NotIntegrable", "message": str(exc), "cube": exc.cube, "witness": exc.witness}
    out = {"value": value}
    if "expect" in task:
        out["expect"] = task["expect"]
        out["tol"] = tol
    return _close(value, task.get("expect"), tol), out


def _run_extendability(sc: Scenario, task: dict, opts: dict):
    cube = sc.cubes[task["cube"]]
    forms = {n: sc.forms[n] for n in task.get("forms", [])}
    rep = extendability_report(cube, forms=forms, cfg=sc.ext)
    out = rep.to_dict()
    ok = True
    expect = task.get("expect", {})
    for key in ("uniform", "tangent"):
        if key in expect:
            ok &= getattr(rep, key) == expect[key]
    for name, want in expect.get("forms", {}).items():
        ok &= rep.forms.get(name) == want
    acc = task.get("accuracy")
    if acc is not None:
        g = sc.space.generators[int(acc.get("generator", 1)) - 1]
        f = normalize(compose(g, cube.map.components))
        ref = parse_expr(acc["reference"])
        n = int(acc.get("targets", 100))
        targets = [(float(x),) for x in np.linspace(0.0, 1.0, n)] if cube.dim == 1 else cube.domain.grid(n)
        res = extend(f.eval, cube.domain, sc.ext, probes=targets, closed_form=False)
        worst = max(abs(c["value"] - ref.eval(tuple(c["target"]))) for c in res.certificates) \
            if res.extended else float("inf")
        tol = float(acc.get("tol", 1e-6))
        out["accuracy"] = {"targets": n, "max_error": worst, "tol": tol, "verdict": res.verdict}
        ok &= res.extended and worst <= tol
    return ok, out


def _run_stokes(sc: Scenario, task: dict, opts: dict):
    chain = sc.chains[task["chain"]]
    eta = sc.forms[task["eta"]] if "eta" in task else None
    et = sc.forms[task["eta_tilde"]]
    tol = opts.get("tol", task.get("tol", 1e-6))
    rep = verify_stokes(chain, eta, et, sc.space, sc.quad, sc.ext, tol=tol)
    out = rep.to_dict()
    ok = rep.passed
    etol = task.get("expect_tol", tol)
    for side in ("lhs", "rhs"):
        if side in task.get("expect", {}):
            ok &= abs(getattr(rep, side) - task["expect"][side]) <= etol
    return ok, out


def _run_dcommute(sc: Scenario, task: dict, opts: dict):
    fmap = SmoothMap.of([parse_expr(e) for e in task["map"]])
    chi = sc.forms[task["form"]]
    d_op = exterior_derivative
    if task.get("corrupt"):
        def d_op(f):
            return exterior_derivative(f).scale(-1.0)
    res = d_commutes_pullback_check(fmap, chi, samples=int(task.get("samples", 100)),
                                    seed=opts.get("seed", int(task.get("seed", 0))), d_op=d_op)
    return res.passed, res.to_dict()


def _run_derivative(sc: Scenario, task: dict, opts: dict):
    form = sc.forms[task["form"]]
    d = exterior_derivative(form)
    out = {
        "form": task["form"],
        "d_terms": [{"coeff": c.text, "index": list(i)} for c, i in d.terms],
        "d_is_zero": d.is_zero,
    }
    ok = True
    if "expect_zero" in task:
        ok &= d.is_zero == task["expect_zero"]
    if "point" in task:
        m = tuple(_number(c) for c in task["point"])
        vectors = [np.asarray(v, dtype=float) for v in task["vectors"]]
        value = restrict(d, sc.space).eval(tuple(float(c) for c in m), vectors)
        out["restricted_value"] = value
        out["point_in_space"] = sc.space.contains(m)
        if "expect_value" in task:
            ok &= abs(value - task["expect_value"]) <= task.get("tol", 1e-12)
    return ok, out


def _run_eval_form(sc: Scenario, task: dict, opts: dict):
    form = sc.forms[task["form"]]
    m = tuple(float(_number(c)) for c in task["point"])
    value = form.eval(m, [np.asarray(v, dtype=float) for v in task.get("vectors", [])])
    return _close(value, task.get("expect"), task.get("tol", 1e-12)), {"value": value}


def _suite_stokes(task, seed):
    rows = suites.run_stokes_suite(int(task.get("count", 20)), seed, float(task.get("tol", 1e-6)))
    return all(r["passed"] for r in rows), {"instances": rows,
                                            "max_deviation": max((r["deviation"] for r in rows), default=0.0)}


def _suite_dd(task, seed):
    worst = suites.dd_zero_suite(int(task.get("count", 100)), int(task.get("points", 100)), seed)
    return worst <= float(task.get("tol", 1e-10)), {"max_coefficient": worst}


def _suite_commutation(task, seed):
    rows = suites.commutation_suite(int(task.get("count", 50)), int(task.get("points", 100)), seed)
    worst = max((r.max_deviation for r in rows), default=0.0)
    return all(rows), {"pairs": len(rows), "max_deviation": worst}


def _suite_canonical(task, seed):
    devs = suites.canonical_suite(int(task.get("count", 50)), seed)
    rej = suites.rejection_suite(int(task.get("rejections", 20)), seed)
    worst = max(devs, default=0.0)
    rejected = sum(1 for r in rej if not r.passed and r.witness is not None)
    ok = worst <= float(task.get("tol", 1e-10)) and rejected == len(rej)
    return ok, {"forms": len(devs), "max_deviation": worst, "rejected": rejected, "nonhomogeneous": len(rej)}


SUITES = {
    "stokes": _suite_stokes,
    "dd": _suite_dd,
    "commutation": _suite_commutation,
    "canonical": _suite_canonical,
}


def _run_suite(sc: Scenario, task: dict, opts: dict):
    seed = opts.get("seed", int(task.get("seed", 0)))
    return SUITES[task["suite"]](task, seed)


RUNNERS = {
    "validate": _run_validate,
    "integrate": _run_integrate,
    "extendability": _run_extendability,
    "stokes": _run_stokes,
    "d-commute": _run_dcommute,
    "derivative": _run_derivative,
    "eval-form": _run_eval_form,
    "property-suite": _run_suite,
}


def run_scenario(sc: Scenario, tol: float | None = None, seed: int | None = None) -> dict:
    """Execute every task in declaration order and assemble the report.

    A task passes when its outcome matches its expectation; with
    ``expect_fail`` the check itself must fail for the task to pass.
    """
    opts: dict = {}
    if tol is not None:
        opts["tol"] = tol
    if seed is not None:
        opts["seed"] = seed
    results = []
    timings = {}
    for task in sc.tasks:
        start = time.perf_counter()
        try:
            ok, out = RUNNERS[task["type"]](sc, task, opts)
        except DiffSpaceError as exc:
            ok, out = False, {"error": type(exc).__name__, "message": str(exc)}
            witness = getattr(exc, "witness", None)
            if witness is not None:
                out["witness"] = witness
        timings[task["id"]] = time.perf_counter() - start
        expect_fail = bool(task.get("expect_fail", False))
        results.append({
            "id": task["id"],
            "type": task["type"],
            "expect_fail": expect_fail,
            "check_passed": bool(ok),
            "passed": bool(ok) != expect_fail,
            "result": out,
        })
    passed = sum(r["passed"] for r in results)
    return {
        "scenario": sc.name,
        "anchor": sc.doc.get("anchor", ""),
        "tasks": results,
        "summary": {"total": len(results), "passed": passed, "failed": len(results) - passed,
                    "all_passed": passed == len(results)},
        "timings": timings,
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and (x != x or x in (float("inf"), float("-inf"))):
        return str(x)
    return x


def report_json(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=2, ensure_ascii=False) + "\n"
