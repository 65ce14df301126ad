"""Command-line scenario runner.

Exit codes: 0 all tasks passed, 1 some task failed, 2 parse error,
3 validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .builtins import builtin_names, get_builtin, list_builtins
from .errors import ParseError, ValidationError
from .scenario import load_scenario, report_json, run_scenario

CONFIG_ENV = "DIFFSPACE_CONFIG"

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3


def _default_config() -> dict | None:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return None
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc


def _load_doc(source: str) -> dict:
    if source in builtin_names() and not Path(source).exists():
        return get_builtin(source)
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {source}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: invalid JSON: {exc}") from exc


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    try:
        sc = load_scenario(_load_doc(args.scenario), _default_config())
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = run_scenario(sc, tol=args.tol, seed=args.seed)
    _write(report_json(report), args.out)
    s = report["summary"]
    print(f"{sc.name}: {s['passed']}/{s['total']} tasks passed", file=sys.stderr)
    return EXIT_OK if s["all_passed"] else EXIT_FAIL


def cmd_list(args) -> int:
    for entry in list_builtins():
        print(f"{entry['name']:<20} {entry['description']}  [{entry['anchor']}]")
    return EXIT_OK


def cmd_emit(args) -> int:
    try:
        doc = get_builtin(args.name)
    except KeyError as exc:
        print(str(exc.args[0]), file=sys.stderr)
        return EXIT_PARSE
    sc = load_scenario(doc)
    _write(sc.to_json(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffspace", description="Integrate forms on cubes over differential spaces.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or built-in scenario")
    r.add_argument("scenario", help="path to a scenario JSON file, or a built-in name")
    r.add_argument("--out", help="write the report here instead of stdout")
    r.add_argument("--tol", type=float, help="override integration and Stokes tolerances")
    r.add_argument("--seed", type=int, help="override task seeds")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    e = sub.add_parser("emit", help="write a built-in scenario as JSON")
    e.add_argument("name")
    e.add_argument("--out", help="output path (default stdout)")
    e.set_defaults(func=cmd_emit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
