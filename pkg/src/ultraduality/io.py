"""JSON file formats.

Rationals are strings ``"p/q"`` in lowest terms (``"p"`` for integers).

    tree    {"root": 0, "children": {"0": [1, 2], ...}}
    phi     {"0": "3/2", "1": "1/2", ...}             interior vertices only
    mu      {"3": "1/4", ...}                         leaves only
    walk    {"p": {"0": {"1": "1/2", "2": "1/2"}, ...}}
    space   {"points": [...], "dist": [["0", "1/2"], ...]}
    sigma   {"kind": "standard"} or {"kind": "table", "cdf": [["r", "F(r)"], ...]}
"""

from __future__ import annotations

import json
from pathlib import Path

from ._rational import parse_rational
from .boundary import SigmaMeasure
from .tree import Tree, UltrametricElement, UltrametricSpace, build_tree, validate_measure
from .walk import validate_walk


class ParseError(ValueError):
    """The input is not well-formed JSON of the expected shape."""


def load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None


def dump_json(obj, path=None, indent: int | None = 2) -> str:
    text = json.dumps(obj, indent=indent, sort_keys=False)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def _rational(s, where: str):
    if isinstance(s, bool) or not isinstance(s, (str, int)):
        raise ParseError(f"{where}: expected a rational string, got {s!r}")
    try:
        return parse_rational(str(s))
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def _mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected a JSON object")
    return obj


def _int_key(k, where: str) -> int:
    try:
        return int(k)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: non-integer vertex id {k!r}") from None


def tree_from_json(obj, allow_degree_one: bool = False) -> Tree:
    obj = _mapping(obj, "tree")
    if "root" not in obj:
        raise ParseError("tree: missing 'root'")
    children = _mapping(obj.get("children", {}), "tree.children")
    for k, v in children.items():
        _int_key(k, "tree.children")
        if not isinstance(v, list):
            raise ParseError(f"tree.children[{k}]: expected a list")
        for c in v:
            _int_key(c, f"tree.children[{k}]")
    return build_tree({"root": _int_key(obj["root"], "tree.root"), "children": children},
                      allow_degree_one=allow_degree_one)


def phi_from_json(tree: Tree, obj) -> UltrametricElement:
    obj = _mapping(obj, "phi")
    return UltrametricElement(tree, {_int_key(k, "phi"): _rational(v, f"phi[{k}]")
                                     for k, v in obj.items()})


def mu_from_json(tree: Tree, obj) -> dict:
    obj = _mapping(obj, "mu")
    return validate_measure(tree, {_int_key(k, "mu"): _rational(v, f"mu[{k}]")
                                   for k, v in obj.items()})


def walk_from_json(tree: Tree, obj):
    obj = _mapping(obj, "walk")
    rows = _mapping(obj.get("p"), "walk.p")
    p = {}
    for x, row in rows.items():
        row = _mapping(row, f"walk.p[{x}]")
        for y, v in row.items():
            p[(_int_key(x, "walk.p"), _int_key(y, f"walk.p[{x}]"))] = _rational(v, f"walk.p[{x}][{y}]")
    return validate_walk(tree, p)


def space_from_json(obj) -> UltrametricSpace:
    obj = _mapping(obj, "space")
    pts = obj.get("points")
    dist = obj.get("dist")
    if not isinstance(pts, list) or not isinstance(dist, list):
        raise ParseError("space: need 'points' and 'dist' lists")
    rows = []
    for i, row in enumerate(dist):
        if not isinstance(row, list):
            raise ParseError(f"space.dist[{i}]: expected a list")
        rows.append([_rational(v, f"space.dist[{i}]") for v in row])
    return UltrametricSpace(pts, rows)


def sigma_from_json(obj) -> SigmaMeasure:
    obj = _mapping(obj, "sigma")
    kind = obj.get("kind")
    if kind == "standard":
        return SigmaMeasure.standard()
    if kind == "table":
        cdf = obj.get("cdf")
        if not isinstance(cdf, list):
            raise ParseError("sigma: 'table' needs a 'cdf' list")
        pairs = []
        for i, pair in enumerate(cdf):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError(f"sigma.cdf[{i}]: expected [r, F(r)]")
            pairs.append((_rational(pair[0], f"sigma.cdf[{i}]"),
                          pair[1] if isinstance(pair[1], float)
                          else _rational(pair[1], f"sigma.cdf[{i}]")))
        return SigmaMeasure.tabulated(pairs)
    raise ParseError(f"sigma: unknown kind {kind!r}")
