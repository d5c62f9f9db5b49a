import json

import pytest

from conftest import b2_tree
from ultraduality._rational import Q, as_rational, format_rational, parse_rational
from ultraduality.io import (ParseError, load_json, mu_from_json, phi_from_json, sigma_from_json,
                             space_from_json, tree_from_json, walk_from_json)
from ultraduality.tree import TreeError
from ultraduality.walk import WalkError, simple_random_walk


def test_rational_format_roundtrip():
    for v in (Q(0), Q(3), Q(-7, 4), Q(10**30 + 1, 3**40)):
        assert parse_rational(format_rational(v)) == v
    assert format_rational(Q(6, 4)) == "3/2"
    assert format_rational(Q(4, 2)) == "2"


@pytest.mark.parametrize("bad", ["", "1/0", "a/b", "1.5", "1//2"])
def test_parse_rational_rejects(bad):
    with pytest.raises(ValueError):
        parse_rational(bad)


def test_as_rational_rejects_float_and_bool():
    with pytest.raises(TypeError):
        as_rational(0.5)
    with pytest.raises(TypeError):
        as_rational(True)


def test_json_roundtrips(b2, b2_process):
    t, w, _ = b2
    _, phi, mu = b2_process
    t2 = tree_from_json(json.loads(json.dumps(t.to_json())))
    assert (t2.root, t2.parent, t2.children) == (t.root, t.parent, t.children)
    assert walk_from_json(t2, json.loads(json.dumps(w.to_json()))).p == w.p
    assert dict(phi_from_json(t2, json.loads(json.dumps(phi.to_json()))).items()) == dict(phi.items())
    assert mu_from_json(t2, {str(l): format_rational(v) for l, v in mu.items()}) == mu


def test_instances_roundtrip(small_instances):
    for inst in small_instances[:5]:
        t = tree_from_json(json.loads(json.dumps(inst.tree.to_json())))
        assert walk_from_json(t, json.loads(json.dumps(inst.walk.to_json()))).p == inst.walk.p


def test_load_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_json(p)
    with pytest.raises(ParseError):
        load_json(tmp_path / "missing.json")


@pytest.mark.parametrize("obj", [[], {"children": {}}, {"root": 0, "children": {"x": [1]}},
                                 {"root": 0, "children": {"0": 5}}])
def test_tree_shape_errors(obj):
    with pytest.raises(ParseError):
        tree_from_json(obj)


def test_tree_semantic_error():
    with pytest.raises(TreeError):
        tree_from_json({"root": 0, "children": {"0": [1]}})


def test_walk_errors():
    t = b2_tree()
    with pytest.raises(ParseError):
        walk_from_json(t, {"p": {"0": {"1": 0.5, "2": "1/2"}}})
    with pytest.raises(ParseError):
        walk_from_json(t, {"q": {}})
    with pytest.raises(WalkError):
        walk_from_json(t, {"p": {"0": {"1": "1/2", "2": "1/2"}}})


def test_space_and_sigma():
    s = space_from_json({"points": ["a", "b"], "dist": [["0", "1"], ["1", "0"]]})
    assert s.dist[0][1] == 1
    with pytest.raises(ParseError):
        space_from_json({"points": ["a", "b"]})
    assert sigma_from_json({"kind": "standard"}).kind == "standard"
    tab = sigma_from_json({"kind": "table", "cdf": [["1/2", "1/4"], ["3/2", 0.5]]})
    assert tab.table[0] == (Q(1, 2), Q(1, 4))
    assert not tab.exact
    with pytest.raises(ParseError):
        sigma_from_json({"kind": "table", "cdf": [["1"]]})
    with pytest.raises(ParseError):
        sigma_from_json({"kind": "weird"})


def test_simple_walk_json_is_rational_strings(b2):
    t, _, _ = b2
    js = simple_random_walk(t).to_json()
    assert js["p"]["1"]["3"] == "1/3"
