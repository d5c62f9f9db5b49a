import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import b2_tree
from ultraduality._rational import Q
from ultraduality.duality import random_ultrametric_element
from ultraduality.tree import (TreeError, UltrametricElement, UltrametricError, UltrametricSpace,
                               ball, boundary_distance, boundary_metric, build_tree,
                               canonical_form, confluent, generate_regular_tree, random_tree,
                               tree_from_ultrametric, validate_measure)


def test_b2_structure():
    t = b2_tree()
    assert t.leaves == (3, 4, 5, 6)
    assert t.interior == (0, 1, 2)
    assert t.lca(3, 5) == 0
    assert t.lca(3, 4) == 1
    assert t.geodesic(3, 5) == [3, 1, 0, 2, 5]
    assert t.neighbours(1) == (0, 3, 4)
    assert [list(t.leaves_below[v]) for v in (0, 1, 2)] == [[3, 4, 5, 6], [3, 4], [5, 6]]


def test_confluent_depends_on_base():
    t = b2_tree()
    assert confluent(t, 3, 5, 0) == 0
    assert confluent(t, 3, 5, 1) == 1
    assert confluent(t, 3, 5, 2) == 2
    assert confluent(t, 3, 4, 2) == 1


@pytest.mark.parametrize("desc", [
    {"root": 0, "children": {0: [1, 2], 1: [0]}},
    {"root": 0, "children": {0: [1, 2], 3: [1]}},
    {"root": 0, "children": {0: [1]}},
    {"root": 0, "children": {0: [1, 2], 1: [3]}},
    {"root": 0, "children": {0: [1, 3]}},
    {"root": 0, "children": {}},
])
def test_build_tree_rejects(desc):
    with pytest.raises(TreeError):
        build_tree(desc)


def test_degree_one_allowed_with_flag():
    t = build_tree({"root": 0, "children": {0: [1, 2], 1: [3]}}, allow_degree_one=True)
    assert t.leaves == (2, 3)


def test_regular_tree_counts():
    t = generate_regular_tree(3, 3)
    assert len(t.leaves) == 27
    assert t.n_vertices == 1 + 3 + 9 + 27
    assert list(t.bfs_order) == list(range(t.n_vertices))


def test_random_tree_sizes():
    rng = random.Random(3)
    for _ in range(30):
        t = random_tree(rng, max_vertices=200)
        assert t.n_vertices <= 200
        assert all(len(t.children[v]) >= 2 for v in t.interior)
        assert list(t.bfs_order) == list(range(t.n_vertices))


def test_ultrametric_element_validation():
    t = b2_tree()
    with pytest.raises(ValueError):
        UltrametricElement(t, {0: Q(1, 2), 1: Q(1, 2), 2: Q(1, 4)})
    with pytest.raises(ValueError):
        UltrametricElement(t, {0: Q(1), 1: Q(-1, 2), 2: Q(1, 4)})
    with pytest.raises(ValueError):
        UltrametricElement(t, {0: Q(1), 1: Q(1, 2)})


def test_boundary_distance_and_balls():
    t = b2_tree()
    phi = UltrametricElement(t, {0: Q(3, 2), 1: Q(1, 2), 2: Q(1, 4)})
    assert boundary_distance(t, phi, 3, 4) == Q(1, 2)
    assert boundary_distance(t, phi, 5, 6) == Q(1, 4)
    assert boundary_distance(t, phi, 4, 6) == Q(3, 2)
    assert boundary_distance(t, phi, 4, 4) == 0
    assert ball(t, phi, 3, Q(1, 4)) == 3
    assert ball(t, phi, 3, Q(1, 2)) == 1
    assert ball(t, phi, 3, 1.0) == 1
    assert ball(t, phi, 5, Q(1, 4)) == 2
    assert ball(t, phi, 5, Q(2)) == 0
    with pytest.raises(ValueError):
        ball(t, phi, 3, 0)


def test_space_validation_reports_triple():
    pts = ["p", "q", "r"]
    d = [[0, 1, 3], [1, 0, 1], [3, 1, 0]]
    with pytest.raises(UltrametricError) as info:
        UltrametricSpace(pts, d)
    assert set(info.value.triple) == {"p", "q", "r"}


@pytest.mark.parametrize("d", [
    [[0, 1], [2, 0]],
    [[1, 1], [1, 0]],
    [[0, -1], [-1, 0]],
    [[0, 0], [0, 0]],
])
def test_space_rejects_non_metrics(d):
    with pytest.raises(UltrametricError):
        UltrametricSpace(["a", "b"], d)


def test_tree_from_three_points():
    space = UltrametricSpace(["r", "p", "q"], [[0, 2, 2], [2, 0, 1], [2, 1, 0]])
    t, phi, labels = tree_from_ultrametric(space)
    assert t.n_vertices == 5
    assert phi[t.root] == 2
    inner = [v for v in t.interior if v != t.root][0]
    assert phi[inner] == 1
    assert {labels[l] for l in t.leaves_below[inner]} == {"p", "q"}


def test_canonical_form_distinguishes():
    t = b2_tree()
    a = UltrametricElement(t, {0: Q(3, 2), 1: Q(1, 2), 2: Q(1, 4)})
    b = UltrametricElement(t, {0: Q(3, 2), 1: Q(1, 4), 2: Q(1, 2)})
    assert canonical_form(t, a) == canonical_form(t, b)
    labels = {l: l for l in t.leaves}
    assert canonical_form(t, a, labels) != canonical_form(t, b, labels)


def test_validate_measure():
    t = b2_tree()
    assert validate_measure(t, {3: Q(1, 4), 4: Q(1, 4), 5: Q(1, 4), 6: Q(1, 4)})[3] == Q(1, 4)
    with pytest.raises(ValueError, match="fully supported"):
        validate_measure(t, {3: Q(1, 2), 4: Q(0), 5: Q(1, 4), 6: Q(1, 4)})
    with pytest.raises(ValueError, match="not 1"):
        validate_measure(t, {3: Q(1, 2), 4: Q(1, 2), 5: Q(1, 4), 6: Q(1, 4)})
    with pytest.raises(ValueError, match="non-leaf"):
        validate_measure(t, {0: Q(1)})


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_metric_roundtrip_property(seed):
    rng = random.Random(seed)
    t = random_tree(rng, max_vertices=40)
    phi = random_ultrametric_element(t, rng)
    d = boundary_metric(t, phi)
    t2, phi2, labels = tree_from_ultrametric(UltrametricSpace(list(t.leaves), d))
    assert canonical_form(t2, phi2, labels) == canonical_form(t, phi, {l: l for l in t.leaves})
