import random

import pytest

from conftest import b2_tree
from ultraduality._rational import ONE, Q, ZERO
from ultraduality.tree import TreeError, random_tree
from ultraduality.walk import (WalkError, branch_mass_formula, check_kernel_identities,
                               compute_kernels, dense_oracle, dirichlet_form_tree,
                               first_step_hitting, green_function_column, poisson_transform,
                               random_walk, simple_random_walk, validate_walk)


def test_b2_oracle_values(b2):
    # frozen from the dense oracle before comparing the recursions
    _, w, _ = b2
    o = dense_oracle(w)
    assert o.G(0, 0) == Q(3, 2)
    assert o.G(1, 1) == Q(5, 4)
    assert o.G(1, 0) == Q(1, 2)
    assert o.F(1, 0) == Q(1, 3)
    assert o.F(0, 1) == Q(3, 5)
    assert [o.G(0, l) for l in (3, 4, 5, 6)] == [Q(1, 4)] * 4
    assert [o.G(1, l) for l in (3, 4, 5, 6)] == [Q(5, 12), Q(5, 12), Q(1, 12), Q(1, 12)]


def test_b2_first_step_oracle(b2):
    _, w, _ = b2
    assert first_step_hitting(w, 0) == [ONE, Q(1, 3), Q(1, 3), 0, 0, 0, 0]
    assert first_step_hitting(w, 1)[0] == Q(3, 5)


def test_b2_recursions(b2):
    _, _, k = b2
    assert k.F_edge[(1, 0)] == Q(1, 3)
    assert k.F_edge[(0, 1)] == Q(3, 5)
    assert k.F_edge[(3, 1)] == 0
    assert k.G_diag[0] == Q(3, 2)
    assert k.G_diag[1] == Q(5, 4)
    assert k.G(1, 0) == Q(1, 2)
    assert k.m == {0: ONE, 1: Q(3, 2), 2: Q(3, 2)}
    assert k.a[(0, 1)] == Q(1, 2)
    assert k.a[(1, 3)] == Q(1, 2)
    assert k.nu(1) == {3: Q(5, 12), 4: Q(5, 12), 5: Q(1, 12), 6: Q(1, 12)}


def test_b2_poisson_and_dirichlet(b2):
    _, _, k = b2
    u = {3: 1, 4: 1, 5: 0, 6: 0}
    h = poisson_transform(k, u)
    assert h == [Q(1, 2), Q(5, 6), Q(1, 6), 1, 1, 0, 0]
    assert dirichlet_form_tree(h, h, k.a) == Q(1, 6)


def test_poisson_is_harmonic(small_instances):
    rng = random.Random(5)
    for inst in small_instances:
        t = inst.tree
        u = {l: Q(rng.randint(-5, 5), rng.randint(1, 4)) for l in t.leaves}
        h = poisson_transform(inst.kernels, u)
        Ph = inst.walk.apply(h)
        assert all(Ph[x] == h[x] for x in t.interior)
        assert all(h[l] == u[l] for l in t.leaves)


def test_green_column_is_dirichlet_representer(small_instances):
    # for f vanishing on the leaves, D(f, G(., x0)) = m(x0) f(x0)
    rng = random.Random(8)
    for inst in small_instances:
        t, k = inst.tree, inst.kernels
        x0 = rng.choice(t.interior)
        g = green_function_column(k, x0)
        f = [ZERO if t.is_leaf(x) else Q(rng.randint(-9, 9), 7) for x in range(t.n_vertices)]
        assert dirichlet_form_tree(f, g, k.a) == k.m[x0] * f[x0]


def test_green_column_rejects_leaf(b2):
    with pytest.raises(TreeError):
        green_function_column(b2[2], 3)


def test_identities_on_regular_and_random():
    rng = random.Random(11)
    for _ in range(10):
        t = random_tree(rng, max_vertices=50)
        k = compute_kernels(random_walk(t, rng))
        bad = [c for c in check_kernel_identities(k) if not c.passed]
        assert not bad


def test_recursion_equals_oracle(small_instances):
    for inst in small_instances:
        t, k = inst.tree, inst.kernels
        o = dense_oracle(inst.walk)
        for x in t.interior:
            for y in range(t.n_vertices):
                assert k.F(x, y) == o.F(x, y)
                assert k.G(x, y) == o.G(x, y)
        for target in t.interior[:3]:
            assert first_step_hitting(inst.walk, target) == k.F_column(target)


def test_branch_mass_formula_all_pairs(small_instances):
    for inst in small_instances[:5]:
        t, k = inst.tree, inst.kernels
        for x in range(t.n_vertices):
            nu = k.nu(x) if not t.is_leaf(x) else {l: ONE if l == x else ZERO for l in t.leaves}
            for y in range(t.n_vertices):
                mass = sum((nu[l] for l in t.leaves_below[y]), ZERO)
                assert branch_mass_formula(k, x, y) == mass


def test_validate_walk_errors():
    t = b2_tree()
    good = simple_random_walk(t).p
    bad = dict(good)
    bad[(0, 1)] = Q(1, 3)
    with pytest.raises(WalkError, match="sum"):
        validate_walk(t, bad)
    bad = dict(good)
    bad[(0, 5)] = Q(0)
    with pytest.raises(WalkError):
        validate_walk(t, bad)
    bad = dict(good)
    bad[(1, 3)], bad[(1, 4)] = Q(0), Q(2, 3)
    with pytest.raises(WalkError):
        validate_walk(t, bad)
    bad = dict(good)
    bad[(3, 1)] = ONE
    with pytest.raises(WalkError):
        validate_walk(t, bad)
    with pytest.raises(WalkError):
        validate_walk(t, {**good, (0, 1): 0.5})


def test_validate_walk_nested_form():
    t = b2_tree()
    nested = {0: {1: Q(1, 2), 2: Q(1, 2)}, 1: {0: Q(1, 3), 3: Q(1, 3), 4: Q(1, 3)},
              2: {0: Q(1, 3), 5: Q(1, 3), 6: Q(1, 3)}}
    assert validate_walk(t, nested).p == simple_random_walk(t).p
