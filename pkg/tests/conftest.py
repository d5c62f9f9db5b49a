import random
from dataclasses import dataclass

import pytest

from ultraduality._rational import Q
from ultraduality.duality import random_measure, random_ultrametric_element
from ultraduality.tree import UltrametricElement, build_tree, random_tree
from ultraduality.walk import Walk, WalkKernels, compute_kernels, random_walk, simple_random_walk

INSTANCE_SEED = 20240917
N_INSTANCES = 100

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: dict = {}


@dataclass
class Instance:
    index: int
    walk: Walk
    kernels: WalkKernels
    phi: UltrametricElement
    mu: dict
    rng_seed: int

    @property
    def tree(self):
        return self.walk.tree


def b2_tree():
    # o = 0, a = 1, b = 2, leaves 3, 4 under a and 5, 6 under b
    return build_tree({"root": 0, "children": {0: [1, 2], 1: [3, 4], 2: [5, 6]}})


@pytest.fixture(scope="session")
def b2():
    t = b2_tree()
    w = simple_random_walk(t)
    return t, w, compute_kernels(w)


@pytest.fixture(scope="session")
def b2_process():
    t = b2_tree()
    phi = UltrametricElement(t, {0: Q(3, 2), 1: Q(1, 2), 2: Q(1, 2)})
    mu = {l: Q(1, 4) for l in t.leaves}
    return t, phi, mu


def make_instances(n=N_INSTANCES, seed=INSTANCE_SEED):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        t = random_tree(rng, max_vertices=200)
        w = random_walk(t, rng)
        out.append(Instance(i, w, compute_kernels(w), random_ultrametric_element(t, rng),
                            random_measure(t, rng), rng.randrange(2**32)))
    return out


@pytest.fixture(scope="session")
def instances():
    return make_instances()


@pytest.fixture(scope="session")
def small_instances(instances):
    return [inst for inst in instances if inst.tree.n_vertices <= 60][:15]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
