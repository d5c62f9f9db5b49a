"""Seeded Monte Carlo for the walk and for the discrete jump chain.

Random numbers come from xorshift64* (Vigna 2016) so that streams are
reproducible across implementations:

    x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27     (mod 2**64)
    output = x * 0x2545F4914F6CDD1D                 (mod 2**64)

The 64-bit state is initialised by one round of splitmix64 on the seed, so
seed 0 is valid.  Uniform doubles use the top 53 bits of the output:
``u = (out >> 11) * 2**-53``.  ``uniform_open`` redraws ``u == 0``.
Worker streams are derived by ``split_seed(seed, index)``, which applies
splitmix64 to ``seed + index * 0x9E3779B97F4A7C15``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import JumpProcessSpec, semigroup_operator
from .tree import ball, branch_masses
from .walk import Walk, compute_kernels

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, index: int) -> int:
    return splitmix64((seed + index * _GOLDEN) & MASK64)


class XorShift64Star:
    """xorshift64* generator; see the module docstring for the constants."""

    def __init__(self, seed: int):
        s = splitmix64(seed & MASK64)
        self.state = s or _GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self) -> float:
        """Uniform in ``[0, 1)``."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_open(self) -> float:
        """Uniform in ``(0, 1)``."""
        while True:
            u = self.uniform()
            if u > 0.0:
                return u


@dataclass(frozen=True)
class SimConfig:
    seed: int
    trials: int
    start: int
    max_steps: int = 100_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


def _pick(cum: list, targets: list, u: float):
    for c, y in zip(cum, targets):
        if u < c:
            return y
    return targets[-1]


def _tv(empirical: dict, exact: dict) -> float:
    return 0.5 * sum(abs(empirical.get(k, 0.0) - float(v)) for k, v in exact.items())


def simulate_walk(walk: Walk, config: SimConfig, kernels=None) -> dict:
    """Run ``trials`` walks from ``config.start`` until absorption.

    Returns the empirical absorption frequencies, the exact limit
    distribution, their total-variation distance and per-leaf standard errors.
    Trajectories longer than ``max_steps`` are counted in ``truncated``.
    """
    t = walk.tree
    if not 0 <= config.start < t.n_vertices:
        raise ValueError(f"unknown start vertex {config.start}")
    kernels = kernels or compute_kernels(walk)
    table = {}
    for x in t.interior:
        nb = list(t.neighbours(x))
        acc, cum = 0.0, []
        for y in nb:
            acc += float(walk.p[(x, y)])
            cum.append(acc)
        table[x] = (cum, nb)
    rng = XorShift64Star(config.seed)
    counts = {l: 0 for l in t.leaves}
    truncated = 0
    for _ in range(config.trials):
        x = config.start
        steps = 0
        while x in table:
            if steps >= config.max_steps:
                break
            cum, nb = table[x]
            x = _pick(cum, nb, rng.uniform())
            steps += 1
        if x in table:
            truncated += 1
        else:
            counts[x] += 1
    n = config.trials
    emp = {l: c / n for l, c in counts.items()}
    exact = kernels.nu(config.start)
    return {
        "empirical": emp,
        "exact": {l: float(v) for l, v in exact.items()},
        "tv": _tv(emp, exact),
        "stderr": {l: math.sqrt(float(v) * (1 - float(v)) / n) for l, v in exact.items()},
        "truncated": truncated,
        "trials": n,
        "seed": config.seed,
    }


class JumpChainSampler:
    """One step of the jump chain: radius from sigma, then a mu-random leaf of the ball."""

    def __init__(self, spec: JumpProcessSpec):
        self.spec = spec
        t = spec.tree
        mass = branch_masses(t, spec.mu)
        self._branch = {}
        for x in range(t.n_vertices):
            leaves = list(t.leaves_below[x])
            acc, cum = 0.0, []
            for l in leaves:
                acc += float(spec.mu[l]) / float(mass[x])
                cum.append(acc)
            self._branch[x] = (cum, leaves)

    def step(self, xi: int, rng: XorShift64Star) -> int:
        r = self.spec.sigma.sample_radius(rng.uniform_open())
        x = ball(self.spec.tree, self.spec.phi, xi, r)
        cum, leaves = self._branch[x]
        return _pick(cum, leaves, rng.uniform())


def simulate_jump_chain(spec: JumpProcessSpec, config: SimConfig, steps: int = 1) -> dict:
    """Empirical distribution after ``steps`` jumps from the leaf ``config.start``,
    compared with the row of ``P^steps`` (``P`` the ``t = 1`` operator)."""
    t = spec.tree
    if not (0 <= config.start < t.n_vertices and t.is_leaf(config.start)):
        raise ValueError("the jump chain must start at a leaf")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    sampler = JumpChainSampler(spec)
    rng = XorShift64Star(config.seed)
    counts = {l: 0 for l in t.leaves}
    for _ in range(config.trials):
        xi = config.start
        for _ in range(steps):
            xi = sampler.step(xi, rng)
        counts[xi] += 1
    P = semigroup_operator(spec, 1.0).matrix
    Pn = np.linalg.matrix_power(P, steps)
    row = Pn[t.leaf_index[config.start]]
    exact = {l: float(row[i]) for i, l in enumerate(t.leaves)}
    n = config.trials
    emp = {l: c / n for l, c in counts.items()}
    return {
        "empirical": emp,
        "exact": exact,
        "tv": _tv(emp, exact),
        "stderr": {l: math.sqrt(v * (1 - v) / n) for l, v in exact.items()},
        "steps": steps,
        "trials": n,
        "seed": config.seed,
    }


def radius_step_frequencies(spec: JumpProcessSpec, seed: int, trials: int) -> dict:
    """Sampled radii binned by the ball they select on the root path of the
    first leaf, against the exact one-step coefficients."""
    from .boundary import semigroup_coefficients
    t = spec.tree
    xi = t.leaves[0]
    rng = XorShift64Star(seed)
    counts: dict = {}
    for _ in range(trials):
        r = spec.sigma.sample_radius(rng.uniform_open())
        x = ball(t, spec.phi, xi, r)
        counts[x] = counts.get(x, 0) + 1
    exact = {x: float(c) for x, c in semigroup_coefficients(spec, xi, 1)}
    return {"empirical": {x: counts.get(x, 0) / trials for x in exact}, "exact": exact,
            "trials": trials}
