import pytest

from ultraduality.boundary import JumpProcessSpec, SigmaMeasure
from ultraduality._rational import Q
from ultraduality.simulate import (SimConfig, XorShift64Star, radius_step_frequencies,
                                   simulate_jump_chain, simulate_walk, split_seed, splitmix64)


def test_splitmix_reference_values():
    # first outputs of the reference splitmix64 stream seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_xorshift_stream_is_deterministic():
    a, b = XorShift64Star(42), XorShift64Star(42)
    xs = [a.next_u64() for _ in range(100)]
    assert xs == [b.next_u64() for _ in range(100)]
    assert len(set(xs)) == 100
    assert all(0 <= x < 2**64 for x in xs)
    c = XorShift64Star(43)
    assert c.next_u64() != xs[0]


def test_uniform_range():
    r = XorShift64Star(0)
    us = [r.uniform() for _ in range(10_000)]
    assert all(0.0 <= u < 1.0 for u in us)
    assert abs(sum(us) / len(us) - 0.5) < 0.02


def test_split_seed_distinct():
    assert len({split_seed(7, i) for i in range(1000)}) == 1000


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(seed=1, trials=0, start=0)
    with pytest.raises(ValueError):
        SimConfig(seed=1, trials=1, start=0, max_steps=0)


def test_walk_from_interior_vertex(b2):
    t, w, k = b2
    res = simulate_walk(w, SimConfig(seed=3, trials=20_000, start=1), kernels=k)
    for l, v in res["exact"].items():
        assert abs(res["empirical"][l] - v) < 5 * res["stderr"][l] + 1e-12
    assert res["truncated"] == 0


def test_walk_truncation(b2):
    t, w, k = b2
    res = simulate_walk(w, SimConfig(seed=3, trials=200, start=0, max_steps=1), kernels=k)
    assert res["truncated"] == 200
    assert sum(res["empirical"].values()) == 0


def test_walk_from_leaf_is_absorbed(b2):
    t, w, k = b2
    res = simulate_walk(w, SimConfig(seed=1, trials=10, start=3), kernels=k)
    assert res["empirical"][3] == 1.0


def test_jump_chain_two_steps(b2_process):
    t, phi, mu = b2_process
    spec = JumpProcessSpec(phi, mu, SigmaMeasure.standard())
    res = simulate_jump_chain(spec, SimConfig(seed=11, trials=40_000, start=3), steps=2)
    assert res["tv"] < 0.015
    with pytest.raises(ValueError):
        simulate_jump_chain(spec, SimConfig(seed=11, trials=10, start=0))


def test_radius_frequencies_table(b2_process):
    t, phi, mu = b2_process
    sigma = SigmaMeasure.tabulated([(Q(1, 2), Q(1, 4)), (Q(3, 2), Q(1, 2))])
    spec = JumpProcessSpec(phi, mu, sigma)
    res = radius_step_frequencies(spec, seed=5, trials=40_000)
    for x, v in res["exact"].items():
        assert res["empirical"][x] == pytest.approx(v, abs=0.015)


def test_radius_frequencies_standard(b2_process):
    t, phi, mu = b2_process
    spec = JumpProcessSpec(phi, mu, SigmaMeasure.standard())
    res = radius_step_frequencies(spec, seed=9, trials=40_000)
    for x, v in res["exact"].items():
        assert res["empirical"][x] == pytest.approx(v, abs=0.015)
