import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcplab.errors import ParameterError
from qcplab.resample import (
    FiniteDistribution,
    UniformBitsDistribution,
    display_formula_limit,
    exact_tv_distance,
    infinite_resample_law,
    load_distribution,
    resample_infinite,
    resample_truncated,
    truncated_law,
    truncated_limit,
)


def random_instance(rng, max_support=64):
    size = rng.randrange(2, max_support + 1)
    weights = [(v, rng.random() + 1e-3) for v in range(size)]
    dist = FiniteDistribution.from_weights(weights)
    classes = rng.randrange(1, size + 1)
    table = {v: rng.randrange(classes) for v in dist.support}
    return dist, table.__getitem__


def test_uniform_first_bit_law_exact():
    dist = FiniteDistribution.uniform([0b00, 0b01, 0b10, 0b11])
    law = infinite_resample_law(dist, lambda v: v >> 1)
    assert exact_tv_distance(dist, law) == 0.0


def test_constant_f_law_exact():
    dist = FiniteDistribution.from_weights([(0, 1), (1, 2), (2, 3)])
    law = infinite_resample_law(dist, lambda v: 0)
    assert exact_tv_distance(dist, law) < 1e-15


def test_injective_f_returns_first_draw():
    dist = FiniteDistribution.from_weights([(0, 1), (1, 5)])
    rng = random.Random(3)
    for _ in range(50):
        state = rng.getstate()
        first = dist.sample(rng)
        rng.setstate(state)
        assert resample_infinite(dist, lambda v: v, rng) == first


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_infinite_law_matches_source_exactly(seed):
    dist, f = random_instance(random.Random(seed))
    assert exact_tv_distance(dist, infinite_resample_law(dist, f)) < 1e-12


def test_truncated_limit_frozen_values():
    # oracle: ceil(x * ln x) for x = 2*supp/eps
    assert truncated_limit(0.1, 16) == 1846
    assert truncated_limit(0.05, 64) == 20091
    assert truncated_limit(0.5, 1) == math.ceil(4 * math.log(4)) == 6


def test_truncated_limit_rejects_bad_epsilon():
    with pytest.raises(ParameterError):
        truncated_limit(0.0, 4)
    with pytest.raises(ParameterError):
        truncated_limit(1.5, 4)


def test_display_formula_limit_evaluates():
    assert display_formula_limit(8, 0.1, 16) == math.ceil(
        2 * (math.log(4) * 8 + math.log(10)) * 160
    )


def test_singleton_support_always_succeeds():
    dist = FiniteDistribution(( "only",), (1.0,))
    assert truncated_limit(0.3, 1) >= 1
    assert resample_truncated(dist, lambda v: v, 1, random.Random(0)) == "only"


def test_zero_limit_always_bottom():
    dist = FiniteDistribution.uniform([0, 1])
    assert resample_truncated(dist, lambda v: v, 0, random.Random(0)) is None


def test_truncated_law_bound_at_spec_epsilons():
    rng = random.Random(17)
    for eps in (0.05, 0.1):
        for _ in range(10):
            dist, f = random_instance(rng)
            t = truncated_limit(eps, dist.support_size)
            law = truncated_law(dist, f, t)
            assert exact_tv_distance(dist, law) <= eps
            assert law.prob(None) <= eps


def test_truncated_law_matches_empirical_loop():
    dist = FiniteDistribution.from_weights([(0, 5), (1, 3), (2, 1), (3, 1)])
    f = lambda v: v & 1  # noqa: E731
    t = 2
    law = truncated_law(dist, f, t)
    rng = random.Random(99)
    n = 40_000
    counts = Counter(resample_truncated(dist, f, t, rng) for _ in range(n))
    for v in law.support:
        p = law.prob(v)
        assert abs(counts[v] / n - p) < 4 * math.sqrt(p * (1 - p) / n) + 1e-3


def test_tv_monotone_in_limit():
    rng = random.Random(5)
    dist, f = random_instance(rng, max_support=32)
    tvs = [
        exact_tv_distance(dist, truncated_law(dist, f, t)) for t in (0, 1, 2, 4, 8, 64)
    ]
    assert all(a >= b - 1e-15 for a, b in zip(tvs, tvs[1:]))


def test_exact_tv_examples():
    d = FiniteDistribution.uniform([0, 1, 2, 3])
    assert exact_tv_distance(d, d) == 0.0
    p0 = FiniteDistribution((0,), (1.0,))
    p1 = FiniteDistribution((1,), (1.0,))
    assert exact_tv_distance(p0, p1) == 1.0
    half = FiniteDistribution.uniform([0, 1])
    assert exact_tv_distance(d, half) == pytest.approx(0.5)


def test_load_distribution_text_format():
    dist = load_distribution(["# comment", "ff 0.25", "0a 0.75"])
    assert dist.prob(255) == 0.25
    assert dist.prob(10) == 0.75


def test_distribution_validation():
    with pytest.raises(ParameterError):
        FiniteDistribution((0, 1), (0.5, 0.6))
    with pytest.raises(ParameterError):
        FiniteDistribution((0, 0), (0.5, 0.5))
    with pytest.raises(ParameterError):
        FiniteDistribution((0, 1), (1.5, -0.5))


def test_uniform_bits_distribution():
    d = UniformBitsDistribution(48)
    assert d.support_size == 1 << 48
    assert d.min_entropy == 48.0
    assert 0 <= d.sample(random.Random(1)) < (1 << 48)


def test_min_entropy_explicit():
    d = FiniteDistribution.from_weights([(0, 1), (1, 1), (2, 2)])
    assert d.min_entropy == pytest.approx(1.0)
