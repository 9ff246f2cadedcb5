import numpy as np
from hypothesis import given, settings, strategies as st

from sfqlab.rng import UniformBlock, derive_seed, first_below, stream


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**40), probs=st.lists(st.floats(0.0, 1.0), max_size=50))
def test_first_below_matches_sequential_draws(seed, probs):
    block = UniformBlock(stream(seed, 1), size=7)
    expected = next((k for k, p in enumerate(probs) if block.next() < p), -1)
    assert first_below(stream(seed, 1), np.asarray(probs)) == expected


def test_streams_independent_of_creation_order():
    a = stream(5, 1, 2).random(4)
    stream(5, 9).random(100)
    assert np.array_equal(stream(5, 1, 2).random(4), a)
    assert not np.array_equal(stream(5, 2, 1).random(4), a)


def test_derive_seed_range_and_stability():
    s = derive_seed(3, 7, 11)
    assert s == derive_seed(3, 7, 11)
    assert 0 <= s < 2**63
    assert s != derive_seed(3, 7, 12)


def test_negative_ids_accepted():
    assert derive_seed(-1, -2) == derive_seed(2**64 - 1, 2**64 - 2)
