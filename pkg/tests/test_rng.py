import hashlib

import numpy as np
import pytest

from gbpa import rng


def test_seed_split_rule_matches_hash():
    master = 0xDEADBEEF
    for i in (0, 1, 7, 1234):
        h = int.from_bytes(hashlib.blake2b(str(i).encode(), digest_size=8).digest(), "little")
        assert rng.derive_seed(master, i) == master ^ h


def test_run_seeds_distinct_and_64_bit():
    seeds = rng.run_seeds(5, 200)
    assert len(set(seeds)) == 200
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_streams_reproducible_and_independent():
    a = rng.generator(42, rng.SAMPLING).random(5)
    b = rng.generator(42, rng.SAMPLING).random(5)
    c = rng.generator(42, rng.RESAMPLING).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_bit_generator_is_philox():
    assert isinstance(rng.bit_generator(1, 0), np.random.Philox)


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_seed_out_of_range(seed):
    with pytest.raises(ValueError):
        rng.bit_generator(seed, 0)
