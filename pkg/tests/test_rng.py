import numpy as np
import pytest

from dlab.rng import RngStream, as_generator, mix64, stable_hash64


def test_identical_streams_identical_bytes():
    a = RngStream(42, 7).generator().bytes(64)
    b = RngStream(42, 7).generator().bytes(64)
    assert a == b


def test_distinct_pairs_distinct_streams():
    seen = set()
    for m in range(4):
        for s in range(25):
            seen.add(RngStream(m, s).generator().bytes(16))
    assert len(seen) == 100


def test_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 1 << 64)


def test_child_and_hashes_stable():
    assert RngStream(1, 2).child(3) == RngStream(1, mix64(2, 3))
    assert mix64(1, 2) != mix64(2, 1)
    assert stable_hash64("abc") == stable_hash64("abc")


def test_as_generator():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert as_generator(5).bytes(8) == RngStream(5).generator().bytes(8)
    with pytest.raises(TypeError):
        as_generator("seed")
