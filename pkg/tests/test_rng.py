import numpy as np

from fedqp.rng import RandomSource


def test_replay_identical():
    a = RandomSource(123, "train")
    b = RandomSource(123, "train")
    assert np.array_equal(a.normal(50), b.normal(50))
    assert np.array_equal(a.permutation(20), b.permutation(20))
    assert a.uniform() == b.uniform()


def test_streams_differ_by_id():
    a = RandomSource(123, "alpha")
    b = RandomSource(123, "beta")
    assert not np.array_equal(a.normal(20), b.normal(20))


def test_streams_differ_by_seed():
    a = RandomSource(1)
    b = RandomSource(2)
    assert not np.array_equal(a.normal(20), b.normal(20))


def test_derivation_is_order_independent():
    root = RandomSource(7)
    first = root.derive("client/3").normal(10)
    # consuming unrelated streams must not shift client/3
    root.derive("client/1").normal(1000)
    root.derive("client/2").uniform(17)
    again = root.derive("client/3").normal(10)
    assert np.array_equal(first, again)
    assert root.derive("client/3").stream == "root/client/3"


def test_derivation_nests():
    root = RandomSource(7)
    nested = root.derive("round/1").derive("client/0")
    direct = RandomSource(7, "root/round/1/client/0")
    assert np.array_equal(nested.normal(5), direct.normal(5))


def test_choice_without_replacement_is_distinct_and_in_range():
    rs = RandomSource(11)
    picked = rs.choice_without_replacement(100, 10)
    assert len(set(picked.tolist())) == 10
    assert picked.min() >= 0 and picked.max() < 100


def test_bernoulli_edge_probabilities():
    rs = RandomSource(5)
    assert not any(rs.bernoulli(0.0) for _ in range(100))
    assert all(rs.bernoulli(1.0) for _ in range(100))


def test_dirichlet_simplex():
    rs = RandomSource(3)
    p = rs.dirichlet(np.full(8, 0.5))
    assert abs(p.sum() - 1.0) < 1e-12
    assert (p >= 0).all()
