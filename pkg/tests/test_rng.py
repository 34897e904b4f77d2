import numpy as np

from shapeseed.rng import counter_uniform


def test_pure_function_of_key():
    a = counter_uniform(7, np.arange(1000))
    b = counter_uniform(7, np.arange(1000)[::-1])[::-1]
    np.testing.assert_array_equal(a, b)
    assert counter_uniform(7, 5, 3) == counter_uniform(7, np.array([5]), np.array([3]))[0]


def test_streams_differ():
    base = counter_uniform(0, np.arange(100))
    assert not np.array_equal(base, counter_uniform(1, np.arange(100)))
    assert not np.array_equal(base, counter_uniform(0, np.arange(100), 1))


def test_roughly_uniform():
    u = counter_uniform(3, np.arange(200_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    hist, _ = np.histogram(u, bins=10, range=(0, 1))
    # 4 sigma band of a binomial(200000, 0.1) count
    assert np.all(np.abs(hist - 20_000) < 4 * np.sqrt(200_000 * 0.1 * 0.9))
