import numpy as np
import pytest
from scipy import stats

from osgrf.rng import complex_normals, philox4x64, uniforms


def numpy_philox_block(counter, key):
    # numpy increments the counter before generating each 4-word block
    bg = np.random.Philox(counter=np.array(counter, dtype=np.uint64),
                          key=np.array(key, dtype=np.uint64))
    return bg.random_raw(4)


@pytest.mark.parametrize("counter, key", [
    ((0, 0, 0, 0), (0, 0)),
    ((5, 0, 0, 0), (12345, 0x4F534752)),
    ((2**64 - 2, 7, 3, 1), (2**63 + 11, 99)),
    ((123456789, 987654321, 42, 2**40), (1, 2)),
])
def test_matches_numpy_philox(counter, key):
    ours = philox4x64(np.array([[counter[0] + 1, *counter[1:]]], dtype=np.uint64), key)[0]
    assert list(ours) == list(numpy_philox_block(counter, key))


def test_batch_equals_rowwise():
    ctr = np.random.default_rng(0).integers(0, 2**63, size=(50, 4), dtype=np.uint64)
    batch = philox4x64(ctr, (3, 4))
    for row, out in zip(ctr, batch):
        assert (philox4x64(row[None], (3, 4))[0] == out).all()


def test_uniforms_open_interval_and_random_access():
    coords = np.stack(np.meshgrid(np.arange(-20, 21), np.arange(-20, 21)), -1).reshape(-1, 2)
    u = uniforms(7, coords, stream=3)
    assert u.shape == (len(coords), 4)
    assert np.all((u > 0) & (u < 1))
    sub = uniforms(7, coords[100:110], stream=3)
    assert (sub == u[100:110]).all()
    assert not (uniforms(7, coords[:10], stream=4) == u[:10]).any()
    assert not (uniforms(8, coords[:10], stream=3) == u[:10]).any()


def test_uniform_distribution():
    coords = np.arange(100_000)[:, None]
    u = uniforms(1, coords)
    for j in range(4):
        assert stats.kstest(u[:, j], "uniform").pvalue > 1e-3


def test_complex_normals_moments():
    coords = np.arange(200_000)[:, None]
    z = complex_normals(2, coords)
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.01
    assert abs(np.mean(z.real ** 2) - 0.5) < 0.01
    assert abs(np.mean(z.real * z.imag)) < 0.01
    assert abs(np.mean(z * z)) < 0.01
    assert stats.kstest(z.real * np.sqrt(2), "norm").pvalue > 1e-3


def test_dimension_limit():
    with pytest.raises(ValueError):
        uniforms(0, np.zeros((3, 4), dtype=int))
