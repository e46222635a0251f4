import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from osgrf.linalg import jordan_decompose
from osgrf.pseudonorm import Assembled, Euclidean
from osgrf.spectral import InadmissibleError, SpectralDensity
from osgrf.synthesis import (GridSpec, LatticeModel, SynthesisError, SynthesisParams, half_lattice,
                             increment_field, synthesize, synthesize_many)


def aniso(H=0.3):
    return SpectralDensity(Assembled(jordan_decompose(np.diag([1.0, 0.5]))), H)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3))
def test_half_lattice(K, d):
    pts = half_lattice(K, d)
    assert len(pts) == ((2 * K + 1) ** d - 1) // 2
    keys = {tuple(p) for p in pts}
    assert not keys & {tuple(-p) for p in pts}
    assert (0,) * d not in keys


class TestGridSpec:
    def test_rejects(self):
        with pytest.raises(SynthesisError):
            GridSpec(2, 100, 1.0)
        with pytest.raises(SynthesisError):
            GridSpec(4, 8, 1.0)
        with pytest.raises(SynthesisError):
            GridSpec(2, 8, 0.0)

    def test_default_step_reaches_nyquist(self):
        g = GridSpec(2, 64, 2.0)
        p = SynthesisParams(freq_cutoff=32)
        assert p.step_for(g) * 32 == pytest.approx(np.pi * 64 / 2.0)


class TestRealization:
    grid = GridSpec(2, 32, 1.0)
    params = SynthesisParams(freq_cutoff=16, seed=3)

    def test_origin_and_residue(self):
        r = synthesize(aniso(), self.grid, self.params)
        assert r.values[0, 0] == 0
        assert r.values.shape == (32, 32)
        assert r.imag_residue < 1e-12
        assert r.method == "fft"

    def test_fft_matches_direct(self):
        f = aniso()
        model = LatticeModel(f, 16, self.params.step_for(self.grid))
        coef = model.coefficients(3)
        vals, _, _ = model.grid_values(coef, self.grid)
        xs = self.grid.coords()
        pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), -1).reshape(-1, 2)
        direct = model.evaluate(coef, pts).reshape(32, 32)
        assert_allclose(vals, direct, atol=1e-10 * np.max(np.abs(direct)))

    def test_direct_path(self):
        p = SynthesisParams(freq_cutoff=8, freq_step=3.3, seed=1)
        g = GridSpec(2, 8, 1.0)
        with pytest.raises(SynthesisError, match="direct summation"):
            synthesize(aniso(), g, p)
        r = synthesize(aniso(), g, SynthesisParams(freq_cutoff=8, freq_step=3.3, seed=1,
                                                   allow_direct=True))
        assert r.method == "direct" and r.values[0, 0] == 0

    def test_deterministic(self):
        a = synthesize(aniso(), self.grid, self.params, stream=2).values
        b = synthesize(aniso(), self.grid, self.params, stream=2).values
        c = synthesize(aniso(), self.grid, self.params, stream=3).values
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)

    def test_thread_independent(self, monkeypatch):
        f = aniso()
        one = synthesize_many(f, self.grid, self.params, 4, threads=1)
        monkeypatch.setenv("OSGRF_THREADS", "3")
        many = synthesize_many(f, self.grid, self.params, 4)
        for x, y in zip(one, many):
            assert x.values.tobytes() == y.values.tobytes()
            assert x.stream == y.stream

    def test_noise_independent_of_cutoff(self):
        # the same lattice point draws the same noise for any cutoff
        f = aniso()
        small = LatticeModel(f, 4, 1.0)
        big = LatticeModel(f, 8, 1.0)
        cs, cb = small.coefficients(7) / small.amplitude, big.coefficients(7) / big.amplitude
        lookup = {tuple(k): z for k, z in zip(big.coords, cb)}
        assert all(lookup[tuple(k)] == z for k, z in zip(small.coords, cs))

    def test_inadmissible(self):
        f = SpectralDensity.unchecked(Euclidean(2), 1.2)
        with pytest.raises(InadmissibleError):
            synthesize(f, self.grid, self.params)

    def test_dimension_mismatch(self):
        with pytest.raises(SynthesisError):
            synthesize(SpectralDensity(Euclidean(1), 0.5), self.grid, self.params)


class TestLatticeVariance:
    def test_matches_empirical(self):
        f = SpectralDensity(Euclidean(1), 0.5)
        g = GridSpec(1, 64, 1.0)
        p = SynthesisParams(freq_cutoff=64, seed=0)
        rs = synthesize_many(f, g, p, 400)
        x = np.array([r.values[16] for r in rs])
        model = LatticeModel(f, 64, p.step_for(g))
        want = model.variance([[16 * g.step]])[0]
        se = want * np.sqrt(2 / len(x))
        assert abs(np.mean(x ** 2) - want) < 4 * se

    def test_increment_variance_is_symmetric(self):
        model = LatticeModel(aniso(), 8, 1.0)
        assert model.increment_variance([0.3, -0.2]) == pytest.approx(
            model.increment_variance([-0.3, 0.2]), rel=1e-14)


class TestIncrementField:
    def test_shape_and_values(self):
        r = synthesize(aniso(), GridSpec(2, 16, 1.0), SynthesisParams(freq_cutoff=8))
        inc = increment_field(r, [2, -3])
        assert inc.shape == (14, 13)
        assert inc[0, 0] == r.values[2, 0] - r.values[0, 3]

    def test_errors(self):
        r = synthesize(aniso(), GridSpec(2, 16, 1.0), SynthesisParams(freq_cutoff=8))
        with pytest.raises(SynthesisError, match="overlap"):
            increment_field(r, [16, 0])
        with pytest.raises(SynthesisError, match="integer"):
            increment_field(r, [0.5, 0])
        with pytest.raises(SynthesisError):
            increment_field(r, [1])


def test_warns_below_nyquist():
    with pytest.warns(UserWarning, match="Nyquist"):
        synthesize(aniso(), GridSpec(2, 16, 1.0), SynthesisParams(freq_cutoff=4, freq_step=np.pi))
