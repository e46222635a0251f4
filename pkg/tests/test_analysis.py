import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osgrf.analysis import (AnalysisError, covariance_scaling_check, empirical_variogram,
                            ks_critical, loglog_slope, scaling_samples, scaling_test,
                            stationarity_test, variance_check)
from osgrf.linalg import jordan_decompose
from osgrf.pseudonorm import Assembled, Euclidean
from osgrf.spectral import SpectralDensity
from osgrf.synthesis import GridSpec, SynthesisParams, synthesize_many

GRID = GridSpec(2, 32, 1.0)
PARAMS = SynthesisParams(freq_cutoff=32, seed=4)


def iso():
    return SpectralDensity(Euclidean(2), 0.5)


class TestScaling:
    def test_unit_scale_is_exact(self):
        rep = scaling_test(iso(), 1.0, [[0.2, 0.1], [0.4, 0.3]], 100, 4, 1e-13, GRID, PARAMS)
        assert rep.passed
        assert max(rep.deviation) < 1e-13

    def test_isotropic_example(self):
        rep = scaling_test(iso(), 2.0, [[0.2, 0.1], [0.3, 0.3], [0.1, 0.4]], 400, 4, 0.15,
                           GRID, PARAMS)
        assert rep.expected == pytest.approx(2.0)
        assert rep.passed, rep.to_json()
        js = rep.to_json()
        assert js["passed"] and len(js["mc_stderr"]) == 3

    def test_shared_samples(self):
        s = scaling_samples(iso(), 2.0, [[0.2, 0.1]], 100, 4, GRID, PARAMS)
        a = scaling_test(iso(), 2.0, None, 0, 0, 0.15, samples=s)
        b = scaling_test(iso(), 2.0, None, 0, 0, 0.15, samples=s, expected_hurst=0.6)
        assert a.ratio_per_point == b.ratio_per_point
        assert b.expected == pytest.approx(2 ** 1.2)
        vc = variance_check(iso(), s, 0.1)
        assert set(vc["points"][0]) >= {"empirical", "quadrature", "lattice", "pass"}

    def test_outside_grid(self):
        with pytest.raises(AnalysisError, match="outside the grid"):
            scaling_test(iso(), 2.0, [[0.6, 0.1]], 100, 0, 0.15, GRID, PARAMS)

    def test_too_few_realizations(self):
        with pytest.raises(AnalysisError):
            scaling_test(iso(), 2.0, [[0.1, 0.1]], 10, 0, 0.15, GRID, PARAMS)


def test_covariance_scaling_example():
    f = SpectralDensity(Assembled(jordan_decompose(np.array([[1.0, -1], [1, 1]]))), 0.5)
    rep = covariance_scaling_check(f, 2.0, [((0.3, 0.0), (0.0, 0.2))], 1e-2)
    assert rep["passed"]
    row = rep["pairs"][0]
    assert row["relative_deviation"] < 1e-2 and not row["flagged"]


class TestStationarity:
    f = SpectralDensity(Euclidean(1), 0.5)
    grid = GridSpec(1, 64, 1.0)
    params = SynthesisParams(freq_cutoff=64, seed=2)

    def test_zero_lag(self):
        rep = stationarity_test(self.f, [0], [[1], [10]], 1000, 2, 0.1, self.grid, self.params)
        assert rep["passed"] and rep["max_ks"] == 0 and rep["model_increment_variance"] == 0

    def test_passes(self):
        rep = stationarity_test(self.f, [3], [[1], [20], [40]], 1000, 2, 0.1, self.grid,
                                self.params)
        assert rep["passed"], rep
        assert len(rep["ks"]) == 3

    def test_leaves_grid(self):
        with pytest.raises(AnalysisError, match="leaves the grid"):
            stationarity_test(self.f, [10], [[60]], 1000, 2, 0.1, self.grid, self.params)

    def test_needs_realizations(self):
        with pytest.raises(AnalysisError):
            stationarity_test(self.f, [1], [[1]], 10, 2, 0.1, self.grid, self.params)


def test_ks_critical():
    # 1.628 is the tabulated 1% coefficient
    assert ks_critical(1000, 1000) == pytest.approx(1.628 * np.sqrt(2 / 1000), rel=1e-3)


class TestVariogram:
    rs = synthesize_many(iso(), GridSpec(2, 16, 1.0), SynthesisParams(freq_cutoff=16), 3)

    def test_symmetric_and_zero(self):
        rows = empirical_variogram(self.rs, [[0, 0], [2, 1], [-2, -1]])
        assert rows[0]["v"] == 0
        assert rows[1]["v"] == pytest.approx(rows[2]["v"], rel=1e-14)

    def test_errors(self):
        with pytest.raises(AnalysisError):
            empirical_variogram([], [[1, 0]])
        with pytest.raises(AnalysisError):
            empirical_variogram(self.rs, [])
        with pytest.raises(AnalysisError):
            loglog_slope([{"length": 1.0, "v": 1.0}])


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 5))
def test_loglog_slope_power_law(p, c):
    rows = [{"length": l, "v": c * l ** p} for l in (0.1, 0.2, 0.4, 0.8)]
    assert loglog_slope(rows) == pytest.approx(p, abs=1e-9)
