"""Monte Carlo and quadrature checks of operator scaling and stationary increments."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field
from typing import Sequence

import numpy as np
from scipy import stats

from .linalg import mat_pow
from .spectral import Quadrature, SpectralDensity, covariance, variogram
from .synthesis import (FieldRealization, GridSpec, LatticeModel, SynthesisParams, increment_field,
                        thread_count)


class AnalysisError(ValueError):
    pass


def _model(f: SpectralDensity, grid: GridSpec, params: SynthesisParams) -> LatticeModel:
    return LatticeModel(f, params.freq_cutoff, params.step_for(grid))


def sample_points(model: LatticeModel, points, n_realizations: int, seed: int,
                  first_stream: int = 0) -> np.ndarray:
    """``(n_realizations, len(points))`` samples of ``X`` by direct lattice summation."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    def one(i):
        return model.evaluate(model.coefficients(seed, first_stream + i), pts)

    workers = thread_count()
    if workers == 1:
        rows = [one(i) for i in range(n_realizations)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, range(n_realizations)))
    return np.array(rows).reshape(n_realizations, len(pts))


@dataclass
class ScalingReport:
    a: float
    points: list
    ratio_per_point: list
    expected: float
    n_realizations: int
    pass_per_point: list
    deviation: list = field(default_factory=list)
    mc_stderr: list = field(default_factory=list)
    truncation_bias: list = field(default_factory=list)
    tol_rel: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.pass_per_point)

    def to_json(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class ScalingSamples:
    """Joint samples of ``X(x)`` and ``X(a**E x)`` shared by several reports."""
    a: float
    points: np.ndarray
    images: np.ndarray
    at_points: np.ndarray
    at_images: np.ndarray
    model: LatticeModel


def scaling_samples(f: SpectralDensity, a: float, points: Sequence, n_realizations: int, seed: int,
                    grid: GridSpec | None = None,
                    params: SynthesisParams | None = None) -> ScalingSamples:
    if n_realizations < 100:
        raise AnalysisError("scaling tests need at least 100 realizations")
    if not a > 0:
        raise AnalysisError("scale factor must be positive")
    grid = grid or GridSpec(dim=f.dim)
    params = params or SynthesisParams(seed=seed)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != f.dim:
        raise AnalysisError("points must match the field dimension")
    images = pts @ mat_pow(f.E.entries, a).T
    for p in np.vstack([pts, images]):
        if np.any(p < 0) or np.any(p > grid.extent):
            raise AnalysisError(f"point {p.tolist()} lies outside the grid [0, {grid.extent}]^{f.dim}")
    model = _model(f, grid, params)
    both = sample_points(model, np.vstack([pts, images]), n_realizations, seed)
    return ScalingSamples(float(a), pts, images, both[:, :len(pts)], both[:, len(pts):], model)


def scaling_test(f: SpectralDensity, a: float, points: Sequence, n_realizations: int, seed: int,
                 tol_rel: float, grid: GridSpec | None = None, params: SynthesisParams | None = None,
                 expected_hurst: float | None = None,
                 samples: ScalingSamples | None = None) -> ScalingReport:
    """Compare ``Var X(a**E x)`` with ``a**(2H) Var X(x)`` across realizations.

    A point passes when the relative deviation is within
    ``tol_rel + 2 (stderr + bias)``; ``bias`` is the exact relative error of
    the truncated lattice model's variance ratio. ``expected_hurst`` replaces
    ``H`` in the expected ratio only (negative controls). Pass ``samples``
    to reuse draws from :func:`scaling_samples`.
    """
    if samples is None:
        samples = scaling_samples(f, a, points, n_realizations, seed, grid, params)
    s = samples
    n = len(s.at_points)
    H_exp = f.H if expected_hurst is None else float(expected_hurst)
    expected = s.a ** (2 * H_exp)
    xa, xb = s.at_points, s.at_images
    ma, mb = np.mean(xa ** 2, axis=0), np.mean(xb ** 2, axis=0)
    ratio = mb / ma
    u = xb ** 2 / mb - xa ** 2 / ma
    se = np.std(u, axis=0, ddof=1) / math.sqrt(n)
    lat_ratio = s.model.variance(s.images) / s.model.variance(s.points)
    bias = np.abs(lat_ratio / s.a ** (2 * f.H) - 1.0)
    dev = np.abs(ratio / expected - 1.0)
    passed = dev <= tol_rel + 2.0 * (se + bias)
    return ScalingReport(a=s.a, points=s.points.tolist(), ratio_per_point=ratio.tolist(),
                         expected=expected, n_realizations=n,
                         pass_per_point=[bool(p) for p in passed], deviation=dev.tolist(),
                         mc_stderr=se.tolist(), truncation_bias=bias.tolist(), tol_rel=tol_rel)


def variance_check(f: SpectralDensity, samples: ScalingSamples, tol_rel: float,
                   quadrature: Quadrature | None = None) -> dict:
    """Empirical ``Var X(x)`` against the quadrature ``C(x, x)``.

    Budget per point: ``tol_rel`` plus the exact lattice truncation error
    plus two Monte Carlo standard errors.
    """
    q = quadrature or Quadrature()
    x = samples.at_points
    n = len(x)
    emp = np.mean(x ** 2, axis=0)
    se = np.std(x ** 2, axis=0, ddof=1) / math.sqrt(n) / emp
    lattice = samples.model.variance(samples.points)
    rows = []
    for p, e, s_, lat in zip(samples.points, emp, se, lattice):
        ref = covariance(f, x=p, y=p, quadrature=q)
        trunc = abs(lat / ref.value - 1.0)
        dev = abs(e / ref.value - 1.0)
        budget = tol_rel + trunc + 2.0 * s_
        rows.append({"x": p.tolist(), "empirical": float(e), "quadrature": ref.value,
                     "lattice": float(lat), "relative_deviation": dev,
                     "truncation_budget": trunc, "mc_stderr": float(s_), "pass": bool(dev <= budget)})
    return {"tol_rel": tol_rel, "n_realizations": n, "points": rows,
            "passed": all(r["pass"] for r in rows)}


def covariance_scaling_check(f: SpectralDensity, a: float, pairs: Sequence, tol_rel: float,
                             quadrature: Quadrature | None = None,
                             scaled_quadrature: Quadrature | None = None) -> dict:
    """Deterministic check of ``C(a**E x, a**E y) = a**(2H) C(x, y)``.

    ``scaled_quadrature`` (default: same as ``quadrature``) evaluates the left
    side; passing a different rule removes the exact node correspondence
    between the two sides.
    """
    q = quadrature or Quadrature()
    qs = scaled_quadrature or q
    A = mat_pow(f.E.entries, a)
    rows = []
    for x, y in pairs:
        x, y = np.asarray(x, float), np.asarray(y, float)
        rhs_c = covariance(f, x=x, y=y, quadrature=q)
        lhs_c = covariance(f, x=A @ x, y=A @ y, quadrature=qs)
        rhs = a ** (2 * f.H) * rhs_c.value
        diff = abs(lhs_c.value - rhs)
        budget = 2.0 * (lhs_c.error_estimate + a ** (2 * f.H) * rhs_c.error_estimate)
        rel = diff / abs(rhs) if rhs != 0 else (0.0 if diff == 0 else math.inf)
        rows.append({"x": x.tolist(), "y": y.tolist(), "lhs": lhs_c.value, "rhs": rhs,
                     "relative_deviation": rel, "quadrature_budget": budget,
                     "flagged": lhs_c.flagged or rhs_c.flagged,
                     "pass": bool(diff <= tol_rel * abs(rhs) or diff <= budget)})
    return {"a": a, "H": f.H, "tol_rel": tol_rel, "pairs": rows,
            "passed": all(r["pass"] for r in rows)}


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((n + m) / (n * m))


def stationarity_test(f: SpectralDensity, h, base_points: Sequence, n_realizations: int, seed: int,
                      tol: float, grid: GridSpec | None = None,
                      params: SynthesisParams | None = None, alpha: float = 0.01) -> dict:
    """Compare the law of ``X(x + h) - X(x)`` across base points.

    ``h`` and ``base_points`` are integer vectors in grid steps. Passes when
    every pairwise KS statistic is below the ``alpha`` critical value, the
    variances agree within ``tol`` plus three standard errors, and the means
    are within four standard errors of zero.
    """
    if n_realizations < 1000:
        raise AnalysisError("stationarity_test needs at least 1000 realizations")
    grid = grid or GridSpec(dim=f.dim)
    params = params or SynthesisParams(seed=seed)
    h = np.asarray(h)
    base = np.atleast_2d(np.asarray(base_points))
    if h.shape != (f.dim,) or base.shape[1] != f.dim:
        raise AnalysisError("lag and base points must be lattice vectors of the field dimension")
    for b in base:
        if np.any(b < 0) or np.any(b >= grid.n) or np.any(b + h < 0) or np.any(b + h >= grid.n):
            raise AnalysisError(f"base point {b.tolist()} with lag {h.tolist()} leaves the grid")
    step = grid.step
    model = _model(f, grid, params)
    if not np.any(h):
        inc = np.zeros((n_realizations, len(base)))
    else:
        pts = np.vstack([base * step, (base + h) * step])
        s = sample_points(model, pts, n_realizations, seed)
        inc = s[:, len(base):] - s[:, :len(base)]
    means = inc.mean(axis=0)
    vars_ = inc.var(axis=0, ddof=1)
    n = n_realizations
    crit = ks_critical(n, n, alpha)
    ks = []
    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            stat = 0.0 if not np.any(h) else float(stats.ks_2samp(inc[:, i], inc[:, j]).statistic)
            ks.append({"i": i, "j": j, "statistic": stat})
    max_ks = max((k["statistic"] for k in ks), default=0.0)
    var_se = vars_ * math.sqrt(2.0 / (n - 1))
    vmax, vmin = float(np.max(vars_)), float(np.min(vars_))
    var_ok = vmax - vmin <= tol * vmax + 3.0 * float(np.max(var_se)) or vmax == 0
    mean_ok = bool(np.all(np.abs(means) <= 4.0 * np.sqrt(vars_ / n) + 1e-300))
    model_var = model.increment_variance(h * step) if np.any(h) else 0.0
    return {"h": h.tolist(), "base_points": base.tolist(), "n_realizations": n,
            "means": means.tolist(), "variances": vars_.tolist(),
            "model_increment_variance": model_var,
            "ks": ks, "max_ks": max_ks, "ks_critical": crit,
            "passed": bool(max_ks < crit and var_ok and mean_ok)}


def empirical_variogram(realizations: Sequence[FieldRealization], lags: Sequence) -> list[dict]:
    """Mean squared increment per lag (grid steps), rows sorted by ``|h|``."""
    if not realizations or not len(lags):
        raise AnalysisError("need at least one realization and one lag")
    grid = realizations[0].grid
    if any(r.grid != grid for r in realizations):
        raise AnalysisError("realizations must share a grid")
    rows = []
    for h in lags:
        h = np.asarray(h)
        total, count = 0.0, 0
        for r in realizations:
            inc = increment_field(r, h)
            total += float(np.sum(inc * inc))
            count += inc.size
        rows.append({"h": h.tolist(), "length": float(np.linalg.norm(h) * grid.step),
                     "count": count, "v": total / count})
    rows.sort(key=lambda r: r["length"])
    return rows


def loglog_slope(rows: Sequence[dict]) -> float:
    """Least-squares slope of ``log v`` against ``log |h|`` (zero lags ignored)."""
    pts = [(r["length"], r["v"]) for r in rows if r["length"] > 0 and r["v"] > 0]
    if len(pts) < 2:
        raise AnalysisError("need two nonzero lags for a slope")
    x, y = np.log(np.array(pts)).T
    return float(np.polyfit(x, y, 1)[0])
