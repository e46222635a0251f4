"""Grid realizations of the harmonizable field on a truncated frequency lattice.

``W(x) = sum_{k != 0} exp(i <x, k D>) f(k D)^(1/2) D^(d/2) Z_k`` with Hermitian
noise ``Z_{-k} = conj(Z_k)`` and ``X(x) = W(x) - W(0)``. Noise for lattice point
``k`` comes from a counter-based generator keyed by the seed and indexed by
``k`` itself, so it does not depend on the cutoff or on evaluation order.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .rng import complex_normals
from .spectral import SpectralDensity, admissible, admissible_interval_message, InadmissibleError

log = logging.getLogger(__name__)


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dim: int = 2
    n: int = 256
    extent: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.dim > 3:
            raise SynthesisError("grids are supported in 1 to 3 dimensions")
        if self.n < 2 or self.n & (self.n - 1):
            raise SynthesisError("points per axis must be a power of two >= 2")
        if not self.extent > 0:
            raise SynthesisError("grid extent must be positive")

    @property
    def step(self) -> float:
        return self.extent / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.step


@dataclass(frozen=True)
class SynthesisParams:
    freq_cutoff: int = 512
    freq_step: float | None = None
    seed: int = 0
    allow_direct: bool = False

    def __post_init__(self):
        if self.freq_cutoff < 1:
            raise SynthesisError("freq_cutoff must be >= 1")
        if self.freq_step is not None and not self.freq_step > 0:
            raise SynthesisError("freq_step must be positive")

    def step_for(self, grid: GridSpec) -> float:
        if self.freq_step is not None:
            return float(self.freq_step)
        return math.pi * grid.n / (grid.extent * self.freq_cutoff)

    def to_json(self, grid: GridSpec | None = None) -> dict:
        out = {"freq_cutoff": self.freq_cutoff, "seed": self.seed, "allow_direct": self.allow_direct,
               "freq_step": self.freq_step}
        if grid is not None:
            out["freq_step"] = self.step_for(grid)
        return out


@dataclass
class FieldRealization:
    grid: GridSpec
    values: np.ndarray
    seed: int
    params: SynthesisParams
    stream: int = 0
    imag_residue: float = 0.0
    method: str = "fft"

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise SynthesisError("realization has non-finite values")


def half_lattice(K: int, d: int) -> np.ndarray:
    """Lattice points of ``[-K, K]^d`` whose first nonzero coordinate is positive."""
    axes = [np.arange(-K, K + 1)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    nz = pts != 0
    first = np.argmax(nz, axis=1)
    lead = pts[np.arange(len(pts)), first]
    return pts[lead > 0]


class LatticeModel:
    """Truncated lattice version of the field for one density and lattice."""

    def __init__(self, f: SpectralDensity, freq_cutoff: int, freq_step: float):
        if not admissible(f.H, f.E):
            raise InadmissibleError(admissible_interval_message(f.H, f.E))
        self.f = f
        self.K = int(freq_cutoff)
        self.step = float(freq_step)
        self.dim = f.dim
        self.coords = half_lattice(self.K, self.dim)
        self.freqs = self.coords * self.step
        self.amplitude = np.sqrt(np.asarray(f(self.freqs))) * self.step ** (self.dim / 2)

    def coefficients(self, seed: int, stream: int = 0) -> np.ndarray:
        return self.amplitude * complex_normals(seed, self.coords, stream)

    def evaluate(self, coef: np.ndarray, points) -> np.ndarray:
        """``X`` at arbitrary points by direct summation over the lattice."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        chunk = max(1, 2_000_000 // len(coef))
        for lo in range(0, len(pts), chunk):
            ph = pts[lo:lo + chunk] @ self.freqs.T
            out[lo:lo + chunk] = 2.0 * ((np.cos(ph) - 1.0) @ coef.real - np.sin(ph) @ coef.imag)
        return out

    def variance(self, points) -> np.ndarray:
        """Exact variance of the truncated model at ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        amp2 = self.amplitude ** 2
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            ph = self.freqs @ p
            out[i] = 2.0 * np.sum(amp2 * (2.0 - 2.0 * np.cos(ph)))
        return out

    def increment_variance(self, h) -> float:
        return float(self.variance(np.asarray(h, dtype=float))[0])

    def fft_size(self, grid: GridSpec) -> int | None:
        N = 2 * math.pi * grid.n / (grid.extent * self.step)
        Nr = round(N)
        return Nr if Nr >= 1 and abs(N - Nr) <= 1e-9 * N else None

    def grid_values(self, coef: np.ndarray, grid: GridSpec, allow_direct: bool = False
                    ) -> tuple[np.ndarray, float, str]:
        N = self.fft_size(grid)
        d = self.dim
        if N is None:
            if not allow_direct:
                raise SynthesisError(
                    "frequency lattice does not align with the grid; enable direct summation")
            axes = np.meshgrid(*[grid.coords()] * d, indexing="ij")
            pts = np.stack(axes, axis=-1).reshape(-1, d)
            return self.evaluate(coef, pts).reshape(grid.shape), 0.0, "direct"
        flat_pos = np.ravel_multi_index(tuple((self.coords % N).T), (N,) * d)
        flat_neg = np.ravel_multi_index(tuple((-self.coords % N).T), (N,) * d)
        size = N ** d
        spec = (np.bincount(flat_pos, coef.real, size) + np.bincount(flat_neg, coef.real, size)
                + 1j * (np.bincount(flat_pos, coef.imag, size) - np.bincount(flat_neg, coef.imag, size)))
        W = np.fft.ifftn(spec.reshape((N,) * d)) * size
        scale = np.max(np.abs(W.real))
        residue = float(np.max(np.abs(W.imag)) / scale) if scale > 0 else 0.0
        idx = np.ix_(*[np.arange(grid.n) % N] * d)
        W = W.real[idx]
        return W - W[(0,) * d], residue, "fft"


def check_resolution(grid: GridSpec, K: int, step: float) -> None:
    if step * K < math.pi * grid.n / grid.extent * (1 - 1e-12):
        warnings.warn("frequency lattice does not reach the grid Nyquist frequency "
                      f"(K*D = {step * K:.4g} < pi*n/L = {math.pi * grid.n / grid.extent:.4g})",
                      stacklevel=3)


def synthesize(f: SpectralDensity, grid: GridSpec, params: SynthesisParams, stream: int = 0,
               model: LatticeModel | None = None) -> FieldRealization:
    """One realization of ``X`` on ``grid``; a pure function of its arguments."""
    if grid.dim != f.dim:
        raise SynthesisError("grid and density dimensions differ")
    step = params.step_for(grid)
    if model is None:
        model = LatticeModel(f, params.freq_cutoff, step)
    check_resolution(grid, params.freq_cutoff, step)
    coef = model.coefficients(params.seed, stream)
    values, residue, method = model.grid_values(coef, grid, params.allow_direct)
    return FieldRealization(grid=grid, values=values, seed=params.seed, params=params,
                            stream=stream, imag_residue=residue, method=method)


def thread_count() -> int:
    env = os.environ.get("OSGRF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer OSGRF_THREADS=%r", env)
    return 1


def synthesize_many(f: SpectralDensity, grid: GridSpec, params: SynthesisParams, count: int,
                    first_stream: int = 0, threads: int | None = None) -> list[FieldRealization]:
    """Realizations with streams ``first_stream ... first_stream + count - 1``.

    Results do not depend on ``threads``: every stream is generated independently.
    """
    model = LatticeModel(f, params.freq_cutoff, params.step_for(grid))
    threads = threads or thread_count()
    streams = range(first_stream, first_stream + count)
    if threads == 1:
        return [synthesize(f, grid, params, s, model) for s in streams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: synthesize(f, grid, params, s, model), streams))


def increment_field(r: FieldRealization, h) -> np.ndarray:
    """``X(x + h) - X(x)`` over the sub-grid where both points exist; ``h`` in grid steps."""
    h_arr = np.asarray(h)
    if h_arr.shape != (r.grid.dim,) or not np.all(np.equal(np.mod(h_arr, 1), 0)):
        raise SynthesisError("lag must be an integer lattice vector in grid steps")
    h_int = h_arr.astype(int)
    n = r.grid.n
    if np.any(np.abs(h_int) >= n):
        raise SynthesisError("lag leaves no overlap with the grid")
    lo = tuple(slice(max(0, -k), n - max(0, k)) for k in h_int)
    hi = tuple(slice(max(0, k), n - max(0, -k)) for k in h_int)
    return r.values[hi] - r.values[lo]
