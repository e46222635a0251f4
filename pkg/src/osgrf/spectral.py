"""Spectral densities ``f = rho**(-2H - tr E)`` and quadrature for the field covariance.

Quadrature uses coordinates adapted to the exponent: with ``B`` solving
``E B + B E.T = I`` (positive definite because ``-E`` is stable), every
nonzero frequency is uniquely ``xi = exp(t E.T) v`` with ``v`` on the ellipsoid
``v.T inv(B) v = 1``. In these coordinates ``f(xi) d(xi)`` becomes
``exp(-2 H t) f(v) |v|^2 / 2 det(B)^(-1/2) dt dsigma``, so the radial
integrals are one-dimensional and the operator scaling of the covariance is
a shift in ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import solve_continuous_lyapunov
from scipy.special import gammaln

from .linalg import AnisotropyMatrix, as_matrix, lambda_min, mat_pow
from .pseudonorm import PseudoNorm


class InadmissibleError(ValueError):
    """Hurst index outside ``(0, lambda_min(E))``."""


class QuadratureError(RuntimeError):
    pass


def admissible(H: float, E) -> bool:
    return bool(0.0 < H < lambda_min(E))


def admissible_interval_message(H: float, E) -> str:
    return f"H must lie in (0, {lambda_min(E):.6g}); got H = {H:.6g}"


class SpectralDensity:
    """``xi -> rho(xi) ** (-2H - tr E)`` for an ``E.T``-homogeneous ``rho``."""

    def __init__(self, rho: PseudoNorm, H: float, E=None, *, _check: bool = True):
        E = AnisotropyMatrix(rho.matrix.T if E is None else as_matrix(E))
        if not np.allclose(rho.matrix, E.T, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(E.entries).max())):
            raise ValueError("pseudo-norm homogeneity matrix must equal E.T")
        H = float(H)
        if _check and not admissible(H, E):
            raise InadmissibleError(admissible_interval_message(H, E))
        self.rho, self.H, self.E = rho, H, E
        self.trace_E = E.trace()
        self.exponent = 2.0 * H + self.trace_E

    @classmethod
    def unchecked(cls, rho: PseudoNorm, H: float, E=None) -> "SpectralDensity":
        """Skip the admissibility check (for divergence tests only)."""
        return cls(rho, H, E, _check=False)

    @property
    def dim(self) -> int:
        return self.E.dim

    def __call__(self, xi):
        r = np.asarray(self.rho(xi), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(r > 0, r, 0.0) ** (-self.exponent)
        return float(out) if out.ndim == 0 else out

    def recipe(self) -> dict:
        return {"pseudonorm": self.rho.recipe(), "H": self.H, "E": self.E.entries.tolist()}


def density_eval(f: SpectralDensity, xi):
    return f(xi)


# ---------------------------------------------------------------------------
# Adapted polar coordinates


@dataclass(frozen=True)
class _Frame:
    E: np.ndarray
    B_inv_sqrt: np.ndarray
    v: np.ndarray
    weights: np.ndarray  # angular weight times f(v) |v|^2 / 2 det(B)^(-1/2)


def sphere_rule(d: int, n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating over the Euclidean unit sphere in ``R^d``.

    ``n`` is the number of azimuthal nodes in 2-D and 3-D; for ``d >= 4`` it
    is the Monte Carlo sample count.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        ang = (np.arange(n) + 0.5) * (2 * np.pi / n)
        return np.column_stack([np.cos(ang), np.sin(ang)]), np.full(n, 2 * np.pi / n)
    if d == 3:
        nz = max(n // 2, 2)
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = (np.arange(n) + 0.5) * (2 * np.pi / n)
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1 - zz ** 2)
        pts = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(n, 2 * np.pi / n)[None, :]).reshape(-1)
        return pts, w
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, d))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return pts, np.full(n, area / n)


def _frame(f: SpectralDensity, n_angular: int, seed: int = 0) -> _Frame:
    E = f.E.entries
    d = f.dim
    B = solve_continuous_lyapunov(-E, -np.eye(d))
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    B_inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    w, ww = sphere_rule(d, n_angular, seed)
    v = w @ B_inv_sqrt.T
    jac = 0.5 * np.sum(v * v, axis=1) / math.sqrt(np.prod(evals))
    return _Frame(E=E, B_inv_sqrt=B_inv_sqrt, v=v, weights=ww * np.asarray(f(v)) * jac)


# ---------------------------------------------------------------------------
# Covariance


@dataclass(frozen=True)
class Quadrature:
    """Node placement for covariance quadrature.

    Radial windows are expressed through the maximal phase ``Phi(t)`` reached
    at adapted radius ``t``: oscillatory terms are integrated in full up to
    ``Phi = taper_start``, smoothly tapered out by ``Phi = taper_end``, and
    the non-oscillatory remainder of the tail is integrated analytically.
    """

    taper_start: float = 32.0
    taper_end: float = 256.0
    angular_nodes: int | None = None
    panel_phase: float = 1.0
    gauss_order: int = 8
    origin_rtol: float = 1e-8
    rtol: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.taper_start < self.taper_end):
            raise ValueError("need 0 < taper_start < taper_end")
        if self.gauss_order < 1 or self.panel_phase <= 0:
            raise ValueError("gauss_order and panel_phase must be positive")

    def n_angular(self, d: int) -> int:
        if self.angular_nodes is not None:
            return int(self.angular_nodes)
        if d == 2:
            return max(256, int(math.ceil(3 * self.taper_end)))
        if d == 3:
            return max(32, int(math.ceil(self.taper_end / 2)))
        return 20_000

    def coarse(self) -> "Quadrature":
        return Quadrature(self.taper_start / 2, self.taper_end / 2,
                          None if self.angular_nodes is None else max(self.angular_nodes // 2, 8),
                          self.panel_phase * 1.5, self.gauss_order, self.origin_rtol * 10,
                          self.rtol, self.seed)


@dataclass(frozen=True)
class CovarianceQuery:
    x: np.ndarray
    y: np.ndarray
    quadrature: Quadrature = field(default_factory=Quadrature)


@dataclass
class CovarianceResult:
    value: float
    error_estimate: float
    nodes_used: int
    flagged: bool = False

    def to_json(self) -> dict:
        return asdict(self)


def _smooth_step_down(s: np.ndarray) -> np.ndarray:
    """C-infinity transition from 1 (s <= 0) to 0 (s >= 1)."""
    s = np.clip(s, 0.0, 1.0)
    out = np.empty_like(s)
    out[s <= 0] = 1.0
    out[s >= 1] = 0.0
    mid = (s > 0) & (s < 1)
    a = np.exp(-1.0 / s[mid])
    b = np.exp(-1.0 / (1.0 - s[mid]))
    out[mid] = b / (a + b)
    return out


def _solve_t(phase_at, target: float) -> float:
    lo, hi = -1.0, 1.0
    while phase_at(lo) > target:
        lo *= 2.0
        if lo < -1e4:
            raise QuadratureError("could not bracket the inner radius")
    while phase_at(hi) < target:
        hi *= 2.0
        if hi > 1e4:
            raise QuadratureError("could not bracket the outer radius")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if phase_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _half_variogram(f: SpectralDensity, frame: _Frame, z: np.ndarray, q: Quadrature
                    ) -> tuple[float, float, int]:
    """``int (1 - cos<z, xi>) f(xi) dxi`` with an origin-truncation estimate."""
    E, Bm = frame.E, frame.B_inv_sqrt
    H = f.H

    def orbit(t):
        return mat_pow(E, np.exp(np.atleast_1d(t))) @ z

    def phase_at(t):
        return float(np.linalg.norm(Bm @ orbit(t)[0]))

    def rate_at(t):
        return float(np.linalg.norm(Bm @ (mat_pow(E, math.exp(t)) @ (E @ z))))

    ratio = max(1.0 - H / lambda_min(E), 1e-3)
    phase0 = math.exp(max(math.log(q.origin_rtol) / (2 * ratio), -300.0))
    t0 = _solve_t(phase_at, phase0)
    tc = _solve_t(phase_at, q.taper_start)
    te = _solve_t(phase_at, q.taper_end)

    def panels(a, b):
        edges = [a]
        while edges[-1] < b:
            t = edges[-1]
            edges.append(min(b, t + min(0.25, q.panel_phase / max(rate_at(t), 1e-300))))
        return np.array(edges)

    gx, gw = np.polynomial.legendre.leggauss(q.gauss_order)

    def nodes(edges):
        a, b = edges[:-1, None], edges[1:, None]
        t = (0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)).ravel()
        w = (0.5 * (b - a) * gw[None, :]).ravel()
        return t, w

    ta, wa = nodes(panels(t0, tc))
    tb, wb = nodes(panels(tc, te))
    taper = _smooth_step_down((tb - tc) / (te - tc))

    ang = frame.weights
    inner = 0.0
    origin_density = 0.0
    chunk = max(1, 4_000_000 // max(len(ang), 1))
    for lo in range(0, len(ta), chunk):
        t = ta[lo:lo + chunk]
        ph = orbit(t) @ frame.v.T
        s = np.sin(0.5 * ph)
        radial = (2.0 * s * s) @ ang
        inner += float(np.sum(wa[lo:lo + chunk] * np.exp(-2 * H * t) * radial))
        if lo == 0:
            origin_density = float(np.exp(-2 * H * t[0]) * radial[0])
    tail = 0.0
    for lo in range(0, len(tb), chunk):
        t = tb[lo:lo + chunk]
        ph = orbit(t) @ frame.v.T
        radial = np.cos(ph) @ ang
        tail += float(np.sum(wb[lo:lo + chunk] * taper[lo:lo + chunk] * np.exp(-2 * H * t) * radial))
    const = math.exp(-2 * H * tc) / (2 * H) * float(np.sum(ang))
    value = inner + const - tail
    # integrand decays at least like exp(2 (lambda_min - H) (t - t0)) toward the origin
    origin_bound = origin_density / (2 * (lambda_min(E) - H)) if lambda_min(E) > H else math.inf
    return value, origin_bound, (len(ta) + len(tb)) * len(ang)


def variogram(f: SpectralDensity, z, quadrature: Quadrature | None = None) -> CovarianceResult:
    """``E[X(z)^2] = 2 int (1 - cos<z, xi>) f(xi) dxi`` with an error estimate."""
    q = quadrature or Quadrature()
    z = np.asarray(z, dtype=float).reshape(f.dim)
    if not np.any(z):
        return CovarianceResult(0.0, 0.0, 0)
    fine, origin, n_fine = _half_variogram(f, _frame(f, q.n_angular(f.dim), q.seed), z, q)
    qc = q.coarse()
    coarse, _, n_coarse = _half_variogram(f, _frame(f, qc.n_angular(f.dim), q.seed), z, qc)
    if not (math.isfinite(fine) and math.isfinite(coarse)):
        raise QuadratureError("quadrature produced a non-finite value")
    err = 2.0 * (abs(fine - coarse) + origin)
    value = 2.0 * fine
    return CovarianceResult(value, err, n_fine + n_coarse, flagged=err > q.rtol * abs(value))


def covariance(f: SpectralDensity, query: CovarianceQuery | None = None, *, x=None, y=None,
               quadrature: Quadrature | None = None) -> CovarianceResult:
    """``E[X(x) X(y)]`` through ``(V(x) + V(y) - V(x - y)) / 2``.

    The three terms are the real form of the harmonizable covariance kernel;
    ``V(-z)`` and ``V(z)`` use identical nodes, so the result is exactly
    symmetric in ``(x, y)``.
    """
    if query is None:
        query = CovarianceQuery(np.asarray(x, float), np.asarray(y, float), quadrature or Quadrature())
    x = np.asarray(query.x, dtype=float).reshape(f.dim)
    y = np.asarray(query.y, dtype=float).reshape(f.dim)
    q = query.quadrature
    vx = variogram(f, x, q)
    vy = variogram(f, y, q)
    vxy = variogram(f, x - y, q)
    value = 0.5 * (vx.value + vy.value) - 0.5 * vxy.value
    err = 0.5 * (vx.error_estimate + vy.error_estimate + vxy.error_estimate)
    return CovarianceResult(value, err, vx.nodes_used + vy.nodes_used + vxy.nodes_used,
                            flagged=err > q.rtol * max(abs(value), 1e-300))


def isotropic_variogram_constant(H: float, d: int) -> float:
    """``c`` with ``2 int (1 - cos<z, xi>) |xi|^(-2H-d) dxi = c |z|^(2H)``."""
    log_c = (d / 2) * math.log(math.pi) + gammaln(1 - H) - 2 * H * math.log(2) - math.log(H) - gammaln(H + d / 2)
    return 2.0 * math.exp(log_c)


# ---------------------------------------------------------------------------
# Integrability


@dataclass
class IntegrabilityReport:
    converged: bool
    shell_sums: list
    ratio: float
    inner_ratio: float
    expected_outer_ratio: float

    def to_json(self) -> dict:
        return asdict(self)


def integrability_check(f: SpectralDensity, shells: int = 12, angular_nodes: int = 256,
                        order: int = 16) -> IntegrabilityReport:
    """Integrate ``min(1, |xi|^2) f`` over dyadic shells ``{2^j <= rho < 2^(j+1)}``.

    ``ratio`` is the outermost consecutive-shell ratio (``2^(-2H)`` in the
    limit); ``inner_ratio`` is the innermost one. Both below one means both
    geometric series, hence the integral, converge.
    """
    if shells < 4:
        raise ValueError("need at least 4 shells on each side")
    frame = _frame(f, angular_nodes)
    E = frame.E
    rho_v = np.asarray(f.rho(frame.v))
    gx, gw = np.polynomial.legendre.leggauss(order)
    ln2 = math.log(2.0)
    sums = []
    for j in range(-shells, shells):
        a = j * ln2 - np.log(rho_v)
        t = a[:, None] + ln2 * 0.5 * (gx[None, :] + 1.0)
        w = ln2 * 0.5 * gw
        P = mat_pow(E.T, np.exp(t.ravel()))
        xi = np.einsum("kij,kj->ki", P, np.repeat(frame.v, order, axis=0))
        damp = np.minimum(1.0, np.sum(xi * xi, axis=1)).reshape(t.shape)
        vals = damp * np.exp(-2 * f.H * t) * w[None, :]
        sums.append(float(np.sum(vals.sum(axis=1) * frame.weights)))
    if not all(math.isfinite(s) for s in sums):
        raise QuadratureError("shell quadrature produced a non-finite value")
    outer = sums[-1] / sums[-2]
    inner = sums[0] / sums[1]
    return IntegrabilityReport(converged=bool(outer < 1.0 and inner < 1.0), shell_sums=sums,
                               ratio=outer, inner_ratio=inner,
                               expected_outer_ratio=2.0 ** (-2 * f.H))
