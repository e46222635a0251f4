"""Explicit ``(R^d, M)`` pseudo-norms.

A pseudo-norm is continuous, positive off the origin and satisfies
``rho(a**M xi) = a * rho(xi)``. All evaluators accept ``(..., d)`` arrays.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .linalg import (ROTATION_DIAG, ROTATION_JORDAN, SCALAR_DIAG, SCALAR_JORDAN,
                     DomainError, GenericBlock, JordanSpec, apply_mat_pow, jordan_assemble)
from .spherefunc import SphereFunction


class PseudoNormError(ValueError):
    pass


def _rows(xi, dim: int | None = None) -> tuple[np.ndarray, tuple]:
    x = np.asarray(xi, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if dim is not None and x.shape[-1] != dim:
        raise PseudoNormError(f"expected vectors of dimension {dim}, got {x.shape[-1]}")
    return x.reshape(-1, x.shape[-1]), x.shape[:-1]


def rho1(xi, lam: float) -> np.ndarray:
    """``|xi| ** (1/lam)``."""
    return np.linalg.norm(np.asarray(xi, dtype=float), axis=-1) ** (1.0 / lam)


def rho3(xi, alpha: float) -> np.ndarray:
    """``|xi| ** (1/alpha)``; the rotation part of the exponent is an isometry."""
    return np.linalg.norm(np.asarray(xi, dtype=float), axis=-1) ** (1.0 / alpha)


def _log_polynomial_recursion(parts: np.ndarray, lam: float) -> np.ndarray:
    """Shared recursion of the nilpotent-block norms.

    ``parts`` has shape ``(m, k, c)``: ``k`` chained components of width ``c``
    (``c = 1`` for scalar chains, ``c = 2`` for rotation pairs). Returns the
    accumulated sum ``Phi_k`` of the component magnitudes.
    """
    m, k, _ = parts.shape
    phi = np.linalg.norm(parts[:, 0], axis=-1)
    for i in range(1, k):
        on_axis = phi == 0.0
        with np.errstate(divide="ignore"):
            t = -np.log(np.where(on_axis, 1.0, phi)) / lam
        comp = parts[:, i].copy()
        coef = np.ones(m)
        for j in range(1, i + 1):
            coef = coef * t / j
            comp += coef[:, None] * parts[:, i - j]
        tau = np.where(on_axis, np.linalg.norm(parts[:, i], axis=-1),
                       np.linalg.norm(comp, axis=-1))
        phi = phi + tau
    return phi


def rho2(xi, lam: float) -> np.ndarray:
    """Norm for a single scalar Jordan chain (homogeneous for ``E2(lam).T``)."""
    x, shape = _rows(xi)
    phi = _log_polynomial_recursion(x[:, :, None], lam)
    return (phi ** (1.0 / lam)).reshape(shape)


def rho4(xi, alpha: float, beta: float = 0.0) -> np.ndarray:
    """Norm for a rotation Jordan chain (homogeneous for ``E4(alpha, beta).T``).

    The chain acts on coordinate pairs as vectors; the recursion combines the
    pairs before taking Euclidean magnitudes. ``beta`` does not enter because
    the rotation commutes with the chain and preserves pair lengths.
    """
    x, shape = _rows(xi)
    if x.shape[1] % 2:
        raise PseudoNormError("rho4 needs an even dimension")
    phi = _log_polynomial_recursion(x.reshape(len(x), -1, 2), alpha)
    return (phi ** (1.0 / alpha)).reshape(shape)


def rotation_phase_formula(xi, alpha: float, beta: float) -> np.ndarray:
    """Two-dimensional phase-twisted candidate for the rotation case.

    ``|xi1 cos(b/a ln r) - xi2 sin(b/a ln r)| / r**(2/a)``. This vanishes on
    whole rays and is not homogeneous; it exists so the defect can be
    demonstrated, not used.
    """
    x, shape = _rows(xi, 2)
    r = np.linalg.norm(x, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    ang = beta / alpha * np.log(safe)
    num = np.abs(x[:, 0] * np.cos(ang) - x[:, 1] * np.sin(ang))
    return np.where(r > 0, num / safe ** (2.0 / alpha), 0.0).reshape(shape)


class PseudoNorm:
    """Base class: subclasses set ``matrix`` and implement ``_eval`` on rows."""

    kind = "abstract"
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, xi) -> np.ndarray | float:
        x, shape = _rows(xi, self.dim)
        out = self._eval(x).reshape(shape)
        return float(out) if out.ndim == 0 else out

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def recipe(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def _frozen(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


class Euclidean(PseudoNorm):
    kind = "euclidean"

    def __init__(self, dim: int):
        self.matrix = _frozen(np.eye(dim))

    def _eval(self, x):
        return np.linalg.norm(x, axis=-1)

    def recipe(self):
        return {"kind": self.kind, "dim": self.dim}


class Generic1(PseudoNorm):
    kind = "generic1"

    def __init__(self, lam: float, dim: int):
        if not lam > 0:
            raise PseudoNormError("generic1 needs lambda > 0")
        self.lam = float(lam)
        self.matrix = _frozen(GenericBlock(SCALAR_DIAG, dim, lam=lam).matrix().T)

    def _eval(self, x):
        return rho1(x, self.lam)

    def recipe(self):
        return {"kind": self.kind, "lambda": self.lam, "dim": self.dim}


class Generic2(PseudoNorm):
    kind = "generic2"

    def __init__(self, lam: float, dim: int):
        if not lam > 0:
            raise PseudoNormError("generic2 needs lambda > 0")
        self.lam = float(lam)
        if dim == 1:
            M = np.array([[lam]])
        else:
            M = GenericBlock(SCALAR_JORDAN, dim, lam=lam).matrix().T
        self.matrix = _frozen(M)

    def _eval(self, x):
        return rho2(x, self.lam)

    def recipe(self):
        return {"kind": self.kind, "lambda": self.lam, "dim": self.dim}


class Generic3(PseudoNorm):
    kind = "generic3"

    def __init__(self, alpha: float, beta: float, dim: int):
        self.alpha, self.beta = float(alpha), float(beta)
        self.matrix = _frozen(GenericBlock(ROTATION_DIAG, dim, alpha=alpha, beta=beta).matrix().T)

    def _eval(self, x):
        return rho3(x, self.alpha)

    def recipe(self):
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "dim": self.dim}


class Generic4(PseudoNorm):
    kind = "generic4"

    def __init__(self, alpha: float, beta: float, dim: int):
        self.alpha, self.beta = float(alpha), float(beta)
        self.matrix = _frozen(GenericBlock(ROTATION_JORDAN, dim, alpha=alpha, beta=beta).matrix().T)

    def _eval(self, x):
        return rho4(x, self.alpha, self.beta)

    def recipe(self):
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "dim": self.dim}


class RotationPhase(PseudoNorm):
    """Phase-twisted rotation formula, available only with ``unverified=True``."""

    kind = "rotation_phase"

    def __init__(self, alpha: float, beta: float, unverified: bool = False):
        if not unverified:
            raise PseudoNormError(
                "rotation_phase fails positivity and homogeneity; pass unverified=True to build it anyway")
        self.alpha, self.beta = float(alpha), float(beta)
        self.matrix = _frozen(GenericBlock(ROTATION_DIAG, 2, alpha=alpha, beta=beta).matrix().T)

    def _eval(self, x):
        return rotation_phase_formula(x, self.alpha, self.beta)

    def recipe(self):
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "unverified": True}


def default_block_norm(block: GenericBlock) -> PseudoNorm:
    if block.kind == SCALAR_DIAG:
        return Generic1(block.lam, block.size)
    if block.kind == SCALAR_JORDAN:
        return Generic2(block.lam, block.size)
    if block.kind == ROTATION_DIAG:
        return Generic3(block.alpha, block.beta, block.size)
    return Generic4(block.alpha, block.beta, block.size)


class Assembled(PseudoNorm):
    """``xi -> || (tau_l((P.T xi)_l))_l ||_p`` over the Jordan blocks."""

    kind = "assembled"

    def __init__(self, spec: JordanSpec, block_norms: Sequence[PseudoNorm] | None = None,
                 p: float = 2.0):
        if block_norms is None:
            block_norms = [default_block_norm(b) for b in spec.blocks]
        block_norms = list(block_norms)
        if len(block_norms) != len(spec.blocks):
            raise PseudoNormError("one pseudo-norm per Jordan block is required")
        for i, (b, nrm) in enumerate(zip(spec.blocks, block_norms)):
            if nrm.dim != b.size:
                raise PseudoNormError(f"block {i}: norm dimension {nrm.dim} != block size {b.size}")
            want = b.matrix().T
            if not np.allclose(nrm.matrix, want, rtol=1e-12, atol=1e-12 * np.abs(want).max()):
                raise PseudoNormError(f"block {i}: norm is not homogeneous for the block transpose")
        if not p >= 1:
            raise PseudoNormError("combiner exponent p must lie in [1, inf]")
        self.spec = spec
        self.block_norms = block_norms
        self.p = float(p)
        self.E = jordan_assemble(spec)
        self.matrix = _frozen(self.E.entries.T)
        self._splits = np.cumsum(spec.sizes)[:-1]

    def _eval(self, x):
        zeta = x @ self.spec.P
        vals = np.stack([nrm(z) for nrm, z in
                         zip(self.block_norms, np.split(zeta, self._splits, axis=1))], axis=-1)
        if math.isinf(self.p):
            return vals.max(axis=-1)
        if self.p == 1.0:
            return vals.sum(axis=-1)
        if self.p == 2.0:
            return np.sqrt(np.sum(vals * vals, axis=-1))
        return np.sum(vals ** self.p, axis=-1) ** (1.0 / self.p)

    def recipe(self):
        return {"kind": self.kind, "jordan": self.spec.to_json(),
                "blocks": [n.recipe() for n in self.block_norms],
                "p": "inf" if math.isinf(self.p) else self.p}


def _project_rows(x: np.ndarray, rho: PseudoNorm) -> tuple[np.ndarray, np.ndarray]:
    r = rho._eval(x)
    nz = r > 0
    out = np.zeros_like(x)
    if np.any(nz):
        out[nz] = apply_mat_pow(rho.matrix, 1.0 / r[nz], x[nz])
    return out, r


def radial_project(xi, rho: PseudoNorm) -> np.ndarray:
    """Map nonzero ``xi`` along its ``M``-orbit onto ``{rho = 1}``."""
    x, shape = _rows(xi, rho.dim)
    if np.any(~np.any(x != 0, axis=1)):
        raise DomainError("radial projection is undefined at the origin")
    out, _ = _project_rows(x, rho)
    return out.reshape(shape + (rho.dim,))


class Transferred(PseudoNorm):
    """``xi -> g(rho(xi)**(-M) xi) * rho(xi)`` for a positive sphere function ``g``."""

    kind = "transferred"

    def __init__(self, base: PseudoNorm, g: SphereFunction):
        self.base = base
        self.g = g
        self.matrix = base.matrix

    def _eval(self, x):
        theta, r = _project_rows(x, self.base)
        out = np.zeros(len(x))
        nz = r > 0
        if np.any(nz):
            out[nz] = self.g(theta[nz]) * r[nz]
        return out

    def recipe(self):
        return {"kind": self.kind, "base": self.base.recipe(), "g": self.g.to_json()}


class Custom(PseudoNorm):
    """User-supplied evaluator; checked only by the property suite."""

    kind = "custom"

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], matrix):
        self.func = func
        self.matrix = _frozen(matrix)

    def _eval(self, x):
        return np.asarray(self.func(x), dtype=float)


def transfer(rho_base: PseudoNorm, g: SphereFunction) -> Transferred:
    return Transferred(rho_base, g)


def same_matrix(a: PseudoNorm, b: PseudoNorm, rtol: float = 1e-12) -> bool:
    A, B = a.matrix, b.matrix
    return A.shape == B.shape and bool(np.allclose(A, B, rtol=rtol, atol=rtol * max(np.abs(A).max(), 1.0)))


def recover_g(rho_a: PseudoNorm, rho_b: PseudoNorm, samples) -> "SphereFunction":
    """Tabulate ``rho_b / rho_a`` on the projections of ``samples`` onto ``{rho_a = 1}``."""
    from .spherefunc import TableSphereFunction

    if not same_matrix(rho_a, rho_b):
        raise PseudoNormError("pseudo-norms have different homogeneity matrices")
    theta = radial_project(samples, rho_a).reshape(-1, rho_a.dim)
    values = rho_b(theta) / rho_a(theta)
    return TableSphereFunction(theta, values)


def homogeneity_error(rho: PseudoNorm, n: int = 10_000, seed: int = 0,
                      a_range=(0.1, 10.0), radius_range=(1e-3, 1e3)) -> float:
    """Max relative deviation of ``rho(a**M xi)`` from ``a rho(xi)`` on random draws."""
    rng = np.random.default_rng(seed)
    d = rho.dim
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    xi = u * np.exp(rng.uniform(*np.log(radius_range), size=n))[:, None]
    a = np.exp(rng.uniform(*np.log(a_range), size=n))
    lhs = rho(apply_mat_pow(rho.matrix, a, xi))
    rhs = a * rho(xi)
    return float(np.max(np.abs(lhs - rhs) / rhs))


def positivity_witness(rho: PseudoNorm, n_rays: int = 4096, seed: int = 0) -> dict:
    """Minimum of ``rho`` over Euclidean unit directions and the direction attaining it.

    A minimum at or below ``1e-12`` times the median marks a vanishing ray.
    """
    d = rho.dim
    if d == 1:
        u = np.array([[1.0], [-1.0]])
    elif d == 2:
        ang = np.linspace(0, 2 * np.pi, n_rays, endpoint=False)
        u = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        u = np.random.default_rng(seed).normal(size=(n_rays, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    vals = rho(u)
    i = int(np.argmin(vals))
    if d == 2:
        from scipy.optimize import minimize_scalar

        step = 2 * np.pi / n_rays
        res = minimize_scalar(lambda t: float(rho(np.array([np.cos(t), np.sin(t)]))),
                              bounds=(ang[i] - step, ang[i] + step), method="bounded",
                              options={"xatol": 1e-14})
        if res.fun < vals[i]:
            u_min = np.array([np.cos(res.x), np.sin(res.x)])
            vmin = float(res.fun)
        else:
            u_min, vmin = u[i], float(vals[i])
    else:
        u_min, vmin = u[i], float(vals[i])
    median = float(np.median(vals))
    return {"min": vmin, "witness": u_min.tolist(), "median": median,
            "positive": bool(vmin > 1e-12 * median)}


def quasi_triangle_constant(rho: PseudoNorm, n_samples: int, seed: int) -> float:
    """Empirical lower bound for the quasi-triangle constant of ``rho``.

    Pairs are drawn with independent log-uniform ``rho``-radii in ``[1e-3, 1e3]``
    by moving random directions along their ``M``-orbits.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = rho.dim

    def draw():
        u = rng.normal(size=(n_samples, d))
        theta, _ = _project_rows(u, rho)
        s = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=n_samples))
        return apply_mat_pow(rho.matrix, s, theta)

    x, y = draw(), draw()
    ratio = rho(x + y) / (rho(x) + rho(y))
    return float(np.max(ratio))
