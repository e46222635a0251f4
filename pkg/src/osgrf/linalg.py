"""Matrix powers ``a**E = expm(log(a) E)`` and real Jordan structure.

The matrix exponential is a scaling-and-squaring Pade(13) evaluation that is
vectorized over a stack of scale factors, which is what the homogeneity and
radial-projection code needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SCALAR_DIAG = "scalar_diag"
SCALAR_JORDAN = "scalar_jordan"
ROTATION_DIAG = "rotation_diag"
ROTATION_JORDAN = "rotation_jordan"
BLOCK_KINDS = (SCALAR_DIAG, SCALAR_JORDAN, ROTATION_DIAG, ROTATION_JORDAN)


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class InvalidMatrix(ValueError):
    """Matrix violating a construction invariant."""


class DefectiveMatrix(ValueError):
    """Raised by :func:`jordan_decompose` for matrices with Jordan chains."""


# Pade(13) coefficients (Higham 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a single ``(d, d)`` matrix or a ``(k, d, d)`` stack."""
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    k, d, _ = A.shape
    # Frobenius norm is transpose invariant, so expm(A.T) squares the same
    # number of times as expm(A).
    norms = np.sqrt(np.einsum("kij,kij->k", A, A))
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0).astype(int)
    A = A / (2.0 ** s)[:, None, None]
    b = _PADE13
    ident = np.broadcast_to(np.eye(d), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for j in range(int(s.max(initial=0))):
        sel = s > j
        R[sel] = R[sel] @ R[sel]
    return R[0] if single else R


def as_matrix(E) -> np.ndarray:
    if isinstance(E, AnisotropyMatrix):
        return E.entries
    M = np.asarray(E, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {M.shape}")
    return M


def mat_pow(E, a) -> np.ndarray:
    """Return ``a**E``; ``a`` may be a scalar or an array of positive reals.

    For an array of shape ``s`` the result has shape ``s + (d, d)``.
    """
    M = as_matrix(E)
    a_arr = np.asarray(a, dtype=float)
    if np.any(~(a_arr > 0)):
        raise DomainError("mat_pow requires a > 0")
    logs = np.log(a_arr).reshape(-1)
    out = expm(logs[:, None, None] * M[None])
    return out.reshape(a_arr.shape + M.shape)


def apply_mat_pow(E, a, xi) -> np.ndarray:
    """Apply ``a_i**E`` to row vectors ``xi_i`` (broadcast over the leading axis)."""
    P = mat_pow(E, a)
    xi = np.asarray(xi, dtype=float)
    return np.einsum("...ij,...j->...i", P, xi)


@dataclass(frozen=True)
class AnisotropyMatrix:
    """Square matrix whose eigenvalues all have positive real part."""

    entries: np.ndarray

    def __post_init__(self):
        M = np.array(as_matrix(self.entries), dtype=float)
        if not np.all(np.isfinite(M)):
            raise InvalidMatrix("matrix has non-finite entries")
        eig = np.linalg.eigvals(M)
        if np.min(eig.real) <= 0:
            raise InvalidMatrix(
                f"eigenvalue real parts must be positive (min is {np.min(eig.real):.6g})")
        M.setflags(write=False)
        object.__setattr__(self, "entries", M)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def T(self) -> np.ndarray:
        return self.entries.T

    def trace(self) -> float:
        return float(np.trace(self.entries))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def lambda_min(E) -> float:
    """Smallest real part over the spectrum of ``E``."""
    return float(np.min(np.linalg.eigvals(as_matrix(E)).real))


@dataclass(frozen=True)
class GenericBlock:
    kind: str
    size: int
    lam: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise InvalidMatrix(f"unknown block kind {self.kind!r}")
        if self.size < 1:
            raise InvalidMatrix("block size must be >= 1")
        if self.kind in (SCALAR_DIAG, SCALAR_JORDAN):
            if self.lam is None or not self.lam > 0:
                raise InvalidMatrix(f"{self.kind} block needs lambda > 0")
            if self.kind == SCALAR_JORDAN and self.size < 2:
                raise InvalidMatrix("scalar_jordan block needs size >= 2")
        else:
            if self.alpha is None or not self.alpha > 0:
                raise InvalidMatrix(f"{self.kind} block needs alpha > 0")
            if self.beta is None:
                object.__setattr__(self, "beta", 0.0)
            if self.size % 2:
                raise InvalidMatrix(f"{self.kind} block needs even size")
            if self.kind == ROTATION_JORDAN and self.size < 4:
                raise InvalidMatrix("rotation_jordan block needs size >= 4")

    def matrix(self) -> np.ndarray:
        n = self.size
        if self.kind in (SCALAR_DIAG, SCALAR_JORDAN):
            M = self.lam * np.eye(n)
            if self.kind == SCALAR_JORDAN:
                M += np.eye(n, k=1)
            return M
        A = np.array([[self.alpha, self.beta], [-self.beta, self.alpha]])
        M = np.kron(np.eye(n // 2), A)
        if self.kind == ROTATION_JORDAN:
            M += np.eye(n, k=2)
        return M

    def to_json(self) -> dict:
        out = {"kind": self.kind, "size": self.size}
        if self.kind in (SCALAR_DIAG, SCALAR_JORDAN):
            out["lambda"] = self.lam
        else:
            out["alpha"] = self.alpha
            out["beta"] = self.beta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GenericBlock":
        return cls(kind=data["kind"], size=int(data["size"]), lam=data.get("lambda"),
                   alpha=data.get("alpha"), beta=data.get("beta"))


def block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    n = sum(m.shape[0] for m in mats)
    out = np.zeros((n, n))
    i = 0
    for m in mats:
        k = m.shape[0]
        out[i:i + k, i:i + k] = m
        i += k
    return out


@dataclass(frozen=True)
class JordanSpec:
    """Change of basis ``P`` and the ordered real Jordan blocks of ``E``."""

    P: np.ndarray
    blocks: tuple[GenericBlock, ...]
    condition: float = field(init=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        blocks = tuple(self.blocks)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidMatrix("P must be square")
        if sum(b.size for b in blocks) != P.shape[0]:
            raise InvalidMatrix("block sizes must sum to the dimension of P")
        sv = np.linalg.svd(P, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            raise InvalidMatrix("P is numerically singular")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "condition", float(sv[0] / sv[-1]))

    @property
    def dim(self) -> int:
        return self.P.shape[0]

    @property
    def sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    def block_matrix(self) -> np.ndarray:
        return block_diag([b.matrix() for b in self.blocks])

    def to_json(self) -> dict:
        return {"P": self.P.tolist(), "blocks": [b.to_json() for b in self.blocks]}

    @classmethod
    def from_json(cls, data: dict) -> "JordanSpec":
        return cls(P=np.asarray(data["P"], dtype=float),
                   blocks=tuple(GenericBlock.from_json(b) for b in data["blocks"]))


def jordan_assemble(spec: JordanSpec) -> AnisotropyMatrix:
    """``P @ blockdiag(blocks) @ inv(P)``."""
    P = spec.P
    E = P @ np.linalg.solve(P.T, spec.block_matrix().T).T
    return AnisotropyMatrix(E)


def _normalize_sign(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    i = np.argmax(np.abs(v))
    return v if v[i] >= 0 else -v


def _null_space(A: np.ndarray, m: int, tol: float) -> np.ndarray:
    _, s, vh = np.linalg.svd(A)
    if np.count_nonzero(s <= tol) < m:
        raise DefectiveMatrix(
            "eigenvalue has a deficient eigenspace; the real Jordan form of a "
            "defective matrix is ill-conditioned, supply a JordanSpec directly")
    return vh[-m:].conj().T


def jordan_decompose(E, tol: float = 1e-8) -> JordanSpec:
    """Real Jordan decomposition of a non-defective matrix.

    Eigenvalues closer than ``tol * ||E||`` are clustered; a cluster whose
    eigenspace is smaller than its size raises :class:`DefectiveMatrix`.
    Real clusters become ``scalar_diag`` blocks, conjugate pairs become
    ``rotation_diag`` blocks with ``beta = Im(mu) > 0``. Blocks are ordered by
    decreasing real part.
    """
    M = as_matrix(E)
    d = M.shape[0]
    scale = max(np.linalg.norm(M, 2), np.finfo(float).tiny)
    eps = tol * scale
    w, vecs = np.linalg.eig(M)

    clusters: list[list[int]] = []
    for i in np.argsort(-w.real, kind="stable"):
        for c in clusters:
            if any(abs(w[i] - w[j]) <= eps for j in c):
                c.append(i)
                break
        else:
            clusters.append([i])

    columns: list[np.ndarray] = []
    blocks: list[GenericBlock] = []
    for c in clusters:
        mu = np.mean(w[c])
        m = len(c)
        if abs(mu.imag) <= eps:
            if m == 1:
                basis = vecs[:, c].real
            else:
                basis = _null_space(M - mu.real * np.eye(d), m, eps).real
            columns.extend(_normalize_sign(basis[:, j]) for j in range(m))
            blocks.append(GenericBlock(SCALAR_DIAG, m, lam=float(mu.real)))
        elif mu.imag > 0:
            if m == 1:
                basis = vecs[:, c]
            else:
                basis = _null_space(M - mu * np.eye(d), m, eps)
            for j in range(m):
                v = basis[:, j]
                # rotate the phase so the real part carries the largest entry
                k = np.argmax(np.abs(v))
                v = v * np.exp(-1j * np.angle(v[k]))
                columns.extend([v.real, v.imag])
            blocks.append(GenericBlock(ROTATION_DIAG, 2 * m, alpha=float(mu.real),
                                       beta=float(mu.imag)))
    P = np.column_stack(columns)
    if P.shape != (d, d):
        raise DefectiveMatrix("could not assemble a full eigenbasis")
    return JordanSpec(P=P, blocks=tuple(blocks))
