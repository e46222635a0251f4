"""JSON recipes for Jordan specs, pseudo-norms and spectral densities."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .linalg import AnisotropyMatrix, JordanSpec, jordan_decompose
from .pseudonorm import (Assembled, Euclidean, Generic1, Generic2, Generic3, Generic4,
                         PseudoNorm, PseudoNormError, RotationPhase, Transferred)
from .spectral import SpectralDensity
from .spherefunc import ExpressionError, sphere_function_from_json


class RecipeError(ValueError):
    """A recipe file is malformed or violates a module invariant."""


def load_json(path) -> dict:
    """Parse a JSON file; syntax errors report the byte offset."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise RecipeError(f"cannot read {path}: {exc.strerror}") from None
    return parse_json(raw, str(path))


def parse_json(raw: bytes, name: str = "<input>"):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RecipeError(f"{name}: invalid UTF-8 at byte offset {exc.start}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise RecipeError(f"{name}: malformed JSON at byte offset {offset}: {exc.msg}") from None


def _matrix(value, what: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise RecipeError(f"{what} must be an array of arrays of numbers") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.size == 0:
        raise RecipeError(f"{what} must be a square matrix")
    if not np.all(np.isfinite(M)):
        raise RecipeError(f"{what} has non-finite entries")
    return M


def _number(data: dict, key: str, kind: str) -> float:
    if key not in data:
        raise RecipeError(f"{kind} recipe needs '{key}'")
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise RecipeError(f"{kind} recipe: '{key}' must be a number")
    return float(v)


def _dim(data: dict, kind: str, default: int) -> int:
    v = data.get("dim", default)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise RecipeError(f"{kind} recipe: 'dim' must be a positive integer")
    return v


def jordan_from_json(data) -> JordanSpec:
    if not isinstance(data, dict) or "P" not in data or "blocks" not in data:
        raise RecipeError("Jordan spec needs 'P' and 'blocks'")
    try:
        return JordanSpec.from_json(data)
    except (KeyError, TypeError) as exc:
        raise RecipeError(f"Jordan spec: missing or invalid field {exc}") from None
    except ValueError as exc:
        raise RecipeError(f"Jordan spec: {exc}") from None


def pseudonorm_from_recipe(data) -> PseudoNorm:
    """Build a pseudo-norm; an optional ``homogeneity`` matrix is cross-checked."""
    if not isinstance(data, dict):
        raise RecipeError("pseudo-norm recipe must be a JSON object")
    kind = data.get("kind")
    try:
        rho = _build(kind, data)
    except RecipeError:
        raise
    except (PseudoNormError, ExpressionError, ValueError) as exc:
        raise RecipeError(f"{kind} recipe: {exc}") from None
    if "homogeneity" in data:
        M = _matrix(data["homogeneity"], "homogeneity")
        if M.shape != rho.matrix.shape or not np.allclose(M, rho.matrix, rtol=1e-10, atol=1e-12):
            raise RecipeError(f"{kind} recipe: stated homogeneity matrix {M.tolist()} does not match "
                              f"the construction's {np.asarray(rho.matrix).tolist()}")
    return rho


def _build(kind, data: dict) -> PseudoNorm:
    if kind == "euclidean":
        return Euclidean(_dim(data, kind, 2))
    if kind in ("generic1", "generic2"):
        cls = Generic1 if kind == "generic1" else Generic2
        return cls(_number(data, "lambda", kind), _dim(data, kind, 2))
    if kind in ("generic3", "generic4"):
        cls = Generic3 if kind == "generic3" else Generic4
        return cls(_number(data, "alpha", kind), _number(data, "beta", kind),
                   _dim(data, kind, 2 if kind == "generic3" else 4))
    if kind == "rotation_phase":
        return RotationPhase(_number(data, "alpha", kind), _number(data, "beta", kind),
                             unverified=bool(data.get("unverified", False)))
    if kind == "assembled":
        if "jordan" in data:
            spec = jordan_from_json(data["jordan"])
        elif "E" in data:
            spec = jordan_decompose(_matrix(data["E"], "E"))
        else:
            raise RecipeError("assembled recipe needs 'jordan' or 'E'")
        blocks = data.get("blocks")
        norms = None if blocks is None else [pseudonorm_from_recipe(b) for b in blocks]
        p = data.get("p", 2.0)
        if p == "inf":
            p = math.inf
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise RecipeError("assembled recipe: 'p' must be a number >= 1 or \"inf\"")
        return Assembled(spec, norms, float(p))
    if kind == "transferred":
        if "base" not in data or "g" not in data:
            raise RecipeError("transferred recipe needs 'base' and 'g'")
        return Transferred(pseudonorm_from_recipe(data["base"]), sphere_function_from_json(data["g"]))
    raise RecipeError(f"unknown pseudo-norm kind {kind!r}")


def density_from_recipe(data, hurst: float | None = None) -> SpectralDensity:
    """``{"pseudonorm": ..., "H": x, "E": matrix}``; ``hurst`` overrides ``H``.

    Admissibility errors propagate as :class:`InadmissibleError`.
    """
    if not isinstance(data, dict) or "pseudonorm" not in data:
        raise RecipeError("density recipe needs a 'pseudonorm' object")
    rho = pseudonorm_from_recipe(data["pseudonorm"])
    H = hurst if hurst is not None else _number(data, "H", "density")
    E = _matrix(data["E"], "E") if "E" in data else None
    if E is not None:
        try:
            AnisotropyMatrix(E)
        except ValueError as exc:
            raise RecipeError(f"density recipe: {exc}") from None
        if E.shape != rho.matrix.shape or not np.allclose(rho.matrix, E.T, rtol=1e-10, atol=1e-10):
            raise RecipeError("density recipe: pseudo-norm homogeneity matrix must equal E transposed")
    return SpectralDensity(rho, H, E)
