"""Dense tensor algebra on row-major float64 arrays.

Tensors are plain :class:`numpy.ndarray` objects (C order, float64).  Mode
indices are zero-based axes; negative axes count from the end as in numpy.

The mode product follows the convention

    (X x_m U)[..., j, ...] = sum_i X[..., i, ...] * U[i, j]

so ``U`` has shape ``(X.shape[m], new_dim)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "as_tensor",
    "unfold",
    "fold",
    "mode_product",
    "multi_mode_product",
    "kronecker",
    "vec",
    "unvec",
    "hosvd",
    "frobenius_norm",
    "concat_feature",
]


class ShapeError(ValueError):
    """Raised when tensor or matrix dimensions are inconsistent."""


def as_tensor(x) -> np.ndarray:
    """Return ``x`` as a C-contiguous float64 array with at least one mode."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 0:
        raise ShapeError("tensor must have at least one mode")
    if 0 in arr.shape:
        raise ShapeError(f"mode dimensions must be >= 1, got {arr.shape}")
    return arr


def _axis(ndim: int, m: int) -> int:
    if not -ndim <= m < ndim:
        raise ShapeError(f"mode {m} out of range for order-{ndim} tensor")
    return m % ndim


def unfold(x: np.ndarray, m: int) -> np.ndarray:
    """Mode-``m`` matricization.

    Row ``i`` holds every entry with index ``i`` on mode ``m``; the remaining
    modes are laid out row-major in their original order.
    """
    x = np.asarray(x, dtype=np.float64)
    m = _axis(x.ndim, m)
    return np.ascontiguousarray(np.moveaxis(x, m, 0)).reshape(x.shape[m], -1)


def fold(mat: np.ndarray, shape: Sequence[int], m: int) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    mat = np.asarray(mat, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    m = _axis(len(shape), m)
    rest = shape[:m] + shape[m + 1:]
    if mat.ndim != 2 or mat.shape[0] != shape[m] or mat.shape[1] != int(np.prod(rest)):
        raise ShapeError(
            f"cannot fold matrix of shape {mat.shape} into {shape} along mode {m}"
        )
    return np.ascontiguousarray(np.moveaxis(mat.reshape((shape[m],) + rest), 0, m))


def mode_product(x: np.ndarray, u: np.ndarray, m: int) -> np.ndarray:
    """Mode-``m`` product ``x x_m u``; ``u`` maps ``x.shape[m]`` to ``u.shape[1]``."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    m = _axis(x.ndim, m)
    if u.ndim != 2 or u.shape[0] != x.shape[m]:
        raise ShapeError(
            f"mode {m}: matrix of shape {u.shape} does not match dimension {x.shape[m]}"
        )
    new_shape = x.shape[:m] + (u.shape[1],) + x.shape[m + 1:]
    return fold(u.T @ unfold(x, m), new_shape, m)


def multi_mode_product(x: np.ndarray, factors) -> np.ndarray:
    """Apply ``x prod_m x_m U_m`` for a list of ``(mode, matrix)`` pairs."""
    x = np.asarray(x, dtype=np.float64)
    factors = list(factors)
    modes = [_axis(x.ndim, m) for m, _ in factors]
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate modes in multi-mode product: {modes}")
    for m, u in zip(modes, (u for _, u in factors)):
        x = mode_product(x, u, m)
    return x


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with block ``(i, j)`` equal to ``a[i, j] * b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.kron(a, b)


def vec(x: np.ndarray) -> np.ndarray:
    """Vectorize with the first index varying fastest.

    Under this convention ``vec(x prod_m x_m A_m)`` equals
    ``(A_M^T kron ... kron A_1^T) @ vec(x)``, which is the order in which flat
    Kronecker graphs are assembled.
    """
    return np.asarray(x, dtype=np.float64).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(v, dtype=np.float64).reshape(tuple(shape), order="F"))


def hosvd(x: np.ndarray, ranks: Sequence[int]):
    """Truncated higher-order SVD.

    Returns ``(core, factors)`` where each factor ``U_m`` has shape
    ``(ranks[m], x.shape[m])`` with orthonormal rows, so that
    ``core = x prod_m x_m U_m^T`` and ``x ~= core prod_m x_m U_m``.
    """
    x = as_tensor(x)
    ranks = [int(r) for r in ranks]
    if len(ranks) != x.ndim:
        raise ShapeError(f"need {x.ndim} ranks, got {len(ranks)}")
    factors = []
    for m, r in enumerate(ranks):
        if not 1 <= r <= x.shape[m]:
            raise ValueError(f"rank {r} invalid for mode {m} of size {x.shape[m]}")
        left, _, _ = np.linalg.svd(unfold(x, m), full_matrices=False)
        factors.append(np.ascontiguousarray(left[:, :r].T))
    core = multi_mode_product(x, [(m, u.T) for m, u in enumerate(factors)])
    return core, factors


def frobenius_norm(x) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(x, dtype=np.float64)))))


def concat_feature(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Concatenate along the last mode; all other modes must agree."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} on the last mode")
    return np.concatenate([a, b], axis=-1)
