"""Per-mode adjacency matrices of a tensor graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, kronecker, unfold

logger = logging.getLogger(__name__)

__all__ = [
    "GraphValidationError",
    "ModeNetwork",
    "SpectralOracle",
    "symmetric_normalize",
    "laplacian",
    "pearson_adjacency",
    "mode_pearson_networks",
    "flatten_kronecker",
    "chebyshev_matrix_poly",
    "spectral_oracle",
]

_SYM_TOL = 1e-12


class GraphValidationError(ValueError):
    pass


def _check_adjacency(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphValidationError(f"adjacency must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise GraphValidationError("adjacency has non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > _SYM_TOL:
        raise GraphValidationError("adjacency is not symmetric")
    if np.any(a < 0):
        raise GraphValidationError("adjacency has negative entries")
    return a


def symmetric_normalize(a) -> np.ndarray:
    """``D^{-1/2} A D^{-1/2}``; isolated nodes get zero rows and columns."""
    a = _check_adjacency(a)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def laplacian(a) -> np.ndarray:
    """Normalized graph Laplacian ``I - D^{-1/2} A D^{-1/2}``."""
    norm = symmetric_normalize(a)
    return np.eye(norm.shape[0]) - norm


def pearson_adjacency(series) -> np.ndarray:
    """Edge weights ``(r_ij + 1) / 2`` from Pearson correlations of the rows.

    A row with zero variance is treated as uncorrelated with every other row
    (weight 0.5).  The diagonal is always 1.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ShapeError("pearson_adjacency needs an (n, T) matrix with T >= 2")
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered * centered, axis=1))
    constant = norms == 0
    if np.any(constant):
        logger.warning(
            "pearson_adjacency: %d constant series, using r = 0 for them",
            int(constant.sum()),
        )
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe[:, None]
    r = np.clip(unit @ unit.T, -1.0, 1.0)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    a = 0.5 * (r + 1.0)
    a = 0.5 * (a + a.T)
    np.fill_diagonal(a, 1.0)
    return a


@dataclass(frozen=True, eq=False)
class ModeNetwork:
    """Adjacency ``raw`` of one mode together with its normalized form."""

    raw: np.ndarray
    normalized: np.ndarray = field(repr=False)
    is_identity: bool

    @classmethod
    def from_adjacency(cls, a) -> "ModeNetwork":
        a = _check_adjacency(a)
        a = a.copy()
        a.setflags(write=False)
        norm = symmetric_normalize(a)
        norm.setflags(write=False)
        is_identity = bool(np.array_equal(a, np.eye(a.shape[0])))
        return cls(raw=a, normalized=norm, is_identity=is_identity)

    @classmethod
    def identity(cls, n: int) -> "ModeNetwork":
        return cls.from_adjacency(np.eye(int(n)))

    @property
    def size(self) -> int:
        return self.raw.shape[0]


def mode_pearson_networks(values: np.ndarray, n_modes: int | None = None) -> list[ModeNetwork]:
    """Pearson networks for each node mode of a series ``(N_1, ..., N_M, T)``.

    Node ``i`` of mode ``m`` is described by the mode-``m`` fiber slice, i.e.
    row ``i`` of the mode-``m`` unfolding (all other modes and time).
    """
    values = np.asarray(values, dtype=np.float64)
    n_modes = values.ndim - 1 if n_modes is None else n_modes
    return [
        ModeNetwork.from_adjacency(pearson_adjacency(unfold(values, m)))
        for m in range(n_modes)
    ]


def flatten_kronecker(nets) -> np.ndarray:
    """Flat graph ``A_M kron ... kron A_1`` from per-mode networks.

    Accepts :class:`ModeNetwork` objects (their raw adjacency is used) or
    plain matrices.  Node order matches :func:`net3.tensor.vec`.
    """
    mats = [n.raw if isinstance(n, ModeNetwork) else np.asarray(n, dtype=np.float64) for n in nets]
    if not mats:
        raise ValueError("flatten_kronecker needs at least one network")
    out = mats[0]
    for a in mats[1:]:
        out = kronecker(a, out)
    return out


def chebyshev_matrix_poly(l_tilde, p: int) -> np.ndarray:
    """Matrix Chebyshev polynomial ``T_p(L)`` via the three-term recurrence."""
    l_tilde = np.asarray(l_tilde, dtype=np.float64)
    if l_tilde.ndim != 2 or l_tilde.shape[0] != l_tilde.shape[1]:
        raise ShapeError("chebyshev_matrix_poly needs a square matrix")
    if p < 0:
        raise ValueError("polynomial order must be >= 0")
    prev, cur = np.eye(l_tilde.shape[0]), l_tilde.copy()
    if p == 0:
        return prev
    for _ in range(p - 1):
        prev, cur = cur, 2.0 * l_tilde @ cur - prev
    return cur


@dataclass(frozen=True, eq=False)
class SpectralOracle:
    eigvecs: np.ndarray
    eigvals: np.ndarray
    lambda_max: float

    def scaled_eigvals(self, lambda_max: float | None = None) -> np.ndarray:
        lam = self.lambda_max if lambda_max is None else lambda_max
        return 2.0 * self.eigvals / lam - 1.0

    def apply(self, fn, values: np.ndarray | None = None) -> np.ndarray:
        """``Phi diag(fn(values)) Phi^T``; defaults to the raw eigenvalues."""
        vals = self.eigvals if values is None else values
        return (self.eigvecs * fn(vals)) @ self.eigvecs.T


def spectral_oracle(sym) -> SpectralOracle:
    """Eigendecomposition of a symmetric matrix such as a graph Laplacian."""
    sym = np.asarray(sym, dtype=np.float64)
    if np.max(np.abs(sym - sym.T), initial=0.0) > 1e-10:
        raise GraphValidationError("spectral oracle needs a symmetric matrix")
    vals, vecs = np.linalg.eigh(sym)
    return SpectralOracle(eigvecs=vecs, eigvals=vals, lambda_max=float(vals.max()))
