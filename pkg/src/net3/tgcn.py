"""Tensor graph convolution and its single-graph baselines.

Inputs are laid out as ``(*batch, N_1, ..., N_M, d)``: any leading axes are
treated as a batch, the last axis carries channels and the ``M`` axes before
it are the node modes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .graph import flatten_kronecker, symmetric_normalize
from .tensor import ShapeError

__all__ = [
    "TgclParams",
    "ItgcnParams",
    "FlatGcnParams",
    "network_modes",
    "indicator_vectors",
    "init_tgcl",
    "init_itgcn",
    "init_flat_gcn",
    "tgcl_forward",
    "itgcn_forward",
    "gcn_flat_forward",
    "tensor_to_flat",
    "flat_to_tensor",
    "flat_graph",
    "tgcl_flops",
    "count_params_tgcl",
]


@dataclass
class TgclParams:
    """``thetas`` maps each indicator vector over the non-identity modes to a
    ``(d, d')`` matrix; the all-zeros vector holds the self term."""

    thetas: dict
    activation: str = "relu"


@dataclass
class ItgcnParams:
    mode_thetas: list
    theta0: np.ndarray
    activation: str = "relu"


@dataclass
class FlatGcnParams:
    theta0: np.ndarray
    theta1: np.ndarray
    activation: str = "relu"


def network_modes(nets) -> list[int]:
    """Indices of the modes whose network is not the identity."""
    return [m for m, n in enumerate(nets) if not n.is_identity]


def indicator_vectors(k: int) -> list[tuple[int, ...]]:
    """All ``2**k`` indicator vectors, all-zeros first."""
    return list(itertools.product((0, 1), repeat=k))


def _glorot(rng, fan_in, fan_out, shape=None):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


def init_tgcl(nets, d_in, d_out, rng, activation="relu") -> TgclParams:
    k = len(network_modes(nets))
    thetas = {p: _glorot(rng, d_in, d_out) for p in indicator_vectors(k)}
    return TgclParams(thetas=thetas, activation=activation)


def init_itgcn(nets, d_in, d_out, rng, activation="relu") -> ItgcnParams:
    mode_thetas = [_glorot(rng, d_in, d_out) for _ in nets]
    return ItgcnParams(mode_thetas=mode_thetas, theta0=_glorot(rng, d_in, d_out), activation=activation)


def init_flat_gcn(d_in, d_out, rng, activation="relu") -> FlatGcnParams:
    return FlatGcnParams(
        theta0=_glorot(rng, d_in, d_out), theta1=_glorot(rng, d_in, d_out), activation=activation
    )


def _node_axes(x, nets) -> list[int]:
    n_modes = len(nets)
    if x.ndim < n_modes + 1:
        raise ShapeError(f"input of order {x.ndim} cannot hold {n_modes} node modes plus channels")
    first = x.ndim - 1 - n_modes
    axes = list(range(first, first + n_modes))
    for ax, net in zip(axes, nets):
        if x.shape[ax] != net.size:
            raise ShapeError(
                f"mode {ax - first} has size {x.shape[ax]} but its network has {net.size} nodes"
            )
    return axes


def _check_channels(x, theta):
    if ad.value_of(theta).shape[0] != x.shape[-1]:
        raise ShapeError(
            f"channel mismatch: input has {x.shape[-1]} channels, "
            f"parameter expects {ad.value_of(theta).shape[0]}"
        )


def tgcl_forward(x, nets, params: TgclParams):
    """One tensor graph convolution layer.

    Sums ``x prod_{p_m=1} x_m A~_m x_feat Theta_p`` over every nonzero
    indicator ``p`` and adds the self term ``x x_feat Theta_0`` before the
    activation.  Modes with an identity network carry no indicator bit.
    """
    axes = _node_axes(x, nets)
    active = network_modes(nets)
    expected = set(indicator_vectors(len(active)))
    if set(params.thetas) != expected:
        raise ValueError(
            f"indicator set mismatch: layer has {len(params.thetas)} matrices, "
            f"{len(active)} networked modes need {len(expected)}"
        )
    zero = (0,) * len(active)
    _check_channels(x, params.thetas[zero])
    total = None
    for p in indicator_vectors(len(active)):
        if p == zero:
            continue
        y = x
        for bit, m in zip(p, active):
            if bit:
                y = ad.mode_product(y, nets[m].normalized, axes[m])
        term = ad.mode_product(y, params.thetas[p], -1)
        total = term if total is None else ad.add(total, term)
    self_term = ad.mode_product(x, params.thetas[zero], -1)
    total = self_term if total is None else ad.add(total, self_term)
    return ad.activation(params.activation)(total)


def itgcn_forward(x, nets, params: ItgcnParams):
    """Independent per-mode graph convolutions without cross-mode terms."""
    axes = _node_axes(x, nets)
    if len(params.mode_thetas) != len(nets):
        raise ValueError(f"expected {len(nets)} mode matrices, got {len(params.mode_thetas)}")
    _check_channels(x, params.theta0)
    total = None
    for ax, net, theta in zip(axes, nets, params.mode_thetas):
        term = ad.mode_product(ad.mode_product(x, net.normalized, ax), theta, -1)
        total = term if total is None else ad.add(total, term)
    total = ad.add(total, ad.mode_product(x, params.theta0, -1))
    return ad.activation(params.activation)(total)


def gcn_flat_forward(x_flat, a_flat, params: FlatGcnParams):
    """Single-graph layer ``act(A X Theta_1 + X Theta_0)`` on ``(*batch, P, d)``.

    ``a_flat`` must already be normalized.
    """
    a_flat = np.asarray(a_flat, dtype=np.float64)
    if a_flat.ndim != 2 or x_flat.ndim < 2 or a_flat.shape[0] != x_flat.shape[-2]:
        raise ShapeError(
            f"flat adjacency {a_flat.shape} does not match {x_flat.shape[-2]} nodes"
        )
    _check_channels(x_flat, params.theta0)
    prop = ad.mode_product(ad.mode_product(x_flat, a_flat, -2), params.theta1, -1)
    total = ad.add(prop, ad.mode_product(x_flat, params.theta0, -1))
    return ad.activation(params.activation)(total)


def tensor_to_flat(x, n_modes: int):
    """Merge the node modes of ``(*batch, N_1..N_M, d)`` into one axis,
    first mode fastest (the node order of a flattened Kronecker graph)."""
    first = x.ndim - 1 - n_modes
    order = list(range(first)) + list(range(first + n_modes - 1, first - 1, -1)) + [x.ndim - 1]
    y = ad.transpose(x, order)
    return ad.reshape(y, tuple(x.shape[:first]) + (-1, x.shape[-1]))


def flat_to_tensor(x_flat, node_shape):
    node_shape = tuple(node_shape)
    lead = tuple(x_flat.shape[:-2])
    y = ad.reshape(x_flat, lead + node_shape[::-1] + (x_flat.shape[-1],))
    first = len(lead)
    n = len(node_shape)
    order = list(range(first)) + list(range(first + n - 1, first - 1, -1)) + [first + n]
    return ad.transpose(y, order)


def flat_graph(nets) -> np.ndarray:
    """Normalized Kronecker combination of the raw mode adjacencies."""
    return symmetric_normalize(flatten_kronecker(nets))


def tgcl_flops(dims, k: int, network_dims=None) -> int:
    """Operation-count estimate ``2^(K-1) prod(N) (2 + sum of networked N)``.

    ``network_dims`` defaults to the first ``k`` entries of ``dims``.
    """
    dims = [int(n) for n in dims]
    if not 0 <= k <= len(dims):
        raise ValueError(f"network count {k} must lie in [0, {len(dims)}]")
    if k == 0:
        return math.prod(dims)
    network_dims = dims[:k] if network_dims is None else list(network_dims)
    return 2 ** (k - 1) * math.prod(dims) * (2 + sum(network_dims))


def count_params_tgcl(k: int, d_in: int, d_out: int) -> int:
    return 2**k * d_in * d_out
