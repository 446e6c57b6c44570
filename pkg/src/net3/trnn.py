"""Tensor recurrent cell on Tucker cores, plus per-series LSTM baselines.

Factor matrices ``U_m`` have shape ``(N'_m, N_m)`` with (approximately)
orthonormal rows.  Reduction applies ``U_m^T`` on every node mode, and
reconstruction applies ``U_m``.
"""

from __future__ import annotations

import logging
import math
import string
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .params import tree_flatten
from .tensor import ShapeError

logger = logging.getLogger(__name__)

__all__ = [
    "GATES",
    "GateParams",
    "TlstmParams",
    "TlstmState",
    "LstmParams",
    "core_dims",
    "orthonormal_init",
    "orthonormality_residual",
    "reduce",
    "reconstruct",
    "tll_forward",
    "init_tlstm",
    "tlstm_step",
    "zero_state",
    "init_lstm",
    "lstm_step",
    "count_params_tlstm",
    "count_params_mlstm",
    "count_params",
    "rho_upper_bound",
]

GATES = ("f", "i", "o", "c")


def core_dims(rho: float, dims, warn: bool = True) -> list[int]:
    """Core sizes ``ceil(rho * N_m)`` clamped to ``[1, N_m]``."""
    if not rho > 0:
        raise ValueError(f"interaction degree must be positive, got {rho}")
    if warn and rho > 1:
        logger.warning("interaction degree %.3g > 1: factor matrices are over-complete", rho)
    # the tolerance keeps products such as 0.2 * 410 from rounding up
    return [min(max(math.ceil(rho * n - 1e-9), 1), int(n)) for n in dims]


def orthonormal_init(n_prime: int, n: int, seed) -> np.ndarray:
    """``(n_prime, n)`` matrix with orthonormal rows from a seeded Gaussian."""
    if n_prime > n:
        raise ValueError(f"cannot build {n_prime} orthonormal rows in dimension {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n_prime)))
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return np.ascontiguousarray(q.T)


def orthonormality_residual(factors) -> list[float]:
    out = []
    for u in factors:
        u = ad.value_of(u)
        out.append(float(np.linalg.norm(u @ u.T - np.eye(u.shape[0]))))
    return out


def _mode_axes(x, n_modes: int) -> list[int]:
    first = x.ndim - 1 - n_modes
    if first < 0:
        raise ShapeError(f"order-{x.ndim} tensor cannot hold {n_modes} modes plus features")
    return list(range(first, first + n_modes))


def reduce(h, factors):
    """Core tensor ``H prod_m x_m U_m^T``; the feature mode is untouched."""
    for ax, u in zip(_mode_axes(h, len(factors)), factors):
        if h.shape[ax] != u.shape[1]:
            raise ShapeError(f"axis {ax} has size {h.shape[ax]}, factor expects {u.shape[1]}")
        h = ad.mode_product(h, ad.transpose(u), ax)
    return h


def reconstruct(y, factors):
    """Expand a core tensor back with ``Y prod_m x_m U_m``."""
    for ax, u in zip(_mode_axes(y, len(factors)), factors):
        if y.shape[ax] != u.shape[0]:
            raise ShapeError(f"axis {ax} has size {y.shape[ax]}, factor expects {u.shape[0]}")
        y = ad.mode_product(y, u, ax)
    return y


def tll_forward(x, weights, bias=None):
    """Tensor linear layer: a matrix on every mode including the feature mode,
    then a bias broadcast over all node positions."""
    axes = _mode_axes(x, len(weights) - 1) + [x.ndim - 1]
    for ax, w in zip(axes, weights):
        x = ad.mode_product(x, w, ax)
    if bias is not None:
        x = ad.add(x, bias)
    return x


@dataclass
class GateParams:
    z_modes: list
    z_feature: np.ndarray
    y_modes: list
    y_feature: np.ndarray
    bias: np.ndarray


@dataclass
class TlstmParams:
    gates: dict
    output_activation: str = "sigmoid"


@dataclass
class TlstmState:
    y: object
    c: object


def _uniform(rng, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def init_tlstm(core, d_in, d_out, rng, output_activation="sigmoid") -> TlstmParams:
    gates = {}
    for g in GATES:
        gates[g] = GateParams(
            z_modes=[_uniform(rng, n, n) for n in core],
            z_feature=_uniform(rng, d_in, d_out),
            y_modes=[_orthogonal(rng, n) for n in core],
            y_feature=0.1 * _orthogonal(rng, d_out),
            bias=np.full(d_out, 1.0 if g == "f" else 0.0),
        )
    return TlstmParams(gates=gates, output_activation=output_activation)


def zero_state(shape) -> TlstmState:
    return TlstmState(y=np.zeros(shape), c=np.zeros(shape))


def _cell_update(pre, prev: TlstmState, output_activation: str) -> TlstmState:
    f = ad.sigmoid(pre["f"])
    i = ad.sigmoid(pre["i"])
    o = ad.sigmoid(pre["o"])
    c_tilde = ad.tanh(pre["c"])
    c = ad.add(ad.mul(f, prev.c), ad.mul(i, c_tilde))
    y = ad.mul(o, ad.activation(output_activation)(c))
    return TlstmState(y=y, c=c)


def tlstm_step(z, prev: TlstmState, params: TlstmParams) -> TlstmState:
    """One step of the tensor LSTM on a core-shaped input."""
    if tuple(prev.y.shape) != tuple(prev.c.shape):
        raise ShapeError("hidden and cell state shapes differ")
    if tuple(z.shape[:-1]) != tuple(prev.y.shape[:-1]):
        raise ShapeError(f"input {tuple(z.shape)} does not match state {tuple(prev.y.shape)}")
    pre = {}
    for g in GATES:
        gp = params.gates[g]
        pre[g] = ad.add(
            tll_forward(z, gp.z_modes + [gp.z_feature], gp.bias),
            tll_forward(prev.y, gp.y_modes + [gp.y_feature]),
        )
    return _cell_update(pre, prev, params.output_activation)


@dataclass
class LstmParams:
    """Per-gate LSTM weights.

    With ``per_node`` the arrays carry the node modes in front, giving one
    independent LSTM per series; otherwise a single LSTM is shared.
    """

    w_x: dict
    w_h: dict
    b: dict
    per_node: bool = False
    output_activation: str = "sigmoid"


def init_lstm(node_shape, d_in, d_out, rng, per_node=False, output_activation="sigmoid") -> LstmParams:
    lead = tuple(node_shape) if per_node else ()
    w_x, w_h, b = {}, {}, {}
    bx = math.sqrt(6.0 / (d_in + d_out))
    for g in GATES:
        w_x[g] = rng.uniform(-bx, bx, size=lead + (d_in, d_out))
        w_h[g] = 0.1 * rng.uniform(-1.0, 1.0, size=lead + (d_out, d_out))
        b[g] = np.full(lead + (d_out,), 1.0 if g == "f" else 0.0)
    return LstmParams(w_x=w_x, w_h=w_h, b=b, per_node=per_node, output_activation=output_activation)


def _per_node_linear(x, w):
    n_node = w.ndim - 2
    batch = x.ndim - 1 - n_node
    letters = string.ascii_lowercase
    bl, nl = letters[:batch], letters[batch:batch + n_node]
    i, o = "y", "z"
    return ad.einsum(f"{bl}{nl}{i},{nl}{i}{o}->{bl}{nl}{o}", x, w)


def lstm_step(x, prev: TlstmState, params: LstmParams) -> TlstmState:
    """LSTM applied independently at every node position."""
    pre = {}
    for g in GATES:
        if params.per_node:
            a = _per_node_linear(x, params.w_x[g])
            h = _per_node_linear(prev.y, params.w_h[g])
        else:
            a = ad.mode_product(x, params.w_x[g], -1)
            h = ad.mode_product(prev.y, params.w_h[g], -1)
        pre[g] = ad.add(ad.add(a, h), params.b[g])
    return _cell_update(pre, prev, params.output_activation)


def count_params_tlstm(dims, rho: float, d_in: int, d_out: int) -> int:
    """Cell weights plus Tucker factors: ``4d'(d+d'+1) + 8 sum N'^2 + sum N' N``."""
    core = core_dims(rho, dims, warn=False)
    return (
        4 * d_out * (d_in + d_out + 1)
        + 8 * sum(n * n for n in core)
        + sum(c * n for c, n in zip(core, dims))
    )


def count_params_mlstm(dims, d_in: int, d_out: int) -> int:
    """One LSTM per series: ``4d'(d+d'+1) prod N``."""
    return 4 * d_out * (d_in + d_out + 1) * math.prod(int(n) for n in dims)


def count_params(tree) -> int:
    """Number of scalars held in the arrays of a parameter structure."""
    return int(sum(np.size(v) for v in tree_flatten(tree).values()))


def rho_upper_bound(dims, d_in: int, d_out: int) -> float:
    """Largest interaction degree for which the tensor LSTM is guaranteed to
    use fewer parameters than one LSTM per series."""
    dims = [int(n) for n in dims]
    if not dims:
        raise ValueError("dims must be nonempty")
    ratio = (math.prod(dims) - 1) * d_out * (d_in + d_out + 1) / (2 * sum(n * n for n in dims))
    return math.sqrt(ratio + 1.0 / 256.0) - 1.0 / 16.0
