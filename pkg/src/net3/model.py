"""End-to-end network: graph layer, Tucker-reduced recurrent cell, output layer.

At each step ``t`` of a window the snapshot ``S_t`` (with a channel axis of
size one appended) passes through the graph layer to give ``H_t``.  ``H_t`` is
reduced to a core ``Z_t``, the recurrent cell updates its state ``Y_t``, the
state is expanded back to ``R_t``, and a linear layer on ``[H_t, R_t]``
predicts ``S_{t+1}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import VARIANTS, TrainConfig
from .params import tree_flatten, tree_unflatten
from .tensor import ShapeError
from .tgcn import (
    FlatGcnParams,
    ItgcnParams,
    TgclParams,
    flat_graph,
    flat_to_tensor,
    gcn_flat_forward,
    init_flat_gcn,
    init_itgcn,
    init_tgcl,
    itgcn_forward,
    tensor_to_flat,
    tgcl_forward,
)
from .trnn import (
    LstmParams,
    TlstmParams,
    core_dims,
    init_lstm,
    init_tlstm,
    lstm_step,
    orthonormal_init,
    reconstruct,
    reduce,
    tlstm_step,
    zero_state,
)

__all__ = [
    "Net3Params",
    "ForwardTrace",
    "init_params",
    "forward",
    "loss",
    "loss_terms",
    "predict_multi_step",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]


@dataclass
class Net3Params:
    graph: object
    factors: list
    cell: object
    mlp_w: np.ndarray
    mlp_b: np.ndarray


@dataclass
class ForwardTrace:
    h: list = field(default_factory=list)
    z: list = field(default_factory=list)
    y: list = field(default_factory=list)
    c: list = field(default_factory=list)
    r: list = field(default_factory=list)
    s_hat: list = field(default_factory=list)
    batched: bool = True

    @property
    def prediction(self):
        """Predicted snapshot following the last input step."""
        return self.s_hat[-1]


def init_params(config: TrainConfig, nets, rng=None) -> Net3Params:
    """Random parameters for ``config.variant`` on the given mode networks."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    graph_kind, cell_kind = VARIANTS[config.variant]
    dims = [n.size for n in nets]
    d, dp = config.hidden, config.hidden_rnn
    if graph_kind == "tgcn":
        graph = init_tgcl(nets, 1, d, rng, config.activation)
    elif graph_kind == "itgcn":
        graph = init_itgcn(nets, 1, d, rng, config.activation)
    else:
        graph = init_flat_gcn(1, d, rng, config.activation)
    if cell_kind == "tlstm":
        core = core_dims(config.rho, dims)
        factors = [orthonormal_init(c, n, rng) for c, n in zip(core, dims)]
        cell = init_tlstm(core, d, dp, rng, config.cell_output)
    else:
        factors = []
        cell = init_lstm(dims, d, dp, rng, per_node=cell_kind == "mlstm", output_activation=config.cell_output)
    bound = np.sqrt(6.0 / (d + dp + 1))
    mlp_w = rng.uniform(-bound, bound, size=(d + dp, 1))
    return Net3Params(graph=graph, factors=factors, cell=cell, mlp_w=mlp_w, mlp_b=np.zeros(1))


def _graph_layer(s, nets, params: Net3Params, a_flat):
    g = params.graph
    if isinstance(g, TgclParams):
        return tgcl_forward(s, nets, g)
    if isinstance(g, ItgcnParams):
        return itgcn_forward(s, nets, g)
    if isinstance(g, FlatGcnParams):
        out = gcn_flat_forward(tensor_to_flat(s, len(nets)), a_flat, g)
        return flat_to_tensor(out, [n.size for n in nets])
    raise TypeError(f"unsupported graph parameters {type(g).__name__}")


def forward(window, nets, params: Net3Params) -> ForwardTrace:
    """Run the model over a window of snapshots.

    ``window`` has shape ``(omega, N_1, ..., N_M)`` or, batched,
    ``(B, omega, N_1, ..., N_M)``.  Trace entries keep the batch axis when
    the input had one.
    """
    n_modes = len(nets)
    window_v = ad.value_of(window)
    if window_v.ndim == n_modes + 1:
        trace = forward(window_v[None], nets, params)
        return _unbatch(trace)
    if window_v.ndim != n_modes + 2:
        raise ShapeError(f"window of order {window_v.ndim} does not match {n_modes} node modes")
    node_shape = tuple(n.size for n in nets)
    if window_v.shape[2:] != node_shape:
        raise ShapeError(f"snapshot shape {window_v.shape[2:]} does not match networks {node_shape}")
    if window_v.shape[1] < 1:
        raise ShapeError("window must contain at least one step")

    a_flat = flat_graph(nets) if isinstance(params.graph, FlatGcnParams) else None
    tucker = isinstance(params.cell, TlstmParams)
    batch = window_v.shape[0]
    d_out = ad.value_of(params.mlp_w).shape[0] - _graph_width(params)
    if tucker:
        state_shape = (batch,) + tuple(ad.value_of(u).shape[0] for u in params.factors) + (d_out,)
    else:
        state_shape = (batch,) + node_shape + (d_out,)
    state = zero_state(state_shape)

    trace = ForwardTrace()
    for t in range(window_v.shape[1]):
        s = window_v[:, t][..., None]
        h = _graph_layer(s, nets, params, a_flat)
        if tucker:
            z = reduce(h, params.factors)
            state = tlstm_step(z, state, params.cell)
            r = reconstruct(state.y, params.factors)
        else:
            z = None
            state = lstm_step(h, state, params.cell)
            r = state.y
        out = ad.add(ad.mode_product(ad.concat([h, r], axis=-1), params.mlp_w, -1), params.mlp_b)
        s_hat = ad.reshape(out, out.shape[:-1])
        trace.h.append(h)
        trace.z.append(z)
        trace.y.append(state.y)
        trace.c.append(state.c)
        trace.r.append(r)
        trace.s_hat.append(s_hat)
    return trace


def _graph_width(params: Net3Params) -> int:
    g = params.graph
    if isinstance(g, TgclParams):
        theta = next(iter(g.thetas.values()))
    elif isinstance(g, ItgcnParams):
        theta = g.theta0
    else:
        theta = g.theta0
    return ad.value_of(theta).shape[1]


def _unbatch(trace: ForwardTrace) -> ForwardTrace:
    def strip(seq):
        return [None if v is None else (v[0] if not isinstance(v, ad.Var) else ad.take(v, 0)) for v in seq]

    parts = (strip(getattr(trace, f)) for f in ("h", "z", "y", "c", "r", "s_hat"))
    return ForwardTrace(*parts, batched=False)


def loss_terms(trace: ForwardTrace, targets, params: Net3Params, mask=None) -> dict:
    """Unweighted objective terms, averaged over the batch.

    ``prediction``: squared error of the final prediction on observed targets.
    ``tucker``: squared error of re-expanding each ``Z_t`` versus ``H_t``.
    ``orthonormality``: sum of ``||U U^T - I||_F^2`` over the factors.
    """
    pred = trace.prediction
    targets = np.asarray(targets, dtype=np.float64)
    if tuple(pred.shape) != targets.shape:
        raise ShapeError(f"targets {targets.shape} do not match predictions {tuple(pred.shape)}")
    batch = targets.shape[0] if trace.batched else 1
    diff = ad.sub(pred, targets)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != targets.shape:
            raise ShapeError("mask does not match targets")
        diff = ad.mul(diff, mask.astype(np.float64))
    scale = 1.0 / batch
    terms = {"prediction": ad.mul(ad.sum_squares(diff), scale)}
    tucker = 0.0
    for h, z in zip(trace.h, trace.z):
        if z is not None:
            tucker = ad.add(tucker, ad.sum_squares(ad.sub(h, reconstruct(z, params.factors))))
    terms["tucker"] = ad.mul(tucker, scale)
    ortho = 0.0
    for u in params.factors:
        n = ad.value_of(u).shape[0]
        ortho = ad.add(ortho, ad.sum_squares(ad.sub(ad.matmul(u, ad.transpose(u)), np.eye(n))))
    terms["orthonormality"] = ortho
    return terms


def loss(trace: ForwardTrace, targets, params: Net3Params, mu1: float, mu2: float, mask=None):
    """Training objective: prediction error plus weighted Tucker
    reconstruction error and factor orthonormality penalty."""
    t = loss_terms(trace, targets, params, mask)
    total = ad.add(t["prediction"], ad.mul(t["tucker"], mu1))
    return ad.add(total, ad.mul(t["orthonormality"], mu2))


def predict_multi_step(history, nets, params: Net3Params, horizon: int, omega: int | None = None):
    """Roll the one-step model forward ``horizon`` steps.

    Each prediction is appended to the history and the window (the last
    ``omega`` steps, or the whole history if ``omega`` is None) slides on.
    Returns an array ``(horizon, N_1, ..., N_M)``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    hist = np.asarray(history, dtype=np.float64)
    if hist.ndim != len(nets) + 1:
        raise ShapeError("history must have shape (steps, N_1, ..., N_M)")
    length = hist.shape[0] if omega is None else omega
    steps = list(hist)
    out = []
    for _ in range(horizon):
        window = np.stack(steps[-length:])
        pred = forward(window, nets, params).prediction
        out.append(pred)
        steps.append(pred)
    return np.stack(out)


MAGIC = b"NET3CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: Net3Params, config: TrainConfig, meta: dict | None = None) -> None:
    """Write a versioned binary checkpoint.

    Layout: magic, uint32 version, uint32 header length, UTF-8 JSON header
    (config echo, metadata, array names and shapes), then every array as
    little-endian float64 in header order.
    """
    arrays = tree_flatten(params)
    header = {
        "config": config.to_dict(),
        "meta": meta or {},
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path, nets):
    """Return ``(params, config, meta)``; shapes are checked against ``nets``."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if len(raw) < len(MAGIC) + 8:
        raise CheckpointError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<II", raw, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = len(MAGIC) + 8
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
        config = TrainConfig.from_dict(header["config"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from None
    offset = start + hlen
    values = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        if offset + 8 * count > len(raw):
            raise CheckpointError(f"{path}: payload for {entry['name']} is truncated")
        values[entry["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing or missing payload bytes")
    template = init_params(config, nets, np.random.default_rng(0))
    expected = {k: np.shape(v) for k, v in tree_flatten(template).items()}
    got = {k: v.shape for k, v in values.items()}
    if expected != got:
        raise CheckpointError("checkpoint parameters do not match the dataset's mode networks")
    return tree_unflatten(template, values), config, header["meta"]
