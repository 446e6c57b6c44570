"""Windowing, gradients, Adam and the training loop."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import GradientTape
from .config import TrainConfig
from .model import Net3Params, forward, init_params, loss, loss_terms
from .params import tree_flatten, tree_unflatten

logger = logging.getLogger(__name__)

__all__ = [
    "WindowSet",
    "AdamState",
    "make_windows",
    "gather_windows",
    "value_and_grad",
    "backward",
    "adam_step",
    "fit",
    "rmse",
    "one_step_predictions",
    "FitResult",
    "objective_terms",
]


@dataclass(frozen=True)
class WindowSet:
    """Time indices of each window: ``history`` is ``(n, omega)`` and
    ``targets`` is ``(n, tau)``."""

    history: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return self.history.shape[0]


def make_windows(T: int, omega: int, tau: int = 1, stride: int = 1, start: int = 0) -> WindowSet:
    """Sliding windows over ``[start, T)``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    span = T - start
    if span < omega + tau:
        raise ValueError(f"no windows: {span} steps cannot hold omega={omega} plus tau={tau}")
    n = (span - omega - tau) // stride + 1
    first = start + stride * np.arange(n)
    history = first[:, None] + np.arange(omega)[None, :]
    targets = first[:, None] + omega + np.arange(tau)[None, :]
    return WindowSet(history=history, targets=targets)


def gather_windows(values, mask, windows: WindowSet):
    """Stack window inputs ``(n, omega, N...)``, targets and target masks.

    ``values`` and ``mask`` are ``(N..., T)``; unobserved inputs are zeroed.
    """
    x = np.where(mask, values, 0.0)
    xt = np.moveaxis(x, -1, 0)
    mt = np.moveaxis(np.asarray(mask, dtype=bool), -1, 0)
    inputs = xt[windows.history]
    targets = xt[windows.targets[:, 0]]
    target_mask = mt[windows.targets[:, 0]]
    return inputs, targets, target_mask


def value_and_grad(params: Net3Params, nets, inputs, targets, mask, mu1, mu2):
    """Objective value and gradient for every array in ``params``.

    Gradients come back as a dict keyed like :func:`tree_flatten`.
    """
    tape = GradientTape()
    flat = tree_flatten(params)
    watched = {k: tape.watch(v) for k, v in flat.items()}
    p = tree_unflatten(params, watched)
    trace = forward(inputs, nets, p)
    total = loss(trace, targets, p, mu1, mu2, mask)
    grads = backward(tape, total, list(watched.values()))
    return float(total.value), dict(zip(watched, grads))


def backward(tape: GradientTape, target, sources):
    """Replay ``tape`` in reverse; sources off the path get zero gradients."""
    return tape.gradient(target, sources)


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One bias-corrected Adam update.  ``state`` is advanced in place."""
    if params.keys() != grads.keys():
        raise ValueError("parameter and gradient names differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    out = {}
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, parameter {p.shape}")
        m = b1 * state.m.get(k, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(k, 0.0) + (1.0 - b2) * g * g
        state.m[k], state.v[k] = m, v
        out[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


def _clip(grads: dict, max_norm: float) -> dict:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


@dataclass
class FitResult:
    params: Net3Params
    history: list

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.history:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def fit(values, mask, nets, config: TrainConfig, windows: WindowSet | None = None,
        validate=None, params: Net3Params | None = None) -> FitResult:
    """Train on normalized ``values`` ``(N..., T)`` with observation ``mask``.

    Windows are shuffled every epoch with a generator seeded from
    ``config.seed``.  ``validate(params)`` may return a metric that is logged
    as ``val_rmse`` after each epoch.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.ones(values.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if windows is None:
        windows = make_windows(values.shape[-1], config.omega, config.tau, config.stride)
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    init_rng = np.random.default_rng(seeds[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    if params is None:
        params = init_params(config, nets, init_rng)
    inputs, targets, target_mask = gather_windows(values, mask, windows)
    n = len(windows)
    batch_size = config.batch_size or (n if n <= 1000 else 32)
    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    flat = tree_flatten(params)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            value, grads = value_and_grad(
                params, nets, inputs[idx], targets[idx], target_mask[idx], config.mu1, config.mu2
            )
            if config.clip > 0:
                grads = _clip(grads, config.clip)
            flat = adam_step(flat, grads, state)
            params = tree_unflatten(params, flat)
            total += value * len(idx)
        record = {"epoch": epoch, "train_loss": total / n}
        if validate is not None:
            record["val_rmse"] = float(validate(params))
        history.append(record)
        logger.debug("epoch %d loss %.6g", epoch, record["train_loss"])
    return FitResult(params=params, history=history)


def rmse(pred, truth, mask=None) -> float:
    """Root mean squared error over entries where ``mask`` is true."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    sq = (pred - truth) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("rmse undefined: mask selects no entries")
        sq = sq[mask]
    elif sq.size == 0:
        raise ValueError("rmse undefined for empty input")
    return float(np.sqrt(np.mean(sq)))


def one_step_predictions(values, mask, nets, params: Net3Params, times, omega: int, chunk: int = 256):
    """Predict snapshot ``t`` from the ``omega`` steps before it, for each
    ``t`` in ``times``.  Unobserved inputs and steps before time 0 are zero.

    Returns ``(len(times), N...)``.
    """
    x = np.moveaxis(np.where(mask, values, 0.0), -1, 0)
    pad = np.concatenate([np.zeros((omega,) + x.shape[1:]), x])
    times = np.asarray(times, dtype=int)
    out = []
    for lo in range(0, len(times), chunk):
        t = times[lo : lo + chunk]
        idx = t[:, None] + np.arange(omega)[None, :]  # padded index of t - omega + k
        out.append(forward(pad[idx], nets, params).prediction)
    return np.concatenate(out) if out else np.zeros((0,) + x.shape[1:])


def objective_terms(params, nets, values, mask, windows) -> dict:
    """Unweighted loss terms over a whole window set."""
    inputs, targets, target_mask = gather_windows(values, mask, windows)
    trace = forward(inputs, nets, params)
    terms = loss_terms(trace, targets, params, target_mask)
    return {k: float(v) for k, v in terms.items()}
