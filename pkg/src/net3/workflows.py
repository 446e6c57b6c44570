"""Future-prediction and missing-value-recovery experiments.

Both tasks normalize every series with statistics from its training entries,
train the one-step model on normalized data, and score RMSE on held-out
entries, in normalized units and in original units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .data import (
    NetTensorTimeSeries,
    NormStats,
    compute_stats,
    denormalize_values,
    normalize,
    split_future,
    split_recovery,
)
from .model import Net3Params, predict_multi_step
from .training import FitResult, fit, make_windows, one_step_predictions, rmse

__all__ = [
    "FutureTask",
    "RecoveryTask",
    "prepare_future",
    "prepare_recovery",
    "train_task",
    "evaluate_future",
    "evaluate_recovery",
    "future_rows",
    "recovery_rows",
]


@dataclass(frozen=True, eq=False)
class FutureTask:
    data: NetTensorTimeSeries  # normalized
    stats: NormStats
    boundary: int

    @property
    def train_mask(self):
        mask = self.data.mask.copy()
        mask[..., self.boundary:] = False
        return mask

    def windows(self, config: TrainConfig):
        return make_windows(self.boundary, config.omega, config.tau, config.stride)


@dataclass(frozen=True, eq=False)
class RecoveryTask:
    data: NetTensorTimeSeries  # normalized
    stats: NormStats
    test_mask: np.ndarray

    @property
    def train_mask(self):
        return self.data.mask & ~self.test_mask

    def windows(self, config: TrainConfig):
        return make_windows(self.data.T, config.omega, config.tau, config.stride)


def prepare_future(ds: NetTensorTimeSeries, fraction: float) -> FutureTask:
    boundary = split_future(ds, fraction)
    train = np.zeros(ds.values.shape, dtype=bool)
    train[..., :boundary] = True
    stats = compute_stats(ds, train)
    return FutureTask(data=normalize(ds, stats), stats=stats, boundary=boundary)


def prepare_recovery(ds: NetTensorTimeSeries, fraction: float, seed) -> RecoveryTask:
    test = split_recovery(ds, fraction, seed)
    stats = compute_stats(ds, ~test)
    return RecoveryTask(data=normalize(ds, stats), stats=stats, test_mask=test)


def train_task(task, config: TrainConfig, validate: bool = False) -> FitResult:
    data = task.data
    hook = None
    if validate:
        evaluate = evaluate_future if isinstance(task, FutureTask) else evaluate_recovery
        hook = lambda p: evaluate(task, p, config.omega)["rmse"]  # noqa: E731
    return fit(data.values, task.train_mask, data.networks, config, task.windows(config), validate=hook)


def _future_truth(task: FutureTask):
    v = task.data.values
    times = np.arange(task.boundary, task.data.T)
    truth = np.moveaxis(v[..., times], -1, 0)
    mask = np.moveaxis(task.data.mask[..., times], -1, 0)
    return times, truth, mask


def evaluate_future(task: FutureTask, params: Net3Params, omega: int, rollout: bool = True) -> dict:
    """One-step-ahead RMSE over the test region against the persistence
    forecast ``S_{t+1} = S_t``; optionally also a free-running rollout."""
    data = task.data
    times, truth, mask = _future_truth(task)
    pred = one_step_predictions(data.values, data.mask, data.networks, params, times, omega)
    prev = np.moveaxis(np.where(data.mask, data.values, 0.0)[..., times - 1], -1, 0)
    out = {
        "rmse": rmse(pred, truth, mask),
        "persistence_rmse": rmse(prev, truth, mask),
        "rmse_original": _rmse_original(pred, truth, mask, task.stats),
        "persistence_rmse_original": _rmse_original(prev, truth, mask, task.stats),
        "test_steps": int(len(times)),
    }
    if rollout:
        start = max(task.boundary - omega, 0)
        history = np.moveaxis(np.where(data.mask, data.values, 0.0)[..., start:task.boundary], -1, 0)
        roll = predict_multi_step(history, data.networks, params, len(times), omega)
        out["rollout_rmse"] = rmse(roll, truth, mask)
        out["persistence_rollout_rmse"] = rmse(np.broadcast_to(history[-1], truth.shape), truth, mask)
    return out


def _rmse_original(pred, truth, mask, stats):
    return rmse(
        denormalize_values(pred, stats, time_axis=0),
        denormalize_values(truth, stats, time_axis=0),
        mask,
    )


def _recovery_predictions(task: RecoveryTask, params: Net3Params, omega: int):
    data = task.data
    test = task.test_mask & data.mask
    if not test.any():
        raise ValueError("recovery test set is empty")
    times = np.flatnonzero(test.reshape(-1, data.T).any(axis=0))
    pred = one_step_predictions(data.values, task.train_mask, data.networks, params, times, omega)
    truth = np.moveaxis(data.values[..., times], -1, 0)
    mask = np.moveaxis(test[..., times], -1, 0)
    return times, pred, truth, mask


def evaluate_recovery(task: RecoveryTask, params: Net3Params, omega: int) -> dict:
    """RMSE on held-out entries against imputing each series' training mean."""
    _, pred, truth, mask = _recovery_predictions(task, params, omega)
    zeros = np.zeros_like(truth)  # the training mean in normalized units
    return {
        "rmse": rmse(pred, truth, mask),
        "mean_impute_rmse": rmse(zeros, truth, mask),
        "rmse_original": _rmse_original(pred, truth, mask, task.stats),
        "mean_impute_rmse_original": _rmse_original(zeros, truth, mask, task.stats),
        "test_entries": int(mask.sum()),
    }


def _rows(times, pred, truth, mask, stats):
    pred_o = denormalize_values(pred, stats, time_axis=0)
    truth_o = denormalize_values(truth, stats, time_axis=0)
    for k, t in enumerate(times):
        for idx in zip(*np.nonzero(mask[k])):
            yield tuple(int(i) for i in idx) + (int(t),), float(truth_o[k][idx]), float(pred_o[k][idx])


def recovery_rows(task: RecoveryTask, params: Net3Params, omega: int):
    """``(index tuple, truth, prediction)`` for every held-out entry, original units."""
    times, pred, truth, mask = _recovery_predictions(task, params, omega)
    return list(_rows(times, pred, truth, mask, task.stats))


def future_rows(task: FutureTask, params: Net3Params, omega: int, horizon: int | None = None):
    """Rollout from the end of the training region; rows in original units."""
    data = task.data
    horizon = data.T - task.boundary if horizon is None else horizon
    start = max(task.boundary - omega, 0)
    history = np.moveaxis(np.where(data.mask, data.values, 0.0)[..., start:task.boundary], -1, 0)
    pred = predict_multi_step(history, data.networks, params, horizon, omega)
    times = np.arange(task.boundary, task.boundary + horizon)
    known = times < data.T
    truth = np.full(pred.shape, np.nan)
    mask = np.ones(pred.shape, dtype=bool)
    if known.any():
        truth[known] = np.moveaxis(data.values[..., times[known]], -1, 0)
        mask[known] = np.moveaxis(data.mask[..., times[known]], -1, 0)
    return list(_rows(times, pred, truth, mask, task.stats))
