"""Networked tensor time series: storage, normalization, splits, synthesis.

Dataset directory layout::

    manifest.json   shape (time last), mode names, network files, dtype
    values.bin      float64 little-endian, row-major
    mask.bin        optional, one byte (0/1) per entry, same order
    net_<m>.csv     optional square adjacency for node mode m (0-based)
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import ModeNetwork, mode_pearson_networks
from .tensor import ShapeError, multi_mode_product
from .trnn import orthonormal_init

logger = logging.getLogger(__name__)

__all__ = [
    "DatasetError",
    "NetTensorTimeSeries",
    "NormStats",
    "SynthConfig",
    "compute_stats",
    "normalize",
    "denormalize",
    "save_dataset",
    "load_dataset",
    "split_recovery",
    "split_future",
    "synthesize",
]

FORMAT = "net3-dataset"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NetTensorTimeSeries:
    """Values ``(N_1, ..., N_M, T)``, one network per node mode, and a mask
    that is true where a value was observed."""

    values: np.ndarray
    networks: list
    mask: np.ndarray
    mode_names: list = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim < 2:
            raise ShapeError("a tensor time series needs at least one node mode and time")
        if mask.shape != values.shape:
            raise ShapeError(f"mask shape {mask.shape} differs from values {values.shape}")
        if len(self.networks) != values.ndim - 1:
            raise ShapeError(f"need {values.ndim - 1} networks, got {len(self.networks)}")
        for m, (n, net) in enumerate(zip(values.shape[:-1], self.networks)):
            if net.size != n:
                raise ShapeError(f"network for mode {m} has {net.size} nodes, mode has {n}")
        if not np.all(np.isfinite(values[mask])):
            raise DatasetError("observed values must be finite")
        names = list(self.mode_names) or [f"mode{m}" for m in range(values.ndim - 1)] + ["time"]
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "mode_names", names)

    @property
    def node_shape(self) -> tuple:
        return self.values.shape[:-1]

    @property
    def T(self) -> int:
        return self.values.shape[-1]

    def with_values(self, values) -> "NetTensorTimeSeries":
        return NetTensorTimeSeries(values, self.networks, self.mask, self.mode_names)

    def with_mask(self, mask) -> "NetTensorTimeSeries":
        return NetTensorTimeSeries(self.values, self.networks, mask, self.mode_names)


@dataclass(frozen=True, eq=False)
class NormStats:
    """Per-series mean and standard deviation, shape ``(N_1, ..., N_M)``."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray


def compute_stats(ds: NetTensorTimeSeries, train_mask=None) -> NormStats:
    """Statistics over entries that are observed and inside ``train_mask``."""
    use = ds.mask if train_mask is None else ds.mask & np.asarray(train_mask, dtype=bool)
    count = use.sum(axis=-1)
    safe = np.maximum(count, 1)
    x = np.where(use, ds.values, 0.0)
    mean = x.sum(axis=-1) / safe
    var = np.where(use, (ds.values - mean[..., None]) ** 2, 0.0).sum(axis=-1) / safe
    std = np.sqrt(var)
    constant = (std == 0) | (count == 0)
    if np.any(count == 0):
        logger.warning("%d series have no training observations", int((count == 0).sum()))
    std = np.where(constant, 1.0, std)
    return NormStats(mean=mean, std=std, constant=constant)


def normalize(ds: NetTensorTimeSeries, stats: NormStats) -> NetTensorTimeSeries:
    return ds.with_values((ds.values - stats.mean[..., None]) / stats.std[..., None])


def denormalize(ds: NetTensorTimeSeries, stats: NormStats) -> NetTensorTimeSeries:
    return ds.with_values(denormalize_values(ds.values, stats))


def denormalize_values(values, stats: NormStats, time_axis: int = -1):
    v = np.moveaxis(np.asarray(values, dtype=np.float64), time_axis, -1)
    out = v * stats.std[..., None] + stats.mean[..., None]
    return np.moveaxis(out, -1, time_axis)


def save_dataset(ds: NetTensorTimeSeries, path, mask_file: bool = True) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    nets = {}
    for m, net in enumerate(ds.networks):
        if not net.is_identity:
            name = f"net_{m}.csv"
            np.savetxt(path / name, net.raw, delimiter=",", fmt="%.17g")
            nets[str(m)] = name
    manifest = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "shape": list(ds.values.shape),
        "mode_names": list(ds.mode_names),
        "networks": nets,
        "dtype": "float64",
        "endianness": "little",
        "values": "values.bin",
        "mask": "mask.bin" if mask_file else None,
    }
    (path / "values.bin").write_bytes(ds.values.astype("<f8").tobytes())
    if mask_file:
        (path / "mask.bin").write_bytes(ds.mask.astype(np.uint8).tobytes())
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _read_manifest(path: Path) -> dict:
    for name in ("manifest.json", "manifest"):
        if (path / name).is_file():
            return json.loads((path / name).read_text())
    raise DatasetError(f"{path}: no manifest")


def load_dataset(path) -> NetTensorTimeSeries:
    path = Path(path)
    man = _read_manifest(path)
    if man.get("dtype", "float64") != "float64" or man.get("endianness", "little") != "little":
        raise DatasetError("only little-endian float64 payloads are supported")
    shape = tuple(int(s) for s in man["shape"])
    if len(shape) < 2 or min(shape) < 1:
        raise DatasetError(f"invalid shape {shape}")
    total = math.prod(shape)
    raw = (path / man.get("values", "values.bin")).read_bytes()
    if len(raw) != 8 * total:
        raise DatasetError(f"values payload has {len(raw)} bytes, manifest implies {8 * total}")
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    mask_name = man.get("mask")
    if mask_name and (path / mask_name).is_file():
        mraw = (path / mask_name).read_bytes()
        if len(mraw) != total:
            raise DatasetError(f"mask payload has {len(mraw)} bytes, manifest implies {total}")
        mask_bytes = np.frombuffer(mraw, dtype=np.uint8)
        if np.any(mask_bytes > 1):
            raise DatasetError("mask bytes must be 0 or 1")
        mask = mask_bytes.astype(bool).reshape(shape)
    else:
        mask = np.ones(shape, dtype=bool)
    files = {int(k): v for k, v in (man.get("networks") or {}).items()}
    networks = []
    for m, n in enumerate(shape[:-1]):
        if m in files:
            a = np.loadtxt(path / files[m], delimiter=",", ndmin=2)
            if a.shape != (n, n):
                raise DatasetError(f"network for mode {m} has shape {a.shape}, expected {(n, n)}")
            networks.append(ModeNetwork.from_adjacency(a))
        else:
            networks.append(ModeNetwork.identity(n))
    return NetTensorTimeSeries(values, networks, mask, man.get("mode_names") or [])


def _check_fraction(fraction):
    if not 0 <= fraction < 1:
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_recovery(ds: NetTensorTimeSeries, fraction: float, seed) -> np.ndarray:
    """Boolean mask of held-out entries: exactly ``round(fraction * size)``
    positions chosen uniformly at random."""
    _check_fraction(fraction)
    total = ds.values.size
    count = _round_half_up(fraction * total)
    if count == 0:
        raise ValueError("held-out test set is empty")
    rng = np.random.default_rng(seed)
    flat = np.zeros(total, dtype=bool)
    flat[rng.choice(total, size=count, replace=False)] = True
    test = flat.reshape(ds.values.shape)
    remaining = ds.mask & ~test
    empty = ~remaining.any(axis=-1)
    if np.any(empty):
        logger.warning("%d series have no observed training entries after the split", int(empty.sum()))
    return test


def split_future(ds: NetTensorTimeSeries, fraction: float) -> int:
    """First time index of the test region (the last ``fraction`` of steps)."""
    _check_fraction(fraction)
    boundary = ds.T - _round_half_up(fraction * ds.T)
    if boundary <= 0 or boundary >= ds.T:
        raise ValueError(f"fraction {fraction} leaves an empty train or test region")
    return boundary


@dataclass(frozen=True)
class SynthConfig:
    dims: tuple = (6, 4)
    core: tuple = (3, 2)
    T: int = 400
    noise: float = 0.05
    spectral_radius: float = 0.9
    innovation: float = 1.0


def synthesize(config: SynthConfig, seed) -> NetTensorTimeSeries:
    """Low-rank linear teacher.

    Draws factors ``U_m`` with orthonormal rows and a core transition
    ``A = radius * Q`` with ``Q`` orthogonal, then emits
    ``S_t = z_t prod_m x_m U_m + noise`` where
    ``vec(z_{t+1}) = A vec(z_t) + innovation * eps_t``.
    Networks are Pearson graphs of the generated series.
    """
    dims = tuple(int(n) for n in config.dims)
    core = tuple(int(n) for n in config.core)
    if len(dims) != len(core) or any(c > n or c < 1 for c, n in zip(core, dims)):
        raise ValueError(f"core {core} incompatible with dims {dims}")
    if not 0 <= config.spectral_radius < 1:
        raise ValueError("transition must be stable (spectral radius < 1)")
    rng = np.random.default_rng(seed)
    factors = [orthonormal_init(c, n, rng) for c, n in zip(core, dims)]
    size = math.prod(core)
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    transition = config.spectral_radius * q * np.sign(np.diag(r))
    z = rng.standard_normal(size)
    snaps = []
    for _ in range(config.T):
        s = multi_mode_product(z.reshape(core), list(enumerate(factors)))
        snaps.append(s)
        z = transition @ z + config.innovation * rng.standard_normal(size)
    values = np.stack(snaps, axis=-1)
    if config.noise > 0:
        values = values + config.noise * rng.standard_normal(values.shape)
    networks = mode_pearson_networks(values)
    names = [f"mode{m}" for m in range(len(dims))] + ["time"]
    return NetTensorTimeSeries(values, networks, np.ones(values.shape, dtype=bool), names)
