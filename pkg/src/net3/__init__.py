"""Tensor graph convolution and Tucker-reduced LSTM models for networked
tensor time series, on numpy."""

from .config import TrainConfig
from .data import NetTensorTimeSeries, SynthConfig, load_dataset, save_dataset, synthesize
from .graph import ModeNetwork
from .model import forward, init_params, load_checkpoint, predict_multi_step, save_checkpoint
from .training import fit, rmse
from .trnn import count_params_mlstm, count_params_tlstm, rho_upper_bound

__version__ = "0.1.0"

__all__ = [
    "TrainConfig",
    "NetTensorTimeSeries",
    "SynthConfig",
    "ModeNetwork",
    "load_dataset",
    "save_dataset",
    "synthesize",
    "forward",
    "init_params",
    "predict_multi_step",
    "save_checkpoint",
    "load_checkpoint",
    "fit",
    "rmse",
    "count_params_tlstm",
    "count_params_mlstm",
    "rho_upper_bound",
]
