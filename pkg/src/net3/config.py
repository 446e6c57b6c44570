"""Training configuration and flat ``key=value`` config files."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

__all__ = ["TrainConfig", "VARIANTS", "read_config_file", "DATASET_RHO"]

# graph layer and recurrent cell used by each model variant
VARIANTS = {
    "net3": ("tgcn", "tlstm"),
    "itgcn": ("itgcn", "tlstm"),
    "gcn-flat": ("gcn-flat", "tlstm"),
    "mlstm": ("tgcn", "mlstm"),
    "lstm": ("tgcn", "lstm"),
}

# interaction degrees used for the reference datasets
DATASET_RHO = {"motes": 0.8, "soil": 0.8, "revenue": 0.2, "traffic": 0.1, "20cr": 0.9}


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "net3"
    hidden: int = 8
    hidden_rnn: int = 8
    rho: float = 0.8
    omega: int = 5
    tau: int = 1
    lr: float = 0.01
    mu1: float = 1e-3
    mu2: float = 1e-3
    epochs: int = 100
    seed: int = 0
    batch_size: int = 0  # 0 = full batch up to 1000 windows, else 32
    stride: int = 1
    activation: str = "relu"
    cell_output: str = "sigmoid"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 0.0  # global gradient-norm clip, 0 disables

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.tau != 1:
            raise ValueError("training uses tau = 1; longer horizons are rolled out")
        if self.omega < 1 or self.hidden < 1 or self.hidden_rnn < 1:
            raise ValueError("omega, hidden and hidden_rnn must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(cls, k, v) for k, v in d.items()})

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


def _coerce(cls, key, value):
    default = next(f.default for f in dataclasses.fields(cls) if f.name == key)
    if isinstance(value, str) and not isinstance(default, str):
        return type(default)(value)
    return value


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out
