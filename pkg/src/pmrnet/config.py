"""Architecture and training configuration.

A ``NetworkConfig`` fully determines the model graph: every feature map
shape downstream is a closed-form function of (num_layers, num_branches,
base_channels, channel_growth) and the input size.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .errors import ConfigError, DivisibilityError, RangeError

# Exact key set of the flat `key = value` configuration file format.
CONFIG_KEYS = (
    "num_layers",
    "num_branches",
    "base_channels",
    "channel_growth",
    "in_channels",
    "threshold",
    "smooth",
    "max_epochs",
    "batch_size",
    "learning_rate",
    "momentum",
    "weight_decay",
    "seed",
)

NETWORK_KEYS = CONFIG_KEYS[:7]
TRAIN_KEYS = CONFIG_KEYS[7:]


@dataclass(frozen=True)
class NetworkConfig:
    """Shape-determining hyperparameters; immutable after validation."""

    num_layers: int = 5
    num_branches: int = 3
    base_channels: int = 32
    channel_growth: int = 2
    in_channels: int = 3
    threshold: float = 0.5
    smooth: float = 1e-5

    def __post_init__(self):
        if self.num_layers < 2:
            raise RangeError(f"num_layers must be >= 2, got {self.num_layers}")
        if self.num_branches < 1:
            raise RangeError(f"num_branches must be >= 1, got {self.num_branches}")
        if self.base_channels < 1:
            raise RangeError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.channel_growth < 1:
            raise RangeError(f"channel_growth must be >= 1, got {self.channel_growth}")
        if self.in_channels < 1:
            raise RangeError(f"in_channels must be >= 1, got {self.in_channels}")
        if not 0.0 <= self.threshold <= 1.0:
            raise RangeError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.smooth <= 0.0:
            raise RangeError(f"smooth must be positive, got {self.smooth}")

    @property
    def required_divisor(self) -> int:
        """Any accepted input height/width must be divisible by this."""
        return 2 ** ((self.num_layers - 1) + (self.num_branches - 1))


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings; defaults follow the reference protocol."""

    max_epochs: int = 150
    batch_size: int = 4
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 1e-5
    seed: int = 0
    checkpoint_dir: str = "checkpoints"  # not part of the file format

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise RangeError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise RangeError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise RangeError(f"max_epochs must be >= 0, got {self.max_epochs}")


def channels_at(cfg: NetworkConfig, layer: int) -> int:
    """Branch-0 channel width at a 1-indexed layer."""
    if not 1 <= layer <= cfg.num_layers:
        raise RangeError(
            f"layer {layer} out of range [1, {cfg.num_layers}]"
        )
    return cfg.base_channels * cfg.channel_growth ** (layer - 1)


def branch_channels(cfg: NetworkConfig, layer: int, branch: int) -> int:
    """Channel width at (layer, branch).

    Coarser branches are thinned: branch j starts from base_channels / 2^j
    (floored at 1) and grows per layer like branch 0. Branch 0 equals
    ``channels_at``.
    """
    if not 0 <= branch < cfg.num_branches:
        raise RangeError(
            f"branch {branch} out of range [0, {cfg.num_branches - 1}]"
        )
    if not 1 <= layer <= cfg.num_layers:
        raise RangeError(
            f"layer {layer} out of range [1, {cfg.num_layers}]"
        )
    base = max(1, cfg.base_channels // 2**branch)
    return base * cfg.channel_growth ** (layer - 1)


@dataclass(frozen=True)
class ValidatedConfig:
    """A NetworkConfig annotated with every expected feature-map geometry."""

    cfg: NetworkConfig
    input_hw: tuple[int, int]
    # (layer, branch) -> (channels, height, width) for encoder entries
    expected: dict = field(repr=False)

    def expected_hw(self, layer: int, branch: int) -> tuple[int, int]:
        _, h, w = self.expected[(layer, branch)]
        return h, w


def validate_config(cfg: NetworkConfig, input_hw: tuple[int, int]) -> ValidatedConfig:
    """Check divisibility and precompute the full shape plan.

    Raises DivisibilityError when input_hw is not divisible by
    2^((L-1)+(B-1)); entry (i, j) of the plan lives at input / 2^(i-1+j).
    """
    h, w = input_hw
    div = cfg.required_divisor
    if h % div != 0 or w % div != 0:
        raise DivisibilityError(
            f"input {h}x{w} not divisible by {div} "
            f"(required for L={cfg.num_layers}, B={cfg.num_branches})"
        )
    expected = {}
    for i in range(1, cfg.num_layers + 1):
        for j in range(cfg.num_branches):
            scale = 2 ** (i - 1 + j)
            expected[(i, j)] = (branch_channels(cfg, i, j), h // scale, w // scale)
    return ValidatedConfig(cfg=cfg, input_hw=(h, w), expected=expected)


def _format_value(v) -> str:
    if isinstance(v, bool):
        raise ConfigError("boolean config values are not supported")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: NetworkConfig, tc: TrainConfig) -> str:
    """Serialize both configs to the flat `key = value` text format."""
    pairs = {k: getattr(cfg, k) for k in NETWORK_KEYS}
    pairs.update({k: getattr(tc, k) for k in TRAIN_KEYS})
    lines = [f"{k} = {_format_value(pairs[k])}" for k in CONFIG_KEYS]
    return "\n".join(lines) + "\n"


def save_config(cfg: NetworkConfig, tc: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_config(cfg, tc))


_INT_FIELDS = {
    "num_layers", "num_branches", "base_channels", "channel_growth",
    "in_channels", "max_epochs", "batch_size", "seed",
}


def parse_config(text: str) -> tuple[NetworkConfig, TrainConfig]:
    """Parse the flat text format; `#` starts a comment, keys are fixed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = int(val) if key in _INT_FIELDS else float(val)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from e
    net_kwargs = {k: values[k] for k in NETWORK_KEYS if k in values}
    train_kwargs = {k: values[k] for k in TRAIN_KEYS if k in values}
    return NetworkConfig(**net_kwargs), TrainConfig(**train_kwargs)


def load_config(path) -> tuple[NetworkConfig, TrainConfig]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def config_hash(cfg: NetworkConfig, tc: TrainConfig) -> str:
    """Stable hash of the resolved configuration (canonical serialization)."""
    return hashlib.sha256(dump_config(cfg, tc).encode("utf-8")).hexdigest()[:16]


def network_config_dict(cfg: NetworkConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}
