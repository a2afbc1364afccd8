"""Experiment configuration and its flat ``key = value`` text form.

    # comments start with '#'
    code.generators = 7,5      # octal
    code.memory = 2
    block_length = 49
    net.depth = 2
    loss = bce

Unknown keys, duplicate keys and malformed lines are errors that carry the
line number.  The same text format is embedded in checkpoint headers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from ..coding import CodeSpec
from ..losses import LOSSES, loss_by_name
from ..nn.unet import UNetConfig


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class TrainConfig:
    code: CodeSpec = CodeSpec((0o7, 0o5), 2)
    block_length: int = 49
    net: UNetConfig = UNetConfig()
    loss: str = "bce"
    batch_size: int = 100
    num_samples: int = 20_000
    epochs: int = 30
    lr: float = 1e-3
    snr_min_db: float = 0.0
    snr_max_db: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.block_length < 1:
            raise ConfigError(f"block_length must be >= 1, got {self.block_length}", "block_length")
        if not 1 <= self.batch_size <= self.num_samples:
            raise ConfigError(
                f"need 1 <= batch_size <= num_samples, got {self.batch_size} > {self.num_samples}",
                "batch_size",
            )
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}", "epochs")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}", "lr")
        if self.snr_min_db > self.snr_max_db:
            raise ConfigError("snr_min_db must not exceed snr_max_db", "snr_min_db")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}", "seed")
        try:
            loss_by_name(self.loss)
        except ValueError as exc:
            raise ConfigError(str(exc), "loss") from None

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        """Large-run preset: batch 500, 150k samples, 500 epochs."""
        return cls(**{"batch_size": 500, "num_samples": 150_000, "epochs": 500, **overrides})


@dataclass(frozen=True)
class SweepConfig:
    snr_list_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0)
    min_bits: int = 100_000
    min_errors: int = 100
    max_bits: int = 1_000_000

    def __post_init__(self):
        if self.min_bits < 10**4:
            raise ConfigError(f"sweep.min_bits must be >= 10000, got {self.min_bits}", "sweep.min_bits")
        if self.max_bits < self.min_bits:
            raise ConfigError("sweep.max_bits must be >= sweep.min_bits", "sweep.max_bits")


@dataclass(frozen=True)
class OutputConfig:
    checkpoint: str = "model.cmu"
    train_log: str = "train_log.csv"
    sweep_csv: str = "sweep.csv"
    sweep_svg: str = "sweep.svg"
    report: str = "nve_report.txt"


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


REQUIRED_KEYS = ("code.generators", "code.memory", "block_length", "loss")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _octal_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


# key -> (section, field, parser)
_KEYS = {
    "code.generators": ("code", "generators", _octal_list),
    "code.memory": ("code", "memory", int),
    "block_length": ("train", "block_length", int),
    "net.depth": ("net", "depth", int),
    "net.base_channels": ("net", "base_channels", int),
    "loss": ("train", "loss", str),
    "batch_size": ("train", "batch_size", int),
    "num_samples": ("train", "num_samples", int),
    "epochs": ("train", "epochs", int),
    "lr": ("train", "lr", float),
    "snr_min_db": ("train", "snr_min_db", float),
    "snr_max_db": ("train", "snr_max_db", float),
    "seed": ("train", "seed", int),
    "sweep.snr_list_db": ("sweep", "snr_list_db", _floats),
    "sweep.min_bits": ("sweep", "min_bits", int),
    "sweep.min_errors": ("sweep", "min_errors", int),
    "sweep.max_bits": ("sweep", "max_bits", int),
    "output.checkpoint": ("output", "checkpoint", str),
    "output.train_log": ("output", "train_log", str),
    "output.sweep_csv": ("output", "sweep_csv", str),
    "output.sweep_svg": ("output", "sweep_svg", str),
    "output.report": ("output", "report", str),
}
TRAIN_KEYS = tuple(k for k, (section, _, _) in _KEYS.items() if section in ("code", "net", "train"))


def parse_lines(text: str) -> dict[str, tuple[str, int]]:
    """Split config text into ``{key: (raw value, line number)}``."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", key, lineno)
        entries[key] = (value, lineno)
    return entries


def _build(entries: dict[str, tuple[str, int]], allowed) -> dict[str, dict]:
    sections: dict[str, dict] = {"code": {}, "net": {}, "train": {}, "sweep": {}, "output": {}}
    for key, (value, lineno) in entries.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", key, lineno)
        section, name, parse = _KEYS[key]
        try:
            sections[section][name] = parse(value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}", key, lineno) from None
    return sections


def _train_from(sections, entries) -> TrainConfig:
    for key in REQUIRED_KEYS:
        if key not in entries:
            raise ConfigError(f"missing required key {key!r}", key)
    code = sections["code"]
    try:
        spec = CodeSpec.from_octal(code["generators"], code["memory"])
    except ValueError as exc:
        raise ConfigError(str(exc), "code.generators", entries["code.generators"][1]) from None
    try:
        net = UNetConfig(**sections["net"])
        return TrainConfig(code=spec, net=net, **sections["train"])
    except ConfigError as exc:
        if exc.key in entries:
            raise ConfigError(str(exc), exc.key, entries[exc.key][1]) from None
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_train_config(text: str) -> TrainConfig:
    entries = parse_lines(text)
    return _train_from(_build(entries, TRAIN_KEYS), entries)


def parse_experiment_config(text: str) -> ExperimentConfig:
    entries = parse_lines(text)
    sections = _build(entries, _KEYS)
    train = _train_from(sections, entries)
    try:
        sweep = SweepConfig(**sections["sweep"])
    except ConfigError as exc:
        raise ConfigError(str(exc), exc.key, entries.get(exc.key, (None, None))[1]) from None
    return ExperimentConfig(train, sweep, OutputConfig(**sections["output"]))


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_experiment_config(fh.read())


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def format_train_config(cfg: TrainConfig) -> str:
    lines = [
        "code.generators = " + ",".join(format(g, "o") for g in cfg.code.generators),
        f"code.memory = {cfg.code.memory}",
        f"net.depth = {cfg.net.depth}",
        f"net.base_channels = {cfg.net.base_channels}",
    ]
    for f in fields(TrainConfig):
        if f.name not in ("code", "net"):
            lines.append(f"{f.name} = {_fmt(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def format_experiment_config(cfg: ExperimentConfig) -> str:
    lines = [format_train_config(cfg.train).rstrip("\n")]
    for section in ("sweep", "output"):
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, **train_overrides) -> ExperimentConfig:
    return replace(cfg, train=replace(cfg.train, **train_overrides))


__all__ = [
    "ConfigError",
    "TrainConfig",
    "SweepConfig",
    "OutputConfig",
    "ExperimentConfig",
    "LOSSES",
    "parse_lines",
    "parse_train_config",
    "parse_experiment_config",
    "load_experiment_config",
    "format_train_config",
    "format_experiment_config",
    "with_overrides",
]
