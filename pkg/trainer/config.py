"""
Run configuration: a flat text file of key=value lines, '#' starting a
comment. Every key is optional; missing keys take the defaults below.
"""
import dataclasses
from dataclasses import dataclass
from typing import Any, Dict, Mapping

from augment.mixing import STRATEGIES
from losses.terms import ABLATIONS, CAM_DIVISORS


class ConfigError(ValueError):
    pass


CHOICES: Dict[str, tuple] = {
    'dataset': ('synthetic', 'idx', 'cifar'),
    'threshold_mode': ('adaptive', 'fixed'),
    'mix_strategy': STRATEGIES,
    'ablation': ABLATIONS,
    'pseudo_source': ('live', 'ema'),
    'label_weak_aug': ('weak', 'none'),
    'lr_schedule': ('constant', 'cosine'),
    'strong_views': ('shared', 'independent'),
    'cam_divisor': CAM_DIVISORS,
}


@dataclass(frozen=True)
class TrainConfig:
    dataset: str = 'synthetic'
    data_path: str = ''
    labels_per_class: int = 4
    batch_size: int = 64
    mu: int = 7
    tau_m: float = 0.999
    alpha_h: float = 1.0
    alpha_l: float = 16.0
    threshold_mode: str = 'adaptive'
    tau_fixed: float = 0.95
    threshold_ema: float = 0.999
    lr: float = 0.03
    momentum: float = 0.9
    weight_decay: float = 5e-4
    param_ema: float = 0.999
    iterations: int = 5000
    eval_interval: int = 500
    seed: int = 0
    mix_strategy: str = 'resizemix'
    ablation: str = 'none'
    hc_exclusive: bool = False
    pseudo_source: str = 'live'
    label_weak_aug: str = 'weak'
    lr_schedule: str = 'constant'
    purity_threshold: float = 0.95
    out_dir: str = 'runs/default'
    data_seed: int = 0
    synthetic_classes: int = 10
    synthetic_per_class: int = 500
    synthetic_test_per_class: int = 100
    image_size: int = 32
    include_labeled: bool = True
    cutout: bool = True
    strong_views: str = 'shared'
    cam_divisor: str = 'hc'
    weight_u: float = 1.0
    weight_m: float = 1.0
    weight_cm: float = 1.0
    record_wall_clock: bool = True

    @property
    def unlabeled_batch_size(self) -> int:
        return self.mu * self.batch_size


FIELDS: Dict[str, dataclasses.Field] = {f.name: f for f in dataclasses.fields(TrainConfig)}


def parse_value(key: str, text: str) -> Any:
    if key not in FIELDS:
        raise ConfigError(f"Unknown config key: {key}")
    kind = FIELDS[key].type
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ('true', 'yes', '1'):
                return True
            if lowered in ('false', 'no', '0'):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from None
    return text


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return repr(value) if isinstance(value, float) else str(value)


def validate(config: TrainConfig) -> TrainConfig:
    for key, choices in CHOICES.items():
        value = getattr(config, key)
        if value not in choices:
            raise ConfigError(f"{key}: {value!r} is not one of {', '.join(choices)}")

    def require(ok: bool, msg: str) -> None:
        if not ok:
            raise ConfigError(msg)

    require(0.0 < config.tau_m < 1.0, f"tau_m must lie in (0, 1), got {config.tau_m}")
    require(0.0 < config.tau_fixed < 1.0, f"tau_fixed must lie in (0, 1), got {config.tau_fixed}")
    if config.threshold_mode == 'fixed':
        require(
            config.tau_m > config.tau_fixed,
            f"tau_m ({config.tau_m}) must exceed tau_fixed ({config.tau_fixed})",
        )
    elif config.dataset == 'synthetic':
        require(
            config.tau_m > 1.0 / config.synthetic_classes,
            f"tau_m ({config.tau_m}) must exceed the initial threshold 1/{config.synthetic_classes}",
        )
    require(config.mu >= 1, f"mu must be at least 1, got {config.mu}")
    require(config.batch_size >= 1, f"batch_size must be at least 1, got {config.batch_size}")
    require(config.alpha_h > 0, f"alpha_h must be positive, got {config.alpha_h}")
    require(config.alpha_l > 0, f"alpha_l must be positive, got {config.alpha_l}")
    require(0.0 <= config.threshold_ema < 1.0, f"threshold_ema must lie in [0, 1), got {config.threshold_ema}")
    require(0.0 <= config.param_ema <= 1.0, f"param_ema must lie in [0, 1], got {config.param_ema}")
    require(config.lr >= 0, f"lr must not be negative, got {config.lr}")
    require(config.iterations >= 0, f"iterations must not be negative, got {config.iterations}")
    require(config.eval_interval >= 1, f"eval_interval must be at least 1, got {config.eval_interval}")
    require(config.labels_per_class >= 1, f"labels_per_class must be at least 1, got {config.labels_per_class}")
    require(config.seed >= 0 and config.data_seed >= 0, "seeds must not be negative")
    require(0.0 <= config.purity_threshold <= 1.0, f"purity_threshold must lie in [0, 1], got {config.purity_threshold}")
    if config.dataset == 'synthetic':
        require(1 <= config.synthetic_classes <= 10, "synthetic_classes must lie in [1, 10]")
        require(config.image_size >= 16, "image_size must be at least 16")
    elif not config.data_path:
        raise ConfigError(f"dataset {config.dataset} needs data_path")
    return config


def parse_config_text(text: str) -> TrainConfig:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split('=', 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        values[key] = parse_value(key, value)
    return validate(TrainConfig(**values))


def parse_config(path: str) -> TrainConfig:
    with open(path, 'r') as fp:
        return parse_config_text(fp.read())


def format_config(config: TrainConfig) -> str:
    lines = [f"{name}={format_value(getattr(config, name))}" for name in FIELDS]
    return '\n'.join(lines) + '\n'


def with_overrides(config: TrainConfig, overrides: Mapping[str, Any]) -> TrainConfig:
    """Applies overrides given either as typed values or as config text."""
    parsed = {
        key: parse_value(key, value) if isinstance(value, str) else value
        for key, value in overrides.items()
    }
    for key in parsed:
        if key not in FIELDS:
            raise ConfigError(f"Unknown config key: {key}")
    return validate(dataclasses.replace(config, **parsed))
