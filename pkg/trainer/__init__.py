from trainer.config import ConfigError, TrainConfig, format_config, parse_config
from trainer.loop import train_loop
from trainer.state import RunState

__all__ = [
    'ConfigError',
    'RunState',
    'TrainConfig',
    'format_config',
    'parse_config',
    'train_loop',
]
