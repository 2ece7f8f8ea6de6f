from augment.mixing import (
    MixOutcome,
    PatchRect,
    mix,
    mixup,
    resizemix,
    resizemix_uniform,
    sample_lambda,
)
from augment.policies import AugmentPolicy, strong_augment, weak_augment

__all__ = [
    'AugmentPolicy',
    'MixOutcome',
    'PatchRect',
    'mix',
    'mixup',
    'resizemix',
    'resizemix_uniform',
    'sample_lambda',
    'strong_augment',
    'weak_augment',
]
