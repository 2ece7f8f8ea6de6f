from losses.terms import (
    LossParts,
    LossReport,
    Ablation,
    ablation_terms,
    apply_ablation,
    cam_loss,
    consistency_loss,
    srm_mix_loss,
    supervised_loss,
    total_loss,
)

__all__ = [
    'LossParts',
    'LossReport',
    'Ablation',
    'ablation_terms',
    'apply_ablation',
    'cam_loss',
    'consistency_loss',
    'srm_mix_loss',
    'supervised_loss',
    'total_loss',
]
