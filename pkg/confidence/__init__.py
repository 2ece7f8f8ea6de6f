from confidence.partition import Partition, pair_cam, pair_srm, partition
from confidence.threshold import ThresholdState, effective_tau_c, update_adaptive_threshold

__all__ = [
    'Partition',
    'ThresholdState',
    'effective_tau_c',
    'pair_cam',
    'pair_srm',
    'partition',
    'update_adaptive_threshold',
]
