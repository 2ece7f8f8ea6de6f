from metrics.csvlog import COLUMNS, MetricsWriter, read_metrics
from metrics.diagnostics import DiagnosticRow, purity, reliability, topk_accuracy

__all__ = [
    'COLUMNS',
    'DiagnosticRow',
    'MetricsWriter',
    'purity',
    'read_metrics',
    'reliability',
    'topk_accuracy',
]
