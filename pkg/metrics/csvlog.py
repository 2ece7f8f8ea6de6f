"""
Per-iteration metrics CSV. One schema for every run so curves of different
presets overlay directly. Numbers carry 6 significant digits; a missing
value is an empty field.
"""
import csv
import os
from typing import Dict, List, Optional

from metrics.diagnostics import DiagnosticRow

COLUMNS = (
    'iteration', 'l_s', 'l_u', 'l_m', 'l_cm', 'total',
    'purity', 'reliability', 'top1', 'top2', 'test_error',
    'threshold_global', 'size_H', 'size_Hc', 'cam_matched', 'wall_clock_s',
)


class MetricsFormatError(ValueError):
    pass


def format_number(value) -> str:
    if value is None:
        return ''
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


def row_fields(row: DiagnosticRow) -> List[str]:
    values = {
        'iteration': row.iteration,
        'l_s': row.loss.l_s,
        'l_u': row.loss.l_u,
        'l_m': row.loss.l_m,
        'l_cm': row.loss.l_cm,
        'total': row.loss.total,
        'purity': row.purity,
        'reliability': row.reliability,
        'top1': row.top1,
        'top2': row.top2,
        'test_error': row.test_error,
        'threshold_global': row.threshold_global,
        'size_H': row.loss.size_H,
        'size_Hc': row.loss.size_Hc,
        'cam_matched': row.loss.cam_matched,
        'wall_clock_s': row.wall_clock_s,
    }
    return [format_number(values[name]) for name in COLUMNS]


class MetricsWriter:

    def __init__(self, path: str) -> None:
        self.path = path

    @classmethod
    def create(cls, path: str) -> 'MetricsWriter':
        with open(path, 'w', newline='') as fp:
            csv.writer(fp, lineterminator='\n').writerow(COLUMNS)
        return cls(path)

    @classmethod
    def resume(cls, path: str, iteration: int) -> 'MetricsWriter':
        """Keeps the header and every row up to and including `iteration`."""
        if not os.path.exists(path):
            return cls.create(path)
        with open(path, 'r', newline='') as fp:
            lines = fp.read().splitlines(keepends=True)
        if not lines or lines[0].strip() != ','.join(COLUMNS):
            raise MetricsFormatError(f"{path}: unexpected header")
        kept = [lines[0]]
        for line in lines[1:]:
            if int(line.split(',', 1)[0]) <= iteration:
                kept.append(line)
        with open(path, 'w', newline='') as fp:
            fp.writelines(kept)
        return cls(path)

    def append(self, row: DiagnosticRow) -> None:
        with open(self.path, 'a', newline='') as fp:
            csv.writer(fp, lineterminator='\n').writerow(row_fields(row))


def read_metrics(path: str) -> List[Dict[str, Optional[float]]]:
    with open(path, 'r', newline='') as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsFormatError(f"{path}: empty file") from None
        if tuple(header) != COLUMNS:
            raise MetricsFormatError(f"{path}: unexpected header {header}")
        rows: List[Dict[str, Optional[float]]] = []
        for lineno, fields in enumerate(reader, start=2):
            if len(fields) != len(COLUMNS):
                raise MetricsFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(fields)}")
            try:
                rows.append({
                    name: (float(value) if value != '' else None)
                    for name, value in zip(COLUMNS, fields)
                })
            except ValueError as e:
                raise MetricsFormatError(f"{path}:{lineno}: {e}") from None
    return rows
