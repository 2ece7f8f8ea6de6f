import pytest

from losses.terms import LossReport
from metrics.csvlog import (
    COLUMNS,
    MetricsFormatError,
    MetricsWriter,
    format_number,
    read_metrics,
    row_fields,
)
from metrics.diagnostics import DiagnosticRow

HEADER = (
    'iteration,l_s,l_u,l_m,l_cm,total,purity,reliability,top1,top2,test_error,'
    'threshold_global,size_H,size_Hc,cam_matched,wall_clock_s'
)


def row(iteration, reliability=0.5, test_error=None):
    report = LossReport(2.302585093, 0.1, 0.0, 0.25, 2.652585093, 5, 4, 3, 2)
    return DiagnosticRow(
        iteration=iteration, loss=report, purity=0.125, reliability=reliability,
        top1=0.75, top2=1.0, test_error=test_error, threshold_global=0.95, wall_clock_s=0.0,
    )


class TestFormatting:

    def test_header(self):
        assert ','.join(COLUMNS) == HEADER

    def test_numbers(self):
        assert format_number(None) == ''
        assert format_number(12) == '12'
        assert format_number(2.302585093) == '2.30259'
        assert format_number(1e-7) == '1e-07'
        assert format_number(0.0) == '0'

    def test_fields(self):
        fields = row_fields(row(3, reliability=None))
        assert fields == [
            '3', '2.30259', '0.1', '0', '0.25', '2.65259', '0.125', '', '0.75', '1', '',
            '0.95', '4', '3', '2', '0',
        ]


class TestWriter:

    def test_write_and_read(self, tmp_path):
        path = str(tmp_path / 'metrics.csv')
        writer = MetricsWriter.create(path)
        writer.append(row(1))
        writer.append(row(2, reliability=None, test_error=0.4))
        with open(path) as fp:
            lines = fp.read().splitlines()
        assert lines[0] == HEADER and len(lines) == 3

        rows = read_metrics(path)
        assert [r['iteration'] for r in rows] == [1.0, 2.0]
        assert rows[1]['reliability'] is None
        assert rows[1]['test_error'] == 0.4
        assert rows[0]['size_H'] == 4.0

    def test_resume_truncates(self, tmp_path):
        path = str(tmp_path / 'metrics.csv')
        writer = MetricsWriter.create(path)
        for it in range(1, 6):
            writer.append(row(it))
        MetricsWriter.resume(path, 3).append(row(4))
        assert [r['iteration'] for r in read_metrics(path)] == [1.0, 2.0, 3.0, 4.0]

    def test_resume_without_file(self, tmp_path):
        path = str(tmp_path / 'metrics.csv')
        MetricsWriter.resume(path, 10)
        assert read_metrics(path) == []

    def test_bad_header(self, tmp_path):
        path = tmp_path / 'metrics.csv'
        path.write_text('a,b\n1,2\n')
        with pytest.raises(MetricsFormatError):
            read_metrics(str(path))
        with pytest.raises(MetricsFormatError):
            MetricsWriter.resume(str(path), 1)

    def test_short_row(self, tmp_path):
        path = tmp_path / 'metrics.csv'
        path.write_text(HEADER + '\n1,2,3\n')
        with pytest.raises(MetricsFormatError):
            read_metrics(str(path))
