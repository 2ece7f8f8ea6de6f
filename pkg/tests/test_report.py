import os
import xml.etree.ElementTree as ET

import pytest

import report
from losses.terms import LossReport
from metrics.csvlog import MetricsWriter
from metrics.diagnostics import DiagnosticRow
from trainer.config import TrainConfig, format_config

SVG = '{http://www.w3.org/2000/svg}'


def write_metrics(path, errors):
    writer = MetricsWriter.create(path)
    for it, error in enumerate(errors, start=1):
        loss = LossReport(1.0 / it, 0.5, 0.25, 0.125, 1.0 / it + 0.875, 3, 2, 2, 1)
        writer.append(DiagnosticRow(it, loss, 0.5, None, 0.6, 0.9, error, 0.7, 0.0))


@pytest.fixture
def run_dir(tmp_path):
    path = tmp_path / 'desk_full'
    path.mkdir()
    (path / 'config.cfg').write_text(format_config(TrainConfig()))
    write_metrics(str(path / 'metrics.csv'), [None, 0.5, None, 0.25])
    return str(path)


class TestMetrics:

    def test_points_skip_missing(self, run_dir):
        metrics = report.load_metrics(os.path.join(run_dir, 'metrics.csv'))
        assert metrics.name == 'metrics'
        assert metrics.points('test_error') == [(2.0, 0.5), (4.0, 0.25)]
        assert metrics.points('reliability') == []
        assert metrics.final('test_error') == 0.25
        assert metrics.final('reliability') is None

    def test_unknown_column(self, run_dir):
        metrics = report.load_metrics(os.path.join(run_dir, 'metrics.csv'))
        with pytest.raises(report.ReportError):
            metrics.points('accuracy')

    def test_missing_file(self, tmp_path):
        with pytest.raises(report.ReportError):
            report.load_metrics(str(tmp_path / 'absent.csv'))


class TestChart:

    def test_bounds(self, run_dir):
        metrics = report.load_metrics(os.path.join(run_dir, 'metrics.csv'))
        chart = report.build_chart([metrics], ['test_error'], 'Test error')
        assert chart.x_range == (2.0, 4.0) and chart.y_range == (0.25, 0.5)
        assert chart.x(2.0) == chart.margin_left
        assert chart.y(0.25) == chart.height - chart.margin_bottom

    def test_flat_series(self, tmp_path):
        path = str(tmp_path / 'flat.csv')
        write_metrics(path, [0.5, 0.5])
        chart = report.build_chart([report.load_metrics(path)], ['test_error'], 'flat')
        assert chart.y_range == (0.0, 1.0)

    def test_series_labels(self, run_dir, tmp_path):
        other = str(tmp_path / 'other.csv')
        write_metrics(other, [0.9])
        metrics = [report.load_metrics(os.path.join(run_dir, 'metrics.csv')), report.load_metrics(other)]
        chart = report.build_chart(metrics, ['purity', 'top1'], 'two')
        assert [s.label for s in chart.series] == [
            'metrics: purity', 'metrics: top1', 'other: purity', 'other: top1',
        ]
        assert len({s.color for s in chart.series}) == 4


class TestRender:

    def test_plot_is_svg(self, run_dir):
        svg = report.render_plot(
            [report.load_metrics(os.path.join(run_dir, 'metrics.csv'))],
            ['purity', 'test_error'],
            'Curves & more',
        )
        root = ET.fromstring(svg)
        assert root.tag == SVG + 'svg'
        assert len(root.findall(SVG + 'polyline')) == 2
        assert root.find(SVG + 'title').text == 'Curves & more'

    def test_nothing_to_plot(self):
        with pytest.raises(report.ReportError):
            report.render_plot([], ['purity'])

    def test_report(self, run_dir):
        html = report.render_report(run_dir)
        assert '<title>desk_full</title>' in html
        assert 'class="highlight"' in html
        assert 'No final checkpoint' in html
        assert html.count('<svg') == 3

    def test_report_needs_config(self, tmp_path):
        with pytest.raises(report.ReportError):
            report.render_report(str(tmp_path))

    def test_report_needs_metrics(self, tmp_path):
        (tmp_path / 'config.cfg').write_text('')
        with pytest.raises(report.ReportError):
            report.render_report(str(tmp_path))


def test_num_filter():
    env = report.environment()
    assert env.from_string('{{ 3.0 | num }}').render() == '3'
    assert env.from_string('{{ 0.123456 | num }}').render() == '0.1235'
    assert env.from_string('{{ none | num }}').render() == '–'
