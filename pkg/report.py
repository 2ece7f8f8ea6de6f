#!/usr/bin/env python3

"""
report

Renders metrics files as SVG line charts and run directories as HTML
reports (highlighted resolved config, final metrics, embedded charts).
"""
import argparse
import math
import os
import sys

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import jinja2 as jj
from markupsafe import Markup
from pygments import highlight
from pygments.formatters import HtmlFormatter
from pygments.lexers import PropertiesLexer

from metrics.csvlog import COLUMNS, MetricsFormatError, read_metrics
from trainer.loop import CONFIG_FILE, FINAL_CHECKPOINT

PROJECT_DIR = os.path.dirname(os.path.abspath(__file__))
TEMPLATE_DIR = os.path.join(PROJECT_DIR, 'data', 'templates')

PALETTE = (
    '#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd',
    '#8c564b', '#e377c2', '#7f7f7f', '#bcbd22', '#17becf',
)
DEFAULT_COLUMNS = ('purity', 'top1', 'test_error')


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    path: str
    rows: List[Dict[str, Optional[float]]]

    @property
    def name(self) -> str:
        return os.path.splitext(os.path.basename(self.path))[0]

    def points(self, column: str) -> List[Tuple[float, float]]:
        if column not in COLUMNS:
            raise ReportError(f"Unknown metrics column: {column}")
        return [
            (row['iteration'], row[column])
            for row in self.rows
            if row[column] is not None and math.isfinite(row[column])
        ]

    def final(self, column: str) -> Optional[float]:
        points = self.points(column)
        return points[-1][1] if points else None


def load_metrics(path: str) -> Metrics:
    try:
        return Metrics(path, read_metrics(path))
    except (OSError, MetricsFormatError) as e:
        raise ReportError(f"Cannot read metrics from {path}: {e}") from None


@dataclass(frozen=True)
class Series:
    label: str
    color: str
    points: List[Tuple[float, float]]


@dataclass(frozen=True)
class Chart:
    title: str
    width: int
    height: int
    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    series: List[Series]
    margin_left: int = 60
    margin_right: int = 20
    margin_top: int = 40
    margin_bottom: int = 50

    @property
    def plot_width(self) -> int:
        return self.width - self.margin_left - self.margin_right

    @property
    def plot_height(self) -> int:
        return self.height - self.margin_top - self.margin_bottom

    def x(self, value: float) -> float:
        lo, hi = self.x_range
        return self.margin_left + (value - lo) / (hi - lo) * self.plot_width

    def y(self, value: float) -> float:
        lo, hi = self.y_range
        return self.margin_top + (1.0 - (value - lo) / (hi - lo)) * self.plot_height

    def polyline(self, series: Series) -> str:
        return ' '.join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in series.points)

    def x_ticks(self, count: int = 5) -> List[float]:
        return _ticks(self.x_range, count)

    def y_ticks(self, count: int = 5) -> List[float]:
        return _ticks(self.y_range, count)


def _ticks(bounds: Tuple[float, float], count: int) -> List[float]:
    lo, hi = bounds
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _bounds(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    if lo == hi:
        return lo - 0.5, hi + 0.5
    return lo, hi


def build_chart(
    metrics: Sequence[Metrics],
    columns: Sequence[str],
    title: str,
    width: int = 640,
    height: int = 400,
) -> Chart:
    series: List[Series] = []
    for m in metrics:
        for column in columns:
            label = column if len(metrics) == 1 else f"{m.name}: {column}"
            color = PALETTE[len(series) % len(PALETTE)]
            series.append(Series(label, color, m.points(column)))
    xs = [x for s in series for x, _ in s.points]
    ys = [y for s in series for _, y in s.points]
    return Chart(title, width, height, _bounds(xs), _bounds(ys), series)


@jj.pass_environment
def pygmentize(env: jj.Environment, text: str) -> str:
    assert env.autoescape

    lexer = PropertiesLexer(stripall=True)
    formatter = HtmlFormatter()
    html = highlight(text, lexer, formatter)
    return Markup(html)


@jj.pass_environment
def num(env: jj.Environment, value: Optional[float]) -> str:
    if value is None:
        return '–'
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"


def environment() -> jj.Environment:
    env = jj.Environment(
        loader=jj.FileSystemLoader(TEMPLATE_DIR),
        autoescape=jj.select_autoescape(['html', 'htm', 'xml', 'svg']),
    )
    env.filters['pygmentize'] = pygmentize
    env.filters['num'] = num
    return env


def render_plot(
    metrics: Sequence[Metrics],
    columns: Sequence[str],
    title: str = "Training curves",
) -> str:
    if not metrics:
        raise ReportError("Nothing to plot")
    chart = build_chart(metrics, columns, title)
    return environment().get_template('plot.svg').render(chart=chart)


def render_report(run_dir: str, title: Optional[str] = None) -> str:
    config_path = os.path.join(run_dir, CONFIG_FILE)
    if not os.path.exists(config_path):
        raise ReportError(f"{run_dir} holds no {CONFIG_FILE}")
    with open(config_path, 'r') as fp:
        config_text = fp.read()

    runs = [
        load_metrics(os.path.join(run_dir, fn))
        for fn in sorted(os.listdir(run_dir))
        if fn.endswith('.csv')
    ]
    if not runs:
        raise ReportError(f"{run_dir} holds no metrics file")

    charts = {
        'Losses': render_plot(runs, ('l_s', 'l_u', 'l_m', 'l_cm'), "Losses"),
        'Pseudo-labels': render_plot(runs, ('purity', 'reliability', 'top1', 'top2'), "Pseudo-labels"),
        'Test error': render_plot(runs, ('test_error',), "Test error"),
    }
    summary = [
        (m.name, {column: m.final(column) for column in COLUMNS})
        for m in runs
    ]
    return environment().get_template('run_report.htm').render(
        title=title or os.path.basename(os.path.normpath(run_dir)),
        pygments_css=Markup(HtmlFormatter().get_style_defs()),
        config=config_text,
        columns=COLUMNS,
        summary=summary,
        charts={name: Markup(svg) for name, svg in charts.items()},
        has_checkpoint=os.path.exists(os.path.join(run_dir, FINAL_CHECKPOINT)),
    )


def main():
    parser = argparse.ArgumentParser(
        "Render training metrics as SVG charts or HTML run reports."
    )
    parser.add_argument('-t', '--title', default=None, help="The title of the chart or report.")
    sub = parser.add_subparsers(dest='kind', required=True)

    plot = sub.add_parser('plot', help="SVG line chart of metrics columns.")
    plot.add_argument(
        '-c', '--columns',
        default=','.join(DEFAULT_COLUMNS),
        help="Comma-separated metrics columns. (default '%(default)s')",
    )
    plot.add_argument('metrics', nargs='+', help="Metrics CSV files written by training runs.")
    plot.add_argument('-o', '--output', required=True, help="The generated SVG file.")

    html = sub.add_parser('html', help="HTML report of one run directory.")
    html.add_argument('run_dir', help="Run directory written by a training run.")
    html.add_argument('-o', '--output', required=True, help="The generated HTML report.")

    args = parser.parse_args()

    try:
        if args.kind == 'plot':
            columns = [c.strip() for c in args.columns.split(',') if c.strip()]
            output = render_plot(
                [load_metrics(path) for path in args.metrics],
                columns,
                args.title or "Training curves",
            )
        else:
            output = render_report(args.run_dir, args.title)
    except ReportError as e:
        print(f"{e}", file=sys.stderr)
        sys.exit(1)

    with open(args.output, 'w') as fp:
        fp.write(output)


if __name__ == '__main__':
    main()
