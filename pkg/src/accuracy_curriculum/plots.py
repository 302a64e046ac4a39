"""Static SVG line charts for the three training summaries.

* ``success.svg``: success rate at the tightest accuracy vs steps, one mean
  line per strategy with a +/- 1 std band over seeds.
* ``progress.svg``: competence progress per accuracy level vs steps, averaged
  over seeds of the active strategy (or the first strategy found if none is active).
* ``proportions.svg``: share of each accuracy level among training episodes
  started in a trailing window, stacked to 1, for the same strategy.

The SVG text depends only on the input records, so regenerating from the
same CSVs gives identical bytes.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .harness import find_strategy_dirs, load_strategy_dir

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
STRATEGY_COLORS = {"baseline": "#7f7f7f", "random": "#1f77b4", "active": "#d62728"}
PROPORTION_WINDOW = 10_000

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 64, 150, 36, 48


def _num(x: float) -> str:
    return format(x, ".2f")


class Chart:
    def __init__(self, title, xlabel, ylabel, xmax, ymin=0.0, ymax=1.0):
        self.xmax = float(xmax) if xmax > 0 else 1.0
        self.ymin, self.ymax = float(ymin), float(ymax) if ymax > ymin else float(ymin) + 1.0
        self.parts = []
        self.legend = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def px(self, x):
        return LEFT + (W - LEFT - RIGHT) * (x / self.xmax)

    def py(self, y):
        return H - BOTTOM - (H - TOP - BOTTOM) * ((y - self.ymin) / (self.ymax - self.ymin))

    def _points(self, xs, ys):
        return " ".join(f"{_num(self.px(x))},{_num(self.py(y))}" for x, y in zip(xs, ys))

    def line(self, xs, ys, color, label=None, cls="mean"):
        self.parts.append(f'<polyline class="{cls}" fill="none" stroke="{color}" '
                          f'stroke-width="1.8" points="{self._points(xs, ys)}"/>')
        if label is not None:
            self.legend.append((label, color))

    def band(self, xs, lo, hi, color, opacity=0.2, label=None, cls="band"):
        pts = self._points(list(xs) + list(xs)[::-1], list(hi) + list(lo)[::-1])
        self.parts.append(f'<polygon class="{cls}" fill="{color}" fill-opacity="{opacity}" '
                          f'stroke="none" points="{pts}"/>')
        if label is not None:
            self.legend.append((label, color))

    def _axes(self):
        out = []
        x0, x1 = self.px(0), self.px(self.xmax)
        y0, y1 = self.py(self.ymin), self.py(self.ymax)
        out.append(f'<rect x="{_num(x0)}" y="{_num(y1)}" width="{_num(x1 - x0)}" '
                   f'height="{_num(y0 - y1)}" fill="none" stroke="#333"/>')
        for k in range(6):
            xv = self.xmax * k / 5
            x = self.px(xv)
            out.append(f'<line x1="{_num(x)}" y1="{_num(y0)}" x2="{_num(x)}" y2="{_num(y0 + 4)}" stroke="#333"/>')
            out.append(f'<text x="{_num(x)}" y="{_num(y0 + 17)}" text-anchor="middle">{_tick(xv)}</text>')
            yv = self.ymin + (self.ymax - self.ymin) * k / 5
            y = self.py(yv)
            out.append(f'<line x1="{_num(x0 - 4)}" y1="{_num(y)}" x2="{_num(x0)}" y2="{_num(y)}" stroke="#333"/>')
            out.append(f'<text x="{_num(x0 - 7)}" y="{_num(y + 4)}" text-anchor="end">{format(yv, ".3g")}</text>')
        cx = (x0 + x1) / 2
        out.append(f'<text x="{_num(cx)}" y="{H - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        cy = (y0 + y1) / 2
        out.append(f'<text x="16" y="{_num(cy)}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {_num(cy)})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{_num(cx)}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        return out

    def _legend(self):
        out = []
        x = W - RIGHT + 14
        for i, (label, color) in enumerate(self.legend):
            y = TOP + 10 + 20 * i
            out.append(f'<rect x="{x}" y="{y - 9}" width="14" height="10" fill="{color}"/>')
            out.append(f'<text x="{x + 20}" y="{y}">{escape(label)}</text>')
        return out

    def svg(self) -> str:
        body = "\n".join([*self._axes(), *self.parts, *self._legend()])
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">\n'
                f'<rect width="{W}" height="{H}" fill="white"/>\n{body}\n</svg>\n')


def _tick(v):
    if v >= 1000:
        return f"{v / 1000:g}k"
    return f"{v:g}"


def success_series(evals, epsilon):
    """``steps, mean, std`` of success rate at ``epsilon`` over seeds."""
    by_step: dict[int, list[float]] = {}
    for r in evals:
        if np.isclose(r.epsilon, epsilon):
            by_step.setdefault(r.step, []).append(r.success_rate)
    steps = sorted(by_step)
    vals = [np.array(by_step[s]) for s in steps]
    return steps, [float(v.mean()) for v in vals], [float(v.std()) for v in vals]


def progress_series(evals, epsilon):
    """``steps, mean cp`` at ``epsilon`` over seeds, skipping unavailable values."""
    by_step: dict[int, list[float]] = {}
    for r in evals:
        if np.isclose(r.epsilon, epsilon) and r.cp is not None:
            by_step.setdefault(r.step, []).append(r.cp)
    steps = sorted(by_step)
    return steps, [float(np.mean(by_step[s])) for s in steps]


def sampling_proportions(samples, accuracies, steps, window=PROPORTION_WINDOW):
    """Share of each accuracy among episodes started in ``(x - window, x]``.

    Returns an array of shape ``(len(steps), len(accuracies))``. Rows with no
    episode in the window are uniform.
    """
    acc = np.asarray(accuracies, dtype=np.float64)
    starts = np.array([s.step for s in samples], dtype=np.int64)
    eps = np.array([s.epsilon for s in samples], dtype=np.float64)
    order = np.argsort(starts, kind="stable")
    starts, eps = starts[order], eps[order]
    level = np.argmin(np.abs(eps[:, None] - acc[None, :]), axis=1) if len(eps) else np.zeros(0, int)
    out = np.empty((len(steps), len(acc)))
    for i, x in enumerate(steps):
        lo = np.searchsorted(starts, x - window, side="right")
        hi = np.searchsorted(starts, x, side="right")
        counts = np.bincount(level[lo:hi], minlength=len(acc)).astype(np.float64)
        total = counts.sum()
        out[i] = counts / total if total else 1.0 / len(acc)
    return out


def _accuracies(evals):
    return sorted({r.epsilon for r in evals})


def plot_success(datasets, path, epsilon=None):
    """``datasets``: list of ``(strategy, evals, samples)``."""
    xmax = max((r.step for _, evals, _ in datasets for r in evals), default=1)
    if epsilon is None:
        epsilon = min(a for _, evals, _ in datasets for a in _accuracies(evals))
    chart = Chart(f"Success rate at accuracy {epsilon:g}", "training steps", "success rate", xmax)
    for i, (strategy, evals, _) in enumerate(datasets):
        color = STRATEGY_COLORS.get(strategy, PALETTE[i % len(PALETTE)])
        steps, mean, std = success_series(evals, epsilon)
        m, s = np.array(mean), np.array(std)
        chart.band(steps, np.clip(m - s, 0, 1), np.clip(m + s, 0, 1), color)
        chart.line(steps, mean, color, label=strategy)
    Path(path).write_text(chart.svg())


def plot_progress(evals, path, strategy="active"):
    accs = _accuracies(evals)
    series = [progress_series(evals, e) for e in accs]
    xmax = max((r.step for r in evals), default=1)
    ymax = max((max(v) for _, v in series if v), default=0.0)
    chart = Chart(f"Competence progress ({strategy})", "training steps", "competence progress",
                  xmax, 0.0, ymax * 1.05 if ymax > 0 else 1.0)
    for i, (e, (steps, vals)) in enumerate(zip(accs, series)):
        chart.line(steps, vals, PALETTE[i % len(PALETTE)], label=f"eps={e:g}")
    Path(path).write_text(chart.svg())


def plot_proportions(evals, samples, path, window=PROPORTION_WINDOW, strategy="active"):
    accs = _accuracies(evals)
    steps = sorted({r.step for r in evals})
    props = sampling_proportions(samples, accs, steps, window)
    chart = Chart(f"Sampled accuracy share, {strategy} (window {window:,} steps)", "training steps",
                  "proportion", max(steps, default=1))
    lower = np.zeros(len(steps))
    for i, e in enumerate(accs):
        upper = lower + props[:, i]
        chart.band(steps, lower, upper, PALETTE[i % len(PALETTE)], opacity=0.75,
                   label=f"eps={e:g}", cls="stack")
        lower = upper
    Path(path).write_text(chart.svg())


def emit_plots(inputs, out_dir) -> list[Path]:
    """Write the three SVGs for the strategy directories found under ``inputs``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets = [load_strategy_dir(d) for d in find_strategy_dirs(inputs)]
    if not datasets:
        raise FileNotFoundError(f"no eval.csv found under {', '.join(map(str, inputs))}")
    datasets.sort(key=lambda d: d[0])
    written = [out_dir / "success.svg", out_dir / "progress.svg", out_dir / "proportions.svg"]
    plot_success(datasets, written[0])
    # progress and proportions describe the active curriculum; fall back to the first strategy
    strategy, evals, samples = next((d for d in datasets if d[0] == "active"), datasets[0])
    plot_progress(evals, written[1], strategy)
    plot_proportions(evals, samples, written[2], strategy=strategy)
    return written
