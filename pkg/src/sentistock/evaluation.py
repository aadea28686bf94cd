"""Classification and regression metrics, correlation, Q-Q diagnostics and
risk/return summaries, plus their CSV / JSON / SVG writers."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from html import escape

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateError, InsufficientDataError, ShapeError
from .sentiment import SentimentLabel

LABEL_ORDER = (SentimentLabel.POSITIVE, SentimentLabel.NEUTRAL, SentimentLabel.NEGATIVE)
REPORT_VERSION = 1


def _label(x):
    return x if isinstance(x, SentimentLabel) else SentimentLabel.parse(x)


@dataclass
class ConfusionMatrix3:
    """Counts indexed ``[actual, predicted]`` in positive/neutral/negative order."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    def to_rows(self):
        return [[lab.value] + [int(c) for c in row] for lab, row in zip(LABEL_ORDER, self.counts)]

    def format(self):
        corner = "actual / predicted"
        head = f"{corner:>20}" + "".join(f"{lab.value:>10}" for lab in LABEL_ORDER)
        lines = [head]
        for row in self.to_rows():
            lines.append(f"{row[0]:>20}" + "".join(f"{c:>10d}" for c in row[1:]))
        return "\n".join(lines)


@dataclass
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict
    zero_division: list = field(default_factory=list)

    def to_dict(self):
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "per_class": self.per_class,
                "zero_division": self.zero_division}


def _safe_div(a, b):
    return a / b if b else 0.0


def confusion_and_classification(actual, predicted):
    """Confusion matrix, accuracy and support-weighted precision/recall/F1.

    A class whose precision or recall has a zero denominator contributes 0
    and is listed in ``zero_division``.
    """
    actual = [_label(a) for a in actual]
    predicted = [_label(p) for p in predicted]
    if len(actual) != len(predicted):
        raise ShapeError(f"{len(actual)} actual labels vs {len(predicted)} predicted")
    if not actual:
        raise InsufficientDataError("no labels to evaluate")
    index = {lab: i for i, lab in enumerate(LABEL_ORDER)}
    counts = np.zeros((3, 3), dtype=np.int64)
    for a, p in zip(actual, predicted):
        counts[index[a], index[p]] += 1
    n = len(actual)
    per_class, flags = {}, []
    wp = wr = wf = 0.0
    for i, lab in enumerate(LABEL_ORDER):
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum()) - tp
        fn = int(counts[i, :].sum()) - tp
        support = tp + fn
        if tp + fp == 0 or support == 0:
            flags.append(lab.value)
        prec = _safe_div(tp, tp + fp)
        rec = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * prec * rec, prec + rec)
        per_class[lab.value] = {"precision": prec, "recall": rec, "f1": f1, "support": support}
        wp += prec * support
        wr += rec * support
        wf += f1 * support
    acc = float(np.trace(counts)) / n
    return ConfusionMatrix3(counts), ClassificationReport(acc, wp / n, wr / n, wf / n,
                                                          per_class, flags)


@dataclass
class MetricsReport:
    mae: float
    mse: float
    r2: float
    adjusted_r2: float
    accuracy_pct: float
    n: int
    k: int
    residuals: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {"mae": self.mae, "mse": self.mse, "r2": self.r2,
                "adjusted_r2": self.adjusted_r2, "accuracy_pct": self.accuracy_pct,
                "n": self.n, "k": self.k, **({"metadata": self.metadata} if self.metadata else {})}


def regression_metrics(actual, predicted, k: int, metadata=None) -> MetricsReport:
    """MAE, MSE, R², adjusted R² and ``100 * (1 - MAPE)`` (MAPE over y != 0)."""
    y = np.asarray(actual, dtype=np.float64)
    yhat = np.asarray(predicted, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ShapeError(f"actual {y.shape} and predicted {yhat.shape} must be equal 1-D shapes")
    n = len(y)
    if n <= k + 1:
        raise InsufficientDataError(f"adjusted R² needs n > k + 1 (n={n}, k={k})")
    resid = y - yhat
    mae = float(np.mean(np.abs(resid)))
    mse = float(np.mean(resid * resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("actual values are constant; R² is undefined")
    r2 = 1.0 - float(np.sum(resid * resid)) / ss_tot
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)
    nz = y != 0
    mape = float(np.mean(np.abs(resid[nz]) / np.abs(y[nz]))) if nz.any() else math.nan
    return MetricsReport(mae, mse, r2, adj, 100.0 * (1.0 - mape), n, k, resid,
                         dict(metadata or {}))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"pearson needs equal 1-D inputs, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise InsufficientDataError("pearson needs at least two points")
    # test constancy exactly: x - mean(x) can be a few ulps off zero for a constant x
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateError("correlation is undefined for a constant input")
    dx, dy = x - x.mean(), y - y.mean()
    # rescale so tiny or huge spreads cannot under- or overflow the dot products
    dx, dy = dx / np.abs(dx).max(), dy / np.abs(dy).max()
    sx, sy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    return max(-1.0, min(1.0, float(np.dot(dx, dy)) / math.sqrt(sx * sy)))


def norm_ppf(p: float) -> float:
    """Inverse standard-normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return float(ndtri(p))


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass
class QqSeries:
    theoretical: np.ndarray
    sample: np.ndarray

    def __len__(self):
        return len(self.theoretical)

    def slope(self):
        """Least-squares slope of sample on theoretical quantiles."""
        t = self.theoretical - self.theoretical.mean()
        return float(np.dot(t, self.sample - self.sample.mean()) / np.dot(t, t))


def qq_points(residuals) -> QqSeries:
    """Standardised sorted residuals against ``Phi^-1((i - 0.5) / n)``."""
    r = np.asarray(residuals, dtype=np.float64)
    n = len(r)
    if n < 2:
        raise InsufficientDataError("Q-Q needs at least two residuals")
    sd = float(np.std(r, ddof=1))
    if sd == 0.0:
        raise DegenerateError("residuals are constant; Q-Q plot is degenerate")
    z = np.sort((r - r.mean()) / sd)
    theo = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return QqSeries(theo, z)


def daily_returns(prices):
    p = np.asarray([getattr(b, "adj_close", b) for b in prices], dtype=np.float64)
    return p[1:] / p[:-1] - 1.0


def risk_return(bars):
    """(mean daily simple return, sample std of daily returns)."""
    if len(bars) < 3:
        raise InsufficientDataError(f"risk/return needs at least 3 bars, got {len(bars)}")
    r = daily_returns(bars)
    return float(np.mean(r)), float(np.std(r, ddof=1))


def write_json(obj, path):
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_pairs_csv(path, header, xs, ys):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in zip(xs, ys):
            w.writerow([repr(float(a)) if not isinstance(a, (str, int)) else a, repr(float(b))])


def write_residuals_csv(path, residuals):
    write_pairs_csv(path, ["order", "residual"], range(len(residuals)), residuals)


def write_qq_csv(path, qq: QqSeries):
    write_pairs_csv(path, ["theoretical", "sample"], qq.theoretical, qq.sample)


def scatter_svg(path, xs, ys, title="", xlabel="", ylabel="", labels=None,
                identity_line=False, hline=None, size=(480, 360)):
    """Self-contained SVG scatter plot."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    W, H = size
    pad = 48
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if identity_line:
        x0 = y0 = min(x0, y0)
        x1 = y1 = max(x1, y1)
    if hline is not None:
        y0, y1 = min(y0, hline), max(y1, hline)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (W - 2 * pad)

    def py(v):
        return H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
           f'<text x="{W / 2:.1f}" y="{pad / 2:.1f}" text-anchor="middle">{escape(title)}</text>',
           f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 14 {H / 2:.1f})">{escape(ylabel)}</text>']
    if identity_line:
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(x0):.2f}" x2="{px(x1):.2f}" '
                   f'y2="{py(x1):.2f}" stroke="red"/>')
    if hline is not None:
        out.append(f'<line x1="{pad}" y1="{py(hline):.2f}" x2="{W - pad}" '
                   f'y2="{py(hline):.2f}" stroke="red"/>')
    for i, (a, b) in enumerate(zip(xs, ys)):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="steelblue"/>')
        if labels is not None:
            out.append(f'<text x="{px(a) + 4:.2f}" y="{py(b) - 4:.2f}">'
                       f'{escape(str(labels[i]))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
