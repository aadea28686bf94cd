"""ARIMA(p, d, q) by conditional sum of squares, and the persistence forecaster."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import comb

from . import backend
from .errors import ConfigError, FitError, InsufficientDataError

log = logging.getLogger(__name__)

MAX_ORDER = 5


class NonStationaryWarning(UserWarning):
    """Fitted AR polynomial has a root on or inside the unit circle."""


def difference(series, d: int):
    """Apply ``d`` first differences."""
    s = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise ConfigError("d must be non-negative")
    if len(s) <= d:
        raise InsufficientDataError(f"series of length {len(s)} cannot be differenced {d} times")
    for _ in range(d):
        s = np.diff(s)
    return s


def anchors(series, d: int):
    """The values ``undifference`` needs: the first element of each
    intermediate differenced series, outermost first."""
    s = np.asarray(series, dtype=np.float64)
    out = []
    for _ in range(d):
        out.append(s[0])
        s = np.diff(s)
    return np.array(out)


def undifference(diffed, anchor_values):
    """Invert ``difference`` given the values returned by :func:`anchors`."""
    s = np.asarray(diffed, dtype=np.float64)
    for a in reversed(np.asarray(anchor_values, dtype=np.float64)):
        s = np.concatenate([[a], a + np.cumsum(s)])
    return s


def lagged(x, lag=1, fill=0.0):
    """Shift ``x`` forward by ``lag`` steps, so entry t holds x[t - lag]."""
    x = np.asarray(x, dtype=np.float64)
    if lag == 0:
        return x.copy()
    return np.concatenate([np.full(lag, fill), x[:-lag]])


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        for name in ("p", "d", "q"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0 or v > MAX_ORDER:
                raise ConfigError(f"ARIMA {name} must be an integer in [0, {MAX_ORDER}], got {v!r}")

    @classmethod
    def parse(cls, text):
        try:
            p, d, q = (int(t) for t in str(text).replace(" ", "").strip("()").split(","))
        except ValueError:
            raise ConfigError(f"ARIMA order must look like 'p,d,q', got {text!r}") from None
        return cls(p, d, q)

    def __str__(self):
        return f"({self.p},{self.d},{self.q})"


@dataclass
class ArimaModel:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    sigma2: float
    beta: float = 0.0
    use_intercept: bool = True
    use_exog: bool = False
    converged: bool = True
    iterations: int = 0
    stationary: bool = True
    trace: list = field(default_factory=list, repr=False)

    def residuals(self, w, xw=None):
        return backend.css_residuals(w, self.phi, self.theta, self.intercept, self.order.p,
                                     xw, self.beta)

    def forecast_next(self, y, x=None):
        """One-step forecast of the value after ``y``.

        ``x`` (exogenous) must have ``len(y) + 1`` entries when the model
        uses one; the last entry is the regressor for the forecast step.
        """
        y = np.asarray(y, dtype=np.float64)
        p, d = self.order.p, self.order.d
        w = difference(y, d)
        xw = None
        if self.use_exog:
            if x is None or len(x) != len(y) + 1:
                raise ConfigError("exogenous series must extend one step past the history")
            xw = np.asarray(x, dtype=np.float64)[d:]
        e = self.residuals(w, xw[:-1] if xw is not None else None)
        n = len(w)
        f = self.intercept
        for i in range(p):
            if n - 1 - i >= 0:
                f += self.phi[i] * w[n - 1 - i]
        for j in range(len(self.theta)):
            if n - 1 - j >= 0:
                f += self.theta[j] * e[n - 1 - j]
        if xw is not None:
            f += self.beta * xw[-1]
        # undo the differencing: y_{t+1} = w_{t+1} + sum_j (-1)^{j+1} C(d,j) y_{t+1-j}
        for j in range(1, d + 1):
            f += (-1) ** (j + 1) * comb(d, j, exact=True) * y[-j]
        return float(f)


def _needs_intercept(order, trend):
    if trend == "auto":
        return not (order.d > 0 and order.p == 0 and order.q == 0)
    if trend in ("c", True):
        return True
    if trend in ("n", False, None):
        return False
    raise ConfigError(f"trend must be 'auto', 'c' or 'n', got {trend!r}")


def _is_stationary(phi):
    if not len(phi):
        return True
    roots = np.roots(np.concatenate([-np.asarray(phi)[::-1], [1.0]]))
    return bool(np.all(np.abs(roots) > 1.0))


def fit_css(series, order: ArimaOrder, exog=None, trend="auto", maxiter=None) -> ArimaModel:
    """Conditional-sum-of-squares fit by Nelder-Mead from a zero start.

    Pre-sample innovations are zero and the first ``p`` differenced values
    are conditioned on.  ``exog`` is aligned with ``series`` and enters the
    differenced equation with one coefficient.
    """
    y = np.asarray(series, dtype=np.float64)
    p, d, q = order.p, order.d, order.q
    w = difference(y, d)
    use_c = _needs_intercept(order, trend)
    use_x = exog is not None
    xw = np.asarray(exog, dtype=np.float64)[d:] if use_x else None
    if use_x and len(xw) != len(w):
        raise ConfigError("exog must have the same length as the series")
    k = p + q + int(use_c) + int(use_x)
    if len(w) < 10 * (p + q + 1):
        raise InsufficientDataError(
            f"ARIMA{order} needs {10 * (p + q + 1)} differenced points, got {len(w)}")
    m = len(w) - p
    scale = float(np.var(w)) or 1.0

    def unpack(x):
        phi, theta = x[:p], x[p:p + q]
        c = x[p + q] if use_c else 0.0
        b = x[k - 1] if use_x else 0.0
        return phi, theta, c, b

    def objective(x):
        phi, theta, c, b = unpack(x)
        e = backend.css_residuals(w, phi, theta, c, p, xw, b)
        val = float(np.dot(e, e)) / (m * scale)
        return val if math.isfinite(val) else 1e300

    x0 = np.zeros(k)
    trace = []
    converged, iterations = True, 0
    if k:
        simplex = np.vstack([x0] + [x0 + np.eye(k)[i] * _step(i, p, q, use_c, w, xw)
                                    for i in range(k)])
        res = minimize(objective, x0, method="Nelder-Mead",
                       callback=lambda xk: trace.append(objective(xk)),
                       options={"initial_simplex": simplex, "xatol": 1e-8, "fatol": 1e-12,
                                "maxiter": maxiter or 2000 * k, "maxfev": 4000 * k})
        x, converged, iterations = res.x, bool(res.success), int(res.nit)
    else:
        x = x0
    phi, theta, c, b = unpack(x)
    e = backend.css_residuals(w, phi, theta, c, p, xw, b)
    model = ArimaModel(order, np.array(phi), np.array(theta), float(c),
                       float(np.dot(e, e)) / m, float(b), use_c, use_x, converged,
                       iterations, _is_stationary(phi), trace)
    if not converged:
        raise FitError(f"ARIMA{order}: Nelder-Mead did not converge in {iterations} "
                       "iterations", best=model)
    if not model.stationary:
        warnings.warn(f"ARIMA{order}: fitted AR polynomial is not stationary",
                      NonStationaryWarning, stacklevel=2)
    return model


def _step(i, p, q, use_c, w, xw):
    if i < p + q:
        return 0.1
    if use_c and i == p + q:
        return 0.1 * (float(np.std(w)) or 1.0) + 0.1 * abs(float(np.mean(w)))
    sx = float(np.std(xw)) or 1.0
    return 0.1 * (float(np.std(w)) or 1.0) / sx


def forecast_walk(order: ArimaOrder, history, test, refit_every=10, exog=None, trend="auto"):
    """Walk-forward one-step forecasts over ``test``.

    Each forecast uses every observation revealed so far; the model is refit
    every ``refit_every`` steps.  ``exog`` covers history and test together.
    """
    if refit_every < 1:
        raise ConfigError("refit_every must be >= 1")
    history = np.asarray(history, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    full = np.concatenate([history, test])
    x = None
    if exog is not None:
        x = np.asarray(exog, dtype=np.float64)
        if len(x) != len(full):
            raise ConfigError("exog must cover history and test")
    h = len(history)
    preds = np.empty(len(test))
    model = None
    for i in range(len(test)):
        seen = full[:h + i]
        if i % refit_every == 0:
            try:
                model = fit_css(seen, order, None if x is None else x[:h + i], trend)
            except FitError as exc:
                raise FitError(f"step {i}: {exc}", best=exc.best) from exc
        preds[i] = model.forecast_next(seen, None if x is None else x[:h + i + 1])
    return preds


def persistence(history):
    """Tomorrow equals today."""
    if len(history) == 0:
        raise InsufficientDataError("persistence needs a non-empty history")
    return float(history[-1])


def persistence_walk(history, test):
    """Walk-forward persistence forecasts aligned with ``test``."""
    if len(history) == 0:
        raise InsufficientDataError("persistence needs a non-empty history")
    return np.concatenate([[history[-1]], np.asarray(test, dtype=np.float64)[:-1]])
