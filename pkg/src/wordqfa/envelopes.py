"""Lower-envelope fits certified on scanned data (linear programming in log space)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class PowerEnvelope:
    """y >= coefficient * x**(-exponent) on every fitted point."""

    coefficient: float
    exponent: float

    def __call__(self, x):
        return self.coefficient * float(x) ** (-self.exponent)


@dataclass(frozen=True)
class ExpEnvelope:
    """y >= base**(-x) on every fitted point."""

    base: float

    def __call__(self, x):
        return self.base ** (-float(x))


def _clean(points):
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise EnvelopeError("no points to fit")
    if any(x < 1 for x, _ in pts):
        raise EnvelopeError("envelope abscissae must be >= 1")
    if any(not y > 0 for _, y in pts):
        raise EnvelopeError("envelope needs strictly positive ordinates")
    return pts


def fit_power_envelope(points: Sequence[tuple], fixed_exponent: float | None = None,
                       slack: float = 1e-12) -> PowerEnvelope:
    """Largest power-law lower envelope in the log-sum sense.

    Maximizes sum_i (log c - D log x_i) subject to log c - D log x_i <= log y_i
    and D >= 0.  A tiny slack keeps the result strictly below every point
    despite floating-point rounding in the solver."""
    pts = _clean(points)
    lx = np.array([math.log(x) for x, _ in pts])
    ly = np.array([math.log(y) for _, y in pts])
    if fixed_exponent is not None:
        log_c = float(np.min(ly + fixed_exponent * lx)) - slack
        env = PowerEnvelope(math.exp(log_c), float(fixed_exponent))
    else:
        n = len(pts)
        # variables: (log c, D); minimize -n log c + D sum(lx), tiny tie-break on D
        cost = np.array([-float(n), float(lx.sum()) + 1e-9])
        a_ub = np.column_stack([np.ones(n), -lx])
        res = linprog(cost, A_ub=a_ub, b_ub=ly - slack,
                      bounds=[(None, None), (0.0, None)], method="highs")
        if res.status != 0:
            raise EnvelopeError(f"power envelope fit failed: {res.message}")
        log_c, expo = float(res.x[0]), float(res.x[1])
        if expo < 1e-9:
            expo = 0.0
        # re-tighten the coefficient for the chosen exponent
        log_c = min(log_c, float(np.min(ly + expo * lx)) - slack)
        env = PowerEnvelope(math.exp(log_c), expo)
    _assert_below(env, pts)
    return env


def fit_exp_envelope(points: Sequence[tuple]) -> ExpEnvelope:
    """Smallest base C >= 1 with C**(-x) <= y on every point."""
    pts = _clean(points)
    base = 1.0
    for x, y in pts:
        if y < 1:
            base = max(base, y ** (-1.0 / x))
    base *= 1 + 1e-12
    env = ExpEnvelope(base)
    _assert_below(env, pts)
    return env


def _assert_below(env, pts):
    for x, y in pts:
        if env(x) > y:
            raise EnvelopeError(f"envelope violates the point ({x}, {y})")


def prefix_record_minima(points: Sequence[tuple]) -> list[tuple]:
    """Points whose ordinate is a strict running minimum in abscissa order."""
    out = []
    best = math.inf
    for x, y in sorted(points):
        if y < best:
            out.append((x, y))
            best = y
    return out


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of log y against log x."""
    return linear_fit([math.log(x) for x in xs], [math.log(y) for y in ys])


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
