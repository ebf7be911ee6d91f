import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wordqfa.envelopes import (
    EnvelopeError, fit_exp_envelope, fit_power_envelope, linear_fit, loglog_slope,
    prefix_record_minima,
)


@given(st.lists(st.tuples(st.integers(1, 500), st.floats(1e-6, 10.0)), min_size=1, max_size=40))
@settings(max_examples=100, deadline=None)
def test_power_envelope_stays_below_points(points):
    env = fit_power_envelope(points)
    assert env.exponent >= 0
    for x, y in points:
        assert env(x) <= y


def test_power_envelope_recovers_exact_law():
    points = [(n, 3.0 * n ** -2.0) for n in range(1, 50)]
    env = fit_power_envelope(points)
    assert abs(env.exponent - 2.0) < 1e-6 and abs(env.coefficient - 3.0) < 1e-6


def test_flat_data_gives_zero_exponent():
    env = fit_power_envelope([(n, 0.5) for n in range(1, 20)])
    assert env.exponent == 0.0 and env.coefficient <= 0.5


def test_fixed_exponent_coefficient_is_tight():
    points = [(1, 1.0), (2, 0.3), (4, 0.2)]
    env = fit_power_envelope(points, fixed_exponent=1.0)
    assert abs(env.coefficient - min(y * x for x, y in points)) < 1e-9


def test_exp_envelope_base():
    points = [(n, 4.0 ** -n) for n in range(1, 10)]
    env = fit_exp_envelope(points)
    assert abs(env.base - 4.0) < 1e-9
    assert all(env(x) <= y for x, y in points)


def test_invalid_points():
    with pytest.raises(EnvelopeError):
        fit_power_envelope([])
    with pytest.raises(EnvelopeError):
        fit_exp_envelope([(1, 0.0)])
    with pytest.raises(EnvelopeError):
        fit_power_envelope([(0.5, 1.0)])


def test_linear_fit_matches_numpy():
    xs = np.arange(10.0)
    ys = 2.5 * xs - 1 + np.sin(xs) * 0.1
    slope, intercept, r2 = linear_fit(xs, ys)
    ref = np.polyfit(xs, ys, 1)
    assert math.isclose(slope, ref[0]) and math.isclose(intercept, ref[1])
    assert 0.99 < r2 <= 1.0


def test_loglog_slope_of_power_law():
    xs = [10, 20, 40, 80]
    slope, _, r2 = loglog_slope(xs, [x ** 2.5 for x in xs])
    assert abs(slope - 2.5) < 1e-12 and abs(r2 - 1) < 1e-12


def test_prefix_record_minima():
    assert prefix_record_minima([(3, 0.5), (1, 1.0), (2, 0.7), (4, 0.6)]) == \
        [(1, 1.0), (2, 0.7), (3, 0.5)]
