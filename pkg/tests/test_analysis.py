import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from wordqfa.analysis import (
    PrecisionError, ScalarSpec, continued_fraction_check, diophantine_scan, identity_word,
    linear_form_scan, mc_vs_analytic, nearest_integer_distance, reverify_witnesses,
    runtime_profile, trace_gap_scan, z_score,
)
from wordqfa.assemble import trivial_machine
from wordqfa.dfr import CertificationError, Dfr, build_named_dfr, constant_tau
from wordqfa.groups import free_abelian_group
from wordqfa.linalg import Matrix, ToleranceProfile
from wordqfa.reps import UnitaryRep


def test_scalar_specs():
    assert ScalarSpec("1/3").rational() == Fraction(1, 3)
    assert ScalarSpec("2**-3 + 1").rational() == Fraction(9, 8)
    assert ScalarSpec("sqrt2").rational() is None
    assert abs(ScalarSpec("zalg").value(128) - mpmath.acos(0.6) / (2 * mpmath.pi)) < 1e-15
    with pytest.raises(ValueError):
        ScalarSpec("__import__('os')").value(64)


def test_rational_alpha_is_flagged():
    report = diophantine_scan("1/3", 10)
    assert report.rational
    assert report.worst_pairs[0] == (3, 0.0)


def test_rotation_angle_scan_is_positive():
    report = diophantine_scan("zalg", 100_000)
    assert not report.rational and report.minimum > 0


def test_scan_minimum_matches_float_brute_force():
    alpha = math.acos(0.6) / (2 * math.pi)
    q = np.arange(1, 20_001)
    frac = np.mod(q * alpha, 1.0)
    dist = np.minimum(frac, 1 - frac)
    report = diophantine_scan("zalg", 20_000)
    assert report.worst_pairs[0][0] == int(q[np.argmin(dist)])
    assert abs(report.minimum - dist.min()) < 1e-9


def test_badly_approximable_exponent():
    report = diophantine_scan("sqrt2", 100_000, continued_fraction=True)
    c, exponent = report.fit
    assert abs(exponent - 1) < 0.1
    assert report.continued_fraction["min_product"] > 0.3


def test_continued_fraction_denominators_are_pell_numbers():
    pell = [1, 2]
    numerators = [1, 3]
    while pell[-1] < 10_000:
        pell.append(2 * pell[-1] + pell[-2])
        numerators.append(2 * numerators[-1] + numerators[-2])
    out = continued_fraction_check("sqrt2", 10_000)
    assert [q for q, _ in out["convergent_products"]] == [q for q in pell if q <= 10_000]
    for (q, product), p in zip(out["convergent_products"], numerators):
        # p^2 - 2 q^2 = +-1, so |q sqrt2 - p| = 1 / (q sqrt2 + p)
        assert abs(product - q / (q * math.sqrt(2) + p)) < 1e-12


def test_precision_doubling_leaves_scan_unchanged():
    low = diophantine_scan("zalg", 50_000, tol=ToleranceProfile(256))
    high = diophantine_scan("zalg", 50_000, tol=ToleranceProfile(512))
    assert [q for q, _ in low.worst_pairs] == [q for q, _ in high.worst_pairs]
    for (_, a), (_, b) in zip(low.worst_pairs, high.worst_pairs):
        assert abs(a - b) <= 2.0 ** (-256 / 2 + 8)


def test_precision_floor_raises():
    with pytest.raises(PrecisionError):
        diophantine_scan("1/3 + exp(-300)", 100)


def test_nearest_integer_distance():
    assert nearest_integer_distance(mpmath.mpf("2.75")) == mpmath.mpf("0.25")
    assert nearest_integer_distance(mpmath.mpf("-1.1")) < mpmath.mpf("0.1000001")


def test_linear_form_scan_matches_brute_force():
    report = linear_form_scan(["sqrt2", "sqrt3", "1"], 4)
    values = [math.sqrt(2), math.sqrt(3), 1.0]
    best = min(abs(sum(c * v for c, v in zip(q, values)))
               for q in itertools.product(range(-4, 5), repeat=3) if any(q))
    assert abs(report.minimum - best) < 1e-12
    assert report.to_json()["restricted_to_box"]


def test_free_group_gap_scan():
    report = trace_gap_scan(build_named_dfr("F2"), 8)
    assert [n for n, _, _ in report.per_length] == list(range(1, 9))
    assert all(v > 0 for _, v, _ in report.per_length)
    assert math.isfinite(report.exp_base) and report.exp_base > 1


def test_integer_gap_scan_first_sphere():
    report = trace_gap_scan(build_named_dfr("ZAlgebraic"), 200)
    assert abs(report.minimum(1) - (2 - 4 / math.sqrt(5))) < 1e-12
    assert report.power is not None
    assert reverify_witnesses(build_named_dfr("ZAlgebraic"), report)


def test_trivial_group_scan_is_vacuous():
    report = trace_gap_scan(build_named_dfr("Trivial"), 4)
    assert report.passed and report.per_length == []


def test_gap_scan_reports_failure():
    group = free_abelian_group(1)
    rep = UnitaryRep(group, [Matrix.diagonal([-1, 1])])
    bad = Dfr(group, (rep,), constant_tau(0.1), True, "parity")
    with pytest.raises(CertificationError):
        trace_gap_scan(bad, 3)
    report = trace_gap_scan(bad, 3, strict=False)
    assert not report.passed and report.failure_witness == (1, 1)


def test_gap_scan_serialization():
    report = trace_gap_scan(build_named_dfr("Zm", m=5), 4)
    assert report.to_json()["per_length"][0]["n"] == 1
    assert report.to_csv().splitlines()[0].startswith("n,")


def test_identity_word_helper():
    assert identity_word(4) == (1, 1, -1, -1)
    with pytest.raises(ValueError):
        identity_word(3)


def test_polynomial_runtime_exponent(z_poly):
    profile = runtime_profile(z_poly, list(range(10, 101, 10)), claim="poly")
    m = z_poly.structure["coin"]["m"]
    assert m + 0.5 <= profile.slope <= m + 1.5
    assert profile.method == "analytic" and not profile.noisy


def test_exponential_runtime_slope(f2_exp):
    profile = runtime_profile(f2_exp, list(range(2, 13, 2)), claim="exp")
    assert profile.slope > 0 and profile.r_squared > 0.99


def test_trivial_runtime_is_flat():
    profile = runtime_profile(trivial_machine(), [2, 4, 8, 16], claim="poly")
    assert abs(profile.slope) < 1e-9


def test_z_score_edge_cases():
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(0.9, 1.0, 0.0) == math.inf
    assert z_score(1.5, 1.0, 0.25) == 2.0


def test_identity_word_monte_carlo_matches_exactly(zm_poly):
    rec = mc_vs_analytic(zm_poly, (1, -1), 5_000, seed=3)
    assert rec.mc_accept == 1.0 and rec.analytic_accept == 1.0 and rec.passed


def test_generator_reconciliation(z_poly):
    rec = mc_vs_analytic(z_poly, (1,), 100_000, seed=12)
    assert abs(rec.z_accept) <= 3 and abs(rec.z_steps) <= 3 and rec.passed


def test_reconciliation_seed_stability(zm_poly):
    a = mc_vs_analytic(zm_poly, (1, 1), 3_000, seed=77)
    b = mc_vs_analytic(zm_poly, (1, 1), 3_000, seed=77)
    assert a.mc_accept == b.mc_accept and a.mc_steps == b.mc_steps
