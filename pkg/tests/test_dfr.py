import math

import numpy as np
import pytest

from wordqfa.dfr import (
    CertificationError, Dfr, DfrError, build_certified, build_named_dfr, certify_and_calibrate,
    certify_dfr, constant_tau, dfr_combine, dfr_overgroup, dfr_pad, dfr_product, element_gap,
    machine_ready, tan_parameters, zm_tau_constant,
)
from wordqfa.groups import build_coset_table, free_abelian_group, is_identity
from wordqfa.linalg import Matrix
from wordqfa.reps import UnitaryRep, character_gap, eval_rep


def test_zm_family():
    f = build_named_dfr("Zm", m=4)
    assert (f.k, f.d) == (1, 2)
    assert np.allclose(f.reps[0].images[0].to_numpy(), np.diag([1j, 1]))
    assert math.isclose(zm_tau_constant(4), 19 * math.pi ** 2 / 384)
    assert abs(f.tau.value(1) - 0.48834) < 1e-5


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6, 7, 8, 12])
def test_zm_tau_bounds_every_gap(m):
    f = build_named_dfr("Zm", m=m)
    for q in range(1, m):
        zero, gap = character_gap(f.reps[0], (1,) * q)
        assert not zero and float(gap) >= zm_tau_constant(m)


def test_zm_rejects_small_modulus():
    with pytest.raises(DfrError):
        build_named_dfr("Zm", m=1)


def test_tan_family():
    assert tan_parameters(2) == [(5, 2, 1), (13, 3, 2)]
    f = build_named_dfr("TanZr", r=2)
    assert np.allclose(f.reps[0].images[0].to_numpy(), np.array([[3, 4], [-4, 3]]) / 5)
    assert np.allclose(f.reps[0].images[1].to_numpy(), np.array([[5, 12], [-12, 5]]) / 13)


def test_f2_family():
    f = build_named_dfr("F2")
    assert f.reps[0].backend == "exact"
    s5 = np.sqrt(5)
    assert np.allclose(f.reps[0].images[0].to_numpy(), np.diag([2 + 1j, 2 - 1j]) / s5)
    assert np.allclose(f.reps[0].images[1].to_numpy(), np.array([[2, 1j], [1j, 2]]) / s5)


def test_product_of_integer_families():
    z = build_named_dfr("ZAlgebraic")
    f = dfr_product(z, z)
    assert (f.k, f.d, f.diagonal) == (2, 2, True)
    assert f.group.generator_count == 2


def test_combine_product():
    z = build_named_dfr("ZAlgebraic")
    c = dfr_combine(dfr_product(z, z))
    assert (c.k, c.d) == (1, 4)


def test_pad_raises_dimension():
    f = dfr_pad(build_named_dfr("F2"), 3)
    assert f.d == 3
    assert eval_rep(f.reps[0], (1,)).rows[2][2] == eval_rep(f.reps[0], ()).rows[2][2]
    with pytest.raises(DfrError):
        dfr_pad(f, 2)


def test_overgroup_family_has_gap_at_generator():
    z = build_named_dfr("ZAlgebraic")
    f = dfr_overgroup(z, build_coset_table(z.group, "2Z_in_Z"))
    assert (f.k, f.d) == (1, 4)
    zero, gap = element_gap(f, (1,))
    assert not zero and gap > 0


def test_f2_certification_at_six():
    report = certify_dfr(build_named_dfr("F2"), 6)
    assert report.passed
    assert report.element_count - 1 == 2 * 3 ** 6 - 2
    assert all(v > 0 for _, v, _ in report.per_length)


def test_f2_certified_at_default_radius():
    f, report = build_certified("F2")
    assert report.radius == 8 and report.passed
    assert f.tau.effective_shape == "ExpLower" and math.isfinite(f.tau.exp_base())
    assert machine_ready(f)


def test_integer_certification():
    f, report = build_certified("ZAlgebraic", radius=100)
    assert all(v > 0 for _, v, _ in report.per_length)
    c1, c2 = f.tau.poly_constants()
    assert c1 > 0 and math.isfinite(c2)
    assert abs(report.per_length[0][1] - (2 - 4 / math.sqrt(5))) < 1e-12
    for n, v, _ in report.per_length:
        assert f.tau.value(n) <= v


def test_trivial_group_certifies_vacuously():
    f, report = build_certified("Trivial", radius=5)
    assert report.passed and report.element_count == 1


def test_unfaithful_family_fails_with_witness():
    group = free_abelian_group(1)
    rep = UnitaryRep(group, [Matrix.diagonal([-1, 1], "bigfloat")])
    bad = Dfr(group, (rep,), constant_tau(0.1), True, "parity")
    with pytest.raises(CertificationError) as err:
        certify_and_calibrate(bad, 4)
    assert err.value.witness is not None
    assert not is_identity(group, err.value.witness)


def test_declared_model_violation_detected():
    f = build_named_dfr("Zm", m=6)
    inflated = Dfr(f.group, f.reps, constant_tau(1.5), True, "inflated")
    report = certify_dfr(inflated, 6)
    assert not report.passed and report.violations


def test_shalen_family_structure():
    f = build_named_dfr("ShalenZFreeZr", r=2)
    assert f.reps[0].projective and f.tau.kind == "Unbounded"
    assert f.reps[0].backend == "bigfloat"
    assert all(m.is_unitary() for m in f.reps[0].images)


@pytest.mark.parametrize("name,params", [
    ("Fr", {"r": 3}), ("AbelianAlgebraic", {"r": 1, "moduli": (3,)}),
    ("DirectProductOfFrees", {"ranks": (1, 1)}), ("ZNonAlgebraic", {"delta": 0.9}),
])
def test_other_families_certify(name, params):
    f, report = build_certified(name, radius=3, **params)
    assert report.passed and f.certified


def test_dfr_json_roundtrip():
    f = build_certified("Zm", m=4)[0]
    again = Dfr.from_json(f.to_json())
    assert again.structurally_equal(f) and again.certified
