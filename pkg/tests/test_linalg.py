from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wordqfa.dfr import f2_images
from wordqfa.exact import ONE, ZERO, I_UNIT, Exact, exact_cos_sin_24, exact_root_of_unity
from wordqfa.linalg import (
    BIGFLOAT, AmplitudeClass, Matrix, MeasurementPartition, StateVector, apply, dft_matrix,
    join_class, kron, mat_mul, measure, permutation_matrix, transition_unitary, uniform_state,
)

Z_ENTRY = Exact.from_rational(Fraction(3, 5), Fraction(4, 5))
EPS = mpmath.mpf(2) ** -128


def test_exact_field_arithmetic():
    r2 = Exact.sqrt(2)
    assert r2 * r2 == Exact.from_rational(2)
    assert (r2 + ONE) * (r2 - ONE) == ONE
    assert (Z_ENTRY * Z_ENTRY.conjugate()) == ONE
    assert Z_ENTRY * Z_ENTRY.inverse() == ONE
    assert I_UNIT * I_UNIT == -ONE
    assert Exact.sqrt(6) == Exact.sqrt(2) * Exact.sqrt(3)


def test_exact_sign_of_real_surds():
    assert (Exact.sqrt(2) - Exact.from_rational(Fraction(141, 100))).sign() == 1
    assert (Exact.sqrt(3) + Exact.sqrt(2) - Exact.sqrt(10)).sign() == -1
    assert ZERO.sign() == 0


def test_exact_numeric_value_agrees_with_mpmath():
    value = (Exact.sqrt(5) + Exact.sqrt(3) * I_UNIT) * Z_ENTRY
    expected = (mpmath.sqrt(5) + 1j * mpmath.sqrt(3)) * mpmath.mpc(0.6, 0.8)
    with mpmath.workprec(256):
        assert abs(value.to_mpc(256) - expected) < 1e-15


@pytest.mark.parametrize("m", [2, 3, 4, 6, 8, 12, 24])
def test_exact_roots_of_unity(m):
    zeta = exact_root_of_unity(1, m)
    power = ONE
    for _ in range(m):
        power = power * zeta
    assert power == ONE
    assert abs(complex(zeta.to_mpc(64)) - np.exp(2j * np.pi / m)) < 1e-12


def test_exact_cos_sin_is_on_unit_circle():
    for k in range(24):
        c, s = exact_cos_sin_24(k)
        assert c * c + s * s == ONE


def test_exact_json_roundtrip():
    value = Exact.sqrt(3) * Z_ENTRY + Exact.from_rational(Fraction(-1, 7))
    assert Exact.from_json(value.to_json()) == value


def test_identity_times_matrix():
    m = f2_images()[1]
    assert mat_mul(Matrix.identity(2), m).equals(m)


def test_exact_square_of_diagonal():
    m = Matrix.diagonal([Z_ENTRY, ONE])
    sq = mat_mul(m, m)
    assert sq.rows[0][0] == Exact.from_rational(Fraction(-7, 25), Fraction(24, 25))
    assert sq.rows[1][1] == ONE and sq.rows[0][1] == ZERO


def test_inverse_pair_multiplies_to_identity():
    for m in f2_images():
        assert mat_mul(m, m.dagger()).equals(Matrix.identity(2))
        assert m.is_unitary()


def test_bigfloat_product_matches_numpy():
    a, b = (m.to_bigfloat() for m in f2_images())
    prod = mat_mul(a, b)
    assert prod.backend == BIGFLOAT
    assert np.allclose(prod.to_numpy(), a.to_numpy() @ b.to_numpy())


def test_kron_dimension_and_values():
    a, b = f2_images()
    k = kron(a, b)
    assert k.dim == 4
    assert np.allclose(k.to_numpy(), np.kron(a.to_numpy(), b.to_numpy()))


def test_apply_identity_and_diagonal():
    plus = uniform_state(2)
    assert apply(Matrix.identity(2), plus).equals(plus)
    out = apply(Matrix.diagonal([I_UNIT, ONE]), plus)
    h = Exact.sqrt(Fraction(1, 2))
    assert out.amps[0] == I_UNIT * h and out.amps[1] == h


def test_dft_first_column_on_basis_state():
    out = apply(dft_matrix(2), StateVector.basis(2, 0))
    h = Exact.sqrt(Fraction(1, 2))
    assert out.amps == (h, h) or tuple(out.amps) == (h, h)


def test_dft_two_exact():
    f = dft_matrix(2)
    h = Exact.sqrt(Fraction(1, 2))
    assert [list(r) for r in f.rows] == [[h, h], [h, -h]]


@pytest.mark.parametrize("d", range(2, 9))
def test_dft_unitary_and_flat_first_row(d):
    f = dft_matrix(d)
    assert f.is_unitary()
    arr = f.to_numpy()
    assert np.allclose(arr[0], 1 / np.sqrt(d))
    expected = np.array([[np.exp(-2j * np.pi * u * v / d) for v in range(d)]
                         for u in range(d)]) / np.sqrt(d)
    assert np.allclose(arr, expected)


def test_permutation_matrix_examples():
    assert permutation_matrix(2, 1).equals(Matrix.identity(2))
    assert np.array_equal(permutation_matrix(2, 2).to_numpy().real, [[0, 1], [1, 0]])
    p = permutation_matrix(4, 3)
    out = apply(p, StateVector.basis(4, 2))
    assert out.equals(StateVector.basis(4, 0))
    assert p.is_unitary()


def test_permutation_completion_rule():
    arr = permutation_matrix(4, 3).to_numpy().real
    assert np.array_equal(arr, [[0, 0, 1, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]])


def test_standard_partition_is_first_basis_state_versus_rest():
    assert MeasurementPartition.standard(3).blocks == ((1, 2), (0,))


def test_measure_basis_state():
    out = measure(StateVector.basis(2, 0), MeasurementPartition.standard(2))
    assert [(r, p) for r, p, _ in out] == [(1, ONE)]


def test_measure_uniform_state():
    out = measure(uniform_state(2), MeasurementPartition(((0,), (1,))))
    assert sorted(p for _, p, _ in out) == [Exact.from_rational(Fraction(1, 2))] * 2
    for _, _, post in out:
        assert post.norm2() == ONE


def test_measure_after_diagonal_round():
    psi = apply(dft_matrix(2), apply(Matrix.diagonal([Z_ENTRY, ONE]), uniform_state(2)))
    probs = {r: p for r, p, _ in measure(psi, MeasurementPartition.standard(2))}
    assert probs[1] == Exact.from_rational(Fraction(4, 5))
    assert probs[0] == Exact.from_rational(Fraction(1, 5))


def test_bigfloat_measure_agrees_with_exact():
    psi = apply(dft_matrix(2), apply(Matrix.diagonal([Z_ENTRY, ONE]), uniform_state(2)))
    big = {r: p for r, p, _ in measure(psi.to_bigfloat(), MeasurementPartition.standard(2))}
    assert abs(big[1] - mpmath.mpf("0.8")) < EPS


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=3))
@settings(max_examples=60, deadline=None)
def test_transition_unitary_maps_source_to_target(coords):
    if all(a == 0 and b == 0 for a, b in coords):
        return
    coords[0] = (coords[0][0], 0)
    if all(a == 0 and b == 0 for a, b in coords):
        return
    amps = [Exact.from_rational(a, b) for a, b in coords]
    norm2 = sum(a * a + b * b for a, b in coords)
    scale = Exact.sqrt(Fraction(1, norm2))
    target = StateVector([x * scale for x in amps])
    t = transition_unitary(StateVector.basis(3, 0), target)
    assert t.is_unitary()
    assert apply(t, StateVector.basis(3, 0)).equals(target)


def test_transition_unitary_identity_when_equal():
    e = StateVector.basis(3, 1)
    assert transition_unitary(e, e).equals(Matrix.identity(3))


def test_amplitude_class_join():
    assert join_class(AmplitudeClass.ALGEBRAIC_EXACT, AmplitudeClass.CTILDE_NUMERIC) == \
        AmplitudeClass.CTILDE_NUMERIC
    assert AmplitudeClass.from_label(AmplitudeClass.ALGEBRAIC_NUMERIC.label) == \
        AmplitudeClass.ALGEBRAIC_NUMERIC


def test_matrix_json_roundtrip():
    for m in list(f2_images()) + [dft_matrix(3), f2_images()[0].to_bigfloat()]:
        again = Matrix.from_json(m.to_json())
        assert again.backend == m.backend
        assert again.equals(m)


def test_non_unitary_detected():
    m = Matrix([[ONE, ONE], [ZERO, ONE]])
    assert not m.is_unitary()
