import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from wordqfa.analytic import analyze_acceptance, round_success_probability, to_mpf
from wordqfa.assemble import (
    assemble_exp_machine, assemble_poly_machine, assemble_unbounded_machine, biased_state,
    coin_unitary, exp_coin_parameters, poly_coin_parameters, reset_unitary,
    transform_overgroup,
)
from wordqfa.dfr import DfrError, build_named_dfr
from wordqfa.exact import ONE, Exact
from wordqfa.groups import build_coset_table, enumerate_words, is_identity
from wordqfa.linalg import (
    StateVector, apply, dft_matrix, permutation_matrix, transition_unitary, uniform_state,
)
from wordqfa.machine import run_exact_path
from wordqfa.verify import dinf_identity, z_over_2z_identity

EPS_NUM = mpmath.mpf(2) ** -128
HALF = Exact.sqrt(Fraction(1, 2))


def register_before_measurement(machine, word):
    """Register after the sweep of the first round, with the final unitary undone."""
    cfg, _, _ = run_exact_path(machine, word, [])
    assert cfg.state.endswith(".meas")
    final = machine.unitaries[machine.structure["rounds"][0]["final"]]
    return apply(final.dagger(), cfg.psi)


def test_unitary_round_on_empty_word_gives_probe(z_poly):
    assert register_before_measurement(z_poly, ()).equals(uniform_state(2))


def test_unitary_round_on_generator(z_poly):
    psi = register_before_measurement(z_poly, (1,))
    entry = Exact.from_rational(Fraction(3, 5), Fraction(4, 5))
    assert psi.amps[0] == entry * HALF and psi.amps[1] == HALF


def test_unitary_round_on_inverse_pair(f2_exp):
    assert register_before_measurement(f2_exp, (1, -1)).equals(uniform_state(2))


def test_probe_preparation_maps_first_basis_state(z_poly):
    prep = z_poly.unitaries[z_poly.structure["rounds"][0]["prep"]]
    assert apply(prep, StateVector.basis(2, 0)).equals(uniform_state(2))


def test_diagonal_round_success(z_dfr):
    prep = transition_unitary(StateVector.basis(2, 0), uniform_state(2))
    p = round_success_probability(z_dfr.reps[0], prep, dft_matrix(2), (1,))
    assert p == Exact.from_rational(Fraction(4, 5)) or p == Fraction(4, 5)
    assert round_success_probability(z_dfr.reps[0], prep, dft_matrix(2), (1, -1)) in (1, ONE)


def test_diagonal_round_closed_form_matches_character_average(z_dfr):
    prep = transition_unitary(StateVector.basis(2, 0), uniform_state(2))
    for q in range(-6, 7):
        word = (1,) * q if q >= 0 else (-1,) * -q
        mat = np.diag([complex(0.6, 0.8) ** q, 1])
        expected = abs(mat.sum() / 2) ** 2
        got = float(to_mpf(round_success_probability(z_dfr.reps[0], prep, dft_matrix(2), word)))
        assert abs(got - expected) < 1e-12


def test_single_round_rejection_bounded_by_gap(z_dfr):
    prep = transition_unitary(StateVector.basis(2, 0), uniform_state(2))
    for q in range(1, 60):
        p = to_mpf(round_success_probability(z_dfr.reps[0], prep, dft_matrix(2), (1,) * q))
        assert 1 - p >= z_dfr.tau.value(q) / 2


def test_diagonal_probe_rounds_never_reject_on_diagonal_images(z_dfr):
    rep = z_dfr.reps[0]
    for v in (1, 2):
        prep = transition_unitary(StateVector.basis(2, 0), StateVector.basis(2, v - 1))
        for word in ((1,), (1, 1, 1), (-1, -1)):
            p = round_success_probability(rep, prep, permutation_matrix(2, v), word)
            assert p in (1, ONE)


def test_multipass_on_diagonal_rep_equals_first_round(z_dfr):
    machine = assemble_unbounded_machine(z_dfr)
    for word in ((1,), (1, 1), (-1, -1, -1)):
        result = analyze_acceptance(machine, word)
        first = result.round_success[0]
        assert all(p == 1 for p in result.round_success[1:])
        assert result.p_rej == 1 - first


def test_coin_helpers():
    h = coin_unitary(2)
    assert h.is_unitary()
    assert apply(h, StateVector.basis(2, 0)).equals(uniform_state(2))
    assert apply(reset_unitary(3), StateVector.basis(3, 1)).equals(StateVector.basis(3, 0))
    psi = biased_state(2, Fraction(1, 3))
    assert psi.amps[0].abs2() == Exact.from_rational(Fraction(1, 3))


def test_poly_coin_parameters(z_dfr):
    coin = poly_coin_parameters(z_dfr.tau, 2, 1 / 8)
    c1, c2 = z_dfr.tau.poly_constants()
    assert coin["m"] == max(1, math.ceil(c2))
    assert coin["y"] == max(0, math.ceil(math.log2(2 / ((1 / 8) * c1))))


def test_exp_coin_parameters(f2_dfr):
    coin = exp_coin_parameters(f2_dfr.tau, 2, 1 / 4)
    base = f2_dfr.tau.exp_base()
    assert Fraction(coin["p"]) == Fraction(1, math.ceil(base * base))
    assert coin["y"] == math.ceil(math.log2(4 * 2 ** 4 / (1 / 4)))
    assert coin["y"] == 8
    assert Fraction(exp_coin_parameters(f2_dfr.tau, 2, 1 / 4, reading="base")["p"]) == \
        Fraction(1, math.ceil(base))


def test_assembled_machine_shapes(z_poly, f2_exp):
    assert z_poly.structure["kind"] == "poly" and len(z_poly.structure["rounds"]) == 1
    assert f2_exp.structure["kind"] == "exp" and len(f2_exp.structure["rounds"]) == 3
    assert z_poly.backend == "exact" and f2_exp.backend == "exact"


def test_assembly_preconditions(f2_dfr, z_dfr):
    with pytest.raises(DfrError):
        assemble_poly_machine(f2_dfr, 0.25)
    with pytest.raises(DfrError):
        assemble_poly_machine(build_named_dfr("ZAlgebraic"), 0.25)
    with pytest.raises(DfrError):
        assemble_exp_machine(z_dfr, 0.25)
    with pytest.raises(ValueError):
        assemble_poly_machine(z_dfr, 1.5)


def test_oneway_machine_dimension(f2_oneway):
    assert f2_oneway.d == 2 * 2 ** 2


def numpy_character(word):
    s5 = np.sqrt(5)
    images = {1: np.diag([2 + 1j, 2 - 1j]) / s5, 2: np.array([[2, 1j], [1j, 2]]) / s5}
    out = np.eye(2, dtype=complex)
    for c in word:
        out = out @ (images[abs(c)] if c > 0 else images[abs(c)].conj().T)
    return np.trace(out)


def test_oneway_acceptance_is_hadamard_test(f2_oneway):
    for n in range(5):
        for word in enumerate_words(f2_oneway.group, n):
            expected = (1 + numpy_character(word).real / 2) / 2
            got = float(to_mpf(analyze_acceptance(f2_oneway, word).overall_accept))
            assert abs(got - expected) < 1e-12


def test_oneway_examples(f2_oneway):
    assert analyze_acceptance(f2_oneway, ()).overall_accept in (1, ONE, Fraction(1))
    assert to_mpf(analyze_acceptance(f2_oneway, (1, 2, -1, -2)).overall_reject) > 0


def test_identity_table_transform_matches_original(z_poly):
    same = transform_overgroup(z_poly, build_coset_table(z_poly.group, "identity"))
    for n in range(9):
        for word in enumerate_words(z_poly.group, n):
            a = analyze_acceptance(z_poly, word, with_steps=False)
            b = analyze_acceptance(same, word, with_steps=False)
            assert abs(to_mpf(a.overall_accept) - to_mpf(b.overall_accept)) <= EPS_NUM


@pytest.mark.parametrize("name,oracle", [("2Z_in_Z", z_over_2z_identity),
                                         ("Z_in_Dinf", dinf_identity)])
def test_overgroup_machine_agrees_with_classical_oracle(z_poly, name, oracle):
    machine = transform_overgroup(z_poly, build_coset_table(z_poly.group, name))
    for n in range(6):
        for word in enumerate_words(machine.group, n):
            result = analyze_acceptance(machine, word, with_steps=False)
            if oracle(word):
                assert result.overall_accept == 1
            else:
                assert to_mpf(result.overall_reject) >= 1 - 1 / 8


def test_dihedral_relators_and_generators(z_poly):
    machine = transform_overgroup(z_poly, build_coset_table(z_poly.group, "Z_in_Dinf"))
    a, s = 1, 2
    for word in ((s, s), (a, s, a, s)):
        assert is_identity(machine.group, word)
        assert analyze_acceptance(machine, word).overall_accept == 1
    for word in ((a,), (s,)):
        assert to_mpf(analyze_acceptance(machine, word).overall_reject) >= 1 - 1 / 8


def test_overgroup_transform_rejects_mismatched_table(z_poly, f2_dfr):
    from wordqfa.machine import MachineError
    with pytest.raises(MachineError):
        transform_overgroup(z_poly, build_coset_table(f2_dfr.group, "identity"))


def test_zm_poly_machine_identity_and_rejection(zm_poly):
    assert analyze_acceptance(zm_poly, (1, 1, 1, 1)).overall_accept == 1
    for q in (1, 2, 3, 5):
        assert to_mpf(analyze_acceptance(zm_poly, (1,) * q).overall_reject) >= 1 - 1 / 2
