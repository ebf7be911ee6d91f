import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import norm

from wordqfa.analytic import sub_r_probability, sub_rprime_probability
from wordqfa.assemble import (
    fair_coin_machine, sub_b_machine, sub_r_machine, sub_rprime_machine, trivial_machine,
)
from wordqfa.montecarlo import (
    compile_machine, encode_tape, reference_trial, run_montecarlo, run_trials, set_threads, trial_stream_seed,
    wilson_interval,
)


def within_sigmas(freq, p, trials, bound=3.0):
    sigma = math.sqrt(p * (1 - p) / trials)
    return abs(freq - p) <= bound * sigma


def test_trivial_machine_statistics():
    stats = run_montecarlo(trivial_machine(), (1, 1, 1), 1000, seed=1)
    assert stats.accept_freq == 1.0 and stats.mean_steps == 1.0 and stats.steps_std == 0.0


def test_fair_coin_frequency():
    stats = run_montecarlo(fair_coin_machine(), (), 100_000, seed=3)
    assert within_sigmas(stats.accept_freq, 0.5, 100_000)
    assert stats.ci_low < 0.5 < stats.ci_high


@pytest.mark.parametrize("n,m,y", [(10, 1, 1), (4, 2, 2)])
def test_sub_r_frequency(n, m, y):
    trials = 200_000
    stats = run_montecarlo(sub_r_machine(m, y), (1,) * n, trials, seed=11)
    assert within_sigmas(stats.accept_freq, float(sub_r_probability(n, m, y)), trials)


def test_biased_coin_frequency():
    trials = 200_000
    stats = run_montecarlo(sub_b_machine(Fraction(1, 3)), (), trials, seed=21)
    assert within_sigmas(stats.accept_freq, 1 / 3, trials)


def test_sub_rprime_frequency():
    trials = 200_000
    stats = run_montecarlo(sub_rprime_machine(0.5, 1), (1,) * 4, trials, seed=5)
    assert within_sigmas(stats.accept_freq, float(sub_rprime_probability(0.5, 4, 1)), trials)


def test_integer_identity_word_always_accepted(z_poly):
    stats = run_montecarlo(z_poly, (1, -1), 4, seed=7)
    assert stats.accepts == 4 and stats.step_limited == 0


def test_finite_group_identity_run(zm_poly):
    stats = run_montecarlo(zm_poly, (1, -1), 20_000, seed=7)
    assert stats.accept_freq == 1.0


def test_generator_rejection_frequency(z_poly):
    trials = 20_000
    stats = run_montecarlo(z_poly, (1,), trials, seed=2)
    p_reject = 262144 / 262145
    assert within_sigmas(stats.reject_freq, p_reject, trials) or stats.rejects == trials


@pytest.mark.parametrize("word", [(), (1,), (1, -1), (1, 1, 1, 1), (1, 1, 1)])
def test_kernel_matches_reference_interpreter(zm_poly, word):
    verdicts, steps = run_trials(zm_poly, word, 30, seed=99)
    for trial in range(30):
        ref_verdict, ref_steps = reference_trial(zm_poly, word, 99, trial, 10**8)
        assert (verdicts[trial], steps[trial]) == (ref_verdict, ref_steps)


def test_kernel_matches_reference_on_multipass_machine(f2_exp):
    verdicts, steps = run_trials(f2_exp, (1, 2), 10, seed=4)
    for trial in range(10):
        assert (verdicts[trial], steps[trial]) == reference_trial(f2_exp, (1, 2), 4, trial, 10**8)


def test_same_seed_same_results(zm_poly):
    a = run_trials(zm_poly, (1, 1), 500, seed=42)
    b = run_trials(zm_poly, (1, 1), 500, seed=42)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_results_independent_of_thread_count(zm_poly):
    set_threads(1)
    a = run_trials(zm_poly, (1,), 300, seed=8)
    set_threads(0)
    b = run_trials(zm_poly, (1,), 300, seed=8)
    assert np.array_equal(a[1], b[1])


def test_trial_offsets_continue_the_stream(zm_poly):
    whole = run_trials(zm_poly, (1,), 40, seed=6)
    tail = run_trials(zm_poly, (1,), 20, seed=6, first_trial=20)
    assert np.array_equal(whole[1][20:], tail[1])


def test_different_seeds_give_different_streams():
    assert trial_stream_seed(1, 0) != trial_stream_seed(2, 0)
    assert trial_stream_seed(1, 0) != trial_stream_seed(1, 1)


def test_step_limit_flags_trials(z_poly):
    verdicts, steps = run_trials(z_poly, (1, -1), 3, seed=1, step_limit=1000)
    assert list(verdicts) == [2, 2, 2] and all(s == 1000 for s in steps)
    stats = run_montecarlo(z_poly, (1, -1), 3, seed=1, step_limit=1000)
    assert stats.step_limited == 3


@pytest.mark.parametrize("k,n", [(0, 10), (3, 10), (50, 100), (100, 100), (4541, 100000)])
def test_wilson_interval_matches_scipy(k, n):
    low, high = wilson_interval(k, n)
    z = norm.ppf(0.975)
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert abs(low - max(0.0, centre - half)) < 1e-9
    assert abs(high - min(1.0, centre + half)) < 1e-9


def test_tape_encoding(z_poly):
    tape = encode_tape(compile_machine(z_poly), (1, -1))
    assert len(tape) == 4 and tape[0] == 0 and tape[-1] == 1


def test_stats_serialization():
    stats = run_montecarlo(fair_coin_machine(), (), 100, seed=1)
    data = stats.to_json()
    assert data["trials"] == 100 and data["seed"] == 1
    assert "accept_freq" in stats.to_csv().splitlines()[0]
