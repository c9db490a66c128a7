"""Three-round data system: honest completeness, attack detection, leakage."""

import itertools
import math

import numpy as np
import pytest

from qperc.privacy import attack_qubits, detection_probability
from qperc.protocol import (
    BobStrategy,
    ProtocolParams,
    run_data_system,
    transcript_text,
)
from qperc.qstate import RegisterLayout

from oracle_protocol import exact_detection_probability


def make_params(n, k, f_int, seed=0, transcript=False):
    return ProtocolParams(
        RegisterLayout(n, k), f_int=f_int,
        alice_rng=np.random.default_rng((seed, 1)),
        bob_rng=np.random.default_rng((seed, 2)),
        record_transcript=transcript,
    )


def const(v):
    return lambda d: v


class TestHonest:
    def test_exhaustive_completeness_n2_k1(self):
        # every input, every (i, y, u, m), both oracle answers: never detected,
        # answer always f(x); exact
        n, k = 2, 1
        nk = n * k
        for f_val in (0, 1):
            params = make_params(n, k, const(f_val), seed=10 + f_val)
            for x in range(1 << nk):
                for draws in itertools.product(
                        (1, 2, 3), range(1 << nk), (0, 1), range(1, nk + 1)):
                    out = run_data_system(x, params, draws=draws)
                    assert not out.detected
                    assert out.answer == f_val
                    assert out.leaked_bits == []
                    assert out.rounds_executed == 3

    def test_honest_nontrivial_oracle(self):
        n, k = 3, 2
        nk = n * k
        f_int = lambda d: (d >> (nk - 1)) & 1  # threshold on attribute 1 MSB
        params = make_params(n, k, f_int, seed=3)
        arng = np.random.default_rng(4)
        for _ in range(2000):
            x = int(arng.integers(1 << nk))
            out = run_data_system(x, params)
            assert not out.detected and out.answer == f_int(x)

    def test_detection_rate_zero(self):
        params = make_params(4, 1, const(1), seed=5)
        detected = sum(run_data_system(7, params).detected for _ in range(10000))
        assert detected == 0


class TestMeasureSubset:
    def test_exact_oracle_full_subset(self):
        # measuring both qubits at n=2, k=1: the decoy position is always hit,
        # so detection is exactly 1/2
        p = exact_detection_probability(2, 1, x=0b01, f=lambda b: 0, subset=(1, 2))
        assert abs(p - 0.5) < 1e-9

    def test_exact_oracle_partial_subset(self):
        p = exact_detection_probability(2, 1, x=0b10, f=lambda b: 1, subset=(2,))
        assert abs(p - 0.25) < 1e-9

    @pytest.mark.parametrize("subset,seed", [((1, 2), 21), ((2,), 22)])
    def test_simulation_matches_oracle(self, subset, seed):
        oracle = exact_detection_probability(2, 1, x=0b01, f=lambda b: 0,
                                             subset=subset)
        params = make_params(2, 1, const(0), seed=seed)
        strategy = BobStrategy.measure_subset(subset)
        trials = 40000
        detected = sum(run_data_system(0b01, params, strategy).detected
                       for _ in range(trials))
        rate = detected / trials
        sigma = math.sqrt(oracle * (1 - oracle) / trials)
        assert abs(rate - oracle) < 4 * sigma

    def test_data_round_leak_is_true_input(self):
        # reading every qubit leaks x entirely while the answer stays correct
        n, k = 4, 1
        params = make_params(n, k, const(1), seed=30)
        strategy = BobStrategy.measure_subset((1, 2, 3, 4))
        x = 0b1011
        for _ in range(200):
            out = run_data_system(x, params, strategy)
            if not out.detected:
                assert out.answer == 1
                assert sorted(out.leaked_bits) == [(1, 1), (2, 0), (3, 1), (4, 1)]

    def test_theorem2_bridge_rates(self):
        # empirical detection within +-0.01 of the closed form
        cases = [(8, 2, 4, "attribute"), (4, 1, 4, "attribute"),
                 (8, 2, 4, "example")]
        for n, k, n2, scope in cases:
            nk = n * k
            params = make_params(n, k, lambda d: d & 1, seed=(n, k, n2))
            strategy = BobStrategy.measure_subset(attack_qubits(n, n2, k, scope))
            arng = np.random.default_rng((n, nk, n2))
            trials = 30000
            detected = sum(
                run_data_system(int(arng.integers(1 << nk)), params,
                                strategy).detected
                for _ in range(trials))
            expected = detection_probability(n, n2, k, scope)
            assert abs(detected / trials - expected) < 0.01


class TestEntangleCopy:
    def test_copy_attack_never_trips_data_check(self):
        # the copies realign under the inverse gates; only the +/- comparison
        # of the two decoy rounds can notice (probability 1/2 overall)
        n, k = 3, 1
        nk = n * k
        params = make_params(n, k, const(0), seed=41)
        strategy = BobStrategy.entangle_copy(tuple(range(1, nk + 1)))
        detected = 0
        trials = 20000
        for _ in range(trials):
            out = run_data_system(0b101, params, strategy)
            detected += out.detected
            assert out.detection_site in ("none", "test-mismatch")
            if not out.detected:
                assert sorted(out.leaked_bits) == [(1, 1), (2, 0), (3, 1)]
        assert abs(detected / trials - 0.5) < 0.02

    def test_untouched_decoy_position_passes(self):
        params = make_params(2, 1, const(0), seed=42)
        strategy = BobStrategy.entangle_copy((2,))
        detected = sum(
            run_data_system(0b00, params, strategy, draws=(2, 0b11, 0, 1)).detected
            for _ in range(500))
        assert detected == 0


class TestGuessMU:
    def test_pass_while_reading_rate(self):
        n, k = 4, 1
        nk = n * k
        params = make_params(n, k, lambda d: d & 1, seed=51)
        arng = np.random.default_rng(52)
        trials = 40000
        hits = 0
        for _ in range(trials):
            out = run_data_system(int(arng.integers(1 << nk)), params,
                                  BobStrategy.guess_mu())
            if not out.detected and out.attack_info["read_ok"]:
                hits += 1
        target = 1.0 / (2 * nk)
        sigma = math.sqrt(target * (1 - target) / trials)
        assert abs(hits / trials - target) < 4 * sigma

    def test_correct_guess_never_detected_by_tests(self):
        # with the right flip position the decoy rounds are reconstructed
        # exactly; only the computational round's register check can fire
        n, k = 2, 1
        params = make_params(n, k, const(1), seed=53)
        for _ in range(2000):
            out = run_data_system(0b10, params, BobStrategy.guess_mu())
            if out.attack_info["m_guess"] == out.attack_info["m_true"]:
                assert out.detection_site in ("none", "data-mismatch")


class TestMeasureAndResend:
    @pytest.mark.parametrize("n,k", [(4, 1), (8, 2)])
    def test_pass_rate_below_bound(self, n, k):
        nk = n * k
        params = make_params(n, k, lambda d: d & 1, seed=(61, n))
        arng = np.random.default_rng((62, n))
        trials = 20000
        passed = sum(
            not run_data_system(int(arng.integers(1 << nk)), params,
                                BobStrategy.measure_and_resend()).detected
            for _ in range(trials))
        bound = (nk + 3) / (4 * nk)
        assert passed / trials <= bound + 0.02

    def test_every_strategy_is_detectable(self):
        # qualitative cheat sensitivity: positive detection rate for every
        # cataloged deviation (n=4, k=1, 2000 trials each)
        n, k = 4, 1
        nk = n * k
        strategies = [
            BobStrategy.measure_subset((1,)),
            BobStrategy.measure_subset(tuple(range(1, nk + 1))),
            BobStrategy.entangle_copy((1, 2)),
            BobStrategy.guess_mu(),
            BobStrategy.measure_and_resend(),
        ]
        arng = np.random.default_rng(63)
        for idx, strategy in enumerate(strategies):
            params = make_params(n, k, lambda d: d & 1, seed=(64, idx))
            detected = sum(
                run_data_system(int(arng.integers(1 << nk)), params,
                                strategy).detected
                for _ in range(2000))
            assert detected > 0


class TestBestGuessOfFlipPosition:
    def test_full_measurement_identifies_m_at_chance_level(self):
        # a full computational read carries no information about the decoy
        # position: the best posterior is uniform, frequency <= 1/nk + noise
        n, k = 4, 1
        nk = n * k
        params = make_params(n, k, const(0), seed=71)
        trials = 30000
        hits = 0
        brng = np.random.default_rng(72)
        for _ in range(trials):
            out = run_data_system(0b0110, params,
                                  BobStrategy.measure_subset(tuple(range(1, nk + 1))))
            guess = 1 + int(brng.integers(nk))
            hits += guess == out.attack_info["m_true"]
        p = 1.0 / nk
        assert hits / trials <= p + 3 * math.sqrt(p * (1 - p) / trials)


class TestOutcomeContract:
    def test_detected_implies_no_answer(self):
        params = make_params(4, 1, const(0), seed=81)
        strategy = BobStrategy.measure_and_resend()
        arng = np.random.default_rng(82)
        saw_detection = False
        for _ in range(500):
            out = run_data_system(int(arng.integers(16)), params, strategy)
            if out.detected:
                saw_detection = True
                assert out.answer is None
                assert out.rounds_executed <= 3
        assert saw_detection

    def test_honest_leak_empty(self):
        params = make_params(3, 1, const(1), seed=83)
        for _ in range(100):
            assert run_data_system(5, params).leaked_bits == []

    def test_streams_must_differ(self):
        shared = np.random.default_rng(1)
        with pytest.raises(ValueError):
            ProtocolParams(RegisterLayout(2, 1), f_int=const(0),
                           alice_rng=shared, bob_rng=shared)

    def test_rounds_measured_parameter(self):
        # attacking only round 1 lowers exposure: detection only when the
        # attacked round was a decoy round and the coin comes up wrong
        n, k = 2, 1
        params = make_params(n, k, const(0), seed=84)
        strategy = BobStrategy.measure_subset((1, 2), attack_rounds=frozenset({1}))
        trials = 20000
        detected = sum(run_data_system(0b01, params, strategy).detected
                       for _ in range(trials))
        # P(round 1 is a decoy) * P(disagree) = (2/3) * (1/2)
        assert abs(detected / trials - 1 / 3) < 0.02


class TestTranscript:
    def test_schema_round_trip(self):
        params = make_params(2, 1, const(1), seed=91, transcript=True)
        out = run_data_system("10", params)
        text = transcript_text(out)
        lines = text.strip().split("\n")
        assert lines[0].startswith("run n=2 k=1 x=10")
        assert sum(1 for l in lines if l.startswith("round")) >= 9
        assert lines[-1].startswith("result answer=")
        for line in lines:
            assert line == line.strip()
        # measurement lines carry outcome, expectation and probability
        data_lines = [l for l in lines if "measure data" in l]
        assert len(data_lines) == 3
        for line in data_lines:
            assert "outcome=" in line and "expect=" in line and "p=" in line
