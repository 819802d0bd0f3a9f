"""Channel behavior: qubit noise, transcripts, schedules, warden statistics."""

import numpy as np
import pytest

from qdeny import qcore
from qdeny.channel import (
    ClassicalAuthChannel,
    CovertSchedule,
    QubitChannel,
    TimeBinChannel,
    count_distributions,
    covert_schedule,
    max_covert_slots,
    transmit,
    warden_bias_exact,
    warden_observe,
)
from qdeny.qcore import Basis
from qdeny.rng import CounterModePrng, RandomStream


def bernoulli_dp_pmf(probabilities):
    """Count pmf by per-slot dynamic programming; the independent oracle."""
    pmf = np.array([1.0])
    for p in probabilities:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def bias_oracle(n_slots, p_dark, p_signal, n_used):
    idle = bernoulli_dp_pmf([p_dark] * n_slots)
    active = bernoulli_dp_pmf([p_dark] * (n_slots - n_used) + [p_signal] * n_used)
    return 0.25 * np.abs(idle - active).sum()


class TestQubitTransmission:
    def test_noiseless_identity(self):
        states = [qcore.prepare_bb84(b, Basis.COMPUTATIONAL) for b in (0, 1, 0)]
        out, record = transmit(QubitChannel(0.0), states, RandomStream(1))
        assert record is None
        for before, after in zip(states, out):
            np.testing.assert_allclose(before.amplitudes, after.amplitudes)

    def test_certain_flip(self):
        out, _ = transmit(
            QubitChannel(1.0), [qcore.basis_state("0")], RandomStream(1)
        )
        np.testing.assert_allclose(out[0].amplitudes, [0, 1], atol=1e-15)

    def test_flip_rate_monte_carlo(self):
        n = 10_000
        states = [qcore.basis_state("0")] * n
        out, _ = transmit(QubitChannel(0.1), states, RandomStream(2))
        rng = RandomStream(3)
        errors = sum(qcore.measure(s, Basis.COMPUTATIONAL, rng)[0] for s in out)
        sigma = np.sqrt(0.1 * 0.9 / n)
        assert abs(errors / n - 0.1) < 3 * sigma

    def test_multiqubit_rejected(self):
        with pytest.raises(ValueError):
            transmit(QubitChannel(0.0), [qcore.bell_state(qcore.BellKind.PHI_PLUS)], RandomStream(1))

    def test_bad_probability(self):
        with pytest.raises(ValueError):
            QubitChannel(1.5)


class TestClassicalChannel:
    def test_append_only_order(self):
        chan = ClassicalAuthChannel()
        chan.send("alice", "first", [1, 0])
        chan.send("bob", "second", [1])
        assert chan.labels() == ["first", "second"]
        assert chan.total_bits() == 3
        assert chan.find("first").sender == "alice"

    def test_messages_immutable(self):
        chan = ClassicalAuthChannel()
        msg = chan.send("alice", "x", [1, 0])
        with pytest.raises(ValueError):
            msg.bits[0] = 0


class TestSchedules:
    def test_all_slots(self):
        sched = covert_schedule(8, 8, RandomStream(1))
        assert np.array_equal(sched.used_slots, np.arange(8))

    def test_prng_seed_reproducible(self):
        s1 = covert_schedule(1024, 32, CounterModePrng(77))
        s2 = covert_schedule(1024, 32, CounterModePrng(77))
        assert np.array_equal(s1.used_slots, s2.used_slots)
        assert s1.source.startswith("prng(")

    def test_overflow_rejected(self):
        with pytest.raises(ValueError):
            covert_schedule(4, 5, RandomStream(1))

    def test_slot_usage_uniform(self):
        # per-slot usage frequency over many draws
        n_slots, n_used, draws = 1 << 10, 32, 10_000
        root = RandomStream(4)
        counts = np.zeros(n_slots)
        for i in range(draws):
            sched = covert_schedule(n_slots, n_used, root.substream("s", i))
            counts[sched.used_slots] += 1
        expect = draws * n_used / n_slots
        sigma = np.sqrt(draws * (n_used / n_slots) * (1 - n_used / n_slots))
        assert np.all(np.abs(counts - expect) < 5 * sigma)
        assert abs(counts.mean() - expect) < 3 * sigma / np.sqrt(n_slots)

    def test_duplicate_slots_rejected(self):
        with pytest.raises(ValueError):
            CovertSchedule(10, np.array([1, 1]), "true-random")


class TestWardenObserve:
    def test_deterministic_extremes(self):
        tb = TimeBinChannel(8, 0.0, 1.0)
        sched = CovertSchedule(8, np.array([3]), "true-random")
        obs = warden_observe(tb, sched, RandomStream(1))
        expect = np.zeros(8, dtype=np.uint8)
        expect[3] = 1
        assert np.array_equal(obs.detections, expect)

    def test_idle_dark_counts(self):
        tb = TimeBinChannel(10_000, 0.01, 0.5)
        obs = warden_observe(tb, None, RandomStream(2))
        sigma = np.sqrt(10_000 * 0.01 * 0.99)
        assert abs(obs.count - 100) < 3 * sigma

    def test_indistinguishable_when_rates_equal(self):
        tb = TimeBinChannel(64, 0.3, 0.3)
        sched = covert_schedule(64, 16, RandomStream(3))
        # same substream: identical detections with and without the schedule
        with_sched = warden_observe(tb, sched, RandomStream(4))
        without = warden_observe(tb, None, RandomStream(4))
        assert np.array_equal(with_sched.detections, without.detections)


class TestExactBias:
    def test_zero_cases(self):
        assert warden_bias_exact(TimeBinChannel(100, 0.1, 0.5), 0) == 0.0
        assert warden_bias_exact(TimeBinChannel(100, 0.1, 0.1), 10) == 0.0

    def test_golden_value(self):
        # frozen from the per-slot Bernoulli convolution oracle before the build
        tb = TimeBinChannel(100, 0.01, 0.5)
        assert warden_bias_exact(tb, 10) == pytest.approx(0.4471895236102093, abs=1e-12)

    @pytest.mark.parametrize(
        "n_slots,p_dark,p_signal,n_used",
        [(64, 0.1, 0.3, 8), (100, 0.01, 0.5, 10), (128, 0.0, 1.0, 4), (50, 0.2, 0.6, 25)],
    )
    def test_matches_bernoulli_dp_oracle(self, n_slots, p_dark, p_signal, n_used):
        tb = TimeBinChannel(n_slots, p_dark, p_signal)
        assert warden_bias_exact(tb, n_used) == pytest.approx(
            bias_oracle(n_slots, p_dark, p_signal, n_used), abs=1e-10
        )

    def test_monotone_in_n_used(self):
        tb = TimeBinChannel(256, 0.05, 0.2)
        biases = [warden_bias_exact(tb, m) for m in (0, 2, 4, 8, 16, 32, 64)]
        assert all(b1 <= b2 + 1e-12 for b1, b2 in zip(biases, biases[1:]))

    def test_monotone_in_signal_gap(self):
        biases = [
            warden_bias_exact(TimeBinChannel(256, 0.05, ps), 16)
            for ps in (0.05, 0.1, 0.2, 0.4, 0.8)
        ]
        assert all(b1 <= b2 + 1e-12 for b1, b2 in zip(biases, biases[1:]))


class TestCountTestConvergence:
    def test_monte_carlo_matches_exact(self):
        # optimal count test, sampled at the observation level
        tb = TimeBinChannel(256, 0.05, 0.2)
        n_used = 24
        idle_pmf, active_pmf = count_distributions(tb, n_used)
        exact = warden_bias_exact(tb, n_used)
        g = RandomStream(5).generator
        trials = 100_000
        b = g.integers(0, 2, trials)
        counts = np.where(
            b == 0,
            g.binomial(tb.n_slots - n_used, tb.p_dark, trials)
            + g.binomial(n_used, tb.p_signal, trials),
            g.binomial(tb.n_slots, tb.p_dark, trials),
        )
        guess = np.where(active_pmf[counts] > idle_pmf[counts], 0, 1)
        advantage = abs(np.mean(guess == b) - 0.5)
        sigma = np.sqrt(0.25 / trials)
        assert abs(advantage - exact) < 3 * sigma

    def test_full_observation_path_agrees(self):
        # warden_observe -> count, smaller trial count
        tb = TimeBinChannel(128, 0.05, 0.4)
        n_used = 12
        idle_pmf, active_pmf = count_distributions(tb, n_used)
        exact = warden_bias_exact(tb, n_used)
        root = RandomStream(6)
        wins = 0
        trials = 4000
        for i in range(trials):
            trial = root.substream("t", i)
            b = trial.bit()
            if b == 0:
                sched = covert_schedule(tb.n_slots, n_used, trial.substream("sched"))
                obs = warden_observe(tb, sched, trial.substream("obs"))
            else:
                obs = warden_observe(tb, None, trial.substream("obs"))
            guess = 0 if active_pmf[obs.count] > idle_pmf[obs.count] else 1
            wins += int(guess == b)
        advantage = abs(wins / trials - 0.5)
        assert abs(advantage - exact) < 3 * np.sqrt(0.25 / trials)


class TestSquareRootLaw:
    def test_loglog_slope_near_half(self):
        # reduced grid; the acceptance suite runs the full 2^8..2^14 sweep
        ns = [2**k for k in range(8, 13)]
        ms = [max_covert_slots(TimeBinChannel(n, 0.05, 0.10), 0.1) for n in ns]
        slope = np.polyfit(np.log(ns), np.log(ms), 1)[0]
        assert 0.4 <= slope <= 0.6
