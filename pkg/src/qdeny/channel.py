"""Transmission media: noisy qubit channel, authenticated classical channel
with transcript logging, and the covert time-bin channel with its warden.

The time-bin detection model is per-slot independent Bernoulli: an idle slot
fires with probability p_dark, a slot carrying a signal with p_signal. The
warden knows every channel parameter and the number of occupied slots but
not their positions, which makes the total detection count its sufficient
statistic; warden_bias_exact computes the optimal advantage from the two
exact count distributions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np
from scipy import stats

from . import qcore
from .rng import WEAK_SEED_BITS, CounterModePrng, RandomStream

__all__ = [
    "Interceptor",
    "QubitChannel",
    "Message",
    "ClassicalAuthChannel",
    "TimeBinChannel",
    "WardenObservation",
    "CovertSchedule",
    "transmit",
    "covert_schedule",
    "warden_observe",
    "warden_bias_exact",
    "count_distributions",
    "max_covert_slots",
    "weak_schedule_table",
]


class Interceptor(Protocol):
    """Adversarial hook applied to qubits in flight (see the denial module)."""

    def intercept(self, states, rng: RandomStream): ...


@dataclass(frozen=True)
class QubitChannel:
    """Single-qubit channel with independent bit-flip noise and an optional
    interceptor that acts before the noise.

    The noise is a genuine Pauli X, so it flips computational-basis
    encodings but leaves diagonal ones invariant up to phase; after sifting,
    a random-basis protocol therefore observes an error rate of half the
    flip probability.
    """

    flip_probability: float = 0.0
    interceptor: object | None = None

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError("flip_probability must lie in [0, 1]")


@dataclass(frozen=True)
class Message:
    sender: str
    label: str
    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def n_bits(self) -> int:
        return int(self.bits.size)


class ClassicalAuthChannel:
    """Append-only authenticated classical channel; the log is the transcript."""

    def __init__(self):
        self._log: list[Message] = []

    def send(self, sender: str, label: str, payload) -> Message:
        msg = Message(sender, label, np.asarray(payload, dtype=np.uint8))
        self._log.append(msg)
        return msg

    @property
    def log(self) -> tuple[Message, ...]:
        return tuple(self._log)

    def find(self, label: str) -> Message:
        for msg in self._log:
            if msg.label == label:
                return msg
        raise KeyError(f"no message labeled {label!r}")

    def labels(self) -> list[str]:
        return [m.label for m in self._log]

    def total_bits(self) -> int:
        return sum(m.n_bits for m in self._log)


def transmit(
    channel: QubitChannel, states: list[qcore.StateVector], rng: RandomStream
) -> tuple[list[qcore.StateVector], object | None]:
    """Deliver qubits: interceptor first, then per-qubit Pauli-X noise."""
    if any(s.n_qubits != 1 for s in states):
        raise ValueError("transmit() carries single-qubit states only")
    record = None
    if channel.interceptor is not None:
        states, record = channel.interceptor.intercept(states, rng)
    flips = rng.uniforms(len(states)) < channel.flip_probability  # one draw per qubit
    states = [
        qcore.StateVector(1, s.amplitudes[::-1]) if f else s  # Pauli-X swaps amplitudes
        for s, f in zip(states, flips)
    ]
    return states, record


@dataclass(frozen=True)
class TimeBinChannel:
    n_slots: int
    p_dark: float
    p_signal: float

    def __post_init__(self):
        if self.n_slots < 1:
            raise ValueError("need at least one slot")
        if not 0.0 <= self.p_dark <= self.p_signal <= 1.0:
            raise ValueError("require 0 <= p_dark <= p_signal <= 1")


@dataclass(frozen=True)
class WardenObservation:
    detections: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.detections, dtype=np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "detections", arr)

    @property
    def count(self) -> int:
        return int(self.detections.sum())


@dataclass(frozen=True)
class CovertSchedule:
    n_slots: int
    used_slots: np.ndarray
    source: str  # "true-random" or "prng(<hex>)"

    def __post_init__(self):
        arr = np.asarray(self.used_slots, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.n_slots):
            raise ValueError("schedule slots out of range")
        if np.unique(arr).size != arr.size:
            raise ValueError("schedule slots must be distinct")
        arr = np.sort(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "used_slots", arr)

    @property
    def n_used(self) -> int:
        return int(self.used_slots.size)


def covert_schedule(
    n_slots: int, n_used: int, source: RandomStream | CounterModePrng
) -> CovertSchedule:
    """Pick n_used distinct slots from the given randomness source.

    A CounterModePrng source makes the schedule a pure function of its seed;
    a RandomStream source stands in for true randomness.
    """
    if n_used > n_slots:
        raise ValueError(f"cannot occupy {n_used} of {n_slots} slots")
    if isinstance(source, CounterModePrng):
        slots = CounterModePrng(source.key, source.key_bits).sample_distinct(n_slots, n_used)
        tag = f"prng({source.key_bits}:{source.key:x})"
    else:
        slots = source.choice_distinct(n_slots, n_used)
        tag = "true-random"
    return CovertSchedule(n_slots=n_slots, used_slots=slots, source=tag)


def warden_observe(
    channel: TimeBinChannel, schedule: CovertSchedule | None, rng: RandomStream
) -> WardenObservation:
    """Per-slot detections: p_signal on occupied slots, p_dark elsewhere."""
    p = np.full(channel.n_slots, channel.p_dark)
    if schedule is not None:
        if schedule.n_slots != channel.n_slots:
            raise ValueError("schedule drawn for a different slot count")
        p[schedule.used_slots] = channel.p_signal
    detections = (rng.uniforms(channel.n_slots) < p).astype(np.uint8)
    return WardenObservation(detections)


def count_distributions(channel: TimeBinChannel, n_used: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact pmfs of the total detection count: (idle channel, active channel).

    Idle: Binomial(n_slots, p_dark). Active: the convolution of
    Binomial(n_slots - n_used, p_dark) with Binomial(n_used, p_signal);
    since slots detect independently, the count does not depend on which
    slots carry signal.
    """
    if not 0 <= n_used <= channel.n_slots:
        raise ValueError("n_used out of range")
    n = channel.n_slots
    support = np.arange(n + 1)
    idle = stats.binom.pmf(support, n, channel.p_dark)
    dark_part = stats.binom.pmf(np.arange(n - n_used + 1), n - n_used, channel.p_dark)
    sig_part = stats.binom.pmf(np.arange(n_used + 1), n_used, channel.p_signal)
    active = np.convolve(dark_part, sig_part)
    return idle, active


def warden_bias_exact(channel: TimeBinChannel, n_used: int) -> float:
    """Detection bias: half the total variation distance between the idle and
    active count distributions (the optimal warden's advantage over 1/2)."""
    if n_used == 0 or channel.p_dark == channel.p_signal:
        return 0.0  # observation distributions coincide by construction
    idle, active = count_distributions(channel, n_used)
    tv = 0.5 * float(np.abs(idle - active).sum())
    return 0.5 * tv


def max_covert_slots(channel: TimeBinChannel, bias_target: float) -> int:
    """Largest occupancy whose exact warden bias stays within bias_target."""
    lo, hi = 0, channel.n_slots
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if warden_bias_exact(channel, mid) <= bias_target:
            lo = mid
        else:
            hi = mid - 1
    return lo


@lru_cache(maxsize=8)
def weak_schedule_table(n_slots: int, n_used: int) -> np.ndarray:
    """Schedules for every 16-bit seed, one row per seed.

    This is the exhaustive search space handed to the seed-search warden in
    the broken-generator experiments.
    """
    table = np.empty((1 << WEAK_SEED_BITS, n_used), dtype=np.int32)
    for seed in range(1 << WEAK_SEED_BITS):
        prng = CounterModePrng(seed, WEAK_SEED_BITS)
        table[seed] = prng.sample_distinct(n_slots, n_used)
    table.setflags(write=False)
    return table
