"""Prepare-and-measure BB84 with code-based information reconciliation.

A session sends (4 + delta) * n qubits, sifts on matching bases, spends
half of 2n retained bits on error estimation and turns the remaining n
payload bits into key material: per code-length block, the announced
correction word is the payload XOR a random C1 codeword, and the final key
is the label of that codeword's coset modulo C2. Check-bit comparison
discloses positions and values on the classical channel.

All announcements use fixed-size encodings (index sets as full-length
masks) so a session's classical bit count is a function of the
configuration alone; the covert layer relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gf2, qcore
from .channel import ClassicalAuthChannel, Message, QubitChannel, transmit
from .gf2 import NestedCodePair
from .rng import RandomStream

__all__ = [
    "Bb84Config",
    "Bb84Session",
    "SessionResult",
    "Bb84Outcome",
    "SiftShortfall",
    "run_bb84",
    "run_session",
    "sift",
    "extract_key",
    "required_slots",
]

DEFAULT_ERROR_THRESHOLD = 0.11  # conventional BB84 abort point


class SiftShortfall(RuntimeError):
    """Fewer than 2n bases matched; the whole session is resampled."""


@dataclass(frozen=True)
class Bb84Config:
    """n payload bits (one half of the retained bits), oversampled by delta."""

    n: int
    delta: float = 0.5
    error_threshold: float = DEFAULT_ERROR_THRESHOLD
    codes: NestedCodePair = field(default_factory=gf2.default_nested_pair)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if not 0.0 <= self.error_threshold <= 1.0:
            raise ValueError("error threshold must lie in [0, 1]")
        if self.n % self.codes.c1.n:
            raise ValueError(
                f"n = {self.n} must be a multiple of the code block length {self.codes.c1.n}"
            )
        if self.qubit_count < 2 * (2 * self.n):
            raise ValueError("qubit count must cover check bits and payload twice over")

    @property
    def qubit_count(self) -> int:
        return int(np.ceil((4 + self.delta) * self.n))

    @property
    def blocks(self) -> int:
        return self.n // self.codes.c1.n

    @property
    def key_bits(self) -> int:
        return self.blocks * self.codes.key_bits


@dataclass(frozen=True)
class SessionResult:
    """Per-party outcome: (session key, party id, public values, secret values)."""

    session_key: np.ndarray | None
    party_id: str
    public_values: tuple[Message, ...]
    private_values: dict[str, np.ndarray]
    aborted: bool = False

    def __post_init__(self):
        if self.aborted and self.session_key is not None:
            raise ValueError("aborted results carry no key")


@dataclass(frozen=True)
class Bb84Session:
    """Full internal record of one protocol run, for experiments and replay."""

    config: Bb84Config
    a: np.ndarray  # Alice's raw bits
    b: np.ndarray  # Alice's bases
    b_prime: np.ndarray  # Bob's bases
    a_prime: np.ndarray  # Bob's outcomes
    sifted: np.ndarray  # indices with matching bases
    check_positions: np.ndarray
    payload_positions: np.ndarray
    u: np.ndarray | None  # Alice's random codeword(s), None on abort
    estimated_error: float
    transcript: tuple[Message, ...]
    eve_record: object | None


@dataclass(frozen=True)
class Bb84Outcome:
    aborted: bool
    alice: SessionResult
    bob: SessionResult
    session: Bb84Session

    @property
    def keys_agree(self) -> bool:
        if self.aborted:
            return False
        return bool(np.array_equal(self.alice.session_key, self.bob.session_key))


def sift(a, b, a_prime, b_prime) -> np.ndarray:
    """Indices where preparation and measurement bases agree."""
    arrays = [np.asarray(x) for x in (a, b, a_prime, b_prime)]
    if len({arr.size for arr in arrays}) != 1:
        raise ValueError("all four strings must have equal length")
    return np.where(arrays[1] == arrays[3])[0]


def extract_key(
    pair: NestedCodePair, v_alice: np.ndarray, v_bob: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Coset-label keys for both sides, block by block.

    Alice's key labels u directly; Bob removes the announced correction
    u XOR v_alice from his noisy payload and decodes to the nearest C1
    codeword before labeling. Keys agree whenever each block's error stays
    within the code's correction radius.
    """
    v_alice, v_bob, u = gf2.bits(v_alice), gf2.bits(v_bob), gf2.bits(u)
    nb = pair.c1.n
    if not (v_alice.size == v_bob.size == u.size) or v_alice.size % nb:
        raise ValueError("payload length must be a shared multiple of the block length")
    announced = u ^ v_alice
    k_a, k_b = [], []
    for start in range(0, u.size, nb):
        sl = slice(start, start + nb)
        k_a.append(gf2.key_from_coset(pair, u[sl]))
        u_hat = gf2.decode_to_codeword(pair.c1, v_bob[sl] ^ announced[sl])
        k_b.append(gf2.key_from_coset(pair, u_hat))
    return np.concatenate(k_a), np.concatenate(k_b)


def _mask(length: int, positions: np.ndarray) -> np.ndarray:
    m = np.zeros(length, dtype=np.uint8)
    m[positions] = 1
    return m


def required_slots(config: Bb84Config) -> int:
    """Covert slots for one session: qubits plus every classical bit."""
    q, n = config.qubit_count, config.n
    return q + (4 * q + 3 * n + 1)


def run_bb84(
    config: Bb84Config,
    qchan: QubitChannel,
    cchan: ClassicalAuthChannel,
    rng_a: RandomStream,
    rng_b: RandomStream,
    rng_env: RandomStream | None = None,
) -> Bb84Outcome:
    """One protocol attempt. Raises SiftShortfall if under 2n bases match."""
    if rng_env is None:
        rng_env = rng_a.substream("environment")
    q_count, n = config.qubit_count, config.n

    a = rng_a.bits(q_count)
    b = rng_a.bits(q_count)
    states = [qcore.prepare_bb84(int(a[i]), qcore.Basis.from_bit(b[i])) for i in range(q_count)]
    delivered, eve_record = transmit(qchan, states, rng_env)

    b_prime = rng_b.bits(q_count)
    a_prime = np.empty(q_count, dtype=np.uint8)
    for i, state in enumerate(delivered):
        outcome, _ = qcore.measure(state, qcore.Basis.from_bit(b_prime[i]), rng_b)
        a_prime[i] = outcome

    cchan.send("alice", "bases", b)
    sifted = sift(a, b, a_prime, b_prime)
    cchan.send("bob", "sift-mask", _mask(q_count, sifted))
    if sifted.size < 2 * n:
        raise SiftShortfall(f"only {sifted.size} sifted bits, need {2 * n}")

    retained = sifted[rng_a.choice_distinct(sifted.size, 2 * n)]
    check_sel = rng_a.choice_distinct(2 * n, n)
    check_positions = retained[check_sel]
    payload_positions = np.setdiff1d(retained, check_positions)
    cchan.send("alice", "check-mask", _mask(q_count, check_positions))
    cchan.send("alice", "payload-mask", _mask(q_count, payload_positions))

    cchan.send("alice", "check-values-alice", a[check_positions])
    cchan.send("bob", "check-values-bob", a_prime[check_positions])
    estimated_error = float(np.mean(a[check_positions] ^ a_prime[check_positions]))
    ok = estimated_error <= config.error_threshold
    cchan.send("alice", "verdict", [int(ok)])

    if not ok:
        session = Bb84Session(
            config, a, b, b_prime, a_prime, sifted, check_positions, payload_positions,
            None, estimated_error, cchan.log, eve_record,
        )
        alice = SessionResult(None, "alice", cchan.log,
                              {"raw_bits": a, "bases": b}, aborted=True)
        bob = SessionResult(None, "bob", cchan.log,
                            {"outcomes": a_prime, "bases": b_prime}, aborted=True)
        return Bb84Outcome(True, alice, bob, session)

    u = np.concatenate(
        [gf2.sample_codeword(config.codes.c1, rng_a) for _ in range(config.blocks)]
    )
    v_alice = a[payload_positions]
    v_bob = a_prime[payload_positions]
    cchan.send("alice", "correction", u ^ v_alice)
    k_a, k_b = extract_key(config.codes, v_alice, v_bob, u)

    session = Bb84Session(
        config, a, b, b_prime, a_prime, sifted, check_positions, payload_positions,
        u, estimated_error, cchan.log, eve_record,
    )
    alice = SessionResult(k_a, "alice", cchan.log,
                          {"raw_bits": a, "bases": b, "codeword": u})
    bob = SessionResult(k_b, "bob", cchan.log,
                        {"outcomes": a_prime, "bases": b_prime})
    return Bb84Outcome(False, alice, bob, session)


def run_session(
    config: Bb84Config,
    qchan: QubitChannel,
    rng: RandomStream,
    max_attempts: int = 100,
    retry_abort: bool = False,
) -> Bb84Outcome:
    """Run until a full session completes, resampling on sift shortfall.

    With retry_abort, error-threshold aborts are also resampled; use this in
    experiments that need a completed key (detection-rate studies with an
    interceptor present).
    """
    for attempt in range(max_attempts):
        cchan = ClassicalAuthChannel()
        try:
            outcome = run_bb84(
                config,
                qchan,
                cchan,
                rng.substream("alice", attempt),
                rng.substream("bob", attempt),
                rng.substream("environment", attempt),
            )
        except SiftShortfall:
            continue
        if outcome.aborted and retry_abort:
            continue
        return outcome
    raise RuntimeError(f"no usable session after {max_attempts} attempts")
