"""Entanglement filtering, teleportation, and the decoupling check behind
the information-theoretic denial argument.

Partially entangled pairs cos(theta)|00> + sin(theta)|11> are filtered one
at a time by a local two-outcome operation on the first qubit; success
leaves a perfect ebit and happens with probability 2*sin^2(theta) for
theta <= pi/4 (the filter attacks the other amplitude past pi/4). The
asymptotic conversion ceiling for such pairs is the entanglement entropy
H2(cos^2 theta); single-pair filtering stays below it and the gap is
reported, not hidden.

Once a pair passes verification, teleporting a fresh qubit through it
consumes the pair and publishes two uniformly random classical bits that
carry no information about the teleported state; an eavesdropper of the
classical channel is left with a maximally mixed view, which is the
decoupling that eve_decoupling_check certifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from .channel import ClassicalAuthChannel
from .gf2 import NestedCodePair
from .qcore import Basis, BellKind, StateVector
from .rng import RandomStream

__all__ = [
    "PartialPair",
    "DistillReport",
    "TeleportRecord",
    "binary_entropy",
    "procrustean_filter",
    "distill_batch",
    "verify_ebits",
    "teleport",
    "eve_decoupling_check",
    "qke_over_teleportation",
]

_EBIT_TOL = 1e-9
_FIDELITY_TOL = 1e-10


@dataclass(frozen=True)
class PartialPair:
    """Two qubits in cos(theta)|00> + sin(theta)|11>, 0 < theta < pi/2."""

    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta < np.pi / 2:
            raise ValueError("theta must lie strictly between 0 and pi/2")

    @property
    def state(self) -> StateVector:
        amps = np.zeros(4, dtype=complex)
        amps[0b00] = np.cos(self.theta)
        amps[0b11] = np.sin(self.theta)
        return StateVector(2, amps)

    @property
    def success_probability(self) -> float:
        return float(2 * min(np.sin(self.theta) ** 2, np.cos(self.theta) ** 2))


@dataclass(frozen=True)
class DistillReport:
    attempted: int
    succeeded: int
    output_fidelity_min: float
    rate_bound: float

    def __post_init__(self):
        if self.succeeded > self.attempted:
            raise ValueError("cannot succeed more often than attempted")

    @property
    def rate(self) -> float:
        return self.succeeded / self.attempted if self.attempted else 0.0


@dataclass(frozen=True)
class TeleportRecord:
    """Two classical bits per teleported qubit plus the applied correction."""

    classical_bits: tuple[int, int]
    correction: str  # 'I', 'X', 'Z' or 'XZ'


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability out of range")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def procrustean_filter(pair: PartialPair, rng: RandomStream) -> StateVector | None:
    """Single-pair local filtering; returns the ebit on success, else None.

    The first qubit passes through the two-outcome operation with Kraus
    elements diag(t, 1) and diag(sqrt(1 - t^2), 0) where t = tan(theta)
    (amplitudes swap roles for theta > pi/4). One uniform draw decides the
    outcome; the success branch is exactly the Phi+ ebit.
    """
    theta = pair.theta
    amps = pair.state.amplitudes.copy()
    if theta <= np.pi / 4:
        scale = np.tan(theta)  # shrink the |00> amplitude down to the |11> one
        filtered = np.array([amps[0] * scale, 0, 0, amps[3]], dtype=complex)
    else:
        scale = 1 / np.tan(theta)
        filtered = np.array([amps[0], 0, 0, amps[3] * scale], dtype=complex)
    p_success = float(np.sum(np.abs(filtered) ** 2))
    if rng.random() >= p_success:
        return None
    return StateVector(2, filtered / np.sqrt(p_success))


def distill_batch(
    n: int, theta: float, rng: RandomStream
) -> tuple[list[StateVector], DistillReport]:
    """Filter n independent pairs; report achieved rate against the ceiling."""
    if n < 1:
        raise ValueError("need at least one pair")
    pair = PartialPair(theta)
    phi_plus = qcore.bell_state(BellKind.PHI_PLUS)
    ebits: list[StateVector] = []
    min_fid = 1.0
    for _ in range(n):
        out = procrustean_filter(pair, rng)
        if out is not None:
            ebits.append(out)
            min_fid = min(min_fid, qcore.fidelity(phi_plus, qcore.to_density(out)))
    bound = binary_entropy(float(np.cos(theta) ** 2))
    report = DistillReport(
        attempted=n,
        succeeded=len(ebits),
        output_fidelity_min=min_fid if ebits else 0.0,
        rate_bound=bound,
    )
    return ebits, report


def verify_ebits(
    pairs: list[StateVector], sample_fraction: float, rng: RandomStream
) -> tuple[bool, list[StateVector]]:
    """Sacrifice a random sample for direct fidelity evaluation.

    Returns (passed, unsampled pairs). Simulation privilege: the check reads
    the state vectors instead of running a statistical test on measurement
    outcomes; any sampled pair below fidelity 1 - 1e-9 with the ebit aborts.
    """
    if not pairs:
        raise ValueError("nothing to verify")
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample fraction must lie in (0, 1]")
    n_sample = max(1, int(round(sample_fraction * len(pairs))))
    chosen = set(rng.choice_distinct(len(pairs), n_sample).tolist())
    phi_plus = qcore.bell_state(BellKind.PHI_PLUS)
    for i in chosen:
        if qcore.fidelity(phi_plus, qcore.to_density(pairs[i])) < 1.0 - _EBIT_TOL:
            return False, [p for j, p in enumerate(pairs) if j not in chosen]
    return True, [p for j, p in enumerate(pairs) if j not in chosen]


_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def teleport(
    psi: StateVector, ebit: StateVector, rng: RandomStream
) -> tuple[StateVector, TeleportRecord]:
    """Teleport a single-qubit state through a shared Phi+ pair.

    Bell measurement on (input, sender half), two classical bits out,
    conditional Pauli fix-up on the receiver half. Anything but a perfect
    ebit is rejected up front.
    """
    if psi.n_qubits != 1:
        raise ValueError("can only teleport a single qubit")
    if ebit.n_qubits != 2:
        raise ValueError("the shared pair must be two qubits")
    phi_plus = qcore.bell_state(BellKind.PHI_PLUS)
    if qcore.fidelity(phi_plus, qcore.to_density(ebit)) < 1.0 - _EBIT_TOL:
        raise ValueError("shared pair is not a Phi+ ebit")

    joint = qcore.tensor(psi, ebit)  # qubits: 0 input, 1 sender half, 2 receiver
    joint = qcore.apply_unitary(joint, _CNOT, [0, 1])
    joint = qcore.apply_unitary(joint, qcore.HADAMARD, [0])
    m_phase, joint = qcore.measure_subsystem(joint, 0, Basis.COMPUTATIONAL, rng)
    m_bit, joint = qcore.measure_subsystem(joint, 1, Basis.COMPUTATIONAL, rng)

    correction = ""
    if m_bit:
        joint = qcore.apply_unitary(joint, qcore.PAULI_X, [2])
        correction += "X"
    if m_phase:
        joint = qcore.apply_unitary(joint, qcore.PAULI_Z, [2])
        correction += "Z"

    # qubits 0 and 1 are collapsed; the receiver qubit is the surviving slice
    out = StateVector(1, joint.tensor_shape()[m_phase, m_bit, :])
    record = TeleportRecord(classical_bits=(m_phase, m_bit), correction=correction or "I")
    return out, record


def eve_decoupling_check(
    state: StateVector, a_qubit: int, b_qubit: int
) -> bool:
    """True iff the (a, b) pair is maximally entangled and pure, which forces
    every other subsystem to decouple into a product factor.

    Certifies both halves: the pair's reduced state must be pure with a
    fully mixed single-qubit reduction (that is fidelity 1 with some
    maximally entangled state), and the global state must equal the product
    of the pair's state with the remainder's, in trace distance.
    """
    n = state.n_qubits
    if a_qubit == b_qubit or not (0 <= a_qubit < n and 0 <= b_qubit < n):
        raise ValueError("invalid A/B partition")
    rho = qcore.to_density(state)
    rho_ab = qcore.partial_trace(rho, [a_qubit, b_qubit])
    if abs(qcore.purity(rho_ab) - 1.0) > _EBIT_TOL:
        return False
    rho_a = qcore.partial_trace(rho_ab, [0])
    if np.max(np.abs(rho_a.matrix - np.eye(2) / 2)) > _EBIT_TOL:
        return False
    rest = [q for q in range(n) if q not in (a_qubit, b_qubit)]
    if rest:
        rho_rest = qcore.partial_trace(rho, rest)
        reordered = qcore.permute_qubits(state, [a_qubit, b_qubit] + rest)
        product = qcore.tensor(rho_ab, rho_rest)
        if qcore.trace_distance(qcore.to_density(reordered), product) > _EBIT_TOL:
            return False
    return True


def qke_over_teleportation(
    m: int,
    theta: float,
    rng: RandomStream,
    codes: NestedCodePair | None = None,
    attempt_budget: int = 50,
) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Key exchange where the quantum layer rides teleportation.

    Distills at least m ebits from partially entangled pairs, verifies a
    sample, teleports m fresh BB84 states, then runs the usual sifting and
    check steps on the measurement records. The classical transcript holds
    exactly 2m teleportation bits plus the usual protocol messages.

    Key extraction is skipped (keys are the sifted check-passing bits
    directly) when no code pair is given; with one, payload bits feed the
    same coset construction as the plain protocol.
    """
    if m < 1:
        raise ValueError("need at least one teleported qubit")
    needed = m + max(4, m // 4)  # sacrifice margin for verification
    pair = PartialPair(theta)
    ebits: list[StateVector] = []
    for attempt in range(attempt_budget):
        batch, _ = distill_batch(needed * 2, theta, rng.substream("filter", attempt))
        ebits.extend(batch)
        if len(ebits) >= needed:
            break
    if len(ebits) < needed:
        raise RuntimeError(f"distillation shortfall: {len(ebits)} of {needed} ebits")
    ok, ebits = verify_ebits(ebits, sample_fraction=(len(ebits) - m) / len(ebits),
                             rng=rng.substream("verify"))
    if not ok or len(ebits) < m:
        raise RuntimeError("ebit verification failed")

    cchan = ClassicalAuthChannel()
    rng_a, rng_b = rng.substream("alice"), rng.substream("bob")
    a, b = rng_a.bits(m), rng_a.bits(m)
    b_prime = rng_b.bits(m)
    a_prime = np.empty(m, dtype=np.uint8)
    teleport_bits = np.empty(2 * m, dtype=np.uint8)
    for i in range(m):
        state = qcore.prepare_bb84(int(a[i]), Basis.from_bit(b[i]))
        received, record = teleport(state, ebits[i], rng.substream("teleport", i))
        teleport_bits[2 * i : 2 * i + 2] = record.classical_bits
        outcome, _ = qcore.measure(received, Basis.from_bit(b_prime[i]), rng_b)
        a_prime[i] = outcome
    cchan.send("alice", "teleport-bits", teleport_bits)

    cchan.send("alice", "bases", b)
    matched = np.where(b == b_prime)[0]
    cchan.send("bob", "sift-mask", np.isin(np.arange(m), matched).astype(np.uint8))
    half = matched.size // 2
    check_sel = rng_a.choice_distinct(matched.size, half)
    check_pos = matched[check_sel]
    payload_pos = np.setdiff1d(matched, check_pos)
    cchan.send("alice", "check-values-alice", a[check_pos])
    cchan.send("bob", "check-values-bob", a_prime[check_pos])
    errors = int(np.sum(a[check_pos] ^ a_prime[check_pos]))
    cchan.send("alice", "verdict", [int(errors == 0)])
    if errors:
        raise RuntimeError("teleported qubits disagreed on check bits")
    key_a, key_b = a[payload_pos], a_prime[payload_pos]
    if codes is not None:
        from .bb84 import extract_key
        from .gf2 import sample_codeword

        nb = codes.c1.n
        usable = (payload_pos.size // nb) * nb
        if usable:
            u = np.concatenate(
                [sample_codeword(codes.c1, rng_a) for _ in range(usable // nb)]
            )
            cchan.send("alice", "correction", u ^ key_a[:usable])
            key_a, key_b = extract_key(codes, key_a[:usable], key_b[:usable], u)
    return key_a, key_b, cchan.log
