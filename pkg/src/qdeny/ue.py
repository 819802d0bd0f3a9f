"""Uncloneable encryption, its fake-pad denial algebra, and key exchange
built on top of it.

The plaintext-plus-tag string is one-time padded before any quantum
encoding, so the qubits only ever bind the adversary to the padded
codeword z. Whoever knows the pad can therefore reopen an observed
ciphertext to any plaintext of their choice by handing over the fake pad
(real padded string) XOR (fake plaintext-plus-tag); the syndrome and basis
key parts are revealed honestly and stay consistent with any record of z.

The authentication tag is a one-time polynomial hash over GF(2^s): the
message is split into s-bit blocks, evaluated as a polynomial at a secret
field point, and masked with a second secret; the key therefore holds 2s
bits. Zero message under the zero key gives the all-zero tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gf2
from .channel import ClassicalAuthChannel
from .gf2 import DualContainingPair
from .qcore import Basis, StateVector, measure, prepare_bb84
from .rng import RandomStream

__all__ = [
    "MacScheme",
    "UeParams",
    "UeKey",
    "DecryptionOutcome",
    "QkeFromUeResult",
    "mac_tag",
    "mac_verify",
    "generate_ue_key",
    "ue_encrypt",
    "ue_decrypt",
    "ue_fake",
    "fake_opens_consistently",
    "qke_from_ue",
    "ue_key_to_json",
    "ue_key_from_json",
]

_MAX_TAG_BITS = 32


# -- GF(2^s) arithmetic on ints ----------------------------------------------


def _clmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_mod(a: int, f: int) -> int:
    fdeg = f.bit_length() - 1
    while a.bit_length() - 1 >= fdeg:
        a ^= f << (a.bit_length() - 1 - fdeg)
    return a


def _gf_mul(a: int, b: int, f: int) -> int:
    return _poly_mod(_clmul(a, b), f)


def _gf_pow(a: int, e: int, f: int) -> int:
    out, base = 1, a
    while e:
        if e & 1:
            out = _gf_mul(out, base, f)
        base = _gf_mul(base, base, f)
        e >>= 1
    return out


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def _is_irreducible(f: int, s: int) -> bool:
    # Rabin: x^(2^s) == x mod f, and gcd(x^(2^(s/q)) - x, f) == 1 for prime q | s
    x = _poly_mod(0b10, f)
    if _gf_pow(x, 1 << s, f) != x:
        return False
    primes = set()
    m = s
    d = 2
    while d * d <= m:
        while m % d == 0:
            primes.add(d)
            m //= d
        d += 1
    if m > 1:
        primes.add(m)
    for q in primes:
        probe = _gf_pow(x, 1 << (s // q), f) ^ x
        if _poly_gcd(f, probe) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def _irreducible(s: int) -> int:
    """Lowest-valued degree-s irreducible polynomial over GF(2)."""
    for low in range(1, 1 << s, 2):  # constant term must be 1
        f = (1 << s) | low
        if _is_irreducible(f, s):
            return f
    raise RuntimeError(f"no irreducible polynomial of degree {s} found")


# -- one-time MAC --------------------------------------------------------------


@dataclass(frozen=True)
class MacScheme:
    """One-time polynomial-evaluation MAC with s-bit tags and 2s-bit keys."""

    s: int
    modulus: int = 0

    def __post_init__(self):
        if not 1 <= self.s <= _MAX_TAG_BITS:
            raise ValueError(f"tag length must lie in [1, {_MAX_TAG_BITS}]")
        object.__setattr__(self, "modulus", _irreducible(self.s))

    @property
    def key_bits(self) -> int:
        return 2 * self.s

    def blocks(self, message_bits: int) -> int:
        return (message_bits + 1 + self.s - 1) // self.s  # includes the 1-padding

    def forgery_bound(self, message_bits: int) -> float:
        return self.blocks(message_bits) / float(1 << self.s)


def _bits_to_int(v: np.ndarray) -> int:
    out = 0
    for b in v:
        out = (out << 1) | int(b)
    return out


def _int_to_bits(x: int, length: int) -> np.ndarray:
    return np.array([(x >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)


def mac_tag(scheme: MacScheme, key: np.ndarray, message: np.ndarray) -> np.ndarray:
    """Tag = poly-eval of the 1-padded message at the point half of the key,
    masked with the other half. Deterministic in (key, message)."""
    key = gf2.bits(key)
    message = gf2.bits(message)
    if key.size != scheme.key_bits:
        raise ValueError(f"key must hold {scheme.key_bits} bits")
    point = _bits_to_int(key[: scheme.s])
    mask = _bits_to_int(key[scheme.s :])
    padded = np.concatenate([message, [1]])
    pad_len = (-padded.size) % scheme.s
    padded = np.concatenate([padded, np.zeros(pad_len, dtype=np.uint8)])
    acc = 0
    for start in range(0, padded.size, scheme.s):
        block = _bits_to_int(padded[start : start + scheme.s])
        acc = _gf_mul(acc ^ block, point, scheme.modulus)
    return _int_to_bits(acc ^ mask, scheme.s)


def mac_verify(scheme: MacScheme, key: np.ndarray, message: np.ndarray, tag: np.ndarray) -> bool:
    return bool(np.array_equal(mac_tag(scheme, key, message), gf2.bits(tag)))


# -- UE parameters and keys -----------------------------------------------------


@dataclass(frozen=True)
class UeParams:
    """Message length n, tag length s, and the per-block code pair."""

    n: int
    s: int
    pair: DualContainingPair = field(default_factory=gf2.default_dual_pair)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("message length must be positive")
        per_block = self.pair.payload_bits
        if (self.n + self.s) % per_block:
            raise ValueError(
                f"n + s = {self.n + self.s} must be a multiple of the"
                f" per-block payload {per_block}"
            )

    @property
    def scheme(self) -> MacScheme:
        return MacScheme(self.s)

    @property
    def blocks(self) -> int:
        return (self.n + self.s) // self.pair.payload_bits

    @property
    def block_length(self) -> int:
        return self.pair.c1.n

    @property
    def n_qubits(self) -> int:
        return self.blocks * self.block_length

    @property
    def syndrome_bits(self) -> int:
        return self.blocks * (self.pair.c1.n - self.pair.c1.k)


@dataclass(frozen=True)
class UeKey:
    """Pre-shared key: MAC key, one-time pad, per-block syndromes, bases."""

    k: np.ndarray
    e: np.ndarray
    c1_syn: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("k", "e", "c1_syn", "b"):
            object.__setattr__(self, name, gf2.bits(getattr(self, name)))

    def check_shape(self, params: UeParams) -> None:
        expect = {
            "k": params.scheme.key_bits,
            "e": params.n + params.s,
            "c1_syn": params.syndrome_bits,
            "b": params.n_qubits,
        }
        for name, size in expect.items():
            if getattr(self, name).size != size:
                raise ValueError(f"UE key field {name} must hold {size} bits")


def generate_ue_key(params: UeParams, rng: RandomStream) -> UeKey:
    """All four key pieces drawn uniformly at random."""
    return UeKey(
        k=rng.bits(params.scheme.key_bits),
        e=rng.bits(params.n + params.s),
        c1_syn=rng.bits(params.syndrome_bits),
        b=rng.bits(params.n_qubits),
    )


def ue_key_to_json(params: UeParams, key: UeKey) -> str:
    key.check_shape(params)
    payload = {
        "n": params.n,
        "s": params.s,
        "k": gf2.bits_to_hex(key.k),
        "e": gf2.bits_to_hex(key.e),
        "c1_syn": gf2.bits_to_hex(key.c1_syn),
        "b": gf2.bits_to_hex(key.b),
    }
    return json.dumps(payload, sort_keys=True)


def ue_key_from_json(params: UeParams, text: str) -> UeKey:
    data = json.loads(text)
    if data.get("n") != params.n or data.get("s") != params.s:
        raise ValueError("key material belongs to different parameters")
    return UeKey(
        k=gf2.hex_to_bits(data["k"], params.scheme.key_bits),
        e=gf2.hex_to_bits(data["e"], params.n + params.s),
        c1_syn=gf2.hex_to_bits(data["c1_syn"], params.syndrome_bits),
        b=gf2.hex_to_bits(data["b"], params.n_qubits),
    )


# -- encryption / decryption ----------------------------------------------------


def _padded_plaintext(params: UeParams, key: UeKey, message: np.ndarray) -> np.ndarray:
    tag = mac_tag(params.scheme, key.k, message)
    x = np.concatenate([message, tag])
    return x ^ key.e  # y = x XOR pad


def _block_slices(params: UeParams):
    per = params.pair.payload_bits
    nb, syn = params.block_length, params.pair.c1.n - params.pair.c1.k
    for i in range(params.blocks):
        yield (
            slice(i * per, (i + 1) * per),  # payload bits
            slice(i * syn, (i + 1) * syn),  # syndrome bits
            slice(i * nb, (i + 1) * nb),  # codeword bits
        )


def _encode(
    params: UeParams, key: UeKey, message: np.ndarray, rng: RandomStream
) -> tuple[list[StateVector], np.ndarray]:
    message = gf2.bits(message)
    if message.size != params.n:
        raise ValueError(f"message must hold {params.n} bits")
    key.check_shape(params)
    y = _padded_plaintext(params, key, message)
    z = np.empty(params.n_qubits, dtype=np.uint8)
    for pay_sl, syn_sl, code_sl in _block_slices(params):
        z[code_sl] = gf2.encode_ue_codeword(params.pair, key.c1_syn[syn_sl], y[pay_sl], rng)
    states = [prepare_bb84(int(z[i]), Basis.from_bit(key.b[i])) for i in range(params.n_qubits)]
    return states, z


def ue_encrypt(
    params: UeParams, key: UeKey, message: np.ndarray, rng: RandomStream
) -> list[StateVector]:
    """Encode message||tag XOR pad into per-block random codewords, one qubit
    per codeword bit in the pre-shared basis sequence."""
    return _encode(params, key, message, rng)[0]


@dataclass(frozen=True)
class DecryptionOutcome:
    accepted: bool
    message: np.ndarray | None
    measured: np.ndarray  # raw codeword measurements, before correction

    def __post_init__(self):
        if self.accepted and self.message is None:
            raise ValueError("accepted decryptions carry the message")


def ue_decrypt(
    params: UeParams, key: UeKey, states: list[StateVector], rng: RandomStream
) -> DecryptionOutcome:
    """Measure in the key bases, correct relative to the key syndromes,
    apply the quotient checks, strip the pad and verify the tag.

    Measurement outcomes on tampered qubits are genuinely random, hence the
    explicit stream argument.
    """
    key.check_shape(params)
    if len(states) != params.n_qubits:
        raise ValueError(f"expected {params.n_qubits} qubits, got {len(states)}")
    z_meas = np.empty(params.n_qubits, dtype=np.uint8)
    for i, state in enumerate(states):
        outcome, _ = measure(state, Basis.from_bit(key.b[i]), rng)
        z_meas[i] = outcome
    y = np.empty(params.n + params.s, dtype=np.uint8)
    for pay_sl, syn_sl, code_sl in _block_slices(params):
        block = z_meas[code_sl]
        rel_syn = gf2.syndrome(params.pair.c1, block) ^ key.c1_syn[syn_sl]
        corrected = block ^ gf2.coset_leader(params.pair.c1, rel_syn)
        y[pay_sl] = (params.pair.quotient_checks @ corrected) % 2
    x = y ^ key.e
    message, tag = x[: params.n], x[params.n :]
    if mac_verify(params.scheme, key.k, message, tag):
        return DecryptionOutcome(True, message, z_meas)
    return DecryptionOutcome(False, None, z_meas)


def ue_fake(
    params: UeParams, key: UeKey, message: np.ndarray, m_fake: np.ndarray, rng: RandomStream
) -> UeKey:
    """Fake key opening the sent ciphertext to m_fake.

    Picks a fresh MAC key, tags the fake message, and sets the fake pad to
    (real padded string) XOR (fake plaintext-plus-tag), so decrypting the
    observed codewords under the fake key yields m_fake with a valid tag.
    Syndrome and bases are revealed honestly. The sender needs her real
    message to form the padded string; nothing about the transmitted
    codeword itself is required.
    """
    message, m_fake = gf2.bits(message), gf2.bits(m_fake)
    if message.size != params.n or m_fake.size != params.n:
        raise ValueError(f"messages must hold {params.n} bits")
    key.check_shape(params)
    y = _padded_plaintext(params, key, message)
    k_fake = rng.bits(params.scheme.key_bits)
    tag_fake = mac_tag(params.scheme, k_fake, m_fake)
    x_fake = np.concatenate([m_fake, tag_fake])
    return UeKey(k=k_fake, e=y ^ x_fake, c1_syn=key.c1_syn, b=key.b)


def fake_opens_consistently(
    params: UeParams, claimed_key: UeKey, m_claimed: np.ndarray, z: np.ndarray
) -> bool:
    """Judge replay against a full record of the transmitted codeword.

    Even an adversary bound to every (codeword bit, basis) pair finds no
    inconsistency: the claimed key must reproduce the recorded codeword's
    syndromes, and decoding the record under the claimed key must yield the
    claimed message with a verifying tag.
    """
    m_claimed = gf2.bits(m_claimed)
    z = gf2.bits(z)
    claimed_key.check_shape(params)
    if z.size != params.n_qubits:
        raise ValueError("record length mismatch")
    y = np.empty(params.n + params.s, dtype=np.uint8)
    for pay_sl, syn_sl, code_sl in _block_slices(params):
        block = z[code_sl]
        if np.any(gf2.syndrome(params.pair.c1, block) ^ claimed_key.c1_syn[syn_sl]):
            return False
        y[pay_sl] = (params.pair.quotient_checks @ block) % 2
    x = y ^ claimed_key.e
    message, tag = x[: params.n], x[params.n :]
    if not np.array_equal(message, m_claimed):
        return False
    return mac_verify(params.scheme, claimed_key.k, message, tag)


# -- key exchange from UE --------------------------------------------------------


@dataclass(frozen=True)
class QkeFromUeResult:
    accepted: bool
    key_alice: np.ndarray | None
    key_bob: np.ndarray | None
    transcript: tuple
    sent_codeword: np.ndarray  # what actually rode the quantum channel


def qke_from_ue(
    params: UeParams,
    key: UeKey,
    rng: RandomStream,
    interceptor=None,
) -> QkeFromUeResult:
    """Key exchange by sending a fresh random string under UE.

    The sender draws the future session key, ships it encrypted, and only
    announces the MAC key after the receiver confirms arrival; acceptance is
    announced back. An interceptor, when given, acts on the qubits in
    flight (tamper evidence comes from the tag check).
    """
    key.check_shape(params)
    cchan = ClassicalAuthChannel()
    x_key = rng.substream("key-material").bits(params.n)
    states, sent = _encode(params, key, x_key, rng.substream("encoder"))
    if interceptor is not None:
        states, _ = interceptor.intercept(states, rng.substream("interceptor"))
    cchan.send("bob", "received", [1])
    cchan.send("alice", "mac-key", key.k)
    outcome = ue_decrypt(params, key, states, rng.substream("decoder"))
    cchan.send("bob", "valid", [int(outcome.accepted)])
    if not outcome.accepted:
        return QkeFromUeResult(False, None, None, cchan.log, sent)
    return QkeFromUeResult(True, x_key, outcome.message, cchan.log, sent)
