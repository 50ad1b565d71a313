"""Lifted (exponent) ElGamal over secp256r1 with threshold decryption.

Messages ride in the exponent, so ciphertexts add point-wise and scalar
weights act by scalar multiplication; decryption ends with a Baby-Step
Giant-Step search for the small aggregate exponent.  Secret keys are
Shamir-shared over the prime group order, transported under the same
hybrid encryption as the lattice scheme.

The group backend is a minimal Jacobian-coordinate implementation kept
behind the Point interface (no point-arithmetic library is available in
this environment); it is validated against P-256 known-answer vectors in
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from gmpy2 import invert, mpz

from . import shamir
from .crypto import HybridKeyPair, hybrid_dec, hybrid_enc, hybrid_gen
from .errors import (
    FormatError,
    ParameterError,
    RangeError,
    ShareTransportError,
    ThresholdError,
)

# secp256r1 domain parameters
FIELD_PRIME = 0xFFFFFFFF00000001000000000000000000000000FFFFFFFFFFFFFFFFFFFFFFFF
CURVE_A = -3 % FIELD_PRIME
CURVE_B = 0x5AC635D8AA3A93E7B3EBBD55769886BC651D06B0CC53B0F63BCE3C3E27D2604B
GROUP_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
_GX = 0x6B17D1F2E12C4247F8BCE6E563A440F277037D812DEB33A0F4A13945D898C296
_GY = 0x4FE342E2FE1A7F9B8EE7EB4A7C0F9E162BCE33576B315ECECBB6406837BF51F5

POINT_BYTES = 33

_P = mpz(FIELD_PRIME)
_A = mpz(CURVE_A)


def _jac_double(X1, Y1, Z1):
    if not Y1:
        return mpz(0), mpz(0), mpz(0)
    XX = X1 * X1 % _P
    YY = Y1 * Y1 % _P
    YYYY = YY * YY % _P
    ZZ = Z1 * Z1 % _P
    S = 2 * ((X1 + YY) ** 2 - XX - YYYY) % _P
    M = (3 * XX + _A * ZZ * ZZ) % _P
    T = (M * M - 2 * S) % _P
    Y3 = (M * (S - T) - 8 * YYYY) % _P
    Z3 = ((Y1 + Z1) ** 2 - YY - ZZ) % _P
    return T, Y3, Z3


def _jac_add(X1, Y1, Z1, X2, Y2, Z2):
    if not Z1:
        return X2, Y2, Z2
    if not Z2:
        return X1, Y1, Z1
    Z1Z1 = Z1 * Z1 % _P
    Z2Z2 = Z2 * Z2 % _P
    U1 = X1 * Z2Z2 % _P
    U2 = X2 * Z1Z1 % _P
    S1 = Y1 * Z2 * Z2Z2 % _P
    S2 = Y2 * Z1 * Z1Z1 % _P
    if U1 == U2:
        if S1 != S2:
            return mpz(0), mpz(0), mpz(0)
        return _jac_double(X1, Y1, Z1)
    H = (U2 - U1) % _P
    I = (2 * H) ** 2 % _P
    J = H * I % _P
    r = 2 * (S2 - S1) % _P
    V = U1 * I % _P
    X3 = (r * r - J - 2 * V) % _P
    Y3 = (r * (V - X3) - 2 * S1 * J) % _P
    Z3 = ((Z1 + Z2) ** 2 - Z1Z1 - Z2Z2) % _P * H % _P
    return X3, Y3, Z3


@dataclass(frozen=True)
class Point:
    """Affine curve point; x is None for the identity."""

    x: int | None
    y: int | None

    def is_identity(self) -> bool:
        return self.x is None

    def __add__(self, other: "Point") -> "Point":
        if self.is_identity():
            return other
        if other.is_identity():
            return self
        p = FIELD_PRIME
        if self.x == other.x:
            if (self.y + other.y) % p == 0:
                return IDENTITY
            num = (3 * self.x * self.x + CURVE_A) % p
            den = (2 * self.y) % p
        else:
            num = (other.y - self.y) % p
            den = (other.x - self.x) % p
        s = num * int(invert(den, _P)) % p
        x3 = (s * s - self.x - other.x) % p
        y3 = (s * (self.x - x3) - self.y) % p
        return Point(x3, y3)

    def __neg__(self) -> "Point":
        if self.is_identity():
            return self
        return Point(self.x, (-self.y) % FIELD_PRIME)

    def __sub__(self, other: "Point") -> "Point":
        return self + (-other)

    def __rmul__(self, k: int) -> "Point":
        k %= GROUP_ORDER
        if k == 0 or self.is_identity():
            return IDENTITY
        R = (mpz(0), mpz(0), mpz(0))
        Q = (mpz(self.x), mpz(self.y), mpz(1))
        while k:
            if k & 1:
                R = _jac_add(*R, *Q)
            k >>= 1
            if k:
                Q = _jac_double(*Q)
        if not R[2]:
            return IDENTITY
        zi = invert(R[2], _P)
        zi2 = zi * zi % _P
        return Point(int(R[0] * zi2 % _P), int(R[1] * zi2 * zi % _P))

    def encode(self) -> bytes:
        """33-byte compressed encoding; the identity is all zeros."""
        if self.is_identity():
            return b"\x00" * POINT_BYTES
        prefix = 0x02 | (self.y & 1)
        return bytes([prefix]) + self.x.to_bytes(32, "big")

    @classmethod
    def decode(cls, data: bytes) -> "Point":
        if len(data) != POINT_BYTES:
            raise FormatError(f"point encoding must be {POINT_BYTES} bytes")
        if data == b"\x00" * POINT_BYTES:
            return IDENTITY
        prefix, x = data[0], int.from_bytes(data[1:], "big")
        if prefix not in (2, 3) or x >= FIELD_PRIME:
            raise FormatError("invalid compressed point")
        p = FIELD_PRIME
        rhs = (pow(x, 3, p) + CURVE_A * x + CURVE_B) % p
        y = pow(rhs, (p + 1) // 4, p)  # p = 3 mod 4
        if y * y % p != rhs:
            raise FormatError("x-coordinate not on curve")
        if (y & 1) != (prefix & 1):
            y = p - y
        return cls(x, y)


IDENTITY = Point(None, None)
GENERATOR = Point(_GX, _GY)


# --------------------------------------------------------------------------
# DTAHE operation suite
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EcKeyPair:
    secret: int  # scalar mod group order
    pk: Point
    hybrid: HybridKeyPair


@dataclass(frozen=True)
class EcCiphertext:
    pairs: tuple[tuple[Point, Point], ...]  # per element: (r*G, r*pk + m*G)

    def to_bytes(self) -> bytes:
        return b"".join(c0.encode() + c1.encode() for c0, c1 in self.pairs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EcCiphertext":
        if len(data) % (2 * POINT_BYTES):
            raise FormatError("ciphertext length is not a whole number of pairs")
        pairs = []
        for off in range(0, len(data), 2 * POINT_BYTES):
            c0 = Point.decode(data[off : off + POINT_BYTES])
            c1 = Point.decode(data[off + POINT_BYTES : off + 2 * POINT_BYTES])
            pairs.append((c0, c1))
        return cls(tuple(pairs))


@dataclass(frozen=True)
class EcPartial:
    index: int
    points: tuple[Point, ...]

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(4, "little") + b"".join(p.encode() for p in self.points)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EcPartial":
        if len(data) < 4 or (len(data) - 4) % POINT_BYTES:
            raise FormatError("partial decryption length mismatch")
        index = int.from_bytes(data[:4], "little")
        points = tuple(
            Point.decode(data[off : off + POINT_BYTES])
            for off in range(4, len(data), POINT_BYTES)
        )
        return cls(index, points)


@dataclass(frozen=True)
class EcDealtShares:
    bundles: dict[int, bytes]  # recipient -> hybrid ciphertext of a 32-byte share
    own: shamir.Share


def _rand_scalar(rng: np.random.Generator) -> int:
    return int.from_bytes(rng.bytes(40), "little") % GROUP_ORDER


def ec_keygen(rng: np.random.Generator) -> EcKeyPair:
    x = _rand_scalar(rng)
    return EcKeyPair(secret=x, pk=x * GENERATOR, hybrid=hybrid_gen(rng))


def ec_share(
    peer_keys: Mapping[int, bytes],
    own_index: int,
    t: int,
    secret: int,
    rng: np.random.Generator,
) -> EcDealtShares:
    n = len(peer_keys) + 1
    if t > n:
        raise ThresholdError(f"threshold {t} exceeds party count {n}")
    if set(peer_keys) | {own_index} != set(range(1, n + 1)):
        raise ParameterError(f"evaluation points must be 1..{n}")
    shares = shamir.ss_split(secret, n, t, GROUP_ORDER, rng)
    bundles, own = {}, None
    for s in shares:
        if s.index == own_index:
            own = s
            continue
        bundles[s.index] = hybrid_enc(peer_keys[s.index], s.value.to_bytes(32, "little"), rng)
    return EcDealtShares(bundles=bundles, own=own)


def ec_combkey(pks: Sequence[Point]) -> Point:
    if not pks:
        raise ParameterError("ec_combkey needs at least one key")
    acc = IDENTITY
    for pk in pks:
        acc = acc + pk
    return acc


def ec_enc(pk: Point, data: Sequence[int], rng: np.random.Generator) -> EcCiphertext:
    pairs = []
    for m in data:
        if m < 0:
            raise RangeError(f"datum {m} must be non-negative")
        r = _rand_scalar(rng)
        pairs.append((r * GENERATOR, r * pk + m * GENERATOR))
    return EcCiphertext(tuple(pairs))


def ec_eval(ciphers: Sequence[EcCiphertext], alphas: Sequence[int]) -> EcCiphertext:
    if not ciphers:
        raise ParameterError("ec_eval needs at least one ciphertext")
    if len(ciphers) != len(alphas):
        raise ParameterError("one coefficient per ciphertext required")
    dim = len(ciphers[0].pairs)
    if any(len(c.pairs) != dim for c in ciphers):
        raise FormatError("ciphertexts disagree on element count")
    out = []
    for i in range(dim):
        acc0, acc1 = IDENTITY, IDENTITY
        for alpha, ct in zip(alphas, ciphers):
            if alpha == 0:
                continue
            c0, c1 = ct.pairs[i]
            acc0 = acc0 + alpha * c0
            acc1 = acc1 + alpha * c1
        out.append((acc0, acc1))
    return EcCiphertext(tuple(out))


def ec_pardec(
    chat: EcCiphertext,
    bundles: Mapping[int, bytes],
    own: shamir.Share,
    hybrid_sk: bytes,
) -> EcPartial:
    """Weight every element's first component by the summed incoming shares."""
    total = own.value
    for sender in sorted(bundles):
        try:
            plain = hybrid_dec(hybrid_sk, bundles[sender])
        except Exception as exc:
            raise ShareTransportError(f"cannot open bundle from {sender}") from exc
        if len(plain) != 32:
            raise FormatError("share payload must be 32 bytes")
        total = (total + int.from_bytes(plain, "little")) % GROUP_ORDER
    points = tuple(total * c0 for c0, _ in chat.pairs)
    return EcPartial(index=own.index, points=points)


def ec_findec(t: int, chat: EcCiphertext, partials: Sequence[EcPartial],
              bound: int = 1 << 32) -> list[int]:
    if len(partials) < t:
        raise ThresholdError(f"need {t} partial decryptions, got {len(partials)}")
    li = shamir.lagrange_coeffs([p.index for p in partials], GROUP_ORDER)
    out = []
    for i, (_, c1) in enumerate(chat.pairs):
        mask = IDENTITY
        for p in partials:
            mask = mask + li[p.index] * p.points[i]
        out.append(bsgs_decode(c1 - mask, bound))
    return out


# --------------------------------------------------------------------------
# Baby-Step Giant-Step decoding
# --------------------------------------------------------------------------

_baby_tables: dict[int, dict[bytes, int]] = {}


def _baby_table(m: int) -> dict[bytes, int]:
    table = _baby_tables.get(m)
    if table is None:
        table = {}
        acc = IDENTITY
        for j in range(m):
            table[acc.encode()] = j
            acc = acc + GENERATOR
        _baby_tables[m] = table
    return table


def _isqrt_ceil(x: int) -> int:
    r = math.isqrt(x)
    return r if r * r == x else r + 1


def bsgs_decode(target: Point, bound: int) -> int:
    """Discrete log of `target` base G, assuming it lies in [0, bound)."""
    if bound < 1:
        raise ParameterError("decode bound must be positive")
    table_size = _isqrt_ceil(bound)
    table = _baby_table(table_size)
    stride = -(table_size * GENERATOR)
    gamma = target
    for i in range(_isqrt_ceil(bound) + 1):
        j = table.get(gamma.encode())
        if j is not None:
            value = i * table_size + j
            if value < bound:
                return value
        gamma = gamma + stride
    raise RangeError(f"no discrete log below {bound}: aggregate overflow")
