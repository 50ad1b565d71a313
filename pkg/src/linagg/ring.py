"""Arithmetic in the negacyclic polynomial ring Z_h[x]/(x^d + 1).

Elements are coefficient vectors with every coefficient kept in the
centered range (-h/2, h/2].  Multiplication is exact integer polynomial
multiplication (carried out through big-integer packing, which is
bit-identical to the schoolbook product) followed by the x^d = -1
reduction and centered reduction mod h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
import numpy as np

from .errors import DimensionError, ParameterError

GAUSSIAN_SIGMA = 3.2
GAUSSIAN_BOUND = 20  # ceil(6 * sigma): the sampler is rejected into [-B, B]


def reduce_centered(x: int, h: int) -> int:
    """Unique representative of x mod h inside (-h/2, h/2]."""
    if h < 2:
        raise ParameterError(f"modulus must be >= 2, got {h}")
    r = x % h
    if 2 * r > h:
        r -= h
    return r


@dataclass(frozen=True)
class RingElement:
    """Degree-(d-1) polynomial with centered coefficients mod `modulus`."""

    coeffs: tuple[int, ...]
    modulus: int

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def lifted(self) -> list[int]:
        """Coefficients lifted to [0, modulus)."""
        h = self.modulus
        return [c % h for c in self.coeffs]

    def to_bytes(self) -> bytes:
        """Canonical serialization: d little-endian 8-byte words, lifted."""
        return b"".join(c.to_bytes(8, "little") for c in self.lifted())

    @classmethod
    def from_bytes(cls, data: bytes, d: int, h: int) -> "RingElement":
        if len(data) != 8 * d:
            raise DimensionError(f"expected {8 * d} bytes, got {len(data)}")
        coeffs = tuple(
            reduce_centered(int.from_bytes(data[8 * i : 8 * i + 8], "little"), h)
            for i in range(d)
        )
        return cls(coeffs, h)


def ring_from_coeffs(coeffs: Iterable[int], h: int) -> RingElement:
    """Build an element, centering every coefficient."""
    return RingElement(tuple(reduce_centered(int(c), h) for c in coeffs), h)


def zero_element(d: int, h: int) -> RingElement:
    return RingElement((0,) * d, h)


def _check_compatible(a: RingElement, b: RingElement) -> None:
    if a.degree != b.degree or a.modulus != b.modulus:
        raise DimensionError(
            f"mismatched operands: degree {a.degree}/{b.degree}, "
            f"modulus {a.modulus}/{b.modulus}"
        )


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    _check_compatible(a, b)
    h = a.modulus
    return RingElement(
        tuple(reduce_centered(x + y, h) for x, y in zip(a.coeffs, b.coeffs)), h
    )


def ring_neg(a: RingElement) -> RingElement:
    h = a.modulus
    return RingElement(tuple(reduce_centered(-x, h) for x in a.coeffs), h)


def _kronecker_mul(a: Sequence[int], b: Sequence[int], d: int, h: int) -> list[int]:
    """Exact negacyclic product via big-integer coefficient packing.

    Each lifted coefficient occupies a fixed slot wide enough to hold any
    column sum of the schoolbook product, so the integer product of the
    packed operands contains the exact convolution.
    """
    slot_bits = 2 * (h - 1).bit_length() + d.bit_length() + 1
    slot = (slot_bits + 7) // 8
    pa = b"".join((x % h).to_bytes(slot, "little") for x in a)
    pb = b"".join((x % h).to_bytes(slot, "little") for x in b)
    z = int(gmpy2.mpz(int.from_bytes(pa, "little")) * gmpy2.mpz(int.from_bytes(pb, "little")))
    zb = z.to_bytes(2 * d * slot, "little")
    out = []
    for i in range(d):
        lo = int.from_bytes(zb[i * slot : (i + 1) * slot], "little")
        hi = int.from_bytes(zb[(i + d) * slot : (i + d + 1) * slot], "little")
        out.append(reduce_centered(lo - hi, h))
    return out


def ring_mul(a: RingElement, b: RingElement, h: int | None = None) -> RingElement:
    """Product in Z[x] reduced mod (x^d + 1), then centered mod h."""
    _check_compatible(a, b)
    if h is not None and h != a.modulus:
        raise DimensionError(f"modulus argument {h} != element modulus {a.modulus}")
    return RingElement(tuple(_kronecker_mul(a.coeffs, b.coeffs, a.degree, a.modulus)), a.modulus)


def ring_scalar_mul(alpha: int, a: RingElement) -> RingElement:
    h = a.modulus
    return RingElement(tuple(reduce_centered(alpha * c, h) for c in a.coeffs), h)


def ring_linear(
    terms: Sequence[tuple[int | RingElement, RingElement]], h: int
) -> RingElement:
    """Centered sum of alpha_i * v_i; scalar alpha is the constant polynomial."""
    if not terms:
        raise ParameterError("ring_linear needs at least one term")
    d = terms[0][1].degree
    acc = [0] * d
    for alpha, v in terms:
        if v.degree != d or v.modulus != h:
            raise DimensionError("ring_linear operands disagree on degree or modulus")
        if isinstance(alpha, RingElement):
            prod = _kronecker_mul(alpha.coeffs, v.coeffs, d, h)
            for i in range(d):
                acc[i] += prod[i]
        else:
            for i, c in enumerate(v.coeffs):
                acc[i] += alpha * c
    return RingElement(tuple(reduce_centered(c, h) for c in acc), h)


def infinity_norm(v: RingElement) -> int:
    return max((abs(c) for c in v.coeffs), default=0)


def round_scale(x: RingElement, h: int, l: int) -> list[int]:
    """Per-coefficient nearest-integer of l*c/h, reduced into [0, l)."""
    out = []
    for c in x.coeffs:
        # round-half-up is exact here; h prime excludes ties
        r = (2 * l * c + h) // (2 * h)
        out.append(r % l)
    return out


# --------------------------------------------------------------------------
# Bit-packed coefficient encoding (used by transport wire formats)
# --------------------------------------------------------------------------


def pack_coeffs(values: Sequence[int], bits: int) -> bytes:
    """Pack non-negative values (< 2^bits) at `bits` bits each, little-endian.

    len(values) * bits must be a whole number of bytes.
    """
    n = len(values)
    total = n * bits
    if total % 8:
        raise ParameterError(f"{n} values at {bits} bits is not byte-aligned")
    if bits <= 63:
        arr = np.asarray(values, dtype=np.uint64)
        shifts = np.arange(bits, dtype=np.uint64)
        bitmat = ((arr[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
        return np.packbits(bitmat.ravel(), bitorder="little").tobytes()
    acc = 0
    for i, v in enumerate(values):
        acc |= int(v) << (bits * i)
    return acc.to_bytes(total // 8, "little")


def unpack_coeffs(data: bytes, count: int, bits: int) -> list[int]:
    """Inverse of pack_coeffs."""
    if len(data) * 8 != count * bits:
        raise DimensionError(f"expected {count * bits // 8} bytes, got {len(data)}")
    if bits <= 63:
        bitarr = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        bitmat = bitarr.reshape(count, bits).astype(np.int64)
        shifts = np.arange(bits, dtype=np.int64)
        return (bitmat << shifts).sum(axis=1).tolist()
    acc = int.from_bytes(data, "little")
    mask = (1 << bits) - 1
    return [(acc >> (bits * i)) & mask for i in range(count)]


def element_to_packed(v: RingElement) -> bytes:
    """Wire encoding of a ring element: coefficients lifted and bit-packed."""
    return pack_coeffs(v.lifted(), v.modulus.bit_length())


def element_from_packed(data: bytes, d: int, h: int) -> RingElement:
    vals = unpack_coeffs(data, d, h.bit_length())
    return ring_from_coeffs(vals, h)


def packed_size(d: int, h: int) -> int:
    return d * h.bit_length() // 8


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------


def find_modulus(bits: int, d: int) -> int:
    """Smallest prime with `bits` bits congruent to 1 mod 2d."""
    lo, hi = 1 << (bits - 1), 1 << bits
    step = 2 * d
    cand = lo + 1 if lo % step == 0 else lo + (step - lo % step) + 1
    while cand < hi:
        if gmpy2.is_prime(cand):
            return int(cand)
        cand += step
    raise ParameterError(f"no {bits}-bit prime congruent to 1 mod {2 * d}")


@dataclass(frozen=True)
class Params:
    """Ring and scheme parameters.

    d:      ring degree (power of two, f(x) = x^d + 1)
    h:      ciphertext modulus, prime with h = 1 mod 2d
    l:      plaintext modulus
    sigma:  std-dev of the integer Gaussian noise sampler
    bound:  rejection bound B; the sampler output always lies in [-B, B]
    a:      public uniform ring element
    lam:    security parameter
    dim:    data vector length handled by one ciphertext batch
    blocks: number of ciphertext blocks, ceil(dim / d)
    """

    d: int
    h: int
    l: int
    sigma: float
    bound: int
    a: RingElement
    lam: int = 128
    dim: int = 0
    blocks: int = field(default=0)

    def __post_init__(self):
        if self.d < 2 or self.d & (self.d - 1):
            raise ParameterError(f"ring degree must be a power of two, got {self.d}")
        if not gmpy2.is_prime(self.h):
            raise ParameterError(f"modulus {self.h} is not prime")
        if self.h % (2 * self.d) != 1:
            raise ParameterError(f"modulus must be 1 mod {2 * self.d}")
        if not (1 < self.l < self.h) or self.h // self.l < 2:
            raise ParameterError(f"plaintext modulus {self.l} incompatible with {self.h}")
        if self.bound < math.ceil(6 * self.sigma):
            raise ParameterError("noise bound below the 6-sigma truncation radius")
        if self.a.degree != self.d or self.a.modulus != self.h:
            raise ParameterError("public element does not match d, h")

    @property
    def delta(self) -> int:
        """Plaintext scaling factor floor(h / l)."""
        return self.h // self.l

    @property
    def element_bytes(self) -> int:
        return packed_size(self.d, self.h)


def sample(parm: Params, dist: str, rng: np.random.Generator) -> RingElement:
    """Draw one ring element from `uniform_h`, `ternary` or `gaussian`."""
    d, h = parm.d, parm.h
    if dist == "uniform_h":
        if h <= 1 << 62:
            vals = rng.integers(0, h, size=d, dtype=np.int64).tolist()
        else:
            vals = [int.from_bytes(rng.bytes((h.bit_length() + 71) // 8), "little") % h
                    for _ in range(d)]
        return ring_from_coeffs(vals, h)
    if dist == "ternary":
        return RingElement(tuple(int(c) for c in rng.integers(-1, 2, size=d)), h)
    if dist == "gaussian":
        vals = np.rint(rng.normal(0.0, parm.sigma, size=d)).astype(np.int64)
        bad = np.abs(vals) > parm.bound
        while bad.any():
            vals[bad] = np.rint(rng.normal(0.0, parm.sigma, size=int(bad.sum()))).astype(np.int64)
            bad = np.abs(vals) > parm.bound
        return RingElement(tuple(int(c) for c in vals), h)
    raise ParameterError(f"unknown distribution {dist!r}")


# --------------------------------------------------------------------------
# Decryption-noise budget
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseBoundReport:
    mode: str
    bound: int
    budget: int  # exclusive cap: correctness needs bound < budget
    satisfied: bool


def validate_noise_bound(parm: Params, n: int, a_max: int, mode: str = "worst_case") -> NoiseBoundReport:
    """Cap on the accumulated decryption noise versus the h/(2l) budget.

    worst_case uses the expansion factor d of x^d + 1; heuristic substitutes
    sqrt(d) (central-limit estimate, advisory only).
    """
    if n < 1:
        raise ParameterError(f"user count must be >= 1, got {n}")
    if a_max < 1:
        raise ParameterError(f"maximum coefficient norm must be >= 1, got {a_max}")
    if mode == "worst_case":
        expansion = parm.d
    elif mode == "heuristic":
        expansion = math.isqrt(parm.d)
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    bound = n * parm.bound * (1 + expansion * a_max * (1 + 2 * expansion * n))
    satisfied = 2 * parm.l * bound < parm.h
    budget = -(-parm.h // (2 * parm.l))  # ceil
    return NoiseBoundReport(mode=mode, bound=bound, budget=budget, satisfied=satisfied)
