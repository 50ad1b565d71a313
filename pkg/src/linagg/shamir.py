"""Shamir threshold sharing over Z_h and Lagrange reconstruction.

Shares are evaluations of a uniform random polynomial with the secret as
constant term, at the party evaluation points 1..n.  Values are kept
lifted in [0, h); centered conversion happens only at the ring boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np

from .errors import ParameterError, ThresholdError
from .ring import RingElement, ring_from_coeffs


@dataclass(frozen=True)
class Share:
    """One party's evaluation of the sharing polynomial."""

    index: int  # evaluation point, nonzero mod h
    value: int  # in [0, h)

    def to_bytes(self) -> bytes:
        return struct.pack("<IQ", self.index, self.value)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Share":
        index, value = struct.unpack("<IQ", data)
        return cls(index, value)


def _rand_mod(rng: np.random.Generator, h: int) -> int:
    if h <= 1 << 62:
        return int(rng.integers(0, h))
    return int.from_bytes(rng.bytes((h.bit_length() + 71) // 8), "little") % h


def _eval_poly(coeffs: Sequence[int], x: int, h: int) -> int:
    """Horner evaluation of coeffs[0] + coeffs[1] x + ... mod h."""
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % h
    return acc


def _split_with_coeffs(coeffs: Sequence[int], n: int, h: int) -> list[Share]:
    return [Share(x, _eval_poly(coeffs, x, h)) for x in range(1, n + 1)]


def _check_split_args(n: int, t: int, h: int) -> None:
    if not 1 <= t <= n:
        raise ParameterError(f"threshold {t} outside 1..{n}")
    if n >= h:
        raise ParameterError(f"{n} parties need a field larger than {h}")
    if not gmpy2.is_prime(h):
        raise ParameterError(f"Shamir field modulus {h} must be prime")


def ss_split(secret: int, n: int, t: int, h: int, rng: np.random.Generator) -> list[Share]:
    """Split `secret` into n shares, any t of which reconstruct it."""
    _check_split_args(n, t, h)
    coeffs = [secret % h] + [_rand_mod(rng, h) for _ in range(t - 1)]
    return _split_with_coeffs(coeffs, n, h)


def lagrange_coeffs(indices: Sequence[int], h: int) -> dict[int, int]:
    """Interpolation weights at zero: li_u = prod_{v!=u} x_v / (x_v - x_u) mod h."""
    idx = [i % h for i in indices]
    if len(set(idx)) != len(idx) or 0 in idx:
        raise ParameterError("evaluation points must be distinct and nonzero mod h")
    out = {}
    for u in indices:
        num, den = 1, 1
        for v in indices:
            if v == u:
                continue
            num = num * v % h
            den = den * (v - u) % h
        out[u] = num * pow(den, -1, h) % h
    return out


def ss_recover(shares: Sequence[Share], t: int, h: int) -> int:
    """Lagrange interpolation at zero across >= t shares."""
    if len(shares) < t:
        raise ThresholdError(f"need at least {t} shares, got {len(shares)}")
    li = lagrange_coeffs([s.index for s in shares], h)
    return sum(li[s.index] * s.value for s in shares) % h


# --------------------------------------------------------------------------
# Coefficient-wise sharing of ring elements
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RingShares:
    """One party's share of a list of ring elements, coefficient by coefficient.

    values[k][i] is the party's share of coefficient i of element k, lifted
    to [0, h).
    """

    index: int
    values: tuple[tuple[int, ...], ...]

    def share_count(self) -> int:
        return sum(len(v) for v in self.values)


def _split_vector(secrets: list[int], n: int, t: int, h: int, rng: np.random.Generator) -> list[list[int]]:
    """Share a vector of field elements; returns per-party value lists.

    Vectorized Horner over int64 when products cannot overflow, otherwise a
    plain big-int loop.
    """
    m = len(secrets)
    if t == 1:
        return [list(secrets) for _ in range(n)]
    if h <= 1 << 62 and n * h + h < 1 << 63:
        coeffs = np.empty((t, m), dtype=np.int64)
        coeffs[0] = np.asarray(secrets, dtype=np.int64)
        coeffs[1:] = rng.integers(0, h, size=(t - 1, m), dtype=np.int64)
        out = []
        for x in range(1, n + 1):
            acc = coeffs[t - 1].copy()
            for k in range(t - 2, -1, -1):
                acc = (acc * x + coeffs[k]) % h
            out.append(acc.tolist())
        return out
    polys = [[s] + [_rand_mod(rng, h) for _ in range(t - 1)] for s in secrets]
    return [[_eval_poly(p, x, h) for p in polys] for x in range(1, n + 1)]


def split_ring(
    elems: Sequence[RingElement], n: int, t: int, h: int, rng: np.random.Generator
) -> list[RingShares]:
    """Independent Shamir split of every coefficient, grouped by recipient."""
    _check_split_args(n, t, h)
    per_elem = [_split_vector(e.lifted(), n, t, h, rng) for e in elems]
    return [
        RingShares(index=x, values=tuple(tuple(pe[x - 1]) for pe in per_elem))
        for x in range(1, n + 1)
    ]


def recover_ring(parts: Sequence[RingShares], t: int, h: int) -> list[RingElement]:
    """Coefficient-wise reconstruction back to centered ring elements."""
    if len(parts) < t:
        raise ThresholdError(f"need at least {t} share groups, got {len(parts)}")
    li = lagrange_coeffs([p.index for p in parts], h)
    n_elems = len(parts[0].values)
    out = []
    for k in range(n_elems):
        cols = [p.values[k] for p in parts]
        weights = [li[p.index] for p in parts]
        d = len(cols[0])
        coeffs = [
            sum(w * col[i] for w, col in zip(weights, cols)) % h for i in range(d)
        ]
        out.append(ring_from_coeffs(coeffs, h))
    return out
