"""Lattice-based threshold additive homomorphic encryption.

Keys are RLWE pairs over the negacyclic ring; every user Shamir-shares its
secret key together with one smoothing-noise polynomial per ciphertext
block, so any t parties can jointly decrypt an evaluated cipher while
individual partial decryptions stay masked.

Data vectors longer than the ring degree span several independent
ciphertext blocks that share the public element and key material.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import ring as rg
from . import shamir
from .crypto import HybridKeyPair, hybrid_dec, hybrid_enc, hybrid_gen
from .errors import (
    DimensionError,
    FormatError,
    ParameterError,
    RangeError,
    ShareTransportError,
    ThresholdError,
)
from .ring import Params, RingElement


def setup(
    lam: int,
    d: int,
    h_bits: int,
    l: int,
    dim: int,
    rng: np.random.Generator,
    sigma: float = rg.GAUSSIAN_SIGMA,
    bound: int = rg.GAUSSIAN_BOUND,
) -> Params:
    """Parameter generation: modulus search, fresh public element, block count."""
    h = rg.find_modulus(h_bits, d)
    blocks = -(-dim // d) if dim else 0
    base = Params(d=d, h=h, l=l, sigma=sigma, bound=bound,
                  a=rg.zero_element(d, h), lam=lam, dim=dim, blocks=blocks)
    a = rg.sample(base, "uniform_h", rng)
    return Params(d=d, h=h, l=l, sigma=sigma, bound=bound,
                  a=a, lam=lam, dim=dim, blocks=blocks)


@dataclass(frozen=True)
class LatticeKeyPair:
    sk_ring: RingElement  # ternary secret
    pk_ring: RingElement  # -(a*sk + e) centered mod h
    hybrid: HybridKeyPair


def keygen(parm: Params, rng: np.random.Generator) -> LatticeKeyPair:
    s = rg.sample(parm, "ternary", rng)
    e = rg.sample(parm, "gaussian", rng)
    pk = rg.ring_neg(rg.ring_add(rg.ring_mul(parm.a, s), e))
    return LatticeKeyPair(sk_ring=s, pk_ring=pk, hybrid=hybrid_gen(rng))


@dataclass(frozen=True)
class ShareBundle:
    """Hybrid-encrypted share transport to one recipient."""

    recipient: int
    payload: bytes  # hybrid ciphertext of (1+blocks) packed share groups


@dataclass(frozen=True)
class DealtShares:
    """Everything a dealer produces in one sharing round.

    `own` is the dealer-retained share group (never transported); `noise`
    holds the smoothing polynomials themselves, which the dealer knows by
    construction and the correctness oracles consume.
    """

    bundles: dict[int, ShareBundle]
    own: shamir.RingShares
    noise: tuple[RingElement, ...]


def _pack_groups(groups: Sequence[Sequence[int]], h: int) -> bytes:
    bits = h.bit_length()
    return b"".join(rg.pack_coeffs(g, bits) for g in groups)


def _unpack_groups(data: bytes, n_groups: int, d: int, h: int) -> list[list[int]]:
    bits = h.bit_length()
    step = d * bits // 8
    if len(data) != n_groups * step:
        raise FormatError(
            f"share payload: expected {n_groups * step} bytes, got {len(data)}"
        )
    return [rg.unpack_coeffs(data[i * step : (i + 1) * step], d, bits) for i in range(n_groups)]


def share(
    parm: Params,
    peer_keys: Mapping[int, bytes],
    own_index: int,
    t: int,
    keypair: LatticeKeyPair,
    rng: np.random.Generator,
) -> DealtShares:
    """Shamir-share the secret key and per-block smoothing noise to all peers.

    peer_keys maps the other parties' evaluation points (roster ordinals)
    to their hybrid public keys; the dealer keeps its own share group.
    """
    n = len(peer_keys) + 1
    if t > n:
        raise ThresholdError(f"threshold {t} exceeds party count {n}")
    indices = set(peer_keys) | {own_index}
    if indices != set(range(1, n + 1)):
        raise ParameterError(f"evaluation points must be 1..{n}, got {sorted(indices)}")
    noise = tuple(rg.sample(parm, "gaussian", rng) for _ in range(parm.blocks))
    parts = shamir.split_ring([keypair.sk_ring, *noise], n, t, parm.h, rng)
    bundles = {}
    own = None
    for part in parts:
        if part.index == own_index:
            own = part
            continue
        payload = hybrid_enc(peer_keys[part.index], _pack_groups(part.values, parm.h), rng)
        bundles[part.index] = ShareBundle(recipient=part.index, payload=payload)
    return DealtShares(bundles=bundles, own=own, noise=noise)


def combkey(parm: Params, pks: Sequence[RingElement]) -> RingElement:
    if not pks:
        raise ParameterError("combkey needs at least one public key")
    return rg.ring_linear([(1, pk) for pk in pks], parm.h)


# --------------------------------------------------------------------------
# Message packing
# --------------------------------------------------------------------------


def encode(data: Sequence[int], parm: Params) -> list[list[int]]:
    """Place datum i at coefficient i mod d of block i // d, zero-padded."""
    d = parm.d
    blocks = [[0] * d for _ in range(parm.blocks)]
    for i, x in enumerate(data):
        if not 0 <= x < parm.l:
            raise RangeError(f"datum {x} outside [0, {parm.l})")
        blocks[i // d][i % d] = int(x)
    return blocks


def decode(blocks: Sequence[Sequence[int]], dim: int) -> list[int]:
    flat = [c for b in blocks for c in b]
    return flat[:dim]


@dataclass(frozen=True)
class Ciphertext:
    blocks: tuple[tuple[RingElement, RingElement], ...]

    def to_bytes(self) -> bytes:
        count = len(self.blocks).to_bytes(4, "little")
        body = b"".join(
            rg.element_to_packed(c0) + rg.element_to_packed(c1) for c0, c1 in self.blocks
        )
        return count + body

    @classmethod
    def from_bytes(cls, data: bytes, parm: Params) -> "Ciphertext":
        if len(data) < 4:
            raise FormatError("truncated ciphertext")
        count = int.from_bytes(data[:4], "little")
        step = parm.element_bytes
        if len(data) != 4 + count * 2 * step:
            raise FormatError("ciphertext length mismatch")
        blocks = []
        off = 4
        for _ in range(count):
            c0 = rg.element_from_packed(data[off : off + step], parm.d, parm.h)
            c1 = rg.element_from_packed(data[off + step : off + 2 * step], parm.d, parm.h)
            blocks.append((c0, c1))
            off += 2 * step
        return cls(tuple(blocks))


def enc(
    parm: Params,
    pk: RingElement,
    blocks: Sequence[Sequence[int]],
    rng: np.random.Generator,
    noiseless: bool = False,
) -> Ciphertext:
    """Encrypt plaintext blocks under the combined key.

    `noiseless` zeroes the encryption randomness (test hook): the result is
    c0 = 0, c1 = floor(h/l) * m.
    """
    if len(blocks) != parm.blocks:
        raise DimensionError(f"expected {parm.blocks} blocks, got {len(blocks)}")
    delta = parm.delta
    out = []
    for m in blocks:
        scaled = rg.ring_from_coeffs([delta * c for c in m], parm.h)
        if noiseless:
            out.append((rg.zero_element(parm.d, parm.h), scaled))
            continue
        u = rg.sample(parm, "ternary", rng)
        e0 = rg.sample(parm, "gaussian", rng)
        e1 = rg.sample(parm, "gaussian", rng)
        c0 = rg.ring_add(rg.ring_mul(parm.a, u), e0)
        c1 = rg.ring_add(rg.ring_add(rg.ring_mul(pk, u), e1), scaled)
        out.append((c0, c1))
    return Ciphertext(tuple(out))


def eval_linear(
    parm: Params,
    ciphers: Sequence[Ciphertext],
    alphas: Sequence[int | RingElement],
    allow_ring_coeffs: bool = False,
) -> Ciphertext:
    """Block-wise linear combination of ciphertexts with scalar weights."""
    if not ciphers:
        raise ParameterError("eval_linear needs at least one ciphertext")
    if len(ciphers) != len(alphas):
        raise DimensionError("one coefficient per ciphertext required")
    n_blocks = len(ciphers[0].blocks)
    if any(len(c.blocks) != n_blocks for c in ciphers):
        raise DimensionError("ciphertexts disagree on block count")
    for a in alphas:
        if isinstance(a, RingElement):
            if not allow_ring_coeffs:
                raise ParameterError("ring coefficients disabled; pass allow_ring_coeffs=True")
        elif a < 0:
            raise ParameterError(f"scalar coefficient must be non-negative, got {a}")
    out = []
    for j in range(n_blocks):
        c0 = rg.ring_linear([(a, c.blocks[j][0]) for a, c in zip(alphas, ciphers)], parm.h)
        c1 = rg.ring_linear([(a, c.blocks[j][1]) for a, c in zip(alphas, ciphers)], parm.h)
        out.append((c0, c1))
    return Ciphertext(tuple(out))


# --------------------------------------------------------------------------
# Threshold decryption
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PartialDecryption:
    index: int
    blocks: tuple[RingElement, ...]

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(4, "little") + b"".join(
            rg.element_to_packed(b) for b in self.blocks
        )

    @classmethod
    def from_bytes(cls, data: bytes, parm: Params) -> "PartialDecryption":
        step = parm.element_bytes
        if len(data) < 4 or (len(data) - 4) % step:
            raise FormatError("partial decryption length mismatch")
        index = int.from_bytes(data[:4], "little")
        blocks = tuple(
            rg.element_from_packed(data[4 + i * step : 4 + (i + 1) * step], parm.d, parm.h)
            for i in range((len(data) - 4) // step)
        )
        return cls(index, blocks)


def _sum_share_groups(groups: list[list[list[int]]], d: int, h: int) -> list[RingElement]:
    """Coefficient-wise sum over senders of each share group, centered."""
    n_groups = len(groups[0])
    out = []
    use_np = h <= 1 << 62 and (len(groups) + 1) * h < 1 << 63
    for k in range(n_groups):
        if use_np:
            acc = np.zeros(d, dtype=np.int64)
            for g in groups:
                acc = (acc + np.asarray(g[k], dtype=np.int64)) % h
            vals = acc.tolist()
        else:
            vals = [sum(g[k][i] for g in groups) % h for i in range(d)]
        out.append(rg.ring_from_coeffs(vals, h))
    return out


def pardec(
    parm: Params,
    chat: Ciphertext,
    bundles: Mapping[int, ShareBundle],
    own: shamir.RingShares,
    hybrid_sk: bytes,
) -> PartialDecryption:
    """One party's decryption contribution for the evaluated cipher.

    `bundles` maps sender index -> the bundle addressed to this party;
    `own` is the party's dealer-retained share group.
    """
    n_groups = 1 + len(chat.blocks)
    groups = [list(list(v) for v in own.values)]
    if len(groups[0]) != n_groups:
        raise FormatError(
            f"own share group has {len(groups[0])} elements, expected {n_groups}"
        )
    for sender in sorted(bundles):
        try:
            plain = hybrid_dec(hybrid_sk, bundles[sender].payload)
        except Exception as exc:
            raise ShareTransportError(f"cannot open bundle from {sender}") from exc
        groups.append(_unpack_groups(plain, n_groups, parm.d, parm.h))
    summed = _sum_share_groups(groups, parm.d, parm.h)
    sk_part, noise_parts = summed[0], summed[1:]
    out = []
    for j, (c0, _) in enumerate(chat.blocks):
        out.append(rg.ring_add(rg.ring_mul(c0, sk_part), noise_parts[j]))
    return PartialDecryption(index=own.index, blocks=tuple(out))


def findec(
    parm: Params,
    t: int,
    chat: Ciphertext,
    partials: Sequence[PartialDecryption],
) -> list[int]:
    """Lagrange-combine >= t partial decryptions and decode the aggregate."""
    if len(partials) < t:
        raise ThresholdError(f"need {t} partial decryptions, got {len(partials)}")
    indices = [p.index for p in partials]
    li = shamir.lagrange_coeffs(indices, parm.h)
    plain_blocks = []
    for j, (_, c1) in enumerate(chat.blocks):
        cs = rg.ring_linear([(li[p.index], p.blocks[j]) for p in partials], parm.h)
        plain_blocks.append(rg.round_scale(rg.ring_add(c1, cs), parm.h, parm.l))
    return decode(plain_blocks, parm.dim)


# --------------------------------------------------------------------------
# Reference decryptions for correctness checks (test oracles)
# --------------------------------------------------------------------------


def oracle_decrypt(
    parm: Params,
    chat: Ciphertext,
    combined_sk: RingElement,
    smoothing: Sequence[RingElement] | None = None,
) -> list[int]:
    """Non-threshold reference decryption under the summed secret key."""
    plain_blocks = []
    for j, (c0, c1) in enumerate(chat.blocks):
        x = rg.ring_add(c1, rg.ring_mul(c0, combined_sk))
        if smoothing is not None:
            x = rg.ring_add(x, smoothing[j])
        plain_blocks.append(rg.round_scale(x, parm.h, parm.l))
    return decode(plain_blocks, parm.dim)


def _target_blocks(target: Sequence[int], parm: Params) -> list[list[int]]:
    """Block layout of an (unreduced) integer target vector."""
    d = parm.d
    blocks = [[0] * d for _ in range(parm.blocks)]
    for i, x in enumerate(target):
        blocks[i // d][i % d] = int(x)
    return blocks


def measure_noise(
    parm: Params,
    chat: Ciphertext,
    combined_sk: RingElement,
    smoothing: Sequence[RingElement],
    target: Sequence[int],
) -> list[RingElement]:
    """White-box extraction of the residual decryption noise per block.

    `target` is the exact integer linear combination of the plaintexts.
    """
    delta = parm.delta
    tb = _target_blocks(target, parm)
    out = []
    for j, (c0, c1) in enumerate(chat.blocks):
        x = rg.ring_add(rg.ring_add(c1, rg.ring_mul(c0, combined_sk)), smoothing[j])
        out.append(
            rg.ring_from_coeffs(
                [xc - delta * mc for xc, mc in zip(x.coeffs, tb[j])], parm.h
            )
        )
    return out


def simulate_pardec(
    parm: Params,
    chat: Ciphertext,
    known_partials: Mapping[int, PartialDecryption],
    target: Sequence[int],
    noise_blocks: Sequence[RingElement],
    u: int,
    decrypt_set: Sequence[int],
) -> PartialDecryption:
    """Reconstruct party u's partial decryption without its shares.

    Given the t-1 other partials in the decryption set, the exact plaintext
    combination and the measured residual noise, the remaining partial is
    determined; the result must equal the real one coefficient-exact.
    """
    v_set = list(decrypt_set)
    if u not in v_set or set(known_partials) != set(v_set) - {u}:
        raise ParameterError("decrypt_set must be the known partials plus u")
    li = shamir.lagrange_coeffs(v_set, parm.h)
    inv_u = pow(li[u], -1, parm.h)
    delta = parm.delta
    tb = _target_blocks(target, parm)
    out = []
    for j, (_, c1) in enumerate(chat.blocks):
        acc = [delta * tb[j][i] + noise_blocks[j].coeffs[i] - c1.coeffs[i]
               for i in range(parm.d)]
        for v, part in known_partials.items():
            lv = li[v]
            for i, c in enumerate(part.blocks[j].coeffs):
                acc[i] -= lv * c
        out.append(rg.ring_from_coeffs([inv_u * c for c in acc], parm.h))
    return PartialDecryption(index=u, blocks=tuple(out))
