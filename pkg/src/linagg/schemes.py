"""Uniform byte-level adapters over the two encryption suites.

The protocol state machines, the on-chain evaluation check and the
benchmark driver all speak wire bytes; these adapters own the
serialization so that ciphertext recomputation on the chain is
byte-exact with the server's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import ecelgamal as ec
from . import lattice
from . import ring as rg
from .errors import FormatError
from .ring import Params


class LatticeScheme:
    name = "lattice"

    def __init__(self, parm: Params):
        self.parm = parm

    def keygen(self, rng: np.random.Generator) -> lattice.LatticeKeyPair:
        return lattice.keygen(self.parm, rng)

    def public_bytes(self, kp: lattice.LatticeKeyPair) -> bytes:
        return rg.element_to_packed(kp.pk_ring) + kp.hybrid.public

    def hybrid_key_of(self, public: bytes) -> bytes:
        return public[-32:]

    def _ring_key_of(self, public: bytes) -> rg.RingElement:
        body = public[:-32]
        if len(body) != self.parm.element_bytes:
            raise FormatError("public key encoding has the wrong length")
        return rg.element_from_packed(body, self.parm.d, self.parm.h)

    def share(
        self,
        peer_publics: Mapping[int, bytes],
        own_index: int,
        t: int,
        kp: lattice.LatticeKeyPair,
        rng: np.random.Generator,
    ) -> tuple[dict[int, bytes], lattice.DealtShares]:
        peers = {i: self.hybrid_key_of(p) for i, p in peer_publics.items()}
        dealt = lattice.share(self.parm, peers, own_index, t, kp, rng)
        return {i: b.payload for i, b in dealt.bundles.items()}, dealt

    def combine(self, publics: Sequence[bytes]) -> rg.RingElement:
        return lattice.combkey(self.parm, [self._ring_key_of(p) for p in publics])

    def encrypt(self, combined, data: Sequence[int], rng: np.random.Generator) -> bytes:
        ct = lattice.enc(self.parm, combined, lattice.encode(data, self.parm), rng)
        return ct.to_bytes()

    def eval_bytes(self, ciphers: Sequence[bytes], alphas: Sequence[int]) -> bytes:
        cts = [lattice.Ciphertext.from_bytes(c, self.parm) for c in ciphers]
        return lattice.eval_linear(self.parm, cts, list(alphas)).to_bytes()

    def partial_bytes(
        self,
        chat: bytes,
        bundles: Mapping[int, bytes],
        retained: lattice.DealtShares,
        kp: lattice.LatticeKeyPair,
    ) -> bytes:
        ct = lattice.Ciphertext.from_bytes(chat, self.parm)
        wrapped = {
            i: lattice.ShareBundle(recipient=retained.own.index, payload=p)
            for i, p in bundles.items()
        }
        part = lattice.pardec(self.parm, ct, wrapped, retained.own, kp.hybrid.secret)
        return part.to_bytes()

    def finalize(self, chat: bytes, partials: Sequence[bytes], t: int) -> list[int]:
        ct = lattice.Ciphertext.from_bytes(chat, self.parm)
        parts = [lattice.PartialDecryption.from_bytes(p, self.parm) for p in partials]
        return lattice.findec(self.parm, t, ct, parts)


class EcScheme:
    name = "ec_elgamal"

    def __init__(self, dim: int, decode_bound: int = 1 << 32):
        self.dim = dim
        self.decode_bound = decode_bound

    def keygen(self, rng: np.random.Generator) -> ec.EcKeyPair:
        return ec.ec_keygen(rng)

    def public_bytes(self, kp: ec.EcKeyPair) -> bytes:
        return kp.pk.encode() + kp.hybrid.public

    def hybrid_key_of(self, public: bytes) -> bytes:
        return public[-32:]

    def share(
        self,
        peer_publics: Mapping[int, bytes],
        own_index: int,
        t: int,
        kp: ec.EcKeyPair,
        rng: np.random.Generator,
    ) -> tuple[dict[int, bytes], ec.EcDealtShares]:
        peers = {i: self.hybrid_key_of(p) for i, p in peer_publics.items()}
        dealt = ec.ec_share(peers, own_index, t, kp.secret, rng)
        return dict(dealt.bundles), dealt

    def combine(self, publics: Sequence[bytes]) -> ec.Point:
        return ec.ec_combkey([ec.Point.decode(p[: ec.POINT_BYTES]) for p in publics])

    def encrypt(self, combined, data: Sequence[int], rng: np.random.Generator) -> bytes:
        return ec.ec_enc(combined, data, rng).to_bytes()

    def eval_bytes(self, ciphers: Sequence[bytes], alphas: Sequence[int]) -> bytes:
        cts = [ec.EcCiphertext.from_bytes(c) for c in ciphers]
        return ec.ec_eval(cts, list(alphas)).to_bytes()

    def partial_bytes(
        self,
        chat: bytes,
        bundles: Mapping[int, bytes],
        retained: ec.EcDealtShares,
        kp: ec.EcKeyPair,
    ) -> bytes:
        ct = ec.EcCiphertext.from_bytes(chat)
        part = ec.ec_pardec(ct, bundles, retained.own, kp.hybrid.secret)
        return part.to_bytes()

    def finalize(self, chat: bytes, partials: Sequence[bytes], t: int) -> list[int]:
        ct = ec.EcCiphertext.from_bytes(chat)
        parts = [ec.EcPartial.from_bytes(p) for p in partials]
        return ec.ec_findec(t, ct, parts, bound=self.decode_bound)


@dataclass(frozen=True)
class SchemeSpec:
    """Factory arguments resolved from a protocol configuration."""

    kind: str
    dim: int
    d: int = 2048
    h_bits: int = 54
    l: int = 65537
    decode_bound: int = 1 << 32


def build_scheme(spec: SchemeSpec, rng: np.random.Generator):
    if spec.kind == "lattice":
        parm = lattice.setup(128, spec.d, spec.h_bits, spec.l, spec.dim, rng)
        return LatticeScheme(parm)
    if spec.kind == "ec_elgamal":
        return EcScheme(dim=spec.dim, decode_bound=spec.decode_bound)
    raise FormatError(f"unknown scheme kind {spec.kind!r}")
