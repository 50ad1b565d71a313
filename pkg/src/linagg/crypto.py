"""Hybrid public-key encryption for share transport, signatures, and a mock CA.

The hybrid scheme is X25519 key agreement + HKDF-SHA256 + AES-256-GCM
(ephemeral-static KEM/DEM).  Signatures are Ed25519.  All key generation
draws from an explicit generator so protocol runs are reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import DecryptionError, FormatError

_NONCE_LEN = 12
_KDF_INFO = b"linagg-share-transport"

# hybrid ciphertext layout: ephemeral pk (32) || nonce (12) || AES-GCM ct+tag
HYBRID_OVERHEAD = 32 + _NONCE_LEN + 16


@dataclass(frozen=True)
class HybridKeyPair:
    public: bytes  # 32-byte X25519 public key
    secret: bytes  # 32-byte X25519 private key


def _derive_key(shared: bytes) -> bytes:
    return HKDF(algorithm=SHA256(), length=32, salt=None, info=_KDF_INFO).derive(shared)


def hybrid_gen(rng: np.random.Generator) -> HybridKeyPair:
    sk = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    pub = sk.public_key().public_bytes_raw()
    return HybridKeyPair(public=pub, secret=sk.private_bytes_raw())


def hybrid_enc(pk: bytes, plaintext: bytes, rng: np.random.Generator) -> bytes:
    eph = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    shared = eph.exchange(X25519PublicKey.from_public_bytes(pk))
    nonce = rng.bytes(_NONCE_LEN)
    ct = AESGCM(_derive_key(shared)).encrypt(nonce, plaintext, None)
    return eph.public_key().public_bytes_raw() + nonce + ct


def hybrid_dec(sk: bytes, ciphertext: bytes) -> bytes:
    if len(ciphertext) < HYBRID_OVERHEAD:
        raise DecryptionError("hybrid ciphertext too short")
    eph_pub, nonce = ciphertext[:32], ciphertext[32 : 32 + _NONCE_LEN]
    body = ciphertext[32 + _NONCE_LEN :]
    try:
        shared = X25519PrivateKey.from_private_bytes(sk).exchange(
            X25519PublicKey.from_public_bytes(eph_pub)
        )
        return AESGCM(_derive_key(shared)).decrypt(nonce, body, None)
    except (InvalidTag, ValueError) as exc:
        raise DecryptionError("authenticated decryption failed") from exc


# --------------------------------------------------------------------------
# Signatures
# --------------------------------------------------------------------------


def sig_gen(rng: np.random.Generator) -> tuple[bytes, bytes]:
    """Return (signing key, verification key), 32 bytes each."""
    sk = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))
    return sk.private_bytes_raw(), sk.public_key().public_bytes_raw()


def sig_sign(sk: bytes, msg: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(sk).sign(msg)


def sig_verify(vk: bytes, msg: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(vk).verify(sig, msg)
        return True
    except (InvalidSignature, ValueError):
        return False


# --------------------------------------------------------------------------
# Mock certificate authority
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    subject: bytes
    key: bytes  # subject verification key
    issuer: bytes
    signature: bytes  # issuer signature over subject || key

    def to_bytes(self) -> bytes:
        parts = []
        for f in (self.subject, self.key, self.issuer, self.signature):
            parts.append(struct.pack("<I", len(f)))
            parts.append(f)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        fields, off = [], 0
        for _ in range(4):
            if off + 4 > len(data):
                raise FormatError("truncated certificate")
            (n,) = struct.unpack_from("<I", data, off)
            off += 4
            if off + n > len(data):
                raise FormatError("truncated certificate field")
            fields.append(data[off : off + n])
            off += n
        if off != len(data):
            raise FormatError("trailing bytes after certificate")
        return cls(*fields)


def _cert_body(subject: bytes, key: bytes) -> bytes:
    return struct.pack("<I", len(subject)) + subject + key


class CertificateAuthority:
    """Single in-process issuer with one Ed25519 key pair."""

    def __init__(self, rng: np.random.Generator, issuer_id: bytes = b"linagg-test-ca"):
        self._sk, self.verify_key = sig_gen(rng)
        self.issuer_id = issuer_id

    def issue(self, identity: bytes, vk: bytes) -> Certificate:
        sig = sig_sign(self._sk, _cert_body(identity, vk))
        return Certificate(subject=identity, key=vk, issuer=self.issuer_id, signature=sig)


def cert_verify(cert: Certificate, ca_vk: bytes) -> bool:
    return sig_verify(ca_vk, _cert_body(cert.subject, cert.key), cert.signature)
