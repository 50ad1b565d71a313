"""Four-round dropout-tolerant aggregation protocol, basic and secure variants.

One period runs AdvertiseKeys/Accounts -> ShareKeys -> CipherCollection ->
Decryption over an in-process transport with a controllable per-round drop
schedule.  The secure variant routes ciphers and the server's evaluation
through the chain contract, signs round-1 advertisements, and refuses to
decrypt when the server's claimed roster is inconsistent — the defense
against cipher substitution.

Rosters only ever shrink: U4 <= U3 <= U2 <= U1.  The server admits a period
at round 1 only with strictly more than t advertisements; later rounds
proceed while at least t parties remain.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import chain as ch
from . import crypto
from .errors import ParameterError
from .schemes import SchemeSpec, build_scheme

IDENT_BYTES = 4
TIMESTAMP_BYTES = 8
AUX_BYTES = 8
RECORD_NAME_BYTES = len(b"Record")

STOP_DECLINED = "Declined"
STOP_VERIFY_FAILED = "VerifyFailed"
STOP_THRESHOLD = "BelowThreshold"
STOP_ESID = "EsidMismatch"
STOP_ROSTER = "RosterMismatch"

ATTACK_NONE = "none"
ATTACK_SUBSTITUTE = "substitute-cipher"
ATTACK_DUPLICATE_ESID = "duplicate-esid"


@dataclass(frozen=True)
class ProtocolConfig:
    n_target: int
    threshold: int
    dim: int
    scheme: str = "lattice"
    variant: str = "basic"
    n_corrupt: int = 0
    lambda_min: int | None = None  # minimum honest inputs in an aggregate
    dropouts: Mapping[int, frozenset[int]] = field(default_factory=dict)
    freshness_window: float = 120.0
    periods: int = 1
    min_value: int = ch.DEFAULT_MIN_VALUE
    policy_min_deposit: int = 1
    policy_min_periods: int = 1
    d: int = 2048
    h_bits: int = 54
    l: int = 65537
    decode_bound: int = 1 << 32

    def __post_init__(self):
        if self.threshold < 2:
            raise ParameterError(f"threshold must be >= 2, got {self.threshold}")
        if self.threshold > self.n_target:
            raise ParameterError("threshold exceeds the target user count")
        lam = self.threshold - self.n_corrupt if self.lambda_min is None else self.lambda_min
        if lam < self.threshold - self.n_corrupt:
            raise ParameterError(
                f"lambda_min {lam} below threshold - corrupt bound "
                f"{self.threshold - self.n_corrupt}"
            )
        object.__setattr__(self, "lambda_min", lam)
        if self.variant not in ("basic", "secure"):
            raise ParameterError(f"unknown variant {self.variant!r}")
        if self.scheme not in ("lattice", "ec_elgamal"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class FaultPlan:
    """Adversarial fixtures injected into one period."""

    attack: str = ATTACK_NONE
    corrupt_sigs: frozenset[int] = frozenset()
    timestamp_skew: Mapping[int, float] = field(default_factory=dict)
    duplicate_hellos: frozenset[int] = frozenset()
    stray_bundles: frozenset[int] = frozenset()


@dataclass(frozen=True)
class TranscriptEntry:
    round: int
    sender: str
    receiver: str
    kind: str
    nbytes: int
    digest: str


class Transcript:
    def __init__(self):
        self.entries: list[TranscriptEntry] = []

    def log(self, round_: int, sender: str, receiver: str, kind: str, payload: bytes):
        self.entries.append(
            TranscriptEntry(
                round=round_, sender=sender, receiver=receiver, kind=kind,
                nbytes=len(payload),
                digest=hashlib.sha256(payload).hexdigest()[:16],
            )
        )

    def views(self) -> dict[int, list[TranscriptEntry]]:
        out: dict[int, list[TranscriptEntry]] = {}
        for e in self.entries:
            out.setdefault(e.round, []).append(e)
        return out

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.__dict__, sort_keys=True) + "\n" for e in self.entries
        )


@dataclass
class PeriodOutcome:
    result: list[int] | None
    aborted_round: int | None
    reason: str | None
    transcript: Transcript
    rosters: dict[int, list[int]]
    stopped_clients: dict[int, str]
    server_audit: list[str]

    @property
    def succeeded(self) -> bool:
        return self.result is not None


# --------------------------------------------------------------------------
# Messages
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Hello:
    ident: int
    public: bytes
    account: bytes = b""
    timestamp: float = 0.0
    signature: bytes = b""
    cert: bytes = b""

    def payload(self) -> bytes:
        body = struct.pack("<I", self.ident) + self.public
        if self.account:
            body += self.account + struct.pack("<d", self.timestamp)
            body += self.signature + self.cert
        return body


@dataclass(frozen=True)
class Roster:
    entries: tuple[Hello, ...]
    esid: bytes | None = None

    def payload(self) -> bytes:
        body = b"".join(e.payload() for e in self.entries)
        return body + (self.esid or b"")

    def ordinals(self) -> dict[int, int]:
        return {e.ident: i + 1 for i, e in enumerate(self.entries)}


@dataclass(frozen=True)
class CheckView:
    """Client-side view of the server's round-3 evaluation announcement."""

    cipher: bytes
    esid: bytes | None = None
    accounts: tuple[bytes, ...] = ()


def timestamp_bytes(account: bytes, ts: float) -> bytes:
    return account + struct.pack("<d", ts)


# --------------------------------------------------------------------------
# Parties
# --------------------------------------------------------------------------


class Client:
    def __init__(self, ident: int, config: ProtocolConfig, scheme, rng):
        self.ident = ident
        self.config = config
        self.scheme = scheme
        self.rng = rng
        self.keypair = scheme.keygen(rng)
        self.public = scheme.public_bytes(self.keypair)
        # secure-variant identity material
        self.sig_sk, self.sig_vk = crypto.sig_gen(rng)
        self.tx_sk, self.tx_vk = crypto.sig_gen(rng)
        self.account = ch.account_id(self.tx_vk)
        self.cert: crypto.Certificate | None = None
        self.ca_vk: bytes | None = None
        self.reset_period()

    def reset_period(self):
        self.roster: Roster | None = None
        self.ordinals: dict[int, int] = {}
        self.u2: set[int] = set()
        self.retained = None
        self.received_bundles: dict[int, bytes] = {}
        self.combined = None
        self.stop_reason: str | None = None

    def _stop(self, reason: str):
        self.stop_reason = reason
        return None

    # Round 1 ---------------------------------------------------------------

    def round1(self, clock: float, contract: ch.EncCheckContract | None = None,
               skew: float = 0.0) -> Hello | None:
        if self.config.variant == "basic":
            return Hello(ident=self.ident, public=self.public)
        if contract is None or contract.server is None:
            return self._stop(STOP_DECLINED)
        if contract.deposit < self.config.policy_min_deposit:
            return self._stop(STOP_DECLINED)
        if contract.periods < self.config.policy_min_periods:
            return self._stop(STOP_DECLINED)
        if contract.threshold != self.config.threshold:
            return self._stop(STOP_DECLINED)
        ts = clock + skew
        sig = crypto.sig_sign(self.sig_sk, timestamp_bytes(self.account, ts))
        return Hello(
            ident=self.ident, public=self.public, account=self.account,
            timestamp=ts, signature=sig, cert=self.cert.to_bytes(),
        )

    # Round 2 ---------------------------------------------------------------

    def round2(self, roster: Roster, clock: float,
               published: Mapping[bytes, bytes] | None = None) -> dict[int, bytes] | None:
        if len(roster.entries) < self.config.threshold:
            return self._stop(STOP_THRESHOLD)
        if self.config.variant == "secure":
            for e in roster.entries:
                cert = crypto.Certificate.from_bytes(e.cert)
                if cert.subject != e.account or not crypto.cert_verify(cert, self.ca_vk):
                    return self._stop(STOP_VERIFY_FAILED)
                if not crypto.sig_verify(
                    cert.key, timestamp_bytes(e.account, e.timestamp), e.signature
                ):
                    return self._stop(STOP_VERIFY_FAILED)
                if abs(clock - e.timestamp) > self.config.freshness_window:
                    return self._stop(STOP_VERIFY_FAILED)
        self.roster = roster
        self.ordinals = roster.ordinals()
        own = self.ordinals[self.ident]
        peer_publics = {}
        for e in roster.entries:
            if e.ident == self.ident:
                continue
            public = e.public
            if self.config.variant == "secure":
                # keys are authoritative on the chain; the roster copy must match
                public = published.get(e.account)
                if public is None or public != e.public:
                    return self._stop(STOP_VERIFY_FAILED)
            peer_publics[self.ordinals[e.ident]] = public
        bundles, self.retained = self.scheme.share(
            peer_publics, own, self.config.threshold, self.keypair, self.rng
        )
        ident_of = {v: k for k, v in self.ordinals.items()}
        return {ident_of[o]: payload for o, payload in bundles.items()}

    # Round 3 ---------------------------------------------------------------

    def round3(self, delivery: Mapping[int, bytes], data: Sequence[int]) -> bytes | None:
        self.u2 = set(delivery) | {self.ident}
        if len(self.u2) < self.config.threshold:
            return self._stop(STOP_THRESHOLD)
        self.received_bundles = {
            self.ordinals[sender]: payload for sender, payload in delivery.items()
        }
        roster_publics = {e.ident: e.public for e in self.roster.entries}
        members = sorted(self.u2)
        self.combined = self.scheme.combine([roster_publics[i] for i in members])
        return self.scheme.encrypt(self.combined, data, self.rng)

    # Round 4 ---------------------------------------------------------------

    def round4_basic(self, cipher: bytes) -> bytes | None:
        return self.scheme.partial_bytes(
            cipher, self.received_bundles, self.retained, self.keypair
        )

    def round4_secure(self, view: CheckView, current_esid: bytes,
                      account_of: Mapping[bytes, int]) -> bytes | None:
        if view.esid != current_esid:
            return self._stop(STOP_ESID)
        claimed = set()
        for acc in view.accounts:
            ident = account_of.get(acc)
            if ident is None or ident not in self.u2:
                return self._stop(STOP_ROSTER)
            claimed.add(ident)
        if len(claimed) < self.config.threshold:
            return self._stop(STOP_THRESHOLD)
        return self.scheme.partial_bytes(
            view.cipher, self.received_bundles, self.retained, self.keypair
        )


class Server:
    def __init__(self, config: ProtocolConfig, scheme, rng):
        self.config = config
        self.scheme = scheme
        self.rng = rng
        self.tx_sk, self.tx_vk = crypto.sig_gen(rng)
        self.account = ch.account_id(self.tx_vk)
        self.audit: list[str] = []

    def collect_round1(self, hellos: Sequence[Hello], esid: bytes | None) -> Roster | None:
        seen: dict[int, Hello] = {}
        for h in hellos:
            if h.ident in seen:
                self.audit.append(f"duplicate round-1 message from {h.ident} dropped")
                continue
            seen[h.ident] = h
        if len(seen) <= self.config.threshold:
            return None
        entries = tuple(seen[i] for i in sorted(seen))
        return Roster(entries=entries, esid=esid)

    def reroute_round2(
        self, uploads: Mapping[int, Mapping[int, bytes]], roster: Roster
    ) -> dict[int, dict[int, bytes]] | None:
        if len(uploads) < self.config.threshold:
            return None
        known = {e.ident for e in roster.entries}
        deliveries: dict[int, dict[int, bytes]] = {u: {} for u in sorted(uploads)}
        for sender in sorted(uploads):
            for recipient, payload in uploads[sender].items():
                if recipient not in known:
                    self.audit.append(
                        f"bundle from {sender} addressed to unknown party "
                        f"{recipient} discarded"
                    )
                    continue
                if recipient in deliveries:
                    deliveries[recipient][sender] = payload
        return deliveries

    def evaluate(self, ciphers: Mapping[int, bytes],
                 coefficients: Mapping[int, int]) -> tuple[bytes, list[int], list[int]] | None:
        if len(ciphers) < self.config.threshold:
            return None
        members = sorted(ciphers)
        alphas = [coefficients[u] for u in members]
        evaluated = self.scheme.eval_bytes([ciphers[u] for u in members], alphas)
        return evaluated, members, alphas

    def finalize(self, evaluated: bytes, partials: Mapping[int, bytes]) -> list[int] | None:
        if len(partials) < self.config.threshold:
            return None
        return self.scheme.finalize(
            evaluated, [partials[u] for u in sorted(partials)], self.config.threshold
        )


# --------------------------------------------------------------------------
# Session driver
# --------------------------------------------------------------------------


def derive_rngs(seed: int, n: int) -> tuple[np.random.Generator, np.random.Generator, list]:
    """Seed derivation tree: one root, spawned once per role.

    children: [0] scheme setup, [1] server, [2 + i] party i.
    """
    children = np.random.SeedSequence(seed).spawn(n + 2)
    return (
        np.random.default_rng(children[0]),
        np.random.default_rng(children[1]),
        [np.random.default_rng(c) for c in children[2:]],
    )


class Session:
    """Long-lived context: scheme, parties, chain; runs successive periods."""

    def __init__(self, config: ProtocolConfig, seed: int):
        self.config = config
        setup_rng, server_rng, party_rngs = derive_rngs(seed, config.n_target)
        spec = SchemeSpec(
            kind=config.scheme, dim=config.dim, d=config.d, h_bits=config.h_bits,
            l=config.l, decode_bound=config.decode_bound,
        )
        self.scheme = build_scheme(spec, setup_rng)
        self.server = Server(config, self.scheme, server_rng)
        self.clients = {
            i + 1: Client(i + 1, config, self.scheme, party_rngs[i])
            for i in range(config.n_target)
        }
        self.chain: ch.Blockchain | None = None
        self.contract_acc: bytes | None = None
        self.period_index = 0
        self.clock = 0.0
        if config.variant == "secure":
            self._setup_chain(setup_rng)

    def _setup_chain(self, rng: np.random.Generator):
        self.chain = ch.Blockchain()
        ca = crypto.CertificateAuthority(rng)
        self.contract_acc = self.chain.deploy_contract(
            self.scheme, min_value=self.config.min_value
        )
        need = self.config.min_value * self.config.periods
        self.chain.register_account(self.server.tx_vk, balance=need)
        init = ch.Transaction(
            self.server.account, self.contract_acc, need,
            ch.encode_call("Init", [
                struct.pack("<I", self.config.threshold),
                struct.pack("<I", self.config.periods),
            ]),
            b"",
        ).signed(self.server.tx_sk)
        self.chain.submit_tx(init)
        for ident in sorted(self.clients):
            c = self.clients[ident]
            c.cert = ca.issue(c.account, c.sig_vk)
            c.ca_vk = ca.verify_key
            self.chain.register_account(c.tx_vk)
            pub_tx = ch.Transaction(c.account, c.account, 0, c.public, b"").signed(c.tx_sk)
            self.chain.submit_tx(pub_tx)
        self.chain.produce_block()

    @property
    def contract(self) -> ch.EncCheckContract | None:
        return None if self.chain is None else self.chain.contracts[self.contract_acc]

    def esid(self) -> bytes:
        raw = self.server.account + self.period_index.to_bytes(8, "little")
        return hashlib.sha256(raw).digest()[:ch.ESID_BYTES]

    def run_period(
        self,
        inputs: Mapping[int, Sequence[int]],
        coefficients: Mapping[int, int],
        faults: FaultPlan | None = None,
    ) -> PeriodOutcome:
        cfg = self.config
        faults = faults or FaultPlan()
        transcript = Transcript()
        rosters: dict[int, list[int]] = {}
        stopped: dict[int, str] = {}
        secure = cfg.variant == "secure"
        esid = self.esid() if secure else None
        dead: set[int] = set()
        self.server.audit = []
        for c in self.clients.values():
            c.reset_period()

        def gone(ident: int, round_: int) -> bool:
            if ident in dead:
                return True
            if ident in cfg.dropouts.get(round_, frozenset()):
                dead.add(ident)
                return True
            return False

        def abort(round_: int, reason: str) -> PeriodOutcome:
            self.period_index += 1
            return PeriodOutcome(
                result=None, aborted_round=round_, reason=reason,
                transcript=transcript, rosters=rosters, stopped_clients=stopped,
                server_audit=list(self.server.audit),
            )

        # Round 1: advertise ---------------------------------------------------
        self.clock += 1.0
        hellos: list[Hello] = []
        for ident in sorted(self.clients):
            if gone(ident, 1):
                continue
            c = self.clients[ident]
            msg = c.round1(
                self.clock, contract=self.contract,
                skew=faults.timestamp_skew.get(ident, 0.0),
            )
            if msg is None:
                stopped[ident] = c.stop_reason
                continue
            if ident in faults.corrupt_sigs:
                msg = replace(msg, signature=bytes(64))
            repeats = 2 if ident in faults.duplicate_hellos else 1
            for _ in range(repeats):
                transcript.log(1, f"u{ident}", "server", "hello", msg.payload())
                hellos.append(msg)
        roster = self.server.collect_round1(hellos, esid)
        if roster is None:
            return abort(1, "too few advertisements (need > t)")
        rosters[1] = [e.ident for e in roster.entries]
        for e in roster.entries:
            transcript.log(1, "server", f"u{e.ident}", "roster", roster.payload())

        # Round 2: share keys --------------------------------------------------
        self.clock += 1.0
        uploads: dict[int, dict[int, bytes]] = {}
        published = self.chain.published if secure else None
        pub_by_acc = (
            {self.clients[e.ident].account: published.get(self.clients[e.ident].account)
             for e in roster.entries} if secure else None
        )
        for e in roster.entries:
            ident = e.ident
            if gone(ident, 2):
                continue
            c = self.clients[ident]
            bundles = c.round2(roster, self.clock, published=pub_by_acc)
            if bundles is None:
                stopped[ident] = c.stop_reason
                continue
            if ident in faults.stray_bundles:
                bundles = dict(bundles)
                bundles[999] = b"\x00" * 8
            uploads[ident] = bundles
            for recipient in sorted(bundles):
                transcript.log(2, f"u{ident}", f"u{recipient}", "share_bundle",
                               bundles[recipient])
        deliveries = self.server.reroute_round2(uploads, roster)
        if deliveries is None:
            return abort(2, "too few share uploads")
        rosters[2] = sorted(uploads)
        for recipient in sorted(deliveries):
            for sender in sorted(deliveries[recipient]):
                transcript.log(2, "server", f"u{recipient}", "share_bundle_fwd",
                               deliveries[recipient][sender])

        # Round 3: collect ciphers ----------------------------------------------
        self.clock += 1.0
        ciphers: dict[int, bytes] = {}
        for ident in rosters[2]:
            if gone(ident, 3):
                continue
            c = self.clients[ident]
            delivery = {s: p for s, p in deliveries[ident].items()}
            cipher = c.round3(delivery, inputs[ident])
            if cipher is None:
                stopped[ident] = c.stop_reason
                continue
            if secure:
                tx = ch.Transaction(
                    c.account, self.contract_acc, 0,
                    ch.encode_call("Record", [esid, cipher]), b"",
                ).signed(c.tx_sk)
                self.chain.submit_tx(tx)
                transcript.log(3, f"u{ident}", "chain", "cipher", cipher)
            else:
                transcript.log(3, f"u{ident}", "server", "cipher", cipher)
            ciphers[ident] = cipher
        if secure:
            self.chain.produce_block()
            recorded = self.contract.records_for(esid)
            account_of = {self.clients[i].account: i for i in self.clients}
            ciphers = {
                account_of[acc]: blob for acc, blob in recorded.items()
                if acc in account_of
            }
        evaluation = self.server.evaluate(ciphers, coefficients)
        if evaluation is None:
            return abort(3, "too few ciphers")
        evaluated, members, alphas = evaluation
        rosters[3] = members

        view = self._announce_round3(
            evaluated, members, alphas, esid, faults, transcript, ciphers
        )

        # Round 4: decrypt -------------------------------------------------------
        self.clock += 1.0
        partials: dict[int, bytes] = {}
        account_of = {self.clients[i].account: i for i in self.clients}
        for ident in members:
            if gone(ident, 4):
                continue
            c = self.clients[ident]
            if secure:
                part = c.round4_secure(view, esid, account_of)
            else:
                part = c.round4_basic(view.cipher)
            if part is None:
                stopped[ident] = c.stop_reason
                continue
            transcript.log(4, f"u{ident}", "server", "partial", part)
            partials[ident] = part
        rosters[4] = sorted(partials)
        result = self.server.finalize(evaluated, partials)
        self.period_index += 1
        if result is None:
            return PeriodOutcome(
                result=None, aborted_round=4, reason="too few partial decryptions",
                transcript=transcript, rosters=rosters, stopped_clients=stopped,
                server_audit=list(self.server.audit),
            )
        return PeriodOutcome(
            result=result, aborted_round=None, reason=None, transcript=transcript,
            rosters=rosters, stopped_clients=stopped,
            server_audit=list(self.server.audit),
        )

    def _announce_round3(self, evaluated, members, alphas, esid, faults,
                         transcript, ciphers) -> CheckView:
        cfg = self.config
        secure = cfg.variant == "secure"
        if not secure:
            transcript.log(3, "server", "broadcast", "evaluated", evaluated)
            return CheckView(cipher=evaluated)

        accounts = [self.clients[i].account for i in members]
        if faults.attack == ATTACK_SUBSTITUTE:
            victim = members[0]
            claim_members = members[: cfg.threshold - 1]
            claim = CheckView(
                cipher=ciphers[victim], esid=esid,
                accounts=tuple(self.clients[i].account for i in claim_members),
            )
            self._submit_check(claim.cipher, claim.accounts,
                               [1] * len(claim.accounts), esid, draw=False)
            self.chain.produce_block()
            transcript.log(3, "server", "chain", "evaluated", claim.cipher)
            return claim

        draw = self.period_index == cfg.periods - 1
        view = CheckView(cipher=evaluated, esid=esid, accounts=tuple(accounts))
        self._submit_check(evaluated, accounts, alphas, esid, draw=draw)
        if faults.attack == ATTACK_DUPLICATE_ESID:
            # equivocation: a second, different Check under the same esid
            self._submit_check(evaluated, accounts[: cfg.threshold],
                               alphas[: cfg.threshold], esid, draw=draw)
        self.chain.produce_block()
        transcript.log(3, "server", "chain", "evaluated", evaluated)
        return view

    def _submit_check(self, cipher, accounts, alphas, esid, draw: bool):
        data = ch.encode_call("Check", [
            b"\x01" if draw else b"\x00",
            esid,
            cipher,
            struct.pack("<I", len(accounts)) + b"".join(accounts),
            struct.pack("<I", len(alphas))
            + b"".join(int(a).to_bytes(8, "little") for a in alphas),
        ])
        tx = ch.Transaction(self.server.account, self.contract_acc, 0, data, b"")
        self.chain.submit_tx(tx.signed(self.server.tx_sk))


def run_period(
    config: ProtocolConfig,
    inputs: Mapping[int, Sequence[int]],
    coefficients: Mapping[int, int],
    seed: int,
    faults: FaultPlan | None = None,
) -> PeriodOutcome:
    """Single-period convenience driver over a fresh session."""
    return Session(config, seed).run_period(inputs, coefficients, faults)
