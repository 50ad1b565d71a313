"""Simulated blockchain with accounts, driver-stepped blocks, and the
cipher-recording / evaluation-checking contract.

The contract holds the aggregation server's deposit, records user ciphers
per period session id, re-runs the homomorphic evaluation byte-exactly
when the server submits its result, and slashes the per-period stake to
the recorded users whenever the check fails or the server equivocates.
Withdrawal of the deposit is delayed by six blocks so users can challenge
a dishonest transcript.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from . import crypto
from .errors import FormatError

ACCOUNT_BYTES = 20
ESID_BYTES = 16
DEFAULT_MIN_VALUE = 10
WITHDRAWAL_DELAY = 6

VERDICT_OK = "OK"
VERDICT_SLASH = "SLASH"


def account_id(vk: bytes) -> bytes:
    return hashlib.sha256(b"account:" + vk).digest()[:ACCOUNT_BYTES]


def encode_call(name: str, args: list[bytes]) -> bytes:
    raw = name.encode()
    out = [struct.pack("<H", len(raw)), raw]
    for a in args:
        out.append(struct.pack("<I", len(a)))
        out.append(a)
    return b"".join(out)


def decode_call(data: bytes) -> tuple[str, list[bytes]]:
    if len(data) < 2:
        raise FormatError("call data too short")
    (nlen,) = struct.unpack_from("<H", data, 0)
    off = 2 + nlen
    name = data[2:off].decode()
    args = []
    while off < len(data):
        if off + 4 > len(data):
            raise FormatError("truncated call argument")
        (alen,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + alen > len(data):
            raise FormatError("truncated call argument body")
        args.append(data[off : off + alen])
        off += alen
    return name, args


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    to: bytes
    value: int
    data: bytes
    aux: bytes
    sig: bytes = b""

    def signing_bytes(self) -> bytes:
        return b"".join(
            [
                self.sender,
                self.to,
                self.value.to_bytes(8, "little"),
                struct.pack("<I", len(self.data)),
                self.data,
                struct.pack("<I", len(self.aux)),
                self.aux,
            ]
        )

    def digest(self) -> bytes:
        return hashlib.sha256(self.signing_bytes() + self.sig).digest()

    def signed(self, sk: bytes) -> "Transaction":
        return Transaction(
            self.sender, self.to, self.value, self.data, self.aux,
            crypto.sig_sign(sk, self.signing_bytes()),
        )


@dataclass
class SlashEvent:
    height: int
    esid: bytes
    reason: str
    amount: int
    beneficiaries: list[bytes]


@dataclass
class CheckRecord:
    tx_digest: bytes
    verdict: str
    tx: Transaction


@dataclass
class EncCheckContract:
    account: bytes
    scheme: object  # adapter with eval_bytes()
    min_value: int = DEFAULT_MIN_VALUE
    server: bytes | None = None
    threshold: int = 0
    deposit: int = 0
    periods: int = 0
    records: dict = field(default_factory=dict)  # esid -> {acc: cipher bytes}
    check_log: dict = field(default_factory=dict)  # esid -> CheckRecord
    slashes: list = field(default_factory=list)
    withdrawal_height: int | None = None
    terminated: bool = False

    def records_for(self, esid: bytes) -> dict[bytes, bytes]:
        return dict(self.records.get(esid, {}))


class Blockchain:
    """Single-threaded state machine; blocks are produced by the driver."""

    def __init__(self):
        self.height = 0
        self.balances: dict[bytes, int] = {}
        self.keys: dict[bytes, bytes] = {}
        self.published: dict[bytes, bytes] = {}
        self.contracts: dict[bytes, EncCheckContract] = {}
        self.pending: list[Transaction] = []
        self.audit: list[str] = []

    # -- accounts ----------------------------------------------------------

    def register_account(self, vk: bytes, balance: int = 0) -> bytes:
        acc = account_id(vk)
        self.keys[acc] = vk
        self.balances[acc] = self.balances.get(acc, 0) + balance
        return acc

    def deploy_contract(self, scheme, min_value: int = DEFAULT_MIN_VALUE) -> bytes:
        acc = hashlib.sha256(b"contract:%d" % len(self.contracts)).digest()[:ACCOUNT_BYTES]
        self.contracts[acc] = EncCheckContract(account=acc, scheme=scheme, min_value=min_value)
        return acc

    def total_tokens(self) -> int:
        return sum(self.balances.values()) + sum(c.deposit for c in self.contracts.values())

    # -- transaction intake --------------------------------------------------

    def submit_tx(self, tx: Transaction) -> bool:
        vk = self.keys.get(tx.sender)
        if vk is None or not crypto.sig_verify(vk, tx.signing_bytes(), tx.sig):
            self.audit.append(f"rejected tx from {tx.sender.hex()[:8]}: bad signature")
            return False
        self.pending.append(tx)
        return True

    def produce_block(self) -> int:
        txs, self.pending = self.pending, []
        self.height += 1
        for tx in txs:
            self._apply(tx)
        for contract in self.contracts.values():
            self._mature_withdrawal(contract)
        return self.height

    # -- execution -----------------------------------------------------------

    def _apply(self, tx: Transaction) -> None:
        contract = self.contracts.get(tx.to)
        if contract is not None:
            self._call_contract(contract, tx)
            return
        if tx.to == tx.sender and tx.value == 0:
            # self-addressed data tx: key publication
            self.published[tx.sender] = tx.data
            return
        if tx.value:
            if self.balances.get(tx.sender, 0) < tx.value:
                self.audit.append(f"tx from {tx.sender.hex()[:8]}: insufficient funds")
                return
            self.balances[tx.sender] -= tx.value
            self.balances[tx.to] = self.balances.get(tx.to, 0) + tx.value

    def _call_contract(self, contract: EncCheckContract, tx: Transaction) -> None:
        if contract.terminated:
            self.audit.append("call to terminated contract ignored")
            return
        try:
            name, args = decode_call(tx.data)
        except FormatError:
            self.audit.append("malformed contract call ignored")
            return
        if name == "Init":
            self._init(contract, tx, args)
        elif name == "Record":
            self._record(contract, tx, args)
        elif name == "Check":
            self._check(contract, tx, args)
        else:
            self.audit.append(f"unknown contract function {name!r}")

    def _init(self, contract: EncCheckContract, tx: Transaction, args: list[bytes]) -> None:
        t, prds = struct.unpack("<II", args[0] + args[1])
        need = contract.min_value * prds
        if contract.deposit < need:
            if contract.deposit + tx.value < need:
                self.audit.append("Init rejected: deposit below MinValue*prds")
                return
        if self.balances.get(tx.sender, 0) < tx.value:
            self.audit.append("Init rejected: insufficient balance")
            return
        self.balances[tx.sender] -= tx.value
        contract.deposit += tx.value
        contract.server = tx.sender
        contract.threshold = t
        contract.periods = prds

    def _record(self, contract: EncCheckContract, tx: Transaction, args: list[bytes]) -> None:
        esid, cipher = args[0], args[1]
        store = contract.records.setdefault(esid, {})
        if tx.sender in store:
            self.audit.append(
                f"duplicate Record for {tx.sender.hex()[:8]} under esid {esid.hex()[:8]} ignored"
            )
            return
        store[tx.sender] = cipher

    @staticmethod
    def _parse_check(args: list[bytes]) -> tuple[bool, bytes, bytes, list[bytes], list[int]]:
        draw = args[0] == b"\x01"
        esid, cipher = args[1], args[2]
        (count,) = struct.unpack("<I", args[3][:4])
        accs = [args[3][4 + i * ACCOUNT_BYTES : 4 + (i + 1) * ACCOUNT_BYTES] for i in range(count)]
        (acount,) = struct.unpack("<I", args[4][:4])
        alphas = [
            int.from_bytes(args[4][4 + i * 8 : 4 + (i + 1) * 8], "little")
            for i in range(acount)
        ]
        return draw, esid, cipher, accs, alphas


    def _check(self, contract: EncCheckContract, tx: Transaction, args: list[bytes]) -> None:
        if contract.server is None or tx.sender != contract.server:
            self.audit.append("Check rejected: not the staking server")
            return
        draw, esid, cipher, accs, alphas = self._parse_check(args)
        recorded = contract.records.get(esid, {})
        in_roster = [a for a in accs if a in recorded]
        prior = contract.check_log.get(esid)
        if prior is not None:
            if prior.tx_digest == tx.digest():
                return  # identical replay: no state change
            self._slash(contract, esid, "conflicting Check transactions", in_roster)
            return
        verdict = VERDICT_OK
        if len(in_roster) < contract.threshold:
            verdict = VERDICT_SLASH
            reason = "recorded roster below threshold"
        else:
            alpha_of = dict(zip(accs, alphas))
            expect = contract.scheme.eval_bytes(
                [recorded[a] for a in in_roster], [alpha_of[a] for a in in_roster]
            )
            if expect != cipher:
                verdict = VERDICT_SLASH
                reason = "evaluation mismatch"
        contract.check_log[esid] = CheckRecord(tx_digest=tx.digest(), verdict=verdict, tx=tx)
        if verdict == VERDICT_SLASH:
            self._slash(contract, esid, reason, in_roster)
            return
        contract.periods = max(0, contract.periods - 1)
        if draw:
            contract.withdrawal_height = self.height

    def _slash(self, contract: EncCheckContract, esid: bytes, reason: str,
               roster: list[bytes]) -> None:
        beneficiaries = sorted(roster) or sorted(contract.records.get(esid, {}))
        amount = min(contract.deposit, contract.min_value)
        if beneficiaries and amount:
            per, rem = divmod(amount, len(beneficiaries))
            for acc in beneficiaries:
                self.balances[acc] = self.balances.get(acc, 0) + per
            self.balances[beneficiaries[0]] += rem
            contract.deposit -= amount
        contract.slashes.append(
            SlashEvent(height=self.height, esid=esid, reason=reason,
                       amount=amount, beneficiaries=beneficiaries)
        )
        self.audit.append(f"SLASH at height {self.height}: {reason}")

    def _mature_withdrawal(self, contract: EncCheckContract) -> None:
        if contract.terminated or contract.withdrawal_height is None:
            return
        if self.height >= contract.withdrawal_height + WITHDRAWAL_DELAY:
            self.balances[contract.server] = (
                self.balances.get(contract.server, 0) + contract.deposit
            )
            contract.deposit = 0
            contract.terminated = True

    # -- reporting -----------------------------------------------------------

    def dump(self) -> str:
        lines = [f"height: {self.height}", "balances:"]
        for acc in sorted(self.balances):
            lines.append(f"  {acc.hex()}: {self.balances[acc]}")
        for addr, c in self.contracts.items():
            lines.append(f"contract {addr.hex()}:")
            lines.append(f"  scheme: {getattr(c.scheme, 'name', '?')}")
            lines.append(f"  server: {c.server.hex() if c.server else '-'}")
            lines.append(
                f"  threshold: {c.threshold}  deposit: {c.deposit}  periods: {c.periods}"
            )
            lines.append(f"  terminated: {c.terminated}")
            for esid in sorted(c.records):
                lines.append(f"  records[{esid.hex()}]: {len(c.records[esid])} ciphers")
            for esid in sorted(c.check_log):
                rec = c.check_log[esid]
                lines.append(f"  verdict[{esid.hex()}]: {rec.verdict}")
            for ev in c.slashes:
                who = ",".join(b.hex()[:8] for b in ev.beneficiaries)
                lines.append(
                    f"  SLASH height={ev.height} esid={ev.esid.hex()} amount={ev.amount} "
                    f"reason={ev.reason!r} to=[{who}]"
                )
        if self.audit:
            lines.append("audit:")
            lines.extend(f"  {a}" for a in self.audit)
        return "\n".join(lines) + "\n"
