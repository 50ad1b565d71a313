import numpy as np
import pytest

from conftest import plaintext_combo
from linagg import chain as ch
from linagg import protocol as proto
from linagg.errors import ParameterError

# small lattice instance keeps protocol tests quick
FAST = dict(d=16, h_bits=40, l=257, dim=8)


def config(**kw):
    base = dict(n_target=5, threshold=3, scheme="lattice", variant="basic", **FAST)
    base.update(kw)
    return proto.ProtocolConfig(**base)


def inputs_for(cfg, seed=1):
    g = np.random.default_rng(seed)
    return {i: [int(x) for x in g.integers(0, 250, cfg.dim)]
            for i in range(1, cfg.n_target + 1)}


def coeffs_for(cfg, seed=2):
    g = np.random.default_rng(seed)
    return {i: int(g.integers(1, 8)) for i in range(1, cfg.n_target + 1)}


class TestConfig:
    def test_lambda_condition_rejected(self):
        with pytest.raises(ParameterError):
            config(n_corrupt=1, lambda_min=1)  # t - n_c = 2 > 1

    def test_lambda_default(self):
        cfg = config(n_corrupt=1)
        assert cfg.lambda_min == cfg.threshold - 1

    def test_small_threshold_rejected(self):
        with pytest.raises(ParameterError):
            config(threshold=1)


class TestBasicPeriod:
    def test_no_dropout_matches_oracle(self):
        cfg = config()
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        out = proto.run_period(cfg, inputs, alphas, seed=7)
        assert out.succeeded
        members = out.rosters[3]
        expected = [
            x % cfg.l
            for x in plaintext_combo([alphas[u] for u in members],
                                     [inputs[u] for u in members])
        ]
        assert out.result == expected

    def test_roster_nesting(self):
        cfg = config(dropouts={2: frozenset({2}), 4: frozenset({5})})
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=8)
        assert out.succeeded
        r = out.rosters
        assert set(r[4]) <= set(r[3]) <= set(r[2]) <= set(r[1])

    def test_abort_when_below_threshold_at_round4(self):
        cfg = config(dropouts={4: frozenset({1, 2, 3})})
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=9)
        assert not out.succeeded
        assert out.aborted_round == 4

    def test_round1_needs_strictly_more_than_t(self):
        cfg = config(n_target=5, threshold=4, dropouts={1: frozenset({5})})
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=10)
        assert not out.succeeded and out.aborted_round == 1

    def test_rounds_2_to_4_proceed_at_exactly_t(self):
        cfg = config(n_target=5, threshold=4, dropouts={2: frozenset({5})})
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=11)
        assert out.succeeded
        assert out.rosters[2] == [1, 2, 3, 4]

    def test_dropout_after_shares_still_decryptable(self):
        # party 2 shares in round 2 but never sends a cipher: pk unchanged,
        # aggregate covers the remaining senders
        cfg = config(dropouts={3: frozenset({2})})
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        out = proto.run_period(cfg, inputs, alphas, seed=12)
        assert out.succeeded
        members = out.rosters[3]
        assert 2 not in members
        expected = [
            x % cfg.l
            for x in plaintext_combo([alphas[u] for u in members],
                                     [inputs[u] for u in members])
        ]
        assert out.result == expected

    def test_transcript_deterministic(self):
        cfg = config(dropouts={3: frozenset({4})})
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        a = proto.run_period(cfg, inputs, alphas, seed=13)
        b = proto.run_period(cfg, inputs, alphas, seed=13)
        assert a.transcript.to_jsonl() == b.transcript.to_jsonl()
        c = proto.run_period(cfg, inputs, alphas, seed=14)
        assert a.transcript.to_jsonl() != c.transcript.to_jsonl()

    def test_duplicate_hello_deduplicated(self):
        cfg = config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=15,
                               faults=proto.FaultPlan(duplicate_hellos=frozenset({3})))
        assert out.succeeded
        assert out.rosters[1].count(3) == 1

    def test_stray_bundle_discarded_with_audit(self):
        cfg = config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=16,
                               faults=proto.FaultPlan(stray_bundles=frozenset({2})))
        assert out.succeeded
        assert any("unknown party 999" in line for line in out.server_audit)

    def test_ec_scheme_period(self):
        cfg = config(scheme="ec_elgamal", dim=4, decode_bound=1 << 16)
        inputs = {i: [i, 2 * i, 3, 0] for i in range(1, 6)}
        alphas = {i: 1 for i in range(1, 6)}
        out = proto.run_period(cfg, inputs, alphas, seed=17)
        assert out.succeeded
        expected = plaintext_combo([1] * 5, [inputs[u] for u in out.rosters[3]])
        assert out.result == expected


class TestSecurePeriod:
    def secure_config(self, **kw):
        return config(variant="secure", **kw)

    def test_honest_run_verdict_ok(self):
        cfg = self.secure_config()
        session = proto.Session(cfg, seed=20)
        out = session.run_period(inputs_for(cfg), coeffs_for(cfg))
        assert out.succeeded
        contract = session.contract
        esids = list(contract.check_log)
        assert len(esids) == 1
        assert contract.check_log[esids[0]].verdict == ch.VERDICT_OK
        assert contract.deposit == cfg.min_value * cfg.periods

    def test_result_matches_oracle(self):
        cfg = self.secure_config()
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        session = proto.Session(cfg, seed=21)
        out = session.run_period(inputs, alphas)
        members = out.rosters[3]
        expected = [
            x % cfg.l
            for x in plaintext_combo([alphas[u] for u in members],
                                     [inputs[u] for u in members])
        ]
        assert out.result == expected

    def test_forged_signature_stops_clients(self):
        cfg = self.secure_config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=22,
                               faults=proto.FaultPlan(corrupt_sigs=frozenset({2})))
        assert not out.succeeded
        assert out.aborted_round == 2
        verify_failed = [u for u, r in out.stopped_clients.items()
                         if r == proto.STOP_VERIFY_FAILED]
        assert len(verify_failed) >= cfg.threshold

    def test_stale_timestamp_stops_clients(self):
        cfg = self.secure_config()
        out = proto.run_period(
            cfg, inputs_for(cfg), coeffs_for(cfg), seed=23,
            faults=proto.FaultPlan(timestamp_skew={4: -1000.0}),
        )
        assert not out.succeeded and out.aborted_round == 2
        assert proto.STOP_VERIFY_FAILED in out.stopped_clients.values()

    def test_substitute_cipher_attack_refused_and_slashed(self):
        cfg = self.secure_config(n_target=5, threshold=4)
        session = proto.Session(cfg, seed=24)
        out = session.run_period(
            inputs_for(cfg), coeffs_for(cfg),
            faults=proto.FaultPlan(attack=proto.ATTACK_SUBSTITUTE),
        )
        assert not out.succeeded and out.aborted_round == 4
        # no honest client decrypted
        assert all(r == proto.STOP_THRESHOLD for u, r in out.stopped_clients.items())
        contract = session.contract
        esid = next(iter(contract.check_log))
        assert contract.check_log[esid].verdict == ch.VERDICT_SLASH
        assert contract.slashes and contract.slashes[0].amount == cfg.min_value

    def test_duplicate_esid_attack_slashed(self):
        cfg = self.secure_config()
        session = proto.Session(cfg, seed=25)
        out = session.run_period(
            inputs_for(cfg), coeffs_for(cfg),
            faults=proto.FaultPlan(attack=proto.ATTACK_DUPLICATE_ESID),
        )
        contract = session.contract
        assert len(contract.slashes) == 1
        assert out.succeeded  # honest first announcement still decrypts

    def test_multi_period_with_withdrawal(self):
        cfg = self.secure_config(periods=2)
        session = proto.Session(cfg, seed=26)
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        out1 = session.run_period(inputs, alphas)
        out2 = session.run_period(inputs, alphas)
        assert out1.succeeded and out2.succeeded
        contract = session.contract
        assert contract.periods == 0
        assert contract.withdrawal_height is not None
        request = contract.withdrawal_height
        while session.chain.height < request + ch.WITHDRAWAL_DELAY:
            assert not contract.terminated
            session.chain.produce_block()
        assert contract.terminated and contract.deposit == 0
        assert session.chain.balances[session.server.account] == cfg.min_value * 2

    def test_token_conservation_through_attack(self):
        cfg = self.secure_config()
        session = proto.Session(cfg, seed=27)
        total0 = session.chain.total_tokens()
        session.run_period(inputs_for(cfg), coeffs_for(cfg),
                           faults=proto.FaultPlan(attack=proto.ATTACK_SUBSTITUTE))
        assert session.chain.total_tokens() == total0


class TestClientRound4Fixtures:
    """Direct adversarial inputs to the secure round-4 validator."""

    def test_foreign_esid_rejected(self):
        cfg = config(variant="secure")
        session = proto.Session(cfg, seed=31)
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        out = session.run_period(inputs, alphas)
        assert out.succeeded
        client = session.clients[1]
        account_of = {session.clients[i].account: i for i in session.clients}
        view = proto.CheckView(cipher=b"x", esid=b"\xff" * 16,
                               accounts=tuple(session.clients[i].account for i in (1, 2, 3)))
        assert client.round4_secure(view, session.esid(), account_of) is None
        assert client.stop_reason == proto.STOP_ESID

    def test_roster_outside_u2_rejected(self):
        cfg = config(variant="secure", dropouts={2: frozenset({5})})
        session = proto.Session(cfg, seed=32)
        inputs, alphas = inputs_for(cfg), coeffs_for(cfg)
        out = session.run_period(inputs, alphas)
        assert out.succeeded and 5 not in out.rosters[2]
        client = session.clients[1]
        account_of = {session.clients[i].account: i for i in session.clients}
        esid = b"\x01" * 16
        # claimed roster includes party 5, which never distributed shares
        view = proto.CheckView(cipher=b"x", esid=esid,
                               accounts=tuple(session.clients[i].account
                                              for i in (1, 2, 5)))
        assert client.round4_secure(view, esid, account_of) is None
        assert client.stop_reason == proto.STOP_ROSTER


class TestDeclinePolicies:
    def test_low_deposit_declined(self):
        cfg = config(variant="secure", policy_min_deposit=10**9)
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=33)
        assert not out.succeeded and out.aborted_round == 1
        assert all(r == proto.STOP_DECLINED for r in out.stopped_clients.values())

    def test_exhausted_periods_declined(self):
        cfg = config(variant="secure")
        session = proto.Session(cfg, seed=34)
        session.contract.periods = 0
        out = session.run_period(inputs_for(cfg), coeffs_for(cfg))
        assert not out.succeeded
        assert all(r == proto.STOP_DECLINED for r in out.stopped_clients.values())


class TestTranscriptContent:
    def test_views_cover_four_rounds(self):
        cfg = config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=35)
        assert set(out.transcript.views()) == {1, 2, 3, 4}

    def test_component_kinds_present(self):
        cfg = config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=36)
        kinds = {e.kind for e in out.transcript.entries}
        assert {"hello", "roster", "share_bundle", "share_bundle_fwd",
                "cipher", "evaluated", "partial"} <= kinds

    def test_bundle_counts(self):
        cfg = config()
        out = proto.run_period(cfg, inputs_for(cfg), coeffs_for(cfg), seed=37)
        n = cfg.n_target
        uploads = [e for e in out.transcript.entries if e.kind == "share_bundle"]
        assert len(uploads) == n * (n - 1)
