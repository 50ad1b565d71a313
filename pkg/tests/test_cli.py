import json

import pytest

from linagg import cli


def run_cli(*argv):
    return cli.main(list(argv))


class TestRun:
    def test_basic_lattice_run(self, tmp_path):
        code = run_cli(
            "run", "--scheme", "lattice", "--users", "5", "--threshold", "4",
            "--dim", "64", "--seed", "7", "--out", str(tmp_path),
        )
        assert code == 0
        aggregate = json.loads((tmp_path / "aggregate.json").read_text())
        assert isinstance(aggregate, list) and len(aggregate) == 64
        lines = (tmp_path / "transcript.jsonl").read_text().splitlines()
        assert lines and all(json.loads(ln)["period"] == 0 for ln in lines)

    def test_threshold_above_users_is_usage_error(self, tmp_path):
        code = run_cli("run", "--users", "5", "--threshold", "6",
                       "--seed", "1", "--out", str(tmp_path))
        assert code == 2

    def test_attack_requires_secure(self, tmp_path):
        code = run_cli("run", "--users", "5", "--attack", "substitute-cipher",
                       "--seed", "1", "--out", str(tmp_path))
        assert code == 2

    def test_substitute_cipher_attack_slash_in_dump(self, tmp_path):
        code = run_cli(
            "run", "--variant", "secure", "--users", "5", "--threshold", "4",
            "--dim", "32", "--attack", "substitute-cipher", "--seed", "11",
            "--out", str(tmp_path),
        )
        assert code == 0
        dump = (tmp_path / "chain.txt").read_text()
        assert "SLASH" in dump

    def test_abort_exit_code(self, tmp_path):
        code = run_cli(
            "run", "--users", "5", "--threshold", "4", "--dim", "16",
            "--dropout", "4:2", "--seed", "3", "--out", str(tmp_path),
        )
        assert code == 1

    def test_deterministic_outputs(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert run_cli(
                "run", "--users", "5", "--dim", "32", "--variant", "secure",
                "--seed", "21", "--out", str(out),
            ) == 0
        for name in ("transcript.jsonl", "aggregate.json", "chain.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_dropout_parse(self):
        plan = cli.parse_dropouts("2:1,4:2", 6)
        assert plan[2] == frozenset({6})
        assert plan[4] == frozenset({4, 5})

    def test_multi_period_secure_withdraws(self, tmp_path):
        code = run_cli(
            "run", "--variant", "secure", "--users", "5", "--dim", "16",
            "--periods", "2", "--seed", "5", "--out", str(tmp_path),
        )
        assert code == 0
        dump = (tmp_path / "chain.txt").read_text()
        assert "terminated: True" in dump
        aggregate = json.loads((tmp_path / "aggregate.json").read_text())
        assert len(aggregate) == 2 and all(len(a) == 16 for a in aggregate)


class TestCost:
    def test_sweep_files(self, tmp_path):
        code = run_cli("cost", "--users", "5..8", "--dim", "1000",
                       "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "cost.json").read_text())
        assert len(rows) == 4 * len(cli.cm.SCHEMES)
        csv_lines = (tmp_path / "cost.csv").read_text().splitlines()
        assert len(csv_lines) == len(rows) + 1

    def test_single_scheme_single_n(self, tmp_path):
        code = run_cli("cost", "--schemes", "pedersen", "--users", "7",
                       "--dim", "10", "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "cost.json").read_text())
        assert len(rows) == 1 and rows[0]["scheme"] == "pedersen"

    def test_zero_dim(self, tmp_path):
        code = run_cli("cost", "--schemes", "ours", "--users", "5",
                       "--dim", "0", "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "cost.json").read_text())
        assert rows[0]["cipher_bytes"] == 0

    def test_unsupported_bggjk2_rows_marked(self, tmp_path):
        code = run_cli("cost", "--schemes", "bggjk2", "--users", "34..40",
                       "--dim", "1000", "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "cost.json").read_text())
        assert any(not r["supported"] for r in rows)

    def test_crossover_visible_in_sweep(self, tmp_path):
        code = run_cli("cost", "--schemes", "ours,bggjk2", "--users", "20..35",
                       "--dim", "100000", "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "cost.json").read_text())
        ours = {r["n"]: r["total_bytes"] for r in rows if r["scheme"] == "ours"}
        big = {r["n"]: r["total_bytes"] for r in rows
               if r["scheme"] == "bggjk2" and r["supported"]}
        flips = [n for n in sorted(big) if ours[n] < big[n]]
        assert flips and all(n >= flips[0] for n in flips)

    def test_bad_scheme_name(self, tmp_path):
        assert run_cli("cost", "--schemes", "nonsense", "--out", str(tmp_path)) == 2


class TestBench:
    def test_lattice_rows(self, tmp_path):
        code = run_cli("bench", "--scheme", "lattice", "--users", "5",
                       "--dim", "64", "--seed", "2", "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "bench.json").read_text())
        assert [r["op"] for r in rows] == [
            "share", "combkey_enc", "eval", "pardec", "findec"
        ]
        assert all(r["seconds"] >= 0 for r in rows)

    def test_ec_findec_reports_bsgs_fraction(self, tmp_path):
        code = run_cli("bench", "--scheme", "ec", "--users", "5",
                       "--dim", "8", "--seed", "2", "--decode-bits", "24",
                       "--out", str(tmp_path))
        assert code == 0
        rows = json.loads((tmp_path / "bench.json").read_text())
        findec = [r for r in rows if r["op"] == "findec"][0]
        assert "bsgs_fraction" in findec
