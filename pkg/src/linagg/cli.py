"""Command-line driver: simulated aggregation runs, cost sweeps, benchmarks.

Subcommands:
  run    -- execute aggregation periods over the simulated transport (and
            chain, in the secure variant), optionally with a dropout
            schedule or an attack fixture; writes transcript, aggregate
            and chain dump.
  cost   -- per-user communication sweep across construction methods.
  bench  -- wall-clock timing of the scheme operations.

All randomness flows from --seed through one derivation tree: the root
SeedSequence spawns scheme-setup, server and per-party streams (in that
order); input vectors and coefficients come from dedicated children keyed
off the same seed.  Identical seeds give byte-identical output files.

Exit codes: 0 success (an attack run counts as successful when it produces
the expected on-chain verdict), 1 protocol abort or unexpected slash,
2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import chain as ch
from . import costmodel as cm
from . import ecelgamal as ec
from . import protocol as proto
from .errors import LinaggError

SCHEME_FLAG = {"lattice": "lattice", "ec": "ec_elgamal"}


_DATA_STREAMS = {"inputs": 0x1A, "coefficients": 0x2B}


def _data_rng(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _DATA_STREAMS[label]]))


def parse_dropouts(text: str, n: int) -> dict[int, frozenset[int]]:
    """`round:count[,...]` -> per-round identity sets (highest idents drop first)."""
    if not text:
        return {}
    counts: dict[int, int] = {}
    for part in text.split(","):
        r, c = part.split(":")
        counts[int(r)] = int(c)
    remaining = list(range(1, n + 1))
    plan: dict[int, frozenset[int]] = {}
    for r in sorted(counts):
        victims = remaining[-counts[r]:] if counts[r] else []
        plan[r] = frozenset(victims)
        remaining = remaining[: len(remaining) - counts[r]]
    return plan


def parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linagg")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run simulated aggregation periods")
    run.add_argument("--scheme", choices=["lattice", "ec"], default="lattice")
    run.add_argument("--variant", choices=["basic", "secure"], default="basic")
    run.add_argument("--users", type=int, required=True)
    run.add_argument("--threshold", type=int, default=None)
    run.add_argument("--dim", type=int, default=1000)
    run.add_argument("--periods", type=int, default=1)
    run.add_argument("--dropout", default="")
    run.add_argument("--attack", choices=[proto.ATTACK_NONE, proto.ATTACK_SUBSTITUTE,
                                          proto.ATTACK_DUPLICATE_ESID],
                     default=proto.ATTACK_NONE)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--out", default="out")

    cost = sub.add_parser("cost", help="communication cost sweep")
    cost.add_argument("--schemes", default=",".join(cm.SCHEMES))
    cost.add_argument("--users", default="5..50")
    cost.add_argument("--dim", type=int, default=10**5)
    cost.add_argument("--ring-degree", type=int, default=2048)
    cost.add_argument("--modulus-bits", type=int, default=54)
    cost.add_argument("--out", default="out")

    bench = sub.add_parser("bench", help="scheme operation timings")
    bench.add_argument("--scheme", choices=["lattice", "ec"], default="lattice")
    bench.add_argument("--users", type=int, default=5)
    bench.add_argument("--threshold", type=int, default=None)
    bench.add_argument("--dim", type=int, default=256)
    bench.add_argument("--seed", type=int, default=1)
    bench.add_argument("--reps", type=int, default=1)
    bench.add_argument("--decode-bits", type=int, default=32)
    bench.add_argument("--out", default="out")
    return p


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def cmd_run(args) -> int:
    n = args.users
    t = args.threshold if args.threshold is not None else cm.default_threshold(n)
    if not 2 <= t <= n:
        return _usage_error(f"threshold {t} incompatible with {n} users")
    if args.attack != proto.ATTACK_NONE and args.variant != "secure":
        return _usage_error("attack fixtures need --variant secure")
    try:
        dropouts = parse_dropouts(args.dropout, n)
    except ValueError:
        return _usage_error(f"cannot parse dropout schedule {args.dropout!r}")
    try:
        config = proto.ProtocolConfig(
            n_target=n, threshold=t, dim=args.dim, scheme=SCHEME_FLAG[args.scheme],
            variant=args.variant, dropouts=dropouts, periods=args.periods,
        )
    except LinaggError as exc:
        return _usage_error(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    session = proto.Session(config, seed=args.seed)
    faults = proto.FaultPlan(attack=args.attack)
    data_rng = _data_rng(args.seed, "inputs")
    coeff_rng = _data_rng(args.seed, "coefficients")

    outcomes = []
    transcript_lines = []
    for period in range(args.periods):
        inputs = {i: [int(x) for x in data_rng.integers(0, 256, args.dim)]
                  for i in range(1, n + 1)}
        alphas = {i: int(coeff_rng.integers(1, 256)) for i in range(1, n + 1)}
        outcome = session.run_period(inputs, alphas, faults=faults)
        outcomes.append(outcome)
        for e in outcome.transcript.entries:
            row = dict(e.__dict__)
            row["period"] = period
            transcript_lines.append(json.dumps(row, sort_keys=True))

    chain = session.chain
    if chain is not None:
        contract = session.contract
        while (contract.withdrawal_height is not None and not contract.terminated):
            chain.produce_block()
        (out_dir / "chain.txt").write_text(chain.dump())

    (out_dir / "transcript.jsonl").write_text("\n".join(transcript_lines) + "\n")
    if args.periods == 1:
        aggregate = outcomes[0].result
    else:
        aggregate = [o.result for o in outcomes]
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate) + "\n")

    for i, o in enumerate(outcomes):
        status = "ok" if o.succeeded else f"aborted round {o.aborted_round} ({o.reason})"
        print(f"period {i}: {status}")
    slashed = chain is not None and any(c.slashes for c in chain.contracts.values())
    if slashed:
        print("chain: SLASH recorded")

    if args.attack != proto.ATTACK_NONE:
        return 0 if slashed else 1
    if slashed or not all(o.succeeded for o in outcomes):
        return 1
    return 0


# --------------------------------------------------------------------------
# cost
# --------------------------------------------------------------------------


def cmd_cost(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    unknown = set(schemes) - set(cm.SCHEMES)
    if unknown:
        return _usage_error(f"unknown schemes: {sorted(unknown)}")
    try:
        ns = parse_range(args.users)
    except ValueError:
        return _usage_error(f"cannot parse user range {args.users!r}")
    rows = cm.sweep(schemes, ns, args.dim, d=args.ring_degree, h_bits=args.modulus_bits)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "cost.csv").write_text(cm.rows_to_csv(rows))
    (out_dir / "cost.json").write_text(cm.rows_to_json(rows))
    print(f"wrote {len(rows)} rows to {out_dir}/cost.{{csv,json}}")
    return 0


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------


def bench_scheme(scheme_kind: str, n: int, t: int, dim: int, seed: int,
                 reps: int, decode_bound: int) -> list[dict]:
    """Wall-clock totals per scheme operation across all parties."""
    import time

    from .schemes import SchemeSpec, build_scheme

    spec = SchemeSpec(kind=scheme_kind, dim=dim, decode_bound=decode_bound)
    timings = {op: 0.0 for op in ("share", "combkey_enc", "eval", "pardec", "findec")}
    bsgs_time = 0.0
    for rep in range(reps):
        root = np.random.SeedSequence([seed, rep]).spawn(n + 2)
        rngs = [np.random.default_rng(s) for s in root]
        scheme = build_scheme(spec, rngs[0])
        data_rng = np.random.default_rng(np.random.SeedSequence([seed, rep, 7]))
        kps = [scheme.keygen(rngs[u + 1]) for u in range(n)]
        publics = {u + 1: scheme.public_bytes(kps[u]) for u in range(n)}
        inputs = [[int(x) for x in data_rng.integers(0, 256, dim)] for _ in range(n)]
        alphas = [int(data_rng.integers(1, 256)) for _ in range(n)]

        t0 = time.perf_counter()
        dealt = {}
        bundles_all = {}
        for u in range(1, n + 1):
            peers = {v: publics[v] for v in publics if v != u}
            bundles_all[u], dealt[u] = scheme.share(peers, u, t, kps[u - 1], rngs[u])
        timings["share"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        combined = scheme.combine([publics[u] for u in sorted(publics)])
        ciphers = [scheme.encrypt(combined, inputs[u], rngs[u + 1]) for u in range(n)]
        timings["combkey_enc"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        evaluated = scheme.eval_bytes(ciphers, alphas)
        timings["eval"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        partials = []
        for u in range(1, t + 1):
            incoming = {v: bundles_all[v][u] for v in range(1, n + 1) if v != u}
            partials.append(scheme.partial_bytes(evaluated, incoming, dealt[u], kps[u - 1]))
        timings["pardec"] += time.perf_counter() - t0

        if scheme_kind == "ec_elgamal":
            ec._baby_tables.clear()
        t0 = time.perf_counter()
        scheme.finalize(evaluated, partials, t)
        rep_findec = time.perf_counter() - t0
        timings["findec"] += rep_findec

        if scheme_kind == "ec_elgamal":
            # re-run the masking arithmetic alone to split out decode time
            from linagg import shamir

            ct = ec.EcCiphertext.from_bytes(evaluated)
            parts = [ec.EcPartial.from_bytes(p) for p in partials]
            t0 = time.perf_counter()
            li = shamir.lagrange_coeffs([p.index for p in parts], ec.GROUP_ORDER)
            for i, (_, c1) in enumerate(ct.pairs):
                mask = ec.IDENTITY
                for p in parts:
                    mask = mask + li[p.index] * p.points[i]
                _ = c1 - mask
            mask_time = time.perf_counter() - t0
            bsgs_time += max(0.0, rep_findec - mask_time)

    rows = []
    for op, total in timings.items():
        row = {"scheme": scheme_kind, "op": op, "n": n, "t": t, "dim": dim,
               "seconds": total / reps}
        if op == "findec" and scheme_kind == "ec_elgamal" and timings["findec"]:
            row["bsgs_fraction"] = round(bsgs_time / timings["findec"], 4)
        rows.append(row)
    return rows


def cmd_bench(args) -> int:
    n = args.users
    t = args.threshold if args.threshold is not None else cm.default_threshold(n)
    if not 2 <= t <= n:
        return _usage_error(f"threshold {t} incompatible with {n} users")
    rows = bench_scheme(SCHEME_FLAG[args.scheme], n, t, args.dim, args.seed,
                        args.reps, 1 << args.decode_bits)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "bench.json").write_text(json.dumps(rows, indent=2) + "\n")
    (out_dir / "bench.csv").write_text(
        "scheme,op,n,t,dim,seconds,bsgs_fraction\n"
        + "".join(
            f"{r['scheme']},{r['op']},{r['n']},{r['t']},{r['dim']},"
            f"{r['seconds']:.6f},{r.get('bsgs_fraction', '')}\n"
            for r in rows
        )
    )
    for r in rows:
        extra = f"  bsgs={r['bsgs_fraction']:.1%}" if "bsgs_fraction" in r else ""
        print(f"{r['op']:<12} {r['seconds']:.4f}s{extra}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "cost":
            return cmd_cost(args)
        return cmd_bench(args)
    except LinaggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
