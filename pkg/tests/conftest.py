"""Shared end-to-end flow drivers used by scheme tests and the acceptance suite."""

from dataclasses import dataclass

import numpy as np

from linagg import lattice
from linagg.ring import Params, RingElement, ring_linear


@dataclass
class LatticeFlow:
    parm: Params
    n: int
    t: int
    alphas: list
    inputs: list
    keypairs: list
    dealt: dict
    combined_pk: RingElement
    ciphers: list
    evaluated: lattice.Ciphertext
    partials: dict
    combined_sk: RingElement
    smoothing: list


def run_lattice_flow(parm, n, t, alphas, inputs, seed) -> LatticeFlow:
    """Drive the whole scheme: keygen, share, enc, eval, pardec for all parties."""
    streams = np.random.SeedSequence(seed).spawn(n + 1)
    rngs = [np.random.default_rng(s) for s in streams]
    kps = [lattice.keygen(parm, rngs[u]) for u in range(n)]
    dealt = {}
    for u in range(n):
        peers = {v + 1: kps[v].hybrid.public for v in range(n) if v != u}
        dealt[u + 1] = lattice.share(parm, peers, u + 1, t, kps[u], rngs[u])
    pk = lattice.combkey(parm, [kp.pk_ring for kp in kps])
    ciphers = [
        lattice.enc(parm, pk, lattice.encode(inputs[u], parm), rngs[u])
        for u in range(n)
    ]
    evaluated = lattice.eval_linear(parm, ciphers, alphas)
    partials = {}
    for u in range(1, n + 1):
        bundles = {v: dealt[v].bundles[u] for v in dealt if v != u}
        partials[u] = lattice.pardec(
            parm, evaluated, bundles, dealt[u].own, kps[u - 1].hybrid.secret
        )
    combined_sk = ring_linear([(1, kp.sk_ring) for kp in kps], parm.h)
    smoothing = [
        ring_linear([(1, dealt[u].noise[j]) for u in dealt], parm.h)
        for j in range(parm.blocks)
    ]
    return LatticeFlow(
        parm=parm, n=n, t=t, alphas=list(alphas), inputs=[list(x) for x in inputs],
        keypairs=kps, dealt=dealt, combined_pk=pk, ciphers=ciphers,
        evaluated=evaluated, partials=partials, combined_sk=combined_sk,
        smoothing=smoothing,
    )


def plaintext_combo(alphas, inputs):
    """Independent oracle: exact integer linear combination of the inputs."""
    dim = len(inputs[0])
    return [sum(a * x[i] for a, x in zip(alphas, inputs)) for i in range(dim)]
