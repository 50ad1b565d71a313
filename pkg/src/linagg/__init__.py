"""Secure linear aggregation toolkit.

Threshold additive homomorphic encryption (a lattice scheme and an
EC-ElGamal baseline), a four-round dropout-tolerant aggregation protocol,
a simulated blockchain with an evaluation-checking contract, and the
matching communication/computation cost models.
"""

__version__ = "0.1.0"
