"""The single-mode two-level model with a number-operator phase rotation.

Site algebra ``M_2`` generated by one fermionic mode ``a``; partition
``{a^* a, a a^*}``; automorphism ``a -> U a U^*`` with ``U = exp(i a^* a)``;
state ``rho = lam a^* a + (1 - lam) a a^*``. Every non-constant word has
zero weight and the two constant words carry ``lam`` and ``1 - lam``, so
``S_n`` is flat and the rate vanishes.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from carq.dynamics import Automorphism, Partition, Scenario
from carq.fock import build_fock_system

CLAIM_TOL = 1e-12


def two_level_operators(lam: float) -> dict:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam!r}")
    sys = build_fock_system(1)
    a, ad = sys.annihilators[0], sys.creators[0]
    n_op = ad @ a
    return {
        "system": sys,
        "gamma": (n_op, a @ ad),
        "unitary": scipy.linalg.expm(1j * n_op),
        "rho": lam * n_op + (1.0 - lam) * (a @ ad),
    }


def two_level_scenario(lam: float, horizon: int = 8, variant: str = "car", prune: float = 0.0) -> Scenario:
    ops = two_level_operators(lam)
    return Scenario(
        rho=ops["rho"],
        partition=Partition(ops["gamma"], "orthogonal-projective"),
        automorphism=Automorphism(ops["unitary"]),
        variant=variant,
        horizon=horizon,
        prune=prune,
        algebra={"kind": "car", "modes": 1},
    )


def binary_entropy(lam: float) -> float:
    return -sum(p * math.log(p) for p in (lam, 1.0 - lam) if p > 0)


def kernel_claims(table, lam: float, tol: float = CLAIM_TOL) -> list:
    """Check the three kernel claims at one horizon.

    Returns ``(claim, deviation, passed)`` triples.
    """
    n = table.n
    ones, twos = (1,) * n, (2,) * n
    mixed = max((p for w, p in table.entries.items() if w not in (ones, twos)), default=0.0)
    out = [
        (f"P{ones} = lambda", abs(table.get(ones) - lam)),
        ("P(mixed words) = 0", abs(mixed)),
        (f"P{twos} = 1 - lambda", abs(table.get(twos) - (1.0 - lam))),
    ]
    return [(claim, dev, dev <= tol) for claim, dev in out]


def occupied_first_matrices(lam: float) -> dict:
    """The model operators written in the ``(|1>, |0>)`` ordering."""
    ops = two_level_operators(lam)
    a = ops["system"].annihilators[0]
    flip = np.eye(2)[::-1]
    return {name: flip @ m @ flip for name, m in {
        "a": a,
        "a*": ops["system"].creators[0],
        "gamma1": ops["gamma"][0],
        "gamma2": ops["gamma"][1],
        "U": ops["unitary"],
        "rho": ops["rho"],
    }.items()}
