# Fermionic modes on a small Fock space.
#
# Build the m-mode creation and annihilation operators in the occupation
# basis, check the anticommutation relations, and compare the occupation
# route for a^*(f) with the antisymmetrized tensor route.

import numpy as np

from carq import build_fock_system, verify_car_relations
from carq.fock import antisymmetrizer, creation_via_antisymmetrizer, even_part, parity_automorphism

m = 3
fock = build_fock_system(m)
print(f"{m} modes, Fock dimension {fock.dim}")

# Every relation {a_i, a_j^*} = delta_ij, {a_i, a_j} = 0 to machine precision.
report = verify_car_relations(fock)
print(report.summary())

# Pauli exclusion: a creator applied twice gives zero.
a0_dag = fock.creators[0]
print("max |(a_0^*)^2| =", np.abs(a0_dag @ a0_dag).max())

# The number operator has binomial multiplicities.
counts = np.bincount(np.round(np.linalg.eigvalsh(fock.number_operator()).real).astype(int))
print("number-operator multiplicities:", counts.tolist())

# a^*(f) through the antisymmetrizer on tensor powers agrees with the
# Jordan-Wigner matrix.
rng = np.random.default_rng(1)
f = rng.normal(size=m) + 1j * rng.normal(size=m)
x = rng.normal(size=fock.dim) + 1j * rng.normal(size=fock.dim)
gap = np.abs(creation_via_antisymmetrizer(fock, f, x) - fock.creator(f) @ x).max()
print(f"antisymmetrizer route vs matrix route: {gap:.2e}")

# The two-particle antisymmetrizer on C^3 is a projection of rank 3.
a2 = antisymmetrizer(2, 3)
print("rank of the 2-particle antisymmetrizer:", int(round(np.trace(a2).real)))

# Parity flips odd operators; the even part of a_0 + a_0^* a_0 keeps only
# the number term.
theta = parity_automorphism(fock)
a0 = fock.annihilators[0]
print("Theta(a_0) = -a_0:", np.abs(theta(a0) + a0).max() == 0)
n0 = fock.number_operator(0)
print("even part drops a_0:", np.abs(even_part(fock, a0 + n0) - n0).max() == 0)
