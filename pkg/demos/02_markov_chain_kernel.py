# Quantum Markov chains and their correlation kernel.
#
# A partition of the identity, a unitary and a state define a chain whose
# time-ordered word probabilities are computed by carrying the conditioned
# state along every branch.

import itertools

import numpy as np

from carq import Automorphism, Scenario, chain_joint_state, entropy_series, kernel_table, rate_estimate
from carq.kernel import gamma_word
from carq.random import rand_density, rand_projective_partition, rand_unitary

rng = np.random.default_rng(3)
d, n = 2, 4
scen = Scenario(
    rho=rand_density(d, rng),
    partition=rand_projective_partition(d, rng),
    automorphism=Automorphism(rand_unitary(d, rng)),
    variant="car",
    horizon=n,
)

table = kernel_table(scen)
print(f"kernel at n={n}: {len(table)} words, total {table.total():.15f}")
for word, p in list(table.rows())[:6]:
    print(f"  {word}  {p:.6f}")

# The propagated weights equal Tr(Gamma_w rho Gamma_w^*) for the literal
# ordered products.
gap = 0.0
for w in itertools.product((1, 2), repeat=n):
    g = gamma_word(scen.partition, scen.automorphism, w, "car")
    gap = max(gap, abs(np.trace(g @ scen.rho @ g.conj().T).real - table.get(w)))
print(f"propagation vs literal products: {gap:.2e}")

# The joint chain state is a density operator; its record marginal is
# maximally mixed on the mode factors for the car ordering.
state = chain_joint_state(scen)
print("violations:", state.violations())
print("car marginal is I/2^n:", np.abs(state.marginal - np.eye(2**n) / 2**n).max() < 1e-14)

series = entropy_series(scen)
rate, diag = rate_estimate(series)
print("S_n:", np.round(series.s, 6).tolist())
print(f"tail increment {rate:.6f}, S_N/N {diag['mean_rate']:.6f} ({diag['note']})")
