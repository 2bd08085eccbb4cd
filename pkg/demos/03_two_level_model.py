# The one-mode model with a number-operator phase rotation.
#
# The partition {a^* a, a a^*} commutes with the dynamics, so every word
# that switches symbols has probability zero and the entropy sequence is
# flat: the rate vanishes for every lambda.

import numpy as np

from carq import entropy_series, rate_estimate
from carq.model import binary_entropy, kernel_claims, occupied_first_matrices, two_level_scenario

lam = 0.3
mats = occupied_first_matrices(lam)
print("rho in the (|1>, |0>) ordering:\n", mats["rho"].real)

series = entropy_series(two_level_scenario(lam, horizon=8))
for t in series.tables[:3] + series.tables[-1:]:
    print(f"n={t.n}: nonzero words {sorted(t.support())}")
    for claim, dev, ok in kernel_claims(t, lam):
        print(f"    {claim:<28s} deviation {dev:.1e} {'ok' if ok else 'FAILED'}")

print("S_n:", np.round(series.s, 9).tolist())
print("binary entropy:", round(binary_entropy(lam), 9))
print("rate estimate:", rate_estimate(series)[0])

# Sweep lambda; the rate is zero throughout.
for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
    s = entropy_series(two_level_scenario(lam, horizon=6))
    print(f"lambda={lam:<5} S_6={s.s[-1]:.6f} rate={rate_estimate(s)[0]:.1e}")
