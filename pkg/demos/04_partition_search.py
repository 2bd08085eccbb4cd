# Searching over partitions.
#
# The rate depends on the partition. Rotating the measurement basis of the
# one-mode model away from the number basis lets the phase rotation mix
# the outcomes, and the rate becomes positive.

import math

from carq.model import two_level_scenario
from carq.optimize import rotated_basis_family, sup_over_family

scen = two_level_scenario(0.3, horizon=6)
family = rotated_basis_family(2)
result = sup_over_family(scen, family, points=16)

grid = [ev for ev in result.trace if ev.stage == "grid"]
print(f"{len(result.trace)} evaluations ({len(grid)} on the grid)")
for ev in grid[::3]:
    print(f"  phi={ev.params[0]:.4f}  rate={ev.rate:.6f}")
print(f"grid best phi={result.grid_best_params[0]:.6f} rate={result.grid_best_rate:.6f}")
print(f"refined   phi={result.best_params[0]:.6f} rate={result.best_rate:.6f}")
print(f"upper bound ln 2 = {math.log(2):.6f}")
