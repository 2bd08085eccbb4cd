"""Supremum of the entropy-rate estimate over a parametric partition family.

The search is a deterministic grid scan followed by coordinate-wise
golden-section refinement inside the bracket around the best grid point.
No randomness is involved, so the evaluation trace is replayable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from carq.dynamics import Partition, Scenario, validate_partition
from carq.kernel import entropy_series, rate_estimate

INV_PHI = (math.sqrt(5) - 1) / 2
DEFAULT_POINTS = 32


class FamilyError(ValueError):
    """The family produced a partition that fails validation."""


class BudgetError(ValueError):
    """The evaluation budget cannot cover the coarse grid."""

    def __init__(self, budget: int, required: int):
        super().__init__(f"budget {budget} is below the grid size; at least {required} evaluations are required")
        self.budget = budget
        self.required = required


@dataclass
class PartitionFamily:
    bounds: list
    generator: Callable
    name: str = "custom"

    @property
    def n_params(self) -> int:
        return len(self.bounds)

    def __call__(self, params) -> Partition:
        return self.generator(np.asarray(params, dtype=float))


def givens_rotation(dim: int, angles) -> np.ndarray:
    """Product of real plane rotations on the consecutive pairs ``(j, j+1)``."""
    r = np.eye(dim)
    for j, phi in enumerate(angles):
        g = np.eye(dim)
        c, s = math.cos(phi), math.sin(phi)
        g[j, j], g[j, j + 1], g[j + 1, j], g[j + 1, j + 1] = c, -s, s, c
        r = r @ g
    return r


def rotated_basis_family(dim: int, bounds=None) -> PartitionFamily:
    """Rank-1 projective partitions ``{R e_j e_j^T R^T}`` for a rotated basis ``R``.

    One angle per consecutive basis pair; default box ``[0, pi/2]`` per angle.
    """
    if dim < 2:
        raise ValueError("rotated-basis family needs dimension >= 2")
    if bounds is None:
        bounds = [(0.0, math.pi / 2)] * (dim - 1)
    if len(bounds) != dim - 1:
        raise ValueError(f"expected {dim - 1} angle bounds, got {len(bounds)}")

    def generate(params):
        r = givens_rotation(dim, params)
        return Partition(tuple(np.outer(r[:, j], r[:, j]) for j in range(dim)), "orthogonal-projective")

    return PartitionFamily([tuple(map(float, b)) for b in bounds], generate, "rotated-basis")


def constant_family(partition: Partition, bounds=((0.0, 1.0),)) -> PartitionFamily:
    return PartitionFamily([tuple(map(float, b)) for b in bounds], lambda _: partition, "constant")


@dataclass
class Evaluation:
    stage: str
    params: tuple
    rate: float


@dataclass
class OptimizeResult:
    best_params: tuple
    best_rate: float
    grid_best_params: tuple
    grid_best_rate: float
    trace: list = field(default_factory=list)

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def family_rate(s: Scenario, partition: Partition, horizon: int, threads: int = 1) -> float:
    series = entropy_series(s.with_partition(partition), horizon, threads)
    return rate_estimate(series)[0]


def golden_section_max(f, a: float, b: float, n_evals: int):
    """Maximise ``f`` on ``[a, b]`` with exactly ``n_evals`` evaluations (>= 2)."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n_evals - 2):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _better(rate, params, best_rate, best_params) -> bool:
    # Ties go to the lexicographically smallest parameter vector.
    return rate > best_rate or (rate == best_rate and tuple(params) < tuple(best_params))


def sup_over_family(
    s: Scenario,
    fam: PartitionFamily,
    horizon: int | None = None,
    budget: int | None = None,
    points: int = DEFAULT_POINTS,
    threads: int = 1,
) -> OptimizeResult:
    """Largest finite-horizon rate estimate found over ``fam``.

    Args:
        s: Scenario; its partition, if any, is ignored.
        fam: Parametric partition family with a bounded box.
        horizon: Horizon of every rate estimate (default ``s.horizon``).
        budget: Total number of evaluations. Must be at least the grid size
            ``points ** n_params``; the remainder goes to refinement.
        points: Grid points per axis.

    Raises:
        BudgetError: budget smaller than the grid.
        FamilyError: the family generated an invalid partition.
    """
    horizon = s.horizon if horizon is None else int(horizon)
    dim = fam.n_params
    grid_size = points**dim
    if budget is None:
        budget = grid_size + 16 * dim
    if budget < grid_size:
        raise BudgetError(budget, grid_size)

    trace = []

    def evaluate(params, stage):
        params = tuple(float(x) for x in params)
        partition = fam(params)
        report = validate_partition(partition)
        if not report.passed:
            raise FamilyError(f"family {fam.name!r} at parameters {params} fails: {', '.join(report.failed())}")
        rate = family_rate(s, partition, horizon, threads)
        trace.append(Evaluation(stage, params, rate))
        return rate

    axes = [np.linspace(lo, hi, points) if points > 1 else np.array([lo]) for lo, hi in fam.bounds]
    best_rate, best_params, best_idx = -math.inf, None, None
    for idx in itertools.product(range(points), repeat=dim):
        params = tuple(axes[a][i] for a, i in enumerate(idx))
        rate = evaluate(params, "grid")
        if best_params is None or _better(rate, params, best_rate, best_params):
            best_rate, best_params, best_idx = rate, tuple(float(x) for x in params), idx
    grid_best = (best_params, best_rate)

    remaining = budget - grid_size
    per_axis = remaining // dim if dim else 0
    if per_axis >= 2 and points > 1:
        for a in range(dim):
            lo = axes[a][max(best_idx[a] - 1, 0)]
            hi = axes[a][min(best_idx[a] + 1, points - 1)]
            base = list(best_params)

            def along(x, a=a, base=base):
                params = base.copy()
                params[a] = x
                return evaluate(params, f"refine[{a}]")

            start = len(trace)
            golden_section_max(along, lo, hi, per_axis)
            for ev in trace[start:]:
                if _better(ev.rate, ev.params, best_rate, best_params):
                    best_rate, best_params = ev.rate, ev.params
    return OptimizeResult(best_params, best_rate, grid_best[0], grid_best[1], trace)
