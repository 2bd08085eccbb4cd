"""Correlation kernels, entropy sequences and finite-horizon rate estimates.

Words are tuples of 1-based partition indices ``(i_1, ..., i_n)``; ``i_1``
is the earliest time step.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from carq.dynamics import (
    Automorphism,
    EnumerationCapError,
    Partition,
    Scenario,
    branch_states,
    chain_joint_state,
)
from carq.linalg import PROB_FLOOR, _xlogx, shannon_entropy, von_neumann_entropy

NORMALIZATION_TOL = 1e-10


class KernelInvariantError(ArithmeticError):
    """A kernel entry or normalization left its tolerance window."""


@dataclass
class KernelTable:
    n: int
    entries: dict
    variant: str
    pruned_mass: float = 0.0

    def __len__(self):
        return len(self.entries)

    def get(self, word) -> float:
        return self.entries.get(tuple(word), 0.0)

    def total(self) -> float:
        return math.fsum(self.entries.values())

    def probabilities(self) -> np.ndarray:
        return np.fromiter(self.entries.values(), dtype=float, count=len(self.entries))

    def support(self, tol: float = 0.0) -> set:
        return {w for w, p in self.entries.items() if p > tol}

    def normalization_error(self) -> float:
        return abs(self.total() + self.pruned_mass - 1.0)

    def marginalize_last(self) -> dict:
        """Sum over the final symbol, giving a horizon ``n - 1`` distribution."""
        out = {}
        for w, p in self.entries.items():
            out[w[:-1]] = out.get(w[:-1], 0.0) + p
        return out

    def rows(self):
        for w, p in self.entries.items():
            yield format_word(w), p


def format_word(word) -> str:
    return "-".join(str(i) for i in word)


def gamma_word(p: Partition, th: Automorphism, word, variant: str = "car") -> np.ndarray:
    """Ordered product of evolved partition elements for ``word``.

    aow: ``th^{n-1}(g_{i_n}) ... th(g_{i_2}) g_{i_1}``;
    car: ``th^n(g_{i_n}) ... th(g_{i_1})``.
    """
    word = tuple(word)
    if not word:
        raise ValueError("word must be non-empty")
    if any(not 1 <= i <= p.size for i in word):
        raise ValueError(f"word {word} has symbols outside 1..{p.size}")
    shift = 1 if variant == "car" else 0
    if variant not in ("aow", "car"):
        raise ValueError(f"unknown variant {variant!r}")
    out = np.eye(p.dim, dtype=np.complex128)
    for t, i in enumerate(word):
        out = th.apply(p.elements[i - 1], t + shift) @ out
    return out


def _level_weights(states: np.ndarray) -> np.ndarray:
    w = np.einsum("wii->w", states).real
    if w.size and w.min() < PROB_FLOOR:
        raise KernelInvariantError(f"negative kernel weight {w.min():.3e}")
    return np.clip(w, 0.0, None)


def _subtree(p, th, state, symbol, n, prune, cap):
    """Levels 2..n below one top-level symbol; each level is (words, weights, pruned)."""
    states = state[None]
    words = np.array([[symbol]], dtype=np.int64)
    levels = []
    k = p.size
    for level in range(2, n + 1):
        states = branch_states(p, th, states, first=False)
        words = np.concatenate(
            [np.repeat(words, k, axis=0), np.tile(np.arange(k), len(words))[:, None]], axis=1
        )
        weights = _level_weights(states)
        alive = weights > prune
        pruned = math.fsum(weights[~alive])
        states, words, weights = states[alive], words[alive], weights[alive]
        if len(states) > cap:
            raise EnumerationCapError(f"{len(states)} live words at horizon {level} exceed the cap {cap}")
        levels.append((words, weights, pruned))
    return levels


def kernel_tables(s: Scenario, horizon: int | None = None, threads: int = 1) -> list:
    """Kernel tables for every horizon ``1..N`` from one branch propagation.

    Branches whose weight is ``<= s.prune`` are dropped (with the default
    ``prune = 0`` only exactly-zero branches go) and their mass is carried
    in ``pruned_mass``. Work splits across top-level symbols; the merge is
    in symbol order, so results do not depend on ``threads``.
    """
    if s.partition is None:
        raise ValueError("scenario has no partition")
    n = s.horizon if horizon is None else int(horizon)
    if n < 1:
        raise ValueError("horizon must be at least 1")
    p, th = s.partition, s.automorphism
    k = p.size

    top = branch_states(p, th, s.initial_state()[None], first=True)
    top_w = _level_weights(top)
    alive = [i for i in range(k) if top_w[i] > s.prune]
    pruned = [math.fsum(top_w[i] for i in range(k) if i not in alive)]

    def run(i):
        return _subtree(p, th, top[i], i, n, s.prune, s.cap)

    if threads > 1 and len(alive) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            subtrees = list(pool.map(run, alive))
    else:
        subtrees = [run(i) for i in alive]

    tables = [
        KernelTable(1, {(i + 1,): float(top_w[i]) for i in alive}, s.variant, pruned[0])
    ]
    for level in range(2, n + 1):
        entries = {}
        pruned_here = []
        for levels in subtrees:
            words, weights, pr = levels[level - 2]
            pruned_here.append(pr)
            for w, pw in zip(words, weights):
                entries[tuple(int(x) + 1 for x in w)] = float(pw)
        if len(entries) > s.cap:
            raise EnumerationCapError(f"{len(entries)} live words at horizon {level} exceed the cap {s.cap}")
        pruned.append(pruned[-1] + math.fsum(pruned_here))
        tables.append(KernelTable(level, entries, s.variant, pruned[-1]))
    for t in tables:
        if t.normalization_error() > NORMALIZATION_TOL:
            raise KernelInvariantError(
                f"horizon {t.n}: sum P + pruned = {t.total() + t.pruned_mass!r}, expected 1"
            )
    return tables


def kernel_table(s: Scenario, threads: int = 1) -> KernelTable:
    """Kernel ``P(w) = Tr Gamma_w rho Gamma_w^H`` at the scenario horizon."""
    return kernel_tables(s, s.horizon, threads)[-1]


def table_entropy(t: KernelTable) -> float:
    if t.pruned_mass == 0.0:
        return shannon_entropy(t.probabilities())
    return _xlogx(t.probabilities())


@dataclass
class EntropySeries:
    s: np.ndarray
    rates: np.ndarray
    diffs: np.ndarray
    n_symbols: int = 0
    pruned_mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tables: list = field(default_factory=list, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.s)

    @classmethod
    def from_values(cls, values, n_symbols: int = 0) -> EntropySeries:
        s = np.asarray(values, dtype=float)
        n = np.arange(1, len(s) + 1)
        return cls(s, s / n, np.diff(s, prepend=0.0), n_symbols, np.zeros(len(s)))

    def bound_violations(self, tol: float = 1e-12) -> list:
        bad = []
        for n, sn in enumerate(self.s, start=1):
            if sn < -tol:
                bad.append(f"S_{n} = {sn!r} < 0")
            if self.n_symbols and sn > n * math.log(self.n_symbols) + tol:
                bad.append(f"S_{n} = {sn!r} > {n} ln {self.n_symbols}")
        return bad


def entropy_series(
    s: Scenario, horizon: int | None = None, threads: int = 1, check_marginal: bool = False
) -> EntropySeries:
    """``S_n = -sum_w P(w) ln P(w)`` for ``n = 1..N`` (nats).

    With ``check_marginal`` the aow marginal ``rho_n`` is also built and its
    von Neumann entropy compared against ``S_n``; the car marginal is
    maximally mixed on the mode factors and carries no kernel information.
    """
    n_max = s.horizon if horizon is None else int(horizon)
    if n_max < 1:
        raise ValueError("horizon must be at least 1")
    tables = kernel_tables(s, n_max, threads)
    values = [table_entropy(t) for t in tables]
    if check_marginal and s.variant == "aow":
        for t, sn in zip(tables, values):
            sub = Scenario(s.rho, s.partition, s.automorphism, s.variant, t.n, 0.0, s.cap)
            vn = von_neumann_entropy(chain_joint_state(sub).marginal)
            if abs(vn - sn) > 1e-10:
                raise KernelInvariantError(f"S_{t.n}: von Neumann {vn!r} vs kernel {sn!r}")
    series = EntropySeries.from_values(values, s.partition.size)
    series.pruned_mass = np.array([t.pruned_mass for t in tables])
    series.tables = tables
    return series


def rate_estimate(series) -> tuple:
    """Finite-horizon entropy-rate estimates.

    Returns ``(rate, diagnostics)`` where ``rate = S_N - S_{N-1}``. The
    diagnostics also carry ``S_N / N`` and the full sequences. No limit is
    extrapolated.
    """
    s = series.s if isinstance(series, EntropySeries) else np.asarray(series, dtype=float)
    if len(s) < 3:
        raise ValueError(f"rate estimate needs at least 3 horizons, got {len(s)}")
    n = len(s)
    diffs = np.diff(s, prepend=0.0)
    diagnostics = {
        "horizon": n,
        "tail_increment": float(s[-1] - s[-2]),
        "mean_rate": float(s[-1] / n),
        "s": [float(x) for x in s],
        "rates": [float(x) for x in s / np.arange(1, n + 1)],
        "diffs": [float(x) for x in diffs],
        "note": "finite-horizon estimate; no limit is claimed",
    }
    return diagnostics["tail_increment"], diagnostics


def classical_oracle_kernel(transition, initial, n: int, labels=None) -> dict:
    """Path probabilities of a classical Markov chain by direct multiplication.

    Args:
        transition: Row-stochastic matrix ``T[a, b] = Pr(b | a)``.
        initial: Distribution of the first state.
        n: Path length.
        labels: Optional symbol (1-based) for each state; paths are then
            coarse-grained into symbol words.

    Returns:
        Mapping from 1-based words to probabilities, every word included.
    """
    t = np.asarray(transition, dtype=float)
    p0 = np.asarray(initial, dtype=float).ravel()
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"transition must be square, got shape {t.shape}")
    if t.min() < 0 or np.abs(t.sum(axis=1) - 1).max() > 1e-12:
        raise ValueError("transition matrix is not row-stochastic")
    if p0.shape[0] != t.shape[0] or p0.min() < 0 or abs(p0.sum() - 1) > 1e-12:
        raise ValueError("initial vector is not a probability distribution on the states")
    if n < 1:
        raise ValueError("n must be at least 1")
    d = t.shape[0]
    out = {}
    for path in itertools.product(range(d), repeat=n):
        prob = p0[path[0]]
        for a, b in zip(path, path[1:]):
            prob *= t[a, b]
        word = tuple(path[i] + 1 for i in range(n)) if labels is None else tuple(labels[x] for x in path)
        out[word] = out.get(word, 0.0) + prob
    return out


def markov_entropy_rate(transition, stationary) -> float:
    """``-sum_a pi_a sum_b T_ab ln T_ab``."""
    t = np.asarray(transition, dtype=float)
    pi = np.asarray(stationary, dtype=float)
    logs = np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), 0.0)
    return float(-np.sum(pi[:, None] * t * logs))
