"""Partitions of unity, inner automorphisms and quantum Markov chain states.

Two word orderings are supported throughout:

``"aow"``
    ``Gamma_w = th^{n-1}(g_{i_n}) ... th(g_{i_2}) g_{i_1}``
``"car"``
    ``Gamma_w = th^n(g_{i_n}) ... th(g_{i_1})``

Both are evaluated by propagating a prefix-conditioned positive operator
``rho_w`` through the state-side (predual) action ``x -> U^H x U``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from carq.fock import build_fock_system, even_part
from carq.linalg import (
    HERMITIAN_TOL,
    as_operator,
    dagger,
    is_unitary,
    max_abs,
)

PARTITION_TOL = 1e-10
DEFAULT_CAP = 2**20
VARIANTS = ("aow", "car")
PARTITION_KINDS = ("orthogonal-projective", "kraus")


class EnumerationCapError(RuntimeError):
    """Raised when a word enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class Partition:
    elements: tuple
    kind: str = "orthogonal-projective"

    def __post_init__(self):
        if self.kind not in PARTITION_KINDS:
            raise ValueError(f"partition kind must be one of {PARTITION_KINDS}, got {self.kind!r}")
        els = tuple(as_operator(g) for g in self.elements)
        if not els:
            raise ValueError("partition needs at least one element")
        shapes = {g.shape for g in els}
        if len(shapes) != 1:
            raise ValueError(f"partition elements have mismatched shapes {sorted(shapes)}")
        object.__setattr__(self, "elements", els)

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def stacked(self) -> np.ndarray:
        return np.stack(self.elements)


@dataclass
class PartitionReport:
    kind: str
    deviations: dict
    tol: float = PARTITION_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.deviations.values())

    def failed(self) -> list:
        return [k for k, v in self.deviations.items() if v > self.tol]


def validate_partition(p: Partition, tol: float = PARTITION_TOL) -> PartitionReport:
    """Measure how far ``p`` is from a partition of the identity of its kind.

    Orthogonal-projective partitions are also required to be self-adjoint,
    which is what makes them a special case of the Kraus kind.
    """
    eye = np.eye(p.dim)
    g = p.stacked()
    if p.kind == "kraus":
        dev = {"sum g^H g = 1": max_abs(np.einsum("kji,kjl->il", g.conj(), g) - eye)}
    else:
        prods = 0.0
        for i, j in itertools.product(range(p.size), repeat=2):
            target = g[j] if i == j else 0.0
            prods = max(prods, max_abs(g[i] @ g[j] - target))
        dev = {
            "sum g = 1": max_abs(g.sum(axis=0) - eye),
            "g_i g_j = delta_ij g_j": prods,
            "g = g^H": max(max_abs(x - dagger(x)) for x in g),
        }
    return PartitionReport(p.kind, dev, tol)


class Automorphism:
    """Inner automorphism ``th(a) = U a U^H`` with cached powers of ``U``."""

    def __init__(self, unitary, tol: float = HERMITIAN_TOL):
        u = as_operator(unitary)
        if not is_unitary(u, tol):
            raise ValueError(f"automorphism generator is not unitary (tol {tol:g})")
        self.unitary = u
        self.dim = u.shape[0]
        self._powers = [np.eye(self.dim, dtype=np.complex128), u]

    @classmethod
    def identity(cls, dim: int) -> Automorphism:
        return cls(np.eye(dim))

    def power(self, k: int) -> np.ndarray:
        """``U^k`` for ``k >= 0`` by repeated multiplication, memoised."""
        if k < 0:
            return dagger(self.power(-k))
        while len(self._powers) <= k:
            self._powers.append(self._powers[-1] @ self.unitary)
        return self._powers[k]

    def apply(self, a, k: int = 1) -> np.ndarray:
        uk = self.power(k)
        return uk @ as_operator(a) @ dagger(uk)

    __call__ = apply

    def apply_dual(self, x, k: int = 1) -> np.ndarray:
        """State-side action ``x -> U^{-k} x U^k`` so that ``Tr(dual(x) a) = Tr(x th(a))``."""
        uk = self.power(k)
        return dagger(uk) @ np.asarray(x) @ uk


@dataclass
class Scenario:
    """Everything needed to generate correlation kernels.

    ``partition`` may be ``None`` when the scenario feeds a partition-family
    search.
    """

    rho: np.ndarray
    partition: Partition | None
    automorphism: Automorphism
    variant: str = "car"
    horizon: int = 1
    prune: float = 0.0
    cap: int = DEFAULT_CAP
    algebra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rho = as_operator(self.rho)
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.automorphism.dim != self.rho.shape[0]:
            raise ValueError("automorphism and density operator act on different dimensions")
        if self.partition is not None and self.partition.dim != self.rho.shape[0]:
            raise ValueError("partition and density operator act on different dimensions")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.prune < 0:
            raise ValueError("prune threshold must be non-negative")

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def with_partition(self, partition: Partition) -> Scenario:
        return Scenario(
            self.rho, partition, self.automorphism, self.variant, self.horizon, self.prune, self.cap, self.algebra
        )

    def initial_state(self) -> np.ndarray:
        """Root of the prefix propagation; the car ordering starts one step later."""
        if self.variant == "car":
            return self.automorphism.apply_dual(self.rho)
        return self.rho


def map_E_e(x, d: int, dim_a: int) -> np.ndarray:
    """Sum of the diagonal blocks of an operator on ``M_d (x) A``."""
    x = as_operator(x)
    if x.shape[0] != d * dim_a:
        raise ValueError(f"operator dimension {x.shape[0]} != d * dim_a = {d * dim_a}")
    return np.einsum("iaib->ab", x.reshape(d, dim_a, d, dim_a))


def transition_expectation(p: Partition, th: Automorphism, x) -> np.ndarray:
    """``th(E_e(p^H x p))`` with ``p = sum_j e_jj (x) g_j``."""
    x = as_operator(x)
    d, dim_a = p.size, p.dim
    if x.shape[0] != d * dim_a:
        raise ValueError(f"operator dimension {x.shape[0]} != {d} * {dim_a}")
    blocks = x.reshape(d, dim_a, d, dim_a)
    g = p.stacked()
    inner = sum(dagger(g[j]) @ blocks[j, :, j, :] @ g[j] for j in range(d))
    return th.apply(inner)


def choi_matrix(channel, dim_in: int) -> np.ndarray:
    """``sum_ab E_ab (x) channel(E_ab)`` for a linear map on ``dim_in x dim_in`` matrices."""
    blocks = []
    for a in range(dim_in):
        row = []
        for b in range(dim_in):
            e = np.zeros((dim_in, dim_in), dtype=np.complex128)
            e[a, b] = 1.0
            row.append(np.asarray(channel(e)))
        blocks.append(row)
    return np.block(blocks)


@lru_cache(maxsize=1)
def _single_mode():
    return build_fock_system(1)


def mode_weight(a) -> complex:
    """``(1/2) Tr`` of the even part of a one-mode operator."""
    a = as_operator(a)
    if a.shape != (2, 2):
        raise ValueError(f"mode operator must be 2x2, got {a.shape}")
    return 0.5 * np.trace(even_part(_single_mode(), a))


def kraus_twirl(p: Partition, th: Automorphism, b) -> np.ndarray:
    """``sum_i th(g_i^H b g_i)``."""
    b = as_operator(b)
    if b.shape[0] != p.dim:
        raise ValueError(f"site operator dimension {b.shape[0]} != partition dimension {p.dim}")
    g = p.stacked()
    return th.apply(np.einsum("kji,jl,klm->im", g.conj(), b, g))


def umegaki_step(p: Partition, th: Automorphism, a, b) -> np.ndarray:
    """One step of the CAR chain: ``w(A) * sum_i th(g_i^H B g_i)``.

    ``A`` lives on a single fermionic mode and only its even part survives;
    ``B`` lives on the site-0 algebra.
    """
    return mode_weight(a) * kraus_twirl(p, th, b)


MAX_DENSE_DIM = 4096


@dataclass
class ChainState:
    """Joint chain state ``rho_[0,n]`` and its marginal ``rho_n``, kept factored.

    aow: the joint state is block diagonal over record words, ``blocks[w]``
    being the site-0 block for word ``w``. car: the joint state is
    ``(1 / 2**n) (x) blocks[0]``. ``joint`` and ``marginal`` materialise the
    dense matrices on demand.
    """

    horizon: int
    variant: str
    factor_dims: tuple
    blocks: np.ndarray

    @property
    def record_dim(self) -> int:
        return int(np.prod(self.factor_dims[:-1]))

    @property
    def site_dim(self) -> int:
        return self.factor_dims[-1]

    def marginal_diagonal(self) -> np.ndarray:
        if self.variant == "aow":
            return np.einsum("wii->w", self.blocks)
        return np.full(self.record_dim, np.trace(self.blocks[0]) / self.record_dim)

    @property
    def marginal(self) -> np.ndarray:
        _check_dense(self.record_dim)
        return np.diag(self.marginal_diagonal())

    @property
    def joint(self) -> np.ndarray:
        dim = self.record_dim * self.site_dim
        _check_dense(dim)
        if self.variant == "car":
            return np.kron(np.eye(self.record_dim) / self.record_dim, self.blocks[0])
        out = np.zeros((dim, dim), dtype=np.complex128)
        d = self.site_dim
        for w, block in enumerate(self.blocks):
            out[w * d:(w + 1) * d, w * d:(w + 1) * d] = block
        return out

    def violations(self, tol: float = 1e-10, floor: float = -1e-10) -> dict:
        """Density-operator checks, evaluated block by block.

        The spectrum of a block-diagonal matrix is the union of its block
        spectra, and the spectrum of ``(1/r) (x) X`` is that of ``X / r``.
        """
        scale = 1.0 if self.variant == "aow" else 1.0 / self.record_dim
        mult = 1 if self.variant == "aow" else self.record_dim
        joint = []
        herm = max(max_abs(b - dagger(b)) for b in self.blocks)
        if herm > tol:
            joint.append(f"not Hermitian (max deviation {herm:.3e})")
        else:
            lam_min = min(float(np.linalg.eigvalsh((b + dagger(b)) / 2)[0]) for b in self.blocks) * scale
            if lam_min < floor:
                joint.append(f"not positive semidefinite (min eigenvalue {lam_min:.3e})")
        tr = float(sum(np.trace(b).real for b in self.blocks)) * scale * mult
        if abs(tr - 1.0) > tol:
            joint.append(f"trace {tr!r} differs from 1")
        marginal = []
        diag = self.marginal_diagonal()
        if max_abs(diag.imag) > tol:
            marginal.append("not Hermitian")
        if diag.real.min() < floor:
            marginal.append(f"not positive semidefinite (min eigenvalue {diag.real.min():.3e})")
        if abs(diag.real.sum() - 1.0) > tol:
            marginal.append(f"trace {diag.real.sum()!r} differs from 1")
        return {"joint": joint, "marginal": marginal}


def _check_dense(dim: int):
    if dim > MAX_DENSE_DIM:
        raise EnumerationCapError(f"dense matrix of dimension {dim} exceeds {MAX_DENSE_DIM}")


def branch_states(p: Partition, th: Automorphism, states: np.ndarray, first: bool) -> np.ndarray:
    """Children ``g_k dual(rho_w) g_k^H`` of a stack of prefix states.

    The result has shape ``(len(states) * k, dim, dim)`` with the new symbol
    varying fastest, so words stay in lexicographic order. ``first`` skips
    the dual step (the root state already carries it when needed).
    """
    if not first:
        u = th.unitary
        states = dagger(u) @ states @ u
    g = p.stacked()
    return np.einsum("kij,wjl,kml->wkim", g, states, g.conj()).reshape(-1, p.dim, p.dim)


def _propagate(p: Partition, th: Automorphism, state: np.ndarray, n: int, cap: int):
    """All ``k**n`` leaf states ``rho_w`` in lexicographic word order."""
    k = p.size
    if k**n > cap:
        raise EnumerationCapError(f"{k}**{n} = {k**n} words exceed the enumeration cap {cap}")
    states = state[None]
    for level in range(n):
        states = branch_states(p, th, states, first=level == 0)
    return states


def chain_joint_state(s: Scenario) -> ChainState:
    """Joint chain state on the ``n`` record factors plus site 0, and its marginal.

    aow: ``sum_w e_{i_1 i_1} (x) ... (x) e_{i_n i_n} (x) rho_w``, record
    factors of dimension ``k``.

    car: ``2**-n (1 (x) ... (x) 1) (x) sum_w Gamma_w rho Gamma_w^H``, one
    two-dimensional mode factor per step. The even mode algebra contributes
    only ``A_{k,+} = 1``, so the marginal is maximally mixed.
    """
    if s.partition is None:
        raise ValueError("scenario has no partition")
    p, th, n = s.partition, s.automorphism, s.horizon
    leaves = _propagate(p, th, s.initial_state(), n, s.cap)
    if s.variant == "aow":
        return ChainState(n, "aow", (p.size,) * n + (p.dim,), leaves)
    un = th.power(n)
    site = un @ leaves.sum(axis=0) @ dagger(un)
    return ChainState(n, "car", (2,) * n + (p.dim,), site[None])


def nested_expectation(p: Partition, th: Automorphism, rho, record_ops) -> complex:
    """``Tr rho E(a_1 (x) E(a_2 (x) ... E(a_n (x) 1)))`` by direct recursion."""
    dim_a = p.dim
    b = np.eye(dim_a, dtype=np.complex128)
    for a in reversed(record_ops):
        b = transition_expectation(p, th, np.kron(as_operator(a), b))
    return np.trace(as_operator(rho) @ b)


def nested_umegaki(p: Partition, th: Automorphism, rho, mode_ops) -> complex:
    """CAR analogue of :func:`nested_expectation` built from :func:`umegaki_step`."""
    b = np.eye(p.dim, dtype=np.complex128)
    for a in reversed(mode_ops):
        b = umegaki_step(p, th, a, b)
    return np.trace(as_operator(rho) @ b)
