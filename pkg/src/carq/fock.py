"""Finite-mode fermionic Fock spaces and the CAR generators.

The occupation basis of ``m`` modes is indexed by the integer
``b = sum_i n_i 2**i`` (mode 0 is the least significant bit). The
annihilator ``a_i`` acts as

    a_i |n> = (-1)**(n_0 + ... + n_{i-1}) |n - e_i>    if n_i = 1

and kills the state otherwise. The antisymmetric-tensor route to the
same operators is kept here as an independent cross-check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from carq.linalg import as_operator, dagger, max_abs

MAX_MODES = 10
MAX_TENSOR_DIM = 4096
CAR_TOL = 1e-12

RELATION_AA_DAG = "{a_i, a_j^*} = delta_ij"
RELATION_AA = "{a_i, a_j} = 0"
RELATION_ADAG_ADAG = "{a_i^*, a_j^*} = 0"
RELATION_ADJOINT = "a_i^* = (a_i)^H"


@dataclass(frozen=True)
class FockSystem:
    modes: int
    dim: int
    basis: np.ndarray
    annihilators: tuple
    creators: tuple

    def annihilator(self, f) -> np.ndarray:
        """``a(f) = sum_i conj(f_i) a_i`` (antilinear in ``f``)."""
        f = _mode_vector(self, f)
        return sum(np.conj(fi) * a for fi, a in zip(f, self.annihilators))

    def creator(self, f) -> np.ndarray:
        """``a(f)^* = sum_i f_i a_i^*``."""
        f = _mode_vector(self, f)
        return sum(fi * c for fi, c in zip(f, self.creators))

    def number_operator(self, mode: int | None = None) -> np.ndarray:
        if mode is None:
            occ = self.basis.sum(axis=1)
        else:
            occ = self.basis[:, mode]
        return np.diag(occ.astype(np.complex128))

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.complex128)
        v[0] = 1.0
        return v

    def basis_state(self, occupied) -> np.ndarray:
        """Occupation basis vector with the given modes filled."""
        v = np.zeros(self.dim, dtype=np.complex128)
        v[sum(1 << int(i) for i in set(occupied))] = 1.0
        return v


def _mode_vector(sys: FockSystem, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.complex128).ravel()
    if f.shape[0] != sys.modes:
        raise ValueError(f"mode vector has length {f.shape[0]}, expected {sys.modes}")
    return f


def build_fock_system(m: int, verify: bool = True) -> FockSystem:
    """Fock space of ``m`` fermionic modes with its generators.

    Raises:
        ValueError: ``m`` outside ``1..10``.
        RuntimeError: the constructed generators fail the CAR check.
    """
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= MAX_MODES:
        raise ValueError(f"mode count must be an integer in 1..{MAX_MODES}, got {m!r}")
    m = int(m)
    dim = 1 << m
    idx = np.arange(dim)
    basis = ((idx[:, None] >> np.arange(m)[None, :]) & 1).astype(np.int8)
    annihilators = []
    for i in range(m):
        a = np.zeros((dim, dim), dtype=np.complex128)
        src = idx[basis[:, i] == 1]
        below = basis[src, :i].sum(axis=1)
        a[src ^ (1 << i), src] = (-1.0) ** below
        annihilators.append(a)
    creators = tuple(dagger(a) for a in annihilators)
    sys = FockSystem(m, dim, basis, tuple(annihilators), creators)
    if verify:
        report = verify_car_relations(sys)
        if not report.passed:
            raise RuntimeError(f"CAR construction failed: {report.failures[:3]}")
    return sys


@dataclass
class CARReport:
    modes: int
    tol: float
    max_deviation: float
    by_relation: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [f"modes={self.modes} max deviation {self.max_deviation:.3e} (tol {self.tol:g})"]
        for name, dev in self.by_relation.items():
            lines.append(f"  {name:<22s} {dev:.3e}")
        for i, j, name, dev in self.failures:
            lines.append(f"  FAIL i={i} j={j} {name}: deviation {dev:.3e}")
        return "\n".join(lines)


def verify_car_relations(sys: FockSystem, tol: float = CAR_TOL) -> CARReport:
    """Check every anticommutation relation over all mode pairs.

    Products are formed in CSR form; the generators are monomial matrices,
    so this is exact and keeps ``m = 10`` cheap.
    """
    a = [sp.csr_matrix(x) for x in sys.annihilators]
    c = [sp.csr_matrix(x) for x in sys.creators]
    eye = sp.identity(sys.dim, dtype=np.complex128, format="csr")
    by_relation = {RELATION_AA_DAG: 0.0, RELATION_AA: 0.0, RELATION_ADAG_ADAG: 0.0, RELATION_ADJOINT: 0.0}
    failures = []

    def record(i, j, name, dev):
        by_relation[name] = max(by_relation[name], dev)
        if dev > tol:
            failures.append((i, j, name, dev))

    def dev_of(s) -> float:
        return float(abs(s).max()) if s.nnz else 0.0

    for i in range(sys.modes):
        record(i, i, RELATION_ADJOINT, max_abs(sys.creators[i] - dagger(sys.annihilators[i])))
        for j in range(sys.modes):
            target = eye if i == j else 0
            record(i, j, RELATION_AA_DAG, dev_of(a[i] @ c[j] + c[j] @ a[i] - target))
            if j >= i:
                record(i, j, RELATION_AA, dev_of(a[i] @ a[j] + a[j] @ a[i]))
                record(i, j, RELATION_ADAG_ADAG, dev_of(c[i] @ c[j] + c[j] @ c[i]))
    return CARReport(sys.modes, tol, max(by_relation.values()), by_relation, failures)


# --- antisymmetric tensor route ---------------------------------------------


def permutation_sign(sigma) -> int:
    sigma = list(sigma)
    inversions = sum(1 for i in range(len(sigma)) for j in range(i + 1, len(sigma)) if sigma[i] > sigma[j])
    return -1 if inversions % 2 else 1


@dataclass(frozen=True)
class PermutationOperator:
    n: int
    sigma: tuple
    matrix: np.ndarray


def permutation_operator(sigma, d: int) -> PermutationOperator:
    """Unitary ``P_sigma`` with ``P_sigma(x_0 (x) ... ) = x_sigma(0) (x) ...``.

    ``sigma`` is a 0-indexed permutation tuple. Composition obeys
    ``P_sigma P_tau = P_{tau o sigma}``.
    """
    sigma = tuple(int(s) for s in sigma)
    n = len(sigma)
    if sorted(sigma) != list(range(n)):
        raise ValueError(f"{sigma} is not a permutation of 0..{n - 1}")
    size = d**n
    if size > MAX_TENSOR_DIM:
        raise ValueError(f"d**n = {size} exceeds the cap {MAX_TENSOR_DIM}")
    cols = np.arange(size)
    digits = np.array(np.unravel_index(cols, [d] * n))
    rows = np.ravel_multi_index(digits[list(sigma)], [d] * n)
    mat = np.zeros((size, size), dtype=np.complex128)
    mat[rows, cols] = 1.0
    return PermutationOperator(n, sigma, mat)


def antisymmetrizer(n: int, d: int, signed: bool = True) -> np.ndarray:
    """``(1/n!) sum_sigma sgn(sigma) P_sigma`` on ``(C^d)^{(x) n}``.

    With ``signed=False`` the plain symmetrizing average is returned instead;
    only the signed operator projects onto the fermionic sector.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    size = d**n
    if size > MAX_TENSOR_DIM:
        raise ValueError(f"d**n = {size} exceeds the cap {MAX_TENSOR_DIM}")
    out = np.zeros((size, size), dtype=np.complex128)
    cols = np.arange(size)
    digits = np.array(np.unravel_index(cols, [d] * n))
    for sigma in itertools.permutations(range(n)):
        rows = np.ravel_multi_index(digits[list(sigma)], [d] * n)
        out[rows, cols] += permutation_sign(sigma) if signed else 1.0
    return out / math.factorial(n)


def _antisymmetrize(t: np.ndarray) -> np.ndarray:
    n = t.ndim
    if n <= 1:
        return t.copy()
    out = np.zeros_like(t)
    for sigma in itertools.permutations(range(n)):
        out += permutation_sign(sigma) * np.transpose(t, sigma)
    return out / math.factorial(n)


def _sector_tensor(sys: FockSystem, b: int) -> np.ndarray:
    """``sqrt(N!) A_N(e_{i_1} (x) ... (x) e_{i_N})`` for the occupied modes of ``b``."""
    modes = [i for i in range(sys.modes) if (b >> i) & 1]
    n = len(modes)
    t = np.zeros([sys.modes] * n, dtype=np.complex128)
    t[tuple(modes)] = 1.0
    return math.sqrt(math.factorial(n)) * _antisymmetrize(t)


def fock_to_tensors(sys: FockSystem, x) -> list:
    """Split an occupation-basis vector into its antisymmetric N-particle tensors."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    if x.shape[0] != sys.dim:
        raise ValueError(f"Fock vector has length {x.shape[0]}, expected {sys.dim}")
    if sys.modes**sys.modes > MAX_TENSOR_DIM:
        raise ValueError(f"tensor sectors for {sys.modes} modes exceed the cap {MAX_TENSOR_DIM}")
    occ = sys.basis.sum(axis=1)
    sectors = []
    for n in range(sys.modes + 1):
        t = np.zeros([sys.modes] * n, dtype=np.complex128)
        for b in np.flatnonzero(occ == n):
            if x[b] != 0:
                t = t + x[b] * _sector_tensor(sys, int(b))
        sectors.append(t)
    return sectors


def tensors_to_fock(sys: FockSystem, sectors) -> np.ndarray:
    out = np.zeros(sys.dim, dtype=np.complex128)
    occ = sys.basis.sum(axis=1)
    for n, t in enumerate(sectors):
        if n > sys.modes:
            if max_abs(t) > 0:
                raise ValueError(f"{n}-particle sector cannot exist with {sys.modes} modes")
            continue
        for b in np.flatnonzero(occ == n):
            out[b] = np.vdot(_sector_tensor(sys, int(b)), t)
    return out


def creation_via_antisymmetrizer(sys: FockSystem, f, x) -> np.ndarray:
    """Apply ``a(f)^*`` to ``x`` through ``(a(f)^* x)^(N) = sqrt(N) A_N(f (x) x^(N-1))``."""
    f = _mode_vector(sys, f)
    sectors = fock_to_tensors(sys, x)
    created = [np.zeros((), dtype=np.complex128)]
    for n in range(1, sys.modes + 1):
        prev = sectors[n - 1]
        created.append(math.sqrt(n) * _antisymmetrize(np.multiply.outer(f, prev)))
    return tensors_to_fock(sys, created)


# --- parity ------------------------------------------------------------------


@dataclass(frozen=True)
class ParityMap:
    support: frozenset
    matrix: np.ndarray

    def apply(self, x) -> np.ndarray:
        v = self.matrix
        return v @ as_operator(x) @ dagger(v)

    __call__ = apply


def parity_automorphism(sys: FockSystem, support=None) -> ParityMap:
    """Parity map flipping the sign of ``a_i`` for ``i`` in ``support``.

    ``support=None`` means all modes. Implemented as conjugation by
    ``prod_{i in support} (1 - 2 a_i^* a_i)``.
    """
    support = frozenset(range(sys.modes)) if support is None else frozenset(int(i) for i in support)
    bad = [i for i in support if not 0 <= i < sys.modes]
    if bad:
        raise ValueError(f"parity support {sorted(bad)} outside modes 0..{sys.modes - 1}")
    occ = sys.basis[:, sorted(support)].sum(axis=1) if support else np.zeros(sys.dim, dtype=int)
    return ParityMap(support, np.diag((-1.0) ** occ).astype(np.complex128))


def even_part(sys: FockSystem, x, support=None) -> np.ndarray:
    theta = parity_automorphism(sys, support)
    x = as_operator(x)
    return (x + theta(x)) / 2


def to_occupied_first(x) -> np.ndarray:
    """Reorder an operator from occupation-ascending to occupation-descending basis.

    For one mode this maps ``(|0>, |1>)`` ordering to ``(|1>, |0>)``, the
    ordering in which the textbook two-level matrices are usually written.
    """
    x = np.asarray(x)
    return x[::-1, ::-1] if x.ndim == 2 else x[::-1]


from_occupied_first = to_occupied_first
