"""Dense complex operator primitives.

Operators are plain ``numpy.ndarray`` objects of dtype ``complex128`` and
shape ``(dim, dim)``. Tensor products follow the ``numpy.kron`` block
convention: factor 0 is the most significant index.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
DENSITY_TOL = 1e-10
EIG_FLOOR = -1e-10
PROB_FLOOR = -1e-12


class InvalidDensityError(ValueError):
    """Raised when a matrix fails one of the density-operator invariants."""


class HermitianSpectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_operator(x) -> np.ndarray:
    """Coerce ``x`` to a square complex128 array."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be square, got shape {a.shape}")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and max_abs(a - dagger(a)) <= tol


def is_unitary(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return max_abs(dagger(a) @ a - np.eye(a.shape[0])) <= tol


def is_projection(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return is_hermitian(a, tol) and max_abs(a @ a - a) <= tol


def density_violations(rho, tol: float = DENSITY_TOL, floor: float = EIG_FLOOR) -> list[str]:
    """Names of the density invariants ``rho`` violates (empty if valid)."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return [f"not square: shape {rho.shape}"]
    problems = []
    herm_err = max_abs(rho - dagger(rho))
    if herm_err > tol:
        problems.append(f"not Hermitian (max |rho - rho^H| = {herm_err:.3e})")
        return problems
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        problems.append(f"trace {tr!r} differs from 1 by more than {tol:g}")
    lam_min = float(np.linalg.eigvalsh((rho + dagger(rho)) / 2)[0])
    if lam_min < floor:
        problems.append(f"not positive semidefinite (min eigenvalue {lam_min:.3e} < {floor:g})")
    return problems


def is_density(rho, tol: float = DENSITY_TOL, floor: float = EIG_FLOOR) -> bool:
    return not density_violations(rho, tol, floor)


def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_operator(a), as_operator(b))


def kron_all(ops: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for op in ops:
        out = np.kron(out, as_operator(op))
    return out


def partial_trace(x, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every tensor factor of ``x`` not listed in ``keep``.

    Args:
        x: Operator on ``dims[0] x dims[1] x ...`` (kron ordering).
        dims: Dimension of each tensor factor.
        keep: Indices of the factors to keep. Kept factors appear in
            ascending order in the result.

    Returns:
        The reduced operator on the kept factors.
    """
    x = as_operator(x)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise ValueError(f"factor dimensions must be positive, got {dims}")
    total = int(np.prod(dims))
    if total != x.shape[0]:
        raise ValueError(f"dims {dims} have product {total} but operator dimension is {x.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise ValueError(f"keep {keep} out of range for {len(dims)} factors")
    drop = [k for k in range(len(dims)) if k not in keep]
    n = len(dims)
    t = x.reshape(dims + dims)
    perm = keep + drop + [n + k for k in keep] + [n + k for k in drop]
    dk = int(np.prod([dims[k] for k in keep]))
    dd = int(np.prod([dims[k] for k in drop])) if drop else 1
    t = t.transpose(perm).reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def hermitian_eig(a, tol: float = HERMITIAN_TOL) -> HermitianSpectrum:
    a = as_operator(a)
    err = max_abs(a - dagger(a))
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (max deviation {err:.3e} > {tol:g})")
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    return HermitianSpectrum(w, v)


def _xlogx(p: np.ndarray) -> float:
    p = p[p > 0]
    # adding 0.0 turns a -0.0 from a deterministic distribution into 0.0
    return float(-np.sum(p * np.log(p))) + 0.0


def von_neumann_entropy(rho) -> float:
    """Entropy ``-Tr rho ln rho`` in nats.

    Eigenvalues in ``[-1e-10, 0]`` are treated as rounding noise and
    clamped to zero.
    """
    problems = density_violations(rho)
    if problems:
        raise InvalidDensityError("invalid density operator: " + "; ".join(problems))
    lam = hermitian_eig(rho).eigenvalues
    return _xlogx(np.clip(lam, 0.0, None))


def shannon_entropy(p) -> float:
    """Entropy ``-sum p ln p`` of a probability vector, in nats."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size and p.min() < PROB_FLOOR:
        raise ValueError(f"negative probability {p.min():.3e}")
    total = p.sum()
    if abs(total - 1.0) > DENSITY_TOL:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    return _xlogx(np.clip(p, 0.0, None))


def to_bits(nats):
    return nats / np.log(2.0)
