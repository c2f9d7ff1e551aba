"""Dense complex Hermitian matrix algebra.

Everything downstream (state families, error/loss operators, SDP data)
is carried by plain complex ``numpy`` arrays; this module holds the shared
primitives: Kronecker products over subsystem factors, partial traces,
eigenvalue queries, and the realification map that turns complex Hermitian
SDP data into real symmetric form for the solver.

Conventions
-----------
* Subsystem ordering is fixed globally as (clone-1 space, clone-2 space,
  mint-side spaces); a dimension tuple such as ``(3, 3, 4)`` always lists
  factors in that order.
* Matrices are immutable by convention: every function returns a fresh
  array and never mutates its inputs, so all operations are safe to call
  from concurrent workers.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

#: Tolerance below which a matrix counts as Hermitian.
HERMITIAN_ATOL = 1e-12


class DimensionError(ValueError):
    """Subsystem dimensions are inconsistent with the matrix shape."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (e.g. not Hermitian)."""


class CapacityError(RuntimeError):
    """A requested construction exceeds the configured size budget."""


def as_matrix(m: np.ndarray) -> np.ndarray:
    """Return ``m`` as a square 2-d complex array, validating the shape."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    """True when ``max_ij |M[i,j] - conj(M[j,i])|`` is at most ``atol``."""
    a = np.asarray(m)
    return bool(np.max(np.abs(a - a.conj().T)) <= atol)


def require_hermitian(m: np.ndarray, name: str = "matrix",
                      atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate Hermiticity, raising :class:`ContractViolationError` otherwise."""
    a = as_matrix(m)
    dev = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if dev > atol:
        raise ContractViolationError(
            f"{name} is not Hermitian (max deviation {dev:.3e} > {atol:.1e})")
    return a


def hermitize(m: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (M + M*) / 2.

    Used to remove arithmetic drift before handing matrices to the solver;
    inputs are expected to be Hermitian up to rounding already.
    """
    a = np.asarray(m)
    return (a + a.conj().T) / 2


def validate_dims(dims: Sequence[int], dim: int) -> tuple[int, ...]:
    """Check that a factor list is positive and multiplies to ``dim``."""
    t = tuple(int(d) for d in dims)
    if not t or any(d < 1 for d in t):
        raise DimensionError(f"factor dimensions must be >= 1, got {t}")
    if int(np.prod(t)) != dim:
        raise DimensionError(
            f"factor dimensions {t} have product {int(np.prod(t))}, "
            f"expected {dim}")
    return t


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; (a ⊗ b)[(i*rb+k),(j*cb+l)] = a[i,j] * b[k,l]."""
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    """Kronecker product of a sequence of matrices, left to right."""
    out: np.ndarray | None = None
    for m in mats:
        out = np.asarray(m) if out is None else np.kron(out, m)
    if out is None:
        raise ValueError("kron_all needs at least one factor")
    return out


def partial_trace(m: np.ndarray, dims: Sequence[int],
                  keep: Iterable[int]) -> np.ndarray:
    """Trace out all subsystem factors not listed in ``keep``.

    Parameters
    ----------
    m : ndarray
        Square matrix on the tensor product of the ``dims`` factors.
    dims : sequence of int
        Subsystem dimensions, in the global factor order.
    keep : iterable of int
        Indices (into ``dims``) of the factors to retain; the result acts
        on the kept factors in their original order.

    The total trace is preserved: ``Tr(result) == Tr(m)``.
    """
    a = as_matrix(m)
    dims = validate_dims(dims, a.shape[0])
    keep_set = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep_set):
        raise DimensionError(f"keep indices {keep_set} out of range for {dims}")
    n = len(dims)
    tensor = a.reshape(dims + dims)
    # Row axis i gets label i; column axis i gets the same label when traced
    # out, a fresh label otherwise.
    row = list(range(n))
    col = [i if i not in keep_set else n + i for i in range(n)]
    out_labels = [i for i in row if i in keep_set] + \
                 [c for c in col if c >= n]
    reduced = np.einsum(tensor, row + col, out_labels)
    d_keep = int(np.prod([dims[k] for k in keep_set])) if keep_set else 1
    return reduced.reshape(d_keep, d_keep)


def permute_subsystems(m: np.ndarray, dims: Sequence[int],
                       perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: new factor ``i`` is old factor ``perm[i]``."""
    a = as_matrix(m)
    dims = validate_dims(dims, a.shape[0])
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{perm} is not a permutation of {len(dims)} factors")
    n = len(dims)
    tensor = a.reshape(dims + dims)
    axes = perm + [n + p for p in perm]
    new_dims = [dims[p] for p in perm]
    d = int(np.prod(new_dims))
    return tensor.transpose(axes).reshape(d, d)


def min_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    a = require_hermitian(m, "min_eigenvalue input")
    return float(np.linalg.eigvalsh(hermitize(a))[0])


def max_eigenvalue(m: np.ndarray) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    a = require_hermitian(m, "max_eigenvalue input")
    return float(np.linalg.eigvalsh(hermitize(a))[-1])


def realify(m: np.ndarray) -> np.ndarray:
    """Real symmetric image [[Re m, -Im m], [Im m, Re m]] of a Hermitian m.

    For Hermitian A, X the map satisfies
    ``Tr(realify(A) @ realify(X)) = 2 Tr(A X)`` and reproduces the spectrum
    of ``m`` with every eigenvalue doubled in multiplicity, so positive
    semidefiniteness is preserved exactly.
    """
    a = require_hermitian(m, "realify input")
    re, im = a.real, a.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    out = np.vstack([top, bot])
    return (out + out.T) / 2


def symplectic_average(y: np.ndarray) -> np.ndarray:
    """Average a real symmetric 2d x 2d matrix with its symplectic conjugate.

    The conjugation is by Omega = [[0, -I], [I, 0]]; the average always has
    the block structure [[A, -B], [B, A]] of a realified Hermitian matrix,
    and for realified constraint data it preserves objective and feasibility.
    """
    a = np.asarray(y, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2:
        raise DimensionError(f"expected an even square matrix, got {a.shape}")
    d = a.shape[0] // 2
    omega = np.zeros_like(a)
    eye = np.eye(d)
    omega[:d, d:] = -eye
    omega[d:, :d] = eye
    return (a + omega @ a @ omega.T) / 2


def complex_from_real(y: np.ndarray) -> np.ndarray:
    """Invert :func:`realify` on a structured real matrix (after averaging)."""
    a = np.asarray(y, dtype=float)
    d = a.shape[0] // 2
    re = (a[:d, :d] + a[d:, d:]) / 2
    im = (a[d:, :d] - a[:d, d:]) / 2
    out = re + 1j * im
    return hermitize(out)


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of the d x d matrices, d**2 elements.

    Ordering: for i <= j row-major over the upper triangle, the diagonal
    unit E_ii first at i == j, otherwise the symmetric element
    (E_ij + E_ji)/sqrt(2) followed by the antisymmetric
    (-i E_ij + i E_ji)/sqrt(2).
    """
    if d < 1:
        raise DimensionError(f"basis dimension must be >= 1, got {d}")
    out: list[np.ndarray] = []
    for i in range(d):
        for j in range(i, d):
            if i == j:
                b = np.zeros((d, d), dtype=complex)
                b[i, i] = 1.0
                out.append(b)
            else:
                s = np.zeros((d, d), dtype=complex)
                s[i, j] = s[j, i] = 1 / np.sqrt(2)
                out.append(s)
                a = np.zeros((d, d), dtype=complex)
                a[i, j] = -1j / np.sqrt(2)
                a[j, i] = 1j / np.sqrt(2)
                out.append(a)
    return out


def hs_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt inner product Tr(a b) for Hermitian a, b (real)."""
    return float(np.einsum("ij,ji->", np.asarray(a), np.asarray(b)).real)
