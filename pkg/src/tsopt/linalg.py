"""Finite-dimensional operator substrate.

Matrices are plain ``numpy`` complex arrays. CP maps are stored as Kraus
lists; the Choi matrix uses the input-first ordering

    C = sum_ij |i><j| (x) M(|i><j|) = sum_a vec(K_a) vec(K_a)^dagger

with column-stacking ``vec``, so the identity channel on C^d has Choi matrix
``sum_ij |ii><jj|``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

EPS_HERM = 1e-10
EPS_PSD = 1e-9
EPS_PROB = 1e-9
DEFAULT_MAX_DIM = 64


class StructuralError(ValueError):
    """Malformed input: wrong shape, non-Hermitian operator, bad dimensions."""


class DomainError(ValueError):
    """Input is well-formed but outside the domain of the operation."""


def max_dim() -> int:
    """Soft limit on composite dimensions (``TSOPT_MAX_DIM`` overrides)."""
    value = os.environ.get("TSOPT_MAX_DIM")
    if value is None:
        return DEFAULT_MAX_DIM
    try:
        limit = int(value)
    except ValueError:
        raise StructuralError(f"TSOPT_MAX_DIM must be an integer, got {value!r}")
    if limit < 1:
        raise StructuralError("TSOPT_MAX_DIM must be positive")
    return limit


def _check_dim(d: int) -> None:
    limit = max_dim()
    if d > limit:
        raise StructuralError(f"dimension {d} exceeds the soft limit {limit} (set TSOPT_MAX_DIM to raise it)")


@dataclass(frozen=True)
class SystemLabel:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise StructuralError(f"system {self.name!r} needs a positive integer dimension, got {self.dim!r}")


TRIVIAL = SystemLabel("I", 1)


# ---------------------------------------------------------------------------
# predicates and small helpers
# ---------------------------------------------------------------------------

def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise StructuralError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def as_hermitian(m, tol: float = EPS_HERM) -> np.ndarray:
    """Validate a square Hermitian matrix and return it as a complex array."""
    arr = as_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise StructuralError(f"operator must be square, got shape {arr.shape}")
    if arr.size and np.max(np.abs(arr - arr.conj().T)) > tol:
        raise StructuralError("operator is not Hermitian")
    return arr


def is_hermitian(m, tol: float = EPS_HERM) -> bool:
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    return bool(np.max(np.abs(arr - arr.conj().T), initial=0.0) <= tol)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def min_eigenvalue(m) -> float:
    arr = as_hermitian(m)
    return float(np.linalg.eigvalsh(hermitian_part(arr))[0])


def is_psd(m, tol: float = EPS_PSD) -> bool:
    """True iff ``m`` is Hermitian with smallest eigenvalue >= -tol.

    Raises :class:`StructuralError` for non-square or non-Hermitian input.
    """
    return min_eigenvalue(m) >= -tol


def dominates(upper, lower, tol: float = EPS_PSD) -> bool:
    """``lower <= upper`` in the Loewner order."""
    return is_psd(as_hermitian(upper) - as_hermitian(lower), tol)


def tensor(*items):
    """Kronecker product of matrices, or parallel composition of CP maps."""
    if not items:
        raise StructuralError("tensor needs at least one factor")
    if all(isinstance(x, CPMap) for x in items):
        return reduce(lambda a, b: a.tensor(b), items)
    if any(isinstance(x, CPMap) for x in items):
        raise StructuralError("cannot tensor a CP map with a matrix")
    return reduce(np.kron, [as_matrix(x) for x in items])


def partial_trace(m, dims: Sequence[int], keep: int | Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor of ``m`` not listed in ``keep``.

    ``dims`` gives the factor dimensions; kept factors stay in their
    original order.
    """
    arr = as_matrix(m)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims)) if dims else 1
    if arr.shape != (total, total):
        raise StructuralError(f"operator of shape {arr.shape} does not match factor dims {dims}")
    keep = [keep] if isinstance(keep, (int, np.integer)) else list(keep)
    n = len(dims)
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise StructuralError(f"invalid subsystem indices {keep} for {n} factors")
    t = arr.reshape(dims + dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in sorted(keep)] + [n + i for i in sorted(keep)]
    # trace over a factor = contract row and column index with the same label
    reduced = np.einsum(t, row + col, out)
    dk = int(np.prod([dims[i] for i in sorted(keep)])) if keep else 1
    return reduced.reshape(dk, dk)


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def inv_sqrtm_psd(m: np.ndarray, tol: float = EPS_PSD) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    if w[0] <= tol:
        raise DomainError("operator is singular; inverse square root undefined")
    return (v / np.sqrt(w)) @ v.conj().T


def support_projector(m, tol: float = EPS_PSD) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(as_hermitian(m)))
    cols = v[:, w > tol]
    return cols @ cols.conj().T


def kernel_projector(m, tol: float = EPS_PSD) -> np.ndarray:
    d = np.asarray(m).shape[0]
    return np.eye(d) - support_projector(m, tol)


def permutation_unitary(dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Unitary sending ``|x_0 ... x_{n-1}>`` to ``|x_order[0] ... x_order[n-1]>``."""
    dims = list(dims)
    total = int(np.prod(dims)) if dims else 1
    eye = np.eye(total).reshape(dims + [total])
    return eye.transpose(list(order) + [len(dims)]).reshape(total, total).astype(complex)


def basis_transpose(m: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
    """Transpose in the orthonormal basis given by the columns of ``basis``."""
    if basis is None:
        return m.T.copy()
    return basis @ (basis.conj().T @ m @ basis).T @ basis.conj().T


def basis_conjugate(m: np.ndarray, basis_out: np.ndarray | None = None,
                    basis_in: np.ndarray | None = None) -> np.ndarray:
    """Complex conjugation in the joint basis ``(basis_out, basis_in)``."""
    if basis_out is None and basis_in is None:
        return m.conj()
    bo = np.eye(m.shape[0]) if basis_out is None else basis_out
    bi = np.eye(m.shape[1]) if basis_in is None else basis_in
    return bo @ (bo.conj().T @ m @ bi).conj() @ bi.conj().T


# ---------------------------------------------------------------------------
# CP maps
# ---------------------------------------------------------------------------

def _vec(k: np.ndarray) -> np.ndarray:
    return k.T.reshape(-1)


def _unvec(v: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    return v.reshape(d_in, d_out).T


class CPMap:
    """Completely positive map ``X -> sum_a K_a X K_a^dagger``.

    Instances are immutable; every combinator returns a new map. An empty
    Kraus list is the zero map.
    """

    __slots__ = ("_kraus", "dim_in", "dim_out")

    def __init__(self, kraus: Iterable, dim_in: int | None = None, dim_out: int | None = None):
        ks = [as_matrix(k) for k in kraus]
        if ks:
            shape = ks[0].shape
            if any(k.shape != shape for k in ks):
                raise StructuralError("Kraus operators must share one shape")
            if dim_out is not None and shape[0] != dim_out or dim_in is not None and shape[1] != dim_in:
                raise StructuralError(f"Kraus shape {shape} does not match dims {dim_in}->{dim_out}")
            dim_out, dim_in = shape
        elif dim_in is None or dim_out is None:
            raise StructuralError("the zero map needs explicit dimensions")
        _check_dim(dim_in)
        _check_dim(dim_out)
        for k in ks:
            k.setflags(write=False)
        self._kraus = tuple(ks)
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        if len(self._kraus) > self.dim_in * self.dim_out:
            self._kraus = choi_to_kraus(self.choi(), self.dim_in, self.dim_out)._kraus

    @property
    def kraus(self) -> tuple[np.ndarray, ...]:
        return self._kraus

    def __repr__(self):
        return f"CPMap({self.dim_in}->{self.dim_out}, {len(self._kraus)} Kraus)"

    @classmethod
    def identity(cls, d: int) -> CPMap:
        return cls([np.eye(d, dtype=complex)])

    @classmethod
    def unitary(cls, u) -> CPMap:
        return cls([u])

    @classmethod
    def zero(cls, dim_in: int, dim_out: int) -> CPMap:
        return cls([], dim_in, dim_out)

    def apply(self, x) -> np.ndarray:
        x = as_matrix(x)
        if x.shape != (self.dim_in, self.dim_in):
            raise StructuralError(f"input of shape {x.shape} for a map on dimension {self.dim_in}")
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        for k in self._kraus:
            out += k @ x @ k.conj().T
        return out

    __call__ = apply

    def choi(self) -> np.ndarray:
        return kraus_to_choi(self)

    def compose(self, first: CPMap) -> CPMap:
        """``self o first`` (apply ``first``, then ``self``)."""
        if first.dim_out != self.dim_in:
            raise StructuralError(f"cannot compose {first.dim_in}->{first.dim_out} with {self.dim_in}->{self.dim_out}")
        ks = [b @ a for b in self._kraus for a in first._kraus]
        return CPMap(ks, first.dim_in, self.dim_out)

    def tensor(self, other: CPMap) -> CPMap:
        ks = [np.kron(a, b) for a in self._kraus for b in other._kraus]
        return CPMap(ks, self.dim_in * other.dim_in, self.dim_out * other.dim_out)

    def scaled(self, factor: float) -> CPMap:
        if factor < 0:
            raise DomainError("CP maps can only be scaled by nonnegative factors")
        r = np.sqrt(factor)
        return CPMap([r * k for k in self._kraus], self.dim_in, self.dim_out)

    def __add__(self, other: CPMap) -> CPMap:
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise StructuralError("cannot add CP maps with different dimensions")
        return CPMap(self._kraus + other._kraus, self.dim_in, self.dim_out)

    def adjoint(self) -> CPMap:
        """Hilbert-Schmidt adjoint ``X -> sum_a K_a^dagger X K_a``."""
        return CPMap([k.conj().T for k in self._kraus], self.dim_out, self.dim_in)

    def kraus_gram(self) -> np.ndarray:
        """``sum_a K_a^dagger K_a``; equals the identity iff trace-preserving."""
        g = np.zeros((self.dim_in, self.dim_in), dtype=complex)
        for k in self._kraus:
            g += k.conj().T @ k
        return g

    def weight(self) -> float:
        """``Tr M(1/d_in)``."""
        return float(np.real(np.trace(self.kraus_gram()))) / self.dim_in

    def is_trace_preserving(self, tol: float = EPS_PROB) -> bool:
        return bool(np.max(np.abs(self.kraus_gram() - np.eye(self.dim_in))) <= tol)

    def canonical(self) -> CPMap:
        return choi_to_kraus(self.choi(), self.dim_in, self.dim_out)


def is_cp(m: CPMap, tol: float = EPS_PSD) -> bool:
    return is_psd(m.choi(), tol)


def kraus_to_choi(m: CPMap) -> np.ndarray:
    n = m.dim_in * m.dim_out
    c = np.zeros((n, n), dtype=complex)
    for k in m.kraus:
        v = _vec(k)
        c += np.outer(v, v.conj())
    return c


def choi_to_kraus(c, dim_in: int, dim_out: int, tol: float = EPS_PSD) -> CPMap:
    """Canonical Kraus form from a Choi matrix.

    Eigenvalues in descending order with ties broken by the real parts of
    the (phase-fixed) eigenvectors; eigenvalues <= tol are dropped.
    """
    c = as_hermitian(c, tol=max(EPS_HERM, tol))
    if c.shape != (dim_in * dim_out,) * 2:
        raise StructuralError(f"Choi matrix shape {c.shape} does not match dims {dim_in}->{dim_out}")
    w, v = np.linalg.eigh(hermitian_part(c))
    if w.size and w[0] < -tol:
        raise DomainError(f"Choi matrix is not PSD (min eigenvalue {w[0]:.3e})")
    vecs = []
    for lam, col in zip(w, v.T):
        if lam <= tol:
            continue
        # fix the phase: first non-negligible entry real positive
        idx = int(np.flatnonzero(np.abs(col) > 1e-12)[0])
        col = col * (abs(col[idx]) / col[idx])
        vecs.append((float(lam), col))
    vecs.sort(key=lambda item: (-round(item[0], 12), tuple(np.round(item[1].real, 12))))
    ks = [np.sqrt(lam) * _unvec(col, dim_in, dim_out) for lam, col in vecs]
    return CPMap(ks, dim_in, dim_out)


def map_matrix_units(m: CPMap) -> np.ndarray:
    """Images of all matrix units, shape ``(d_in, d_in, d_out, d_out)``."""
    d = m.dim_in
    out = np.zeros((d, d, m.dim_out, m.dim_out), dtype=complex)
    for k in m.kraus:
        # k |i><j| k^dagger = k[:, i] k[:, j]^*
        out += np.einsum("bi,cj->ijbc", k, k.conj())
    return out
