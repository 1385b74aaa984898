"""Probability-preserving symmetry transformations and time reversal.

Type I transformations send states to states and effects to effects; Type II
send states to effects and effects to states. Each type comes with a plain
branch (``X -> S X S^dagger``) and a transpose branch (``X -> S X^T S^dagger``),
with transposition taken in an orthonormal basis (computational by default).
Time reversal compatible with unitary dynamics is the Type II transpose
branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .circuit import Circuit, Node
from .linalg import (
    CPMap, StructuralError, basis_conjugate, basis_transpose, hermitian_part,
)
from .sampling import random_effect_pair, random_state_pair
from .operations import (
    EffectPair, GeneralizedOperation, StatePair, TransformationPair, make_operation, probability,
)

TYPE_I = "I"
TYPE_II = "II"
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class SymmetryTransform:
    kind: str
    transpose: bool
    s: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (TYPE_I, TYPE_II):
            raise StructuralError(f"kind must be 'I' or 'II', got {self.kind!r}")
        s = np.asarray(self.s, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise StructuralError("S must be a square matrix")
        if not np.isfinite(np.linalg.cond(s)) or np.linalg.cond(s) > COND_LIMIT:
            raise StructuralError("S must be invertible")
        object.__setattr__(self, "s", s)
        if self.basis is not None:
            b = np.asarray(self.basis, dtype=complex)
            if b.shape != s.shape or np.max(np.abs(b.conj().T @ b - np.eye(len(b)))) > 1e-9:
                raise StructuralError("transposition basis must be an orthonormal basis matrix")
            object.__setattr__(self, "basis", b)
        object.__setattr__(self, "_s_inv", np.linalg.inv(s))

    @property
    def dim(self) -> int:
        return self.s.shape[0]

    @property
    def is_unitary(self) -> bool:
        return bool(np.max(np.abs(self.s.conj().T @ self.s - np.eye(self.dim))) <= 1e-9)

    def _t(self, x: np.ndarray) -> np.ndarray:
        return basis_transpose(x, self.basis) if self.transpose else x

    def _forward(self, x):
        return self.s @ self._t(x) @ self.s.conj().T

    def _backward(self, x):
        si = self._s_inv
        return si.conj().T @ self._t(x) @ si

    def _check(self, d: int):
        if d != self.dim:
            raise StructuralError(f"transform acts on dimension {self.dim}, got {d}")

    def apply_to_state(self, state: StatePair):
        self._check(state.dim)
        a, a_bar = self._forward(state.rho), self._forward(state.rho_bar)
        t = np.trace(a_bar).real
        if self.kind == TYPE_I:
            return StatePair(hermitian_part(a / t), hermitian_part(a_bar / t))
        d = self.dim
        return EffectPair(hermitian_part(d * a / t), hermitian_part(d * a_bar / t))

    def apply_to_effect(self, effect: EffectPair):
        self._check(effect.dim)
        b, b_bar = self._backward(effect.e), self._backward(effect.e_bar)
        t = np.trace(b_bar).real
        if self.kind == TYPE_I:
            d = self.dim
            return EffectPair(hermitian_part(d * b / t), hermitian_part(d * b_bar / t))
        return StatePair(hermitian_part(b / t), hermitian_part(b_bar / t))


class Transform(Protocol):
    kind: str

    def apply_to_state(self, state: StatePair): ...

    def apply_to_effect(self, effect: EffectPair): ...


@dataclass(frozen=True)
class ComposedTransform:
    """``second`` after ``first``; the kind follows II o II = I, I o II = II."""

    first: Transform
    second: Transform

    @property
    def kind(self) -> str:
        return TYPE_I if self.first.kind == self.second.kind else TYPE_II

    def _route(self, obj):
        obj = self.first.apply_to_state(obj) if isinstance(obj, StatePair) else self.first.apply_to_effect(obj)
        return self.second.apply_to_state(obj) if isinstance(obj, StatePair) else self.second.apply_to_effect(obj)

    def apply_to_state(self, state: StatePair):
        return self._route(state)

    def apply_to_effect(self, effect: EffectPair):
        return self._route(effect)


def compose(first: Transform, second: Transform) -> ComposedTransform:
    return ComposedTransform(first, second)


def verify_invariance(t: Transform, sample: Sequence[tuple[StatePair, EffectPair]]) -> float:
    """Largest change of ``p(state, effect)`` over ``sample`` under ``t``."""
    worst = 0.0
    for state, effect in sample:
        p = probability(state, effect)
        s_img, e_img = t.apply_to_state(state), t.apply_to_effect(effect)
        if t.kind == TYPE_I:
            q = probability(s_img, e_img)
        else:
            q = probability(e_img, s_img)
        worst = max(worst, abs(p - q))
    return worst


# ---------------------------------------------------------------------------
# involutions
# ---------------------------------------------------------------------------

def _proportionality(x: np.ndarray, y: np.ndarray, tol: float = 1e-9):
    """Return ``c`` with ``x = c y`` entrywise to ``tol`` (relative), else None."""
    yy = np.vdot(y, y)
    if abs(yy) == 0:
        return None
    c = np.vdot(y, x) / yy
    scale = max(np.max(np.abs(x)), 1.0)
    return c if np.max(np.abs(x - c * y)) <= tol * scale else None


@dataclass(frozen=True)
class InvolutionReport:
    kind: str
    transpose: bool
    algebraic: bool
    functional: bool
    max_deviation: float
    ratio: complex | None
    statistics: str | None
    unitary: bool

    @property
    def is_involution(self) -> bool:
        return self.algebraic and self.functional


def _apply_twice(t: SymmetryTransform, obj):
    for _ in range(2):
        obj = t.apply_to_state(obj) if isinstance(obj, StatePair) else t.apply_to_effect(obj)
    return obj


def check_involution(t: SymmetryTransform, samples: int = 20, seed: int = 0, tol: float = 1e-9) -> InvolutionReport:
    """Algebraic and functional test that applying ``t`` twice is the identity."""
    s, si = t.s, np.linalg.inv(t.s)
    statistics = None
    if t.kind == TYPE_I and not t.transpose:
        ratio = _proportionality(s, si)
    elif t.kind == TYPE_I:
        ratio = _proportionality(s, np.linalg.inv(basis_conjugate(s, t.basis, t.basis)))
    elif not t.transpose:
        ratio = _proportionality(s, s.conj().T)
    else:
        ratio = _proportionality(s, basis_transpose(s, t.basis))
        if ratio is not None:
            if abs(ratio - 1) <= tol:
                statistics = "bosonic"
            elif abs(ratio + 1) <= tol:
                statistics = "fermionic"
            else:
                ratio = None
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        st = random_state_pair(t.dim, rng)
        back = _apply_twice(t, st)
        worst = max(worst, np.max(np.abs(back.rho - st.rho)), np.max(np.abs(back.rho_bar - st.rho_bar)))
        ef = random_effect_pair(t.dim, rng)
        back = _apply_twice(t, ef)
        worst = max(worst, np.max(np.abs(back.e - ef.e)), np.max(np.abs(back.e_bar - ef.e_bar)))
    return InvolutionReport(t.kind, t.transpose, ratio is not None, worst <= tol, float(worst),
                            None if ratio is None else complex(ratio), statistics, t.is_unitary)


# ---------------------------------------------------------------------------
# time reversal of transformations and circuits
# ---------------------------------------------------------------------------

def _reverse_kraus(k: np.ndarray, s_in: np.ndarray, s_out: np.ndarray, transpose: bool,
                   basis_in=None, basis_out=None) -> np.ndarray:
    if transpose:
        k = basis_conjugate(k, basis_out, basis_in)
    return (s_out @ k @ np.linalg.inv(s_in)).conj().T


def reverse_maps(maps: Sequence[CPMap], s_in, s_out, transpose: bool, basis_in=None, basis_out=None):
    """Kraus-level images ``(S_B K^(*) S_A^{-1})^dagger`` before the common ``1/lambda``."""
    s_in = np.asarray(s_in, dtype=complex)
    s_out = np.asarray(s_out, dtype=complex)
    out = []
    for m in maps:
        if (m.dim_in, m.dim_out) != (s_in.shape[0], s_out.shape[0]):
            raise StructuralError("S matrices do not match the map dimensions")
        ks = [_reverse_kraus(k, s_in, s_out, transpose, basis_in, basis_out) for k in m.kraus]
        out.append(CPMap(ks, m.dim_out, m.dim_in))
    return out


@dataclass(frozen=True, eq=False)
class ReversedTransformation:
    pair: TransformationPair
    lam: float


def reverse_transformation(tp: TransformationPair, s_in, s_out, transpose: bool = True,
                           basis_in=None, basis_out=None) -> ReversedTransformation:
    """Time-reversed image of ``(M; Mbar)`` from A to B, a pair from B to A.

    ``lambda`` is fixed by ``Tr sum_a Kbar~_a^dagger Kbar~_a = d_B``.
    """
    m, m_bar = reverse_maps([tp.m, tp.m_bar], s_in, s_out, transpose, basis_in, basis_out)
    d_b = tp.m.dim_out
    lam = np.sqrt(np.real(np.trace(m_bar.kraus_gram())) / d_b)
    return ReversedTransformation(TransformationPair(m.scaled(1 / lam**2), m_bar.scaled(1 / lam**2)), float(lam))


def reverse_operation(op: GeneralizedOperation, s_in, s_out, transpose: bool = True,
                      basis_in=None, basis_out=None) -> GeneralizedOperation:
    return make_operation(reverse_maps(op.maps, s_in, s_out, transpose, basis_in, basis_out), op.outcomes)


@dataclass(frozen=True)
class STable:
    """Per-dimension ``S`` matrices (and optional transposition bases).

    Dimensions without an entry use the identity.
    """

    s: Mapping[int, np.ndarray] = field(default_factory=dict)
    basis: Mapping[int, np.ndarray] = field(default_factory=dict)
    transpose: bool = True

    def s_for(self, dims: Sequence[int]) -> np.ndarray:
        out = np.eye(1, dtype=complex)
        for d in dims:
            out = np.kron(out, np.asarray(self.s.get(d, np.eye(d)), dtype=complex))
        return out

    def basis_for(self, dims: Sequence[int]) -> np.ndarray | None:
        if not any(d in self.basis for d in dims):
            return None
        out = np.eye(1, dtype=complex)
        for d in dims:
            out = np.kron(out, np.asarray(self.basis.get(d, np.eye(d)), dtype=complex))
        return out

    def transform(self, d: int) -> SymmetryTransform:
        return SymmetryTransform(TYPE_II, self.transpose, self.s.get(d, np.eye(d)), self.basis.get(d))


def reverse_circuit(c: Circuit, table: STable | None = None) -> Circuit:
    """Reverse every wire, mapping each operation by the Type II image.

    Preparations become measurements and vice versa; node names and outcome
    labels are kept, so distributions compare axis by axis.
    """
    table = table or STable()
    dims = {w.name: w.dim for w in c.wires}
    nodes = []
    for n in c.nodes:
        d_in = [dims[w] for w in n.inputs]
        d_out = [dims[w] for w in n.outputs]
        op = reverse_operation(n.operation, table.s_for(d_in), table.s_for(d_out), table.transpose,
                               table.basis_for(d_in), table.basis_for(d_out))
        role = {"prep": "meas", "meas": "prep"}.get(n.role, n.role)
        nodes.append(Node(n.name, op, n.outputs, n.inputs, role))
    return Circuit(tuple(nodes), c.wires, dict(c.systems))


def unitary_image(u: np.ndarray, s: np.ndarray, transpose: bool = True, basis=None) -> np.ndarray:
    """Reversed image of the unitary channel ``U`` (no renormalization needed)."""
    s = np.asarray(s, dtype=complex)
    return _reverse_kraus(np.asarray(u, dtype=complex), s, s, transpose, basis, basis)


def spectra_match(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """Eigenvalue multisets of ``a`` and ``b`` agree to ``tol``."""
    from scipy.optimize import linear_sum_assignment

    ea, eb = np.linalg.eigvals(a), np.linalg.eigvals(b)
    cost = np.abs(ea[:, None] - eb[None, :])
    rows, cols = linear_sum_assignment(cost)
    return bool(np.max(cost[rows, cols]) <= tol)
