"""Generalized operations, states, effects and their probability rules.

An operation from A to B is an outcome-indexed family of CP maps whose sum
``Mbar`` satisfies ``Tr Mbar(1/d_A) = 1``; ``Mbar`` need not be
trace-preserving. Preparations (A = I) and measurements (B = I) are the
special cases; the same normalization gives ``sum_i Tr rho_i = 1`` and
``sum_j Tr E_j = d``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .linalg import (
    EPS_PROB, EPS_PSD, CPMap, DomainError, StructuralError, as_hermitian, dominates,
    hermitian_part, inv_sqrtm_psd, is_psd, kraus_to_choi, sqrtm_psd,
)

NULL_EPS = 1e-12


class NullOperationError(ValueError):
    """Raised when an operation with zero total weight would have to be normalized."""


class NormalizationError(StructuralError):
    """An operation violates ``Tr Mbar(1/d_A) = 1``."""


@dataclass(frozen=True)
class Null:
    """The null operation: a composition that never occurs."""

    dim_in: int
    dim_out: int

    is_null = True


def _null_cutoff(*dims: int) -> float:
    return NULL_EPS * float(np.prod(dims))


# ---------------------------------------------------------------------------
# states, effects, transformations
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StatePair:
    """State ``(rho; rho_bar)`` with ``0 <= rho <= rho_bar`` and ``Tr rho_bar = 1``."""

    rho: np.ndarray
    rho_bar: np.ndarray

    def __post_init__(self):
        rho = as_hermitian(self.rho)
        rho_bar = as_hermitian(self.rho_bar)
        if rho.shape != rho_bar.shape:
            raise StructuralError("rho and rho_bar must have the same dimension")
        if not is_psd(rho):
            raise DomainError("rho is not positive semidefinite")
        if not dominates(rho_bar, rho):
            raise DomainError("state violates rho <= rho_bar")
        if abs(np.trace(rho_bar).real - 1.0) > EPS_PROB:
            raise DomainError(f"Tr(rho_bar) = {np.trace(rho_bar).real!r}, expected 1")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "rho_bar", rho_bar)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def deterministic(cls, rho_bar) -> StatePair:
        return cls(rho_bar, rho_bar)

    @property
    def is_deterministic(self) -> bool:
        return bool(np.max(np.abs(self.rho - self.rho_bar)) <= EPS_PSD)


@dataclass(frozen=True, eq=False)
class EffectPair:
    """Effect ``(E; E_bar)`` with ``0 <= E <= E_bar`` and ``Tr E_bar = d``."""

    e: np.ndarray
    e_bar: np.ndarray

    def __post_init__(self):
        e = as_hermitian(self.e)
        e_bar = as_hermitian(self.e_bar)
        if e.shape != e_bar.shape:
            raise StructuralError("E and E_bar must have the same dimension")
        if not is_psd(e):
            raise DomainError("E is not positive semidefinite")
        if not dominates(e_bar, e):
            raise DomainError("effect violates E <= E_bar")
        d = e.shape[0]
        if abs(np.trace(e_bar).real - d) > EPS_PROB * d:
            raise DomainError(f"Tr(E_bar) = {np.trace(e_bar).real!r}, expected {d}")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "e_bar", e_bar)

    @property
    def dim(self) -> int:
        return self.e.shape[0]

    @classmethod
    def deterministic(cls, e_bar) -> EffectPair:
        return cls(e_bar, e_bar)


@dataclass(frozen=True, eq=False)
class TransformationPair:
    """Transformation ``(M; Mbar)``: ``Mbar - M`` is CP and ``Tr Mbar(1/d_A) = 1``."""

    m: CPMap
    m_bar: CPMap

    def __post_init__(self):
        if (self.m.dim_in, self.m.dim_out) != (self.m_bar.dim_in, self.m_bar.dim_out):
            raise StructuralError("M and Mbar must have the same dimensions")
        if not is_psd(kraus_to_choi(self.m_bar) - kraus_to_choi(self.m)):
            raise DomainError("transformation violates M <= Mbar")
        if abs(self.m_bar.weight() - 1.0) > EPS_PROB:
            raise DomainError("transformation violates Tr Mbar(1/d_A) = 1")


def probability(state: StatePair, effect: EffectPair) -> float:
    """``Tr(rho E) / Tr(rho_bar E_bar)``, or 0 for a null pairing."""
    if state.dim != effect.dim:
        raise StructuralError(f"state on dimension {state.dim} paired with effect on {effect.dim}")
    den = np.trace(state.rho_bar @ effect.e_bar).real
    if den <= _null_cutoff(state.dim):
        return 0.0
    return float(np.trace(state.rho @ effect.e).real / den)


def conditional_probabilities(rho_bar, effects: Sequence) -> np.ndarray:
    """Outcome probabilities of a measurement applied to a deterministic state."""
    rho_bar = as_hermitian(rho_bar)
    es = [as_hermitian(e) for e in effects]
    e_bar = sum(es)
    den = np.trace(rho_bar @ e_bar).real
    if den <= _null_cutoff(rho_bar.shape[0]):
        return np.zeros(len(es))
    return np.array([np.trace(rho_bar @ e).real for e in es]) / den


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

Label = Hashable


class GeneralizedOperation:
    """Outcome-indexed CP maps obeying ``Tr Mbar(1/d_A) = 1``.

    The constructor validates the normalization; use :func:`make_operation`
    to rescale arbitrary maps onto their equivalence-class representative.
    """

    __slots__ = ("outcomes", "maps", "dim_in", "dim_out", "_m_bar")
    is_null = False

    def __init__(self, maps: Sequence[CPMap], outcomes: Sequence[Label] | None = None,
                 tol: float = EPS_PROB):
        maps = tuple(maps)
        if not maps:
            raise StructuralError("an operation needs at least one outcome")
        dims = {(m.dim_in, m.dim_out) for m in maps}
        if len(dims) != 1:
            raise StructuralError(f"outcome maps have mixed dimensions {sorted(dims)}")
        outcomes = tuple(range(len(maps))) if outcomes is None else tuple(outcomes)
        if len(outcomes) != len(maps):
            raise StructuralError("need exactly one outcome label per map")
        if len(set(outcomes)) != len(outcomes):
            raise StructuralError("outcome labels must be distinct")
        self.maps = maps
        self.outcomes = outcomes
        self.dim_in, self.dim_out = dims.pop()
        self._m_bar = None
        w = self.total_weight()
        if abs(w - 1.0) > tol:
            raise NormalizationError(f"sum_i Tr M_i(1/d_A) = {w!r}, expected 1")

    def __repr__(self):
        return f"GeneralizedOperation({self.dim_in}->{self.dim_out}, outcomes={list(self.outcomes)})"

    def __len__(self):
        return len(self.maps)

    def total_weight(self) -> float:
        return sum(m.weight() for m in self.maps)

    @property
    def m_bar(self) -> CPMap:
        if self._m_bar is None:
            acc = self.maps[0]
            for m in self.maps[1:]:
                acc = acc + m
            self._m_bar = acc
        return self._m_bar

    def __getitem__(self, label: Label) -> CPMap:
        try:
            return self.maps[self.outcomes.index(label)]
        except ValueError:
            raise KeyError(label) from None

    @property
    def is_preparation(self) -> bool:
        return self.dim_in == 1

    @property
    def is_measurement(self) -> bool:
        return self.dim_out == 1

    # operator views of preparations / measurements
    def state_operators(self) -> list[np.ndarray]:
        if not self.is_preparation:
            raise StructuralError("not a preparation (input system is not trivial)")
        return [hermitian_part(m.apply(np.ones((1, 1)))) for m in self.maps]

    def effect_operators(self) -> list[np.ndarray]:
        if not self.is_measurement:
            raise StructuralError("not a measurement (output system is not trivial)")
        return [hermitian_part(m.kraus_gram()) for m in self.maps]

    def states(self) -> list[StatePair]:
        rhos = self.state_operators()
        rho_bar = sum(rhos)
        return [StatePair(r, rho_bar) for r in rhos]

    def effects(self) -> list[EffectPair]:
        es = self.effect_operators()
        e_bar = sum(es)
        return [EffectPair(e, e_bar) for e in es]

    def transformations(self) -> list[TransformationPair]:
        return [TransformationPair(m, self.m_bar) for m in self.maps]


def make_operation(cp_maps: Sequence[CPMap], outcomes: Sequence[Label] | None = None) -> GeneralizedOperation:
    """Rescale ``cp_maps`` uniformly so that ``sum_i Tr M_i(1/d_A) = 1``."""
    cp_maps = list(cp_maps)
    if not cp_maps:
        raise StructuralError("an operation needs at least one outcome")
    w = sum(m.weight() for m in cp_maps)
    if w <= _null_cutoff(cp_maps[0].dim_in, cp_maps[0].dim_out):
        raise NullOperationError("operation has zero total weight")
    return GeneralizedOperation([m.scaled(1.0 / w) for m in cp_maps], outcomes)


def _psd_kraus_columns(rho: np.ndarray) -> list[np.ndarray]:
    w, v = np.linalg.eigh(hermitian_part(rho))
    return [np.sqrt(lam) * v[:, [i]] for i, lam in enumerate(w) if lam > 1e-15]


def preparation(operators: Sequence, outcomes: Sequence[Label] | None = None,
                normalize: bool = True) -> GeneralizedOperation:
    """Preparation ``{rho_i}`` from PSD operators."""
    maps = []
    for rho in operators:
        rho = as_hermitian(rho)
        if not is_psd(rho):
            raise DomainError("preparation operators must be PSD")
        maps.append(CPMap(_psd_kraus_columns(rho), 1, rho.shape[0]))
    if normalize:
        return make_operation(maps, outcomes)
    return GeneralizedOperation(maps, outcomes)


def measurement(operators: Sequence, outcomes: Sequence[Label] | None = None,
                normalize: bool = True) -> GeneralizedOperation:
    """Measurement ``{E_j}`` from PSD operators (normalized to ``sum Tr E_j = d``)."""
    maps = []
    for e in operators:
        e = as_hermitian(e)
        if not is_psd(e):
            raise DomainError("measurement operators must be PSD")
        maps.append(CPMap([c.conj().T for c in _psd_kraus_columns(e)], e.shape[0], 1))
    if normalize:
        return make_operation(maps, outcomes)
    return GeneralizedOperation(maps, outcomes)


def channel(kraus: Sequence, label: Label = 0) -> GeneralizedOperation:
    """Single-outcome operation from one Kraus list."""
    return make_operation([CPMap(kraus)], [label])


def instrument(kraus_groups: Sequence[Sequence], outcomes: Sequence[Label] | None = None) -> GeneralizedOperation:
    return make_operation([CPMap(ks) for ks in kraus_groups], outcomes)


def identity_operation(d: int) -> GeneralizedOperation:
    return GeneralizedOperation([CPMap.identity(d)], [()])


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Distribution:
    """Joint outcome distribution over named operations.

    ``table`` has one axis per entry of ``nodes``; a null distribution is
    all zeros with ``null=True``.
    """

    nodes: tuple[str, ...]
    outcomes: tuple[tuple[Label, ...], ...]
    table: np.ndarray
    null: bool = False
    tolerances: dict = field(default_factory=lambda: {"null_eps": NULL_EPS})

    def marginal(self, node: str) -> np.ndarray:
        axis = self.nodes.index(node)
        other = tuple(i for i in range(len(self.nodes)) if i != axis)
        return self.table.sum(axis=other)

    def items(self):
        for idx in itertools.product(*[range(len(o)) for o in self.outcomes]):
            labels = tuple(self.outcomes[k][i] for k, i in enumerate(idx))
            yield labels, float(self.table[idx])

    def reorder(self, nodes: Sequence[str]) -> Distribution:
        perm = [self.nodes.index(n) for n in nodes]
        return Distribution(tuple(nodes), tuple(self.outcomes[p] for p in perm),
                            np.transpose(self.table, perm), self.null, self.tolerances)

    def max_deviation(self, other: Distribution) -> float:
        other = other.reorder(self.nodes)
        if self.table.shape != other.table.shape:
            raise StructuralError("distributions have different shapes")
        return float(np.max(np.abs(self.table - other.table), initial=0.0))


def joint_distribution(prep: GeneralizedOperation, meas: GeneralizedOperation) -> Distribution:
    """``p(i,j) = Tr(rho_i E_j) / Tr(rho_bar E_bar)``; all-zero and flagged null if incompatible."""
    if not prep.is_preparation or not meas.is_measurement:
        raise StructuralError("joint_distribution needs a preparation and a measurement")
    if prep.dim_out != meas.dim_in:
        raise StructuralError(f"preparation on dimension {prep.dim_out}, measurement on {meas.dim_in}")
    rhos = prep.state_operators()
    es = meas.effect_operators()
    raw = np.array([[np.trace(r @ e).real for e in es] for r in rhos])
    den = np.trace(sum(rhos) @ sum(es)).real
    outcomes = (prep.outcomes, meas.outcomes)
    if den <= _null_cutoff(prep.dim_out):
        return Distribution(("prep", "meas"), outcomes, np.zeros_like(raw), null=True)
    return Distribution(("prep", "meas"), outcomes, raw / den)


# ---------------------------------------------------------------------------
# composition and update
# ---------------------------------------------------------------------------

def compose_sequential(first, second):
    """``second o first`` with outcomes ``(i, j)`` (first-major), or :class:`Null`."""
    if first.is_null or second.is_null:
        return Null(first.dim_in, second.dim_out)
    if first.dim_out != second.dim_in:
        raise StructuralError(f"output dimension {first.dim_out} does not match input dimension {second.dim_in}")
    den = second.m_bar.compose(first.m_bar).weight()
    if den <= _null_cutoff(first.dim_in, second.dim_out):
        return Null(first.dim_in, second.dim_out)
    maps, labels = [], []
    for i, mi in zip(first.outcomes, first.maps):
        for j, nj in zip(second.outcomes, second.maps):
            maps.append(nj.compose(mi).scaled(1.0 / den))
            labels.append((i, j))
    return GeneralizedOperation(maps, labels)


def compose_parallel(a: GeneralizedOperation, b: GeneralizedOperation) -> GeneralizedOperation:
    maps, labels = [], []
    for i, mi in zip(a.outcomes, a.maps):
        for j, nj in zip(b.outcomes, b.maps):
            maps.append(mi.tensor(nj))
            labels.append((i, j))
    return GeneralizedOperation(maps, labels)


@dataclass(frozen=True, eq=False)
class UpdateKernel:
    """Learning/discarding kernel ``T(j, i)``: rows new outcomes, columns old ones."""

    t: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 2:
            raise StructuralError("update kernel must be a matrix")
        if np.any(t < 0):
            raise StructuralError("update kernel entries must be nonnegative")
        if np.any(t.sum(axis=0) > 1 + 1e-12):
            raise StructuralError("update kernel columns must sum to at most 1")
        if self.labels is not None and len(self.labels) != t.shape[0]:
            raise StructuralError("need one label per kernel row")
        object.__setattr__(self, "t", t)

    @classmethod
    def coarse_grain(cls, n: int, label: Label = "e") -> UpdateKernel:
        return cls(np.ones((1, n)), (label,))

    @classmethod
    def select(cls, outcomes: Sequence[Label], subset: Sequence[Label], p: float = 1.0) -> UpdateKernel:
        """Learn that the outcome lies in ``subset``."""
        if not 0 < p <= 1:
            raise StructuralError("selection weight must lie in (0, 1]")
        outcomes = list(outcomes)
        t = np.zeros((len(subset), len(outcomes)))
        for row, lab in enumerate(subset):
            t[row, outcomes.index(lab)] = p
        return cls(t, tuple(subset))

    def then(self, later: UpdateKernel) -> UpdateKernel:
        """Kernel of applying ``self`` and then ``later``."""
        return UpdateKernel(later.t @ self.t, later.labels)


def update(op: GeneralizedOperation, kernel: UpdateKernel):
    """``M'_j = sum_i T(j,i) M_i``, renormalized; :class:`Null` if nothing survives."""
    if op.is_null:
        return op
    t = kernel.t
    if t.shape[1] != len(op):
        raise StructuralError(f"kernel has {t.shape[1]} columns for an operation with {len(op)} outcomes")
    new = []
    for row in t:
        acc = CPMap.zero(op.dim_in, op.dim_out)
        for coeff, m in zip(row, op.maps):
            if coeff > 0:
                acc = acc + m.scaled(coeff)
        new.append(acc)
    total = sum(m.weight() for m in new)
    if total <= _null_cutoff(op.dim_in, op.dim_out):
        return Null(op.dim_in, op.dim_out)
    labels = kernel.labels if kernel.labels is not None else tuple(range(t.shape[0]))
    return GeneralizedOperation([m.scaled(1.0 / total) for m in new], labels)


# ---------------------------------------------------------------------------
# classification and re-expression
# ---------------------------------------------------------------------------

def is_standard(op, tol: float = EPS_PROB) -> bool:
    """True iff the coarse-grained map is trace-preserving."""
    if op.is_null:
        return False
    return op.m_bar.is_trace_preserving(tol)


def retrodictive_map(op: GeneralizedOperation) -> GeneralizedOperation:
    """Read an operation backwards: ``M -> (d_out/d_in) M^dagger``.

    A preparation ``{rho_i}`` becomes the measurement ``{d rho_i}`` and a
    measurement ``{E_j}`` the preparation ``{E_j / d}``; the map is its own
    inverse.
    """
    factor = op.dim_out / op.dim_in
    return GeneralizedOperation([m.adjoint().scaled(factor) for m in op.maps], op.outcomes)


def standardize(prep: GeneralizedOperation, meas: GeneralizedOperation):
    """Re-express a pair with invertible ``E_bar`` in standard form.

    ``E_j -> E_bar^{-1/2} E_j E_bar^{-1/2}`` and
    ``rho_i -> E_bar^{1/2} rho_i E_bar^{1/2} / Tr(E_bar rho_bar)``.
    """
    es = meas.effect_operators()
    rhos = prep.state_operators()
    e_bar = sum(es)
    try:
        w = inv_sqrtm_psd(e_bar)
    except DomainError:
        raise DomainError("E_bar is singular; no standard form exists") from None
    s = sqrtm_psd(e_bar)
    den = np.trace(e_bar @ sum(rhos)).real
    if den <= _null_cutoff(prep.dim_out):
        raise DomainError("preparation and measurement are incompatible (null pairing)")
    new_prep = preparation([s @ r @ s / den for r in rhos], prep.outcomes, normalize=False)
    new_meas = measurement([w @ e @ w for e in es], meas.outcomes, normalize=False)
    return new_prep, new_meas


def convexity_gap(s1: StatePair, s2: StatePair, q: float, effect: EffectPair) -> float:
    """``|p(mix, e) - q p(s1, e) - (1-q) p(s2, e)|`` for the deterministic mixture."""
    mix = q * s1.rho_bar + (1 - q) * s2.rho_bar
    lhs = probability(StatePair.deterministic(mix), effect)
    rhs = q * probability(s1, effect) + (1 - q) * probability(s2, effect)
    return abs(lhs - rhs)


def random_bounded_effect(d: int, rng: np.random.Generator, max_condition: float = 10.0) -> EffectPair:
    """Random effect: ``E_bar`` with bounded condition number, ``0 <= E <= E_bar``."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    _, u = np.linalg.eigh(g + g.conj().T)
    eigs = rng.uniform(1.0, max_condition, size=d)
    eigs[rng.integers(d)] = 1.0
    eigs[rng.integers(d)] = max_condition if d > 1 else 1.0
    e_bar = (u * eigs) @ u.conj().T
    e_bar = d * e_bar / np.trace(e_bar).real
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    w, v = np.linalg.eigh(h + h.conj().T)
    p = (v * (1 / (1 + np.exp(-w)))) @ v.conj().T
    root = sqrtm_psd(e_bar)
    e = hermitian_part(root @ p @ root)
    return EffectPair(e, hermitian_part(e_bar))


def convexity_witness(s1: StatePair, s2: StatePair, q: float, seed: int = 0, samples: int = 200):
    """Search for an effect on which the deterministic mixture is not convex.

    Returns ``(effect, gap)``; ``(None, 0.0)`` for identical states.
    """
    if not 0 < q < 1:
        raise DomainError("mixing weight must lie in (0, 1)")
    if not (s1.is_deterministic and s2.is_deterministic):
        raise DomainError("convexity witness needs deterministic states")
    if np.max(np.abs(s1.rho_bar - s2.rho_bar)) <= EPS_PSD:
        return None, 0.0
    rng = np.random.default_rng(seed)
    best, best_gap = None, -1.0
    for _ in range(samples):
        eff = random_bounded_effect(s1.dim, rng)
        gap = convexity_gap(s1, s2, q, eff)
        if gap > best_gap:
            best, best_gap = eff, gap
    return best, best_gap
