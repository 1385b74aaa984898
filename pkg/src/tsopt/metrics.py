"""Operational distance between states (or effects) and distinguishability checks.

``D(s1, s2) = sup_e |p(s1, e) - p(s2, e)|`` over effect pairs (and the mirror
over state pairs for effects). The supremum is exact only in the support
cases handled analytically; elsewhere a seeded projected ascent gives a
lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import EPS_PSD, StructuralError, hermitian_part, kernel_projector, support_projector
from .operations import EffectPair, GeneralizedOperation, StatePair, measurement, probability


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 64
    iterations: int = 500
    step: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class DistanceReport:
    """``lower_bound = |p(a, witness) - p(b, witness)|``; ``exact`` when it is the supremum."""

    lower_bound: float
    witness: StatePair | EffectPair | None
    exact: bool
    method: str

    def to_dict(self) -> dict:
        return {"lower_bound": self.lower_bound, "exact": self.exact, "method": self.method}


def _pair(obj):
    return (obj.rho, obj.rho_bar) if isinstance(obj, StatePair) else (obj.e, obj.e_bar)


def _same(a, b, tol=1e-12) -> bool:
    x, xb = _pair(a)
    y, yb = _pair(b)
    return bool(max(np.max(np.abs(x - y)), np.max(np.abs(xb - yb))) <= tol)


def _prob(a, b) -> float:
    """Generalized probability for any (state, effect) pairing order."""
    return probability(a, b) if isinstance(a, StatePair) else probability(b, a)


def _support_witness(a, b, make, norm: float, tol: float = EPS_PSD):
    """Witness ``(X; X)`` with zero weight against ``a`` and certainty against ``b``."""
    x1, _ = _pair(a)
    x2, x2_bar = _pair(b)
    # intersection of the two kernels: eigenvalue-1 subspace of P1 P2 P1
    p1 = kernel_projector(x1, tol)
    inter = _eigen_one(hermitian_part(p1 @ kernel_projector(x2_bar - x2, tol) @ p1))
    rank = int(round(np.trace(inter).real))
    if rank == 0 or np.trace(x2 @ inter).real <= tol:
        return None
    wit = make(norm * inter / rank)
    return wit if abs(_prob(a, wit) - _prob(b, wit)) > 1 - 1e-9 else None


def _eigen_one(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    cols = v[:, w > 1 - tol]
    return cols @ cols.conj().T


def _exact_case(a, b, make, norm):
    for x, y in ((a, b), (b, a)):
        wit = _support_witness(x, y, make, norm)
        if wit is not None:
            return wit
    return None


# ---------------------------------------------------------------------------
# projected ascent over witness pairs (W; W_bar), 0 <= W <= W_bar, Tr W_bar = norm
# ---------------------------------------------------------------------------

def _project(w, w_bar, norm, floor):
    lam, v = np.linalg.eigh(hermitian_part(w_bar))
    lam = np.maximum(lam, floor)
    lam *= norm / lam.sum()
    w_bar = (v * lam) @ v.conj().T
    root = (v * np.sqrt(lam)) @ v.conj().T
    inv_root = (v / np.sqrt(lam)) @ v.conj().T
    mu, u = np.linalg.eigh(hermitian_part(inv_root @ w @ inv_root))
    inner = (u * np.clip(mu, 0.0, 1.0)) @ u.conj().T
    return hermitian_part(root @ inner @ root), hermitian_part(w_bar)


def _objective(w, w_bar, targets, sign):
    (x1, x1b), (x2, x2b) = targets
    a1 = np.trace(x1b @ w_bar).real
    a2 = np.trace(x2b @ w_bar).real
    t1 = np.trace(x1 @ w).real
    t2 = np.trace(x2 @ w).real
    f = sign * (t1 / a1 - t2 / a2)
    g_w = sign * (x1 / a1 - x2 / a2)
    g_bar = sign * (-t1 / a1 ** 2 * x1b + t2 / a2 ** 2 * x2b)
    return f, g_w, g_bar


def _ascend(w, w_bar, targets, sign, cfg: SearchConfig, norm, floor):
    w, w_bar = _project(w, w_bar, norm, floor)
    f, g_w, g_bar = _objective(w, w_bar, targets, sign)
    step = cfg.step
    for _ in range(cfg.iterations):
        nw, nb = _project(w + step * g_w, w_bar + step * g_bar, norm, floor)
        nf, ng_w, ng_bar = _objective(nw, nb, targets, sign)
        if nf > f:
            w, w_bar, f, g_w, g_bar = nw, nb, nf, ng_w, ng_bar
            step = min(step * 1.5, 10.0)
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return f, w, w_bar


def _random_start(d, rng, norm):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    w_bar = g @ g.conj().T
    w_bar = norm * w_bar / np.trace(w_bar).real
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return hermitian_part(0.5 * w_bar + 0.1 * (h + h.conj().T)), w_bar


def _search(a, b, make, norm, cfg: SearchConfig):
    d = a.dim
    targets = (_pair(a), _pair(b))
    floor = 1e-8 * norm / d
    rng = np.random.default_rng(cfg.seed)
    # start from the sharp projector onto the positive part of the difference
    diff = targets[0][0] / np.trace(targets[0][1]).real - targets[1][0] / np.trace(targets[1][1]).real
    lam, v = np.linalg.eigh(hermitian_part(diff))
    pos = v[:, lam > 0]
    sharp = norm / d * np.eye(d)
    starts = [(norm * (pos @ pos.conj().T) / d if pos.size else sharp * 0.5, sharp)]
    starts += [(_random_start(d, rng, norm)) for _ in range(cfg.restarts - 1)]
    best, best_pair = -1.0, None
    for k, (w, w_bar) in enumerate(starts):
        for sign in ((1.0, -1.0) if k == 0 else ((1.0,) if k % 2 else (-1.0,))):
            f, bw, bb = _ascend(w, w_bar, targets, sign, cfg, norm, floor)
            wit = make_pair(make, bw, bb)
            if wit is None:
                continue
            val = abs(_prob(a, wit) - _prob(b, wit))
            if val > best:
                best, best_pair = val, wit
    return min(best, 1.0), best_pair


def make_pair(make, w, w_bar):
    try:
        return make(w, w_bar)
    except (StructuralError, ValueError):
        return None


def _distance(a, b, make, norm, cfg):
    if a.dim != b.dim:
        raise StructuralError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if _same(a, b):
        return DistanceReport(0.0, None, True, "identical")
    wit = _exact_case(a, b, lambda x: make(x, x), norm)
    if wit is not None:
        return DistanceReport(1.0, wit, True, "support")
    val, wit = _search(a, b, make, norm, cfg)
    return DistanceReport(float(val), wit, False, "search")


def state_distance(s1: StatePair, s2: StatePair, config: SearchConfig | None = None) -> DistanceReport:
    """Distance between two states, supremum taken over effects."""
    return _distance(s1, s2, EffectPair, float(s1.dim), config or SearchConfig())


def effect_distance(e1: EffectPair, e2: EffectPair, config: SearchConfig | None = None) -> DistanceReport:
    """Distance between two effects, supremum taken over states."""
    return _distance(e1, e2, StatePair, 1.0, config or SearchConfig())


def perfectly_distinguishable(s1: StatePair, s2: StatePair, tol: float = EPS_PSD):
    """Orthogonal supports test; returns ``(verdict, standard measurement {P, 1-P})``.

    ``P`` projects onto the support of ``s1``.
    """
    if not (s1.is_deterministic and s2.is_deterministic):
        raise StructuralError("perfect distinguishability is defined for deterministic states")
    if s1.dim != s2.dim:
        raise StructuralError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    p = support_projector(s1.rho_bar, tol)
    verdict = bool(np.trace(p @ s2.rho_bar).real <= tol)
    meas: GeneralizedOperation = measurement([p, np.eye(s1.dim) - p], normalize=False)
    return verdict, meas
