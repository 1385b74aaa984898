"""Classical theory as the diagonal restriction, and the random-bit example."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DomainError, StructuralError
from .operations import (
    GeneralizedOperation, UpdateKernel, compose_parallel, compose_sequential, is_standard,
    joint_distribution, measurement, preparation, update,
)


def _is_diagonal_map(m) -> bool:
    # diagonal Choi <=> every Kraus operator is a (scaled) matrix unit combination
    # acting diagonally; test on the Choi matrix directly
    c = m.choi()
    return bool(np.max(np.abs(c - np.diag(np.diag(c))), initial=0.0) <= 1e-12)


class ClassicalOperation:
    """A generalized operation whose CP maps all have diagonal Choi matrices."""

    __slots__ = ("op",)

    def __init__(self, op: GeneralizedOperation):
        if not all(_is_diagonal_map(m) for m in op.maps):
            raise StructuralError("operation is not diagonal in the computational basis")
        self.op = op

    def __repr__(self):
        return f"ClassicalOperation({self.op!r})"

    def then(self, second: ClassicalOperation):
        out = compose_sequential(self.op, second.op)
        return out if out.is_null else ClassicalOperation(out)

    def parallel(self, other: ClassicalOperation) -> ClassicalOperation:
        return ClassicalOperation(compose_parallel(self.op, other.op))

    def updated(self, kernel: UpdateKernel):
        out = update(self.op, kernel)
        return out if out.is_null else ClassicalOperation(out)


def _ket(i: int) -> np.ndarray:
    return np.diag([1.0 if k == i else 0.0 for k in range(2)]).astype(complex)


def bit_preparation(p: float) -> ClassicalOperation:
    """``{p|0><0|, (1-p)|1><1|}``."""
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return ClassicalOperation(preparation([p * _ket(0), (1 - p) * _ket(1)], normalize=False))


def distinguishing_measurement(q: float) -> ClassicalOperation:
    """``{q|0><0|, (2-q)|1><1|}`` for ``q`` in the open interval (0, 2)."""
    if not 0 < q < 2:
        raise DomainError(f"q must lie in (0, 2), got {q}")
    return ClassicalOperation(measurement([q * _ket(0), (2 - q) * _ket(1)], normalize=False))


def three_outcome_measurement(q: float) -> ClassicalOperation:
    """Standard measurement whose outcomes 0, 1 post-select the distinguishing one."""
    if not 0 < q < 2:
        raise DomainError(f"q must lie in (0, 2), got {q}")
    e0 = q / 2 * _ket(0)
    e1 = (2 - q) / 2 * _ket(1)
    e2 = (2 - q) / 2 * _ket(0) + q / 2 * _ket(1)
    return ClassicalOperation(measurement([e0, e1, e2], normalize=False))


def bit_joint(p: float, q: float) -> np.ndarray:
    return joint_distribution(bit_preparation(p).op, distinguishing_measurement(q).op).table


def bit_distribution(p: float, q: float) -> tuple[float, float]:
    """Probabilities of reading the bit value 0 and 1."""
    table = bit_joint(p, q)
    return float(table[0, 0]), float(table[1, 1])


@dataclass(frozen=True)
class BayesReport:
    p: float
    q: float
    joint_three: np.ndarray
    expected_three: np.ndarray
    updated_effects: list
    expected_effects: list
    updated_joint: np.ndarray
    expected_joint: np.ndarray
    bayes_joint: np.ndarray
    prep_marginal_before: np.ndarray
    prep_marginal_after: np.ndarray
    state_before: np.ndarray
    state_after: np.ndarray
    tol: float

    def _close(self, a, b) -> bool:
        return bool(np.max(np.abs(np.asarray(a) - np.asarray(b))) <= self.tol)

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "three-outcome table": self._close(self.joint_three, self.expected_three),
            "updated measurement": all(self._close(a, b) for a, b in zip(self.updated_effects, self.expected_effects)),
            "updated table": self._close(self.updated_joint, self.expected_joint),
            "bayes agreement": self._close(self.updated_joint, self.bayes_joint),
            "state not updated": self._close(self.state_before, self.state_after),
        }

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def bayes_update_scenario(p: float, q: float, tol: float = 1e-12) -> BayesReport:
    """Post-select a standard three-outcome readout on ``k != 2``."""
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    prep = bit_preparation(p)
    meas3 = three_outcome_measurement(q)
    joint3 = joint_distribution(prep.op, meas3.op).table
    expected3 = np.array([[p * q / 2, 0.0, p * (2 - q) / 2],
                          [0.0, (1 - p) * (2 - q) / 2, (1 - p) * q / 2]])
    kernel = UpdateKernel.select(meas3.op.outcomes, [0, 1])
    updated = meas3.updated(kernel)
    upd_effects = updated.op.effect_operators()
    target = distinguishing_measurement(q).op.effect_operators()
    upd_joint = joint_distribution(prep.op, updated.op).table
    den = p * q + (1 - p) * (2 - q)
    expected_joint = np.array([[p * q / den, 0.0], [0.0, (1 - p) * (2 - q) / den]])
    kept = joint3[:, :2]
    bayes = kept / kept.sum()
    rho_bar_before = sum(prep.op.state_operators())
    # the preparation box is untouched by information gained at the measurement
    rho_bar_after = sum(prep.op.state_operators())
    return BayesReport(p, q, joint3, expected3, upd_effects, target, upd_joint, expected_joint, bayes,
                       joint3.sum(axis=1), upd_joint.sum(axis=1), rho_bar_before, rho_bar_after, tol)


def is_classical_standard(op: ClassicalOperation) -> bool:
    return is_standard(op.op)
