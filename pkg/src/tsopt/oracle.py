"""Brute-force reference computations.

Nothing here goes through the sequential/parallel composition or foliation
code. Circuit probabilities come from contracting the whole closed network
once per outcome tuple, using doubled Kraus tensors ``K (x) K*``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .linalg import CPMap, map_matrix_units

MAX_TUPLES = 10 ** 6
NULL_EPS = 1e-12


class OracleRefusal(RuntimeError):
    """The enumeration would exceed the outcome-tuple budget."""

    def __init__(self, count: int, limit: int = MAX_TUPLES):
        super().__init__(f"{count} outcome tuples exceed the oracle limit of {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True, eq=False)
class OracleResult:
    values: object
    method: str
    nodes: tuple = ()
    outcomes: tuple = ()
    null: bool = False
    extra: dict = field(default_factory=dict)


def _doubled(m: CPMap, out_dims, in_dims) -> np.ndarray:
    """``T[b.., a.., b'.., a'..] = sum_k K[b,a] conj(K[b',a'])``."""
    shape = tuple(out_dims) + tuple(in_dims)
    t = np.zeros(shape + shape, dtype=complex)
    for k in m.kraus:
        kk = k.reshape(shape) if shape else k.reshape(())
        t += np.multiply.outer(kk, kk.conj())
    return t


def _network(c):
    """Per-node index sublists for ``np.einsum`` integer notation."""
    dims = {w.name: w.dim for w in c.wires}
    index = {}
    for k, w in enumerate(c.wires):
        index[w.name] = (2 * k, 2 * k + 1)
    if 2 * len(c.wires) > 52:
        raise OracleRefusal(2 * len(c.wires), 52)
    subs = []
    for n in c.nodes:
        ket = [index[w][0] for w in n.outputs] + [index[w][0] for w in n.inputs]
        bra = [index[w][1] for w in n.outputs] + [index[w][1] for w in n.inputs]
        subs.append(ket + bra)
    return dims, subs


def _contract(tensors, subs) -> complex:
    args = []
    for t, s in zip(tensors, subs):
        args += [t, s]
    return complex(np.einsum(*args, [], optimize=True))


def enumerate_circuit(c, max_tuples: int = MAX_TUPLES) -> OracleResult:
    """Every outcome tuple's numerator, divided by the coarse-grained denominator."""
    shape = tuple(len(n.operation.maps) for n in c.nodes)
    count = int(np.prod(shape)) if shape else 1
    if count > max_tuples:
        raise OracleRefusal(count, max_tuples)
    dims, subs = _network(c)
    per_node = []
    totals = []
    for n in c.nodes:
        outs = [dims[w] for w in n.outputs]
        ins = [dims[w] for w in n.inputs]
        per_node.append([_doubled(m, outs, ins) for m in n.operation.maps])
        bar = CPMap([k for m in n.operation.maps for k in m.kraus],
                    n.operation.maps[0].dim_in, n.operation.maps[0].dim_out)
        totals.append(_doubled(bar, outs, ins))
    den = _contract(totals, subs).real
    nodes = tuple(n.name for n in c.nodes)
    outcomes = tuple(tuple(n.operation.outcomes) for n in c.nodes)
    if den <= NULL_EPS:
        return OracleResult(np.zeros(shape), "enumeration", nodes, outcomes, True, {"denominator": den})
    table = np.zeros(shape)
    for idx in itertools.product(*(range(s) for s in shape)):
        table[idx] = _contract([per_node[k][i] for k, i in enumerate(idx)], subs).real / den
    return OracleResult(table, "enumeration", nodes, outcomes, False,
                        {"denominator": den, "numerator_sum": float(table.sum() * den)})


def classical_formulas(p: float, q: float) -> OracleResult:
    """Closed-form joint table, bit distribution and three-outcome table of the bit example."""
    den = p * q + (1 - p) * (2 - q)
    joint = np.array([[p * q / den, 0.0], [0.0, (1 - p) * (2 - q) / den]])
    bits = np.array([p * q / den, (1 - p) * (2 - q) / den])
    three = np.array([[p * q / 2, 0.0, p * (2 - q) / 2],
                      [0.0, (1 - p) * (2 - q) / 2, (1 - p) * q / 2]])
    return OracleResult({"joint": joint, "bits": bits, "three": three}, "direct-formula")


def map_action_equal(m1: CPMap, m2: CPMap, tol: float = 1e-9) -> bool:
    """Compare the maps on every matrix unit ``|i><j|``."""
    if (m1.dim_in, m1.dim_out) != (m2.dim_in, m2.dim_out):
        return False
    return bool(np.max(np.abs(map_matrix_units(m1) - map_matrix_units(m2)), initial=0.0) <= tol)


def max_deviation(result: OracleResult, table: np.ndarray) -> float:
    a = np.asarray(result.values)
    b = np.asarray(table)
    if a.shape != b.shape:
        return float("inf")
    return float(np.max(np.abs(a - b), initial=0.0))
