"""Circuits of generalized operations, foliation and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import CPMap, StructuralError, as_hermitian, is_psd, partial_trace, permutation_unitary
from .operations import (
    Distribution, GeneralizedOperation, Null, compose_parallel, compose_sequential,
    identity_operation, make_operation,
)


class CircuitError(StructuralError):
    """Invalid wiring; ``code`` names the defect (``cycle``, ``open-wire``, ...)."""

    def __init__(self, message: str, code: str, where: str | None = None):
        super().__init__(message)
        self.code = code
        self.where = where


@dataclass(frozen=True)
class Node:
    """An operation box; ``inputs``/``outputs`` are wire names in tensor order."""

    name: str
    operation: GeneralizedOperation
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    role: str | None = None


@dataclass(frozen=True)
class Wire:
    name: str
    system: str
    dim: int


@dataclass(frozen=True)
class Circuit:
    """Acyclic wiring of operations. Every wire has one producer and one consumer."""

    nodes: tuple[Node, ...]
    wires: tuple[Wire, ...]
    systems: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "wires", tuple(self.wires))
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise CircuitError("node names must be unique", "duplicate")
        wire_names = [w.name for w in self.wires]
        if len(set(wire_names)) != len(wire_names):
            raise CircuitError("wire names must be unique", "duplicate")

    def wire(self, name: str) -> Wire:
        for w in self.wires:
            if w.name == name:
                return w
        raise CircuitError(f"unknown wire {name!r}", "unknown-ref", name)

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def producers(self) -> dict[str, str]:
        return {w: n.name for n in self.nodes for w in n.outputs}

    def consumers(self) -> dict[str, str]:
        return {w: n.name for n in self.nodes for w in n.inputs}

    def validate(self) -> None:
        """Check dimensions, single producer/consumer per wire, closure and acyclicity."""
        dims = {w.name: w.dim for w in self.wires}
        produced: dict[str, str] = {}
        consumed: dict[str, str] = {}
        for n in self.nodes:
            for w in n.inputs + n.outputs:
                if w not in dims:
                    raise CircuitError(f"node {n.name!r} references unknown wire {w!r}", "unknown-ref", n.name)
            for w in n.outputs:
                if w in produced:
                    raise CircuitError(f"wire {w!r} has two producers", "multi-use", w)
                produced[w] = n.name
            for w in n.inputs:
                if w in consumed:
                    raise CircuitError(f"wire {w!r} has two consumers", "multi-use", w)
                consumed[w] = n.name
            d_in = int(np.prod([dims[w] for w in n.inputs])) if n.inputs else 1
            d_out = int(np.prod([dims[w] for w in n.outputs])) if n.outputs else 1
            if (n.operation.dim_in, n.operation.dim_out) != (d_in, d_out):
                raise CircuitError(
                    f"node {n.name!r} acts {n.operation.dim_in}->{n.operation.dim_out} "
                    f"but its wires carry {d_in}->{d_out}", "dimension", n.name)
        for w in dims:
            if w not in produced or w not in consumed:
                raise CircuitError(f"wire {w!r} is open", "open-wire", w)
        self.layers()

    def layers(self) -> list[list[Node]]:
        """Longest-path layering; nodes keep declaration order inside a layer."""
        prod = self.producers()
        layer: dict[str, int] = {}
        visiting: set[str] = set()
        by_name = {n.name: n for n in self.nodes}

        def depth(name: str) -> int:
            if name in layer:
                return layer[name]
            if name in visiting:
                raise CircuitError(f"cycle through node {name!r}", "cycle", name)
            visiting.add(name)
            preds = [prod[w] for w in by_name[name].inputs if w in prod]
            layer[name] = 1 + max((depth(p) for p in preds), default=-1)
            visiting.discard(name)
            return layer[name]

        for n in self.nodes:
            depth(n.name)
        out: list[list[Node]] = [[] for _ in range(max(layer.values(), default=-1) + 1)]
        for n in self.nodes:
            out[layer[n.name]].append(n)
        return out


@dataclass(frozen=True)
class Foliation:
    """A circuit rewritten as preparation, global steps, measurement.

    ``node_order`` lists the circuit nodes in the order their outcomes appear
    in the chained composition.
    """

    preparation: GeneralizedOperation
    steps: tuple[GeneralizedOperation, ...]
    measurement: GeneralizedOperation
    node_order: tuple[str, ...]
    outcome_sets: tuple[tuple, ...]
    layer_wires: tuple[tuple[str, ...], ...]


def _layer_operation(nodes: Sequence[Node], idle: Sequence[str], dims: dict[str, int]):
    op = None
    for n in nodes:
        op = n.operation if op is None else compose_parallel(op, n.operation)
    if idle:
        ident = identity_operation(int(np.prod([dims[w] for w in idle])))
        op = ident if op is None else compose_parallel(op, ident)
    ins = [w for n in nodes for w in n.inputs] + list(idle)
    outs = [w for n in nodes for w in n.outputs] + list(idle)
    return op, ins, outs


def _reorder(src: Sequence[str], dst: Sequence[str], dims: dict[str, int]) -> GeneralizedOperation:
    order = [list(src).index(w) for w in dst]
    u = permutation_unitary([dims[w] for w in src], order)
    return GeneralizedOperation([CPMap([u])], [()])


def foliate(c: Circuit) -> Foliation:
    c.validate()
    dims = {w.name: w.dim for w in c.wires}
    cons = c.consumers()
    layers = c.layers()
    node_layer = {n.name: k for k, layer in enumerate(layers) for n in layer}

    ops: list[GeneralizedOperation] = []
    live: list[str] = []
    layer_wires = []
    for k, layer in enumerate(layers):
        consumed_here = {w for n in layer for w in n.inputs}
        idle = [w for w in live if w not in consumed_here]
        for w in idle:
            if node_layer[cons[w]] <= k:
                raise CircuitError(f"wire {w!r} is consumed out of order", "cycle", w)
        op, ins, outs = _layer_operation(layer, idle, dims)
        if k > 0 and list(ins) != live:
            op = compose_sequential(_reorder(live, ins, dims), op)
        ops.append(op)
        live = outs
        layer_wires.append(tuple(outs))
    if live:
        raise CircuitError(f"wires {live} are still open after the last layer", "open-wire")

    if len(ops) == 1:
        # only trivial-system boxes; the chain is prep I->I then the trivial measurement
        ops.append(identity_operation(1))
    node_order = tuple(n.name for layer in layers for n in layer)
    outcome_sets = tuple(c.node(name).operation.outcomes for name in node_order)
    return Foliation(ops[0], tuple(ops[1:-1]), ops[-1], node_order, outcome_sets, tuple(layer_wires))


def evaluate_chain(f: Foliation) -> Distribution:
    acc = f.preparation
    for step in f.steps + (f.measurement,):
        acc = compose_sequential(acc, step)
        if acc.is_null:
            break
    shape = tuple(len(o) for o in f.outcome_sets)
    if acc.is_null:
        return Distribution(f.node_order, f.outcome_sets, np.zeros(shape), null=True)
    probs = np.array([np.sum(np.abs(np.array(m.kraus)) ** 2) if m.kraus else 0.0 for m in acc.maps])
    return Distribution(f.node_order, f.outcome_sets, probs.reshape(shape))


def evaluate(c: Circuit) -> Distribution:
    """Joint outcome distribution with axes in node declaration order."""
    dist = evaluate_chain(foliate(c))
    return dist.reorder([n.name for n in c.nodes])


# ---------------------------------------------------------------------------
# circuit builders
# ---------------------------------------------------------------------------

def chain_circuit(ops: Sequence[GeneralizedOperation], names: Sequence[str] | None = None,
                  system: str = "A") -> Circuit:
    """prep -> op_1 -> ... -> meas on a single wire per link."""
    names = list(names) if names is not None else [f"n{k}" for k in range(len(ops))]
    nodes, wires = [], []
    for k, op in enumerate(ops):
        ins = (f"w{k - 1}",) if k > 0 else ()
        outs = (f"w{k}",) if k < len(ops) - 1 else ()
        if k < len(ops) - 1:
            wires.append(Wire(f"w{k}", f"{system}{op.dim_out}", op.dim_out))
        role = "prep" if k == 0 else "meas" if k == len(ops) - 1 else None
        nodes.append(Node(names[k], op, ins, outs, role))
    return Circuit(tuple(nodes), tuple(wires))


def boundary_scenario(bulk: CPMap | np.ndarray, env_state, boundary_effects: Sequence,
                      outcomes: Sequence | None = None) -> GeneralizedOperation:
    """Effective operation on S from a unitary bulk on S (x) E.

    The environment starts in ``env_state`` and ends in the boundary effect
    ``F_i``: ``M_i(rho) = Tr_E[(1 (x) F_i) U (rho (x) sigma) U^dagger]``.
    A boundary with ``sum F_i != 1`` generally yields a non-standard operation.
    """
    u = bulk.kraus[0] if isinstance(bulk, CPMap) else np.asarray(bulk, dtype=complex)
    if isinstance(bulk, CPMap) and len(bulk.kraus) != 1:
        raise StructuralError("bulk must be a unitary channel")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-9:
        raise StructuralError("bulk operation is not unitary")
    sigma = as_hermitian(env_state)
    d_e = sigma.shape[0]
    if u.shape[0] % d_e:
        raise StructuralError(f"bulk dimension {u.shape[0]} is not divisible by environment dimension {d_e}")
    d_s = u.shape[0] // d_e
    maps = []
    w, v = np.linalg.eigh(sigma)
    env_cols = [np.sqrt(lam) * v[:, k] for k, lam in enumerate(w) if lam > 1e-15]
    for f in boundary_effects:
        f = as_hermitian(f)
        if f.shape != (d_e, d_e):
            raise StructuralError(f"boundary effect has shape {f.shape}, environment dimension is {d_e}")
        if not is_psd(f):
            raise StructuralError("boundary effects must be PSD")
        fw, fv = np.linalg.eigh(f)
        ks = []
        # K = (1 (x) <phi|) U (1 (x) |s>) for each pair of effect / environment components
        for mu, phi in zip(fw, fv.T):
            if mu <= 1e-15:
                continue
            bra = np.kron(np.eye(d_s), np.sqrt(mu) * phi.conj()[None, :])
            for s in env_cols:
                ket = np.kron(np.eye(d_s), s[:, None])
                ks.append(bra @ u @ ket)
        maps.append(CPMap(ks, d_s, d_s))
    return make_operation(maps, outcomes)


def boundary_scenario_direct(u: np.ndarray, env_state, f, rho) -> np.ndarray:
    """Unnormalized ``Tr_E[(1 (x) F) U (rho (x) sigma) U^dagger]`` by direct matrix algebra."""
    sigma = np.asarray(env_state, dtype=complex)
    d_e = sigma.shape[0]
    d_s = u.shape[0] // d_e
    big = np.kron(np.eye(d_s), f) @ u @ np.kron(rho, sigma) @ u.conj().T
    return partial_trace(big, [d_s, d_e], 0)
