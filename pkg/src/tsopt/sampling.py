"""Seeded random objects: operators, states, effects, operations, circuits."""

from __future__ import annotations

import numpy as np

from .circuit import Circuit, Node, Wire, chain_circuit
from .linalg import CPMap, hermitian_part, sqrtm_psd
from .operations import EffectPair, GeneralizedOperation, StatePair, make_operation, measurement, preparation


def rng_from(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(rng, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))


def random_unitary(d: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(rng, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_psd(d: int, rng, rank: int | None = None) -> np.ndarray:
    g = ginibre(rng, d, d if rank is None else rank)
    return hermitian_part(g @ g.conj().T)


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    m = random_psd(d, rng, rank)
    return m / np.trace(m).real


def random_contraction(d: int, rng) -> np.ndarray:
    """Random Hermitian ``P`` with ``0 <= P <= 1``."""
    h = ginibre(rng, d)
    w, v = np.linalg.eigh(h + h.conj().T)
    return hermitian_part((v * (1 / (1 + np.exp(-w)))) @ v.conj().T)


def random_state_pair(d: int, rng) -> StatePair:
    rho_bar = random_density(d, rng)
    root = sqrtm_psd(rho_bar)
    return StatePair(hermitian_part(root @ random_contraction(d, rng) @ root), rho_bar)


def random_effect_pair(d: int, rng) -> EffectPair:
    e_bar = d * random_density(d, rng)
    root = sqrtm_psd(e_bar)
    return EffectPair(hermitian_part(root @ random_contraction(d, rng) @ root), e_bar)


def random_invertible(d: int, rng) -> np.ndarray:
    return ginibre(rng, d) + 0.5 * np.eye(d)


def random_povm(d: int, n: int, rng) -> list[np.ndarray]:
    parts = [random_psd(d, rng) for _ in range(n)]
    w = np.linalg.inv(sqrtm_psd(sum(parts)))
    return [hermitian_part(w @ p @ w) for p in parts]


def random_instrument(d_in: int, d_out: int, n: int, rng, standard: bool = True,
                      kraus_per_outcome: int = 2) -> GeneralizedOperation:
    """Random ``n``-outcome operation; ``standard`` makes the total map CPTP."""
    groups = [[ginibre(rng, d_out, d_in) for _ in range(kraus_per_outcome)] for _ in range(n)]
    if standard:
        gram = sum(k.conj().T @ k for g in groups for k in g)
        w = np.linalg.inv(sqrtm_psd(gram))
        groups = [[k @ w for k in g] for g in groups]
    return make_operation([CPMap(g) for g in groups])


def random_preparation(d: int, n: int, rng) -> GeneralizedOperation:
    return preparation([random_psd(d, rng) for _ in range(n)])


def random_measurement(d: int, n: int, rng, standard: bool = True) -> GeneralizedOperation:
    ops = random_povm(d, n, rng) if standard else [random_psd(d, rng) for _ in range(n)]
    return measurement(ops)


def random_chain(rng, steps: int, dims, standard_mask=None, outcomes: int = 2) -> Circuit:
    """prep -> ``steps`` operations -> meas over the listed wire dimensions."""
    rng = rng_from(rng)
    steps = int(steps)
    dims = list(dims)
    if len(dims) != steps + 1:
        raise ValueError("need one dimension per link")
    mask = standard_mask or [bool(rng.integers(2)) for _ in range(steps + 1)]
    ops = [random_preparation(dims[0], outcomes, rng)]
    for k in range(steps):
        ops.append(random_instrument(dims[k], dims[k + 1], outcomes, rng, standard=mask[k]))
    ops.append(random_measurement(dims[-1], outcomes, rng, standard=mask[-1]))
    names = ["prep"] + [f"op{k + 1}" for k in range(steps)] + ["meas"]
    return chain_circuit(ops, names)


def random_two_wire(rng, d1: int, d2: int, standard: bool = False) -> Circuit:
    """Two wires with a staggered middle: one wire idles while the other is processed."""
    rng = rng_from(rng)
    pa = random_preparation(d1, 2, rng)
    pb = random_preparation(d2, 2, rng)
    op_a = random_instrument(d1, d1, 2, rng, standard=standard)
    joint = random_instrument(d1 * d2, d1 * d2, 2, rng, standard=True, kraus_per_outcome=1)
    ma = random_measurement(d1, 2, rng, standard=standard)
    mb = random_measurement(d2, 2, rng, standard=True)
    wires = [Wire("a0", "A", d1), Wire("b0", "B", d2), Wire("a1", "A", d1),
             Wire("a2", "A", d1), Wire("b2", "B", d2)]
    nodes = [
        Node("PA", pa, (), ("a0",), "prep"),
        Node("PB", pb, (), ("b0",), "prep"),
        Node("OA", op_a, ("a0",), ("a1",)),
        Node("J", joint, ("a1", "b0"), ("a2", "b2")),
        Node("MA", ma, ("a2",), (), "meas"),
        Node("MB", mb, ("b2",), (), "meas"),
    ]
    return Circuit(tuple(nodes), tuple(wires))
