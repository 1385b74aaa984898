import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsopt.linalg import (
    CPMap, DomainError, StructuralError, SystemLabel, choi_to_kraus, dominates, is_cp, is_hermitian,
    is_psd, kraus_to_choi, map_matrix_units, max_dim, partial_trace, permutation_unitary, tensor,
)
from tsopt.oracle import map_action_equal
from tsopt.sampling import ginibre, random_density, random_psd


def random_cp(rng, d_in, d_out, n=2):
    return CPMap([ginibre(rng, d_out, d_in) for _ in range(n)])


def test_is_psd_examples():
    rng = np.random.default_rng(0)
    assert is_psd(np.eye(2))
    assert not is_psd(np.diag([1, -0.5]))
    a = ginibre(rng, 3)
    m = a.conj().T @ a
    assert is_psd(m)
    # independent check with a general eigensolver
    assert np.min(np.linalg.eigvals(m).real) > -1e-9


def test_is_psd_rejects_bad_input():
    with pytest.raises(StructuralError):
        is_psd(np.ones((2, 3)))
    with pytest.raises(StructuralError):
        is_psd(np.array([[1, 1], [0, 1]]))
    assert is_hermitian(np.array([[1, 1e-11], [0, 1]]))


def test_system_label():
    assert SystemLabel("I", 1).dim == 1
    with pytest.raises(StructuralError):
        SystemLabel("A", 0)


def test_soft_dimension_limit(monkeypatch):
    assert max_dim() == 64
    monkeypatch.setenv("TSOPT_MAX_DIM", "4")
    with pytest.raises(StructuralError):
        CPMap.identity(5)
    monkeypatch.setenv("TSOPT_MAX_DIM", "128")
    assert CPMap.identity(100).dim_in == 100


def test_tensor_identities():
    assert np.allclose(tensor(np.eye(2), np.eye(3)), np.eye(6))
    ident = tensor(CPMap.identity(2), CPMap.identity(2))
    assert np.allclose(ident.choi(), CPMap.identity(4).choi())
    with pytest.raises(StructuralError):
        tensor(CPMap.identity(2), np.eye(2))


def test_tensor_choi_is_permuted_product():
    rng = np.random.default_rng(1)
    m, n = random_cp(rng, 2, 2), random_cp(rng, 2, 2)
    c = tensor(m, n).choi().reshape([2] * 8)
    cm = m.choi().reshape(2, 2, 2, 2)
    cn = n.choi().reshape(2, 2, 2, 2)
    # input-first ordering: (a_in, b_in, a_out, b_out) vs (a_in, a_out)(b_in, b_out)
    direct = np.einsum("ikjl,mnop->imknjolp", cm, cn)
    assert np.allclose(c, direct)


def test_partial_trace_examples():
    rng = np.random.default_rng(2)
    rho, sigma = random_density(2, rng), 2.5 * random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(rho, sigma), [2, 3], 0), 2.5 * rho)
    assert np.allclose(partial_trace(np.eye(4), [2, 2], 1), 2 * np.eye(2))
    m = random_psd(4, rng)
    red = partial_trace(m, [2, 2], 0)
    # direct summation oracle
    direct = np.array([[sum(m[2 * a + b, 2 * c + b] for b in range(2)) for c in range(2)] for a in range(2)])
    assert np.allclose(red, direct)
    assert np.isclose(np.trace(red), np.trace(m))
    with pytest.raises(StructuralError):
        partial_trace(np.eye(5), [2, 2], 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([[2, 3], [3, 2], [2, 2, 2]]))
def test_partial_trace_linear_and_trace_preserving(seed, dims):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    a, b = random_psd(n, rng), random_psd(n, rng)
    for keep in range(len(dims)):
        lhs = partial_trace(2 * a - 0.5 * b, dims, keep)
        rhs = 2 * partial_trace(a, dims, keep) - 0.5 * partial_trace(b, dims, keep)
        assert np.allclose(lhs, rhs)
        assert np.isclose(np.trace(partial_trace(a, dims, keep)), np.trace(a))


def test_identity_choi():
    c = kraus_to_choi(CPMap.identity(2))
    expected = np.zeros((4, 4))
    for i in (0, 3):
        for j in (0, 3):
            expected[i, j] = 1
    assert np.allclose(c, expected)
    assert np.linalg.matrix_rank(c) == 1 and np.isclose(np.trace(c), 2)


def test_choi_round_trip_small_example():
    m = CPMap([np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])])
    c = kraus_to_choi(m)
    assert np.allclose(c, np.diag(np.diag(c)))
    assert map_action_equal(m, choi_to_kraus(c, 2, 2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 7))
def test_choi_round_trip_random(seed, d_in, d_out, n):
    rng = np.random.default_rng(seed)
    m = random_cp(rng, d_in, d_out, n)
    back = choi_to_kraus(m.choi(), d_in, d_out)
    assert len(back.kraus) <= d_in * d_out
    assert np.max(np.abs(map_matrix_units(m) - map_matrix_units(back))) < 1e-9


def test_choi_to_kraus_is_deterministic():
    rng = np.random.default_rng(3)
    m = random_cp(rng, 2, 2, 3)
    a = choi_to_kraus(m.choi(), 2, 2)
    b = choi_to_kraus(m.canonical().choi(), 2, 2)
    assert all(np.allclose(x, y) for x, y in zip(a.kraus, b.kraus))


def test_choi_to_kraus_rejects_non_psd():
    with pytest.raises(DomainError):
        choi_to_kraus(np.diag([1.0, -0.5, 0, 0]), 2, 2)


def test_kraus_list_is_canonicalized_when_too_long():
    rng = np.random.default_rng(4)
    m = random_cp(rng, 2, 2, 9)
    assert len(m.kraus) <= 4
    assert is_cp(m)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_cp_maps_send_psd_to_psd(seed):
    rng = np.random.default_rng(seed)
    m = random_cp(rng, 3, 2, 3)
    assert is_psd(m(random_psd(3, rng)))


def test_cpmap_algebra():
    rng = np.random.default_rng(5)
    m, n = random_cp(rng, 2, 3), random_cp(rng, 3, 2)
    x = random_psd(2, rng)
    assert np.allclose(n.compose(m)(x), n(m(x)))
    assert np.allclose((m + m)(x), 2 * m(x))
    assert np.allclose(m.scaled(0.25)(x), 0.25 * m(x))
    y = random_psd(3, rng)
    assert np.isclose(np.trace(m(x) @ y), np.trace(x @ m.adjoint()(y)))
    assert np.isclose(m.weight(), np.trace(m(np.eye(2) / 2)).real)
    assert CPMap.unitary(permutation_unitary([2, 2], [1, 0])).is_trace_preserving()
    with pytest.raises(DomainError):
        m.scaled(-1)
    assert CPMap.zero(2, 3).weight() == 0.0


def test_dominates():
    assert dominates(np.eye(2), np.diag([1, 0]))
    assert not dominates(np.diag([1, 0]), np.eye(2))


def test_permutation_unitary_swaps_factors():
    rng = np.random.default_rng(6)
    a, b = random_psd(2, rng), random_psd(3, rng)
    u = permutation_unitary([2, 3], [1, 0])
    assert np.allclose(u @ np.kron(a, b) @ u.conj().T, np.kron(b, a))
