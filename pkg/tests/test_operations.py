import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tsopt.linalg import CPMap, DomainError, StructuralError
from tsopt.operations import (
    EffectPair, GeneralizedOperation, NormalizationError, NullOperationError, StatePair, TransformationPair,
    UpdateKernel, channel, compose_parallel, compose_sequential, conditional_probabilities, convexity_gap,
    convexity_witness, identity_operation, instrument, is_standard, joint_distribution, make_operation,
    measurement, preparation, probability, retrodictive_map, standardize, update,
)
from tsopt.oracle import map_action_equal
from tsopt.sampling import (
    random_density, random_instrument, random_measurement, random_preparation, random_psd, random_unitary,
)

P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def seeds():
    return st.integers(0, 2 ** 32 - 1)


# --- make_operation -------------------------------------------------------

def test_make_operation_keeps_normalized_channel():
    u = random_unitary(2, np.random.default_rng(0))
    op = make_operation([CPMap([u / np.sqrt(2)]), CPMap([u / np.sqrt(2)])])
    assert np.isclose(op.total_weight(), 1.0)
    assert np.allclose(op.maps[0].kraus[0], u / np.sqrt(2))


def test_make_operation_rescales_uniformly():
    op = make_operation([CPMap([np.sqrt(2) * np.eye(2)])])
    assert map_action_equal(op.maps[0], CPMap.identity(2))


def test_make_operation_zero_weight():
    with pytest.raises(NullOperationError):
        make_operation([CPMap.zero(2, 2)])


def test_generalized_operation_enforces_normalization():
    with pytest.raises(NormalizationError):
        GeneralizedOperation([CPMap([np.sqrt(2) * np.eye(2)])])
    with pytest.raises(StructuralError):
        GeneralizedOperation([CPMap.identity(2), CPMap.identity(3)])


def test_nonstandard_measurement_accepted():
    q = 0.5
    meas = measurement([q * P0, (2 - q) * P1], normalize=False)
    assert np.isclose(sum(np.trace(e).real for e in meas.effect_operators()), 2)
    assert not is_standard(meas)


# --- states, effects, probability ----------------------------------------

def test_pair_validation():
    with pytest.raises(DomainError):
        StatePair(np.eye(2), np.eye(2) / 2)
    with pytest.raises(DomainError):
        StatePair(P0, 2 * P0)
    with pytest.raises(DomainError):
        EffectPair(np.eye(2), np.eye(2) * 1.5)
    with pytest.raises(StructuralError):
        EffectPair(np.eye(3), np.eye(2))
    with pytest.raises(DomainError):
        TransformationPair(CPMap([np.eye(2)]), CPMap([np.eye(2) * 0.5]))


def test_probability_examples():
    assert probability(StatePair.deterministic(P0), EffectPair(P0, np.eye(2))) == pytest.approx(1.0)
    assert probability(StatePair.deterministic(P0), EffectPair.deterministic(2 * P1)) == 0.0
    rho_bar = np.diag([0.5, 0.5])
    e_bar = np.diag([0.5, 1.5])
    p = probability(StatePair(0.5 * P0, rho_bar), EffectPair(0.5 * P0, e_bar))
    assert p == pytest.approx(0.25, abs=1e-12)


def test_probability_dimension_mismatch():
    with pytest.raises(StructuralError):
        probability(StatePair.deterministic(P0), EffectPair.deterministic(np.eye(3)))


@settings(max_examples=40, deadline=None)
@given(seeds(), st.integers(2, 4))
def test_conditional_rule(seed, d):
    rng = np.random.default_rng(seed)
    rho = random_density(d, rng)
    meas = random_measurement(d, 3, rng, standard=False)
    es = meas.effect_operators()
    probs = conditional_probabilities(rho, es)
    expected = np.array([np.trace(rho @ e).real for e in es]) / np.trace(rho @ sum(es)).real
    assert np.allclose(probs, expected, atol=1e-12)
    assert np.isclose(probs.sum(), 1.0)


# --- joint distribution ---------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seeds(), st.integers(2, 4))
def test_joint_distribution_standard_is_born(seed, d):
    rng = np.random.default_rng(seed)
    prep = random_preparation(d, 3, rng)
    meas = random_measurement(d, 2, rng)
    dist = joint_distribution(prep, meas).table
    direct = np.array([[np.trace(r @ e).real for e in meas.effect_operators()] for r in prep.state_operators()])
    assert np.allclose(dist, direct, atol=1e-12)


def test_joint_distribution_classical_and_null():
    p, q = 0.3, 0.4
    prep = preparation([p * P0, (1 - p) * P1], normalize=False)
    meas = measurement([q * P0, (2 - q) * P1], normalize=False)
    table = joint_distribution(prep, meas).table
    den = p * q + (1 - p) * (2 - q)
    assert np.allclose(table, [[p * q / den, 0], [0, (1 - p) * (2 - q) / den]], atol=1e-12)
    null = joint_distribution(preparation([P0]), measurement([2 * P1]))
    assert null.null and not null.table.any()


@settings(max_examples=30, deadline=None)
@given(seeds(), st.floats(0.1, 10), st.floats(0.1, 10))
def test_equivalence_class_scaling(seed, a, b):
    rng = np.random.default_rng(seed)
    rhos = [random_psd(2, rng) for _ in range(2)]
    es = [random_psd(2, rng) for _ in range(3)]
    base = joint_distribution(preparation(rhos), measurement(es)).table
    scaled = joint_distribution(preparation([a * r for r in rhos]), measurement([b * e for e in es])).table
    assert np.allclose(base, scaled, atol=1e-12)


# --- composition ----------------------------------------------------------

def test_compose_with_identity():
    rng = np.random.default_rng(1)
    op = random_instrument(2, 3, 2, rng, standard=False)
    out = compose_sequential(op, identity_operation(3))
    assert [lab[0] for lab in out.outcomes] == list(op.outcomes)
    assert all(map_action_equal(a, b) for a, b in zip(out.maps, op.maps))


def test_compose_standard_channels():
    rng = np.random.default_rng(2)
    a = channel([random_unitary(2, rng)])
    b = random_instrument(2, 2, 2, rng)
    out = compose_sequential(a, b)
    assert is_standard(out)
    assert len(out) == 2
    assert np.isclose(out.total_weight(), 1.0)


def test_compose_null():
    out = compose_sequential(preparation([P0]), measurement([2 * P1]))
    assert out.is_null
    assert compose_sequential(out, identity_operation(1)).is_null


def test_compose_dimension_mismatch():
    with pytest.raises(StructuralError):
        compose_sequential(identity_operation(2), identity_operation(3))


@settings(max_examples=25, deadline=None)
@given(seeds())
def test_compose_sequential_associative(seed):
    rng = np.random.default_rng(seed)
    a = random_instrument(2, 3, 2, rng, standard=False)
    b = random_instrument(3, 2, 2, rng, standard=False)
    c = random_instrument(2, 2, 2, rng, standard=False)
    left = compose_sequential(compose_sequential(a, b), c)
    right = compose_sequential(a, compose_sequential(b, c))
    for m1, m2 in zip(left.maps, right.maps):
        assert map_action_equal(m1, m2, 1e-12)


def test_compose_parallel():
    ident = compose_parallel(identity_operation(2), identity_operation(3))
    assert map_action_equal(ident.maps[0], CPMap.identity(6))
    rng = np.random.default_rng(3)
    a, b = random_instrument(2, 2, 2, rng), random_instrument(3, 2, 3, rng)
    assert is_standard(compose_parallel(a, b))
    a, b = random_instrument(2, 2, 2, rng, False), random_instrument(2, 3, 2, rng, False)
    ab = compose_parallel(a, b)
    assert np.isclose(ab.total_weight(), a.total_weight() * b.total_weight())
    assert len(ab) == 4


# --- update ---------------------------------------------------------------

def test_full_coarse_grain_gives_m_bar():
    rng = np.random.default_rng(4)
    op = random_instrument(2, 2, 3, rng, standard=False)
    out = update(op, UpdateKernel.coarse_grain(3))
    assert len(out) == 1 and map_action_equal(out.maps[0], op.m_bar)


def test_select_subset_renormalizes():
    meas = measurement([P0, 0.5 * P1, 0.5 * P1], normalize=False)
    out = update(meas, UpdateKernel.select(meas.outcomes, [0, 2], p=0.5))
    es = out.effect_operators()
    assert out.outcomes == (0, 2)
    assert np.isclose(sum(np.trace(e).real for e in es), 2)
    assert np.allclose(es[0], 4 / 3 * P0)


def test_identity_kernel_and_null_update():
    rng = np.random.default_rng(5)
    op = random_instrument(2, 2, 2, rng, standard=False)
    same = update(op, UpdateKernel(np.eye(2)))
    assert all(map_action_equal(a, b) for a, b in zip(same.maps, op.maps))
    assert update(op, UpdateKernel(np.zeros((1, 2)))).is_null
    with pytest.raises(StructuralError):
        update(op, UpdateKernel(np.eye(3)))


def test_kernel_invariants():
    with pytest.raises(StructuralError):
        UpdateKernel(np.array([[-0.1, 0.5]]))
    with pytest.raises(StructuralError):
        UpdateKernel(np.array([[0.8], [0.4]]))


@settings(max_examples=25, deadline=None)
@given(seeds())
def test_update_composes(seed):
    rng = np.random.default_rng(seed)
    op = random_instrument(2, 2, 4, rng, standard=False)
    t1 = UpdateKernel(rng.dirichlet(np.ones(3), size=4).T * 0.9)
    t2 = UpdateKernel(rng.dirichlet(np.ones(2), size=3).T)
    twice = update(update(op, t1), t2)
    once = update(op, t1.then(t2))
    assert all(map_action_equal(a, b, 1e-12) for a, b in zip(twice.maps, once.maps))


def test_bayes_consistency_of_subset_update():
    rng = np.random.default_rng(6)
    prep = random_preparation(3, 2, rng)
    meas = random_measurement(3, 4, rng, standard=False)
    keep = [1, 3]
    table = joint_distribution(prep, meas).table[:, keep]
    upd = joint_distribution(prep, update(meas, UpdateKernel.select(meas.outcomes, keep))).table
    assert np.allclose(upd, table / table.sum(), atol=1e-12)


# --- classification and re-expression -------------------------------------

def test_is_standard_examples():
    rng = np.random.default_rng(7)
    assert is_standard(channel([random_unitary(3, rng)]))
    assert not is_standard(measurement([0.3 * P0, 1.7 * P1], normalize=False))
    povm = random_measurement(2, 3, rng)
    assert is_standard(povm)
    # a preparation read backwards is a measurement with E_bar = d rho_bar != 1
    assert is_standard(retrodictive_map(povm))
    assert not is_standard(retrodictive_map(random_preparation(2, 2, rng)))
    a, b = random_instrument(2, 2, 2, rng), random_instrument(2, 2, 3, rng)
    assert is_standard(compose_sequential(a, b)) and is_standard(compose_parallel(a, b))


def test_retrodictive_map():
    prep = preparation([P0])
    meas = retrodictive_map(prep)
    assert np.allclose(meas.effect_operators()[0], 2 * P0)
    mixed = retrodictive_map(preparation([np.eye(2) / 2]))
    assert np.allclose(mixed.effect_operators()[0], np.eye(2))
    rng = np.random.default_rng(8)
    op = random_instrument(2, 3, 2, rng, standard=False)
    back = retrodictive_map(retrodictive_map(op))
    assert all(map_action_equal(a, b) for a, b in zip(back.maps, op.maps))


@settings(max_examples=25, deadline=None)
@given(seeds(), st.integers(2, 3))
def test_retrodictive_swap_preserves_distribution(seed, d):
    rng = np.random.default_rng(seed)
    prep = random_preparation(d, 2, rng)
    meas = random_measurement(d, 3, rng, standard=False)
    fwd = joint_distribution(prep, meas).table
    back = joint_distribution(retrodictive_map(meas), retrodictive_map(prep)).table
    assert np.allclose(fwd, back.T, atol=1e-12)


def test_standardize_classical_case():
    prep = preparation([0.5 * P0, 0.5 * P1], normalize=False)
    meas = measurement([0.5 * P0, 1.5 * P1], normalize=False)
    new_prep, new_meas = standardize(prep, meas)
    assert np.allclose(new_meas.effect_operators(), [P0, P1])
    assert is_standard(new_meas)
    assert np.allclose(joint_distribution(prep, meas).table, joint_distribution(new_prep, new_meas).table,
                       atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds(), st.integers(2, 3))
def test_standardize_preserves_distribution(seed, d):
    rng = np.random.default_rng(seed)
    prep = random_preparation(d, 2, rng)
    meas = random_measurement(d, 3, rng, standard=False)
    new_prep, new_meas = standardize(prep, meas)
    assert is_standard(new_meas)
    assert np.allclose(joint_distribution(prep, meas).table, joint_distribution(new_prep, new_meas).table,
                       atol=1e-12)


def test_standardize_identity_and_singular():
    rng = np.random.default_rng(9)
    prep, meas = random_preparation(2, 2, rng), random_measurement(2, 2, rng)
    new_prep, new_meas = standardize(prep, meas)
    assert np.allclose(new_prep.state_operators(), prep.state_operators())
    with pytest.raises(DomainError):
        standardize(prep, measurement([P0, P0]))


def test_instrument_outcomes_and_operators():
    op = instrument([[P0], [np.array([[0, 1], [0, 0]])]], outcomes=["a", "b"])
    assert op["b"].dim_in == 2
    assert is_standard(op)
    with pytest.raises(KeyError):
        op["c"]


# --- convexity ------------------------------------------------------------

def test_convexity_examples():
    s1 = StatePair.deterministic(np.diag([0.7, 0.3]))
    s2 = StatePair.deterministic(np.diag([0.2, 0.8]))
    eff = EffectPair(np.diag([1.5, 0.0]), np.diag([1.5, 0.5]))
    gap = convexity_gap(s1, s2, 1 / 3, eff)
    mix = 1 / 3 * 0.7 + 2 / 3 * 0.2
    lhs = 1.5 * mix / (1.5 * mix + 0.5 * (1 - mix))
    rhs = 1 / 3 * 1.05 / (1.05 + 0.15) + 2 / 3 * 0.3 / (0.3 + 0.4)
    assert gap == pytest.approx(abs(lhs - rhs), abs=1e-12)
    assert gap > 0.01
    # standard effects never show a gap
    assert convexity_gap(s1, s2, 0.4, EffectPair(P0, np.eye(2))) < 1e-12
    assert convexity_witness(s1, s1, 0.5) == (None, 0.0)
    eff, g = convexity_witness(s1, s2, 1 / 3)
    assert g > 0 and not np.allclose(eff.e_bar, np.eye(2))
    with pytest.raises(DomainError):
        convexity_witness(s1, s2, 1.5)
