import numpy as np
import pytest

from config import (
    ADJOINT_TOL,
    CHEAP_DUALITY_TOL,
    COMMUTATION_TOL,
    INTERTWINING_TOL,
    REGENERATION_TOL,
)
from core.errors import DomainError
from core.sectors import SectorOperator
from core.su11 import (
    KINDS,
    MonomialOperator,
    build_k_operator,
    cheap_duality_consistency,
    continuous_k_operator,
    regenerated_self_duality,
    single_site_operators,
    verify_adjointness,
    verify_commutation,
    verify_continuous_su11_relations,
    verify_intertwining,
    verify_regeneration,
    verify_su11_relations,
)


def test_raising_operator_entries(uniform_params):
    op = build_k_operator(uniform_params, "plus", 1)
    assert (op.range_total, op.domain_total) == (1, 2)
    assert op.shift == 1
    np.testing.assert_array_equal(op.matrix, [[3.0, 2.0, 0.0], [0.0, 2.0, 3.0]])


def test_lowering_operator_entries(uniform_params):
    op = build_k_operator(uniform_params, "-", 2)
    assert op.matrix.shape == (3, 2)
    np.testing.assert_array_equal(op.matrix, [[2.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
    empty = build_k_operator(uniform_params, "minus", 0)
    assert empty.matrix.shape == (1, 0)
    assert empty.domain_total == -1


def test_zero_operator_is_scalar(params):
    op = build_k_operator(params, "0", 4)
    np.testing.assert_allclose(op.matrix, (params.shape + 4) * np.eye(5))


def test_unknown_kind_rejected(uniform_params):
    with pytest.raises(DomainError):
        build_k_operator(uniform_params, "sideways", 2)
    with pytest.raises(DomainError):
        continuous_k_operator(uniform_params, "zero", zero_reading="other")


def test_sector_operator_composition_checks_sectors(uniform_params):
    plus = build_k_operator(uniform_params, "plus", 1)
    with pytest.raises(DomainError):
        plus @ plus
    composed = plus @ build_k_operator(uniform_params, "plus", 2)
    assert (composed.range_total, composed.domain_total) == (1, 3)
    with pytest.raises(DomainError):
        SectorOperator(1, 1, np.zeros((3, 3)))


def test_generator_commutes_with_ladder_operators(params):
    assert verify_commutation(params, range(0, 9)) <= COMMUTATION_TOL
    for kind in KINDS:
        assert verify_commutation(params, [5], kinds=[kind]) <= COMMUTATION_TOL
    with pytest.raises(DomainError):
        verify_commutation(params, [])


def test_single_site_relations(params):
    residual, excluded = verify_su11_relations(params, 20)
    assert residual <= COMMUTATION_TOL
    assert excluded == 1


def test_single_site_operator_shapes(uniform_params):
    ops = single_site_operators(uniform_params, 4)
    assert set(ops) == set(KINDS)
    assert all(m.shape == (5, 5) for m in ops.values())
    assert ops["plus"][4].sum() == 0.0
    with pytest.raises(DomainError):
        single_site_operators(uniform_params, 0)


def test_continuous_relations(params):
    assert verify_continuous_su11_relations(params, 12) <= COMMUTATION_TOL


def test_monomial_operator_compose(uniform_params):
    plus = continuous_k_operator(uniform_params, "plus")
    minus = continuous_k_operator(uniform_params, "minus")
    assert minus.compose(plus).apply({2: 1.0}) == pytest.approx({2: 12.0})
    assert minus.apply({0: 3.0}) == {}
    assert isinstance(plus.compose(minus), MonomialOperator)


@pytest.mark.parametrize("theta", [0.4, 0.9])
def test_adjointness(params, theta):
    assert verify_adjointness(params, theta, 30) <= ADJOINT_TOL


def test_intertwining(params):
    assert verify_intertwining(params, 15) <= INTERTWINING_TOL


def test_multiplication_reading_breaks_intertwining(params):
    assert verify_intertwining(params, 15, zero_reading="multiplication") > 1e-3


def test_regeneration(params):
    assert verify_regeneration(params, 8) <= REGENERATION_TOL


def test_regeneration_is_upper_triangular_in_sectors(uniform_params):
    result, closed = regenerated_self_duality(uniform_params, 3)
    assert result.shape == closed.shape == (10, 10)
    assert closed[0, 0] == 1.0
    assert np.all(np.tril(closed, -1) == 0.0)


@pytest.mark.parametrize("time", [0.0, 0.5, 3.0])
def test_cheap_duality(params, time):
    assert cheap_duality_consistency(params, 0.5, 6, time) <= CHEAP_DUALITY_TOL
