import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from saddleflow.errors import InvalidInput
from saddleflow.lp_model import (
    PerturbationVector,
    PrimalDualState,
    StandardFormLP,
    dual_of,
    kkt_residual,
    lagrangian_value,
    load_lp,
    lp_from_dict,
    perturbed_program,
    require_valid,
    validate_lp,
)


def test_validate_well_formed(lp1):
    assert validate_lp(lp1).ok


def test_validate_zero_row():
    rep = validate_lp(StandardFormLP([[0.0, 0.0]], [1.0], [0.0, 0.0]))
    assert not rep.ok
    assert any("zero row" in m for m in rep.messages)


def test_validate_dimension_mismatch():
    rep = validate_lp(StandardFormLP([[1.0, 1.0]], [1.0, 2.0], [1.0, 2.0]))
    assert not rep.ok
    assert any("dimension mismatch" in m for m in rep.messages)


def test_validate_non_finite():
    rep = validate_lp(StandardFormLP([[1.0, np.nan]], [1.0], [1.0, 2.0]))
    assert not rep.ok
    with pytest.raises(InvalidInput):
        require_valid(StandardFormLP([[1.0, np.inf]], [1.0], [1.0, 2.0]))


def test_arrays_are_read_only(lp1):
    with pytest.raises(ValueError):
        lp1.A[0, 0] = 3.0


def test_dual_of_lp1(lp1):
    d = dual_of(lp1)
    assert d.sense == "max"
    assert_array_equal(d.objective, [-1.0])
    assert_array_equal(d.constraint_matrix, [[1.0], [1.0]])
    assert_array_equal(d.offset, [1.0, 2.0])


def test_dual_of_identity():
    d = dual_of(StandardFormLP(np.eye(2), [1.0, 1.0], [0.0, 0.0]))
    assert_array_equal(d.objective, [-1.0, -1.0])
    assert_array_equal(d.constraint_matrix, np.eye(2))


def test_dual_round_trip(lp1):
    d = dual_of(lp1)
    assert_array_equal(d.constraint_matrix.T, lp1.A)


def test_lagrangian_examples(lp1, lp1_star):
    assert lagrangian_value(lp1, 5.0, lp1_star) == pytest.approx(1.0)
    assert lagrangian_value(lp1, 5.0, PrimalDualState([0.0, 0.0], [0.0])) == pytest.approx(0.5)


def test_lagrangian_penalty_counts_negative_part(lp1):
    s = PrimalDualState([1.5, -0.5], [0.0])
    assert lagrangian_value(lp1, 2.0, s) == pytest.approx(1.5 - 1.0 + 2.0 * 0.5)


def test_lagrangian_k0_on_feasible_point(lp1):
    for z in (-3.0, 0.0, 7.0):
        assert lagrangian_value(lp1, 0.0, PrimalDualState([0.25, 0.75], [z])) == pytest.approx(1.75)


def test_kkt_examples(lp1, lp1_star):
    assert kkt_residual(lp1, lp1_star) == 0.0
    assert kkt_residual(lp1, PrimalDualState([0.0, 0.0], [0.0])) == 1.0


def test_perturbed_program_examples(lp1):
    p = perturbed_program(lp1, PerturbationVector([0.0, 0.0], [0.5]))
    assert_allclose(p.c, [0.5, 1.5])
    assert_allclose(p.b, [0.5])
    p = perturbed_program(lp1, PerturbationVector([1.0, 0.0], [0.0]))
    assert_allclose(p.c, [0.0, 2.0])
    assert_allclose(p.b, [1.0])


def test_perturbed_program_zero_is_identity(lp1):
    p = perturbed_program(lp1, PerturbationVector.zeros(2, 1))
    assert_array_equal(p.A, lp1.A)
    assert_array_equal(p.b, lp1.b)
    assert_array_equal(p.c, lp1.c)


def test_lp_json_round_trip(tmp_path, lp1):
    path = tmp_path / "lp.json"
    path.write_text(json.dumps(lp1.to_dict()))
    back = load_lp(path)
    assert back.name == "LP-1"
    assert_array_equal(back.A, lp1.A)


def test_loader_rejects_ragged_matrix():
    with pytest.raises(InvalidInput):
        lp_from_dict({"A": [[1.0, 2.0], [1.0]], "b": [1.0, 1.0], "c": [0.0, 0.0]})


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=8, max_size=8), st.floats(0, 1), st.floats(0, 4))
def test_lagrangian_convex_in_x_linear_in_z(vals, k, K):
    lp = StandardFormLP([[1.0, -2.0, 0.5], [0.0, 1.0, 1.0]], [1.0, 2.0], [0.3, -1.0, 2.0])
    x1, x2 = np.array(vals[:3]), np.array(vals[3:6])
    z1, z2 = np.array(vals[6:]), np.array(vals[6:][::-1]) + 1.0
    mix = lagrangian_value(lp, K, PrimalDualState(k * x1 + (1 - k) * x2, z1))
    assert mix <= k * lagrangian_value(lp, K, PrimalDualState(x1, z1)) + (1 - k) * lagrangian_value(
        lp, K, PrimalDualState(x2, z1)) + 1e-9
    lin = lagrangian_value(lp, K, PrimalDualState(x1, k * z1 + (1 - k) * z2))
    ref = k * lagrangian_value(lp, K, PrimalDualState(x1, z1)) + (1 - k) * lagrangian_value(lp, K, PrimalDualState(x1, z2))
    assert lin == pytest.approx(ref, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3))
def test_residual_nonnegative(vals):
    lp = StandardFormLP([[1.0, 1.0]], [1.0], [1.0, 2.0])
    assert kkt_residual(lp, PrimalDualState(vals[:2], vals[2:])) >= 0.0
