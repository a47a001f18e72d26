import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nifeedback.errors import DimensionError, PoleEvaluationError, UnsupportedRelativeDegreeError
from nifeedback.ltimodel import (
    StateSpaceModel,
    dc_gain,
    eval_tf,
    freq_sweep,
    is_minimal,
    logspace_grid,
    relative_degree,
    siso_tf_coefficients,
    transform,
)

SCALAR = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]])


def test_model_is_read_only():
    with pytest.raises(ValueError):
        SCALAR.A[0, 0] = 3.0


def test_dimension_checks():
    with pytest.raises(DimensionError):
        StateSpaceModel([[-1.0, 0.0]], [[1.0]], [[1.0]])
    with pytest.raises(DimensionError):
        StateSpaceModel([[-1.0]], [[1.0]], [[1.0, 2.0]])
    with pytest.raises(DimensionError):
        StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[1.0, 0.0]])
    with pytest.raises(DimensionError):
        StateSpaceModel([[np.inf]], [[1.0]], [[1.0]])


def test_eval_scalar_at_origin():
    assert np.isclose(eval_tf(SCALAR, 0.0)[0, 0], 1.0)


def test_eval_at_pole_reports_eigenvalue():
    with pytest.raises(PoleEvaluationError) as info:
        eval_tf(SCALAR, -1.0)
    assert np.isclose(info.value.nearest_eigenvalue, -1.0)


def test_example_closed_loop_values(example_result):
    cl = example_result.closed_loop
    assert np.isclose(eval_tf(cl, 0.0)[0, 0].real, oracles.EXAMPLE_R0, atol=1e-12)
    assert np.isclose(dc_gain(cl)[0, 0], oracles.EXAMPLE_R0, atol=1e-12)
    R = eval_tf(cl, 1j)[0, 0]
    assert abs(R - oracles.tf_poly_eval(oracles.EXAMPLE_NUM, oracles.EXAMPLE_DEN, 1j)) < 1e-12


def test_relative_degree_cases(example_plant):
    assert relative_degree(example_plant) == 2
    assert relative_degree(SCALAR) == 1
    assert relative_degree(StateSpaceModel([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]])) == 2


def test_relative_degree_three_rejected():
    A = np.diag([1.0, 1.0], k=1)
    with pytest.raises(UnsupportedRelativeDegreeError):
        relative_degree(StateSpaceModel(A, [[0.0], [0.0], [1.0]], [[1.0, 0.0, 0.0]]))


def test_feedthrough_rejected():
    with pytest.raises(UnsupportedRelativeDegreeError):
        relative_degree(StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[1.0]]))


def test_mixed_relative_degree_rejected():
    # channel 1 has relative degree one, channel 2 relative degree two
    A = np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, -1.0]])
    B = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    C = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(UnsupportedRelativeDegreeError):
        relative_degree(StateSpaceModel(A, B, C))


def test_dc_gain_singular_A():
    with pytest.raises(PoleEvaluationError):
        dc_gain(StateSpaceModel([[0.0]], [[1.0]], [[1.0]]))


def test_sweep_basics():
    assert freq_sweep(SCALAR, []) == []
    (smp,) = freq_sweep(SCALAR, [1.0])
    assert np.isclose(smp.response[0, 0], 0.5 - 0.5j)


def test_sweep_reports_pole_points():
    osc = StateSpaceModel([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]])
    samples = freq_sweep(osc, [0.5, 1.0, 2.0])
    assert [s.at_pole for s in samples] == [False, True, False]
    assert np.isnan(samples[1].response).all()


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        freq_sweep(SCALAR, [0.0, 1.0])


def test_sweep_order_independent(example_result):
    grid = logspace_grid(1e-2, 1e2, 50)
    fwd = freq_sweep(example_result.closed_loop, grid)
    single = [freq_sweep(example_result.closed_loop, [w])[0] for w in grid[::-1]][::-1]
    assert all(np.array_equal(a.response, b.response) for a, b in zip(fwd, single))


def test_minimality():
    assert is_minimal(SCALAR)
    assert not is_minimal(StateSpaceModel(np.diag([-1.0, -2.0]), [[1.0], [0.0]], [[1.0, 0.0]]))


def test_example_closed_loop_minimal(example_result):
    assert is_minimal(example_result.closed_loop)


def test_siso_coefficients(example_result):
    num, den = siso_tf_coefficients(example_result.closed_loop)
    assert np.allclose(num, oracles.EXAMPLE_NUM, atol=1e-9)
    assert np.allclose(den, oracles.EXAMPLE_DEN, atol=1e-9)


def _random_sys(seed, n=4, p=2):
    rng = np.random.default_rng(seed)
    return StateSpaceModel(oracles.random_hurwitz(rng, n), rng.standard_normal((n, p)), rng.standard_normal((p, n)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(0.1, 5))
def test_conjugate_symmetry(seed, re, im):
    sys = _random_sys(seed)
    s = complex(re, im)
    assert np.allclose(eval_tf(sys, s.conjugate()), np.conj(eval_tf(sys, s)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_dc_gain_matches_eval_at_zero(seed):
    sys = _random_sys(seed)
    assert np.allclose(dc_gain(sys), eval_tf(sys, 0.0).real)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 2))
def test_relative_degree_invariant_under_similarity(seed, r):
    rng = np.random.default_rng(seed)
    if r == 1:
        sys = _random_sys(seed, 3, 1)
    else:
        sys = StateSpaceModel(np.diag([1.0, 1.0], 1) + np.diag([-1.0, -2.0, -3.0]), [[0.0], [0.0], [1.0]],
                              [[0.0, 1.0, 0.0]])
    T = rng.standard_normal((sys.n, sys.n)) + 3 * np.eye(sys.n)
    assert relative_degree(transform(sys, T)) == relative_degree(sys) == r


def test_logspace_grid():
    g = logspace_grid(1e-2, 1e2, 5)
    assert np.allclose(g, [1e-2, 1e-1, 1, 10, 100])
    assert logspace_grid(1.0, 1.0, 1).tolist() == [1.0]
