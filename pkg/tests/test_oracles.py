"""The frozen reference values are reproduced by the independent oracles."""

import numpy as np

import oracles as o


def test_scb_law_maps_to_original_gain():
    assert np.allclose(np.array(o.EXAMPLE_SCB_LAW) @ np.array(o.EXAMPLE_T), o.EXAMPLE_KX)


def test_example_certificate_arithmetic():
    A = np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, -3.0, -1.0]])
    Y = np.array(o.EXAMPLE_Y)
    C = np.array([[0.0, 1.0, 0.0]])
    assert np.allclose(A @ Y + Y @ A.T, o.EXAMPLE_AYYA)
    assert np.allclose(A @ Y @ C.T, [[0.0], [0.0], [-1.0]])


def test_loop_characteristic_polynomial():
    poly = np.polymul([1.0, 1.0], o.EXAMPLE_DEN) - np.r_[0.0, 0.0, 0.0, 0.9, 0.9]
    assert np.allclose(poly, o.EXAMPLE_LOOP_CHARPOLY)
    real_roots = [r.real for r in np.roots([1.0, 2.0, 4.0, 1.1]) if abs(r.imag) < 1e-12]
    assert np.isclose(real_roots[0], o.EXAMPLE_LOOP_SLOWEST, atol=1e-9)


def test_lyapunov_oracle_scalar():
    assert np.allclose(o.lyapunov_vec([[-1.0]], [[2.0]]), [[1.0]])


def test_kalman_oracle_simple_cases():
    assert o.kalman_rank_controllable([[-1.0]], [[1.0]])
    assert not o.kalman_rank_controllable(np.diag([1.0, 2.0]), [[1.0], [0.0]])
