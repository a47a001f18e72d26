"""Acceptance criteria, one test each.

Every test records a one-line verdict before asserting; the lines are
printed in the terminal summary (see ``conftest.py``) so a plain
``pytest -v`` run shows them, including for criteria that fail.  Run the
file directly (``python3 tests/test_acceptance.py``) for the lines alone.
"""

import time

import numpy as np
import scipy.linalg

import oracles
from nifeedback.ltimodel import StateSpaceModel, dc_gain, eval_tf, is_minimal, logspace_grid, siso_tf_coefficients
from nifeedback.nisynth import SSNIRefusal, SynthesisOptions, gate_feedback_equivalence, synth_ni, synth_ssni
from nifeedback.niverify import hermitian_imaginary_part, verify_ssni_freq
from nifeedback.numkernel import DEFAULT_TOL, pbh_controllable, solve_lyapunov, sym
from nifeedback.randsys import (
    VIOLATIONS,
    random_conditioned,
    random_eligible_plant,
    random_min_phase_rd1,
    random_violating_plant,
)
from nifeedback.robust import (
    UncertainPlant,
    build_interconnection,
    first_order_lag,
    loop_dc_gain,
    sample_sni_uncertainty,
    synth_robust,
)

RESULTS = {}


def record(number, passed, detail):
    RESULTS[number] = (bool(passed), detail)
    return passed


def example_plant():
    return StateSpaceModel(oracles.EXAMPLE_A, oracles.EXAMPLE_B, oracles.EXAMPLE_C)


EXAMPLE_OPTIONS = SynthesisOptions(Y1b_override=1.0, Y2=0.5, K3=-1.0, max_tries=0)


def test_criterion_1_example_gains():
    t0 = time.perf_counter()
    res = synth_ni(example_plant(), EXAMPLE_OPTIONS)
    elapsed = time.perf_counter() - t0
    gain_err = max(abs(res.gains[k][0, 0] - v) for k, v in oracles.EXAMPLE_GAINS.items())
    law_err = float(np.max(np.abs(res.scb_gain() - [oracles.EXAMPLE_SCB_LAW])))
    ok = gain_err <= 1e-12 and law_err <= 1e-12 and elapsed < 1.0
    record(1, ok, f"gain error {gain_err:.1e}, law error {law_err:.1e}, {elapsed * 1e3:.1f} ms")
    assert ok


def test_criterion_2_example_transfer_function():
    res = synth_ni(example_plant(), EXAMPLE_OPTIONS)
    num, den = siso_tf_coefficients(res.closed_loop)
    num = np.trim_zeros(np.real(num), "f")
    den = np.real(den)
    e_num = float(np.max(np.abs(num - oracles.EXAMPLE_NUM))) if num.size == 2 else np.inf
    e_den = float(np.max(np.abs(den - oracles.EXAMPLE_DEN))) if den.size == 4 else np.inf
    e_r0 = abs(dc_gain(res.closed_loop)[0, 0] - oracles.EXAMPLE_R0)
    ok = e_num <= 1e-9 and e_den <= 1e-9 and e_r0 <= 1e-12
    record(2, ok, f"numerator error {e_num:.1e}, denominator error {e_den:.1e}, R(0) error {e_r0:.1e}")
    assert ok


def test_criterion_3_bode_band():
    cl = synth_ni(example_plant(), EXAMPLE_OPTIONS).closed_loop
    grid = logspace_grid(1e-2, 1e2, 2000)
    R = np.array([eval_tf(cl, 1j * w)[0, 0] for w in grid])
    phase = np.degrees(np.unwrap(np.angle(R)))
    lam = np.array([np.linalg.eigvalsh(hermitian_imaginary_part(np.array([[r]])))[0] for r in R])
    ok = phase.min() >= -180.0 and phase.max() <= 0.0 and lam.min() >= -1e-9
    record(3, ok, f"phase in [{phase.min():.3f}, {phase.max():.3f}] deg, min lambda {lam.min():.2e}")
    assert ok


def test_criterion_4_certificate_suite():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst_b = worst_l = -np.inf
    bad, counts = [], {1: 0, 2: 0}
    for k in range(500):
        r = 1 + k % 2
        sys, _ = random_eligible_plant(rng, r=r, max_n=12, max_p=3)
        counts[r] += 1
        res = synth_ni(sys)
        cl, Y = res.closed_loop, res.Y
        b = np.linalg.norm(cl.B + cl.A @ Y @ cl.C.T)
        l = np.linalg.eigvalsh(sym(cl.A @ Y + Y @ cl.A.T))[-1]
        worst_b, worst_l = max(worst_b, b), max(worst_l, l)
        if not (np.linalg.eigvalsh(Y)[0] > 0 and b <= 1e-8 and l <= 1e-8 and is_minimal(cl)):
            bad.append(k)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60.0
    record(4, ok, f"{500 - len(bad)}/500 (rd1 {counts[1]}, rd2 {counts[2]}), "
                  f"max residual {worst_b:.1e}, max lambda {worst_l:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_5_gate_soundness():
    rng = np.random.default_rng(5)
    wrong = []
    for k in range(100):
        violation = VIOLATIONS[k % len(VIOLATIONS)]
        sys, spec = random_violating_plant(rng, violation)
        gate = gate_feedback_equivalence(sys)
        if gate.eligible or gate.reason != spec.expected_reason:
            wrong.append((violation, gate.reason))
    ok = not wrong
    record(5, ok, f"{100 - len(wrong)}/100 rejected with the expected reason")
    assert ok, wrong[:5]


def test_criterion_6_ssni_suite():
    rng = np.random.default_rng(6)
    grid = logspace_grid(1e-3, 1e3, 500)
    failures = []
    worst_dc = 0.0
    for k in range(100):
        sys, _ = random_min_phase_rd1(rng)
        res = synth_ssni(sys)
        cl = res.closed_loop
        hurwitz = np.max(np.linalg.eigvals(cl.A).real) < 0
        strict = np.linalg.eigvalsh(sym(cl.A @ res.Y + res.Y @ cl.A.T))[-1] < 0
        freq = verify_ssni_freq(cl, grid).passed
        dc = float(np.linalg.norm(dc_gain(cl) - res.Y2))
        worst_dc = max(worst_dc, dc)
        if not (hurwitz and strict and freq and dc <= 1e-8):
            failures.append(k)
    refusals = 0
    for _ in range(100):
        sys, _ = random_eligible_plant(rng, r=2)
        refusals += isinstance(synth_ssni(sys), SSNIRefusal)
    ok = not failures and refusals == 100
    record(6, ok, f"{100 - len(failures)}/100 strict, max |R(0)-Y2| {worst_dc:.1e}, {refusals}/100 rd2 refusals")
    assert ok


def test_criterion_7_robust_end_to_end():
    rng = np.random.default_rng(7)
    stable = 0
    for k in range(200):
        sys, _ = random_eligible_plant(rng, max_n=10, max_p=3, symmetric_gain=True)
        gamma = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        res = synth_robust(UncertainPlant(sys, gamma))
        delta = sample_sni_uncertainty(res.p, gamma, seed=1000 + k)
        stable += build_interconnection(res.closed_loop_original(), delta).is_hurwitz()

    res = synth_robust(UncertainPlant(example_plant(), 1.0), EXAMPLE_OPTIONS)
    cl = res.closed_loop_original()
    delta = first_order_lag(0.9, 1.0)
    ic = build_interconnection(cl, delta)
    gain = loop_dc_gain(cl, delta)
    x20 = scipy.linalg.expm(20.0 * ic.combined_A) @ np.ones(4)
    norm20 = float(np.linalg.norm(x20))
    ok = stable == 200 and abs(gain - 0.45) <= 1e-12 and ic.is_hurwitz() and norm20 < 1e-3
    record(7, ok, f"{stable}/200 Hurwitz, example loop gain {gain:.6g}, "
                  f"||x(20)|| = {norm20:.3e} (slowest pole {ic.spectral_abscissa:.6f})")
    assert ok


def test_criterion_8_boundary_probe():
    rng = np.random.default_rng(8)
    flips = near = 0
    for k in range(100):
        sys, _ = random_eligible_plant(rng, max_n=8, max_p=1, symmetric_gain=True)
        res = synth_robust(UncertainPlant(sys, 1.0))
        cl = res.closed_loop_original()
        a = rng.uniform(0.2, 5.0)
        unit = loop_dc_gain(cl, first_order_lag(1.0, a))
        below = build_interconnection(cl, first_order_lag((1 - 1e-3) / unit, a))
        above = build_interconnection(cl, first_order_lag((1 + 1e-3) / unit, a))
        if below.is_hurwitz() and not above.is_hurwitz():
            flips += 1
        elif min(abs(below.spectral_abscissa), abs(above.spectral_abscissa)) <= DEFAULT_TOL.axis_tol(above.combined_A):
            near += 1
    ok = flips >= 95 and flips + near == 100
    record(8, ok, f"{flips}/100 flipped, {near} within the axis tolerance")
    assert ok


def _maybe_uncontrollable(rng, n, p):
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, p))
    if n > 1 and rng.random() < 0.5:
        k = int(rng.integers(1, n))
        A[k:, :k] = 0.0
        B[k:] = 0.0
        T = random_conditioned(rng, n)
        A, B = np.linalg.solve(T, A @ T), np.linalg.solve(T, B)
    return A, B


def test_criterion_9_oracle_equivalence():
    rng = np.random.default_rng(9)
    disagree = uncontrollable = 0
    for _ in range(1000):
        n, p = int(rng.integers(1, 9)), int(rng.integers(1, 3))
        A, B = _maybe_uncontrollable(rng, n, p)
        expected = oracles.kalman_rank_controllable(A, B)
        uncontrollable += not expected
        disagree += pbh_controllable(A, B) != expected
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        A = oracles.random_hurwitz(rng, n)
        X = rng.standard_normal((n, n))
        Q = X @ X.T
        Y = solve_lyapunov(A, Q)
        Yo = oracles.lyapunov_vec(A, Q)
        worst = max(worst, float(np.max(np.abs(Y - Yo)) / max(1.0, np.max(np.abs(Yo)))))
    ok = disagree == 0 and worst <= 1e-9
    record(9, ok, f"PBH/Kalman disagreements {disagree}/1000 ({uncontrollable} uncontrollable), Lyapunov max relative gap {worst:.1e}")
    assert ok


def summary_lines():
    for number in sorted(RESULTS):
        passed, detail = RESULTS[number]
        yield f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


if __name__ == "__main__":
    for name, fn in sorted((n, f) for n, f in globals().items() if n.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            pass
    for line in summary_lines():
        print(line)
