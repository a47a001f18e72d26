"""Seeded random plant generators for property tests and experiments.

Plants are assembled in normal-form coordinates, where every hypothesis
is easy to control, and then moved to random original coordinates with a
well-conditioned similarity.  All generators take a
:class:`numpy.random.Generator` so results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ltimodel import StateSpaceModel

__all__ = [
    "PlantSpec",
    "VIOLATIONS",
    "random_conditioned",
    "random_hurwitz",
    "skew_blocks",
    "random_zero_dynamics",
    "assemble_plant",
    "random_eligible_plant",
    "random_violating_plant",
    "random_min_phase_rd1",
]

VIOLATIONS = ("not-weakly-minimum-phase-orhp", "not-weakly-minimum-phase-jordan", "uncontrollable", "zero-at-origin")


@dataclass(frozen=True)
class PlantSpec:
    """What a generator promised about the plant it returned."""

    relative_degree: int
    n: int
    p: int
    m_a: int
    m_b: int
    expected_reason: str = ""


def random_conditioned(rng, k, spread=2.0):
    """Orthogonal times diagonal times orthogonal, singular values in ``[1/spread, spread]``."""
    if k == 0:
        return np.zeros((0, 0))
    U = scipy.linalg.qr(rng.standard_normal((k, k)))[0]
    V = scipy.linalg.qr(rng.standard_normal((k, k)))[0]
    s = np.exp(rng.uniform(-np.log(spread), np.log(spread), k))
    return U @ np.diag(s) @ V


def random_hurwitz(rng, k, margin=0.2):
    """Random ``k x k`` matrix with every eigenvalue real part ``<= -margin``."""
    if k == 0:
        return np.zeros((0, 0))
    X = rng.standard_normal((k, k))
    shift = np.max(np.linalg.eigvals(X).real) + margin + rng.uniform(0.0, 1.0)
    return X - shift * np.eye(k)


def skew_blocks(omegas):
    blocks = [np.array([[0.0, w], [-w, 0.0]]) for w in omegas]
    return scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))


def _distinct_freqs(rng, k, lo=0.5, hi=3.0, gap=0.2):
    out = []
    while len(out) < k:
        w = rng.uniform(lo, hi)
        if all(abs(w - x) > gap for x in out):
            out.append(w)
    return out


def random_zero_dynamics(rng, m_a_pairs, m_b):
    """Similarity-transformed ``diag(skew, Hurwitz)``."""
    core = scipy.linalg.block_diag(skew_blocks(_distinct_freqs(rng, m_a_pairs)), random_hurwitz(rng, m_b))
    m = core.shape[0]
    if m == 0:
        return core
    S0 = random_conditioned(rng, m)
    return S0 @ core @ np.linalg.inv(S0)


def _input_gain(rng, p, symmetric):
    if symmetric:
        Q = scipy.linalg.qr(rng.standard_normal((p, p)))[0]
        return Q @ np.diag(rng.uniform(0.5, 2.0, p)) @ Q.T
    return random_conditioned(rng, p)


def assemble_plant(rng, r, A11, p, G, A12=None, A13=None, coords=True):
    """Plant whose normal form has internal dynamics `A11` and input gain `G`."""
    m = A11.shape[0]
    A12 = rng.standard_normal((m, p)) if A12 is None else A12
    Z = np.zeros
    if r == 1:
        A21, A22 = rng.standard_normal((p, m)), rng.standard_normal((p, p))
        A = np.block([[A11, A12], [A21, A22]])
        B = np.vstack([Z((m, p)), G])
        C = np.hstack([Z((p, m)), np.eye(p)])
    else:
        A13 = rng.standard_normal((m, p)) if A13 is None else A13
        A31, A32, A33 = rng.standard_normal((p, m)), rng.standard_normal((p, p)), rng.standard_normal((p, p))
        A = np.block([[A11, A12, A13], [Z((p, m)), Z((p, p)), np.eye(p)], [A31, A32, A33]])
        B = np.vstack([Z((m + p, p)), G])
        C = np.hstack([Z((p, m)), np.eye(p), Z((p, p))])
    if coords:
        n = A.shape[0]
        T = random_conditioned(rng, n)
        Ti = np.linalg.inv(T)
        A, B, C = Ti @ A @ T, Ti @ B, C @ T
    return StateSpaceModel(A, B, C)


def _dims(rng, r, max_n, max_p):
    p = int(rng.integers(1, max_p + 1))
    m_max = max_n - r * p
    m = int(rng.integers(0, m_max + 1))
    return p, m


def random_eligible_plant(rng, r=None, max_n=12, max_p=3, symmetric_gain=False, mixed=True):
    """Controllable, weakly minimum phase plant of relative degree `r` (random if ``None``).

    With ``mixed`` the internal dynamics combine skew pairs and a Hurwitz
    block whenever the dimension allows.
    """
    r = int(rng.integers(1, 3)) if r is None else r
    p, m = _dims(rng, r, max_n, max_p)
    pairs = int(rng.integers(0, m // 2 + 1)) if mixed else 0
    if mixed and m >= 3 and pairs == 0:
        pairs = 1
    if mixed and m >= 3 and 2 * pairs == m:
        pairs -= 1
    m_b = m - 2 * pairs
    A11 = random_zero_dynamics(rng, pairs, m_b)
    G = _input_gain(rng, p, symmetric_gain)
    sys = assemble_plant(rng, r, A11, p, G)
    return sys, PlantSpec(r, sys.n, p, 2 * pairs, m_b)


def random_min_phase_rd1(rng, max_n=12, max_p=3, symmetric_gain=False):
    """Relative-degree-one plant with Hurwitz zero dynamics."""
    p, m = _dims(rng, 1, max_n, max_p)
    A11 = random_zero_dynamics(rng, 0, m)
    sys = assemble_plant(rng, 1, A11, p, _input_gain(rng, p, symmetric_gain))
    return sys, PlantSpec(1, sys.n, p, 0, m)


def _jordan_pair(w):
    J = np.zeros((4, 4))
    J[:2, :2] = J[2:, 2:] = [[0.0, w], [-w, 0.0]]
    J[:2, 2:] = np.eye(2)
    return J


def random_violating_plant(rng, violation, r=None, max_p=2):
    """Plant violating exactly one synthesis hypothesis.

    `violation` is one of :data:`VIOLATIONS`; the returned spec carries the
    reason code the gate is expected to report.
    """
    r = int(rng.integers(1, 3)) if r is None else r
    p = int(rng.integers(1, max_p + 1))
    G = _input_gain(rng, p, False)
    extra_b = int(rng.integers(0, 3))
    if violation == "not-weakly-minimum-phase-orhp":
        bad = np.array([[rng.uniform(0.2, 2.0)]])
        reason = "not-weakly-minimum-phase"
    elif violation == "not-weakly-minimum-phase-jordan":
        bad = _jordan_pair(rng.uniform(0.5, 3.0))
        reason = "not-weakly-minimum-phase"
    elif violation == "zero-at-origin":
        bad = np.zeros((1, 1))
        reason = "zero-at-origin"
    elif violation == "uncontrollable":
        bad = random_hurwitz(rng, 1) if rng.random() < 0.5 else skew_blocks([rng.uniform(0.5, 3.0)])
        reason = "uncontrollable"
    else:
        raise ValueError(f"unknown violation {violation!r}")
    core = scipy.linalg.block_diag(bad, random_hurwitz(rng, extra_b))
    m = core.shape[0]
    S0 = random_conditioned(rng, m)
    A11 = S0 @ core @ np.linalg.inv(S0)
    A12 = rng.standard_normal((m, p))
    A13 = rng.standard_normal((m, p)) if r == 2 else None
    if violation == "uncontrollable":
        # the bad block receives no input through either channel
        k = bad.shape[0]
        A12c = np.linalg.solve(S0, A12)
        A12c[:k] = 0.0
        A12 = S0 @ A12c
        if r == 2:
            A13c = np.linalg.solve(S0, A13)
            A13c[:k] = 0.0
            A13 = S0 @ A13c
    sys = assemble_plant(rng, r, A11, p, G, A12=A12, A13=A13)
    return sys, PlantSpec(r, sys.n, p, 0, 0, reason)
