"""State-space models, transfer-function evaluation and frequency sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PoleEvaluationError, UnsupportedRelativeDegreeError
from .numkernel import DEFAULT_TOL, Tolerances, is_nonsingular, pbh_controllable, pbh_observable

__all__ = [
    "StateSpaceModel",
    "FrequencySample",
    "eval_tf",
    "relative_degree",
    "dc_gain",
    "freq_sweep",
    "is_minimal",
    "transform",
    "siso_tf_coefficients",
    "logspace_grid",
]


def _frozen(M):
    M = np.array(M, dtype=float)
    M.setflags(write=False)
    return M


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Continuous-time model ``x' = A x + B u, y = C x + D u`` with square ``D``.

    Matrices are copied and made read-only on construction.  ``n = 0`` is
    allowed and denotes a static gain ``y = D u``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float)) if np.size(self.A) else np.zeros((0, 0))
        n = A.shape[0]
        if A.ndim != 2 or A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {A.shape}")
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got shape {B.shape}")
        p = B.shape[1]
        if C.ndim != 2 or C.shape != (p, n):
            raise DimensionError(f"C must have shape {(p, n)}, got {C.shape}")
        D = np.zeros((p, p)) if self.D is None else np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.shape != (p, p):
            raise DimensionError(f"D must have shape {(p, p)}, got {D.shape}")
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(M)):
                raise DimensionError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, _frozen(M))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def is_static(self) -> bool:
        return self.n == 0

    @property
    def is_strictly_proper(self) -> bool:
        return not np.any(self.D)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<StateSpaceModel{label} n={self.n} p={self.p}>"


@dataclass(frozen=True)
class FrequencySample:
    """Frequency response ``R(j omega)`` at one grid point.

    ``at_pole`` marks grid points where ``j omega`` is (numerically) a pole;
    their ``response`` is filled with NaN.
    """

    omega: float
    response: np.ndarray
    at_pole: bool = False


def _pole_guard(sys, s, tol):
    if sys.n == 0:
        return
    eigs = np.linalg.eigvals(sys.A)
    k = int(np.argmin(np.abs(eigs - s)))
    dist = abs(eigs[k] - s)
    scale = max(np.linalg.norm(sys.A, 2), abs(s), 1.0)
    if dist <= max(tol.axis_tol(sys.A), 1e-13 * scale):
        raise PoleEvaluationError(f"s = {s} is a pole (nearest eigenvalue {eigs[k]})", eigs[k])
    if np.linalg.cond(s * np.eye(sys.n) - sys.A) > 1e14:
        raise PoleEvaluationError(f"sI - A is numerically singular at s = {s}", eigs[k])


def eval_tf(sys: StateSpaceModel, s: complex, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Evaluate ``C (sI - A)^{-1} B + D`` at a complex point `s`."""
    _pole_guard(sys, s, tol)
    if sys.n == 0:
        return sys.D.astype(complex)
    X = np.linalg.solve(s * np.eye(sys.n) - sys.A, sys.B.astype(complex))
    return sys.C @ X + sys.D


def relative_degree(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> int:
    """Return 1 if ``CB`` is nonsingular, 2 if ``CB = 0`` and ``CAB`` is nonsingular.

    Raises
    ------
    UnsupportedRelativeDegreeError
        Any other case (including ``D != 0``).
    """
    if not sys.is_strictly_proper:
        raise UnsupportedRelativeDegreeError("plant has direct feedthrough (D != 0)")
    A, B, C = sys.A, sys.B, sys.C
    CB = C @ B
    tiny = np.finfo(float).tiny
    scale = max(np.linalg.norm(C, 2) * np.linalg.norm(B, 2), tiny)
    # rounding leaves CB ~ eps * ||C|| ||B|| for relative degree two; test that
    # first, since such a residue is "nonsingular" relative to its own norm
    if np.linalg.norm(CB, 2) <= tol.residual_tol * scale:
        CAB = C @ A @ B
        cab_scale = max(scale * np.linalg.norm(A, 2), tiny)
        if np.linalg.norm(CAB, 2) > tol.residual_tol * cab_scale and is_nonsingular(CAB, tol):
            return 2
    elif is_nonsingular(CB, tol):
        return 1
    raise UnsupportedRelativeDegreeError(
        "relative degree is neither one (CB nonsingular) nor two (CB = 0, CAB nonsingular); "
        "mixed and higher relative degrees are not supported"
    )


def dc_gain(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``R(0) = D - C A^{-1} B``."""
    if sys.n == 0:
        return sys.D.copy()
    if not is_nonsingular(sys.A, tol):
        eigs = np.linalg.eigvals(sys.A)
        raise PoleEvaluationError("A is singular: pole at the origin", eigs[np.argmin(np.abs(eigs))])
    return sys.D - sys.C @ np.linalg.solve(sys.A, sys.B)


def freq_sweep(sys: StateSpaceModel, omega_grid, tol: Tolerances = DEFAULT_TOL) -> list:
    """Frequency response on a grid of positive frequencies.

    Each sample depends only on its own frequency, so the output does not
    depend on evaluation order.  Grid points at poles are returned with
    ``at_pole=True`` rather than dropped.
    """
    omega = np.asarray(omega_grid, dtype=float).ravel()
    if omega.size == 0:
        return []
    if np.any(omega <= 0) or np.any(np.diff(omega) < 0):
        raise ValueError("frequency grid must be strictly positive and sorted")
    p = sys.p
    if sys.n == 0:
        return [FrequencySample(float(w), sys.D.astype(complex)) for w in omega]
    eigs = np.linalg.eigvals(sys.A)
    axis = max(tol.axis_tol(sys.A), 1e-13 * max(np.linalg.norm(sys.A, 2), 1.0))
    out = []
    n = sys.n
    for w in omega:
        s = 1j * w
        if np.min(np.abs(eigs - s)) <= axis or np.linalg.cond(s * np.eye(n) - sys.A) > 1e14:
            out.append(FrequencySample(float(w), np.full((p, p), np.nan + 0j), True))
            continue
        X = np.linalg.solve(s * np.eye(n) - sys.A, sys.B.astype(complex))
        out.append(FrequencySample(float(w), sys.C @ X + sys.D))
    return out


def is_minimal(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Controllable and observable (PBH)."""
    return pbh_controllable(sys.A, sys.B, tol) and pbh_observable(sys.A, sys.C, tol)


def transform(sys: StateSpaceModel, T) -> StateSpaceModel:
    """Apply the state transformation ``xi = T x``."""
    T = np.asarray(T, dtype=float)
    Ti = np.linalg.inv(T)
    return StateSpaceModel(T @ sys.A @ Ti, T @ sys.B, sys.C @ Ti, sys.D, name=sys.name)


def siso_tf_coefficients(sys: StateSpaceModel):
    """Numerator and denominator coefficients (highest power first) of a SISO model.

    Uses ``C adj(sI - A) B = det(sI - A + B C) - det(sI - A)``, so the
    denominator is the characteristic polynomial of `A` (not cancelled).
    """
    if sys.p != 1:
        raise DimensionError("transfer-function coefficients are only defined for SISO models")
    den = np.real(np.poly(sys.A)) if sys.n else np.array([1.0])
    num = np.real(np.poly(sys.A - sys.B @ sys.C)) - den if sys.n else np.array([0.0])
    num = num + sys.D[0, 0] * den
    nz = np.flatnonzero(np.abs(num) > 1e-12 * max(1.0, np.max(np.abs(num))))
    num = num[nz[0]:] if nz.size else np.array([0.0])
    return num, den


def logspace_grid(lo: float, hi: float, points: int) -> np.ndarray:
    """Logarithmically spaced grid of `points` frequencies in ``[lo, hi]``."""
    if not (0 < lo <= hi) or points < 1:
        raise ValueError("need 0 < lo <= hi and points >= 1")
    if points == 1:
        return np.array([float(lo)])
    return np.logspace(np.log10(lo), np.log10(hi), points)
