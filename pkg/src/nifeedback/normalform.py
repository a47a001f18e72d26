"""Normal-form (special coordinate basis) construction and zero-dynamics split.

Relative degree one uses ``[z; y] = T x`` with ``T = [C_z; C]``; relative
degree two uses ``[z; x1; x2] = T x`` with ``T = [C_z; C; CA]``.  In both
cases ``C_z B = 0`` and the internal dynamics are ``z' = A11 z + ...``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConstructionError, GateError, PreconditionError
from .ltimodel import StateSpaceModel, relative_degree
from .numkernel import DEFAULT_TOL, SpectralClass, Tolerances, classify_spectrum, is_nonsingular

__all__ = [
    "NormalFormRD1",
    "NormalFormRD2",
    "ModalSplit",
    "WeakMinimumPhaseResult",
    "to_normal_form",
    "to_normal_form_rd1",
    "to_normal_form_rd2",
    "modal_split",
    "check_weakly_minimum_phase",
]


def _left_null_rows(M, tol):
    """Orthonormal rows spanning ``{v : v M = 0}`` with a fixed sign convention."""
    n, k = M.shape
    if k == 0:
        return np.eye(n)
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    rank = int(np.sum(s > tol.rank_tol * max(s[0], np.finfo(float).tiny))) if s.size else 0
    N = U[:, rank:].T.copy()
    for row in N:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    return N


@dataclass(frozen=True, eq=False)
class NormalFormRD1:
    """``z' = A11 z + A12 y``, ``y' = A21 z + A22 y + CB u``."""

    T: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    CB: np.ndarray

    relative_degree = 1

    @property
    def m(self) -> int:
        return self.A11.shape[0]

    @property
    def p(self) -> int:
        return self.A22.shape[0]

    @property
    def input_gain(self) -> np.ndarray:
        return self.CB

    @property
    def zero_dynamics_pair(self):
        """The pair whose controllability is equivalent to that of the plant."""
        return self.A11, self.A12

    @property
    def scale(self) -> float:
        """Spectral norm of the normal-form state matrix (reference for tolerances)."""
        return float(np.linalg.norm(self.system().A, 2))

    def system(self) -> StateSpaceModel:
        m, p = self.m, self.p
        A = np.block([[self.A11, self.A12], [self.A21, self.A22]])
        B = np.vstack([np.zeros((m, p)), self.CB])
        C = np.hstack([np.zeros((p, m)), np.eye(p)])
        return StateSpaceModel(A, B, C)


@dataclass(frozen=True, eq=False)
class NormalFormRD2:
    """``z' = A11 z + A12 x1 + A13 x2``, ``x1' = x2``, ``x2' = A31 z + A32 x1 + A33 x2 + CAB u``."""

    T: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A13: np.ndarray
    A31: np.ndarray
    A32: np.ndarray
    A33: np.ndarray
    CAB: np.ndarray

    relative_degree = 2

    @property
    def m(self) -> int:
        return self.A11.shape[0]

    @property
    def p(self) -> int:
        return self.A32.shape[0]

    @property
    def input_gain(self) -> np.ndarray:
        return self.CAB

    @property
    def zero_dynamics_pair(self):
        return self.A11, self.A11 @ self.A13 + self.A12

    @property
    def scale(self) -> float:
        return float(np.linalg.norm(self.system().A, 2))

    def system(self) -> StateSpaceModel:
        m, p = self.m, self.p
        Z = np.zeros
        A = np.block([
            [self.A11, self.A12, self.A13],
            [Z((p, m)), Z((p, p)), np.eye(p)],
            [self.A31, self.A32, self.A33],
        ])
        B = np.vstack([Z((m + p, p)), self.CAB])
        C = np.hstack([Z((p, m)), np.eye(p), Z((p, p))])
        return StateSpaceModel(A, B, C)


def _check_transform(sys, T, tol):
    if not is_nonsingular(T, tol):
        raise ConstructionError("normal-form transformation is singular")
    Ti = np.linalg.inv(T)
    return T @ sys.A @ Ti, T @ sys.B, sys.C @ Ti


def to_normal_form_rd1(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> NormalFormRD1:
    """Normal form of a relative-degree-one plant.

    ``C_z`` is the SVD-ordered orthonormal basis of the left null space of
    ``B`` (rows sign-normalized so their largest entry is positive).
    """
    if relative_degree(sys, tol) != 1:
        raise PreconditionError("plant does not have relative degree one")
    p = sys.p
    Cz = _left_null_rows(sys.B, tol)
    if Cz.shape[0] != sys.n - p:
        raise ConstructionError("B does not have full column rank")
    T = np.vstack([Cz, sys.C])
    At, Bt, Ct = _check_transform(sys, T, tol)
    m = sys.n - p
    scale = max(np.linalg.norm(sys.B), 1.0)
    if np.linalg.norm(Bt[:m]) > tol.residual_tol * scale * 1e3:
        raise ConstructionError("C_z B is not zero")
    return NormalFormRD1(
        T=T,
        A11=At[:m, :m], A12=At[:m, m:], A21=At[m:, :m], A22=At[m:, m:],
        CB=sys.C @ sys.B,
    )


def to_normal_form_rd2(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> NormalFormRD2:
    """Normal form of a relative-degree-two plant.

    ``C_z`` spans the vectors orthogonal to both the columns of ``B`` and the
    rows of ``C``; ``[C_z; C; CA]`` is then nonsingular whenever ``CAB`` is.
    """
    if relative_degree(sys, tol) != 2:
        raise PreconditionError("plant does not have relative degree two")
    n, p = sys.n, sys.p
    m = n - 2 * p
    if m < 0:
        raise ConstructionError("n < 2p for a relative-degree-two plant")
    Cz = _left_null_rows(np.hstack([sys.B, sys.C.T]), tol)
    if Cz.shape[0] != m:
        raise ConstructionError("[B, C^T] does not have full column rank")
    CA = sys.C @ sys.A
    T = np.vstack([Cz, sys.C, CA])
    At, Bt, Ct = _check_transform(sys, T, tol)
    chain = At[m:m + p]
    expected = np.hstack([np.zeros((p, m + p)), np.eye(p)])
    scale = max(np.linalg.norm(At), 1.0)
    if np.linalg.norm(chain - expected) > 1e3 * tol.residual_tol * scale:
        raise ConstructionError("transformed state matrix lacks the x1' = x2 chain")
    s1, s2 = slice(0, m), slice(m, m + p)
    s3 = slice(m + p, n)
    return NormalFormRD2(
        T=T,
        A11=At[s1, s1], A12=At[s1, s2], A13=At[s1, s3],
        A31=At[s3, s1], A32=At[s3, s2], A33=At[s3, s3],
        CAB=CA @ sys.B,
    )


def to_normal_form(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL):
    """Dispatch on relative degree."""
    r = relative_degree(sys, tol)
    return to_normal_form_rd1(sys, tol) if r == 1 else to_normal_form_rd2(sys, tol)


@dataclass(frozen=True, eq=False)
class ModalSplit:
    """``S A11 S^{-1} = diag(A11a, A11b)`` with skew ``A11a`` and Hurwitz ``A11b``."""

    S: np.ndarray
    A11a: np.ndarray
    A11b: np.ndarray

    @property
    def m_a(self) -> int:
        return self.A11a.shape[0]

    @property
    def m_b(self) -> int:
        return self.A11b.shape[0]

    @property
    def m(self) -> int:
        return self.m_a + self.m_b

    @property
    def S_inv(self) -> np.ndarray:
        return np.linalg.inv(self.S)

    @property
    def block_diag(self) -> np.ndarray:
        return scipy.linalg.block_diag(self.A11a, self.A11b)

    @classmethod
    def empty(cls) -> "ModalSplit":
        return cls(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0)))


@dataclass(frozen=True)
class WeakMinimumPhaseResult:
    passed: bool
    reason: str = ""
    offending: tuple = ()

    def __bool__(self):
        return self.passed


def check_weakly_minimum_phase(A11, tol: Tolerances = DEFAULT_TOL, scale: float = 0.0) -> WeakMinimumPhaseResult:
    """Zero dynamics Lyapunov stable and without an eigenvalue at the origin.

    `scale` (typically the norm of the whole normal-form state matrix)
    keeps the axis tolerance meaningful when `A11` itself is tiny.
    """
    A11 = np.asarray(A11, dtype=float)
    if A11.size == 0:
        return WeakMinimumPhaseResult(True)
    spec = classify_spectrum(A11, tol, scale)
    zeros = spec.select(SpectralClass.ZERO)
    rhp = spec.select(SpectralClass.ORHP)
    defective = tuple(
        complex(lam) for lam, c, ss in zip(spec.eigenvalues, spec.classes, spec.semisimple)
        if c in (SpectralClass.IMAGINARY, SpectralClass.ZERO) and not ss
    )
    if rhp.size:
        return WeakMinimumPhaseResult(False, "open-right-half-plane zero dynamics", tuple(complex(x) for x in rhp))
    if defective:
        return WeakMinimumPhaseResult(False, "non-semisimple imaginary-axis zero dynamics", defective)
    if zeros.size:
        return WeakMinimumPhaseResult(False, "zero dynamics eigenvalue at the origin", tuple(complex(x) for x in zeros))
    return WeakMinimumPhaseResult(True)


def _skew_basis(T11, omegas_clusters, tol):
    """Real basis V with ``T11 V = V J``, J block diagonal of ``[[0, w], [-w, 0]]``."""
    k = T11.shape[0]
    cols, blocks = [], []
    for omega, mult in omegas_clusters:
        _, s, Vh = np.linalg.svd(1j * omega * np.eye(k) - T11)
        null = Vh[k - mult:].conj().T
        for v in null.T:
            cols.extend([v.real, v.imag])
            blocks.append(np.array([[0.0, omega], [-omega, 0.0]]))
    V = np.column_stack(cols) if cols else np.zeros((k, 0))
    return V, blocks


def modal_split(A11, tol: Tolerances = DEFAULT_TOL, scale: float = 0.0) -> ModalSplit:
    """Split Lyapunov-stable, nonsingular zero dynamics into skew and Hurwitz parts.

    Real Schur form with the imaginary-axis eigenvalues ordered first, a
    Sylvester solve to remove the coupling block, then a real eigenvector
    basis that maps each conjugate pair ``+-j w`` onto
    ``[[0, w], [-w, 0]]``.  ``A11a`` is constructed exactly skew-symmetric.

    Raises
    ------
    GateError
        With reason ``"zero-at-origin"`` or ``"not-weakly-minimum-phase"``.
    """
    A11 = np.asarray(A11, dtype=float)
    m = A11.shape[0]
    if m == 0:
        return ModalSplit.empty()
    wmp = check_weakly_minimum_phase(A11, tol, scale)
    if not wmp:
        reason = "zero-at-origin" if "origin" in wmp.reason else "not-weakly-minimum-phase"
        raise GateError(f"cannot split zero dynamics: {wmp.reason}", reason)

    axis = tol.axis_tol(A11, scale)
    T, U, k = scipy.linalg.schur(A11, output="real", sort=lambda re, im: abs(re) <= axis)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    if k and k < m:
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    else:
        X = np.zeros((k, m - k))
    W_inv = np.eye(m)
    W_inv[:k, k:] = -X

    if k:
        eigs = np.linalg.eigvals(T11)
        upper = eigs[eigs.imag > 0]
        if 2 * upper.size != k:
            raise ConstructionError("imaginary-axis eigenvalues do not pair up")
        clusters = []
        radius = max(axis, 1e-6 * np.linalg.norm(A11, 2))
        remaining = np.sort(upper.imag)
        while remaining.size:
            group = remaining[np.abs(remaining - remaining[0]) <= radius]
            clusters.append((float(group.mean()), group.size))
            remaining = remaining[group.size:]
        V, blocks = _skew_basis(T11, clusters, tol)
        if V.shape[1] != k or not is_nonsingular(V, tol):
            raise ConstructionError("could not build a real eigenbasis for the imaginary-axis part")
        Sa = np.linalg.inv(V)
        A11a = scipy.linalg.block_diag(*blocks)
    else:
        Sa = np.zeros((0, 0))
        A11a = np.zeros((0, 0))

    S = scipy.linalg.block_diag(Sa, np.eye(m - k)) @ W_inv @ U.T
    return ModalSplit(S=S, A11a=A11a, A11b=T22.copy())
