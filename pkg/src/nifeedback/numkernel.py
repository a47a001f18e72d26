"""Dense linear-algebra primitives shared by every other module.

Definiteness tests, positive definite square roots, a Bartels-Stewart
Lyapunov solver, spectral classification with semisimplicity flags and
the PBH (eigenvector) rank tests for controllability and observability.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError, PreconditionError

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "SpectralClass",
    "SpectralClassification",
    "classify_spectrum",
    "solve_lyapunov",
    "solve_lyapunov_kron",
    "sqrt_pd",
    "sym",
    "is_psd",
    "is_pd",
    "is_nsd",
    "is_nd",
    "pbh_controllable",
    "pbh_observable",
    "is_nonsingular",
]

# Semisimplicity is decided on eigenvalue clusters; a defective eigenvalue
# splits by O(sqrt(eps)) under rounding, so clusters need this much slack.
_CLUSTER_RTOL = 1e-6


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances.

    Attributes
    ----------
    eig_axis_tol : float
        Eigenvalues with ``|Re(lambda)| <= eig_axis_tol * ||A||_2`` are
        treated as lying on the imaginary axis.
    rank_tol : float
        Relative singular-value cutoff for rank and nonsingularity tests.
    psd_tol : float
        Absolute slack allowed below zero in semidefinite checks.
    residual_tol : float
        Relative bound for equality residuals.
    """

    eig_axis_tol: float = 1e-8
    rank_tol: float = 1e-10
    psd_tol: float = 1e-9
    residual_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eig_axis_tol", "rank_tol", "psd_tol", "residual_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise PreconditionError(f"{name} must be finite and >= 0, got {value!r}")

    def axis_tol(self, A, scale: float = 0.0) -> float:
        """Absolute imaginary-axis tolerance for the matrix `A`.

        `scale` is an optional reference magnitude (for instance the norm of
        the plant a block was extracted from) that the tolerance never drops
        below; a tiny block would otherwise get a tiny tolerance.
        """
        A = np.asarray(A)
        if A.size == 0:
            return 0.0
        return self.eig_axis_tol * max(np.linalg.norm(A, 2), scale)


DEFAULT_TOL = Tolerances()


class SpectralClass(str, enum.Enum):
    OLHP = "open-left-half-plane"
    IMAGINARY = "purely-imaginary-nonzero"
    ZERO = "zero"
    ORHP = "open-right-half-plane"


@dataclass(frozen=True)
class SpectralClassification:
    """Eigenvalues of a real matrix, tagged by location and semisimplicity."""

    eigenvalues: np.ndarray
    classes: tuple
    semisimple: tuple

    @property
    def is_hurwitz(self) -> bool:
        return all(c is SpectralClass.OLHP for c in self.classes)

    @property
    def is_lyapunov_stable(self) -> bool:
        for c, ss in zip(self.classes, self.semisimple):
            if c is SpectralClass.ORHP:
                return False
            if c in (SpectralClass.IMAGINARY, SpectralClass.ZERO) and not ss:
                return False
        return True

    def select(self, *classes) -> np.ndarray:
        """Eigenvalues whose tag is one of `classes`."""
        mask = [c in classes for c in self.classes]
        return self.eigenvalues[np.array(mask, dtype=bool)]


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def sym(M):
    """Symmetric part ``(M + M^T) / 2``."""
    M = np.asarray(M)
    return 0.5 * (M + M.T)


def _clusters(values, radius):
    """Group complex values into connected components of the `radius` graph."""
    n = len(values)
    labels = -np.ones(n, dtype=int)
    current = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = current
        while stack:
            k = stack.pop()
            near = np.flatnonzero((np.abs(values - values[k]) <= radius) & (labels < 0))
            labels[near] = current
            stack.extend(near.tolist())
        current += 1
    return [np.flatnonzero(labels == c) for c in range(current)]


def classify_spectrum(A, tol: Tolerances = DEFAULT_TOL, scale: float = 0.0) -> SpectralClassification:
    """Tag every eigenvalue of `A` by half-plane and check semisimplicity.

    An eigenvalue within ``tol.axis_tol(A)`` of the imaginary axis is tagged
    imaginary (or zero when its modulus is also within that tolerance), never
    left or right.

    Semisimplicity is decided per eigenvalue cluster: a cluster of ``k``
    computed eigenvalues around ``mu`` is semisimple when ``mu*I - A`` has
    ``k`` singular values below the rank threshold, widened by the cluster's
    own spread (a diagonalizable matrix perturbed by rounding keeps its
    eigenvector count; a defective one does not).

    `scale` is a reference magnitude passed through to
    :meth:`Tolerances.axis_tol`.
    """
    A = _square(A)
    n = A.shape[0]
    if n == 0:
        return SpectralClassification(np.zeros(0, dtype=complex), (), ())
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix contains non-finite entries")
    try:
        eigs = scipy.linalg.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("eigenvalue computation failed", diagnostic=str(exc)) from exc

    axis = tol.axis_tol(A, scale)
    scale = max(np.linalg.norm(A, 2), scale)
    classes = []
    for lam in eigs:
        if abs(lam.real) <= axis:
            classes.append(SpectralClass.ZERO if abs(lam) <= axis else SpectralClass.IMAGINARY)
        elif lam.real < 0:
            classes.append(SpectralClass.OLHP)
        else:
            classes.append(SpectralClass.ORHP)

    semisimple = np.ones(n, dtype=bool)
    radius = max(axis, _CLUSTER_RTOL * scale)
    for idx in _clusters(eigs, radius):
        k = len(idx)
        if k == 1:
            continue
        mu = eigs[idx].mean()
        spread = np.max(np.abs(eigs[idx] - mu))
        sv = np.linalg.svd(mu * np.eye(n) - A, compute_uv=False)
        thresh = tol.rank_tol * max(scale, 1.0) + 1e3 * spread
        nullity = int(np.sum(sv <= thresh))
        semisimple[idx] = nullity >= k
    return SpectralClassification(eigs, tuple(classes), tuple(bool(s) for s in semisimple))


def _lyap_check(A, Q):
    A = _square(A)
    Q = _square(Q, "Q")
    if Q.shape != A.shape:
        raise DimensionError(f"Q has shape {Q.shape}, expected {A.shape}")
    return A, Q


def solve_lyapunov_kron(A, Q):
    """Solve ``A Y + Y A^T = -Q`` by a dense Kronecker-product linear solve.

    Cost is ``O(n^6)``; this is the reference oracle and small-``n``
    fallback for :func:`solve_lyapunov`.
    """
    A, Q = _lyap_check(A, Q)
    n = A.shape[0]
    eye = np.eye(n)
    # column-major vec: vec(A Y) = (I kron A) vec(Y), vec(Y A^T) = (A kron I) vec(Y)
    L = np.kron(eye, A) + np.kron(A, eye)
    y = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    Y = y.reshape(n, n, order="F")
    return sym(Y)


def _schur_blocks(T):
    """Start/stop indices of the 1x1 and 2x2 diagonal blocks of a real Schur form."""
    n = T.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append((i, i + 2))
            i += 2
        else:
            blocks.append((i, i + 1))
            i += 1
    return blocks


def _bartels_stewart(A, Q):
    T, U = scipy.linalg.schur(A, output="real")
    C = -(U.T @ Q @ U)
    n = A.shape[0]
    X = np.zeros((n, n))
    blocks = _schur_blocks(T)
    # T X + X T^T = C with T quasi upper triangular: sweep block rows and
    # columns from the bottom-right corner, filling X symmetrically.
    for bi in range(len(blocks) - 1, -1, -1):
        i0, i1 = blocks[bi]
        for bj in range(bi, -1, -1):
            j0, j1 = blocks[bj]
            rhs = C[i0:i1, j0:j1].copy()
            rhs -= T[i0:i1, i1:] @ X[i1:, j0:j1]
            rhs -= X[i0:i1, j1:] @ T[j0:j1, j1:].T
            Tii = T[i0:i1, i0:i1]
            Tjj = T[j0:j1, j0:j1]
            ki, kj = i1 - i0, j1 - j0
            L = np.kron(np.eye(kj), Tii) + np.kron(Tjj, np.eye(ki))
            blk = np.linalg.solve(L, rhs.reshape(-1, order="F")).reshape(ki, kj, order="F")
            X[i0:i1, j0:j1] = blk
            X[j0:j1, i0:i1] = blk.T
    return sym(U @ X @ U.T)


def solve_lyapunov(A, Q, tol: Tolerances = DEFAULT_TOL, check_stability: bool = True):
    """Solve ``A Y + Y A^T = -Q`` for Hurwitz `A` and symmetric PD `Q`.

    Uses the Bartels-Stewart method: `A` is reduced to real Schur form and
    the transformed equation is back-substituted over the 1x1/2x2 diagonal
    blocks.  If the residual check fails and ``n <= 50`` the Kronecker solve
    is tried before giving up.

    Parameters
    ----------
    A : (n, n) array_like
        Hurwitz matrix.
    Q : (n, n) array_like
        Symmetric positive definite right-hand side.
    tol : Tolerances
    check_stability : bool
        Verify that `A` is Hurwitz first (default True).

    Returns
    -------
    Y : (n, n) ndarray
        Symmetric positive definite solution.

    Raises
    ------
    PreconditionError
        If `A` is not Hurwitz or `Q` is not symmetric PD.
    NumericalError
        If neither solve meets ``||A Y + Y A^T + Q|| <= residual_tol (1 + ||Q||)``.
    """
    A, Q = _lyap_check(A, Q)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if check_stability and not classify_spectrum(A, tol).is_hurwitz:
        raise PreconditionError("Lyapunov solve requires a Hurwitz matrix")
    if not is_pd(Q, tol):
        raise PreconditionError("Q must be symmetric positive definite")
    Q = sym(Q)
    bound = tol.residual_tol * (1.0 + np.linalg.norm(Q))

    def residual(Y):
        return np.linalg.norm(A @ Y + Y @ A.T + Q)

    attempts = []
    try:
        Y = _bartels_stewart(A, Q)
        r = residual(Y)
        if r <= bound and np.all(np.isfinite(Y)):
            return Y
        attempts.append(("bartels-stewart", r))
    except np.linalg.LinAlgError as exc:
        attempts.append(("bartels-stewart", str(exc)))
    if n <= 50:
        try:
            Y = solve_lyapunov_kron(A, Q)
            r = residual(Y)
            if r <= bound and np.all(np.isfinite(Y)):
                return Y
            attempts.append(("kronecker", r))
        except np.linalg.LinAlgError as exc:
            attempts.append(("kronecker", str(exc)))
    raise NumericalError("Lyapunov solve did not meet the residual bound", diagnostic=attempts)


def _sym_eigvalsh(M, tol):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return np.zeros(0)
    asym = np.linalg.norm(M - M.T)
    if asym > tol.residual_tol * max(1.0, np.linalg.norm(M)):
        raise PreconditionError(f"matrix is not symmetric (||M - M^T|| = {asym:.3e})")
    return np.linalg.eigvalsh(sym(M))


def is_psd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff the symmetric matrix `M` has min eigenvalue ``>= -psd_tol``."""
    w = _sym_eigvalsh(M, tol)
    return bool(w.size == 0 or w[0] >= -tol.psd_tol)


def is_pd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff the symmetric matrix `M` has min eigenvalue ``> psd_tol``."""
    w = _sym_eigvalsh(M, tol)
    return bool(w.size == 0 or w[0] > tol.psd_tol)


def is_nsd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    w = _sym_eigvalsh(M, tol)
    return bool(w.size == 0 or w[-1] <= tol.psd_tol)


def is_nd(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    w = _sym_eigvalsh(M, tol)
    return bool(w.size == 0 or w[-1] < -tol.psd_tol)


def sqrt_pd(M, tol: Tolerances = DEFAULT_TOL):
    """Unique symmetric positive definite square root of a PD matrix."""
    w = _sym_eigvalsh(M, tol)
    if w.size and w[0] <= tol.psd_tol:
        raise PreconditionError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    w, V = np.linalg.eigh(sym(np.asarray(M, dtype=float)))
    S = (V * np.sqrt(w)) @ V.T
    return sym(S)


def is_nonsingular(M, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Smallest singular value above ``rank_tol`` times the matrix 2-norm."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    if M.shape[0] != M.shape[1]:
        return False
    sv = np.linalg.svd(M, compute_uv=False)
    return bool(sv[-1] > tol.rank_tol * max(sv[0], np.finfo(float).tiny))


def _pbh(A, B, tol):
    n = A.shape[0]
    if n == 0:
        return True
    if B.shape[0] != n:
        raise DimensionError(f"input matrix has {B.shape[0]} rows, expected {n}")
    scale = max(np.linalg.norm(np.hstack([A, B]), 2), np.finfo(float).tiny)
    thresh = tol.rank_tol * scale
    for lam in scipy.linalg.eigvals(A):
        M = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[n - 1] <= thresh:
            return False
    return True


def pbh_controllable(A, B, tol: Tolerances = DEFAULT_TOL) -> bool:
    """PBH test: ``rank([lambda I - A, B]) = n`` at every eigenvalue of `A`."""
    A = _square(A)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    return _pbh(A, B, tol)


def pbh_observable(A, C, tol: Tolerances = DEFAULT_TOL) -> bool:
    """PBH test: ``rank([lambda I - A; C]) = n`` at every eigenvalue of `A`."""
    A = _square(A)
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    return _pbh(A.T, C.T, tol)
