"""Robust stabilization against strictly negative imaginary uncertainty.

The uncertain plant is ``x' = A x + B (u + w)``, ``y = C x`` with
``w = Delta(s) y``.  A state feedback that makes the ``w -> y`` map NI
with DC gain ``Y2`` stabilizes every SNI ``Delta`` with
``lambda_max(Delta(0)) <= gamma`` as soon as ``lambda_max(Y2) < 1/gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import NumericalError, OptionError, PreconditionError, WellPosednessError
from .ltimodel import StateSpaceModel, dc_gain, freq_sweep, logspace_grid
from .nisynth import SynthesisOptions, SynthesisResult, gate_feedback_equivalence, synth_ni_rd1, synth_ni_rd2
from .niverify import hermitian_imaginary_part
from .numkernel import DEFAULT_TOL, Tolerances, classify_spectrum

__all__ = [
    "UncertainPlant",
    "Interconnection",
    "Trajectory",
    "synth_robust",
    "build_interconnection",
    "sample_sni_uncertainty",
    "first_order_lag",
    "zero_uncertainty",
    "loop_dc_gain",
    "simulate",
    "DEFAULT_Y2_FRACTION",
]

DEFAULT_Y2_FRACTION = 0.9


@dataclass(frozen=True, eq=False)
class UncertainPlant:
    nominal: StateSpaceModel
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not np.isfinite(g) or g <= 0:
            raise OptionError(f"gamma must be positive and finite, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)


def synth_robust(up: UncertainPlant, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """State feedback whose ``w -> y`` closed loop is NI with ``lambda_max(R(0)) < 1/gamma``.

    The default ``Y2`` is ``0.9/gamma * I``.  A caller-supplied ``Y2`` that
    violates the bound raises :class:`OptionError`.  Because ``w`` enters
    through ``B``, the construction runs with channel gain ``CB`` (or
    ``CAB``); see :mod:`nifeedback.nisynth` for the conditions this puts on
    that matrix.
    """
    opts = opts or SynthesisOptions()
    gate = gate_feedback_equivalence(up.nominal, tol)
    gate.raise_if_ineligible()
    nf = gate.nf
    p = nf.p
    if opts.Y2 is None:
        opts = replace(opts, Y2=DEFAULT_Y2_FRACTION / up.gamma * np.eye(p))
    Y2 = opts.Y2_matrix(p, tol)
    lam = float(np.linalg.eigvalsh(Y2)[-1])
    if lam >= 1.0 / up.gamma:
        raise OptionError(f"lambda_max(Y2) = {lam:.6g} violates the bound 1/gamma = {1.0 / up.gamma:.6g}")
    synth = synth_ni_rd1 if nf.relative_degree == 1 else synth_ni_rd2
    return synth(nf, opts, tol, channel_gain=nf.input_gain, plant=up.nominal)


@dataclass(frozen=True, eq=False)
class Interconnection:
    """Positive-feedback loop ``w = Delta y`` around the closed loop ``R``."""

    closed_loop: StateSpaceModel
    delta: StateSpaceModel
    combined_A: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.combined_A) if self.combined_A.size else np.zeros(0, dtype=complex)

    def is_hurwitz(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return classify_spectrum(self.combined_A, tol).is_hurwitz

    @property
    def spectral_abscissa(self) -> float:
        eigs = self.eigenvalues
        return float(np.max(eigs.real)) if eigs.size else -np.inf


def build_interconnection(cl: StateSpaceModel, delta: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> Interconnection:
    """State matrix of the positive-feedback interconnection ``[R, Delta]``.

    Raises
    ------
    WellPosednessError
        ``I - D_R D_Delta`` is singular (the loop has no unique solution).
    """
    if cl.p != delta.p:
        raise PreconditionError(f"R is {cl.p}x{cl.p} but Delta is {delta.p}x{delta.p}")
    p = cl.p
    L = np.eye(p) - cl.D @ delta.D
    if np.linalg.svd(L, compute_uv=False)[-1] <= tol.rank_tol:
        raise WellPosednessError("I - R(inf) Delta(inf) is singular: the loop is not well posed")
    E = np.linalg.inv(L)
    # y = E (C x + D Cd xd), w = Cd xd + Dd y
    Yx, Yd = E @ cl.C, E @ cl.D @ delta.C
    Wx, Wd = delta.D @ Yx, delta.C + delta.D @ Yd
    A = np.block([
        [cl.A + cl.B @ Wx, cl.B @ Wd],
        [delta.B @ Yx, delta.A + delta.B @ Yd],
    ])
    return Interconnection(cl, delta, A)


def loop_dc_gain(cl: StateSpaceModel, delta: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> float:
    """``lambda_max(R(0) Delta(0))`` (real part of the dominant eigenvalue)."""
    eigs = np.linalg.eigvals(dc_gain(cl, tol) @ dc_gain(delta, tol))
    return float(np.max(eigs.real))


def zero_uncertainty(p: int) -> StateSpaceModel:
    """``Delta = 0`` as a static model."""
    return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, p)), np.zeros((p, 0)), np.zeros((p, p)), name="zero")


def first_order_lag(gain, pole) -> StateSpaceModel:
    """SISO ``gain / (s + pole)``."""
    return StateSpaceModel([[-float(pole)]], [[1.0]], [[float(gain)]], name=f"{gain}/(s+{pole})")


def sample_sni_uncertainty(p: int, gamma: float, seed=None, max_terms: int = 3,
                           tol: Tolerances = DEFAULT_TOL) -> StateSpaceModel:
    """Random diagonal SNI uncertainty built from first-order lags.

    Each diagonal entry is ``sum_k c_k / (s + a_k)`` with ``a_k, c_k > 0``,
    scaled so its DC gain lies in ``[0.2 gamma, gamma]``.  ``gamma = 0``
    gives the static zero system.
    """
    if p < 1:
        raise PreconditionError("p must be at least 1")
    if not np.isfinite(gamma) or gamma < 0:
        raise OptionError("gamma must be finite and nonnegative")
    if gamma == 0:
        return zero_uncertainty(p)
    rng = np.random.default_rng(seed)
    poles, chans, gains = [], [], []
    for i in range(p):
        k = int(rng.integers(1, max_terms + 1))
        a = rng.uniform(0.2, 5.0, k)
        c = rng.uniform(0.1, 1.0, k)
        target = rng.uniform(0.2, 1.0) * gamma
        c *= target / np.sum(c / a)
        poles.extend(a)
        gains.extend(c)
        chans.extend([i] * k)
    nd = len(poles)
    A = -np.diag(poles)
    B = np.zeros((nd, p))
    C = np.zeros((p, nd))
    for j, (i, c) in enumerate(zip(chans, gains)):
        B[j, i] = 1.0
        C[i, j] = c
    delta = StateSpaceModel(A, B, C, name=f"sampled SNI (seed {seed})")
    # first-order lags with positive residues are SNI; confirm on a sweep
    for smp in freq_sweep(delta, logspace_grid(1e-3, 1e3, 60), tol):
        M = hermitian_imaginary_part(smp.response)
        lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]
        if lam <= 0:
            raise NumericalError("sampled uncertainty failed its SNI sweep", {"omega": smp.omega})
    return delta


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    diverged: bool = False
    diverged_at: float = None

    @property
    def final_state(self) -> np.ndarray:
        return self.x[-1]


def _input_fn(u, p, t):
    if u is None:
        return lambda s: np.zeros(p)
    if callable(u):
        return lambda s: np.asarray(u(s), dtype=float).reshape(p)
    U = np.asarray(u, dtype=float).reshape(len(t), p)
    return lambda s: np.array([np.interp(s, t, U[:, j]) for j in range(p)])


def simulate(sys: StateSpaceModel, x0, u=None, dt: float = None, horizon: float = 20.0,
             blowup: float = 1e12) -> Trajectory:
    """Fixed-step RK4 integration of ``x' = A x + B u``, ``y = C x + D u``.

    `u` is ``None`` (zero input), a callable ``t -> u(t)``, or samples on
    the time grid (linearly interpolated at the half steps).  The default
    step is ``1e-3 / max(1, spectral radius of A)``.  A state that becomes
    non-finite or exceeds `blowup` in norm ends the run with
    ``diverged=True``; this is a result, not an error.
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    n, p = sys.n, sys.p
    x0 = np.asarray(x0, dtype=float).reshape(n)
    if dt is None:
        rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if n else 0.0
        dt = 1e-3 / max(1.0, rho)
    if not (dt > 0) or not (horizon >= dt):
        raise PreconditionError("need dt > 0 and horizon >= dt")
    steps = int(np.ceil(horizon / dt - 1e-9))
    t = np.arange(steps + 1) * dt
    uf = _input_fn(u, p, t)
    X = np.empty((steps + 1, n))
    X[0] = x0

    def f(s, x):
        return A @ x + B @ uf(s)

    def outputs(t, X):
        Y = X @ C.T
        if u is not None and np.any(D):
            Y = Y + np.array([D @ uf(s) for s in t])
        return Y

    x = x0
    for k in range(steps):
        s = t[k]
        k1 = f(s, x)
        k2 = f(s + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(s + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(s + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > blowup:
            X = X[: k + 1]
            t = t[: k + 1]
            return Trajectory(t, X, outputs(t, X), True, float(s + dt))
        X[k + 1] = x
    return Trajectory(t, X, outputs(t, X))
