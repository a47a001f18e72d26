"""State-feedback synthesis of negative imaginary closed loops.

Everything is built in *modal* normal-form coordinates: the internal state
``z`` is replaced by ``S z`` so that the zero dynamics read
``diag(A11a, A11b)`` (skew and Hurwitz parts).  Gains are then pulled back
through ``S`` and the normal-form transformation ``T`` to act on the
original state.

Channel gain
------------
The closed-loop input enters the last block row as ``G v``.  Plain NI
synthesis uses ``G = I`` (the new input ``v`` is injected after the input
matrix is inverted).  When the input is a disturbance ``w`` that enters
like ``u`` (``x' = A x + B (u + w)``), ``G`` is ``CB`` or ``CAB``.  The
constructions below carry ``G`` through:

* relative degree one needs ``G + G^T > 0`` and uses
  ``K1 Y1 = -G A12^T A11^{-T} + [0, Hb]``,
  ``Hb^T (G + G^T)^{-1} Hb <= Qb`` and ``K2 = K1 A11^{-1} A12 - G Y2^{-1}``;
* relative degree two needs ``G = G^T > 0``; the ``x2`` block of the
  certificate is ``G`` and
  ``K1 Y1 = -G A12^T A11^{-T} - G A13^T + [0, E Hb]`` with
  ``E = (-(K3 G + G K3^T))^{1/2}`` and ``Hb^T Hb <= Qb``.

With ``G = I`` these are the textbook formulas.  In every case the DC gain
of the closed loop is ``Y2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import GateError, OptionError, PreconditionError, SynthesisError, UnsupportedRelativeDegreeError
from .ltimodel import StateSpaceModel, relative_degree
from .niverify import VerificationReport, verify_ni_certificate, verify_ssni_certificate
from .normalform import (
    ModalSplit,
    NormalFormRD1,
    NormalFormRD2,
    check_weakly_minimum_phase,
    modal_split,
    to_normal_form,
)
from .numkernel import (
    DEFAULT_TOL,
    SpectralClass,
    Tolerances,
    classify_spectrum,
    pbh_controllable,
    pbh_observable,
    solve_lyapunov,
    sqrt_pd,
    sym,
)

__all__ = [
    "SynthesisOptions",
    "SynthesisResult",
    "GateResult",
    "SSNIRefusal",
    "REASON_CODES",
    "gate_feedback_equivalence",
    "gate_ssni",
    "synth_ni_rd1",
    "synth_ni_rd1_m0",
    "synth_ni_rd2",
    "synth_ni_rd2_m0",
    "synth_ssni_rd1",
    "ssni_rd2_refusal",
    "compose_original_feedback",
    "synth_ni",
    "synth_ssni",
]

REASON_CODES = (
    "bad-relative-degree",
    "uncontrollable",
    "zero-at-origin",
    "not-weakly-minimum-phase",
    "not-minimum-phase",
)


def _as_matrix(value, k, name):
    """Scalar shorthand ``c`` means ``c * I``; ``None`` stays ``None``."""
    if value is None:
        return None
    M = np.asarray(value, dtype=float)
    if M.ndim == 0:
        return float(M) * np.eye(k)
    M = np.atleast_2d(M)
    if M.shape != (k, k):
        raise OptionError(f"{name} must be {k}x{k}, got shape {M.shape}")
    return M


def _require_pd(M, name, tol):
    if np.linalg.norm(M - M.T) > tol.residual_tol * max(1.0, np.linalg.norm(M)):
        raise OptionError(f"{name} must be symmetric")
    if M.size and np.linalg.eigvalsh(sym(M))[0] <= tol.psd_tol:
        raise OptionError(f"{name} must be positive definite")
    return sym(M)


@dataclass(frozen=True)
class SynthesisOptions:
    """Free parameters of the constructions.

    Matrix-valued fields accept a scalar ``c`` as shorthand for ``c * I``.
    ``None`` selects the default: ``Qb = I``, ``Y2 = I``, ``K3 = -I``.

    ``hb_strategy`` is ``"zero-first"`` (try ``Hb = 0``, then seeded random
    draws) or ``"random"`` (random draws only).  An explicit ``Hb`` bypasses
    the search.
    """

    Qb: object = None
    Y1b_override: object = None
    y1a: float = 1.0
    Y2: object = None
    K3: object = None
    hb_strategy: str = "zero-first"
    seed: int = 0
    max_tries: int = 64
    Hb: object = None

    def __post_init__(self):
        if not np.isfinite(self.y1a) or self.y1a <= 0:
            raise OptionError("y1a must be a positive scalar")
        if self.hb_strategy not in ("zero-first", "random"):
            raise OptionError(f"unknown Hb strategy {self.hb_strategy!r}")
        if int(self.max_tries) < 0:
            raise OptionError("max_tries must be nonnegative")

    def Y2_matrix(self, p, tol=DEFAULT_TOL):
        Y2 = _as_matrix(self.Y2, p, "Y2")
        return np.eye(p) if Y2 is None else _require_pd(Y2, "Y2", tol)

    def K3_matrix(self, p):
        K3 = _as_matrix(self.K3, p, "K3")
        return -np.eye(p) if K3 is None else K3

    def to_dict(self):
        def enc(v):
            return None if v is None else np.asarray(v, dtype=float).tolist()

        return {
            "Qb": enc(self.Qb),
            "Y1b_override": enc(self.Y1b_override),
            "y1a": float(self.y1a),
            "Y2": enc(self.Y2),
            "K3": enc(self.K3),
            "hb_strategy": self.hb_strategy,
            "seed": int(self.seed),
            "max_tries": int(self.max_tries),
            "Hb": enc(self.Hb),
        }

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise OptionError(f"unknown option(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass(frozen=True)
class GateResult:
    """Outcome of the eligibility gate; falsy when ineligible."""

    eligible: bool
    reason: str = ""
    relative_degree: Optional[int] = None
    nf: object = None
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.eligible

    def raise_if_ineligible(self):
        if not self.eligible:
            raise GateError(f"plant is not eligible: {self.reason} ({self.detail.get('message', '')})", self.reason)


@dataclass(frozen=True)
class SSNIRefusal:
    """Typed impossibility result for SSNI requests on relative-degree-two plants."""

    relative_degree: int = 2
    reason: str = "relative-degree-two-cannot-be-ssni"
    explanation: str = (
        "CB = 0 together with B = -AYC^T gives C(AY + YA^T)C^T = -(CB) - (CB)^T = 0, so "
        "AY + YA^T vanishes on range(C^T) and is never negative definite; in the frequency "
        "domain, w j[R(jw) - R(jw)^*] tends to zero as w grows"
    )

    def __bool__(self):
        return False

    def to_dict(self):
        return {"refused": True, "relative_degree": self.relative_degree,
                "reason": self.reason, "explanation": self.explanation}


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    """Gains, certificate and closed loop of one synthesis run.

    ``gains`` are in normal-form coordinates (``K1`` acts on ``z``);
    ``gains_modal`` act on the modal internal state ``S z``.  The closed
    loop and certificate ``Y`` live in modal coordinates ``xi = M x``; the
    ``*_original`` helpers map them back to the plant's state.
    """

    kind: str
    relative_degree: int
    gains: dict
    gains_modal: dict
    Kx: np.ndarray
    Kv: np.ndarray
    Y: np.ndarray
    closed_loop: StateSpaceModel
    M: np.ndarray
    Hb_used: np.ndarray
    Qb_used: np.ndarray
    Y2: np.ndarray
    channel_gain: np.ndarray
    modal: ModalSplit
    nf: object
    plant: StateSpaceModel
    options: SynthesisOptions
    report: VerificationReport
    hb_attempts: int = 1
    elapsed_s: float = 0.0

    @property
    def m(self) -> int:
        return self.modal.m

    @property
    def p(self) -> int:
        return self.plant.p

    def scb_gain(self) -> np.ndarray:
        """Feedback ``u = F [z; y]`` (or ``F [z; x1; x2]``) in normal-form coordinates."""
        return self.Kx @ np.linalg.inv(self.nf.T)

    def closed_loop_original(self) -> StateSpaceModel:
        P = self.plant
        return StateSpaceModel(P.A + P.B @ self.Kx, P.B @ self.Kv, P.C, name="closed loop")

    def certificate_original(self) -> np.ndarray:
        Mi = np.linalg.inv(self.M)
        return sym(Mi @ self.Y @ Mi.T)

    def to_dict(self):
        def enc(M):
            return np.asarray(M, dtype=float).tolist()

        cl = self.closed_loop
        return {
            "kind": self.kind,
            "relative_degree": self.relative_degree,
            "m": self.m,
            "p": self.p,
            "gains_normal_form": {k: enc(v) for k, v in self.gains.items()},
            "gains_modal": {k: enc(v) for k, v in self.gains_modal.items()},
            "scb_gain": enc(self.scb_gain()),
            "Kx": enc(self.Kx),
            "Kv": enc(self.Kv),
            "certificate": enc(self.Y),
            "coordinate_map": enc(self.M),
            "closed_loop": {"A": enc(cl.A), "B": enc(cl.B), "C": enc(cl.C), "D": enc(cl.D)},
            "Hb_used": enc(self.Hb_used),
            "Qb_used": enc(self.Qb_used),
            "Y2": enc(self.Y2),
            "channel_gain": enc(self.channel_gain),
            "hb_attempts": self.hb_attempts,
            "options": self.options.to_dict(),
            "verification": self.report.to_dict(),
        }


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------

def _ineligible(reason, message, r=None, nf=None, **extra):
    return GateResult(False, reason, r, nf, {"message": message, **extra})


def gate_feedback_equivalence(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> GateResult:
    """Check the hypotheses under which a NI-rendering state feedback exists.

    Order: relative degree, controllability (full-state PBH and the
    zero-dynamics pair, both recorded), zero at the origin, weak minimum
    phase.  The first failing hypothesis names the reason code.
    """
    try:
        r = relative_degree(sys, tol)
    except UnsupportedRelativeDegreeError as exc:
        return _ineligible("bad-relative-degree", str(exc))
    nf = to_normal_form(sys, tol)
    full = pbh_controllable(sys.A, sys.B, tol)
    A11, Apair = nf.zero_dynamics_pair
    pair = True if nf.m == 0 else pbh_controllable(A11, Apair, tol)
    detail = {"controllable_full": full, "controllable_pair": pair, "m": nf.m}
    if nf.m:
        detail["zero_dynamics_eigenvalues"] = [complex(x) for x in np.linalg.eigvals(A11)]
    if not (full and pair):
        return _ineligible("uncontrollable", "plant (or its zero-dynamics pair) is not controllable", r, nf, **detail)
    if nf.m:
        scale = nf.scale
        spec = classify_spectrum(A11, tol, scale)
        sv = np.linalg.svd(A11, compute_uv=False)
        if spec.select(SpectralClass.ZERO).size or sv[-1] <= tol.rank_tol * max(sv[0], scale):
            return _ineligible("zero-at-origin", "zero dynamics have an eigenvalue at the origin", r, nf, **detail)
        wmp = check_weakly_minimum_phase(A11, tol, scale)
        if not wmp:
            return _ineligible("not-weakly-minimum-phase", wmp.reason, r, nf, **detail)
    return GateResult(True, "", r, nf, detail)


def gate_ssni(sys: StateSpaceModel, tol: Tolerances = DEFAULT_TOL) -> GateResult:
    """The NI gate plus Hurwitz zero dynamics (minimum phase).

    A relative-degree-two plant passes this gate; the refusal is issued
    by :func:`synth_ssni`.
    """
    g = gate_feedback_equivalence(sys, tol)
    if not g or g.nf.m == 0:
        return g
    if not classify_spectrum(g.nf.zero_dynamics_pair[0], tol, g.nf.scale).is_hurwitz:
        return _ineligible("not-minimum-phase", "zero dynamics are not asymptotically stable",
                           g.relative_degree, g.nf, **g.detail)
    return g


# ---------------------------------------------------------------------------
# helpers shared by the constructions
# ---------------------------------------------------------------------------

def _channel(G, p, r, tol):
    G = np.eye(p) if G is None else np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape != (p, p):
        raise OptionError(f"channel gain must be {p}x{p}")
    if r == 1:
        if np.linalg.eigvalsh(G + G.T)[0] <= tol.psd_tol:
            raise OptionError("relative degree one needs a channel gain with G + G^T > 0")
    else:
        asym = np.linalg.norm(G - G.T)
        if asym > tol.residual_tol * max(1.0, np.linalg.norm(G)) or np.linalg.eigvalsh(sym(G))[0] <= tol.psd_tol:
            raise OptionError("relative degree two needs a symmetric positive definite channel gain")
        G = sym(G)
    return G


def _modal_blocks(nf, modal):
    """Internal-state blocks in modal coordinates."""
    S, Si = modal.S, modal.S_inv
    A11 = modal.block_diag
    A12 = S @ nf.A12
    A13 = S @ nf.A13 if isinstance(nf, NormalFormRD2) else None
    return S, Si, A11, A12, A13


def _Y1_and_Qb(modal, opts, tol):
    mb = modal.m_b
    if mb == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    override = _as_matrix(opts.Y1b_override, mb, "Y1b_override")
    if override is not None:
        Y1b = _require_pd(override, "Y1b_override", tol)
        Qb = sym(-(modal.A11b @ Y1b + Y1b @ modal.A11b.T))
        if np.linalg.eigvalsh(Qb)[0] <= tol.psd_tol:
            raise OptionError("Y1b_override does not satisfy A11b Y1b + Y1b A11b^T < 0")
        return Y1b, Qb
    Qb = _as_matrix(opts.Qb, mb, "Qb")
    Qb = np.eye(mb) if Qb is None else _require_pd(Qb, "Qb", tol)
    return solve_lyapunov(modal.A11b, Qb, tol), Qb


def _hb_bound(Qb, G, r):
    """Largest ``sigma_max(Hb)^2`` guaranteeing admissibility."""
    lq = np.linalg.eigvalsh(Qb)[0]
    return lq * np.linalg.eigvalsh(G + G.T)[0] if r == 1 else lq


def _hb_admissible(Hb, Qb, G, r, tol):
    if Hb.size == 0:
        return True
    W = np.linalg.inv(G + G.T) if r == 1 else np.eye(G.shape[0])
    gap = sym(Qb - Hb.T @ W @ Hb)
    return np.linalg.eigvalsh(gap)[0] >= -tol.psd_tol * max(1.0, np.linalg.norm(Qb))


def _hb_candidates(p, mb, Qb, G, r, opts, tol):
    """Yield ``Hb`` matrices according to the configured strategy."""
    if opts.Hb is not None:
        Hb = np.atleast_2d(np.asarray(opts.Hb, dtype=float)).reshape(p, mb)
        if not _hb_admissible(Hb, Qb, G, r, tol):
            raise OptionError("explicit Hb violates the admissibility bound")
        yield Hb
        return
    if opts.hb_strategy == "zero-first" or mb == 0:
        yield np.zeros((p, mb))
    if mb == 0:
        return
    rng = np.random.default_rng(opts.seed)
    bound = _hb_bound(Qb, G, r)
    for _ in range(int(opts.max_tries)):
        X = rng.standard_normal((p, mb))
        smax = np.linalg.norm(X, 2)
        # half the admissible radius: strictly inside the set
        yield X * np.sqrt(0.5 * bound) / smax


def _closed_loop_blocks(r, A11, A12, A13, K1, K2, K3, G):
    m, p = A12.shape
    Z = np.zeros
    if r == 1:
        A = np.block([[A11, A12], [K1, K2]])
        B = np.vstack([Z((m, p)), G])
        C = np.hstack([Z((p, m)), np.eye(p)])
    else:
        A = np.block([[A11, A12, A13], [Z((p, m)), Z((p, p)), np.eye(p)], [K1, K2, K3]])
        B = np.vstack([Z((m + p, p)), G])
        C = np.hstack([Z((p, m)), np.eye(p), Z((p, p))])
    return A, B, C


def _minimal(A, B, C, tol):
    return pbh_controllable(A, B, tol) and pbh_observable(A, C, tol)


def _certificate(Y1, N, Y2, W=None):
    Y = np.block([[Y1 + N @ Y2 @ N.T, -N @ Y2], [-Y2 @ N.T, Y2]])
    if W is not None:
        Y = scipy.linalg.block_diag(Y, W)
    return sym(Y)


def _coordinate_map(nf, modal):
    n = nf.T.shape[0]
    S = modal.S if modal.m else np.zeros((0, 0))
    return scipy.linalg.block_diag(S, np.eye(n - modal.m)) @ nf.T


def compose_original_feedback(nf, gains: dict, modal: ModalSplit, channel_gain=None):
    """Feedback ``u = Kx x + Kv v`` on the original plant realizing `gains`.

    `gains` act in modal coordinates (``K1`` on ``S z``); keys are
    ``K1, K2[, K3]`` or, without internal dynamics, ``K0`` / ``K01, K02``.
    """
    p = nf.p
    G = np.eye(p) if channel_gain is None else np.asarray(channel_gain, dtype=float)
    m = nf.m
    if "K0" in gains:
        gains = {"K1": np.zeros((p, 0)), "K2": gains["K0"]}
    elif "K01" in gains:
        gains = {"K1": np.zeros((p, 0)), "K2": gains["K01"], "K3": gains["K02"]}
    K1 = np.asarray(gains["K1"], dtype=float).reshape(p, m)
    S = modal.S if m else np.zeros((0, 0))
    K1z = K1 @ S
    Ginv = np.linalg.inv(nf.input_gain)
    if isinstance(nf, NormalFormRD1):
        F = Ginv @ np.hstack([K1z - nf.A21, np.asarray(gains["K2"]) - nf.A22])
    elif isinstance(nf, NormalFormRD2):
        F = Ginv @ np.hstack([K1z - nf.A31, np.asarray(gains["K2"]) - nf.A32, np.asarray(gains["K3"]) - nf.A33])
    else:
        raise PreconditionError("unknown normal form")
    if F.shape[1] != nf.T.shape[0]:
        raise PreconditionError("gain dimensions do not match the normal form")
    return F @ nf.T, Ginv @ G


def _finish(kind, r, nf, modal, plant, gains_modal, Y, Hb, Qb, Y2, G, opts, tol, attempts, t0, strict=False):
    Kx, Kv = compose_original_feedback(nf, gains_modal, modal, G)
    M = _coordinate_map(nf, modal)
    Mi = np.linalg.inv(M)
    cl = StateSpaceModel(M @ (plant.A + plant.B @ Kx) @ Mi, M @ plant.B @ Kv, plant.C @ Mi, name="closed loop")
    if strict:
        report = verify_ssni_certificate(cl, Y, tol)
    else:
        report = verify_ni_certificate(cl, Y, tol)
    if not report.passed:
        raise SynthesisError(
            f"{kind} synthesis failed its own certificate check: {', '.join(report.failed())}", report)
    S = modal.S if modal.m else np.zeros((0, 0))
    gains = {}
    for k, v in gains_modal.items():
        gains[k] = v @ S if k == "K1" else np.array(v, dtype=float)
    return SynthesisResult(
        kind=kind, relative_degree=r, gains=gains, gains_modal=dict(gains_modal), Kx=Kx, Kv=Kv, Y=Y,
        closed_loop=cl, M=M, Hb_used=Hb, Qb_used=Qb, Y2=Y2, channel_gain=G, modal=modal, nf=nf,
        plant=plant, options=opts, report=report, hb_attempts=attempts, elapsed_s=time.perf_counter() - t0,
    )


def _plant_of(nf, plant):
    if plant is not None:
        return plant
    # normal-form realization in original coordinates: x = T^{-1} xi
    Ti = np.linalg.inv(nf.T)
    s = nf.system()
    return StateSpaceModel(Ti @ s.A @ nf.T, Ti @ s.B, s.C @ nf.T)


def _check_pair(nf, modal, tol):
    A11, Apair = nf.zero_dynamics_pair
    if nf.m and not pbh_controllable(A11, Apair, tol):
        raise GateError("zero-dynamics pair is not controllable", "uncontrollable")


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

def synth_ni_rd1(nf: NormalFormRD1, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
                 channel_gain=None, plant: StateSpaceModel = None) -> SynthesisResult:
    """NI-rendering feedback for a relative-degree-one normal form.

    Raises
    ------
    GateError
        Zero dynamics singular, not Lyapunov stable or pair uncontrollable.
    SynthesisError
        No tried ``Hb`` gives a minimal closed loop, or the self-check fails.
    """
    t0 = time.perf_counter()
    opts = opts or SynthesisOptions()
    p = nf.p
    if nf.m == 0:
        return synth_ni_rd1_m0(nf.A22, nf.CB, opts, tol, channel_gain=channel_gain, plant=plant, nf=nf)
    G = _channel(channel_gain, p, 1, tol)
    modal = modal_split(nf.A11, tol, nf.scale)
    _check_pair(nf, modal, tol)
    plant = _plant_of(nf, plant)
    Y2 = opts.Y2_matrix(p, tol)
    S, Si, A11, A12, _ = _modal_blocks(nf, modal)
    ma = modal.m_a
    Y1b, Qb = _Y1_and_Qb(modal, opts, tol)
    Y1 = scipy.linalg.block_diag(opts.y1a * np.eye(ma), Y1b)
    N = np.linalg.solve(A11, A12)
    base = -G @ N.T  # -G A12^T A11^{-T}
    K1a = base[:, :ma] / opts.y1a
    attempts = 0
    for Hb in _hb_candidates(p, modal.m_b, Qb, G, 1, opts, tol):
        attempts += 1
        K1b = np.linalg.solve(Y1b.T, (base[:, ma:] + Hb).T).T if modal.m_b else np.zeros((p, 0))
        K1 = np.hstack([K1a, K1b])
        K2 = K1 @ N - G @ np.linalg.inv(Y2)
        A, B, C = _closed_loop_blocks(1, A11, A12, None, K1, K2, None, G)
        if _minimal(A, B, C, tol):
            Y = _certificate(Y1, N, Y2)
            return _finish("ni", 1, nf, modal, plant, {"K1": K1, "K2": K2}, Y, Hb, Qb, Y2, G,
                           opts, tol, attempts, t0)
    raise SynthesisError(f"no Hb among {attempts} attempts gave an observable (A11, K1)", {"attempts": attempts})


def synth_ni_rd1_m0(A22, CB, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
                    channel_gain=None, plant: StateSpaceModel = None, nf: NormalFormRD1 = None) -> SynthesisResult:
    """No internal dynamics: ``y' = K0 y + v`` with ``K0 = -G Y2^{-1}`` and certificate ``Y2``."""
    t0 = time.perf_counter()
    opts = opts or SynthesisOptions()
    A22 = np.atleast_2d(np.asarray(A22, dtype=float))
    CB = np.atleast_2d(np.asarray(CB, dtype=float))
    p = A22.shape[0]
    if nf is None:
        nf = NormalFormRD1(np.eye(p), np.zeros((0, 0)), np.zeros((0, p)), np.zeros((p, 0)), A22, CB)
    G = _channel(channel_gain, p, 1, tol)
    Y2 = opts.Y2_matrix(p, tol)
    K0 = -G @ np.linalg.inv(Y2)
    return _finish("ni", 1, nf, ModalSplit.empty(), _plant_of(nf, plant), {"K0": K0}, Y2.copy(),
                   np.zeros((p, 0)), np.zeros((0, 0)), Y2, G, opts, tol, 1, t0)


def synth_ni_rd2(nf: NormalFormRD2, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
                 channel_gain=None, plant: StateSpaceModel = None) -> SynthesisResult:
    """NI-rendering feedback for a relative-degree-two normal form."""
    t0 = time.perf_counter()
    opts = opts or SynthesisOptions()
    p = nf.p
    G = _channel(channel_gain, p, 2, tol)
    K3 = opts.K3_matrix(p)
    D3 = sym(K3 @ G + G @ K3.T)
    if np.linalg.eigvalsh(D3)[0] >= -tol.psd_tol or np.linalg.eigvalsh(-D3)[0] <= tol.psd_tol:
        raise OptionError("K3 must satisfy K3 + K3^T < 0 (weighted by the channel gain)")
    if nf.m == 0:
        return synth_ni_rd2_m0(nf.A32, nf.A33, nf.CAB, opts, tol, channel_gain=G, plant=plant, nf=nf)
    E = sqrt_pd(-D3, tol)
    modal = modal_split(nf.A11, tol, nf.scale)
    _check_pair(nf, modal, tol)
    plant = _plant_of(nf, plant)
    Y2 = opts.Y2_matrix(p, tol)
    S, Si, A11, A12, A13 = _modal_blocks(nf, modal)
    ma = modal.m_a
    Y1b, Qb = _Y1_and_Qb(modal, opts, tol)
    Y1 = scipy.linalg.block_diag(opts.y1a * np.eye(ma), Y1b)
    N = np.linalg.solve(A11, A12)
    base = -G @ N.T - G @ A13.T
    K1a = base[:, :ma] / opts.y1a
    attempts = 0
    for Hb in _hb_candidates(p, modal.m_b, Qb, G, 2, opts, tol):
        attempts += 1
        K1b = np.linalg.solve(Y1b.T, (base[:, ma:] + E @ Hb).T).T if modal.m_b else np.zeros((p, 0))
        K1 = np.hstack([K1a, K1b])
        K2 = K1 @ N - G @ np.linalg.inv(Y2)
        A, B, C = _closed_loop_blocks(2, A11, A12, A13, K1, K2, K3, G)
        if _minimal(A, B, C, tol):
            Y = _certificate(Y1, N, Y2, G)
            return _finish("ni", 2, nf, modal, plant, {"K1": K1, "K2": K2, "K3": K3}, Y, Hb, Qb, Y2, G,
                           opts, tol, attempts, t0)
    raise SynthesisError(f"no Hb among {attempts} attempts gave an observable (A11, K1)", {"attempts": attempts})


def synth_ni_rd2_m0(A32, A33, CAB, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
                    channel_gain=None, plant: StateSpaceModel = None, nf: NormalFormRD2 = None) -> SynthesisResult:
    """Pure output chain: ``x1'' = K01 x1 + K02 x1' + v`` with ``K01 = -G Y2^{-1}``, ``K02 = K3``."""
    t0 = time.perf_counter()
    opts = opts or SynthesisOptions()
    A32 = np.atleast_2d(np.asarray(A32, dtype=float))
    p = A32.shape[0]
    if nf is None:
        Z = np.zeros
        nf = NormalFormRD2(np.eye(2 * p), Z((0, 0)), Z((0, p)), Z((0, p)), Z((p, 0)), A32,
                           np.atleast_2d(np.asarray(A33, dtype=float)), np.atleast_2d(np.asarray(CAB, dtype=float)))
    G = _channel(channel_gain, p, 2, tol)
    K02 = opts.K3_matrix(p)
    if np.linalg.eigvalsh(sym(K02 @ G + G @ K02.T))[-1] >= -tol.psd_tol:
        raise OptionError("K3 must satisfy K3 + K3^T < 0 (weighted by the channel gain)")
    Y2 = opts.Y2_matrix(p, tol)
    K01 = -G @ np.linalg.inv(Y2)
    Y0 = scipy.linalg.block_diag(Y2, G)
    return _finish("ni", 2, nf, ModalSplit.empty(), _plant_of(nf, plant), {"K01": K01, "K02": K02}, Y0,
                   np.zeros((p, 0)), np.zeros((0, 0)), Y2, G, opts, tol, 1, t0)


def synth_ssni_rd1(nf: NormalFormRD1, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
                   channel_gain=None, plant: StateSpaceModel = None) -> SynthesisResult:
    """Strongly strictly NI closed loop for a minimum-phase relative-degree-one plant.

    ``Y1`` solves ``A11 Y1 + Y1 A11^T = -Q`` (``Q`` is the ``Qb`` option,
    or ``Y1b_override`` gives ``Y1`` directly); the certificate inequality
    is then ``diag(-Q, -(G + G^T)) < 0``.
    """
    t0 = time.perf_counter()
    opts = opts or SynthesisOptions()
    p, m = nf.p, nf.m
    G = _channel(channel_gain, p, 1, tol)
    if m == 0:
        res = synth_ni_rd1_m0(nf.A22, nf.CB, opts, tol, channel_gain=G, plant=plant, nf=nf)
        return _finish("ssni", 1, nf, res.modal, res.plant, res.gains_modal, res.Y, res.Hb_used, res.Qb_used,
                       res.Y2, G, opts, tol, 1, t0, strict=True)
    if not classify_spectrum(nf.A11, tol, nf.scale).is_hurwitz:
        raise GateError("SSNI synthesis needs Hurwitz zero dynamics (minimum phase)", "not-minimum-phase")
    _check_pair(nf, None, tol)
    plant = _plant_of(nf, plant)
    # no skew part: the identity modal split keeps gains in normal-form coordinates
    modal = ModalSplit(np.eye(m), np.zeros((0, 0)), nf.A11.copy())
    Y1, Q = _Y1_and_Qb(modal, opts, tol)
    Y2 = opts.Y2_matrix(p, tol)
    N = np.linalg.solve(nf.A11, nf.A12)
    K1 = np.linalg.solve(Y1.T, (-G @ N.T).T).T
    K2 = K1 @ N - G @ np.linalg.inv(Y2)
    Y = _certificate(Y1, N, Y2)
    return _finish("ssni", 1, nf, modal, plant, {"K1": K1, "K2": K2}, Y, np.zeros((p, 0)), Q, Y2, G,
                   opts, tol, 1, t0, strict=True)


def ssni_rd2_refusal() -> SSNIRefusal:
    return SSNIRefusal()


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

def synth_ni(sys: StateSpaceModel, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
             channel_gain=None) -> SynthesisResult:
    """Gate the plant, then construct a NI-rendering state feedback.

    Raises
    ------
    GateError
        The plant fails a hypothesis; ``exc.reason`` is one of
        :data:`REASON_CODES`.
    """
    gate = gate_feedback_equivalence(sys, tol)
    gate.raise_if_ineligible()
    nf = gate.nf
    if nf.relative_degree == 1:
        return synth_ni_rd1(nf, opts, tol, channel_gain=channel_gain, plant=sys)
    return synth_ni_rd2(nf, opts, tol, channel_gain=channel_gain, plant=sys)


def synth_ssni(sys: StateSpaceModel, opts: SynthesisOptions = None, tol: Tolerances = DEFAULT_TOL, *,
               channel_gain=None):
    """SSNI synthesis; relative-degree-two plants get an :class:`SSNIRefusal`."""
    try:
        if relative_degree(sys, tol) == 2:
            return ssni_rd2_refusal()
    except UnsupportedRelativeDegreeError:
        pass
    gate = gate_ssni(sys, tol)
    gate.raise_if_ineligible()
    return synth_ssni_rd1(gate.nf, opts, tol, channel_gain=channel_gain, plant=sys)
