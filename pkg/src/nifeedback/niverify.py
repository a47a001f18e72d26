"""Independent NI / SSNI checks.

Two routes: the state-space certificate conditions (``Y > 0``,
``AY + YA^T <= 0``, ``B + AYC^T = 0``) and a frequency sweep of
``M(w) = j [R(jw) - R(jw)^*]``.  Every outcome is a
:class:`VerificationReport`; nothing here raises on a failed property.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ltimodel import StateSpaceModel, dc_gain, eval_tf, freq_sweep, is_minimal, logspace_grid
from .numkernel import (
    DEFAULT_TOL,
    SpectralClass,
    Tolerances,
    classify_spectrum,
    pbh_controllable,
    pbh_observable,
    sym,
)

__all__ = [
    "Check",
    "VerificationReport",
    "STRICT_MARGIN",
    "verify_ni_certificate",
    "verify_ssni_certificate",
    "verify_ni_freq",
    "verify_ssni_freq",
    "hermitian_imaginary_part",
    "dc_gain_stability",
    "is_zero_system",
]

STRICT_MARGIN = 1e-10


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    """Named checks with measured values; passes iff every check passes."""

    title: str
    checks: list = field(default_factory=list)
    pole_warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def __bool__(self):
        return self.passed

    def add(self, name, value, threshold, passed, detail=""):
        self.checks.append(Check(name, float(value), float(threshold), bool(passed), detail))

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "title": self.title,
            "verdict": self.verdict,
            "checks": [c.to_dict() for c in self.checks],
            "pole_warnings": [float(w) for w in self.pole_warnings],
        }

    def summary(self) -> str:
        lines = [f"{self.title}: {self.verdict.upper()}"]
        for c in self.checks:
            mark = "ok " if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: {c.value:.3e} (threshold {c.threshold:.3e}) {c.detail}".rstrip())
        return "\n".join(lines)


def _norm(M):
    return float(np.linalg.norm(M)) if np.size(M) else 0.0


def _certificate_checks(report, sys, Y, tol, strict_margin=None):
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    Y = np.asarray(Y, dtype=float)
    if Y.shape != A.shape:
        report.add("Y dimensions", 0, 0, False, f"Y has shape {Y.shape}, expected {A.shape}")
        return
    asym = _norm(Y - Y.T)
    report.add("Y symmetric", asym, tol.residual_tol * max(1.0, _norm(Y)),
               asym <= tol.residual_tol * max(1.0, _norm(Y)))
    Ys = sym(Y)
    lam_min = np.linalg.eigvalsh(Ys)[0] if Ys.size else np.inf
    report.add("Y positive definite", lam_min, tol.psd_tol, lam_min > tol.psd_tol)

    L = sym(A @ Ys + Ys @ A.T)
    lam_max = np.linalg.eigvalsh(L)[-1] if L.size else -np.inf
    if strict_margin is None:
        report.add("AY+YA^T <= 0", lam_max, tol.psd_tol, lam_max <= tol.psd_tol)
    else:
        report.add("AY+YA^T < 0", lam_max, -strict_margin, lam_max <= -strict_margin)

    res = _norm(B + A @ Ys @ C.T)
    bound = tol.residual_tol * (1.0 + _norm(B))
    report.add("B+AYC^T = 0", res, bound, res <= bound)

    if A.size:
        sv = np.linalg.svd(A, compute_uv=False)
        thresh = tol.rank_tol * max(sv[0], 1.0)
        report.add("det(A) != 0", sv[-1], thresh, sv[-1] > thresh)
    dsym = _norm(D - D.T)
    report.add("D = D^T", dsym, tol.residual_tol, dsym <= tol.residual_tol * max(1.0, _norm(D)))


def verify_ni_certificate(sys: StateSpaceModel, Y, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """NI certificate conditions for a given `Y`, plus minimality."""
    report = VerificationReport("NI certificate")
    _certificate_checks(report, sys, Y, tol)
    minimal = is_minimal(sys, tol)
    report.add("minimal realization", float(minimal), 1.0, minimal)
    return report


def _normal_rank_check(report, sys, tol, seed):
    """Rank of ``R(s0) + R(-s0)^T`` at a real point away from the poles."""
    rng = np.random.default_rng(seed)
    eigs = np.linalg.eigvals(sys.A) if sys.n else np.zeros(0)
    scale = 1.0 + (np.max(np.abs(eigs)) if eigs.size else 0.0)
    for _ in range(20):
        s0 = float(rng.uniform(0.3, 1.7) * scale)
        if eigs.size == 0 or np.min(np.abs(np.abs(eigs) - s0)) > 1e-3 * scale:
            break
    R1 = eval_tf(sys, s0, tol)
    R2 = eval_tf(sys, -s0, tol)
    sv = np.linalg.svd(R1 + R2.T, compute_uv=False)
    thresh = tol.rank_tol * max(sv[0], 1.0)
    report.add("R(s)+R(-s)^T full normal rank", sv[-1], thresh, sv[-1] > thresh, f"s0 = {s0:.6g}")


def _observable_uncontrollable_modes(sys, tol):
    bad = []
    n = sys.n
    if n == 0:
        return bad
    scale_c = max(np.linalg.norm(np.hstack([sys.A, sys.B]), 2), 1e-300)
    scale_o = max(np.linalg.norm(np.vstack([sys.A, sys.C]), 2), 1e-300)
    for lam in np.linalg.eigvals(sys.A):
        Mc = np.hstack([lam * np.eye(n) - sys.A, sys.B])
        Mo = np.vstack([lam * np.eye(n) - sys.A, sys.C])
        unc = np.linalg.svd(Mc, compute_uv=False)[n - 1] <= tol.rank_tol * scale_c
        obs = np.linalg.svd(Mo, compute_uv=False)[n - 1] > tol.rank_tol * scale_o
        if unc and obs:
            bad.append(lam)
    return bad


def verify_ssni_certificate(sys: StateSpaceModel, Y, tol: Tolerances = DEFAULT_TOL,
                            strict_margin: float = STRICT_MARGIN, seed: int = 0) -> VerificationReport:
    """SSNI certificate conditions: strict Lyapunov inequality, ``A`` Hurwitz, full normal rank."""
    report = VerificationReport("SSNI certificate")
    _certificate_checks(report, sys, Y, tol, strict_margin=strict_margin)
    spec = classify_spectrum(sys.A, tol)
    worst = max((e.real for e in spec.eigenvalues), default=-np.inf)
    report.add("A Hurwitz", worst, 0.0, spec.is_hurwitz)
    if spec.is_hurwitz:
        _normal_rank_check(report, sys, tol, seed)
    bad = _observable_uncontrollable_modes(sys, tol)
    report.add("no observable uncontrollable modes", len(bad), 0, not bad)
    return report


def hermitian_imaginary_part(R):
    """``M = j (R - R^*)`` for a single response or a stack of responses."""
    R = np.asarray(R)
    return 1j * (R - np.conj(np.swapaxes(R, -1, -2)))


def _imaginary_poles(sys, tol):
    if sys.n == 0:
        return [], None
    spec = classify_spectrum(sys.A, tol)
    poles = [
        (lam, ss) for lam, c, ss in zip(spec.eigenvalues, spec.classes, spec.semisimple)
        if c is SpectralClass.IMAGINARY and lam.imag > 0
    ]
    return poles, spec


def _residue(sys, w0, tol):
    """Numerical residue ``lim (s - j w0) j R(s)`` from four approach directions."""
    eps = 1e-6 * max(1.0, abs(w0))
    vals = []
    for theta in (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi):
        s = 1j * w0 + eps * np.exp(1j * theta)
        vals.append((s - 1j * w0) * 1j * eval_tf(sys, s, tol))
    return np.mean(vals, axis=0)


def _sweep_M(sys, grid, tol):
    samples = freq_sweep(sys, grid, tol)
    omegas, Ms, warnings = [], [], []
    for smp in samples:
        if smp.at_pole:
            warnings.append(smp.omega)
            continue
        omegas.append(smp.omega)
        Ms.append(hermitian_imaginary_part(smp.response))
    return np.array(omegas), Ms, warnings


def verify_ni_freq(sys: StateSpaceModel, grid, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """Frequency-domain NI test on a grid.

    Checks: no poles at the origin or in the open right half-plane;
    imaginary-axis poles simple with Hermitian PSD residue;
    ``M(w)`` Hermitian with ``lambda_min(M(w)) >= -psd_tol`` at every grid
    point not within the axis tolerance of a pole.
    """
    report = VerificationReport("NI frequency sweep")
    grid = np.asarray(grid, dtype=float)
    poles, spec = _imaginary_poles(sys, tol)
    if spec is not None:
        rhp = spec.select(SpectralClass.ORHP)
        origin = spec.select(SpectralClass.ZERO)
        report.add("no poles in Re(s) > 0", len(rhp), 0, rhp.size == 0)
        report.add("no poles at the origin", len(origin), 0, origin.size == 0)
        axis = tol.axis_tol(sys.A)
        for lam, semisimple in poles:
            w0 = float(lam.imag)
            near = grid[np.abs(grid - w0) <= axis]
            report.pole_warnings.extend(float(w) for w in near)
            report.add(f"simple pole at j{w0:.6g}", float(semisimple), 1.0, semisimple)
            if semisimple:
                K0 = _residue(sys, w0, tol)
                scale = max(_norm(K0), 1.0)
                herm = _norm(K0 - K0.conj().T)
                report.add(f"residue Hermitian at j{w0:.6g}", herm, 1e-4 * scale, herm <= 1e-4 * scale)
                lam_min = np.linalg.eigvalsh(0.5 * (K0 + K0.conj().T))[0]
                report.add(f"residue PSD at j{w0:.6g}", lam_min, -1e-4 * scale, lam_min >= -1e-4 * scale)
        grid = np.array([w for w in grid if w not in set(report.pole_warnings)])

    omegas, Ms, warnings = _sweep_M(sys, grid, tol)
    report.pole_warnings.extend(warnings)
    if Ms:
        herm = max(_norm(M - M.conj().T) / max(1.0, _norm(M)) for M in Ms)
        lam = np.array([np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] for M in Ms])
        k = int(np.argmin(lam))
        report.add("M(w) Hermitian", herm, tol.residual_tol, herm <= tol.residual_tol)
        report.add("lambda_min(M(w)) >= 0", lam[k], -tol.psd_tol, lam[k] >= -tol.psd_tol,
                   f"worst at w = {omegas[k]:.6g} over {len(Ms)} points")
    return report


def verify_ssni_freq(sys: StateSpaceModel, grid, tol: Tolerances = DEFAULT_TOL,
                     strict_margin: float = STRICT_MARGIN) -> VerificationReport:
    """Frequency-domain SSNI test.

    Strict positivity of ``M(w)`` on the grid, the two limit conditions
    approximated at the grid extremes, and the same limits evaluated
    exactly from the realization: ``jw[R - R^*] -> CB + (CB)^T`` as
    ``w -> inf`` and ``(j/w)[R - R^*] -> X + X^T`` with ``X = C A^{-2} B``
    as ``w -> 0``.
    """
    report = VerificationReport("SSNI frequency sweep")
    spec = classify_spectrum(sys.A, tol)
    worst = max((e.real for e in spec.eigenvalues), default=-np.inf)
    report.add("A Hurwitz", worst, 0.0, spec.is_hurwitz)
    if not spec.is_hurwitz:
        return report
    grid = np.asarray(grid, dtype=float)
    omegas, Ms, warnings = _sweep_M(sys, grid, tol)
    report.pole_warnings.extend(warnings)
    if not Ms:
        report.add("nonempty grid", 0, 1, False)
        return report
    lam = np.array([np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] for M in Ms])
    k = int(np.argmin(lam))
    report.add("lambda_min(M(w)) > 0", lam[k], strict_margin, lam[k] >= strict_margin,
               f"worst at w = {omegas[k]:.6g}")
    hi = np.linalg.eigvalsh(omegas[-1] * 0.5 * (Ms[-1] + Ms[-1].conj().T))[0]
    report.add("lambda_min(w M(w)) at max grid w", hi, strict_margin, hi >= strict_margin,
               f"w = {omegas[-1]:.6g}")
    lo = np.linalg.eigvalsh(0.5 * (Ms[0] + Ms[0].conj().T) / omegas[0])[0]
    report.add("lambda_min(M(w)/w) at min grid w", lo, strict_margin, lo >= strict_margin,
               f"w = {omegas[0]:.6g}")

    CB = sys.C @ sys.B
    hi_lim = np.linalg.eigvalsh(CB + CB.T)[0]
    report.add("high-frequency limit CB+(CB)^T > 0", hi_lim, strict_margin, hi_lim >= strict_margin)
    X = sys.C @ np.linalg.solve(sys.A, np.linalg.solve(sys.A, sys.B))
    lo_lim = np.linalg.eigvalsh(X + X.T)[0]
    report.add("low-frequency limit CA^-2B+(CA^-2B)^T > 0", lo_lim, strict_margin, lo_lim >= strict_margin)
    return report


def is_zero_system(sys: StateSpaceModel) -> bool:
    """Transfer function identically zero (static zero, or no input/output path)."""
    if np.any(sys.D):
        return False
    return sys.n == 0 or not np.any(sys.B) or not np.any(sys.C)


def _sni_sweep(report, delta, grid, tol):
    spec = classify_spectrum(delta.A, tol)
    report.add("Delta poles in Re(s) < 0", max((e.real for e in spec.eigenvalues), default=-np.inf),
               0.0, spec.is_hurwitz)
    _, Ms, _ = _sweep_M(delta, grid, tol)
    lam = min(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0] for M in Ms)
    report.add("Delta strictly NI on grid", lam, 0.0, lam > 0)


def dc_gain_stability(R: StateSpaceModel, Delta: StateSpaceModel, tol: Tolerances = DEFAULT_TOL,
                      grid=None) -> VerificationReport:
    """DC-gain test for the positive-feedback interconnection of NI `R` and SNI `Delta`.

    Also re-checks the hypotheses: ``R`` NI and ``Delta`` SNI on a sweep,
    ``R(inf) Delta(inf) = 0`` and ``Delta(inf) >= 0``.  An identically zero
    ``Delta`` is accepted as the no-uncertainty case.
    """
    report = VerificationReport("DC-gain internal stability")
    if R.p != Delta.p:
        report.add("matching dimensions", 0, 0, False, f"R is {R.p}x{R.p}, Delta is {Delta.p}x{Delta.p}")
        return report
    grid = logspace_grid(1e-3, 1e3, 200) if grid is None else np.asarray(grid, dtype=float)

    ni = verify_ni_freq(R, grid, tol)
    report.add("R NI (sweep)", float(ni.passed), 1.0, ni.passed, ", ".join(ni.failed()))
    if not is_zero_system(Delta):
        _sni_sweep(report, Delta, grid, tol)

    prod = _norm(R.D @ Delta.D)
    report.add("R(inf)Delta(inf) = 0", prod, tol.residual_tol, prod <= tol.residual_tol)
    Dd = Delta.D
    dsym = _norm(Dd - Dd.T)
    lam_d = np.linalg.eigvalsh(sym(Dd))[0]
    report.add("Delta(inf) >= 0", min(lam_d, -dsym), -tol.psd_tol,
               dsym <= tol.residual_tol and lam_d >= -tol.psd_tol)

    try:
        L = dc_gain(R, tol) @ dc_gain(Delta, tol)
    except ValueError as exc:
        report.add("DC gains defined", 0, 0, False, str(exc))
        return report
    eigs = np.linalg.eigvals(L)
    imag = float(np.max(np.abs(eigs.imag))) if eigs.size else 0.0
    real_ok = imag <= tol.residual_tol * max(1.0, float(np.max(np.abs(eigs))))
    report.add("eig(R(0)Delta(0)) real", imag, tol.residual_tol, real_ok)
    lam_max = float(np.max(eigs.real)) if eigs.size else 0.0
    report.add("lambda_max(R(0)Delta(0)) < 1", lam_max, 1.0 - tol.residual_tol,
               real_ok and lam_max < 1.0 - tol.residual_tol)
    return report
