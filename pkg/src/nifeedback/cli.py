"""Command-line interface.

Subcommands ``analyze``, ``synthesize``, ``verify``, ``robust`` and
``bode``.  Systems are JSON files with row-major matrices ``A``, ``B``,
``C`` and optional ``D``, ``name``, ``gamma`` and ``options``.  A report
written by ``synthesize`` is itself a valid input: its ``closed_loop`` and
``certificate`` entries are picked up by ``verify`` and ``bode``.

Exit codes: 0 success, 1 negative result (ineligible plant, failed check,
refusal, unstable loop), 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import GateError, NumericalError, PreconditionError
from .ltimodel import StateSpaceModel, dc_gain, freq_sweep, logspace_grid, siso_tf_coefficients
from .nisynth import SSNIRefusal, SynthesisOptions, gate_feedback_equivalence, synth_ni, synth_ssni
from .niverify import dc_gain_stability, verify_ni_certificate, verify_ni_freq, verify_ssni_certificate, verify_ssni_freq
from .robust import (
    UncertainPlant,
    build_interconnection,
    loop_dc_gain,
    sample_sni_uncertainty,
    simulate,
    synth_robust,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
DEFAULT_POINTS = 400

_OPTION_ALIASES = {"Y1b": "Y1b_override"}


class InputError(Exception):
    """Malformed command-line or file input (exit code 2)."""


# ---------------------------------------------------------------------------
# file handling
# ---------------------------------------------------------------------------

def _matrix(doc, key, required=True, where=""):
    if key not in doc or doc[key] is None:
        if required:
            raise InputError(f"{where}missing field '{key}'")
        return None
    value = doc[key]
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{where}field '{key}' is not a numeric matrix: {exc}") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim == 1 and M.size == 0:
        M = M.reshape(0, 0)
    if M.ndim == 1:
        raise InputError(f"{where}field '{key}' must be a nested (row-major) array")
    if M.ndim != 2:
        raise InputError(f"{where}field '{key}' has ragged or too deeply nested rows")
    if not np.all(np.isfinite(M)):
        raise InputError(f"{where}field '{key}' contains non-finite numbers")
    return M


def _empty_ok(M, shape):
    return np.zeros(shape) if M is not None and M.size == 0 else M


def system_from_dict(doc, where="") -> StateSpaceModel:
    A = _matrix(doc, "A", where=where)
    B = _matrix(doc, "B", where=where)
    C = _matrix(doc, "C", where=where)
    D = _matrix(doc, "D", required=False, where=where)
    n = A.shape[0] if A.size else 0
    p = B.shape[1] if B.size else (C.shape[0] if C.size else (D.shape[0] if D is not None else 0))
    A = _empty_ok(A, (n, n))
    B = _empty_ok(B, (n, p))
    C = _empty_ok(C, (p, n))
    try:
        return StateSpaceModel(A, B, C, D, name=str(doc.get("name", "")))
    except PreconditionError as exc:
        raise InputError(f"{where}{exc}") from None


def load_document(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    return doc


def load_system(path):
    """Return ``(system, document)``; a synthesis report yields its closed loop."""
    doc = load_document(path)
    if "closed_loop" in doc and "A" not in doc:
        return system_from_dict(doc["closed_loop"], f"{path}: closed_loop: "), doc
    return system_from_dict(doc, f"{path}: "), doc


def load_certificate(path):
    doc = load_document(path)
    for key in ("certificate", "Y"):
        if key in doc:
            return _matrix(doc, key, where=f"{path}: ")
    raise InputError(f"{path}: no 'certificate' or 'Y' field")


def options_from_dict(d) -> SynthesisOptions:
    if not isinstance(d, dict):
        raise InputError("'options' must be an object")
    kw = {}
    for key, value in d.items():
        key = _OPTION_ALIASES.get(key, key)
        if key == "Hb" and value == "zero":
            kw["hb_strategy"] = "zero-first"
            kw["max_tries"] = 0
            continue
        kw[key] = value
    try:
        return SynthesisOptions.from_dict(kw)
    except PreconditionError as exc:
        raise InputError(f"options: {exc}") from None
    except TypeError as exc:
        raise InputError(f"options: {exc}") from None


def parse_matrix_spec(text, flag):
    """``--y2 0.5`` or ``--y2 '[[1,0],[0,2]]'``."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        raise InputError(f"{flag}: expected a number or a JSON matrix, got {text!r}") from None
    M = np.array(value, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InputError(f"{flag}: non-finite entries")
    return float(M) if M.ndim == 0 else M.tolist()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(doc) -> str:
    # Python's float repr is the shortest string that round-trips exactly
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False)


def _emit(doc, out, stream):
    text = dumps(doc)
    if out:
        Path(out).write_text(text + "\n")
    stream.write(text + "\n")


def _model_dict(sys):
    return {"A": sys.A, "B": sys.B, "C": sys.C, "D": sys.D}


def _tf_dict(sys):
    if sys.p != 1:
        return None
    num, den = siso_tf_coefficients(sys)
    return {"numerator": num, "denominator": den}


def _grid(args):
    if not (args.freq_lo > 0 and args.freq_hi >= args.freq_lo):
        raise InputError("need 0 < --freq-lo <= --freq-hi")
    if args.points < 1:
        raise InputError("--points must be at least 1")
    return logspace_grid(args.freq_lo, args.freq_hi, args.points)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_analyze(args, stream):
    sys_, _ = load_system(args.system)
    gate = gate_feedback_equivalence(sys_)
    rep = {
        "command": "analyze",
        "system": sys_.name,
        "n": sys_.n,
        "p": sys_.p,
        "eligible": gate.eligible,
        "reason": gate.reason or None,
        "relative_degree": gate.relative_degree,
        "m": gate.nf.m if gate.nf is not None else None,
        "controllable": gate.detail.get("controllable_full"),
        "controllable_zero_dynamics_pair": gate.detail.get("controllable_pair"),
        "zero_dynamics_eigenvalues": gate.detail.get("zero_dynamics_eigenvalues", []),
        "weakly_minimum_phase": None if gate.nf is None else gate.reason not in (
            "not-weakly-minimum-phase", "zero-at-origin"),
        "message": gate.detail.get("message", ""),
    }
    _emit(rep, args.out, stream)
    return EXIT_OK if gate.eligible else EXIT_NEGATIVE


def _options_for(doc, args):
    opts = options_from_dict(doc.get("options", {}))
    updates = {}
    if args.y2 is not None:
        updates["Y2"] = parse_matrix_spec(args.y2, "--y2")
    if getattr(args, "k3", None) is not None:
        updates["K3"] = parse_matrix_spec(args.k3, "--k3")
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        try:
            opts = SynthesisOptions.from_dict({**opts.__dict__, **updates})
        except PreconditionError as exc:
            raise InputError(str(exc)) from None
    return opts


def cmd_synthesize(args, stream):
    sys_, doc = load_system(args.system)
    opts = _options_for(doc, args)
    if args.ssni:
        res = synth_ssni(sys_, opts)
        if isinstance(res, SSNIRefusal):
            _emit({"command": "synthesize", "system": sys_.name, "mode": "ssni", **res.to_dict()}, args.out, stream)
            return EXIT_NEGATIVE
    else:
        res = synth_ni(sys_, opts)
    grid = logspace_grid(1e-3, 1e3, DEFAULT_POINTS)
    freq = verify_ssni_freq(res.closed_loop, grid) if args.ssni else verify_ni_freq(res.closed_loop, grid)
    rep = {
        "command": "synthesize",
        "system": sys_.name,
        "mode": "ssni" if args.ssni else "ni",
        **res.to_dict(),
        "dc_gain": dc_gain(res.closed_loop),
        "transfer_function": _tf_dict(res.closed_loop),
        "frequency_verification": freq.to_dict(),
    }
    _emit(rep, args.out, stream)
    return EXIT_OK if freq.passed else EXIT_NEGATIVE


def cmd_verify(args, stream):
    sys_, doc = load_system(args.system)
    if args.certificate is not None:
        Y = load_certificate(args.certificate)
    elif "certificate" in doc and not args.no_certificate:
        Y = _matrix(doc, "certificate", where=f"{args.system}: ")
    else:
        Y = None
    grid = _grid(args)
    rep = {"command": "verify", "system": sys_.name, "mode": "ssni" if args.ssni else "ni"}
    reports = []
    if Y is not None:
        if Y.shape != sys_.A.shape:
            raise InputError(f"certificate has shape {Y.shape}, expected {sys_.A.shape}")
        cert = verify_ssni_certificate(sys_, Y, seed=args.seed or 0) if args.ssni else verify_ni_certificate(sys_, Y)
        reports.append(cert)
        rep["certificate"] = cert.to_dict()
    else:
        rep["certificate"] = None
    freq = verify_ssni_freq(sys_, grid) if args.ssni else verify_ni_freq(sys_, grid)
    reports.append(freq)
    rep["frequency"] = freq.to_dict()
    rep["verdict"] = "pass" if all(r.passed for r in reports) else "fail"
    _emit(rep, args.out, stream)
    return EXIT_OK if rep["verdict"] == "pass" else EXIT_NEGATIVE


def _load_delta(spec, p, gamma, seed):
    if spec is None:
        return None, None
    if spec.startswith("sample"):
        _, _, tail = spec.partition(":")
        s = seed if not tail else None
        if tail:
            try:
                s = int(tail)
            except ValueError:
                raise InputError(f"--delta: bad seed in {spec!r}") from None
        return sample_sni_uncertainty(p, gamma, s), {"sampled": True, "seed": s}
    delta, _ = load_system(spec)
    return delta, {"sampled": False, "path": spec}


def cmd_robust(args, stream):
    sys_, doc = load_system(args.system)
    gamma = args.gamma if args.gamma is not None else doc.get("gamma")
    if gamma is None:
        raise InputError("no --gamma given and the system file has no 'gamma'")
    try:
        gamma = float(gamma)
    except (TypeError, ValueError):
        raise InputError("gamma must be a number") from None
    if not (np.isfinite(gamma) and gamma > 0):
        raise InputError(f"gamma must be positive, got {gamma}")
    opts = _options_for(doc, args)
    res = synth_robust(UncertainPlant(sys_, gamma), opts)
    cl = res.closed_loop
    R0 = dc_gain(cl)
    lam = float(np.max(np.linalg.eigvalsh(0.5 * (R0 + R0.T))))
    rep = {
        "command": "robust",
        "system": sys_.name,
        "gamma": gamma,
        "Y2": res.Y2,
        "R0": R0,
        "lambda_max_R0": lam,
        "bound": 1.0 / gamma,
        "bound_margin": 1.0 / gamma - lam,
        "scb_gain": res.scb_gain(),
        "Kx": res.Kx,
        "gains_normal_form": res.gains,
        "closed_loop": _model_dict(cl),
        "certificate": res.Y,
        "verification": res.report.to_dict(),
        "delta": None,
        "interconnection": None,
    }
    code = EXIT_OK
    delta, info = _load_delta(args.delta, sys_.p, gamma, args.seed)
    if delta is not None:
        ic = build_interconnection(cl, delta)
        stab = dc_gain_stability(cl, delta)
        hurwitz = ic.is_hurwitz()
        rep["delta"] = {**info, **_model_dict(delta)}
        rep["interconnection"] = {
            "loop_dc_gain": loop_dc_gain(cl, delta),
            "eigenvalues": ic.eigenvalues,
            "spectral_abscissa": ic.spectral_abscissa,
            "hurwitz": hurwitz,
            "dc_gain_test": stab.to_dict(),
        }
        if args.simulate:
            n = ic.combined_A.shape[0]
            model = StateSpaceModel(ic.combined_A, np.zeros((n, 1)), np.zeros((1, n)))
            tr = simulate(model, np.ones(n), horizon=args.horizon)
            rep["simulation"] = {
                "x0": np.ones(n), "horizon": args.horizon, "steps": len(tr.t) - 1,
                "diverged": tr.diverged, "final_state": tr.final_state,
                "final_norm": float(np.linalg.norm(tr.final_state)),
            }
            if args.trajectory_out:
                with open(args.trajectory_out, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["t"] + [f"x{i}" for i in range(n)])
                    for t, x in zip(tr.t, tr.x):
                        w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
        if not hurwitz:
            code = EXIT_NEGATIVE
    _emit(rep, args.out, stream)
    return code


def bode_table(sys_, grid):
    """Rows of ``omega, (magnitude_db, phase_deg) per channel``; phase unwrapped upward."""
    samples = freq_sweep(sys_, grid)
    p = sys_.p
    R = np.array([s.response for s in samples]).reshape(len(samples), p, p)
    with np.errstate(divide="ignore"):
        mag = 20.0 * np.log10(np.abs(R))
    phase = np.angle(R)
    for i in range(p):
        for j in range(p):
            col = phase[:, i, j]
            ok = np.isfinite(col)
            if ok.any():
                col[ok] = np.unwrap(col[ok])
    header = ["omega_rad_s"]
    for i in range(p):
        for j in range(p):
            header += [f"magnitude_db_{i + 1}_{j + 1}", f"phase_deg_{i + 1}_{j + 1}"]
    rows = []
    for k, w in enumerate(grid):
        row = [float(w)]
        for i in range(p):
            for j in range(p):
                row += [float(mag[k, i, j]), float(np.degrees(phase[k, i, j]))]
        rows.append(row)
    return header, rows


def cmd_bode(args, stream):
    sys_, _ = load_system(args.system)
    header, rows = bode_table(sys_, _grid(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) for v in row])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        stream.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_grid(p, lo, hi):
    p.add_argument("--freq-lo", type=float, default=lo, help=f"lowest frequency in rad/s (default {lo:g})")
    p.add_argument("--freq-hi", type=float, default=hi, help=f"highest frequency in rad/s (default {hi:g})")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS, help="number of log-spaced points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nifeedback", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="check the eligibility hypotheses of a plant")
    p.add_argument("system")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synthesize", help="construct an NI (or SSNI) rendering state feedback")
    p.add_argument("system")
    p.add_argument("--ssni", action="store_true", help="request a strongly strictly NI closed loop")
    p.add_argument("--y2", help="DC gain Y2 (number or JSON matrix)")
    p.add_argument("--k3", help="K3 for relative degree two (number or JSON matrix)")
    p.add_argument("--seed", type=int, help="seed for the random Hb search")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("verify", help="check NI/SSNI by certificate and frequency sweep")
    p.add_argument("system")
    p.add_argument("certificate", nargs="?", help="JSON file with a 'certificate' or 'Y' matrix")
    p.add_argument("--no-certificate", action="store_true", help="ignore a certificate embedded in the system file")
    p.add_argument("--ssni", action="store_true", help="use the strict (SSNI) checks")
    p.add_argument("--seed", type=int, help="seed for the normal-rank test point")
    _add_grid(p, 1e-3, 1e3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("robust", help="robust synthesis against SNI uncertainty")
    p.add_argument("system")
    p.add_argument("--gamma", type=float, help="bound on lambda_max(Delta(0))")
    p.add_argument("--delta", help="uncertainty file or 'sample:SEED'")
    p.add_argument("--y2", help="override Y2 (must satisfy lambda_max(Y2) < 1/gamma)")
    p.add_argument("--seed", type=int, help="seed for the Hb search and for 'sample' without a seed")
    p.add_argument("--simulate", action="store_true", help="simulate the interconnection from x0 = ones")
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--trajectory-out", help="CSV file for the simulated trajectory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_robust)

    p = sub.add_parser("bode", help="frequency response as CSV")
    p.add_argument("system")
    _add_grid(p, 1e-2, 1e2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bode)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, stdout)
    except InputError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except GateError as exc:
        stderr.write(f"ineligible ({exc.reason}): {exc}\n")
        return EXIT_NEGATIVE
    except PreconditionError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except NumericalError as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
