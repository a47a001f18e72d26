"""Synthesize the three-state chain example and print what comes out.

Prints the normal-form gains, the control law in normal-form coordinates,
the closed-loop transfer function, and the robustness check against
0.9/(s+1), then writes a Bode table next to the system file unless
--no-bode is given.
"""

import argparse
from pathlib import Path

import numpy as np
import scipy.linalg

from nifeedback.cli import bode_table, load_system, options_from_dict
from nifeedback.ltimodel import dc_gain, logspace_grid, siso_tf_coefficients
from nifeedback.nisynth import synth_ni, synth_ssni
from nifeedback.robust import UncertainPlant, build_interconnection, first_order_lag, loop_dc_gain, synth_robust

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--system", default=ROOT / "systems" / "three_chain.json", type=Path)
    ap.add_argument("--bode-out", type=Path, default=Path("example_bode.csv"))
    ap.add_argument("--no-bode", action="store_true")
    args = ap.parse_args()

    plant, doc = load_system(args.system)
    opts = options_from_dict(doc.get("options", {}))
    res = synth_ni(plant, opts)
    print("gains:", {k: v.ravel().tolist() for k, v in res.gains.items()})
    print("law in (z, x1, x2):", np.round(res.scb_gain().ravel(), 12).tolist())
    print("law in x:", np.round(res.Kx.ravel(), 12).tolist())
    num, den = siso_tf_coefficients(res.closed_loop)
    print("R(s) numerator:", np.round(num, 12).tolist(), " denominator:", np.round(den, 12).tolist())
    print("R(0) =", dc_gain(res.closed_loop)[0, 0])
    print("certificate check:", res.report.verdict)

    refusal = synth_ssni(plant, opts)
    print("SSNI request:", refusal.reason if not refusal else "synthesized")

    rob = synth_robust(UncertainPlant(plant, float(doc.get("gamma", 1.0))), opts)
    cl = rob.closed_loop_original()
    delta = first_order_lag(0.9, 1.0)
    ic = build_interconnection(cl, delta)
    print("loop DC gain with 0.9/(s+1):", loop_dc_gain(cl, delta))
    print("interconnection poles:", np.round(np.sort_complex(ic.eigenvalues), 6).tolist())
    for t in (10.0, 20.0, 25.0, 30.0):
        x = scipy.linalg.expm(t * ic.combined_A) @ np.ones(4)
        print(f"  ||x({t:g})|| = {np.linalg.norm(x):.3e}")

    if not args.no_bode:
        header, rows = bode_table(res.closed_loop, logspace_grid(1e-2, 1e2, 400))
        with open(args.bode_out, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(v) for v in row) + "\n")
        print("Bode table written to", args.bode_out)


if __name__ == "__main__":
    main()
