"""Random robust-stabilization trials and a loop-gain boundary sweep.

Each trial draws an eligible plant, a bound gamma and a sampled SNI
uncertainty with lambda_max(Delta(0)) <= gamma, synthesizes with the
default Y2 = 0.9/gamma, and checks that the interconnection is Hurwitz.
With --boundary, SISO trials also rescale a first-order lag so the DC
loop gain sits just below and just above one.
"""

import argparse

import numpy as np

from nifeedback.randsys import random_eligible_plant
from nifeedback.robust import (
    UncertainPlant,
    build_interconnection,
    first_order_lag,
    loop_dc_gain,
    sample_sni_uncertainty,
    synth_robust,
)


def trials(rng, count, max_n, max_p):
    stable, abscissae, gains = 0, [], []
    for k in range(count):
        sys, _ = random_eligible_plant(rng, max_n=max_n, max_p=max_p, symmetric_gain=True)
        gamma = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        res = synth_robust(UncertainPlant(sys, gamma))
        cl = res.closed_loop_original()
        delta = sample_sni_uncertainty(res.p, gamma, seed=int(rng.integers(2**31)))
        ic = build_interconnection(cl, delta)
        stable += ic.is_hurwitz()
        abscissae.append(ic.spectral_abscissa)
        gains.append(loop_dc_gain(cl, delta))
    print(f"{stable}/{count} interconnections Hurwitz")
    print(f"loop DC gain range [{min(gains):.3f}, {max(gains):.3f}]")
    print(f"spectral abscissa range [{min(abscissae):.3e}, {max(abscissae):.3e}]")


def boundary(rng, count, eps):
    flips = 0
    for _ in range(count):
        sys, _ = random_eligible_plant(rng, max_n=8, max_p=1, symmetric_gain=True)
        cl = synth_robust(UncertainPlant(sys, 1.0)).closed_loop_original()
        a = rng.uniform(0.2, 5.0)
        unit = loop_dc_gain(cl, first_order_lag(1.0, a))
        below = build_interconnection(cl, first_order_lag((1 - eps) / unit, a)).is_hurwitz()
        above = build_interconnection(cl, first_order_lag((1 + eps) / unit, a)).is_hurwitz()
        flips += below and not above
    print(f"boundary at loop gain 1 +/- {eps:g}: {flips}/{count} flipped from Hurwitz to unstable")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-n", type=int, default=10)
    ap.add_argument("--max-p", type=int, default=3)
    ap.add_argument("--boundary", action="store_true")
    ap.add_argument("--eps", type=float, default=1e-3)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    trials(rng, args.count, args.max_n, args.max_p)
    if args.boundary:
        boundary(rng, min(args.count, 100), args.eps)


if __name__ == "__main__":
    main()
