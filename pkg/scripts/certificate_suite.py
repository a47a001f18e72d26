"""Synthesize on random eligible plants and report certificate residuals."""

import argparse
import time

import numpy as np

from nifeedback.ltimodel import dc_gain, is_minimal
from nifeedback.nisynth import synth_ni
from nifeedback.numkernel import sym
from nifeedback.randsys import random_eligible_plant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--max-p", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    t0 = time.perf_counter()
    for k in range(args.count):
        r = 1 + k % 2
        sys, spec = random_eligible_plant(rng, r=r, max_n=args.max_n, max_p=args.max_p)
        res = synth_ni(sys)
        cl, Y = res.closed_loop, res.Y
        rows.append((
            r, spec.n, spec.m_a, spec.m_b,
            np.linalg.norm(cl.B + cl.A @ Y @ cl.C.T),
            np.linalg.eigvalsh(sym(cl.A @ Y + Y @ cl.A.T))[-1],
            np.linalg.eigvalsh(Y)[0],
            np.linalg.norm(dc_gain(cl) - res.Y2),
            is_minimal(cl),
            res.hb_attempts,
        ))
    elapsed = time.perf_counter() - t0
    data = np.array(rows, dtype=float)
    print(f"{args.count} plants in {elapsed:.2f} s")
    for r in (1, 2):
        sel = data[data[:, 0] == r]
        if not len(sel):
            continue
        print(f"relative degree {r}: {len(sel)} plants, n in [{sel[:, 1].min():.0f}, {sel[:, 1].max():.0f}], "
              f"{int(np.sum(sel[:, 2] > 0))} with lossless zero dynamics")
        print(f"  max ||B+AYC^T||        {sel[:, 4].max():.2e}")
        print(f"  max lambda(AY+YA^T)    {sel[:, 5].max():.2e}")
        print(f"  min lambda(Y)          {sel[:, 6].min():.2e}")
        print(f"  max ||R(0)-Y2||        {sel[:, 7].max():.2e}")
        print(f"  non-minimal            {int(np.sum(sel[:, 8] == 0))}")
        print(f"  Hb attempts > 1        {int(np.sum(sel[:, 9] > 1))}")


if __name__ == "__main__":
    main()
