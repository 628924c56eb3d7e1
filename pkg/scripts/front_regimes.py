"""Diffusion front across the quantum / classical crossover.

Tabulates sigma^2(t) from the implicit front law, the Einstein law and the
short-time quantum law, plus the moment ODE as a cross-check.

    python3 scripts/front_regimes.py --T 0.1 --out results/front
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from tqdiff import analytic
from tqdiff.moments import MomentModel, integrate_array
from tqdiff.phys import BathParams, OscillatorParams, derive


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--decades", type=float, default=6.0, help="span on each side of lambda^2/D")
    ap.add_argument("--points", type=int, default=121)
    ap.add_argument("--out", default="results/front")
    args = ap.parse_args()

    bath = BathParams(T=args.T)
    c = derive(bath)
    t0 = c.lambda_T**2 / c.D
    ts = t0 * np.logspace(-args.decades, args.decades, args.points)
    ode = integrate_array(MomentModel("free_thermal", OscillatorParams(bath)), 0.0, ts)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "front.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_over_t0", "sigma2_front", "sigma2_ode", "einstein", "quantum_sqrt"])
        for t, s_ode in zip(ts, ode):
            s = analytic.front_sigma2(analytic.FrontQuery(float(t), c))
            w.writerow([t / t0, s, s_ode, 2 * c.D * t, bath.hbar * math.sqrt(t / (bath.m * bath.b))])
    worst = max(abs(analytic.front_sigma2(analytic.FrontQuery(float(t), c)) / s - 1) for t, s in zip(ts, ode))
    print(f"lambda_T^2 = {c.lambda_T**2:.4g}, crossover time = {t0:.4g}")
    print(f"max |front / ODE - 1| = {worst:.2e}")
    print(f"wrote {out / 'front.csv'}")


if __name__ == "__main__":
    main()
