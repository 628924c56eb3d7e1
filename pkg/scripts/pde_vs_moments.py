"""Quantum Smoluchowski PDE against the moment ODE on a sequence of grids.

    python3 scripts/pde_vs_moments.py --grids 640 1024 2048
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from tqdiff import pde
from tqdiff.moments import MomentModel, integrate_array
from tqdiff.phys import BathParams, OscillatorParams, derive


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[640, 1024])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--t-end", type=float, default=10.0, help="in units of lambda^2/D")
    ap.add_argument("--out", default="results/pde")
    args = ap.parse_args()

    p = OscillatorParams(BathParams(T=args.T))
    c = derive(p)
    lam2 = c.lambda_T**2
    t_end = args.t_end * lam2 / c.D
    ts = np.linspace(0, t_end, 21)[1:]
    ode = integrate_array(MomentModel("free_thermal", p), lam2, ts)

    rows = []
    for n in args.grids:
        t0 = time.perf_counter()
        r = pde.evolve(pde.gaussian_run("free_thermal", p, lam2, t_end, n=n, output_times=ts))
        rows.append(
            {
                "n": n,
                "max_rel_dev": float(np.abs(r.sigma2 / ode - 1).max()),
                "mass_drift": float(np.abs(r.mass - 1).max()),
                "min_density": r.min_value,
                "steps": r.steps,
                "halvings": r.halvings,
                "seconds": time.perf_counter() - t0,
            }
        )
        print("  ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in rows[-1].items()))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pde_vs_moments.json").write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
