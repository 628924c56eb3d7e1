"""Stationary oscillator fluctuations: ensemble variance, ACF and PSD vs theory.

    python3 scripts/equilibrium_fluctuations.py --n-traj 2000 --beta 1
"""

import argparse
import csv
import math
from pathlib import Path

from tqdiff import analytic, spectral
from tqdiff.langevin import SdeConfig, simulate
from tqdiff.phys import BathParams, OscillatorParams, derive


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=2000)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--relaxation-times", type=float, default=100.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/fluctuations")
    args = ap.parse_args()

    p = OscillatorParams(BathParams(T=1.0 / args.beta), 1.0)
    c = derive(p)
    se = analytic.oscillator_sigma2_exact(p)
    k = analytic.effective_spring(p)
    tau_r = p.bath.b / k
    cfg = SdeConfig(
        p,
        n_traj=args.n_traj,
        t_end=args.relaxation_times * tau_r,
        seed=args.seed,
        force="effective_spring",
        record_stride=5,
        record_trajectories=min(args.n_traj, 256),
        burn_in=10 * tau_r,
    )
    r = simulate(cfg)
    z = (r.var[-1] - se) / r.var_stderr[-1]
    print(f"sigma_e^2 = {se:.6f}  ensemble = {r.var[-1]:.6f}  z = {z:+.2f}")

    ts = spectral.TimeSeries.from_trajectories(r.record_dt, r.trajectories)
    max_lag = min(ts.length // 4, int(3 * se / c.D / r.record_dt))
    a = spectral.acf(ts, max_lag)
    theory = analytic.autocorrelation_rr(a.lags, c.D, se)
    cmp = spectral.compare(a.lags, a.values, theory, (0, 3 * se / c.D))
    fit = spectral.fit_exponential_rate(a.lags, a.values, a.stderr)
    print(f"ACF band L1 = {cmp.l1:.3%}  fitted rate = {fit.rate:.4f}  theory = {k / p.bath.b:.4f}")

    s = spectral.psd(ts, min(512, ts.length))
    s_theory = analytic.spectral_density_rr(s.omega, p.bath.b, p.bath.m, p.bath.T, se, p.bath.kB)
    print(f"Parseval ratio = {spectral.parseval_ratio(ts, s):.4f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "acf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "C", "stderr", "C_theory"])
        w.writerows(zip(a.lags, a.values, a.stderr, theory))
    with open(out / "psd.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "S", "S_theory"])
        w.writerows((o, v, t) for o, v, t in zip(s.omega, s.values, s_theory) if o <= 20 * math.pi)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
