"""Relative error of the stabilized densities against the critical formula over dense N.

Prints, per lambda, the error at the reference schedule, the envelope
(max over each octave of N) and a fitted power law of the envelope.

    python scripts/stabilized_trend_study.py --points 6 --per-octave 64
"""
import argparse

import numpy as np

from jacobi_density import CoefficientFamily, rho_critical, rho_stabilized
from jacobi_density.critical import DEFAULT_SEEDS, resolve_N0

SCHEDULE = (1000, 4000, 16000, 64000)


def study(lam, per_octave, family):
    N0 = resolve_N0(family)
    seeds = DEFAULT_SEEDS if DEFAULT_SEEDS[0] >= 8 * N0 else tuple(8 * N0 * 4 ** k for k in range(3))
    ref = rho_critical(family, lam, seeds=seeds).value
    ns = np.unique(np.geomspace(1000, 128_000, 7 * per_octave + 1).astype(int))
    err = np.array([rho_stabilized(family, int(n), lam, margin=0.0).value / ref - 1 for n in ns])
    sched = [rho_stabilized(family, n, lam, margin=0.0).value / ref - 1 for n in SCHEDULE]
    octaves = [(lo, 2 * lo) for lo in (1000, 2000, 4000, 8000, 16000, 32000, 64000)]
    env = [np.max(np.abs(err[(ns >= lo) & (ns < hi)])) for lo, hi in octaves]
    slope = np.polyfit(np.log([lo for lo, _ in octaves]), np.log(env), 1)[0]
    sign_changes = int(np.sum(np.diff(np.sign(err)) != 0))
    return sched, env, slope, sign_changes


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--per-octave", type=int, default=64)
    ap.add_argument("--alpha", type=float, default=0.5)
    args = ap.parse_args()
    fam = CoefficientFamily.critical(args.alpha)
    for lam in np.linspace(-4, -0.5, args.points):
        sched, env, slope, sc = study(float(lam), args.per_octave, fam)
        mono = all(abs(b) <= abs(a) for a, b in zip(sched, sched[1:]))
        print(f"lambda={lam:+.3f} schedule errors " + " ".join(f"{e:+.2e}" for e in sched)
              + f" nonincreasing={mono}")
        print(f"    octave envelope " + " ".join(f"{e:.2e}" for e in env)
              + f"  envelope ~ N^{slope:.2f}, sign changes {sc}")


if __name__ == "__main__":
    main()
