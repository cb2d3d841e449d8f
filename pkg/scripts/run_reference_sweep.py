"""Three-route sweep of the critical reference family with a short summary.

    python scripts/run_reference_sweep.py --config configs/critical_reference.cfg \
        --out reference.csv --jobs 4
"""
import argparse
import time

from jacobi_density.harness import validate_config
from jacobi_density.harness.sweep import run_density_sweep, to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/critical_reference.cfg")
    ap.add_argument("--out", default=None, help="CSV path (summary only when omitted)")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    with open(args.config, encoding="utf-8") as fh:
        cfg = validate_config(fh.read())
    t = time.perf_counter()
    report = run_density_sweep(cfg, jobs=args.jobs)
    secs = time.perf_counter() - t
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(to_csv(report))
    s = report.summary()
    print(f"{s['rows']} points in {secs:.1f} s, {s['failures']} failed cells")
    for key in ("max_delta_oracle", "median_delta_oracle", "max_delta_stabilized_final",
                "median_delta_stabilized_final", "trend_fraction"):
        if s[key] is not None:
            print(f"  {key:30s} {s[key]:.3e}")
    for name, ok in s["checks"].items():
        print(f"  check {name:24s} {'pass' if ok else 'FAIL'}")


if __name__ == "__main__":
    main()
