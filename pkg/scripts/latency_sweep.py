"""Energy and availability against the latency limit for every baseline.

Run:
    python3 scripts/latency_sweep.py configs/scenario.toml --out results/latency --jobs 4

Writes results.csv (one row per run) and summary.json (mean/std per policy and t_max),
then prints a compact table. Interrupted sweeps resume from the output directory.
"""
import argparse
import json
from pathlib import Path

from edgesleep.config import load_config
from edgesleep.engine import summarize, sweep, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="results/latency")
    ap.add_argument("--duration", type=float, default=600.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--policies", default="pnap,sleepy,reactive,always_on")
    args = ap.parse_args()

    cfg = load_config(args.config, {"sim.duration": args.duration})
    out = Path(args.out)
    reps = sweep(cfg, args.policies.split(","), cfg.sweep.t_max, cfg.sweep.seeds,
                 jobs=args.jobs, out_dir=out)
    write_rows(out / "results.csv", reps)
    summary = summarize(reps)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))

    print(f"{'policy':<10} {'t_max':>6} {'energy%':>8} {'±':>6} {'avail':>8} {'±':>7}")
    for pol, cells in summary.items():
        for tms, c in sorted(cells.items(), key=lambda kv: float(kv[0])):
            er, av = c["energy_ratio"], c["availability"]
            print(f"{pol:<10} {tms:>6} {100 * er['mean']:8.2f} {100 * er['std']:6.2f} "
                  f"{av['mean']:8.5f} {av['std']:7.5f}")


if __name__ == "__main__":
    main()
