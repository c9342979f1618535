"""Time-averaged number of ECs per activity state under PNap, per latency limit.

Run:
    python3 scripts/sleep_states.py configs/scenario.toml --out results/states
"""
import argparse
from pathlib import Path

import numpy as np

from edgesleep.config import load_config
from edgesleep.engine import OCCUPANCY_LABELS, sweep

LABELS = [l for l in OCCUPANCY_LABELS if l != "S2"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="results/states")
    ap.add_argument("--policy", default="pnap")
    ap.add_argument("--duration", type=float, default=600.0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config, {"sim.duration": args.duration})
    out = Path(args.out)
    reps = sweep(cfg, [args.policy], cfg.sweep.t_max, cfg.sweep.seeds, jobs=args.jobs,
                 out_dir=out)
    rows = ["t_max_ms," + ",".join(f"{l.lower()}_mean,{l.lower()}_std" for l in LABELS)]
    print(f"{'t_max':>6} " + " ".join(f"{l:>11}" for l in LABELS))
    for t in sorted({r.t_max for r in reps}):
        cell = [r for r in reps if r.t_max == t]
        stats = []
        for label in LABELS:
            n = np.array([r.occupancy(label) * len(r.energy_per_ec) for r in cell])
            stats.append((n.mean(), n.std(ddof=1) if len(n) > 1 else 0.0))
        rows.append(f"{t * 1e3:g}," + ",".join(f"{m!r},{s!r}" for m, s in stats))
        print(f"{t * 1e3:6g} " + " ".join(f"{m:6.2f}±{s:4.2f}" for m, s in stats))
    (out / "states.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
