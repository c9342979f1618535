"""PNap variants side by side with the default scheduler.

pnap_p demotes lifecycle commands below user requests, pnap_sa keeps ECs with imminent
traffic awake and never offloads, pnap_t keeps a 30% capacity margin when offloading.

Run:
    python3 scripts/variants.py configs/high_churn.toml --seeds 1,2,3,4,5,6

Prints per-seed availability and energy and a one-sided sign test of each variant
against PNap on availability.
"""
import argparse

import numpy as np
from scipy.stats import binomtest

from edgesleep.config import load_config
from edgesleep.engine import run

VARIANTS = ["pnap_p", "pnap_sa", "pnap_t"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--seeds", default="1,2,3,4,5,6")
    ap.add_argument("--duration", type=float, default=None)
    args = ap.parse_args()

    over = {} if args.duration is None else {"sim.duration": args.duration}
    cfg = load_config(args.config, over)
    seeds = [int(s) for s in args.seeds.split(",")]
    res = {p: [run(cfg, p, s) for s in seeds] for p in ["pnap"] + VARIANTS}
    for p, reps in res.items():
        av = np.array([r.availability for r in reps])
        er = np.array([r.energy_ratio for r in reps])
        line = f"{p:<8} availability {av.mean():.5f} ± {av.std(ddof=1):.5f}  " \
               f"energy {100 * er.mean():.2f}% ± {100 * er.std(ddof=1):.2f}"
        if p != "pnap":
            base = np.array([r.availability for r in res["pnap"]])
            worse = int((av < base).sum())
            pv = binomtest(worse, len(seeds), 0.5, alternative="greater").pvalue
            line += f"  lower than pnap on {worse}/{len(seeds)} seeds (p={pv:.3g})"
        print(line)


if __name__ == "__main__":
    main()
