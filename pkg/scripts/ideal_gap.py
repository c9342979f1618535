"""Coverage heuristic against the exhaustive optimum on random tiny instances.

Run:
    python3 scripts/ideal_gap.py --n 200 --seed 0
"""
import argparse

import numpy as np

from edgesleep.orchestrator.coverage import Capacity, candidate_order, coverage
from edgesleep.orchestrator.ideal import ideal_schedule, random_tiny_instance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    gaps = []
    for _ in range(args.n):
        inst = random_tiny_instance(rng)
        E = inst.n_ecs
        hops = np.array([[abs(a // inst.cols - b // inst.cols) + abs(a % inst.cols - b % inst.cols)
                          for b in range(E)] for a in range(E)])
        reach = inst.latency <= inst.t_max
        cap = Capacity(inst.resources, inst.demand, inst.rate_cap)
        sch = ideal_schedule(inst)
        for origins, dec in zip(inst.origins, sch.steps):
            load = np.zeros((E, E, inst.n_services))
            for u, q in enumerate(origins):
                load[q, q, inst.user_service[u]] += inst.rate
            res = coverage(load, reach, [True] * E, cap, candidate_order(hops))
            gaps.append(len(res.members) - len(dec.active))
    gaps = np.array(gaps)
    print(f"{len(gaps)} frames: mean extra ECs {gaps.mean():.3f}, max {gaps.max()}, "
          f"share optimal {np.mean(gaps == 0):.3f}")


if __name__ == "__main__":
    main()
