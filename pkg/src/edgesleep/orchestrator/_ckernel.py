"""Compiled twin of ``coverage.coverage``; same visiting order, same arithmetic."""
import numpy as np
from numba import njit


@njit(cache=True)
def _fits(n_after, rate_after, resources, demand, rate_cap, margin, enabled):
    if not enabled:
        return False
    scale = 1.0 - margin
    for i in range(resources.shape[0]):
        if n_after * demand[i] > resources[i] * scale + 1e-9:
            return False
    return rate_after < rate_cap * scale


@njit(cache=True)
def coverage_kernel(load, reach, active, resources, demand, rate_cap, margin, enabled, order):
    E = load.shape[0]
    S = load.shape[2]
    load = load.copy()
    tests = np.zeros(E * E + 1, np.int64)
    rounds = 0
    change = True
    while change:
        change = False
        rate = np.zeros(E)
        svc_rate = np.zeros((E, S))
        for w in range(E):
            for q in range(E):
                for s in range(S):
                    rate[w] += load[w, q, s]
                    svc_rate[w, s] += load[w, q, s]
        n_svc = np.zeros(E, np.int64)
        for w in range(E):
            for s in range(S):
                if svc_rate[w, s] > 0:
                    n_svc[w] += 1
        # sort: non-active first, then ascending served rate, then id
        keys = np.empty(E)
        nodes = np.arange(E)
        for e in range(E):
            keys[e] = rate[e]
        for i in range(1, E):
            j = i
            while j > 0:
                a, b = nodes[j - 1], nodes[j]
                ka = (1 if active[a] else 0, keys[a], a)
                kb = (1 if active[b] else 0, keys[b], b)
                if ka > kb:
                    nodes[j - 1], nodes[j] = b, a
                    j -= 1
                else:
                    break
        ntest = 0
        for idx in range(E):
            n = nodes[idx]
            if rate[n] <= 0:
                continue
            new = load.copy()
            r2 = rate.copy()
            sv2 = svc_rate.copy()
            ns2 = n_svc.copy()
            for q in range(E):
                for s in range(S):
                    amount = new[n, q, s]
                    if load[n, q, s] <= 0 or amount <= 0:
                        continue
                    for k in range(E):
                        w = order[q, k]
                        if w == n or not reach[n, w] or not reach[q, w] or r2[w] <= 0:
                            continue
                        ntest += 1
                        adds = sv2[w, s] <= 0
                        if _fits(ns2[w] + (1 if adds else 0), r2[w] + amount, resources,
                                 demand, rate_cap, margin, enabled):
                            new[w, q, s] += amount
                            new[n, q, s] = 0.0
                            r2[w] += amount
                            r2[n] -= amount
                            sv2[w, s] += amount
                            sv2[n, s] -= amount
                            if adds:
                                ns2[w] += 1
                            break
            residual = 0.0
            for q in range(E):
                for s in range(S):
                    residual += new[n, q, s]
            if residual == 0:
                load = new
                change = True
                break
        if rounds < tests.shape[0]:
            tests[rounds] = ntest
        rounds += 1
    return load, rounds, tests[:min(rounds, tests.shape[0])].copy()
