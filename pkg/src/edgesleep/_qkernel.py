"""Compiled preemptive-resume priority queue over a batch of arrivals.

Job encoding shared with ``queueing.BatchQueue``:
    kind 0 = user request, 1 = lifecycle command
    cls  0 = served first
    budget: sojourn allowance of a user request; for lifecycle commands a value > 0
            marks a transition that ends in Running (re-enables the service on completion)
    where (carry only): 0 running, 1 waiting in class 0, 2 waiting in class 1
"""
import numpy as np
from numba import njit


@njit(cache=True)
def advance(t0, t1, cores, count_from, svc_ok,
            c_arr, c_rem, c_demand, c_cls, c_budget, c_svc, c_kind, c_tag, c_resumed, c_where,
            n_arr, n_demand, n_cls, n_budget, n_svc, n_kind, n_tag):
    nc = c_arr.shape[0]
    nn = n_arr.shape[0]
    J = nc + nn
    arr = np.empty(J)
    rem = np.empty(J)
    demand = np.empty(J)
    cls = np.empty(J, np.int64)
    budget = np.empty(J)
    svc = np.empty(J, np.int64)
    kind = np.empty(J, np.int64)
    tag = np.empty(J, np.int64)
    resumed = np.empty(J)
    for j in range(nc):
        arr[j] = c_arr[j]
        rem[j] = c_rem[j]
        demand[j] = c_demand[j]
        cls[j] = c_cls[j]
        budget[j] = c_budget[j]
        svc[j] = c_svc[j]
        kind[j] = c_kind[j]
        tag[j] = c_tag[j]
        resumed[j] = c_resumed[j]
    for i in range(nn):
        j = nc + i
        arr[j] = n_arr[i]
        rem[j] = n_demand[i]
        demand[j] = n_demand[i]
        cls[j] = n_cls[i]
        budget[j] = n_budget[i]
        svc[j] = n_svc[i]
        kind[j] = n_kind[i]
        tag[j] = n_tag[i]
        resumed[j] = np.nan

    cap = J + 1
    qbuf = np.empty((2, cap), np.int64)
    qhead = np.zeros(2, np.int64)
    qlen = np.zeros(2, np.int64)
    core_job = np.full(cores, -1, np.int64)
    nbusy = 0
    k = 0
    for j in range(nc):
        w = c_where[j]
        if w == 0:
            core_job[k] = j
            k += 1
            nbusy += 1
        else:
            q = w - 1
            qbuf[q, (qhead[q] + qlen[q]) % cap] = j
            qlen[q] += 1

    stats = np.zeros(6)
    done_tag = np.empty(J, np.int64)
    done_t = np.empty(J)
    ndone = 0
    t = t0
    i = 0
    while True:
        tc = np.inf
        kc = -1
        for kk in range(cores):
            j = core_job[kk]
            if j >= 0:
                f = resumed[j] + rem[j]
                if f < tc:
                    tc = f
                    kc = kk
        ta = n_arr[i] if i < nn else np.inf
        te = tc if tc < ta else ta
        if te >= t1:
            break
        stats[5] += (te - t) * nbusy
        t = te
        if tc <= ta:
            j = core_job[kc]
            rem[j] = 0.0
            core_job[kc] = -1
            nbusy -= 1
            if kind[j] == 0:
                if arr[j] >= count_from:
                    soj = tc - arr[j]
                    stats[0] += 1
                    stats[2] += 1
                    stats[3] += soj
                    stats[4] += soj - demand[j]
                    if soj > budget[j]:
                        stats[1] += 1
            else:
                done_tag[ndone] = tag[j]
                done_t[ndone] = tc
                ndone += 1
                if budget[j] > 0 and svc[j] >= 0:
                    svc_ok[svc[j]] = 1
            for q in range(2):
                if qlen[q] > 0:
                    j2 = qbuf[q, qhead[q]]
                    qhead[q] = (qhead[q] + 1) % cap
                    qlen[q] -= 1
                    core_job[kc] = j2
                    resumed[j2] = tc
                    nbusy += 1
                    break
        else:
            j = nc + i
            i += 1
            if kind[j] == 0 and svc_ok[svc[j]] == 0:
                if arr[j] >= count_from:
                    stats[0] += 1
                    stats[1] += 1
                rem[j] = -1.0  # dropped, never entered the system
                continue
            free = -1
            for kk in range(cores):
                if core_job[kk] < 0:
                    free = kk
                    break
            if free >= 0:
                core_job[free] = j
                resumed[j] = ta
                nbusy += 1
                continue
            victim_core = -1
            for kk in range(cores):
                v = core_job[kk]
                if cls[v] > cls[j]:
                    if victim_core < 0:
                        victim_core = kk
                    else:
                        b = core_job[victim_core]
                        if (cls[v] > cls[b] or (cls[v] == cls[b] and (
                                resumed[v] > resumed[b] or (resumed[v] == resumed[b] and v > b)))):
                            victim_core = kk
            if victim_core >= 0:
                v = core_job[victim_core]
                rem[v] -= ta - resumed[v]
                q = cls[v]
                qhead[q] = (qhead[q] - 1) % cap
                qbuf[q, qhead[q]] = v
                qlen[q] += 1
                core_job[victim_core] = j
                resumed[j] = ta
            else:
                q = cls[j]
                qbuf[q, (qhead[q] + qlen[q]) % cap] = j
                qlen[q] += 1
    if t1 < np.inf:
        stats[5] += (t1 - t) * nbusy

    # rebuild carry: running (core order), class-0 queue, class-1 queue
    m = nbusy + qlen[0] + qlen[1]
    o_arr = np.empty(m)
    o_rem = np.empty(m)
    o_demand = np.empty(m)
    o_cls = np.empty(m, np.int64)
    o_budget = np.empty(m)
    o_svc = np.empty(m, np.int64)
    o_kind = np.empty(m, np.int64)
    o_tag = np.empty(m, np.int64)
    o_resumed = np.empty(m)
    o_where = np.empty(m, np.int64)
    p = 0
    for kk in range(cores):
        j = core_job[kk]
        if j >= 0:
            o_arr[p] = arr[j]
            o_rem[p] = rem[j]
            o_demand[p] = demand[j]
            o_cls[p] = cls[j]
            o_budget[p] = budget[j]
            o_svc[p] = svc[j]
            o_kind[p] = kind[j]
            o_tag[p] = tag[j]
            o_resumed[p] = resumed[j]
            o_where[p] = 0
            p += 1
    for q in range(2):
        for r in range(qlen[q]):
            j = qbuf[q, (qhead[q] + r) % cap]
            o_arr[p] = arr[j]
            o_rem[p] = rem[j]
            o_demand[p] = demand[j]
            o_cls[p] = cls[j]
            o_budget[p] = budget[j]
            o_svc[p] = svc[j]
            o_kind[p] = kind[j]
            o_tag[p] = tag[j]
            o_resumed[p] = np.nan
            o_where[p] = q + 1
            p += 1
    return (stats, done_tag[:ndone].copy(), done_t[:ndone].copy(),
            o_arr, o_rem, o_demand, o_cls, o_budget, o_svc, o_kind, o_tag, o_resumed, o_where)
