"""Greedy primal-dual style baseline with the (1.11, 1.78) guarantee.

Event-driven simulation of the budget-growth greedy: all unconnected
clients raise a shared budget; a closed facility opens once the offers it
collects (budget minus distance from unconnected clients, plus the saving
current clients would gain by switching) cover its opening cost.  Critical
times are processed exactly rather than by time-stepping, so runs are
deterministic; ties break by facility index, then client index.
"""

from __future__ import annotations

import math

import numpy as np

from .instance import UflInstance
from .rounding import IntegralSolution

#: Cost guarantee constants: solution cost is at most
#: FACILITY_FACTOR * F + CONNECTION_FACTOR * C for every solution split (F, C).
FACILITY_FACTOR = 1.11
CONNECTION_FACTOR = 1.78

_EVENT_EPS = 1e-12


def _opening_time(f_cost, dists, fixed_offer, alpha):
    """Earliest t >= alpha at which sum(max(t - d, 0)) + fixed_offer covers
    f_cost; dists are the unconnected clients' distances, sorted."""
    need = f_cost - fixed_offer
    if need <= _EVENT_EPS:
        return alpha
    if dists.size == 0:
        return math.inf
    prefix = 0.0
    for k in range(dists.size):
        prefix += dists[k]
        hi = dists[k + 1] if k + 1 < dists.size else math.inf
        t = (need + prefix) / (k + 1)
        if t >= dists[k] - _EVENT_EPS and t <= hi + _EVENT_EPS:
            return max(t, alpha)
    return math.inf


def jms_solve(inst: UflInstance) -> IntegralSolution:
    """Run the greedy and return a feasible solution with every client on
    its nearest open facility."""
    n_c, n_f = inst.dist.shape
    d = inst.dist
    f = inst.opening_cost
    unconnected = np.ones(n_c, dtype=bool)
    conn_cost = np.full(n_c, math.inf)
    is_open = np.zeros(n_f, dtype=bool)
    alpha = 0.0

    while unconnected.any():
        u_idx = np.nonzero(unconnected)[0]

        # offers from connected clients are constant between events
        best_fac, best_time = -1, math.inf
        for i in np.nonzero(~is_open)[0]:
            fixed = float(np.sum(np.maximum(conn_cost[~unconnected]
                                            - d[~unconnected, i], 0.0)))
            t = _opening_time(f[i], np.sort(d[u_idx, i]), fixed, alpha)
            if t < best_time - _EVENT_EPS:
                best_fac, best_time = i, t

        # earliest contact of an unconnected client with an open facility
        best_cli, best_cli_fac, cli_time = -1, -1, math.inf
        if is_open.any():
            o_idx = np.nonzero(is_open)[0]
            sub = d[np.ix_(u_idx, o_idx)]
            pos = np.unravel_index(np.argmin(sub), sub.shape)
            cli_time = float(sub[pos])
            best_cli, best_cli_fac = int(u_idx[pos[0]]), int(o_idx[pos[1]])

        if best_time <= cli_time + _EVENT_EPS:
            # facility event first on ties (facility order already minimal:
            # the scan above keeps the lowest index at equal times)
            alpha = max(alpha, best_time)
            is_open[best_fac] = True
            newly = unconnected & (d[:, best_fac] <= alpha + _EVENT_EPS)
            conn_cost[newly] = d[newly, best_fac]
            unconnected[newly] = False
            switch = ~unconnected & (d[:, best_fac] < conn_cost - _EVENT_EPS)
            conn_cost[switch] = d[switch, best_fac]
        else:
            alpha = max(alpha, cli_time)
            conn_cost[best_cli] = d[best_cli, best_cli_fac]
            unconnected[best_cli] = False

    open_idx = np.nonzero(is_open)[0]
    sub = d[:, open_idx]
    pos = np.argmin(sub, axis=1)
    assignment = open_idx[pos]
    client_costs = sub[np.arange(n_c), pos]
    return IntegralSolution(open_facilities=open_idx, assignment=assignment,
                            facility_cost=float(f[open_idx].sum()),
                            client_costs=client_costs)
