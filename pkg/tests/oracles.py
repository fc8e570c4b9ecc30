"""Independent brute-force oracles used to verify the solvers.

Everything here is deliberately naive: basis enumeration for LPs, subset
enumeration for knapsacks, and full grid enumeration of relocation moves.
None of it shares code with the solvers under test.
"""
from __future__ import annotations

import itertools

import numpy as np


def lp_vertex_optimum(sense, c, a, senses, b):
    """Optimal objective of an LP with x >= 0 by enumerating all bases.

    Converts rows to equalities with slack/surplus columns, solves every
    m-column basis, keeps feasible ones, and returns (best objective,
    best x) or (None, None) when no feasible basis exists. Only valid for
    problems whose optimum is attained at a basic feasible solution
    (bounded LPs).
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = a.shape
    cols = [a]
    for i, s in enumerate(senses):
        if s == "<=":
            e = np.zeros((m, 1))
            e[i, 0] = 1.0
            cols.append(e)
        elif s == ">=":
            e = np.zeros((m, 1))
            e[i, 0] = -1.0
            cols.append(e)
    amat = np.hstack(cols)
    total = amat.shape[1]
    cext = np.zeros(total)
    cext[:n] = c

    combos = np.array(list(itertools.combinations(range(total), m)))
    bases = amat[:, combos].transpose(1, 0, 2)  # (n_combos, m, m)
    dets = np.linalg.det(bases)
    ok = np.abs(dets) > 1e-9
    if not ok.any():
        return None, None
    rhs = np.broadcast_to(b.reshape(1, m, 1), (int(ok.sum()), m, 1))
    sols = np.linalg.solve(bases[ok], rhs)[:, :, 0]
    feas = np.all(sols >= -1e-9, axis=1)
    if not feas.any():
        return None, None
    combos_ok = combos[ok][feas]
    sols = sols[feas]
    objs = np.einsum("ij,ij->i", cext[combos_ok], sols)
    best = np.argmax(objs) if sense == "max" else np.argmin(objs)
    x = np.zeros(total)
    x[combos_ok[best]] = sols[best]
    return float(objs[best]), x[:n]


def knapsack_optimum(values, weights, cap):
    """0/1 knapsack by full subset enumeration."""
    n = len(values)
    best = 0.0
    for mask in range(1 << n):
        w = v = 0.0
        for j in range(n):
            if mask >> j & 1:
                w += weights[j]
                v += values[j]
        if w <= cap and v > best:
            best = v
    return best


_GRID_CACHE = {}


def _move_flows(n_locations, cap):
    """All move grids up to ``cap`` per arc, with per-grid out/in flows."""
    key = (n_locations, cap)
    if key not in _GRID_CACHE:
        arcs = [(i, j) for i in range(n_locations) for j in range(n_locations)
                if i != j]
        grid = np.array(list(itertools.product(range(cap + 1), repeat=len(arcs))),
                        dtype=np.int64)
        out = np.zeros((grid.shape[0], n_locations), dtype=np.int64)
        inflow = np.zeros((grid.shape[0], n_locations), dtype=np.int64)
        for k, (i, j) in enumerate(arcs):
            out[:, i] += grid[:, k]
            inflow[:, j] += grid[:, k]
        _GRID_CACHE[key] = (arcs, grid, out, inflow)
    return _GRID_CACHE[key]


def recourse_optimum(revenue, transfer, x, demand, variant, move_cap=None):
    """Exact one-day relocation recourse value by enumerating all move grids.

    ``variant`` selects the feasibility rule: 'flow_balance' requires
    served + outflow <= stock + inflow at each location; 'paper_literal'
    caps each location's outflow at max(0, stock - demand) and serves up to
    stock + inflow. Served demand is filled greedily once moves are fixed,
    which is exact because revenue is nonnegative.
    """
    r = np.asarray(revenue, dtype=float)
    t = np.asarray(transfer, dtype=float)
    x = np.asarray(x, dtype=np.int64)
    d = np.asarray(demand, dtype=np.int64)
    n = len(x)
    cap = int(move_cap if move_cap is not None else x.sum())
    arcs, grid, out, inflow = _move_flows(n, cap)
    cost = grid @ np.array([t[i, j] for (i, j) in arcs])

    if variant == "flow_balance":
        feasible = np.all(out <= x[None, :] + inflow, axis=1)
        avail = x[None, :] + inflow - out
    elif variant == "paper_literal":
        caps = np.maximum(0, x - d)
        feasible = np.all(out <= caps[None, :], axis=1)
        avail = x[None, :] + inflow
    else:
        raise ValueError(f"unknown variant {variant!r}")

    served = np.minimum(np.maximum(avail, 0), d[None, :])
    profit = served @ r - cost
    profit[~feasible] = -np.inf
    return float(profit.max())


def plan_enumeration_optimum(instance, demands, probabilities, variant):
    """Best overall profit by enumerating every feasible allocation.

    For each allocation with total stock within capacity, sums the exact
    per-scenario recourse optimum (grid enumeration) weighted by scenario
    probability, minus holding cost. Tractable only for tiny instances.
    """
    r = instance.revenue
    h = instance.holding
    t = instance.transfer
    cap = int(instance.capacity)
    n = len(r)
    probs = [float(p) for p in probabilities]
    best = -np.inf
    best_x = None
    for x in itertools.product(range(cap + 1), repeat=n):
        if sum(x) > cap:
            continue
        xx = np.array(x, dtype=np.int64)
        value = -float(h @ xx)
        for d, p in zip(demands, probs):
            value += p * recourse_optimum(r, t, xx, d, variant, move_cap=cap)
        if value > best + 1e-12:
            best = value
            best_x = xx
    return best, best_x
