"""Model builders for the car-sharing allocation/relocation program.

Translates economic data plus demand vectors into LpProblem instances:
the mean-demand deterministic program, the scenario-expanded stochastic
program with the served-demand auxiliary variables, and the one-day
recourse program for a fixed allocation.

Two recourse variants are supported. ``paper_literal`` caps each
location's outflow at max(0, stock - demand), linearized exactly with one
binary per location/scenario. ``flow_balance`` replaces the cap by flow
conservation (served + outflow <= stock + inflow), which keeps the
recourse value concave in the allocation and is the variant the cut
decomposition relies on.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .lp import LE, MAX, LpProblem

PAPER_LITERAL = "paper_literal"
FLOW_BALANCE = "flow_balance"
VARIANTS = (PAPER_LITERAL, FLOW_BALANCE)

DEFAULT_REVENUE = 100.0
DEFAULT_CAPACITY = 16000


@dataclass
class CsrpInstance:
    """Economic data: per-location revenue and holding cost, pairwise
    transfer cost, and total fleet capacity."""

    location_ids: list
    revenue: np.ndarray
    holding: np.ndarray
    transfer: np.ndarray
    capacity: int

    def __post_init__(self):
        self.location_ids = list(self.location_ids)
        r = len(self.location_ids)
        self.revenue = np.asarray(self.revenue, dtype=float).ravel()
        self.holding = np.asarray(self.holding, dtype=float).ravel()
        self.transfer = np.asarray(self.transfer, dtype=float).reshape(r, r)
        if self.revenue.size != r or self.holding.size != r:
            raise ValueError("revenue/holding length does not match locations")
        if np.any(self.revenue <= 0):
            raise ValueError("revenue must be positive")
        if np.any(self.holding < 0) or np.any(self.transfer < 0):
            raise ValueError("costs must be nonnegative")
        if np.any(np.diag(self.transfer) != 0):
            raise ValueError("self-transfer cost must be zero")
        self.capacity = int(self.capacity)
        if self.capacity < 0:
            raise ValueError("capacity must be nonnegative")

    @property
    def n_locations(self) -> int:
        return len(self.location_ids)


@dataclass
class FirstStagePlan:
    """Here-and-now allocation: cars placed per location before demand
    reveals. Total must stay within fleet capacity."""

    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64).ravel()
        if np.any(self.x < 0):
            raise ValueError("allocation must be nonnegative")


@dataclass
class RecourseDecision:
    """Wait-and-see decisions per scenario: served demand and moves."""

    served: np.ndarray   # n_scenarios x R
    moves: np.ndarray    # n_scenarios x R x R, zero diagonal


def plan_vector(plan, n_locations: int) -> np.ndarray:
    x = plan.x if isinstance(plan, FirstStagePlan) else np.asarray(plan)
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.size != n_locations:
        raise ValueError(f"plan has {x.size} entries for {n_locations} locations")
    if np.any(x < 0):
        raise ValueError("plan must be nonnegative")
    return x


def arc_list(n: int) -> list:
    return [(i, j) for i in range(n) for j in range(n) if i != j]


class ExtensiveLayout:
    """Column layout of the scenario-expanded program.

    Columns: allocation block, then per scenario a served block and a move
    block, then (paper_literal only) the outflow-cap binaries.
    """

    def __init__(self, n_locations: int, demands: np.ndarray, variant: str):
        self.n = n_locations
        self.n_scenarios = demands.shape[0]
        self.arcs = arc_list(n_locations)
        self.n_arcs = len(self.arcs)
        self.x = np.arange(n_locations)
        base = n_locations
        per = n_locations + self.n_arcs
        self.served = [base + s * per + np.arange(n_locations)
                       for s in range(self.n_scenarios)]
        self.moves = [base + s * per + n_locations + np.arange(self.n_arcs)
                      for s in range(self.n_scenarios)]
        base += self.n_scenarios * per
        self.binaries = {}
        if variant == PAPER_LITERAL:
            for s in range(self.n_scenarios):
                for i in range(n_locations):
                    if demands[s, i] > 0:
                        self.binaries[(s, i)] = base
                        base += 1
        self.n_cols = base


def _check_variant(variant: str):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")


def build_extensive(instance: CsrpInstance, scenarios, variant: str = FLOW_BALANCE) -> LpProblem:
    """Scenario-expanded program: shared integer allocation, per-scenario
    served demand (continuous) and integer moves, expected-profit objective.

    Holding cost is charged once; scenario terms carry their probabilities.
    """
    _check_variant(variant)
    demands = np.asarray(scenarios.demands, dtype=np.int64)
    if demands.ndim != 2 or demands.shape[1] != instance.n_locations:
        raise ValueError("scenario demand matrix does not match instance locations")
    if demands.shape[0] == 0:
        raise ValueError("scenario set is empty")
    probs = np.array([float(p) for p in scenarios.probabilities])
    return _build_allocation_problem(instance, demands, probs, variant)


def build_deterministic(instance: CsrpInstance, avg_demand, variant: str = FLOW_BALANCE) -> LpProblem:
    """Mean-demand program: one demand vector, no scenario weighting."""
    _check_variant(variant)
    avg = np.asarray(avg_demand, dtype=float).ravel()
    if avg.size != instance.n_locations:
        raise ValueError("average demand length does not match instance locations")
    if np.any(avg < 0):
        raise ValueError("average demand must be nonnegative")
    demands = round_half_up(avg).reshape(1, -1)
    return _build_allocation_problem(instance, demands, np.array([1.0]), variant)


def _build_allocation_problem(instance, demands, probs, variant):
    n = instance.n_locations
    layout = ExtensiveLayout(n, demands, variant)
    n_scen = layout.n_scenarios
    ncols = layout.n_cols

    c = np.zeros(ncols)
    c[layout.x] = -instance.holding
    for s in range(n_scen):
        c[layout.served[s]] = probs[s] * instance.revenue
        for k, (i, j) in enumerate(layout.arcs):
            c[layout.moves[s][k]] = -probs[s] * instance.transfer[i, j]

    rows, senses, rhs = [], [], []

    cap_row = np.zeros(ncols)
    cap_row[layout.x] = 1.0
    rows.append(cap_row)
    senses.append(LE)
    rhs.append(float(instance.capacity))

    for s in range(n_scen):
        if variant == FLOW_BALANCE:
            # served_i + outflow_i - inflow_i - x_i <= 0
            for i in range(n):
                row = np.zeros(ncols)
                row[layout.served[s][i]] = 1.0
                row[layout.x[i]] = -1.0
                for k, (a, b_) in enumerate(layout.arcs):
                    if a == i:
                        row[layout.moves[s][k]] += 1.0
                    if b_ == i:
                        row[layout.moves[s][k]] -= 1.0
                rows.append(row)
                senses.append(LE)
                rhs.append(0.0)
        else:
            # served_i - inflow_i - x_i <= 0
            for i in range(n):
                row = np.zeros(ncols)
                row[layout.served[s][i]] = 1.0
                row[layout.x[i]] = -1.0
                for k, (a, b_) in enumerate(layout.arcs):
                    if b_ == i:
                        row[layout.moves[s][k]] -= 1.0
                rows.append(row)
                senses.append(LE)
                rhs.append(0.0)
            # outflow cap max(0, x_i - d_i) via one binary per location
            for i in range(n):
                out_cols = [layout.moves[s][k] for k, (a, _) in enumerate(layout.arcs) if a == i]
                d = float(demands[s, i])
                if d == 0:
                    row = np.zeros(ncols)
                    row[out_cols] = 1.0
                    row[layout.x[i]] = -1.0
                    rows.append(row)
                    senses.append(LE)
                    rhs.append(0.0)
                    continue
                bcol = layout.binaries[(s, i)]
                row = np.zeros(ncols)   # outflow - x_i + d*b <= 0
                row[out_cols] = 1.0
                row[layout.x[i]] = -1.0
                row[bcol] = d
                rows.append(row)
                senses.append(LE)
                rhs.append(0.0)
                row = np.zeros(ncols)   # outflow - C*b <= 0
                row[out_cols] = 1.0
                row[bcol] = -float(instance.capacity)
                rows.append(row)
                senses.append(LE)
                rhs.append(0.0)
                row = np.zeros(ncols)   # d*b - x_i <= 0 (binary only when surplus)
                row[bcol] = d
                row[layout.x[i]] = -1.0
                rows.append(row)
                senses.append(LE)
                rhs.append(0.0)

    lower = np.zeros(ncols)
    upper = np.full(ncols, np.inf)
    integer = np.zeros(ncols, dtype=bool)
    integer[layout.x] = True
    for s in range(n_scen):
        upper[layout.served[s]] = demands[s].astype(float)
        integer[layout.moves[s]] = True
    for bcol in layout.binaries.values():
        upper[bcol] = 1.0
        integer[bcol] = True

    return LpProblem(MAX, c, np.array(rows), senses, np.array(rhs),
                     lower=lower, upper=upper, integer=integer)


def build_recourse(instance: CsrpInstance, plan, demand, variant: str = FLOW_BALANCE) -> LpProblem:
    """One-day recourse in (served, moves) for a fixed allocation.

    Row order is the cut contract: the first R rows are the stock rows
    whose right-hand side is the allocation (flow rows for flow_balance,
    availability rows for paper_literal); paper_literal appends R outflow
    rows with the surplus caps, computed as constants since the allocation
    is known. The holding-cost constant is not part of the objective.
    """
    _check_variant(variant)
    x = plan_vector(plan, instance.n_locations)
    if x.sum() > instance.capacity:
        raise ValueError("plan exceeds fleet capacity")
    d = np.asarray(demand, dtype=np.int64).ravel()
    if d.size != instance.n_locations:
        raise ValueError("demand length does not match instance locations")
    if np.any(d < 0):
        raise ValueError("demand must be nonnegative")

    n = instance.n_locations
    arcs = arc_list(n)
    n_arcs = len(arcs)
    ncols = n + n_arcs  # served block then move block

    c = np.zeros(ncols)
    c[:n] = instance.revenue
    for k, (i, j) in enumerate(arcs):
        c[n + k] = -instance.transfer[i, j]

    rows, senses, rhs = [], [], []
    for i in range(n):
        row = np.zeros(ncols)
        row[i] = 1.0
        for k, (a, b_) in enumerate(arcs):
            if variant == FLOW_BALANCE and a == i:
                row[n + k] += 1.0
            if b_ == i:
                row[n + k] -= 1.0
        rows.append(row)
        senses.append(LE)
        rhs.append(float(x[i]))
    if variant == PAPER_LITERAL:
        caps = np.maximum(0, x - d)
        for i in range(n):
            row = np.zeros(ncols)
            for k, (a, _) in enumerate(arcs):
                if a == i:
                    row[n + k] = 1.0
            rows.append(row)
            senses.append(LE)
            rhs.append(float(caps[i]))

    lower = np.zeros(ncols)
    upper = np.full(ncols, np.inf)
    upper[:n] = d.astype(float)
    integer = np.zeros(ncols, dtype=bool)
    integer[n:] = True

    return LpProblem(MAX, c, np.array(rows), senses, np.array(rhs),
                     lower=lower, upper=upper, integer=integer)


def recourse_moves(solution_x: np.ndarray, n_locations: int) -> np.ndarray:
    """Unpack a recourse solution vector into an R x R move matrix."""
    moves = np.zeros((n_locations, n_locations))
    for k, (i, j) in enumerate(arc_list(n_locations)):
        moves[i, j] = solution_x[n_locations + k]
    return moves


def round_half_up(values) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# instance configuration files

_GAUSSIAN_RE = re.compile(r"^gaussian\(\s*([-\d.eE+]+)\s*,\s*([-\d.eE+]+)\s*\)$")
_DISTANCE_RE = re.compile(
    r"^distance\(\s*([^,]+?)\s*,\s*min\s*=\s*([-\d.eE+]+)\s*,\s*max\s*=\s*([-\d.eE+]+)\s*\)$")


def load_coords(path) -> dict:
    """Planar coordinates per location id from a CSV with header id,x,y."""
    coords = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            raise ValueError(f"coords file {path} is empty")
        for line in fh:
            if not line.strip():
                continue
            loc, xs, ys = line.strip().split(",")[:3]
            coords[int(loc)] = (float(xs), float(ys))
    return coords


def _distance_matrix(location_ids, coords_path, lo, hi):
    coords = load_coords(coords_path)
    missing = [i for i in location_ids if i not in coords]
    if missing:
        raise ValueError(f"coords file lacks locations {missing}")
    pts = np.array([coords[i] for i in location_ids], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    off = ~np.eye(len(location_ids), dtype=bool)
    dmin, dmax = dist[off].min(), dist[off].max()
    t = np.zeros_like(dist)
    if dmax > dmin:
        t[off] = lo + (hi - lo) * (dist[off] - dmin) / (dmax - dmin)
    else:
        t[off] = lo
    return t


def make_instance(location_ids, revenue=None, holding=None, transfer=None,
                  capacity=None, seed: int = 0) -> CsrpInstance:
    """Build an instance from config-style field values.

    ``revenue`` is a scalar or per-location list (default 100/car).
    ``holding`` is a list or a spec string like ``gaussian(20, 9)`` (mean,
    variance) drawn with ``seed``. ``transfer`` is a full matrix or a spec
    string like ``distance(coords.csv, min=10, max=100)`` mapping pairwise
    Euclidean distances affinely into [min, max]. ``capacity`` defaults to
    16000.
    """
    n = len(location_ids)
    if revenue is None:
        revenue = DEFAULT_REVENUE
    if np.isscalar(revenue):
        revenue = np.full(n, float(revenue))
    if holding is None:
        holding = "gaussian(20, 9)"
    if isinstance(holding, str):
        m = _GAUSSIAN_RE.match(holding.strip())
        if not m:
            raise ValueError(f"bad holding spec {holding!r}")
        mean, var = float(m.group(1)), float(m.group(2))
        rng = np.random.default_rng(seed)
        holding = np.maximum(rng.normal(mean, math.sqrt(var), size=n), 0.0)
    if isinstance(transfer, str):
        m = _DISTANCE_RE.match(transfer.strip())
        if not m:
            raise ValueError(f"bad transfer spec {transfer!r}")
        transfer = _distance_matrix(location_ids, m.group(1),
                                    float(m.group(2)), float(m.group(3)))
    elif transfer is None:
        raise ValueError("transfer cost matrix or spec is required")
    if capacity is None:
        capacity = DEFAULT_CAPACITY
    return CsrpInstance(location_ids, revenue, holding, transfer, capacity)


def instance_to_dict(instance: CsrpInstance) -> dict:
    return {
        "location_ids": list(instance.location_ids),
        "revenue": [float(v) for v in instance.revenue],
        "holding": [float(v) for v in instance.holding],
        "transfer": [[float(v) for v in row] for row in instance.transfer],
        "capacity": int(instance.capacity),
    }


def instance_from_dict(data: dict) -> CsrpInstance:
    return CsrpInstance(data["location_ids"], data["revenue"], data["holding"],
                        data["transfer"], data["capacity"])


def save_instance(instance: CsrpInstance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_instance(path) -> CsrpInstance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
