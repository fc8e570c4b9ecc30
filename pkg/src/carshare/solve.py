"""Solution drivers: cut decomposition, direct scenario-expanded solves,
and the sample-average replication loop.

The decomposition keeps the integer allocation in the master and the
per-scenario recourse in LP subproblems whose duals supply optimality cuts
and whose infeasibility certificates supply feasibility cuts. An alternate
``split="paper"`` mode keeps the served-demand variables in the master as
well, leaving only the moves in the subproblems; that split needs
feasibility cuts in earnest, since the master can promise more served
demand than the stock can cover. Cut coefficients always come from the LP
engine, never from a hand-derived dual form.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .csrp_models import (
    FLOW_BALANCE, PAPER_LITERAL, CsrpInstance, ExtensiveLayout, FirstStagePlan,
    RecourseDecision, arc_list, build_extensive, build_recourse, plan_vector,
)
from .lp import INFEASIBLE, LE, MAX, OPTIMAL, LpProblem, solve_lp, solve_mip
from .scenario import ScenarioSet, generate

BENDERS = "benders"
EXTENSIVE = "extensive"

STANDARD_SPLIT = "standard"
PAPER_SPLIT = "paper"

XI_MIN = 1e-7
XI_MAX = 1e-4
XI_DEFAULT = 1e-6


class SolveError(RuntimeError):
    """A solver failed to reach a usable answer."""


class ModelTooLargeError(ValueError):
    """The scenario-expanded model exceeds the dense-solver budget."""


@dataclass
class BendersCut:
    """One master inequality. Optimality cuts bound a recourse estimate:
    theta_k <= coef.v + const; feasibility cuts restrict the master
    directly: 0 <= coef.v + const. ``v`` spans the structural master
    columns (allocation, plus served blocks under the paper split)."""

    kind: str                 # "optimality" | "feasibility"
    var_coef: np.ndarray
    const: float
    theta_index: int = None   # None for feasibility cuts
    scenario: int = None      # None for aggregated cuts


@dataclass
class BendersState:
    """Bound history and cut pool of one decomposition run."""

    xi: float
    upper_bound: float = np.inf
    lower_bound: float = -np.inf
    iterations: int = 0
    cuts: list = field(default_factory=list)
    incumbent: np.ndarray = None
    converged: bool = False
    upper_history: list = field(default_factory=list)
    lower_history: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


def _check_xi(xi: float):
    if not (XI_MIN <= xi <= XI_MAX):
        raise ValueError(f"xi must lie in [{XI_MIN:g}, {XI_MAX:g}], got {xi:g}")


def recourse_value(instance: CsrpInstance, plan, demand,
                   variant: str = FLOW_BALANCE, integral: bool = True) -> float:
    """Optimal one-day recourse profit (revenue minus moving cost) for a
    fixed allocation; holding cost is not included."""
    problem = build_recourse(instance, plan, demand, variant)
    sol = solve_mip(problem) if integral else solve_lp(problem)
    if sol.status != OPTIMAL:
        raise SolveError(f"recourse solve ended with status {sol.status}")
    return sol.objective


def expected_profit(instance: CsrpInstance, plan, scenarios: ScenarioSet,
                    variant: str = FLOW_BALANCE) -> float:
    """Probability-weighted profit of a fixed allocation over a scenario
    set, holding cost charged once."""
    x = plan_vector(plan, instance.n_locations)
    total = -float(instance.holding @ x)
    for demand, p in zip(scenarios.demands, scenarios.probabilities):
        total += float(p) * recourse_value(instance, x, demand, variant)
    return total


# ---------------------------------------------------------------------------
# cut decomposition


def _paper_split_subproblem(instance, xbar, fbar_s, demand):
    """Moves-only subproblem for fixed allocation and served targets:
    max -moving cost s.t. outflow_i - inflow_i <= x_i - f_i per location."""
    n = instance.n_locations
    arcs = arc_list(n)
    c = np.array([-instance.transfer[i, j] for (i, j) in arcs])
    rows = np.zeros((n, len(arcs)))
    for k, (i, j) in enumerate(arcs):
        rows[i, k] += 1.0
        rows[j, k] -= 1.0
    rhs = xbar.astype(float) - fbar_s
    return LpProblem(MAX, c, rows, [LE] * n, rhs)


def solve_benders(instance: CsrpInstance, scenarios: ScenarioSet,
                  variant: str = FLOW_BALANCE, xi: float = XI_DEFAULT,
                  max_iterations: int = 500, multi_cut: bool = False,
                  split: str = STANDARD_SPLIT, node_limit: int = 1_000_000):
    """L-shaped loop: integer master over the allocation (plus an expected
    recourse estimate), LP subproblems per scenario, one aggregated cut per
    iteration (or one per scenario with ``multi_cut``). Terminates when
    upper - lower <= xi * (1 + |upper|).

    Returns (objective, FirstStagePlan, BendersState); the objective is the
    incumbent's true expected profit (the lower bound at exit).
    """
    _check_xi(xi)
    if split not in (STANDARD_SPLIT, PAPER_SPLIT):
        raise ValueError(f"unknown split {split!r}")
    if split == PAPER_SPLIT and variant != FLOW_BALANCE:
        raise ValueError("the paper split is only defined for the flow-balance variant")
    if variant == PAPER_LITERAL:
        warnings.warn(
            "the surplus-cap variant makes the recourse value nonconvex in the "
            "allocation; cuts may cut off optima", RuntimeWarning, stacklevel=2)

    n = instance.n_locations
    demands = np.asarray(scenarios.demands, dtype=np.int64)
    n_scen = demands.shape[0]
    probs = np.array([float(p) for p in scenarios.probabilities])
    r, h = instance.revenue, instance.holding

    n_struct = n if split == STANDARD_SPLIT else n + n_scen * n
    n_theta = n_scen if multi_cut else 1
    state = BendersState(xi=xi)

    if split == STANDARD_SPLIT:
        if multi_cut:
            theta_upper = demands.astype(float) @ r          # per scenario
        else:
            theta_upper = np.array([float(r @ demands.max(axis=0))])
        theta_lower = np.zeros(n_theta)                      # doing nothing earns 0
    else:
        theta_upper = np.zeros(n_theta)                      # moves never add profit
        theta_lower = np.full(n_theta, -np.inf)

    def build_master():
        ncols = n_struct + n_theta
        c = np.zeros(ncols)
        c[:n] = -h
        if split == PAPER_SPLIT:
            for s in range(n_scen):
                c[n + s * n: n + (s + 1) * n] = probs[s] * r
        if multi_cut:
            c[n_struct:] = probs
        else:
            c[n_struct] = 1.0
        rows, senses, rhs = [], [], []
        cap = np.zeros(ncols)
        cap[:n] = 1.0
        rows.append(cap)
        senses.append(LE)
        rhs.append(float(instance.capacity))
        for cut in state.cuts:
            row = np.zeros(ncols)
            row[:n_struct] = -cut.var_coef
            if cut.theta_index is not None:
                row[n_struct + cut.theta_index] = 1.0
            rows.append(row)
            senses.append(LE)
            rhs.append(cut.const)
        lower = np.zeros(ncols)
        upper = np.full(ncols, np.inf)
        upper[:n] = float(instance.capacity)
        if split == PAPER_SPLIT:
            for s in range(n_scen):
                upper[n + s * n: n + (s + 1) * n] = demands[s].astype(float)
        lower[n_struct:] = theta_lower
        upper[n_struct:] = theta_upper
        integer = np.zeros(ncols, dtype=bool)
        integer[:n] = True
        return LpProblem(MAX, c, np.array(rows), senses, np.array(rhs),
                         lower=lower, upper=upper, integer=integer)

    converged = False
    for iteration in range(1, max_iterations + 1):
        msol = solve_mip(build_master(), node_limit=node_limit)
        if msol.status != OPTIMAL:
            raise SolveError(f"master solve ended with status {msol.status}")
        state.upper_bound = min(state.upper_bound, msol.objective)
        vbar = msol.x[:n_struct]
        xbar = np.round(msol.x[:n]).astype(np.int64)

        t0 = time.perf_counter()
        new_cuts = []
        agg_coef = np.zeros(n_struct)
        agg_const = 0.0
        all_optimal = True
        true_value = -float(h @ xbar)
        for s in range(n_scen):
            if split == STANDARD_SPLIT:
                sub = build_recourse(instance, xbar, demands[s], variant)
                sol = solve_lp(sub)
                if sol.status != OPTIMAL:
                    raise SolveError(
                        f"recourse subproblem {s} ended with status {sol.status}")
                q_s = sol.objective
                true_value += probs[s] * q_s
                duals = sol.duals
                coef = np.zeros(n_struct)
                if variant == FLOW_BALANCE:
                    coef[:n] = duals[:n]
                else:
                    surplus = (xbar >= demands[s]).astype(float)
                    coef[:n] = duals[:n] + duals[n:2 * n] * surplus
            else:
                fbar_s = vbar[n + s * n: n + (s + 1) * n]
                sub = _paper_split_subproblem(instance, xbar, fbar_s, demands[s])
                sol = solve_lp(sub)
                true_value += probs[s] * recourse_value(
                    instance, xbar, demands[s], variant, integral=False)
                coef = np.zeros(n_struct)
                if sol.status == INFEASIBLE:
                    all_optimal = False
                    cert = sol.farkas
                    coef[:n] = cert
                    coef[n + s * n: n + (s + 1) * n] = -cert
                    const = 0.0  # subproblem rhs has no constant part
                    new_cuts.append(BendersCut("feasibility", coef, const,
                                               scenario=s))
                    continue
                if sol.status != OPTIMAL:
                    raise SolveError(
                        f"move subproblem {s} ended with status {sol.status}")
                q_s = sol.objective
                duals = sol.duals
                coef[:n] = duals
                coef[n + s * n: n + (s + 1) * n] = -duals

            const = q_s - float(coef @ vbar)
            if multi_cut:
                new_cuts.append(BendersCut("optimality", coef, const,
                                           theta_index=s, scenario=s))
            else:
                agg_coef += probs[s] * coef
                agg_const += probs[s] * const
        sub_time = time.perf_counter() - t0

        if true_value > state.lower_bound:
            state.lower_bound = true_value
            state.incumbent = xbar
        state.iterations = iteration
        state.upper_history.append(state.upper_bound)
        state.lower_history.append(state.lower_bound)

        gap = state.gap
        done = gap <= xi * (1.0 + abs(state.upper_bound))
        if not multi_cut and all_optimal:
            new_cuts.append(BendersCut("optimality", agg_coef, agg_const,
                                       theta_index=0))
        kinds = ",".join(sorted({c.kind for c in new_cuts})) or "none"
        state.trace.append(
            f"iter={iteration} lb={state.lower_bound:.6f} "
            f"ub={state.upper_bound:.6f} gap={gap:.6g} cut={kinds} "
            f"subproblem_time={sub_time:.4f}")
        if done:
            converged = True
            break
        state.cuts.extend(new_cuts)

    state.converged = converged
    plan = FirstStagePlan(state.incumbent)
    return state.lower_bound, plan, state


# ---------------------------------------------------------------------------
# direct solve of the scenario-expanded program


def solve_extensive(instance: CsrpInstance, scenarios: ScenarioSet,
                    variant: str = FLOW_BALANCE, max_variables: int = 2_000_000,
                    node_limit: int = 1_000_000):
    """Exact integer solve of the scenario-expanded program.

    Refuses when scenario count x locations^2 exceeds ``max_variables``;
    that regime belongs to the cut decomposition (solve_benders).
    """
    n = instance.n_locations
    n_scen = scenarios.n_scenarios
    if n_scen * n * n > max_variables:
        raise ModelTooLargeError(
            f"{n_scen} scenarios x {n}^2 locations = {n_scen * n * n} "
            f"second-stage variables exceed the dense-solver budget of "
            f"{max_variables}; use solve_benders instead")
    problem = build_extensive(instance, scenarios, variant)
    sol = solve_mip(problem, node_limit=node_limit)
    if sol.status != OPTIMAL:
        raise SolveError(f"scenario-expanded solve ended with status {sol.status}")

    demands = np.asarray(scenarios.demands, dtype=np.int64)
    layout = ExtensiveLayout(n, demands, variant)
    x = np.round(sol.x[layout.x]).astype(np.int64)
    served = np.vstack([sol.x[layout.served[s]] for s in range(n_scen)])
    moves = np.zeros((n_scen, n, n))
    for s in range(n_scen):
        for k, (i, j) in enumerate(layout.arcs):
            moves[s, i, j] = sol.x[layout.moves[s][k]]
    return sol.objective, FirstStagePlan(x), RecourseDecision(served, moves)


# ---------------------------------------------------------------------------
# sample-average replications


@dataclass
class SaaResult:
    """Per-replication objectives/plans and their mean."""

    objectives: list
    mean_objective: float
    plans: list
    wall_times: list
    failures: list
    n_scenarios: int
    replications: int
    seed: int
    method: str

    @property
    def n_successful(self) -> int:
        return len(self.objectives)


def solve_saa(instance: CsrpInstance, dist, replications: int,
              n_scenarios: int, seed: int, method: str = BENDERS,
              variant: str = FLOW_BALANCE, xi: float = XI_DEFAULT,
              max_iterations: int = 500) -> SaaResult:
    """Replication loop: for replication m, sample ``n_scenarios`` demand
    vectors with seed + m, solve the resulting program, and average the
    replication optima. Failed replications are excluded from the mean and
    reported."""
    if replications < 1 or n_scenarios < 1:
        raise ValueError("replications and n_scenarios must be positive")
    if method not in (BENDERS, EXTENSIVE):
        raise ValueError(f"unknown method {method!r}")
    objectives, plans, wall_times, failures = [], [], [], []
    for m in range(replications):
        scen = generate(dist, n_scenarios, seed + m)
        t0 = time.perf_counter()
        try:
            if method == BENDERS:
                obj, plan, state = solve_benders(
                    instance, scen, variant=variant, xi=xi,
                    max_iterations=max_iterations)
                if not state.converged:
                    raise SolveError(
                        f"decomposition did not converge in {max_iterations} iterations")
            else:
                obj, plan, _ = solve_extensive(instance, scen, variant=variant)
        except (SolveError, ModelTooLargeError) as exc:
            failures.append((m, str(exc)))
            continue
        wall_times.append(time.perf_counter() - t0)
        objectives.append(obj)
        plans.append(plan)
    mean = float(np.mean(objectives)) if objectives else None
    return SaaResult(objectives, mean, plans, wall_times, failures,
                     n_scenarios, replications, seed, method)
