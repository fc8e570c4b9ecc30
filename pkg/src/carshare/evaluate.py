"""Out-of-sample evaluation: fix an allocation, replay each held-out day
as the realized demand, solve the day's recourse, and report daily profit.

Also hosts the experiment harness that fits each distribution family on
the training panel, runs the replication loop, aggregates the replication
plans into a single deployable allocation, and scores every approach on
the same test days."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csrp_models import (
    FLOW_BALANCE, CsrpInstance, FirstStagePlan, build_deterministic,
    build_recourse, plan_vector, recourse_moves, round_half_up,
)
from .density import FAMILIES, fit_distribution_set
from .ingest import DemandPanel
from .lp import OPTIMAL, solve_mip
from .solve import BENDERS, XI_DEFAULT, SolveError, solve_saa

DETERMINISTIC_MEAN = "deterministic_mean"
APPROACHES = tuple(FAMILIES) + (DETERMINISTIC_MEAN,)


@dataclass
class EvaluationReport:
    """Per-day realized profits for one approach on one test panel."""

    label: str
    dates: list
    daily_profits: np.ndarray
    plan: np.ndarray
    metadata: dict = field(default_factory=dict)
    decisions: list = None

    @property
    def mean_daily_profit(self) -> float:
        return float(np.mean(self.daily_profits))


def evaluate_plan(instance: CsrpInstance, plan, test_panel: DemandPanel,
                  variant: str = FLOW_BALANCE, label: str = "plan",
                  keep_decisions: bool = False) -> EvaluationReport:
    """Daily profit series of a fixed allocation over the test panel.

    Each day charges the full holding cost of the allocation (the plan is
    re-deployed daily) and earns that day's optimal recourse profit.
    """
    x = plan_vector(plan, instance.n_locations)
    if list(test_panel.location_ids) != list(instance.location_ids):
        raise ValueError("test panel columns do not match instance locations")
    if x.sum() > instance.capacity:
        raise ValueError("plan exceeds fleet capacity")
    holding = float(instance.holding @ x)
    profits = np.empty(test_panel.n_days)
    decisions = [] if keep_decisions else None
    for day in range(test_panel.n_days):
        demand = test_panel.counts[day]
        sol = solve_mip(build_recourse(instance, x, demand, variant))
        if sol.status != OPTIMAL:
            raise SolveError(
                f"recourse solve failed on {test_panel.dates[day]}: {sol.status}")
        profits[day] = sol.objective - holding
        if keep_decisions:
            n = instance.n_locations
            decisions.append((sol.x[:n].copy(), recourse_moves(sol.x, n)))
    return EvaluationReport(label, list(test_panel.dates), profits, x,
                            metadata={"variant": variant}, decisions=decisions)


def aggregate_plan(plans, capacity: int) -> np.ndarray:
    """Deployable allocation from replication plans: elementwise mean,
    rounded half-up, then repaired to the fleet capacity by decrementing
    the largest entries."""
    stack = np.vstack([p.x if isinstance(p, FirstStagePlan)
                       else np.asarray(p, dtype=np.int64) for p in plans])
    x = round_half_up(stack.mean(axis=0))
    x = np.maximum(x, 0)
    while x.sum() > capacity:
        j = int(np.argmax(x))
        x[j] -= 1
    return x


def _saa_plan(instance, dist, n_scenarios, replications, seed, method,
              variant, xi) -> tuple:
    result = solve_saa(instance, dist, replications, n_scenarios, seed,
                       method=method, variant=variant, xi=xi)
    if not result.plans:
        raise SolveError(
            "all replications failed: " + "; ".join(m for _, m in result.failures))
    return aggregate_plan(result.plans, instance.capacity), result


def deterministic_plan(instance: CsrpInstance, train_panel: DemandPanel,
                       variant: str = FLOW_BALANCE) -> np.ndarray:
    """Allocation of the mean-demand program on the training panel."""
    problem = build_deterministic(instance, train_panel.location_means(), variant)
    sol = solve_mip(problem)
    if sol.status != OPTIMAL:
        raise SolveError(f"deterministic solve ended with status {sol.status}")
    return np.round(sol.x[:instance.n_locations]).astype(np.int64)


def compare_approaches(instance: CsrpInstance, train_panel: DemandPanel,
                       test_panel: DemandPanel, approaches,
                       n_scenarios: int, replications: int, seed: int,
                       method: str = BENDERS, variant: str = FLOW_BALANCE,
                       xi: float = XI_DEFAULT) -> dict:
    """Fit, solve, and score each approach on the same split.

    Distribution families go through the replication loop and the plan
    aggregation rule; the deterministic baseline plans against the mean
    training demand. Returns one report per approach label.
    """
    reports = {}
    for label in approaches:
        if label == DETERMINISTIC_MEAN:
            x = deterministic_plan(instance, train_panel, variant)
            meta = {}
        elif label in FAMILIES:
            dist = fit_distribution_set(train_panel, label)
            x, saa = _saa_plan(instance, dist, n_scenarios, replications,
                               seed, method, variant, xi)
            meta = {"mean_objective": saa.mean_objective,
                    "failures": len(saa.failures)}
        else:
            raise ValueError(f"unknown approach {label!r}")
        report = evaluate_plan(instance, x, test_panel, variant, label=label)
        report.metadata.update(meta)
        report.metadata.update({"n_scenarios": n_scenarios,
                                "replications": replications, "seed": seed})
        reports[label] = report
    return reports


@dataclass
class SweepRow:
    n_scenarios: int
    mean_objective: float
    mean_wall_time: float


def scenario_sweep(instance: CsrpInstance, dist, counts, replications: int,
                   seed: int, method: str = BENDERS,
                   variant: str = FLOW_BALANCE, xi: float = XI_DEFAULT) -> list:
    """Replication mean objective and wall time per scenario count."""
    if not counts:
        raise ValueError("counts must be nonempty")
    rows = []
    for n in counts:
        result = solve_saa(instance, dist, replications, n, seed,
                           method=method, variant=variant, xi=xi)
        mean_time = float(np.mean(result.wall_times)) if result.wall_times else float("nan")
        rows.append(SweepRow(int(n), result.mean_objective, mean_time))
    return rows


def report_to_csv(report: EvaluationReport, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,profit\n")
        for day, profit in zip(report.dates, report.daily_profits):
            fh.write(f"{day.isoformat()},{float(profit)!r}\n")


def plot_monthly_profits(reports: dict, outdir) -> list:
    """One line chart per test month, one series per approach."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    months = sorted({(d.year, d.month)
                     for rep in reports.values() for d in rep.dates})
    written = []
    for year, month in months:
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for label, rep in sorted(reports.items()):
            days = [d.day for d in rep.dates if (d.year, d.month) == (year, month)]
            vals = [p for d, p in zip(rep.dates, rep.daily_profits)
                    if (d.year, d.month) == (year, month)]
            if days:
                ax.plot(days, vals, marker="o", markersize=3, label=label)
        ax.set_xlabel("day of month")
        ax.set_ylabel("daily profit")
        ax.set_title(f"{year}-{month:02d}")
        ax.legend()
        fig.tight_layout()
        path = outdir / f"profit_{year}-{month:02d}.png"
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
