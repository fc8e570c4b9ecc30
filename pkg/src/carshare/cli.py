"""Command-line front end: ingest -> fit -> solve -> evaluate, each stage
reading its predecessor's artifact files and writing its own under
<output_dir>/<run_id>/.

Artifacts (CSV/JSON) are byte-deterministic for a fixed config: all
randomness is seeded from the config and wall-clock timings go only to
the .log trace files."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import ingest
from .csrp_models import FLOW_BALANCE, make_instance, save_instance, load_instance
from .density import FAMILIES, fit_distribution_set, load_distribution_set, save_distribution_set
from .evaluate import (
    DETERMINISTIC_MEAN, aggregate_plan, deterministic_plan, evaluate_plan,
    plot_monthly_profits, report_to_csv,
)
from .solve import BENDERS, EXTENSIVE, XI_DEFAULT, solve_saa

PANEL_FILE = "panel.csv"
INGEST_FILE = "ingest.json"
INSTANCE_FILE = "instance.json"
DIST_FILE = "dist_{family}.json"
PLAN_FILE = "plan_{family}.json"
SOLVE_LOG = "solve_{family}.log"
REPORT_FILE = "report_{label}.csv"
EVAL_FILE = "evaluation.json"


class ConfigError(ValueError):
    """The run configuration is missing or malformed."""


class DependencyError(RuntimeError):
    """A stage artifact is missing; names the stage that produces it."""

    def __init__(self, stage: str, path):
        super().__init__(f"missing artifact {path}; run the '{stage}' stage first")
        self.stage = stage


@dataclass
class RunConfig:
    trips: list
    output_dir: str
    seed: int
    run_id: str = "run"
    coords: str = None
    schema: dict = None
    revenue: object = None
    holding: object = None
    transfer: object = None
    capacity: int = None
    top_k: int = 20
    split_date: date = None
    families: list = field(default_factory=lambda: list(FAMILIES))
    family: str = "kde"
    n_scenarios: int = 500
    replications: int = 10
    xi: float = XI_DEFAULT
    variant: str = FLOW_BALANCE
    method: str = BENDERS
    plots: bool = False

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_id


def load_config(path, overrides: dict = None) -> RunConfig:
    """Read a JSON config file, apply CLI overrides, validate.

    Every referenced file must exist and an explicit seed is required: no
    wall-clock seeding, ever.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} line {exc.lineno}: {exc.msg}") from exc
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    for req in ("trips", "output_dir", "seed"):
        if req not in raw:
            raise ConfigError(f"config field '{req}' is required")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "split_date" in raw and raw["split_date"] is not None:
        try:
            raw["split_date"] = date.fromisoformat(str(raw["split_date"]))
        except ValueError as exc:
            raise ConfigError(f"config field 'split_date': {exc}") from exc
    cfg = RunConfig(**raw)

    if not isinstance(cfg.trips, list) or not cfg.trips:
        raise ConfigError("config field 'trips' must be a nonempty list of paths")
    for p in cfg.trips:
        if not Path(p).exists():
            raise ConfigError(f"trip file does not exist: {p}")
    if cfg.coords is not None and not Path(cfg.coords).exists():
        raise ConfigError(f"coords file does not exist: {cfg.coords}")
    if not isinstance(cfg.seed, int):
        raise ConfigError("config field 'seed' must be an integer")
    for fam in cfg.families:
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {fam!r}")
    if cfg.family not in cfg.families:
        raise ConfigError(f"solve family {cfg.family!r} not in families list")
    if cfg.method not in (BENDERS, EXTENSIVE):
        raise ConfigError(f"unknown method {cfg.method!r}")
    return cfg


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(path, stage) -> Path:
    path = Path(path)
    if not path.exists():
        raise DependencyError(stage, path)
    return path


def cmd_ingest(cfg: RunConfig) -> int:
    """Parse trip files, aggregate daily demand, keep the top-k locations,
    write the panel artifact."""
    rundir = cfg.run_dir
    rundir.mkdir(parents=True, exist_ok=True)
    panels = []
    total_rows = 0
    rejected = 0
    flagged = {"zero_distance": 0, "negative_fare": 0}
    for path in cfg.trips:
        result = ingest.parse_trips(path, cfg.schema)
        total_rows += len(result.records) + result.rejected
        rejected += result.rejected
        for key in flagged:
            flagged[key] += result.flagged.get(key, 0)
        panels.append(ingest.aggregate_daily(result.records))
    panel = ingest.merge_panels(panels)
    panel = ingest.top_k_locations(panel, min(cfg.top_k, len(panel.location_ids)))
    ingest.panel_to_csv(panel, rundir / PANEL_FILE)
    _write_json(rundir / INGEST_FILE, {
        "rows_read": total_rows,
        "rejected": rejected,
        "flagged": flagged,
        "days": panel.n_days,
        "location_ids": [int(i) for i in panel.location_ids],
    })
    print(f"ingest: {panel.n_days} days x {len(panel.location_ids)} locations "
          f"({rejected} rows rejected)")
    return 0


def _load_panel_splits(cfg: RunConfig):
    panel = ingest.panel_from_csv(_require(cfg.run_dir / PANEL_FILE, "ingest"))
    if cfg.split_date is None:
        raise ConfigError("config field 'split_date' is required for this stage")
    return ingest.split_by_date(panel, cfg.split_date)


def cmd_fit(cfg: RunConfig) -> int:
    """Fit one distribution file per family on the training split."""
    train, _ = _load_panel_splits(cfg)
    rundir = cfg.run_dir
    for family in cfg.families:
        dist = fit_distribution_set(train, family)
        save_distribution_set(dist, rundir / DIST_FILE.format(family=family))
    print(f"fit: {len(cfg.families)} families on {train.n_days} training days")
    return 0


def _materialize_instance(cfg: RunConfig, location_ids):
    path = cfg.run_dir / INSTANCE_FILE
    if path.exists():
        instance = load_instance(path)
        if list(instance.location_ids) == list(location_ids):
            return instance
    instance = make_instance(location_ids, revenue=cfg.revenue,
                             holding=cfg.holding, transfer=cfg.transfer,
                             capacity=cfg.capacity, seed=cfg.seed)
    save_instance(instance, path)
    return instance


def cmd_solve(cfg: RunConfig) -> int:
    """Replication loop per family; writes plan artifacts and trace logs."""
    rundir = cfg.run_dir
    train, _ = _load_panel_splits(cfg)
    instance = _materialize_instance(cfg, train.location_ids)
    for family in cfg.families:
        dist = load_distribution_set(
            _require(rundir / DIST_FILE.format(family=family), "fit"))
        result = solve_saa(instance, dist, cfg.replications, cfg.n_scenarios,
                           cfg.seed, method=cfg.method, variant=cfg.variant,
                           xi=cfg.xi)
        plan = aggregate_plan(result.plans, instance.capacity) if result.plans else None
        _write_json(rundir / PLAN_FILE.format(family=family), {
            "family": family,
            "plan": [int(v) for v in plan] if plan is not None else None,
            "replication_plans": [[int(v) for v in p.x] for p in result.plans],
            "objectives": result.objectives,
            "mean_objective": result.mean_objective,
            "failures": [{"replication": m, "message": msg}
                         for m, msg in result.failures],
            "n_scenarios": cfg.n_scenarios,
            "replications": cfg.replications,
            "seed": cfg.seed,
            "method": cfg.method,
            "variant": cfg.variant,
            "xi": cfg.xi,
        })
        with open(rundir / SOLVE_LOG.format(family=family), "w",
                  encoding="utf-8") as fh:
            for m, wall in enumerate(result.wall_times):
                fh.write(f"replication={m} wall_time={wall:.4f}\n")
            for m, msg in result.failures:
                fh.write(f"replication={m} FAILED {msg}\n")
        mean = result.mean_objective
        print(f"solve[{family}]: mean objective "
              f"{mean if mean is None else format(mean, '.2f')} over "
              f"{result.n_successful}/{cfg.replications} replications")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    """Replay test days for every solved family plus the mean-demand
    baseline; writes per-day report CSVs and a summary."""
    rundir = cfg.run_dir
    train, test = _load_panel_splits(cfg)
    instance = _materialize_instance(cfg, train.location_ids)
    reports = {}
    for family in cfg.families:
        plan_path = _require(rundir / PLAN_FILE.format(family=family), "solve")
        with open(plan_path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload["plan"] is None:
            print(f"evaluate[{family}]: skipped (no successful replications)",
                  file=sys.stderr)
            continue
        reports[family] = evaluate_plan(instance, np.array(payload["plan"]),
                                        test, cfg.variant, label=family)
    det = deterministic_plan(instance, train, cfg.variant)
    reports[DETERMINISTIC_MEAN] = evaluate_plan(instance, det, test,
                                                cfg.variant,
                                                label=DETERMINISTIC_MEAN)
    for label, report in reports.items():
        report_to_csv(report, rundir / REPORT_FILE.format(label=label))
    _write_json(rundir / EVAL_FILE, {
        "approaches": {label: {"mean_daily_profit": report.mean_daily_profit,
                               "days": len(report.dates),
                               "plan_total": int(report.plan.sum())}
                       for label, report in reports.items()},
        "variant": cfg.variant,
        "test_days": test.n_days,
    })
    if cfg.plots:
        plot_monthly_profits(reports, rundir / "plots")
    for label in sorted(reports):
        print(f"evaluate[{label}]: mean daily profit "
              f"{reports[label].mean_daily_profit:.2f}")
    return 0


def cmd_pipeline(cfg: RunConfig) -> int:
    """Run ingest, fit, solve, and evaluate in sequence."""
    for stage in (cmd_ingest, cmd_fit, cmd_solve, cmd_evaluate):
        code = stage(cfg)
        if code:
            return code
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carshare",
        description="Fleet allocation and relocation planning from trip data")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0].strip().rstrip("."))
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--n-scenarios", type=int, dest="n_scenarios")
        p.add_argument("--seed", type=int)
        p.add_argument("--variant", choices=("flow_balance", "paper_literal"))
        p.add_argument("--method", choices=(BENDERS, EXTENSIVE))
        p.add_argument("--xi", type=float)
        p.add_argument("--replications", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--run-id", dest="run_id")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("n_scenarios", "seed", "variant", "method", "xi",
                  "replications", "output_dir", "run_id")}
    try:
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DependencyError as exc:
        print(f"stage '{args.command}' blocked: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # surface the failing stage, nonzero exit
        print(f"stage '{args.command}' failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
