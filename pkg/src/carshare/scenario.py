"""Demand scenario sets: sampled from fitted distributions or replayed
from observed daily panels.

Probabilities are stored as exact rationals (1/N per sampled scenario) so
they always sum to one; model builders convert them to floats."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .density import DemandDistributionSet, draw, to_demand


@dataclass
class ScenarioSet:
    """N demand vectors over R locations with exact probabilities."""

    location_ids: list
    demands: np.ndarray          # N x R nonnegative integers
    probabilities: list          # N Fractions summing to exactly 1

    def __post_init__(self):
        self.location_ids = list(self.location_ids)
        self.demands = np.asarray(self.demands, dtype=np.int64)
        if self.demands.ndim != 2:
            raise ValueError("demand matrix must be 2-D")
        if self.demands.shape[1] != len(self.location_ids):
            raise ValueError("demand columns do not match location ids")
        if np.any(self.demands < 0):
            raise ValueError("demands must be nonnegative")
        self.probabilities = [Fraction(p) for p in self.probabilities]
        if len(self.probabilities) != self.demands.shape[0]:
            raise ValueError("one probability per scenario required")
        if sum(self.probabilities, Fraction(0)) != 1:
            raise ValueError("probabilities must sum to exactly 1")

    @property
    def n_scenarios(self) -> int:
        return self.demands.shape[0]


def generate(dist: DemandDistributionSet, n_scenarios: int, seed: int) -> ScenarioSet:
    """Sample n scenarios, each location drawn independently from its
    fitted model; uniform probabilities 1/n. Deterministic per seed."""
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be positive")
    rng = np.random.default_rng(seed)
    cols = [to_demand(draw(model, n_scenarios, rng)) for model in dist.models]
    demands = np.column_stack(cols)
    probs = [Fraction(1, n_scenarios)] * n_scenarios
    return ScenarioSet(dist.location_ids, demands, probs)


def from_panel(panel) -> ScenarioSet:
    """Each observed day becomes one equiprobable scenario."""
    if len(panel.dates) == 0:
        raise ValueError("panel has no days")
    n = len(panel.dates)
    return ScenarioSet(list(panel.location_ids), panel.counts.copy(),
                       [Fraction(1, n)] * n)


def save_scenarios(scenarios: ScenarioSet, path):
    """CSV: one row per scenario, one column per location, then the
    probability as an exact fraction string."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(str(i) for i in scenarios.location_ids) + ",probability\n")
        for row, p in zip(scenarios.demands, scenarios.probabilities):
            fh.write(",".join(str(int(v)) for v in row) + f",{p.numerator}/{p.denominator}\n")


def load_scenarios(path) -> ScenarioSet:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[-1] != "probability":
            raise ValueError("scenario file lacks a probability column")
        location_ids = [int(v) for v in header[:-1]]
        demands = []
        probs = []
        for line in fh:
            if not line.strip():
                continue
            parts = line.strip().split(",")
            demands.append([int(v) for v in parts[:-1]])
            probs.append(Fraction(parts[-1]))
    return ScenarioSet(location_ids, np.array(demands, dtype=np.int64), probs)
