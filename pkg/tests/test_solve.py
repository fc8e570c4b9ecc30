from fractions import Fraction

import numpy as np
import pytest

from carshare.csrp_models import FLOW_BALANCE, PAPER_LITERAL, CsrpInstance
from carshare.density import DemandDistributionSet, DensityModel, GAUSSIAN, POISSON
from carshare.lp import solve_mip
from carshare.scenario import ScenarioSet, generate
from carshare.solve import (
    BENDERS, EXTENSIVE, ModelTooLargeError, expected_profit, recourse_value,
    solve_benders, solve_extensive, solve_saa,
)
from oracles import plan_enumeration_optimum, recourse_optimum


def uniform_scenarios(ids, demands):
    n = len(demands)
    return ScenarioSet(ids, demands, [Fraction(1, n)] * n)


def random_instance(rng, n, cap_hi=8):
    r = rng.integers(50, 150, n).astype(float)
    h = rng.integers(5, 30, n).astype(float)
    t = rng.integers(5, 60, (n, n)).astype(float)
    np.fill_diagonal(t, 0)
    return CsrpInstance(list(range(n)), r, h, t, int(rng.integers(0, cap_hi)))


def point_mass_dist(ids, values):
    return DemandDistributionSet(
        ids, [DensityModel(GAUSSIAN, mean=float(v), variance=0.0) for v in values])


def test_benders_single_scenario_equals_extensive():
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    scen = uniform_scenarios([0, 1], [[2, 1]])
    obj_e, plan_e, _ = solve_extensive(inst, scen)
    obj_b, plan_b, state = solve_benders(inst, scen, xi=1e-7)
    assert state.converged
    assert obj_b == pytest.approx(obj_e, abs=1e-9)
    assert np.array_equal(plan_b.x, plan_e.x)


def test_benders_zero_capacity_two_iterations():
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 0)
    scen = uniform_scenarios([0, 1], [[4, 2], [1, 3]])
    obj, plan, state = solve_benders(inst, scen)
    assert state.converged
    assert state.iterations <= 2
    assert obj == pytest.approx(0.0, abs=1e-9)
    assert np.all(plan.x == 0)


@pytest.mark.parametrize("multi_cut", [False, True])
@pytest.mark.parametrize("split", ["standard", "paper"])
def test_benders_matches_extensive_random(multi_cut, split):
    rng = np.random.default_rng(2024)
    for _ in range(8):
        n = int(rng.integers(2, 5))
        inst = random_instance(rng, n, cap_hi=10)
        demands = rng.integers(0, 8, (int(rng.integers(1, 6)), n))
        scen = uniform_scenarios(list(range(n)), demands)
        obj_e, _, _ = solve_extensive(inst, scen)
        obj_b, _, state = solve_benders(inst, scen, xi=1e-7,
                                        multi_cut=multi_cut, split=split)
        assert state.converged
        assert abs(obj_b - obj_e) <= 1e-6 * (1 + abs(obj_e))


def test_benders_bounds_monotone():
    rng = np.random.default_rng(17)
    inst = random_instance(rng, 4, cap_hi=12)
    demands = rng.integers(0, 9, (6, 4))
    scen = uniform_scenarios(list(range(4)), demands)
    _, _, state = solve_benders(inst, scen, xi=1e-7)
    ub = np.array(state.upper_history)
    lb = np.array(state.lower_history)
    assert np.all(np.diff(ub) <= 1e-9)
    assert np.all(np.diff(lb) >= -1e-9)
    assert np.all(ub >= lb - 1e-9)
    assert state.gap <= 1e-7 * (1 + abs(state.upper_bound))


def test_benders_optimality_cuts_are_valid():
    # no cut may exclude any (x, true recourse value) pair
    rng = np.random.default_rng(23)
    inst = random_instance(rng, 2, cap_hi=6)
    demands = rng.integers(0, 5, (3, 2))
    scen = uniform_scenarios([0, 1], demands)
    probs = [float(p) for p in scen.probabilities]
    _, _, state = solve_benders(inst, scen, xi=1e-7)
    cuts = [c for c in state.cuts if c.kind == "optimality"]
    assert cuts
    for x0 in range(inst.capacity + 1):
        for x1 in range(inst.capacity + 1 - x0):
            x = np.array([x0, x1])
            q = sum(p * recourse_optimum(inst.revenue, inst.transfer, x, d,
                                         FLOW_BALANCE)
                    for p, d in zip(probs, demands))
            for cut in cuts:
                assert q <= float(cut.var_coef @ x) + cut.const + 1e-6


def test_benders_paper_literal_warns():
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    scen = uniform_scenarios([0, 1], [[2, 1]])
    with pytest.warns(RuntimeWarning, match="nonconvex"):
        solve_benders(inst, scen, variant=PAPER_LITERAL)


def test_benders_paper_split_emits_feasibility_cuts():
    rng = np.random.default_rng(3)
    inst = random_instance(rng, 3, cap_hi=6)
    demands = rng.integers(1, 6, (2, 3))
    scen = uniform_scenarios([0, 1, 2], demands)
    _, _, state = solve_benders(inst, scen, xi=1e-7, split="paper")
    kinds = {c.kind for c in state.cuts}
    assert "feasibility" in kinds


def test_benders_xi_range_enforced():
    inst = CsrpInstance([0], [100.0], [10.0], [[0.0]], 2)
    scen = uniform_scenarios([0], [[1]])
    with pytest.raises(ValueError):
        solve_benders(inst, scen, xi=1e-3)
    with pytest.raises(ValueError):
        solve_benders(inst, scen, xi=1e-8)


def test_benders_iteration_cap_reports_nonconvergence():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, 3, cap_hi=8)
    demands = rng.integers(0, 8, (4, 3))
    scen = uniform_scenarios([0, 1, 2], demands)
    _, plan, state = solve_benders(inst, scen, max_iterations=1)
    assert not state.converged
    assert state.incumbent is not None
    assert plan.x is not None


def test_extensive_matches_enumeration_and_plan():
    rng = np.random.default_rng(9)
    inst = random_instance(rng, 3, cap_hi=7)
    demands = rng.integers(0, 6, (4, 3))
    scen = uniform_scenarios([0, 1, 2], demands)
    obj, plan, decision = solve_extensive(inst, scen)
    ref, _ = plan_enumeration_optimum(inst, demands, scen.probabilities,
                                      FLOW_BALANCE)
    assert obj == pytest.approx(ref, abs=1e-9 * (1 + abs(ref)))
    assert plan.x.sum() <= inst.capacity
    assert decision.served.shape == (4, 3)
    assert decision.moves.shape == (4, 3, 3)
    # the reported objective decomposes into its parts
    probs = [float(p) for p in scen.probabilities]
    total = -float(inst.holding @ plan.x)
    for s in range(4):
        total += probs[s] * (float(inst.revenue @ decision.served[s])
                             - float((inst.transfer * decision.moves[s]).sum()))
    assert total == pytest.approx(obj, abs=1e-6)


def test_extensive_zero_transfer_dominates():
    rng = np.random.default_rng(13)
    inst = random_instance(rng, 3, cap_hi=7)
    demands = rng.integers(0, 6, (3, 3))
    scen = uniform_scenarios([0, 1, 2], demands)
    base, _, _ = solve_extensive(inst, scen)
    free = CsrpInstance(inst.location_ids, inst.revenue, inst.holding,
                        np.zeros((3, 3)), inst.capacity)
    free_obj, _, _ = solve_extensive(free, scen)
    assert free_obj >= base - 1e-9


def test_extensive_size_guard():
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    scen = uniform_scenarios([0, 1], [[2, 1]])
    with pytest.raises(ModelTooLargeError, match="solve_benders"):
        solve_extensive(inst, scen, max_variables=1)


def test_recourse_value_and_expected_profit():
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    # x = d: revenue 300, no moves, holding 30
    scen = uniform_scenarios([0, 1], [[2, 1]])
    assert recourse_value(inst, [2, 1], [2, 1]) == pytest.approx(300.0)
    assert expected_profit(inst, [2, 1], scen) == pytest.approx(270.0)


def test_saa_zero_demand_degenerate():
    dist = point_mass_dist([0, 1], [0, 0])
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    result = solve_saa(inst, dist, replications=1, n_scenarios=1, seed=3)
    assert result.mean_objective == pytest.approx(0.0, abs=1e-9)


def test_saa_point_mass_replications_identical():
    dist = point_mass_dist([0, 1], [2, 1])
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 10.0],
                        [[0.0, 5.0], [5.0, 0.0]], 3)
    result = solve_saa(inst, dist, replications=3, n_scenarios=1, seed=3)
    assert result.n_successful == 3
    assert result.objectives == pytest.approx([270.0] * 3)
    assert result.mean_objective == pytest.approx(270.0)
    # derived seeds: replications are reproducible one by one
    again = solve_saa(inst, dist, replications=3, n_scenarios=1, seed=3)
    assert again.objectives == result.objectives


@pytest.mark.parametrize("method", [BENDERS, EXTENSIVE])
def test_saa_methods_agree(method):
    dist = DemandDistributionSet(
        [0, 1], [DensityModel(POISSON, rate=3.0), DensityModel(POISSON, rate=5.0)])
    inst = CsrpInstance([0, 1], [100.0, 100.0], [10.0, 20.0],
                        [[0.0, 15.0], [15.0, 0.0]], 12)
    result = solve_saa(inst, dist, replications=2, n_scenarios=5, seed=11,
                       method=method, xi=1e-7)
    assert result.n_successful == 2
    scen0 = generate(dist, 5, seed=11)
    direct, _, _ = solve_extensive(inst, scen0)
    assert result.objectives[0] == pytest.approx(direct, rel=1e-6)


def test_saa_convergence_to_large_sample():
    dist = DemandDistributionSet(
        [0, 1], [DensityModel(GAUSSIAN, mean=6.0, variance=4.0),
                 DensityModel(GAUSSIAN, mean=3.0, variance=1.0)])
    inst = CsrpInstance([0, 1], [100.0, 100.0], [15.0, 15.0],
                        [[0.0, 25.0], [25.0, 0.0]], 18)
    small = solve_saa(inst, dist, replications=10, n_scenarios=20, seed=5)
    big = solve_saa(inst, dist, replications=1, n_scenarios=500, seed=99)
    assert small.n_successful == 10
    assert abs(small.mean_objective - big.mean_objective) <= \
        0.02 * abs(big.mean_objective)


def test_stochastic_plan_beats_mean_plan_on_scenarios():
    # the scenario-set optimum dominates any fixed feasible plan, in
    # particular the mean-demand plan
    rng = np.random.default_rng(41)
    inst = random_instance(rng, 3, cap_hi=12)
    demands = rng.integers(0, 10, (6, 3))
    scen = uniform_scenarios([0, 1, 2], demands)
    sp_obj, sp_plan, _ = solve_benders(inst, scen, xi=1e-7)
    mean_demand = demands.mean(axis=0)
    from carshare.csrp_models import build_deterministic
    det = solve_mip(build_deterministic(inst, mean_demand))
    det_plan = np.round(det.x[:3]).astype(int)
    sp_value = expected_profit(inst, sp_plan, scen)
    det_value = expected_profit(inst, det_plan, scen)
    assert sp_value >= det_value - 1e-6 * (1 + abs(sp_value))
    assert sp_obj == pytest.approx(sp_value, abs=1e-6)
