"""Car-sharing fleet allocation and relocation planning under demand uncertainty.

Pipeline: ingest trip records into daily demand panels, fit per-location
demand distributions (Gaussian-kernel KDE or parametric MLE), sample demand
scenarios, solve the allocation/relocation program (directly or by cut
decomposition), and replay held-out days to score plans by daily profit.
"""

from .csrp_models import (
    FLOW_BALANCE, PAPER_LITERAL, CsrpInstance, FirstStagePlan,
    RecourseDecision, build_deterministic, build_extensive, build_recourse,
    make_instance,
)
from .density import (
    DemandDistributionSet, DensityModel, fit_distribution_set, fit_gaussian,
    fit_kde, fit_laplace, fit_poisson, log_likelihood, pdf, sample,
)
from .evaluate import (
    EvaluationReport, compare_approaches, evaluate_plan, scenario_sweep,
)
from .ingest import (
    DemandPanel, TripRecord, aggregate_daily, parse_trips, split_by_date,
    top_k_locations,
)
from .lp import LpProblem, LpSolution, extract_duals, extract_ray, solve_lp, solve_mip
from .scenario import ScenarioSet, from_panel, generate
from .solve import (
    BendersState, SaaResult, expected_profit, solve_benders, solve_extensive,
    solve_saa,
)

__version__ = "0.1.0"
