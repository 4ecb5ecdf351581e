"""Two-stage stochastic linear recourse with deviation risk measures:
value-function geometry, risk functionals, empirical strong-convexity
certification, and Wasserstein stability experiments."""

from .certify import (CertificationReport, EtaSweepResult, eta_threshold_sweep,
                      midpoint_test, monotonicity_modulus, quadratic_growth_check)
from .geometry import (AssumptionReport, DualVertexFan, GeometryError, RecourseData,
                       active_cell, check_assumptions, enumerate_dual_vertices,
                       estimate_cone_alpha, phi)
from .lp import (LinearProgram, LpInputError, LpNumericalError, LpOutcome,
                 SimplexOptions, check_feasible, solve_lp)
from .measures import (A3A4Report, BoxDensityMeasure, DiscreteMeasure, JitterPlan,
                       MeasureError, RegionV, ResamplePlan, ShiftPlan, check_a3_a4,
                       discretize, perturb, wasserstein1)
from .risk import (BreakpointProfile, CellDecomposition, RiskError, RiskSpec,
                   cell_measures, eval_q, grad_q, make_objective,
                   representation_lhs, representation_rhs)
from .solver import (ArgminResult, FirstStage, SolveOptions, SolverError, TwoStageProblem,
                     build_deterministic_equivalent, grid_search_oracle, solve_two_stage)
from .stability import (StabilityError, StabilityOptions, StabilityRecord,
                        estimate_holder_exponent, hausdorff, records_to_csv,
                        run_stability_experiment)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
