import numpy as np
import pytest

from recourselab.lp import solve_lp
from recourselab.measures import DiscreteMeasure
from recourselab.risk import RiskSpec, eval_q
from recourselab.solver import (FirstStage, SolveOptions, SolverError, TwoStageProblem,
                                build_deterministic_equivalent, det_equivalent_layout,
                                feasible_box, grid_search_oracle, solve_two_stage)

E = RiskSpec.expectation()


def interval_stage(h=0.0, H=None, lo=0.0, hi=1.0):
    return FirstStage(T=[[1.0]], h=[h], H=H, A_X=[[1.0], [-1.0]], b_X=[hi, -lo])


class TestDetEquivalent:
    def test_expectation_shape(self, rd_1d):
        mu = DiscreteMeasure([[0.2], [0.8]], [0.5, 0.5])
        p = TwoStageProblem(interval_stage(), rd_1d, mu, E)
        lp = build_deterministic_equivalent(p)
        # x plus two scenario copies of the two recourse variables
        assert lp.n == 1 + 2 * 2
        # two box rows plus one recourse equality per scenario
        assert lp.m == 2 + 2
        assert lp.senses.count("==") == 2

    def test_expected_excess_counts(self, rd_1d):
        mu = DiscreteMeasure([[0.2], [0.5], [0.8]], [1 / 3, 1 / 3, 1 / 3])
        p = TwoStageProblem(interval_stage(), rd_1d, mu, RiskSpec.expected_excess(0.3))
        base = build_deterministic_equivalent(
            TwoStageProblem(interval_stage(), rd_1d, mu, E))
        lp = build_deterministic_equivalent(p)
        assert lp.n - base.n == 3  # one epigraph variable per scenario
        assert lp.m - base.m == 6  # two inequality rows per scenario

    def test_semideviation_epigraph_consistency(self, rd_1d, nine_atoms):
        spec = RiskSpec.upper_semideviation()
        p = TwoStageProblem(interval_stage(h=0.3), rd_1d, nine_atoms, spec)
        lp = build_deterministic_equivalent(p)
        out = solve_lp(lp)
        assert out.status == "optimal"
        layout = det_equivalent_layout(p)
        x = out.x[layout["x"][0]:layout["x"][1]]
        fan = p.fan()
        assert out.value - 0.3 * x[0] == pytest.approx(
            eval_q(fan, nine_atoms, spec, p.first_stage.T @ x), abs=1e-6)
        # the mean variable must match per-scenario re-solves
        t = out.x[layout["t"]]
        from recourselab.geometry import recourse_lp

        resolved = [solve_lp(recourse_lp(p.recourse, z - p.first_stage.T @ x)).value
                    for z in nine_atoms.atoms]
        assert t == pytest.approx(float(np.mean(resolved)), abs=1e-7)

    def test_rejects_quadratic_and_continuous(self, rd_1d, nine_atoms, box_1d):
        p = TwoStageProblem(interval_stage(H=[[1.0]]), rd_1d, nine_atoms, E)
        with pytest.raises(SolverError, match="subgradient"):
            build_deterministic_equivalent(p)
        p2 = TwoStageProblem(interval_stage(), rd_1d, box_1d, E)
        with pytest.raises(SolverError, match="finitely supported"):
            build_deterministic_equivalent(p2)


class TestSolve:
    def test_median_instance(self, median_problem):
        res = solve_two_stage(median_problem)
        assert res.path == "det-equivalent"
        assert res.x_star == pytest.approx([0.5], abs=1e-9)
        assert res.value == pytest.approx(2.0 / 9.0, abs=1e-9)

    def test_steep_linear_cost_pins_to_zero(self, rd_1d, nine_atoms):
        p = TwoStageProblem(interval_stage(h=10.0), rd_1d, nine_atoms, E)
        res = solve_two_stage(p)
        assert res.x_star == pytest.approx([0.0], abs=1e-9)

    def test_single_atom_drives_recourse_to_zero(self, rd_1d):
        p = TwoStageProblem(interval_stage(), rd_1d, DiscreteMeasure.point_mass([0.7]), E)
        res = solve_two_stage(p)
        assert res.x_star == pytest.approx([0.7], abs=1e-9)
        assert res.value == pytest.approx(0.0, abs=1e-9)

    def test_feasibility_of_returned_point(self, median_problem):
        res = solve_two_stage(median_problem)
        fs = median_problem.first_stage
        assert np.max(fs.A_X @ res.x_star - fs.b_X) <= 1e-8

    def test_objective_consistency(self, median_problem):
        res = solve_two_stage(median_problem)
        fan = median_problem.fan()
        direct = eval_q(fan, median_problem.measure, E,
                        median_problem.first_stage.T @ res.x_star)
        assert res.value == pytest.approx(float(
            median_problem.first_stage.h @ res.x_star) + direct, abs=1e-6)

    def test_unbounded_feasible_set_refused(self, rd_1d, nine_atoms):
        fs = FirstStage(T=[[1.0]], h=[0.0], H=None, A_X=[[-1.0]], b_X=[0.0])
        with pytest.raises(SolverError, match="unbounded"):
            solve_two_stage(TwoStageProblem(fs, rd_1d, nine_atoms, E))

    def test_infeasible_set_refused(self, rd_1d, nine_atoms):
        fs = FirstStage(T=[[1.0]], h=[0.0], H=None, A_X=[[1.0], [-1.0]], b_X=[0.0, -1.0])
        with pytest.raises(SolverError, match="empty"):
            solve_two_stage(TwoStageProblem(fs, rd_1d, nine_atoms, E))


class TestSubgradient:
    def test_quadratic_cost_matches_oracle(self, rd_1d, nine_atoms):
        p = TwoStageProblem(interval_stage(H=[[1.0]]), rd_1d, nine_atoms, E)
        res = solve_two_stage(p, SolveOptions(kappa=2.0, tol=1e-7, max_iters=40000))
        assert res.path == "subgradient"
        oracle = grid_search_oracle(p, 1e-4)
        assert abs(res.value - oracle.value) <= 1e-3

    def test_certificate_failure_carries_best_iterate(self, rd_1d, nine_atoms):
        p = TwoStageProblem(interval_stage(H=[[1.0]]), rd_1d, nine_atoms, E)
        with pytest.raises(SolverError) as err:
            solve_two_stage(p, SolveOptions(kappa=2.0, tol=1e-12, max_iters=60))
        assert err.value.best is not None
        assert err.value.best.x_star.shape == (1,)

    def test_zero_recourse_contribution_quadratic_minimum(self, rd_1d):
        # single atom at the quadratic minimizer: both cost pieces vanish
        # there, and the minimizer sits at a kink where progress per step
        # is O(1/k), so the certificate tolerance is sized to the budget
        fs = FirstStage(T=[[1.0]], h=[0.0], H=[[1.0]],
                        A_X=[[1.0], [-1.0]], b_X=[1.0, 1.0])
        p = TwoStageProblem(fs, rd_1d, DiscreteMeasure.point_mass([0.0]), E)
        res = solve_two_stage(p, SolveOptions(kappa=2.0, tol=2e-4, max_iters=40000))
        oracle = grid_search_oracle(p, 1e-4)
        assert abs(res.value - oracle.value) <= 1e-3
        assert abs(res.x_star[0]) <= 1e-3
        assert abs(oracle.x_star[0]) <= 1e-4


class TestGridOracle:
    def test_dimension_limit(self, rd_2d, fan_2d):
        fs = FirstStage(T=np.eye(3)[:2], h=np.zeros(3), H=None,
                        A_X=np.vstack([np.eye(3), -np.eye(3)]),
                        b_X=np.concatenate([np.ones(3), np.zeros(3)]))
        mu = DiscreteMeasure([[0.5, 0.5]], [1.0])
        with pytest.raises(SolverError, match="dimension"):
            grid_search_oracle(TwoStageProblem(fs, rd_2d, mu, E), 0.1)

    def test_constant_objective_reports_target(self, rd_1d, nine_atoms):
        p = TwoStageProblem(interval_stage(), rd_1d, nine_atoms,
                            RiskSpec.expected_excess(50.0))
        res = grid_search_oracle(p, 1e-3)
        assert res.value == pytest.approx(50.0, abs=1e-9)

    def test_matches_solver_on_median(self, median_problem):
        oracle = grid_search_oracle(median_problem, 1e-4)
        solved = solve_two_stage(median_problem)
        assert abs(oracle.value - solved.value) <= 1e-3
        assert abs(oracle.x_star[0] - solved.x_star[0]) <= 1e-4

    def test_box_measure_path(self, rd_1d, box_1d):
        p = TwoStageProblem(interval_stage(), rd_1d, box_1d, E)
        res = grid_search_oracle(p, 1e-3)
        assert res.x_star == pytest.approx([0.5], abs=2e-3)
        assert res.value == pytest.approx(0.25, abs=1e-5)


def test_feasible_box_reports_bounds(median_problem):
    lo, hi, feas = feasible_box(median_problem.first_stage)
    assert lo == pytest.approx([0.0])
    assert hi == pytest.approx([1.0])
    fs = median_problem.first_stage
    assert np.max(fs.A_X @ feas - fs.b_X) <= 1e-9


def test_first_stage_validation():
    with pytest.raises(ValueError, match="symmetric"):
        FirstStage(T=[[1.0, 0.0]], h=[0.0, 0.0], H=[[1.0, 0.5], [0.0, 1.0]],
                   A_X=np.zeros((0, 2)), b_X=[])
    with pytest.raises(ValueError, match="semidefinite"):
        FirstStage(T=[[1.0]], h=[0.0], H=[[-1.0]], A_X=np.zeros((0, 1)), b_X=[])
