import numpy as np
import pytest

from recourselab.certify import (VERDICT_POSITIVE, VERDICT_ZERO, CertificationError,
                                 eta_threshold_sweep, midpoint_test, monotonicity_modulus,
                                 quadratic_growth_check)
from recourselab.measures import RegionV
from recourselab.risk import RiskSpec, make_objective


class QuadraticObjective:
    """0.5 * kappa |x|^2 + b.x: known modulus, exact oracle."""

    def __init__(self, kappa, b):
        self.kappa = kappa
        self.b = np.asarray(b, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.kappa * float(x @ x) + float(self.b @ x)

    def grad(self, x):
        return self.kappa * np.asarray(x, dtype=float) + self.b


def test_quadratic_modulus_recovered_exactly():
    Q = QuadraticObjective(3.7, [0.5, -1.0])
    region = RegionV([-1.0, -1.0], [1.0, 1.0], 0.1)
    rep = monotonicity_modulus(Q, region, 50, seed=0)
    assert rep.kappa_hat == pytest.approx(3.7, abs=1e-9)
    assert rep.verdict == VERDICT_POSITIVE


def test_benchmark_expectation_modulus(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    rep = monotonicity_modulus(Q, region_1d, 500, seed=101)
    assert abs(rep.kappa_hat - 2.0) <= 0.05
    assert rep.verdict == VERDICT_POSITIVE
    assert rep.n_pairs == 500


def test_constant_excess_is_flat(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expected_excess(2.0))
    rep = monotonicity_modulus(Q, region_1d, 200, seed=5)
    assert rep.kappa_hat == pytest.approx(0.0, abs=1e-12)
    assert rep.verdict == VERDICT_ZERO


def test_discrete_measure_gives_flat_pairs(fan_1d, nine_atoms, region_1d):
    Q = make_objective(fan_1d, nine_atoms, RiskSpec.expectation())
    rep = monotonicity_modulus(Q, region_1d, 300, seed=7)
    assert rep.kappa_hat <= 1e-6
    assert rep.verdict == VERDICT_ZERO


def test_pair_inside_known_linearity_cell(fan_1d, nine_atoms):
    # atoms at 0.1..0.9: (0.51, 0.57) stays inside one cell, ratio 0
    Q = make_objective(fan_1d, nine_atoms, RiskSpec.expectation())
    u = np.array([0.06])
    x = np.array([0.51])
    ratio = float((Q.grad(x + u) - Q.grad(x)) @ u / (u @ u))
    assert ratio == pytest.approx(0.0, abs=1e-12)


def test_threads_do_not_change_results(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    a = monotonicity_modulus(Q, region_1d, 64, seed=3, threads=1)
    b = monotonicity_modulus(Q, region_1d, 64, seed=3, threads=4)
    assert a.kappa_hat == b.kappa_hat
    assert a.worst_x.tobytes() == b.worst_x.tobytes()


def test_midpoint_detects_overclaimed_modulus(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    assert midpoint_test(Q, region_1d, 2.0, 300, seed=11).ok
    assert not midpoint_test(Q, region_1d, 2.5, 300, seed=11).ok
    assert midpoint_test(Q, region_1d, 0.0, 100, seed=11).ok


def test_growth_examples(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    assert quadratic_growth_check(Q, [0.5], region_1d, 2.0, 300, seed=13).ok
    assert not quadratic_growth_check(Q, [0.5], region_1d, 3.0, 300, seed=13).ok
    assert quadratic_growth_check(Q, [0.5], region_1d, 0.0, 100, seed=13).ok


def test_growth_rejects_outside_minimizer(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    with pytest.raises(CertificationError):
        quadratic_growth_check(Q, [5.0], region_1d, 1.0, 10, seed=0)


def test_region_domain_guard(region_1d):
    Q = QuadraticObjective(1.0, [0.0])
    Q.domain = RegionV([0.4], [0.6], 0.05)
    with pytest.raises(CertificationError):
        monotonicity_modulus(Q, region_1d, 10, seed=0)


def test_eta_sweep_examples(fan_1d, box_1d, region_1d):
    sweep = eta_threshold_sweep(fan_1d, box_1d, region_1d,
                                [-1.0, 0.05, 0.2, 1.5], 300, seed=17)
    kappas = dict(sweep.points)
    assert abs(kappas[-1.0] - 2.0) <= 0.05
    assert kappas[1.5] <= 1e-6
    ks = [k for _, k in sweep.points]
    assert all(b <= a + 1e-9 for a, b in zip(ks, ks[1:]))
    assert sweep.c_hat == pytest.approx(0.2)


def test_eta_below_recourse_floor_matches_expectation(fan_1d, box_1d, region_1d):
    Q_e = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    base = monotonicity_modulus(Q_e, region_1d, 200, seed=19)
    sweep = eta_threshold_sweep(fan_1d, box_1d, region_1d, [-5.0], 200, seed=19)
    assert sweep.points[0][1] == pytest.approx(base.kappa_hat, abs=1e-12)


def test_discrete_sweep_all_flat(fan_1d, nine_atoms, region_1d):
    sweep = eta_threshold_sweep(fan_1d, nine_atoms, region_1d, [-1.0, 0.2, 0.8], 200, seed=23)
    assert all(k <= 1e-6 for _, k in sweep.points)
    assert sweep.c_hat is None


def test_consistency_feedback_loop(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    rep = monotonicity_modulus(Q, region_1d, 300, seed=29)
    kappa = 0.95 * rep.kappa_hat
    assert midpoint_test(Q, region_1d, kappa, 300, seed=31).ok
    assert quadratic_growth_check(Q, [0.5], region_1d, kappa, 300, seed=37).ok


def test_report_json_roundtrip(fan_1d, box_1d, region_1d):
    Q = make_objective(fan_1d, box_1d, RiskSpec.expectation())
    rep = monotonicity_modulus(Q, region_1d, 20, seed=41)
    d = rep.to_json_dict()
    assert set(d) >= {"kappa_hat", "n_pairs", "worst_pair", "verdict"}
    assert set(d["worst_pair"]) == {"x", "u", "ratio"}
