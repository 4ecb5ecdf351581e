import numpy as np
import pytest

from recourselab import (BoxDensityMeasure, DiscreteMeasure, FirstStage, RecourseData,
                         RegionV, RiskSpec, TwoStageProblem, enumerate_dual_vertices)


@pytest.fixture(scope="session")
def rd_1d():
    return RecourseData([[1.0, -1.0]], [1.0, 1.0])


@pytest.fixture(scope="session")
def fan_1d(rd_1d):
    return enumerate_dual_vertices(rd_1d)


@pytest.fixture(scope="session")
def rd_2d():
    return RecourseData([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]],
                        [1.0, 1.0, 1.0, 1.0])


@pytest.fixture(scope="session")
def fan_2d(rd_2d):
    return enumerate_dual_vertices(rd_2d)


@pytest.fixture(scope="session")
def box_1d():
    return BoxDensityMeasure([0.0], [1.0])


@pytest.fixture(scope="session")
def box_2d():
    return BoxDensityMeasure([0.0, 0.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def region_1d():
    return RegionV([0.1], [0.9], 0.1)


@pytest.fixture(scope="session")
def region_2d():
    return RegionV([0.2, 0.2], [0.8, 0.8], 0.1)


@pytest.fixture(scope="session")
def nine_atoms():
    atoms = (np.arange(9, dtype=float).reshape(-1, 1) + 1.0) / 10.0
    return DiscreteMeasure(atoms, np.full(9, 1.0 / 9.0))


@pytest.fixture(scope="session")
def unit_interval_stage():
    return FirstStage(T=[[1.0]], h=[0.0], H=None, A_X=[[1.0], [-1.0]], b_X=[1.0, 0.0])


@pytest.fixture(scope="session")
def median_problem(unit_interval_stage, rd_1d, nine_atoms):
    return TwoStageProblem(unit_interval_stage, rd_1d, nine_atoms, RiskSpec.expectation())
