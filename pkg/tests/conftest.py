import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uioinv import cases  # noqa: E402
from uioinv.estimator import design_inverse  # noqa: E402


@pytest.fixture(scope="session")
def case1():
    return cases.case1_plant()


@pytest.fixture(scope="session")
def case3():
    return cases.case3_plant()


@pytest.fixture(scope="session")
def case4():
    return cases.case4_plant()


@pytest.fixture(scope="session")
def case1_design(case1):
    return design_inverse(case1)


@pytest.fixture(scope="session")
def case3_design(case3):
    return design_inverse(case3)
