import pytest

from lll_lab.solvers import CnfInstance, ksat_mt


@pytest.fixture
def two_clause_mt():
    """3 variables, two overlapping clauses violated at 000 and 110."""
    return ksat_mt(CnfInstance(3, ((1, 2, 3), (-1, -2, 3))))


@pytest.fixture
def one_clause_2sat_mt():
    """Single clause x1 or x2: the 4-state absorbing-chain example."""
    return ksat_mt(CnfInstance(2, ((1, 2),)))
