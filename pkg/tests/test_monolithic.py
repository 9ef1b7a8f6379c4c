"""Cross-checks every decomposition against the one-shot reference solver."""

import numpy as np
import pytest

from fixtures_lib import (
    pair_case,
    ring4_case,
    triangle_case,
    triangle_tight_case,
)
from monolithic_lib import monolithic_solve
from sccuc.algorithms import solve_benders, solve_oa, solve_sbd
from sccuc.solverio import SolverConfig

CFG = SolverConfig(gap=1e-6)


@pytest.mark.parametrize("make", [pair_case, triangle_case,
                                  triangle_tight_case, ring4_case])
def test_outer_approximation_matches_reference(make):
    case = make()
    mono = monolithic_solve(case, gap=1e-6)
    sol, _ = solve_oa(case, CFG)
    assert sol.objective == pytest.approx(mono.objective, rel=1e-4)


def test_reference_commitment_agrees_on_the_binding_case():
    case = triangle_tight_case()
    mono = monolithic_solve(case, gap=1e-6)
    sol, _ = solve_oa(case, CFG)
    np.testing.assert_array_equal(np.round(sol.x), mono.x)


def test_all_decompositions_match_reference_within_tolerance():
    case = ring4_case()
    mono = monolithic_solve(case, gap=1e-6)
    for solver in (solve_oa, solve_benders):
        sol, _ = solver(case, CFG)
        assert sol.objective == pytest.approx(mono.objective, rel=1e-4)
    sol, _ = solve_sbd(case, None, CFG)
    assert sol.objective == pytest.approx(mono.objective, rel=1e-4)


def test_reference_bound_brackets_its_own_incumbent():
    mono = monolithic_solve(triangle_tight_case(), gap=1e-6)
    assert mono.bound <= mono.objective + 1e-9
    assert mono.nodes >= 1
