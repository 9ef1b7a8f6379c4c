"""Decomposition drivers: equivalence, cut algebra, and block handling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures_lib import (
    fixture_cases,
    pair_case,
    ring4_case,
    sixbus_stress_case,
    triangle_case,
    triangle_tight_case,
)
from sccuc import algorithms as alg
from sccuc.algorithms import (
    AlgorithmReport,
    CutGenerationFailure,
    benders_cut,
    build_lf,
    lf_audit,
    solve_benders,
    solve_oa,
    solve_sbd,
)
from sccuc.netmodel import (
    Bus,
    Contingency,
    GeneratorSpec,
    LINE_OUTAGE,
    Line,
    SccucCase,
)
from sccuc.solverio import SolverConfig, conic_feasibility
from sccuc.stochastic import ORIGIN_BENDERS, WindModel
from sccuc.ucmodel import BuildOptions, build_master

CFG = SolverConfig(gap=1e-6)


def corridor_case(d_local=40.0, d_remote=30.0, cap=25.0):
    """Two buses, two parallel lines, outage of the big one.

    The unit and part of the demand sit off-reference, so after losing the
    wide line everything above cap + d_local has nowhere to go.
    """
    horizon = 1
    buses = (
        Bus(id=1, demand=np.array([d_remote]), is_reference=True),
        Bus(id=2, demand=np.array([d_local]), wind_farm=0),
    )
    lines = (
        Line(0, 1, susceptance=0.05, capacity=500.0),
        Line(0, 1, susceptance=0.05, capacity=cap),
    )
    gens = (
        GeneratorSpec(
            name="only", bus=1, p_min=0.0, p_max=200.0,
            cost_blocks=((20.0, 200.0),), no_load_cost=0.0, reserve_cost=1.0,
            tertiary_cost=1.0, startup_blocks=((10.0, 1, None),),
            min_up=1, min_down=1, ramp_up=200.0, ramp_down=200.0,
            init_on=True, init_up_hours=3, init_down_hours=0, init_power=70.0,
        ),
    )
    wind = WindModel(mean=np.zeros((1, horizon)), stdev=np.zeros((1, horizon)))
    ctgs = (Contingency(kind=LINE_OUTAGE, index=0, id=0, name="line:wide"),)
    return SccucCase(buses=buses, lines=lines, generators=gens,
                     wind_model=wind, contingencies=ctgs, horizon=horizon,
                     mva_base=100.0, name="corridor")


class FixedPoint:
    """Stand-in solution carrying only what the flow subproblems read."""

    def __init__(self, p, alpha, delta=None):
        self.p = np.asarray(p, dtype=float)
        self._alpha = np.asarray(alpha, dtype=float)
        self._delta = delta

    def alpha_for(self, cid):
        return self._alpha

    def delta_for(self, cid):
        if self._delta is None:
            return np.zeros_like(self.p)
        return self._delta


class TestEquivalence:

    def test_three_ways_agree_on_fixtures(self):
        for case in fixture_cases():
            sol_oa, _ = solve_oa(case, CFG)
            sol_sbd, _ = solve_sbd(case, None, CFG)
            sol_b, _ = solve_benders(case, CFG)
            scale = abs(sol_oa.objective)
            tol = 2 * CFG.gap * scale
            assert abs(sol_sbd.objective - sol_oa.objective) <= tol, case.name
            assert abs(sol_b.objective - sol_oa.objective) <= tol, case.name
            for sol in (sol_oa, sol_sbd, sol_b):
                assert lf_audit(case, sol) == [], case.name

    def test_no_contingencies_make_benders_plain(self):
        case = pair_case()
        sol_oa, _ = solve_oa(case, CFG)
        sol_b, rep = solve_benders(case, CFG)
        assert rep.subproblem_solves == 0
        assert ORIGIN_BENDERS not in rep.cuts_by_origin
        assert sol_b.objective == pytest.approx(sol_oa.objective, rel=1e-9)

    def test_zero_deviation_needs_no_cuts(self):
        _, rep = solve_oa(pair_case(), CFG,
                          options=BuildOptions(deterministic=True))
        assert rep.cuts_by_origin == {}

    def test_scan_first_reaches_the_same_optimum(self):
        case = triangle_tight_case()
        ref, _ = solve_oa(case, CFG)
        for solver in (solve_oa, solve_benders):
            sol, _ = solver(case, CFG, scan="first")
            assert sol.objective == pytest.approx(ref.objective, rel=1e-5)
        sol, _ = solve_sbd(case, None, CFG, scan="first")
        assert sol.objective == pytest.approx(ref.objective, rel=1e-5)

    def test_unknown_scan_policy_rejected(self):
        with pytest.raises(ValueError):
            solve_oa(pair_case(), CFG, scan="worst")


class TestSbdBlocks:

    def test_empty_c1_replays_outer_approximation(self):
        case = sixbus_stress_case()
        _, rep_oa = solve_oa(case, CFG)
        sol, rep = solve_sbd(case, [], CFG)
        assert rep.blocks_added == ()
        assert rep.subproblem_solves == 0
        assert rep.cuts_by_origin == rep_oa.cuts_by_origin
        np.testing.assert_allclose(rep.objective_trace, rep_oa.objective_trace,
                                   rtol=1e-9)

    def test_only_failing_blocks_materialize(self):
        # triangle has one generator outage and it binds
        _, rep = solve_sbd(triangle_case(), None, CFG)
        assert rep.blocks_added == (0,)
        flagged = [r for r in rep.cut_log if r.origin == "block"]
        assert [r.ctg for r in flagged] == [0]

        _, rep4 = solve_sbd(ring4_case(), None, CFG)
        assert set(rep4.blocks_added) == {0, 1}

    def test_deferred_blocks_get_recourse_witnesses(self):
        case = sixbus_stress_case()
        sol, rep = solve_sbd(case, None, CFG)
        for ctg in case.generator_outages():
            alpha = sol.alpha_ctg[ctg.id]
            delta = sol.delta_ctg[ctg.id]
            assert alpha.shape == sol.p.shape
            np.testing.assert_allclose(alpha.sum(axis=0), 1.0, atol=1e-6)
            np.testing.assert_allclose(delta.sum(axis=0), 0.0, atol=1e-6)
            np.testing.assert_allclose(alpha[ctg.index], 0.0, atol=1e-7)
            np.testing.assert_allclose(
                delta[ctg.index], -sol.p[ctg.index], atol=1e-6)

    def test_unknown_contingency_id_rejected(self):
        with pytest.raises(ValueError):
            solve_sbd(triangle_case(), [41], CFG)


class TestBendersCut:

    def test_corridor_cut_is_capacity_plus_local_demand(self):
        case = corridor_case(d_local=40.0, cap=25.0)
        point = FixedPoint(p=[[70.0]], alpha=[[1.0]])
        lf = build_lf(case, 0, 0, point)
        res = conic_feasibility(lf.sub)
        assert not res.feasible
        cut = benders_cut(lf, res.certificate)
        # deviation-free corridor: only the dispatch column survives
        assert cut.ids.tolist() == [0]
        assert cut.coefs[0] > 0
        assert cut.rhs / cut.coefs[0] == pytest.approx(65.0, abs=1e-6)
        incumbent = np.array([70.0, 0.0, 1.0])
        assert cut.violation(incumbent) > 1e-6
        assert cut.satisfied(np.array([64.0, 0.0, 1.0]))

    @settings(max_examples=25, deadline=None)
    @given(
        d_local=st.floats(10.0, 80.0),
        cap=st.floats(8.0, 60.0),
        excess=st.floats(1.0, 50.0),
    )
    def test_corridor_cut_tracks_the_data(self, d_local, cap, excess):
        case = corridor_case(d_local=d_local, cap=cap)
        point = FixedPoint(p=[[cap + d_local + excess]], alpha=[[1.0]])
        lf = build_lf(case, 0, 0, point)
        res = conic_feasibility(lf.sub)
        assert not res.feasible
        cut = benders_cut(lf, res.certificate)
        assert cut.rhs / cut.coefs[0] == pytest.approx(cap + d_local, rel=1e-6)

    def test_feasible_corridor_has_a_witness(self):
        case = corridor_case(d_local=40.0, cap=25.0)
        lf = build_lf(case, 0, 0, FixedPoint(p=[[60.0]], alpha=[[1.0]]))
        res = conic_feasibility(lf.sub)
        assert res.feasible


class TestLfSystem:

    def _random_fill(self, case, master, rng):
        values = np.zeros(len(master.vars))
        G, T = case.n_gens, case.horizon
        pmax = np.array([g.p_max for g in case.generators])
        values[master.p] = rng.uniform(0, pmax[:, None], (G, T))
        values[master.alpha] = rng.dirichlet(np.ones(G), T).T
        for cid, ids in master.alpha_ctg.items():
            values[ids] = rng.dirichlet(np.ones(G), T).T
        for cid, ids in master.delta_ctg.items():
            values[ids] = rng.uniform(0, 10, (G, T))
        return values

    def test_margins_match_the_master_cones(self):
        case = triangle_tight_case()
        master = build_master(case)
        rng = np.random.default_rng(7)
        base_topo = alg._LfTopology(case, None)
        for trial in range(4):
            values = self._random_fill(case, master, rng)
            for t, cid in master.soc_keys():
                group = master.soc_groups[(t, cid)]
                hi_ref, lo_ref = group.margins(values)
                if cid is None or case.contingencies[cid].is_generator:
                    topo = base_topo
                else:
                    topo = alg._LfTopology(case, case.contingencies[cid])
                total = values[group.p_ids]
                if group.delta_ids is not None:
                    total = total + values[group.delta_ids]
                _, _, hi, lo = alg._lf_point(
                    case, topo, topo, t, total, values[group.alpha_ids],
                    group.sigmas, group.quantile)
                np.testing.assert_allclose(hi, hi_ref, atol=1e-7)
                np.testing.assert_allclose(lo, lo_ref, atol=1e-7)

    def test_screen_and_cone_solver_agree(self):
        case = triangle_tight_case()
        master = build_master(case)
        rng = np.random.default_rng(3)
        sol_opt, _ = solve_oa(case, CFG)
        checked_infeasible = 0
        for trial in range(6):
            values = self._random_fill(case, master, rng)
            for t, cid in master.soc_keys():
                if cid is None:
                    continue
                group = master.soc_groups[(t, cid)]
                hi, lo = group.margins(values)
                worst = max(hi.max(), lo.max())
                point = FixedPoint(
                    p=values[master.p],
                    alpha=values[master.alpha_ids_of(cid)],
                    delta=(None if master.delta_ids_of(cid) is None
                           else values[master.delta_ids_of(cid)]),
                )
                lf = build_lf(case, t, cid, point,
                              p_ids=master.p[:, t],
                              alpha_ids=master.alpha_ids_of(cid)[:, t],
                              delta_ids=(
                                  None if master.delta_ids_of(cid) is None
                                  else master.delta_ids_of(cid)[:, t]))
                res = conic_feasibility(lf.sub)
                if worst > 1e-6:
                    assert not res.feasible
                    cut = benders_cut(lf, res.certificate)
                    assert cut.violation(values) > 1e-6
                    # the cut may not cut off a point that satisfies every
                    # outage flow constraint
                    assert cut.satisfied(sol_opt.values)
                    checked_infeasible += 1
                elif worst < -1e-6:
                    assert res.feasible
        assert checked_infeasible >= 3

    def test_benders_never_builds_outage_flow_maps(self, monkeypatch):
        import sccuc.ucmodel as ucm
        seen = []
        original = ucm._build_flow_ctx

        def spy(case, ctg):
            seen.append(None if ctg is None else ctg.id)
            return original(case, ctg)

        monkeypatch.setattr(ucm, "_build_flow_ctx", spy)
        solve_benders(sixbus_stress_case(), CFG)
        assert seen and set(seen) == {None}

    def test_gamma_matrix_switch_solves_clean(self):
        case = sixbus_stress_case()
        sol, rep = solve_benders(case, CFG, gamma_on_base_matrix=True)
        assert rep.gap <= CFG.gap
        assert lf_audit(case, sol, gamma_on_base_matrix=True) == []


class TestReports:

    def test_report_round_trips_to_plain_data(self):
        case = sixbus_stress_case()
        sol, rep = solve_benders(case, CFG)
        d = rep.as_dict()
        assert d["algorithm"] == "benders"
        assert d["objective"] == pytest.approx(sol.objective)
        assert d["cuts_logged"] == len(rep.cut_log)
        assert all(len(r.as_row()) == 5 for r in rep.cut_log)
        assert rep.wall_time_s > 0

    def test_incumbent_objectives_never_regress(self):
        _, rep = solve_oa(sixbus_stress_case(), CFG)
        trace = rep.objective_trace
        assert len(trace) >= 1
        for earlier, later in zip(trace, trace[1:]):
            assert later >= earlier - 1e-7 * abs(earlier)

    def test_benders_master_stays_smaller_than_sbd(self):
        case = sixbus_stress_case()
        _, rep_sbd = solve_sbd(case, None, CFG)
        _, rep_b = solve_benders(case, CFG)
        assert rep_b.master_rows < rep_sbd.master_rows

    def test_registry_names_the_three_solvers(self):
        assert set(alg.SOLVERS) == {"oa", "sbd", "benders"}
