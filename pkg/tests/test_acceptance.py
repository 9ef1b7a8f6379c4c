"""Release gate: one test per contract-level guarantee.

Each test prints the quantities it judges, so a -v -s run reads as a
checklist.  The first five run with the default suite.  The three
24-bus studies solve the full system repeatedly, take hours on one
core, and carry the extended marker:

    pytest tests/test_acceptance.py -v                  # fast gates
    pytest tests/test_acceptance.py -v -m extended -s   # paper-scale studies
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from fixtures_lib import fixture_cases, sixbus_stress_case, triangle_case, triangle_tight_case
from monolithic_lib import monolithic_solve
from test_solverio import random_conic_system

import sccuc.solverio as solverio
from sccuc.algorithms import SOLVERS, lf_audit, solve_benders
from sccuc.netmodel import build_flowmap, load_case, scale_case
from sccuc.solverio import SolverConfig, certificate_margin, conic_feasibility
from sccuc.stochastic import (
    ORIGIN_BENDERS,
    AffineExpr,
    DegenerateCut,
    SocConstraint,
    flow_affine,
    gaussian_cdf,
    oa_cut,
    total_deviation_stdev,
)
from sccuc.ucmodel import Solution, validate_schedule
from sccuc.validate import (
    evaluate_dispatch,
    sample_wind,
    solve_deterministic,
    violation_report,
)

GAP = 0.01


@pytest.fixture(scope="module")
def solved_fixtures():
    """Every fixture solved by every algorithm at the working 1% gap."""
    out = {}
    for case in fixture_cases():
        runs = {name: solver(case, config=SolverConfig(gap=GAP))
                for name, solver in SOLVERS.items()}
        out[case.name] = (case, runs)
    return out


def eps_for(risk, family, cid):
    if family == "p":
        return risk.eps_gen if cid == "" else risk.eps_gen_ctg
    return risk.eps_line if cid == "" else risk.eps_line_ctg


def fixed_dispatch_solution(case, p, alpha):
    """All-on schedule carrying one dispatch/participation point every hour."""
    G, T = case.n_gens, case.horizon
    return Solution(
        case_name=case.name, status="optimal", objective=0.0, gap=0.0,
        x=np.ones((G, T)), y=np.zeros((G, T)), z=np.zeros((G, T)),
        w=tuple(np.zeros((len(g.startup_blocks), T)) for g in case.generators),
        p=np.tile(np.asarray(p, float)[:, None], (1, T)),
        rplus=np.zeros((G, T)), rminus=np.zeros((G, T)), rup=np.zeros((G, T)),
        g=tuple(np.zeros((len(g.cost_blocks), T)) for g in case.generators),
        sc=np.zeros((G, T)),
        alpha=np.tile(np.asarray(alpha, float)[:, None], (1, T)),
    )


def jittered_costs(case, seed):
    """Same feasible region, randomly repriced objective."""
    rng = np.random.default_rng(seed)

    def scale(g):
        f = rng.uniform(0.8, 1.3, size=4)
        return replace(
            g,
            cost_blocks=tuple((c * f[0], w) for c, w in g.cost_blocks),
            no_load_cost=g.no_load_cost * f[1],
            reserve_cost=g.reserve_cost * f[2],
            tertiary_cost=g.tertiary_cost * f[3],
        )

    return replace(case, generators=tuple(scale(g) for g in case.generators))


class TestSolverAgreement:
    def test_three_algorithms_reach_the_same_objective(self, solved_fixtures):
        started = time.monotonic()
        for name, (case, runs) in solved_fixtures.items():
            objs = {algo: sol.objective for algo, (sol, _) in runs.items()}
            lo, hi = min(objs.values()), max(objs.values())
            print(f"{name:15s} " + "  ".join(
                f"{algo}={v:.4f}" for algo, v in sorted(objs.items())))
            assert hi - lo <= 2 * GAP * lo, f"{name}: {objs}"
            for algo, (sol, _) in runs.items():
                problems = validate_schedule(case, sol)
                assert problems == [], f"{name}/{algo}: {problems[:3]}"
                audit = lf_audit(case, sol)
                assert audit == [], f"{name}/{algo}: {audit[:3]}"
        print(f"equivalence checked in {time.monotonic() - started:.1f}s")

    def test_objectives_match_the_monolithic_reference(self, solved_fixtures):
        for name, (case, runs) in solved_fixtures.items():
            ref = monolithic_solve(case, gap=1e-6)
            for algo, (sol, _) in runs.items():
                rel = abs(sol.objective - ref.objective) / abs(ref.objective)
                assert rel <= 0.01, (name, algo, sol.objective, ref.objective)
            print(f"{name:15s} reference={ref.objective:.4f} "
                  f"worst rel err={max(abs(s.objective - ref.objective) / ref.objective for s, _ in runs.values()):.2e}")


class TestProbabilisticGuarantees:
    N = 100_000

    def test_empirical_violations_stay_within_risk_budgets(self, solved_fixtures):
        for name, (case, runs) in solved_fixtures.items():
            sol, _ = runs["benders"]
            realization = sample_wind(case.wind_model, self.N, seed=11)
            report = violation_report(case, sol, realization)
            worst_ratio = 0.0
            for fam, cid, t, idx, direction, hits, prob in report.rows():
                eps = eps_for(case.risk, fam, cid)
                bound = eps + 3.0 * math.sqrt(eps * (1 - eps) / self.N)
                assert prob <= bound, \
                    (name, fam, cid, t, idx, direction, prob, bound)
                worst_ratio = max(worst_ratio, prob / bound)
            print(f"{name:15s} constraints hit={len(report.counts):3d} "
                  f"worst prob/bound={worst_ratio:.3f}")

    def test_gaussian_tail_matches_simulated_frequency(self):
        case = triangle_case()
        fm = build_flowmap(case, None)
        N = self.N
        realization = sample_wind(case.wind_model, N, seed=23)
        rng = np.random.default_rng(7)
        demand = case.demand.sum(axis=0)
        wind_mean = case.wind_model.mean.sum(axis=0)
        worst = 0.0
        for trial in range(100):
            t = trial % case.horizon
            a = rng.uniform(0.05, 1.0, case.n_gens)
            alpha = a / a.sum()
            w = rng.uniform(0.2, 1.0, case.n_gens)
            p = (demand[t] - wind_mean[t]) * w / w.sum()
            p[0] += demand[t] - wind_mean[t] - p.sum()
            sol = fixed_dispatch_solution(case, p, alpha)
            ev = evaluate_dispatch(case, sol, realization)
            u = float(rng.uniform(-2.0, 2.0))
            if trial % 2 == 0:
                k = trial % case.n_lines
                aff = flow_affine(fm, case, t, p, alpha)[k]
                limit = aff.nominal + u * aff.stdev()
                analytic = 1.0 - aff.prob_below(limit)
                freq = float((ev.flows(t)[k] > limit).mean())
            else:
                i = trial % case.n_gens
                sd = alpha[i] * total_deviation_stdev(case.wind_model, t)
                limit = p[i] + u * sd
                analytic = gaussian_cdf(-u)
                freq = float((ev.outputs(t)[i] > limit).mean())
            se = math.sqrt(analytic * (1.0 - analytic) / N)
            assert abs(analytic - freq) <= 3.0 * se, \
                (trial, analytic, freq, se)
            worst = max(worst, abs(analytic - freq) / se)
        print(f"100 random dispatches, worst |analytic-mc| = {worst:.2f} se")


class TestCutSoundness:
    def test_certificates_and_cuts_never_lie(self, monkeypatch):
        started = time.monotonic()

        # 1000 systems that are infeasible by construction must each come
        # back with a certificate whose contraction is verifiably positive
        checked, seed = 0, 0
        while checked < 1000:
            sub, forced = random_conic_system(np.random.default_rng(seed))
            seed += 1
            if not forced:
                continue
            res = conic_feasibility(sub)
            assert not res.feasible, f"seed {seed - 1} claimed feasible"
            assert res.certificate is not None
            margin, drift = certificate_margin(sub, res.certificate)
            assert margin > 1e-8 and drift <= 1e-6, (seed - 1, margin, drift)
            checked += 1
        print(f"1000 certificates verified ({seed} systems drawn, "
              f"{time.monotonic() - started:.1f}s)")

        # 10000 supporting hyperplanes of random cones, none of which may
        # cut off constructively feasible points of their own cone
        rng = np.random.default_rng(3)
        n, built = 6, 0
        while built < 10_000:
            m = int(rng.integers(1, 4))
            vec = tuple(
                AffineExpr.of(rng.choice(n - 1, size=2, replace=False),
                              rng.normal(0.0, 1.0, 2), float(rng.normal(0, 1)))
                for _ in range(m))
            q = float(rng.uniform(0.5, 3.0))
            soc = SocConstraint(
                rhs_slack=AffineExpr.of([n - 1], [1.0], float(rng.normal(0, 1))),
                vector=vec, quantile=q)
            z = rng.normal(0.0, 2.0, n)
            z[n - 1] = (q * np.linalg.norm(soc.vector_at(z))
                        - soc.rhs_slack.const - float(rng.uniform(0.1, 2.0)))
            try:
                cut = oa_cut(soc, z)
            except DegenerateCut:
                continue
            for _ in range(5):
                y = rng.normal(0.0, 2.0, n)
                y[n - 1] = (q * np.linalg.norm(soc.vector_at(y))
                            - soc.rhs_slack.const + float(rng.uniform(0.0, 2.0)))
                assert cut.violation(y) <= 1e-9, (built, cut.violation(y))
            built += 1
        print(f"10000 cone cuts checked against 5 feasible points each")

        # 100+ dual-certificate cuts harvested from real solves must hold at
        # optimal points of differently priced but structurally equal cases
        harvested: dict[str, list] = {}
        points: dict[str, list] = {}
        orig_absorb = solverio.MilpSession.absorb
        current_key = [""]

        def spying_absorb(self, cuts):
            harvested[current_key[0]].extend(
                c for c in cuts if c.origin == ORIGIN_BENDERS)
            return orig_absorb(self, cuts)

        monkeypatch.setattr(solverio.MilpSession, "absorb", spying_absorb)
        mw_scale: dict[str, float] = {}
        for build in (triangle_tight_case, sixbus_stress_case):
            key = build.__name__
            harvested.setdefault(key, [])
            points.setdefault(key, [])
            for seed in range(8):
                case = jittered_costs(build(), seed)
                mw_scale[key] = max(1.0, *(ln.capacity for ln in case.lines))
                current_key[0] = key
                sol, _ = solve_benders(case, SolverConfig(gap=GAP))
                assert validate_schedule(case, sol) == []
                assert lf_audit(case, sol) == []
                points[key].append(sol.values)
        monkeypatch.setattr(solverio.MilpSession, "absorb", orig_absorb)

        # each point carries residual flow dust up to the cut screen's own
        # threshold (1e-6 of line capacity), and a valid inequality may expose
        # exactly that much; anything beyond it would be a separating cut
        n_cuts = sum(len(v) for v in harvested.values())
        assert n_cuts >= 100, f"only {n_cuts} feasibility cuts harvested"
        for key, cuts in harvested.items():
            slack = 1e-6 * mw_scale[key]
            for cut in cuts:
                for values in points[key]:
                    assert cut.violation(values) <= slack, (key, cut.label)
        print(f"{n_cuts} feasibility cuts checked against "
              f"{sum(len(v) for v in points.values())} optimal points")


@pytest.mark.extended
class TestPaperScaleStudies:
    CONFIG = SolverConfig(gap=GAP)

    def test_deterministic_vs_chance_constrained_day(self, rts96_dir):
        case = scale_case(load_case(rts96_dir),
                          wind_energy_fraction=0.20, line_cap_scale=0.9)
        det_sol, det_rep = solve_deterministic(case, 0.005, self.CONFIG)
        cc_sol, cc_rep = solve_benders(case, self.CONFIG)
        realization = sample_wind(case.wind_model, 1000, seed=5)
        det_mc = violation_report(case, det_sol, realization)
        cc_mc = violation_report(case, cc_sol, realization)

        det_res = float((det_sol.rplus + det_sol.rminus).sum())
        cc_res = float((cc_sol.rplus + cc_sol.rminus).sum())
        det_units = float(det_sol.x.sum())
        cc_units = float(cc_sol.x.sum())
        det_viol = max(det_mc.worst("p"), det_mc.worst("flow"))
        cc_viol = max(cc_mc.worst("p"), cc_mc.worst("flow"))

        print(f"units det/cc            {det_units:.0f} / {cc_units:.0f}")
        print(f"reserve MW det/cc       {det_res:.1f} / {cc_res:.1f}")
        print(f"max violation det/cc    {det_viol:.3f} / {cc_viol:.3f}")
        print(f"objective det/cc        {det_sol.objective:.0f} / {cc_sol.objective:.0f}")
        print(f"wall s det/cc           {det_rep.wall_time_s:.0f} / {cc_rep.wall_time_s:.0f}")

        assert cc_res >= 1.5 * det_res
        assert abs(cc_units - det_units) <= 0.03 * det_units
        assert det_viol >= 5.0 * cc_viol and det_viol > 0.05

    def test_wind_penetration_sweep_trend(self, rts96_dir):
        base = load_case(rts96_dir)
        costs, units = [], []
        for w in (5, 10, 15, 20, 25):
            case = scale_case(base, wind_energy_fraction=w / 100.0)
            sol, rep = solve_benders(case, self.CONFIG)
            costs.append(sol.objective)
            units.append(float(sol.x.sum()))
            print(f"wind {w:2d}%  cost {sol.objective:12.2f}  "
                  f"unit-hours {units[-1]:4.0f}  wall {rep.wall_time_s:5.0f}s")
        assert all(b < a for a, b in zip(costs, costs[1:])), costs
        assert all(b <= a for a, b in zip(units, units[1:])), units

    def test_benders_needs_fewer_rows_and_less_time_than_oa(self, rts96_dir):
        base = load_case(rts96_dir)
        for load, wind in ((0.70, 0.10), (1.00, 0.30)):
            case = scale_case(base, load_scale=load,
                              wind_energy_fraction=wind)
            b_sol, b_rep = solve_benders(case, self.CONFIG)
            o_sol, o_rep = SOLVERS["oa"](case, config=self.CONFIG)
            print(f"L={load:.0%} W={wind:.0%}  "
                  f"benders rows={b_rep.master_rows} wall={b_rep.wall_time_s:.0f}s  "
                  f"oa rows={o_rep.master_rows} wall={o_rep.wall_time_s:.0f}s")
            rel = abs(b_sol.objective - o_sol.objective) / o_sol.objective
            assert rel <= 2 * GAP
            assert b_rep.master_rows < o_rep.master_rows
            assert b_rep.wall_time_s < o_rep.wall_time_s
