"""Exact decomposition drivers for the reserve-aware commitment model.

Three routes to the same optimum.  Plain outer approximation (OA) keeps
every deferred flow cone in a registry and cuts violated ones at each
incumbent.  Scenario-based decomposition (SBD) additionally leaves whole
contingency blocks out of the master and materializes one only after an
incumbent fails its feasibility subproblem.  The Benders-style loop drops
the contingency flow cones entirely and enforces them through feasibility
cuts obtained from dual certificates of small angle-space subproblems,
which keeps the master row count low when many contingencies bind.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .netmodel import (
    GENERATOR_OUTAGE,
    Contingency,
    ReducedAdmittance,
    SccucCase,
    build_admittance,
)
from .stochastic import (
    ORIGIN_BENDERS,
    ORIGIN_OA,
    AffineExpr,
    DegenerateCut,
    LinearCut,
    SocConstraint,
    gaussian_quantile,
    oa_cut,
    total_deviation_stdev,
)
from .solverio import (
    ConicSubproblem,
    MilpSession,
    NumericalFailure,
    SolverConfig,
    conic_feasibility,
)
from .ucmodel import (
    BuildOptions,
    MasterModel,
    Solution,
    build_master,
    evaluate_cost,
)


class CutGenerationFailure(Exception):
    """No usable certificate for an infeasible flow subproblem."""


# -- reporting -------------------------------------------------------------------


@dataclass(frozen=True)
class CutRecord:
    round: int
    origin: str
    t: int
    ctg: int | None
    violation: float

    def as_row(self) -> tuple:
        return (self.round, self.origin, self.t,
                "" if self.ctg is None else self.ctg, self.violation)


@dataclass
class AlgorithmReport:
    """What a solve did, sized for serialization next to the solution."""

    algorithm: str
    objective: float
    gap: float
    iterations: int
    cuts_by_origin: dict[str, int]
    blocks_added: tuple[int, ...]
    subproblem_solves: int
    wall_time_s: float
    master_rows: int
    cut_log: list[CutRecord] = field(default_factory=list)
    objective_trace: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "objective": self.objective,
            "gap": self.gap,
            "iterations": self.iterations,
            "cuts_by_origin": dict(self.cuts_by_origin),
            "blocks_added": list(self.blocks_added),
            "subproblem_solves": self.subproblem_solves,
            "wall_time_s": self.wall_time_s,
            "master_rows": self.master_rows,
            "cuts_logged": len(self.cut_log),
        }


# -- outer approximation ---------------------------------------------------------


def _linear_fallback(soc) -> LinearCut:
    # vanished cone vector: q*||v|| <= slack degenerates to 0 <= slack
    slack = soc.rhs_slack
    return LinearCut.of(slack.ids, -slack.coefs, slack.const,
                        origin=ORIGIN_OA, label=soc.label)


def _group_cuts(master: MasterModel, values: np.ndarray, round_no: int,
                log: list[CutRecord], scan: str) -> list[LinearCut]:
    """OA cuts for every violated registered flow cone at this point."""
    cuts: list[LinearCut] = []
    for key in master.soc_keys():
        group = master.soc_groups[key]
        viols = group.violations(values)
        for k, direction, amount in viols:
            soc = group.constraint(k, direction)
            try:
                cut = oa_cut(soc, values)
            except DegenerateCut:
                cut = _linear_fallback(soc)
            cuts.append(cut)
            log.append(CutRecord(round_no, cut.origin, group.t, key[1], amount))
        if viols and scan == "first":
            break
    return cuts


def solve_oa(case: SccucCase, config: SolverConfig | None = None, *,
             options: BuildOptions | None = None,
             scan: str = "all") -> tuple[Solution, AlgorithmReport]:
    """Branch-and-cut with lazy outer approximation of every flow cone.

    scan picks the per-incumbent separation policy: "all" collects cuts from
    every violated cone, "first" stops at the first violated group.
    """
    if scan not in ("all", "first"):
        raise ValueError(f"scan policy {scan!r}")
    started = time.monotonic()
    master = build_master(case, options or BuildOptions())
    session = MilpSession(master, config)
    log: list[CutRecord] = []
    trace: list[float] = []
    rounds = [0]

    def on_incumbent(sol: Solution) -> list[LinearCut]:
        rounds[0] += 1
        if sol.status == "optimal":
            trace.append(sol.objective)
        return _group_cuts(master, sol.values, rounds[0], log, scan)

    sol = session.solve_with_callback(on_incumbent)
    sol.costs = evaluate_cost(case, sol)
    report = AlgorithmReport(
        algorithm="oa", objective=sol.objective, gap=sol.gap,
        iterations=rounds[0],
        cuts_by_origin=dict(Counter(c.origin for c in session.cuts)),
        blocks_added=(), subproblem_solves=0,
        wall_time_s=time.monotonic() - started,
        master_rows=master.n_rows + len(session.cuts),
        cut_log=log, objective_trace=trace,
    )
    return sol, report


# -- scenario-based decomposition ------------------------------------------------


def gen_outage_subproblem(case: SccucCase, master: MasterModel, cid: int,
                          t: int, sol: Solution) -> ConicSubproblem:
    """Recourse feasibility for one generator outage at a fixed incumbent.

    Free variables are the outage participation and redispatch of every
    unit; commitment, dispatch, and purchased reserves are data.  Local
    variable layout: alpha_i -> i, delta_i -> n_gens + i.
    """
    ctg = case.contingencies[cid]
    G = case.n_gens
    c = ctg.index
    x = np.round(sol.x[:, t])
    sub = ConicSubproblem(2 * G)

    a_ub = x.copy()
    a_ub[c] = 0.0
    for i in case.gens_at_reference:
        a_ub[i] = 0.0
    if not master.options.deterministic:
        sigma = total_deviation_stdev(case.wind_model, t)
        if sigma > 0:
            z = gaussian_quantile(case.risk.eps_gen_ctg)
            room = np.minimum(sol.rplus[:, t], sol.rminus[:, t])
            a_ub = np.minimum(a_ub, np.maximum(room, 0.0) / (z * sigma))
    pmax = np.array([g.p_max for g in case.generators])
    d_ub = np.minimum(pmax, np.maximum(sol.rup[:, t], 0.0))
    for i in range(G):
        if i == c:
            pin = -float(sol.p[c, t])
            sub.set_bounds(G + i, pin, pin)
        else:
            sub.set_bounds(G + i, 0.0, float(d_ub[i]))
        sub.set_bounds(i, 0.0, float(a_ub[i]))
    sub.add_eq(np.arange(G), np.ones(G), 1.0)
    sub.add_eq(np.arange(G, 2 * G), np.ones(G), 0.0)

    # outage topology equals the base topology, so reuse the base flow data
    ctx = master.flow_ctx(None)
    sig = (np.zeros(case.wind_model.n_farms) if master.options.deterministic
           else case.wind_model.stdev[:, t])
    q = gaussian_quantile(case.risk.eps_line_ctg)
    alpha_ids = np.arange(G)
    delta_ids = np.arange(G, 2 * G)
    p_bar = sol.p[:, t]
    for k in range(len(ctx.lines)):
        row = ctx.fgen[k]
        nominal = float(row @ p_bar + ctx.base_flow[k, t])
        cap = float(ctx.caps[k])
        vec = tuple(
            AffineExpr.of(alpha_ids, -float(s) * row,
                          float(s) * float(ctx.fwind[k, w]))
            for w, s in enumerate(sig) if s > 0.0
        )
        sub.add_cone(SocConstraint(
            AffineExpr.of(delta_ids, -row, cap - nominal), vec, q,
            label=f"ctg-flow[line{ctx.lines[k]},hi]"))
        sub.add_cone(SocConstraint(
            AffineExpr.of(delta_ids, row, cap + nominal), vec, q,
            label=f"ctg-flow[line{ctx.lines[k]},lo]"))
    return sub


def _block_feasible(case, master, cid, t, sol, counter) -> tuple[bool, object]:
    sub = gen_outage_subproblem(case, master, cid, t, sol)
    counter[0] += 1
    try:
        res = conic_feasibility(sub)
    except NumericalFailure:
        return False, None  # doubt resolves to materializing, always sound
    return res.feasible, res.witness


def _scan_blocks(case, master, sol, pending, counter, log, round_no,
                 scan: str) -> list[int]:
    """Contingency ids in pending whose recourse fails at this incumbent."""
    violated: list[int] = []
    for cid in pending:
        ctg = case.contingencies[cid]
        hit = None
        for t in range(case.horizon):
            if ctg.kind == GENERATOR_OUTAGE:
                ok, _ = _block_feasible(case, master, cid, t, sol, counter)
                if not ok:
                    hit = t
                    break
            else:
                viols = master.make_group(t, cid).violations(sol.values)
                if viols:
                    hit = t
                    break
        if hit is not None:
            violated.append(cid)
            log.append(CutRecord(round_no, "block", hit, cid, np.nan))
            if scan == "first":
                break
    return violated


def _fill_block_witnesses(case, master, sol, pending, counter):
    """Store feasible outage recourse for blocks that never joined the master."""
    G, T = case.n_gens, case.horizon
    for cid in pending:
        if case.contingencies[cid].kind != GENERATOR_OUTAGE:
            continue
        alpha = np.zeros((G, T))
        delta = np.zeros((G, T))
        for t in range(T):
            ok, witness = _block_feasible(case, master, cid, t, sol, counter)
            if not ok or witness is None:
                raise NumericalFailure(
                    f"contingency {cid} hour {t} lost feasibility after solve")
            alpha[:, t] = witness[:G]
            delta[:, t] = witness[G:]
        sol.alpha_ctg[cid] = alpha
        sol.delta_ctg[cid] = delta


def solve_sbd(case: SccucCase, c1=None, config: SolverConfig | None = None, *,
              scan: str = "all") -> tuple[Solution, AlgorithmReport]:
    """OA plus deferred contingency blocks (the set c1, default: all
    generator outages).  A block enters the master only after an incumbent
    fails its recourse feasibility check; once in, it can never be violated
    again, so the loop does at most len(c1) materializations.
    """
    if scan not in ("all", "first"):
        raise ValueError(f"scan policy {scan!r}")
    started = time.monotonic()
    all_ids = {c.id for c in case.contingencies}
    if c1 is None:
        c1 = [c.id for c in case.generator_outages()]
    pending = sorted(int(i) for i in c1)
    if set(pending) - all_ids:
        raise ValueError(f"unknown contingency ids in c1: "
                         f"{sorted(set(pending) - all_ids)}")
    options = BuildOptions(
        include_contingency_blocks=sorted(all_ids - set(pending)))
    master = build_master(case, options)

    log: list[CutRecord] = []
    trace: list[float] = []
    rounds = [0]
    subsolves = [0]
    blocks_added: list[int] = []
    carried: list[LinearCut] = []
    cuts_added = 0
    session = None
    while True:
        session = MilpSession(master, config)
        cap = session.config.max_cuts_per_round
        for at in range(0, len(carried), cap):
            session.absorb(carried[at:at + cap])

        def on_incumbent(sol: Solution) -> list[LinearCut]:
            rounds[0] += 1
            if sol.status == "optimal":
                trace.append(sol.objective)
            return _group_cuts(master, sol.values, rounds[0], log, scan)

        sol = session.solve_with_callback(on_incumbent)
        carried = list(session.cuts)
        violated = _scan_blocks(case, master, sol, pending, subsolves, log,
                                rounds[0], scan)
        if not violated:
            break
        for cid in violated:
            master.add_contingency_block(cid)
            pending.remove(cid)
            blocks_added.append(cid)

    _fill_block_witnesses(case, master, sol, pending, subsolves)
    sol.costs = evaluate_cost(case, sol)
    cuts_added = len(session.cuts)
    report = AlgorithmReport(
        algorithm="sbd", objective=sol.objective, gap=sol.gap,
        iterations=rounds[0],
        cuts_by_origin=dict(Counter(c.origin for c in session.cuts)),
        blocks_added=tuple(blocks_added), subproblem_solves=subsolves[0],
        wall_time_s=time.monotonic() - started,
        master_rows=master.n_rows + cuts_added,
        cut_log=log, objective_trace=trace,
    )
    return sol, report


# -- Benders-style feasibility cuts ----------------------------------------------


class _LfTopology:
    """Factorized network data for one (possibly post-outage) topology.

    Holds the reduced admittance factorization, per-wind-bus angle
    responses, and line incidence data.  Only the wind columns of the flow
    sensitivity are ever formed; the full injection-to-flow matrix is not.
    """

    def __init__(self, case: SccucCase, ctg: Contingency | None):
        self.solver = ReducedAdmittance(case, ctg)
        skip = ctg.index if ctg is not None and ctg.is_line else None
        kept = [k for k in range(case.n_lines) if k != skip]
        self.kept = np.array(kept, dtype=int)
        self.beta = np.array(
            [case.lines[k].susceptance * case.mva_base for k in kept])
        self.from_bus = np.array([case.lines[k].from_bus for k in kept])
        self.to_bus = np.array([case.lines[k].to_bus for k in kept])
        self.caps = np.array([case.lines[k].capacity for k in kept])
        unit = np.zeros((case.n_buses, len(case.wind_bus)))
        for w, bus in enumerate(case.wind_bus):
            unit[bus, w] = 1.0
        self.psi = self.solver.solve(unit)  # (B, W) angles per unit wind inj
        # flow response of kept lines to each wind bus injection
        self.wind_rows = self.beta[:, None] * (
            self.psi[self.from_bus] - self.psi[self.to_bus])

    def flows(self, injection: np.ndarray) -> np.ndarray:
        theta = self.solver.solve(injection)
        return self.beta * (theta[self.from_bus] - theta[self.to_bus])


def _bus_aggregate(case: SccucCase, per_gen: np.ndarray) -> np.ndarray:
    out = np.zeros(case.n_buses)
    np.add.at(out, case.gen_bus, per_gen)
    return out


def _lf_point(case, topo: _LfTopology, gamma_topo: _LfTopology, t: int,
              p_total: np.ndarray, alpha: np.ndarray, sigmas: np.ndarray,
              quantile: float):
    """(flows, gamma spread, hi margins, lo margins) at a fixed dispatch."""
    inj = (_bus_aggregate(case, p_total)
           + case.wind_injection[:, t] - case.demand[:, t])
    f = topo.flows(inj)
    gamma = gamma_topo.solver.solve(_bus_aggregate(case, alpha))
    gterm = topo.beta * (gamma[topo.to_bus] - gamma[topo.from_bus])
    vec = sigmas[None, :] * (topo.wind_rows + gterm[:, None])
    width = quantile * np.linalg.norm(vec, axis=1)
    return f, gterm, f + width - topo.caps, width - f - topo.caps


@dataclass(eq=False)
class LfSubproblem:
    """Angle-space feasibility system for one (hour, contingency) pair.

    Variables are bus angles for the dispatch and for the participation
    response (reference entries fixed at zero by exclusion) plus one flow
    variable per surviving line; the system is feasible exactly when the
    contingency flow chance constraints hold at the fixed incumbent.
    """

    contingency: Contingency
    t: int
    sub: ConicSubproblem
    theta_buses: np.ndarray      # bus per theta equality row, in order
    gamma_buses: np.ndarray      # bus per gamma equality row, in order
    mu_minus_d: np.ndarray       # (B,) wind mean minus demand at hour t
    p_ids: np.ndarray            # master (or local) columns of p, delta, alpha
    delta_ids: np.ndarray | None
    alpha_ids: np.ndarray
    gen_bus: np.ndarray
    rescale: float = 1.0


def build_lf(case: SccucCase, t: int, cid: int, solution: Solution, *,
             gamma_on_base_matrix: bool = False,
             topo: _LfTopology | None = None,
             base_topo: _LfTopology | None = None,
             sigmas: np.ndarray | None = None,
             p_ids: np.ndarray | None = None,
             alpha_ids: np.ndarray | None = None,
             delta_ids: np.ndarray | None = None,
             rescale: float = 1.0) -> LfSubproblem:
    """Feasibility subproblem whose emptiness certifies a violated outage flow.

    The participation angle system runs on the outage admittance matrix;
    gamma_on_base_matrix=True switches it to the pre-outage matrix (only
    meaningful for line outages, where the two differ).  Without explicit
    id arrays the cut coordinates default to p_i -> i, delta_i -> G+i,
    alpha_i -> 2G+i.
    """
    ctg = case.contingencies[cid]
    G, B = case.n_gens, case.n_buses
    r = case.reference
    topo = topo or _LfTopology(case, ctg)
    if gamma_on_base_matrix and ctg.is_line:
        gamma_topo = base_topo or _LfTopology(case, None)
    else:
        gamma_topo = topo
    if sigmas is None:
        sigmas = case.wind_model.stdev[:, t]
    if p_ids is None:
        p_ids = np.arange(G)
        delta_ids = np.arange(G, 2 * G) if ctg.is_generator else None
        alpha_ids = np.arange(2 * G, 3 * G)

    p_bar = solution.p[:, t]
    delta_bar = solution.delta_for(cid)[:, t]
    alpha_bar = solution.alpha_for(cid)[:, t]

    buses = np.array([b for b in range(B) if b != r], dtype=int)
    pos = {int(b): j for j, b in enumerate(buses)}
    nb = len(buses)
    nl = len(topo.kept)
    sub = ConicSubproblem(2 * nb + nl)

    def var_row(matrix_row: np.ndarray, offset: int):
        ids, coefs = [], []
        for b in buses:
            if abs(matrix_row[b]) > 1e-13:
                ids.append(offset + pos[int(b)])
                coefs.append(matrix_row[b])
        return np.array(ids, dtype=int), np.array(coefs)

    admit = build_admittance(case, ctg)
    gamma_admit = (build_admittance(case, None)
                   if gamma_topo is not topo else admit)
    agg_p = _bus_aggregate(case, p_bar + delta_bar)
    agg_a = _bus_aggregate(case, alpha_bar)
    mu_minus_d = case.wind_injection[:, t] - case.demand[:, t]
    for b in buses:
        ids, coefs = var_row(admit[b], 0)
        sub.add_eq(ids, coefs, rescale * float(agg_p[b] + mu_minus_d[b]))
    for b in buses:
        ids, coefs = var_row(gamma_admit[b], nb)
        sub.add_eq(ids, coefs, rescale * float(agg_a[b]))

    q = gaussian_quantile(case.risk.eps_line_ctg)
    for k in range(nl):
        fid = 2 * nb + k
        m, n = int(topo.from_bus[k]), int(topo.to_bus[k])
        beta = float(topo.beta[k])
        ids, coefs = [fid], [1.0]
        if m != r:
            ids.append(pos[m])
            coefs.append(-beta)
        if n != r:
            ids.append(pos[n])
            coefs.append(beta)
        sub.add_eq(np.array(ids), np.array(coefs), 0.0)
        vec = []
        for w, s in enumerate(sigmas):
            if s <= 0.0:
                continue
            gids, gcoefs = [], []
            if n != r:
                gids.append(nb + pos[n])
                gcoefs.append(s * beta)
            if m != r:
                gids.append(nb + pos[m])
                gcoefs.append(-s * beta)
            vec.append(AffineExpr.of(
                np.array(gids, dtype=int), np.array(gcoefs),
                rescale * float(s * topo.wind_rows[k, w])))
        cap = rescale * float(topo.caps[k])
        line = int(topo.kept[k])
        sub.add_cone(SocConstraint(AffineExpr.of([fid], [-1.0], cap),
                                   tuple(vec), q, f"lf-flow[line{line},hi]"))
        sub.add_cone(SocConstraint(AffineExpr.of([fid], [1.0], cap),
                                   tuple(vec), q, f"lf-flow[line{line},lo]"))

    return LfSubproblem(
        contingency=ctg, t=t, sub=sub, theta_buses=buses, gamma_buses=buses,
        mu_minus_d=mu_minus_d, p_ids=np.asarray(p_ids),
        delta_ids=None if delta_ids is None else np.asarray(delta_ids),
        alpha_ids=np.asarray(alpha_ids), gen_bus=case.gen_bus,
        rescale=rescale,
    )


def benders_cut(lf: LfSubproblem, certificate) -> LinearCut:
    """Feasibility cut over (p, delta, alpha) at the subproblem's hour.

    The certificate's multiplier-weighted contraction reads coef . v +
    const(m) <= 0 for every angle vector v feasible at master point m, with
    coef ~ 0; requiring const(m) <= 0 is therefore valid for every m whose
    subproblem is nonempty, and the incumbent violates it by the
    certificate margin.
    """
    nb = len(lf.theta_buses)
    lam_theta = np.zeros(lf.mu_minus_d.shape[0])
    lam_gamma = np.zeros(lf.mu_minus_d.shape[0])
    lam_theta[lf.theta_buses] = certificate.eq[:nb]
    lam_gamma[lf.gamma_buses] = certificate.eq[nb:2 * nb]

    c0 = 0.0
    for cone, (u0, u) in zip(lf.sub.cones, certificate.cones):
        for weight, expr in zip(u, cone.vector):
            c0 += cone.quantile * float(weight) * expr.const
        c0 -= u0 * cone.rhs_slack.const

    s = lf.rescale
    coef_p = -s * lam_theta[lf.gen_bus]
    coef_a = -lam_gamma[lf.gen_bus] * s
    ids, coefs = [], []
    for vid, cf in zip(lf.p_ids, coef_p):
        if abs(cf) > 1e-14:
            ids.append(int(vid))
            coefs.append(cf)
    if lf.delta_ids is not None:
        for vid, cf in zip(lf.delta_ids, coef_p):
            if abs(cf) > 1e-14:
                ids.append(int(vid))
                coefs.append(cf)
    for vid, cf in zip(lf.alpha_ids, coef_a):
        if abs(cf) > 1e-14:
            ids.append(int(vid))
            coefs.append(cf)
    if not ids:
        raise DegenerateCut("certificate leaves no master coefficients")
    rhs = -c0 + s * float(lam_theta[lf.theta_buses] @
                          lf.mu_minus_d[lf.theta_buses])
    cid = lf.contingency.id
    return LinearCut.of(ids, coefs, rhs, origin=ORIGIN_BENDERS,
                        label=f"lf[t{lf.t},ctg{cid}]")


def _certify(case, t, cid, sol, *, master, topo, base_topo, sigmas,
             gamma_on_base_matrix, margin) -> LinearCut | None:
    kwargs = dict(
        gamma_on_base_matrix=gamma_on_base_matrix, topo=topo,
        base_topo=base_topo, sigmas=sigmas,
        p_ids=master.p[:, t],
        alpha_ids=master.alpha_ids_of(cid)[:, t],
        delta_ids=(None if master.delta_ids_of(cid) is None
                   else master.delta_ids_of(cid)[:, t]),
    )
    # capacity-normalized system first: the cut algebra is scale-free and
    # phase-I behaves best with flows of order one
    scale = 1.0 / max(1.0, float(topo.caps.max()))
    lf = build_lf(case, t, cid, sol, rescale=scale, **kwargs)
    try:
        res = conic_feasibility(lf.sub)
    except NumericalFailure:
        lf = build_lf(case, t, cid, sol, **kwargs)
        try:
            res = conic_feasibility(lf.sub)
        except NumericalFailure as exc:
            raise CutGenerationFailure(
                f"hour {t} contingency {cid}: {exc}") from exc
    if res.feasible:
        # a feasible witness bounds the true violation at phase-I noise
        # level, so the screen margin was tolerance dust; nothing to cut
        return None
    cut = benders_cut(lf, res.certificate)
    violation = cut.violation(sol.values)
    if violation <= 1e-12:
        raise CutGenerationFailure(
            f"hour {t} contingency {cid}: cut violation {violation:.3e}")
    # put the cut on the MW scale of the screening margin so its violation
    # stays meaningfully above the acceptance tolerance
    factor = min(margin / violation, 1e6)
    if factor > 1.0:
        cut = LinearCut.of(cut.ids, factor * cut.coefs, factor * cut.rhs,
                           origin=cut.origin, label=cut.label)
    return cut


def solve_benders(case: SccucCase, config: SolverConfig | None = None, *,
                  gamma_on_base_matrix: bool = False,
                  options: BuildOptions | None = None,
                  scan: str = "all") -> tuple[Solution, AlgorithmReport]:
    """Contingency flow cones replaced by dual-certificate feasibility cuts.

    The master carries every contingency's linear block but none of its
    flow cones; each incumbent is screened per (hour, contingency) by two
    factorized solves, and only genuinely violated pairs pay for a conic
    subproblem, whose certificate becomes a single cut.  The outage flow
    sensitivity matrices are never formed.
    """
    if scan not in ("all", "first"):
        raise ValueError(f"scan policy {scan!r}")
    started = time.monotonic()
    base_options = options or BuildOptions()
    master = build_master(case, replace(
        base_options, include_contingency_blocks="all",
        register_contingency_socs=False))
    session = MilpSession(master, config)

    base_topo = _LfTopology(case, None)
    topos: dict[int, _LfTopology] = {}

    def topo_for(ctg: Contingency) -> _LfTopology:
        if ctg.is_generator:
            return base_topo
        if ctg.id not in topos:
            topos[ctg.id] = _LfTopology(case, ctg)
        return topos[ctg.id]

    deterministic = master.options.deterministic
    quantile = gaussian_quantile(case.risk.eps_line_ctg)
    log: list[CutRecord] = []
    trace: list[float] = []
    rounds = [0]
    subsolves = [0]

    def on_incumbent(sol: Solution) -> list[LinearCut]:
        rounds[0] += 1
        if sol.status == "optimal":
            trace.append(sol.objective)
        cuts = _group_cuts(master, sol.values, rounds[0], log, scan)
        if scan == "first" and cuts:
            return cuts
        for t in range(case.horizon):
            for ctg in case.contingencies:
                cid = ctg.id
                topo = topo_for(ctg)
                gtopo = base_topo if (gamma_on_base_matrix and ctg.is_line) \
                    else topo
                sigmas = (np.zeros(case.wind_model.n_farms) if deterministic
                          else case.wind_model.stdev[:, t])
                total = sol.p[:, t] + sol.delta_for(cid)[:, t]
                alpha = sol.alpha_for(cid)[:, t]
                subsolves[0] += 1
                _, _, hi, lo = _lf_point(case, topo, gtopo, t, total, alpha,
                                         sigmas, quantile)
                # threshold per line relative to capacity, floored at 1 MW
                cut_at = 1e-6 * np.maximum(1.0, topo.caps)
                if not (np.any(hi > cut_at) or np.any(lo > cut_at)):
                    continue
                worst = max(float(hi.max(initial=-np.inf)),
                            float(lo.max(initial=-np.inf)))
                cut = _certify(case, t, cid, sol, master=master, topo=topo,
                               base_topo=base_topo, sigmas=sigmas,
                               gamma_on_base_matrix=gamma_on_base_matrix,
                               margin=worst)
                if cut is None:
                    continue
                cuts.append(cut)
                log.append(CutRecord(rounds[0], cut.origin, t, cid, worst))
                if scan == "first":
                    return cuts
        return cuts

    sol = session.solve_with_callback(on_incumbent)
    sol.costs = evaluate_cost(case, sol)
    report = AlgorithmReport(
        algorithm="benders", objective=sol.objective, gap=sol.gap,
        iterations=rounds[0],
        cuts_by_origin=dict(Counter(c.origin for c in session.cuts)),
        blocks_added=(), subproblem_solves=subsolves[0],
        wall_time_s=time.monotonic() - started,
        master_rows=master.n_rows + len(session.cuts),
        cut_log=log, objective_trace=trace,
    )
    return sol, report


def lf_audit(case: SccucCase, solution: Solution, *,
             gamma_on_base_matrix: bool = False, deterministic: bool = False,
             tol: float = 1e-5) -> list[tuple[int, int, float]]:
    """Worst outage-flow margin per (hour, contingency); empty means clean.

    Checks the same angle-space systems the cut loop screens, at the
    solution's recorded recourse, so it applies to any algorithm's output.
    tol is relative to each line's capacity (floored at 1 MW).  The default
    sits above the MILP engine's integral feasibility tolerance: a finding
    indicates a genuinely missing cut, not solver dust on satisfied rows.
    """
    base_topo = _LfTopology(case, None)
    topos: dict[int, _LfTopology] = {}
    quantile = gaussian_quantile(case.risk.eps_line_ctg)
    bad: list[tuple[int, int, float]] = []
    for t in range(case.horizon):
        sigmas = (np.zeros(case.wind_model.n_farms) if deterministic
                  else case.wind_model.stdev[:, t])
        for ctg in case.contingencies:
            if ctg.is_generator:
                topo = base_topo
            else:
                topo = topos.setdefault(ctg.id, _LfTopology(case, ctg))
            gtopo = base_topo if (gamma_on_base_matrix and ctg.is_line) \
                else topo
            total = solution.p[:, t] + solution.delta_for(ctg.id)[:, t]
            alpha = solution.alpha_for(ctg.id)[:, t]
            _, _, hi, lo = _lf_point(case, topo, gtopo, t, total, alpha,
                                     sigmas, quantile)
            cut_at = tol * np.maximum(1.0, topo.caps)
            if np.any(hi > cut_at) or np.any(lo > cut_at):
                worst = max(float(hi.max(initial=-np.inf)),
                            float(lo.max(initial=-np.inf)))
                bad.append((t, ctg.id, worst))
    return bad


SOLVERS = {"oa": solve_oa, "sbd": solve_sbd, "benders": solve_benders}
