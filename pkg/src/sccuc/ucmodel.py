"""Master mixed-integer model for reserve-aware unit commitment.

Builds the hour-by-hour commitment model: commitment logic, dispatch and
reserve limits, piecewise production costs, start-up cost blocks, minimum
up/down times, ramping, system balance, participation factors, and the
linear reformulations of the reserve chance constraints.  Transmission
chance constraints are second-order-cone shaped and are *not* written as
rows; they are registered as deferred groups keyed by (hour,) for the base
network and (hour, contingency) for outages, to be enforced lazily by the
solve drivers.

Generator-outage contingencies get their own participation/redispatch
variables.  Line outages reuse the base-case participation (the response
policy of the fleet does not change when a line drops), so they contribute
deferred flow groups and tightened reserve rows but no new columns.
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .netmodel import (
    GENERATOR_OUTAGE,
    LINE_OUTAGE,
    Contingency,
    SccucCase,
    build_flowmap,
)
from .stochastic import (
    AffineExpr,
    SocConstraint,
    gaussian_quantile,
    reformulate_reserve_cc,
    total_deviation_stdev,
)


class ModelSizeError(Exception):
    """Requested model exceeds the configured variable cap."""


class MismatchError(Exception):
    """Recomputed cost disagrees with the solver objective."""


# -- low-level stores --------------------------------------------------------------


class _VarTable:
    """Append-only variable pool: bounds, integrality, objective, names."""

    def __init__(self):
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.obj: list[float] = []
        self._starts: list[int] = []
        self._labels: list[tuple[str, tuple[int, ...]]] = []

    def add(self, label: str, shape: tuple[int, ...], lb=0.0, ub=np.inf,
            integer: bool = False, obj=0.0) -> np.ndarray:
        count = int(np.prod(shape))
        start = len(self.lb)

        def flat(v):
            return np.broadcast_to(np.asarray(v, dtype=float), shape).ravel()

        self.lb.extend(flat(lb).tolist())
        self.ub.extend(flat(ub).tolist())
        self.obj.extend(flat(obj).tolist())
        self.integer.extend([integer] * count)
        self._starts.append(start)
        self._labels.append((label, shape))
        return np.arange(start, start + count).reshape(shape)

    def set_bounds(self, vid: int, lb: float | None = None, ub: float | None = None):
        if lb is not None:
            self.lb[vid] = float(lb)
        if ub is not None:
            self.ub[vid] = float(ub)

    def __len__(self) -> int:
        return len(self.lb)

    def name(self, vid: int) -> str:
        k = bisect.bisect_right(self._starts, vid) - 1
        label, shape = self._labels[k]
        idx = np.unravel_index(vid - self._starts[k], shape)
        return f"{label}[{','.join(str(i) for i in idx)}]"

    def arrays(self):
        return (
            np.asarray(self.obj, dtype=float),
            np.asarray(self.integer, dtype=np.int64),
            np.asarray(self.lb, dtype=float),
            np.asarray(self.ub, dtype=float),
        )


class _RowTable:
    """Sparse row accumulator with two-sided bounds, batched for speed."""

    def __init__(self):
        self._ids: list[np.ndarray] = []
        self._coefs: list[np.ndarray] = []
        self._lens: list[np.ndarray] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self.n_rows = 0
        self.family_counts: Counter[str] = Counter()

    def add(self, ids, coefs, lb=-np.inf, ub=np.inf, family: str = "row"):
        self.add_batch([np.asarray(ids).ravel()], [np.asarray(coefs, float).ravel()],
                       [lb], [ub], family=family)

    def add_batch(self, ids_list: Sequence, coefs_list: Sequence,
                  lb_list, ub_list, family: str = "row"):
        ids = [np.asarray(a, dtype=np.int64).ravel() for a in ids_list]
        if not ids:
            return
        self._ids.append(np.concatenate(ids))
        self._coefs.append(np.concatenate(
            [np.asarray(c, dtype=float).ravel() for c in coefs_list]))
        self._lens.append(np.array([len(a) for a in ids], dtype=np.int64))
        self._lb.append(np.asarray(lb_list, dtype=float).ravel())
        self._ub.append(np.asarray(ub_list, dtype=float).ravel())
        self.n_rows += len(ids)
        self.family_counts[family] += len(ids)

    def to_arrays(self, n_cols: int):
        if self.n_rows == 0:
            mat = sp.csr_matrix((0, n_cols))
            return mat, np.empty(0), np.empty(0)
        lens = np.concatenate(self._lens)
        indptr = np.concatenate([[0], np.cumsum(lens)])
        mat = sp.csr_matrix(
            (np.concatenate(self._coefs), np.concatenate(self._ids), indptr),
            shape=(self.n_rows, n_cols),
        )
        return mat, np.concatenate(self._lb), np.concatenate(self._ub)


# -- deferred transmission chance constraints ---------------------------------------


@dataclass(eq=False)
class FlowCtx:
    """Flow sensitivities for one network topology (base or one outage)."""

    ctg_id: int | None
    fgen: np.ndarray       # (L_kept, G) flow response to generator injections
    fwind: np.ndarray      # (L_kept, W) flow response to wind-bus injections
    base_flow: np.ndarray  # (L_kept, T) flow from mean wind minus demand
    caps: np.ndarray       # (L_kept,)
    lines: np.ndarray      # indices of surviving monitored lines


def _build_flow_ctx(case: SccucCase, ctg: Contingency | None) -> FlowCtx:
    fmap = build_flowmap(case, ctg)
    keep = np.arange(case.n_lines)
    if ctg is not None and ctg.kind == LINE_OUTAGE:
        keep = keep[keep != ctg.index]  # the dropped line has no limit to enforce
    m = fmap.matrix[keep]
    caps = np.array([case.lines[k].capacity for k in keep], dtype=float)
    return FlowCtx(
        ctg_id=None if ctg is None else ctg.id,
        fgen=np.ascontiguousarray(m[:, case.gen_bus]),
        fwind=np.ascontiguousarray(m[:, case.wind_bus]),
        base_flow=m @ (case.wind_injection - case.demand),
        caps=caps,
        lines=keep,
    )


@dataclass(eq=False)
class SocGroup:
    """All line chance constraints of one (hour, topology) pair.

    Each surviving line contributes two cone constraints (upper and lower
    flow tail).  The group checks candidate points vectorized and only
    builds the symbolic constraint for violated rows.
    """

    key: tuple
    t: int
    quantile: float
    sigmas: np.ndarray        # (W,) farm deviations at this hour
    ctx: FlowCtx
    p_ids: np.ndarray         # (G,)
    alpha_ids: np.ndarray     # (G,)
    delta_ids: np.ndarray | None  # (G,) for generator outages, else None

    def margins(self, values: np.ndarray):
        """(upper violation, lower violation) per line, positive = violated."""
        total = values[self.p_ids]
        if self.delta_ids is not None:
            total = total + values[self.delta_ids]
        alpha = values[self.alpha_ids]
        nominal = self.ctx.fgen @ total + self.ctx.base_flow[:, self.t]
        spread = self.ctx.fwind - (self.ctx.fgen @ alpha)[:, None]
        width = self.quantile * np.linalg.norm(spread * self.sigmas[None, :], axis=1)
        return nominal + width - self.ctx.caps, width - nominal - self.ctx.caps

    def violations(self, values: np.ndarray, tol: float = 1e-6):
        """[(line position, direction, amount)] sorted worst first.

        tol is relative to each line's capacity (floored at 1 MW), so a
        heavy corridor is not separated over sub-milliwatt noise.
        """
        hi, lo = self.margins(values)
        cut_at = tol * np.maximum(1.0, self.ctx.caps)
        out = [(int(k), +1, float(hi[k])) for k in np.flatnonzero(hi > cut_at)]
        out += [(int(k), -1, float(lo[k])) for k in np.flatnonzero(lo > cut_at)]
        out.sort(key=lambda r: -r[2])
        return out

    def constraint(self, k: int, direction: int) -> SocConstraint:
        """Symbolic cone for line position k; direction +1 caps the upper tail."""
        row = self.ctx.fgen[k]
        if self.delta_ids is not None:
            slack_ids = np.concatenate([self.p_ids, self.delta_ids])
            slack_coefs = np.concatenate([row, row])
        else:
            slack_ids = self.p_ids
            slack_coefs = row
        cap = float(self.ctx.caps[k])
        base = float(self.ctx.base_flow[k, self.t])
        if direction > 0:
            slack = AffineExpr.of(slack_ids, -slack_coefs, cap - base)
        else:
            slack = AffineExpr.of(slack_ids, slack_coefs, cap + base)
        vec = tuple(
            AffineExpr.of(self.alpha_ids, -float(s) * row,
                          float(s) * float(self.ctx.fwind[k, w]))
            for w, s in enumerate(self.sigmas)
            if s > 0.0
        )
        tag = "base" if self.key[1] is None else f"ctg{self.key[1]}"
        side = "hi" if direction > 0 else "lo"
        return SocConstraint(
            rhs_slack=slack, vector=vec, quantile=self.quantile,
            label=f"flow-cc[line{self.ctx.lines[k]},t{self.t},{tag},{side}]",
        )

    def all_constraints(self):
        for k in range(len(self.ctx.lines)):
            yield self.constraint(k, +1)
            yield self.constraint(k, -1)


# -- build options -------------------------------------------------------------------


@dataclass(frozen=True)
class BuildOptions:
    """Knobs for what goes into the master at construction time.

    include_contingency_blocks: "all", "none", or an iterable of contingency
    ids whose blocks (columns, rows, deferred flow groups) are materialized
    up front; the rest can be added later with add_contingency_block.
    register_contingency_socs=False keeps contingency flow groups out of the
    deferred registry entirely (their feasibility is then someone else's
    job, e.g. a dual-cut loop that never forms outage flow matrices).
    """

    include_contingency_blocks: object = "all"
    register_contingency_socs: bool = True
    reserve_floor: float | None = None
    deterministic: bool = False
    max_variables: int = 2_000_000

    def __post_init__(self):
        inc = self.include_contingency_blocks
        if isinstance(inc, str):
            if inc not in ("all", "none"):
                raise ValueError(f"include_contingency_blocks: {inc!r}")
        else:
            object.__setattr__(self, "include_contingency_blocks",
                               frozenset(int(i) for i in inc))
        if self.reserve_floor is not None and not 0 <= self.reserve_floor < 1:
            raise ValueError("reserve_floor must lie in [0, 1)")

    def resolved_blocks(self, case: SccucCase) -> frozenset:
        inc = self.include_contingency_blocks
        if inc == "all":
            return frozenset(c.id for c in case.contingencies)
        if inc == "none":
            return frozenset()
        bad = set(inc) - {c.id for c in case.contingencies}
        if bad:
            raise ValueError(f"unknown contingency ids in options: {sorted(bad)}")
        return inc


# -- master model --------------------------------------------------------------------


@dataclass(eq=False)
class MasterModel:
    case: SccucCase
    options: BuildOptions
    vars: _VarTable
    rows: _RowTable
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: tuple[np.ndarray, ...]
    p: np.ndarray
    rplus: np.ndarray
    rminus: np.ndarray
    rup: np.ndarray
    g: tuple[np.ndarray, ...]
    sc: np.ndarray
    alpha: np.ndarray
    alpha_ctg: dict[int, np.ndarray] = field(default_factory=dict)
    delta_ctg: dict[int, np.ndarray] = field(default_factory=dict)
    soc_groups: dict[tuple, SocGroup] = field(default_factory=dict)
    included_blocks: set[int] = field(default_factory=set)
    _flow_ctx: dict = field(default_factory=dict)
    _alias_reserve_rows: bool = False

    @property
    def n_variables(self) -> int:
        return len(self.vars)

    @property
    def n_binaries(self) -> int:
        return sum(self.vars.integer)

    @property
    def n_rows(self) -> int:
        return self.rows.n_rows

    def variable_name(self, vid: int) -> str:
        return self.vars.name(vid)

    def lp_arrays(self):
        """(objective, integrality, var lb, var ub, A, row lb, row ub)."""
        c, integrality, lb, ub = self.vars.arrays()
        mat, rlb, rub = self.rows.to_arrays(len(self.vars))
        return c, integrality, lb, ub, mat, rlb, rub

    # deferred flow groups ------------------------------------------------

    def soc_keys(self) -> list[tuple]:
        return sorted(self.soc_groups, key=lambda k: (k[0], -1 if k[1] is None else k[1]))

    def flow_ctx(self, cid: int | None) -> FlowCtx:
        if cid not in self._flow_ctx:
            ctg = None if cid is None else self.case.contingencies[cid]
            self._flow_ctx[cid] = _build_flow_ctx(self.case, ctg)
        return self._flow_ctx[cid]

    def make_group(self, t: int, cid: int | None) -> SocGroup:
        """Build the flow group for (t, cid) without registering it."""
        case = self.case
        sig = (np.zeros(case.wind_model.n_farms) if self.options.deterministic
               else case.wind_model.stdev[:, t].copy())
        if cid is None:
            eps = case.risk.eps_line
            alpha_ids, delta_ids = self.alpha[:, t], None
        else:
            ctg = case.contingencies[cid]
            eps = case.risk.eps_line_ctg
            if ctg.kind == GENERATOR_OUTAGE:
                alpha_ids = self.alpha_ctg[cid][:, t]
                delta_ids = self.delta_ctg[cid][:, t]
            else:
                alpha_ids, delta_ids = self.alpha[:, t], None
        return SocGroup(
            key=(t, cid), t=t, quantile=gaussian_quantile(eps), sigmas=sig,
            ctx=self.flow_ctx(cid), p_ids=self.p[:, t],
            alpha_ids=alpha_ids, delta_ids=delta_ids,
        )

    def _register_group(self, t: int, cid: int | None):
        key = (t, cid)
        if key in self.soc_groups:
            raise ValueError(f"flow group {key} registered twice")
        self.soc_groups[key] = self.make_group(t, cid)

    # contingency blocks --------------------------------------------------

    def has_block(self, cid: int) -> bool:
        return cid in self.included_blocks

    def add_contingency_block(self, cid: int):
        """Materialize the columns/rows/groups of one deferred contingency."""
        if cid in self.included_blocks:
            raise ValueError(f"contingency {cid} already materialized")
        ctg = self.case.contingencies[cid]
        if ctg.kind == GENERATOR_OUTAGE:
            _add_gen_outage_columns(self, cid)
            for t in range(self.case.horizon):
                _add_gen_outage_rows(self, cid, t)
        else:
            _ensure_line_alias_rows(self)
        if len(self.vars) > self.options.max_variables:
            raise ModelSizeError(
                f"{len(self.vars)} variables exceed cap {self.options.max_variables}")
        if self.options.register_contingency_socs:
            for t in range(self.case.horizon):
                self._register_group(t, cid)
        self.included_blocks.add(cid)

    def alpha_ids_of(self, cid: int) -> np.ndarray:
        """Participation columns answering contingency cid (alias for lines)."""
        return self.alpha_ctg.get(cid, self.alpha)

    def delta_ids_of(self, cid: int) -> np.ndarray | None:
        return self.delta_ctg.get(cid)


def _add_gen_outage_columns(m: MasterModel, cid: int):
    case, vt = m.case, m.vars
    G, T = case.n_gens, case.horizon
    ctg = case.contingencies[cid]
    pmax = np.array([g.p_max for g in case.generators])
    a_ub = np.ones((G, T))
    a_ub[ctg.index] = 0.0          # the lost unit cannot answer its own outage
    for i in case.gens_at_reference:
        a_ub[i] = 0.0
    d_lb = np.zeros((G, T))
    d_ub = np.repeat(pmax[:, None], T, axis=1)
    d_lb[ctg.index] = -pmax[ctg.index]
    d_ub[ctg.index] = 0.0
    m.alpha_ctg[cid] = vt.add(f"alpha^{ctg.name}", (G, T), lb=0.0, ub=a_ub)
    m.delta_ctg[cid] = vt.add(f"delta^{ctg.name}", (G, T), lb=d_lb, ub=d_ub)


def _add_gen_outage_rows(m: MasterModel, cid: int, t: int):
    case = m.case
    G = case.n_gens
    c = case.contingencies[cid].index
    ac, dc = m.alpha_ctg[cid][:, t], m.delta_ctg[cid][:, t]
    rows = m.rows
    rows.add(ac, np.ones(G), lb=1.0, ub=1.0, family="ctg-participation-sum")
    rows.add_batch(
        [np.array([ac[i], m.x[i, t]]) for i in range(G)],
        [np.array([1.0, -1.0])] * G,
        [-np.inf] * G, [0.0] * G, family="ctg-participation-bound",
    )
    rows.add(dc, np.ones(G), lb=0.0, ub=0.0, family="redispatch-balance")
    rows.add(np.array([dc[c], m.p[c, t]]), np.array([1.0, 1.0]),
             lb=0.0, ub=0.0, family="redispatch-pin")
    rows.add_batch(
        [np.array([dc[i], m.rup[i, t]]) for i in range(G)],
        [np.array([1.0, -1.0])] * G,
        [-np.inf] * G, [0.0] * G, family="redispatch-cap",
    )
    if not m.options.deterministic:
        sigma = total_deviation_stdev(case.wind_model, t)
        if sigma > 0:
            for i in range(G):
                for r_ids in (m.rminus, m.rplus):
                    cut = reformulate_reserve_cc(
                        int(ac[i]), int(r_ids[i, t]), sigma,
                        case.risk.eps_gen_ctg, label=f"reserve-cc-ctg[{i},{t}]")
                    rows.add(cut.ids, cut.coefs, ub=cut.rhs,
                             family="reserve-cc-outage")


def _ensure_line_alias_rows(m: MasterModel):
    """Reserve rows at the tighter outage risk level, shared by all line drops.

    A line outage keeps the base participation, so its reserve chance rows
    only differ from the base ones through the quantile.  One set of rows
    serves every line contingency.
    """
    if m._alias_reserve_rows or m.options.deterministic:
        m._alias_reserve_rows = True
        return
    case = m.case
    for t in range(case.horizon):
        sigma = total_deviation_stdev(case.wind_model, t)
        if sigma <= 0:
            continue
        for i in range(case.n_gens):
            for r_ids in (m.rminus, m.rplus):
                cut = reformulate_reserve_cc(
                    int(m.alpha[i, t]), int(r_ids[i, t]), sigma,
                    case.risk.eps_gen_ctg, label=f"reserve-cc-line[{i},{t}]")
                m.rows.add(cut.ids, cut.coefs, ub=cut.rhs,
                           family="reserve-cc-line-outage")
    m._alias_reserve_rows = True


def build_master(case: SccucCase, options: BuildOptions | None = None) -> MasterModel:
    """Assemble the commitment model per the build options."""
    options = options or BuildOptions()
    included = options.resolved_blocks(case)
    G, T = case.n_gens, case.horizon
    gens = case.generators
    n_start = sum(len(g.startup_blocks) for g in gens)
    n_blocks = sum(len(g.cost_blocks) for g in gens)
    inc_gen = [cid for cid in sorted(included)
               if case.contingencies[cid].kind == GENERATOR_OUTAGE]
    planned = T * (9 * G + n_start + n_blocks) + 2 * G * T * len(inc_gen)
    if planned > options.max_variables:
        raise ModelSizeError(f"{planned} variables exceed cap {options.max_variables}")

    vt = _VarTable()
    pmax = np.array([g.p_max for g in gens])
    pmin = np.array([g.p_min for g in gens])
    rcap = pmax.copy()
    if case.reserve_cap is not None:
        rcap = np.minimum(rcap, case.reserve_cap)
    a0 = np.array([g.no_load_cost for g in gens])
    a1 = np.array([g.reserve_cost for g in gens])
    a2 = np.array([g.tertiary_cost for g in gens])

    x = vt.add("x", (G, T), 0.0, 1.0, integer=True,
               obj=np.repeat(a0[:, None], T, axis=1))
    y = vt.add("y", (G, T), 0.0, 1.0, integer=True)
    z = vt.add("z", (G, T), 0.0, 1.0, integer=True)
    w = tuple(
        vt.add(f"w:{g.name}", (len(g.startup_blocks), T), 0.0, 1.0, integer=True)
        for g in gens
    )
    p = vt.add("p", (G, T), 0.0, np.repeat(pmax[:, None], T, axis=1))
    rplus = vt.add("r+", (G, T), 0.0, np.repeat(rcap[:, None], T, axis=1),
                   obj=np.repeat(a1[:, None], T, axis=1))
    rminus = vt.add("r-", (G, T), 0.0, np.repeat(rcap[:, None], T, axis=1),
                    obj=np.repeat(a1[:, None], T, axis=1))
    rup = vt.add("r^up", (G, T), 0.0, np.repeat(rcap[:, None], T, axis=1),
                 obj=np.repeat(a2[:, None], T, axis=1))
    g_ids = tuple(
        vt.add(f"g:{g.name}", (len(g.cost_blocks), T), 0.0,
               np.repeat(np.array([wd for _, wd in g.cost_blocks])[:, None], T, axis=1),
               obj=np.repeat(np.array([c for c, _ in g.cost_blocks])[:, None], T, axis=1))
        for g in gens
    )
    sc = vt.add("sc", (G, T), 0.0, np.inf, obj=1.0)
    alpha_ub = np.ones((G, T))
    for i in case.gens_at_reference:
        alpha_ub[i] = 0.0          # reference-bus units carry no deviation
    alpha = vt.add("alpha", (G, T), 0.0, alpha_ub)

    # forced initial status becomes fixed bounds on x
    for i, gen in enumerate(gens):
        fixed = 1.0 if gen.init_on else 0.0
        for t in range(min(gen.forced_on_hours + gen.forced_off_hours, T)):
            vt.set_bounds(int(x[i, t]), lb=fixed, ub=fixed)

    model = MasterModel(
        case=case, options=options, vars=vt, rows=_RowTable(),
        x=x, y=y, z=z, w=w, p=p, rplus=rplus, rminus=rminus, rup=rup,
        g=g_ids, sc=sc, alpha=alpha,
    )
    for cid in inc_gen:
        _add_gen_outage_columns(model, cid)

    rows = model.rows
    ones = np.ones(G)
    sigma_by_t = np.array([total_deviation_stdev(case.wind_model, t)
                           for t in range(T)])
    demand_t = case.demand.sum(axis=0)
    wind_t = case.wind_injection.sum(axis=0)

    for t in range(T):
        # on/off transitions tie x to start-up and shut-down indicators
        if t == 0:
            rows.add_batch(
                [np.array([y[i, t], z[i, t], x[i, t]]) for i in range(G)],
                [np.array([1.0, -1.0, -1.0])] * G,
                [-float(gens[i].init_on) for i in range(G)],
                [-float(gens[i].init_on) for i in range(G)],
                family="logic-link",
            )
        else:
            rows.add_batch(
                [np.array([y[i, t], z[i, t], x[i, t], x[i, t - 1]])
                 for i in range(G)],
                [np.array([1.0, -1.0, -1.0, 1.0])] * G,
                [0.0] * G, [0.0] * G, family="logic-link",
            )
        rows.add_batch(
            [np.array([y[i, t], z[i, t]]) for i in range(G)],
            [np.array([1.0, 1.0])] * G,
            [-np.inf] * G, [1.0] * G, family="logic-exclusion",
        )
        rows.add_batch(
            [np.array([p[i, t], x[i, t]]) for i in range(G)],
            [np.array([1.0, -pmin[i]]) for i in range(G)],
            [0.0] * G, [np.inf] * G, family="dispatch-low",
        )
        rows.add_batch(
            [np.array([p[i, t], x[i, t]]) for i in range(G)],
            [np.array([1.0, -pmax[i]]) for i in range(G)],
            [-np.inf] * G, [0.0] * G, family="dispatch-high",
        )
        for r_ids, fam in ((rplus, "reserve-cap-up"), (rminus, "reserve-cap-down"),
                           (rup, "reserve-cap-tertiary")):
            rows.add_batch(
                [np.array([r_ids[i, t], x[i, t]]) for i in range(G)],
                [np.array([1.0, -rcap[i]]) for i in range(G)],
                [-np.inf] * G, [0.0] * G, family=fam,
            )
        # pooled tertiary reserve covers the largest committed injection
        rows.add_batch(
            [np.concatenate([rup[:, t], [p[i, t]]]) for i in range(G)],
            [np.concatenate([ones, [-1.0]]) for _ in range(G)],
            [0.0] * G, [np.inf] * G, family="tertiary-cover",
        )
        rows.add_batch(
            [np.array([p[i, t], rminus[i, t], x[i, t]]) for i in range(G)],
            [np.array([1.0, -1.0, -pmin[i]]) for i in range(G)],
            [0.0] * G, [np.inf] * G, family="headroom-low",
        )
        rows.add_batch(
            [np.array([p[i, t], rplus[i, t], rup[i, t], x[i, t]]) for i in range(G)],
            [np.array([1.0, 1.0, 1.0, -pmax[i]]) for i in range(G)],
            [-np.inf] * G, [0.0] * G, family="headroom-high",
        )
        if not options.deterministic and sigma_by_t[t] > 0:
            for i in range(G):
                for r_ids in (rminus, rplus):
                    cut = reformulate_reserve_cc(
                        int(alpha[i, t]), int(r_ids[i, t]), sigma_by_t[t],
                        case.risk.eps_gen, label=f"reserve-cc[{i},{t}]")
                    rows.add(cut.ids, cut.coefs, ub=cut.rhs, family="reserve-cc")
        rows.add_batch(
            [np.array([alpha[i, t], x[i, t]]) for i in range(G)],
            [np.array([1.0, -1.0])] * G,
            [-np.inf] * G, [0.0] * G, family="participation-bound",
        )
        rows.add(alpha[:, t], ones, lb=1.0, ub=1.0, family="participation-sum")
        rows.add_batch(
            [np.concatenate([[p[i, t]], g_ids[i][:, t]]) for i in range(G)],
            [np.concatenate([[1.0], -np.ones(len(gens[i].cost_blocks))])
             for i in range(G)],
            [0.0] * G, [0.0] * G, family="production-sum",
        )
        blk_ids, blk_coefs = [], []
        for i, gen in enumerate(gens):
            for k in range(len(gen.cost_blocks)):
                blk_ids.append(np.array([g_ids[i][k, t], x[i, t]]))
                blk_coefs.append(np.array([1.0, -gen.cost_blocks[k][1]]))
        rows.add_batch(blk_ids, blk_coefs, [-np.inf] * len(blk_ids),
                       [0.0] * len(blk_ids), family="production-block")
        for i, gen in enumerate(gens):
            s_count = len(gen.startup_blocks)
            if s_count == 0:
                vt.set_bounds(int(sc[i, t]), ub=0.0)
                continue
            rows.add(np.concatenate([w[i][:, t], [y[i, t]]]),
                     np.concatenate([np.ones(s_count), [-1.0]]),
                     lb=0.0, ub=0.0, family="startup-choice")
            for s, (cost, lo, hi) in enumerate(gen.startup_blocks):
                lags = range(lo, (t if hi is None else min(hi, t)) + 1)
                zids = [z[i, t - lag] for lag in lags]
                init_off = t + gen.init_down_hours  # virtual shut-down before hour 0
                const = float(
                    gen.init_down_hours > 0
                    and lo <= init_off
                    and (hi is None or init_off <= hi)
                )
                rows.add(np.concatenate([[w[i][s, t]], zids]),
                         np.concatenate([[1.0], -np.ones(len(zids))]),
                         ub=const, family="startup-window")
            rows.add(np.concatenate([[sc[i, t]], w[i][:, t]]),
                     np.concatenate([[1.0],
                                     [-c for c, _, _ in gen.startup_blocks]]),
                     lb=0.0, ub=0.0, family="startup-cost")
        for i, gen in enumerate(gens):
            lo_t = max(0, t - gen.min_up + 1)
            rows.add(np.concatenate([y[i, lo_t:t + 1], [x[i, t]]]),
                     np.concatenate([np.ones(t + 1 - lo_t), [-1.0]]),
                     ub=0.0, family="min-up")
            lo_t = max(0, t - gen.min_down + 1)
            rows.add(np.concatenate([z[i, lo_t:t + 1], [x[i, t]]]),
                     np.concatenate([np.ones(t + 1 - lo_t), [1.0]]),
                     ub=1.0, family="min-down")
        if t == 0:
            p0 = np.array([g.init_power if g.init_on else 0.0 for g in gens])
            rows.add_batch(
                [np.array([p[i, t]]) for i in range(G)],
                [np.array([1.0])] * G,
                [p0[i] - gens[i].ramp_down for i in range(G)],
                [p0[i] + gens[i].ramp_up for i in range(G)],
                family="ramp",
            )
        else:
            rows.add_batch(
                [np.array([p[i, t], p[i, t - 1]]) for i in range(G)],
                [np.array([1.0, -1.0])] * G,
                [-gens[i].ramp_down for i in range(G)],
                [gens[i].ramp_up for i in range(G)],
                family="ramp",
            )
        rows.add(p[:, t], ones, lb=demand_t[t] - wind_t[t],
                 ub=demand_t[t] - wind_t[t], family="balance")
        if options.reserve_floor:
            rows.add(np.concatenate([rplus[:, t], rminus[:, t]]),
                     np.ones(2 * G),
                     lb=2.0 * options.reserve_floor * demand_t[t],
                     family="reserve-floor")
        for cid in inc_gen:
            _add_gen_outage_rows(model, cid, t)

    if any(case.contingencies[cid].kind == LINE_OUTAGE for cid in included):
        _ensure_line_alias_rows(model)

    for t in range(T):
        model._register_group(t, None)
    if options.register_contingency_socs:
        for t in range(T):
            for cid in sorted(included):
                model._register_group(t, cid)
    model.included_blocks = set(included)

    if len(vt) > options.max_variables:
        raise ModelSizeError(
            f"{len(vt)} variables exceed cap {options.max_variables}")
    return model


# -- solutions and cost accounting ----------------------------------------------------


@dataclass(frozen=True)
class CostBreakdown:
    no_load: float
    production: float
    startup: float
    generation_reserve: float
    tertiary_reserve: float

    @property
    def total(self) -> float:
        return (self.no_load + self.production + self.startup
                + self.generation_reserve + self.tertiary_reserve)

    def as_dict(self) -> dict:
        return {
            "no_load": self.no_load,
            "production": self.production,
            "startup": self.startup,
            "generation_reserve": self.generation_reserve,
            "tertiary_reserve": self.tertiary_reserve,
            "total": self.total,
        }


@dataclass(eq=False)
class Solution:
    """Values of every master variable plus solver metadata."""

    case_name: str
    status: str
    objective: float
    gap: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: tuple[np.ndarray, ...]
    p: np.ndarray
    rplus: np.ndarray
    rminus: np.ndarray
    rup: np.ndarray
    g: tuple[np.ndarray, ...]
    sc: np.ndarray
    alpha: np.ndarray
    alpha_ctg: dict[int, np.ndarray] = field(default_factory=dict)
    delta_ctg: dict[int, np.ndarray] = field(default_factory=dict)
    costs: CostBreakdown | None = None
    values: np.ndarray | None = None

    @classmethod
    def from_values(cls, master: MasterModel, values: np.ndarray,
                    objective: float, status: str, gap: float) -> "Solution":
        v = np.asarray(values, dtype=float)
        return cls(
            case_name=master.case.name, status=status,
            objective=float(objective), gap=float(gap),
            x=v[master.x], y=v[master.y], z=v[master.z],
            w=tuple(v[ids] for ids in master.w),
            p=v[master.p], rplus=v[master.rplus], rminus=v[master.rminus],
            rup=v[master.rup], g=tuple(v[ids] for ids in master.g),
            sc=v[master.sc], alpha=v[master.alpha],
            alpha_ctg={cid: v[ids] for cid, ids in master.alpha_ctg.items()},
            delta_ctg={cid: v[ids] for cid, ids in master.delta_ctg.items()},
            values=v.copy(),
        )

    def alpha_for(self, cid: int) -> np.ndarray:
        """Participation answering contingency cid (base values for lines)."""
        return self.alpha_ctg.get(cid, self.alpha)

    def delta_for(self, cid: int) -> np.ndarray:
        got = self.delta_ctg.get(cid)
        return np.zeros_like(self.p) if got is None else got

    def to_payload(self, case: SccucCase) -> dict:
        gens = []
        for i, gen in enumerate(case.generators):
            hours = []
            for t in range(case.horizon):
                hours.append({
                    "hour": t + 1,
                    "x": round(float(self.x[i, t])),
                    "y": round(float(self.y[i, t])),
                    "z": round(float(self.z[i, t])),
                    "p": float(self.p[i, t]),
                    "alpha": float(self.alpha[i, t]),
                    "r_plus": float(self.rplus[i, t]),
                    "r_minus": float(self.rminus[i, t]),
                    "r_up": float(self.rup[i, t]),
                    "sc": float(self.sc[i, t]),
                    "g": [float(v) for v in self.g[i][:, t]],
                    "w": [round(float(v)) for v in self.w[i][:, t]],
                })
            gens.append({"name": gen.name, "hours": hours})
        ctgs = []
        for cid in sorted(self.alpha_ctg):
            ctg = case.contingencies[cid]
            ctgs.append({
                "id": cid, "name": ctg.name, "kind": ctg.kind,
                "alpha": self.alpha_ctg[cid].tolist(),
                "delta": self.delta_ctg[cid].tolist(),
            })
        return {
            "case": self.case_name,
            "status": self.status,
            "objective": self.objective,
            "gap": self.gap,
            "generators": gens,
            "contingencies": ctgs,
            "costs": None if self.costs is None else self.costs.as_dict(),
        }

    @classmethod
    def from_payload(cls, case: SccucCase, payload: dict) -> "Solution":
        G, T = case.n_gens, case.horizon
        by_name = {rec["name"]: rec for rec in payload["generators"]}
        shape = (G, T)
        arrays = {k: np.zeros(shape) for k in
                  ("x", "y", "z", "p", "alpha", "r_plus", "r_minus", "r_up", "sc")}
        w = tuple(np.zeros((len(gen.startup_blocks), T)) for gen in case.generators)
        g = tuple(np.zeros((len(gen.cost_blocks), T)) for gen in case.generators)
        for i, gen in enumerate(case.generators):
            rec = by_name[gen.name]
            for h in rec["hours"]:
                t = h["hour"] - 1
                for k in arrays:
                    arrays[k][i, t] = h[k]
                w[i][:, t] = h["w"]
                g[i][:, t] = h["g"]
        alpha_ctg, delta_ctg = {}, {}
        for rec in payload.get("contingencies", []):
            alpha_ctg[rec["id"]] = np.asarray(rec["alpha"], dtype=float)
            delta_ctg[rec["id"]] = np.asarray(rec["delta"], dtype=float)
        costs = payload.get("costs")
        return cls(
            case_name=payload["case"], status=payload["status"],
            objective=float(payload["objective"]), gap=float(payload["gap"]),
            x=arrays["x"], y=arrays["y"], z=arrays["z"], w=w,
            p=arrays["p"], rplus=arrays["r_plus"], rminus=arrays["r_minus"],
            rup=arrays["r_up"], g=g, sc=arrays["sc"], alpha=arrays["alpha"],
            alpha_ctg=alpha_ctg, delta_ctg=delta_ctg,
            costs=None if costs is None else CostBreakdown(
                no_load=costs["no_load"], production=costs["production"],
                startup=costs["startup"],
                generation_reserve=costs["generation_reserve"],
                tertiary_reserve=costs["tertiary_reserve"]),
        )


def evaluate_cost(case: SccucCase, solution: Solution) -> CostBreakdown:
    """Recompute the objective from first principles and cross-check it."""
    no_load = production = startup = 0.0
    for i, gen in enumerate(case.generators):
        no_load += gen.no_load_cost * float(solution.x[i].sum())
        for k, (cost, _) in enumerate(gen.cost_blocks):
            production += cost * float(solution.g[i][k].sum())
        for s, (cost, _, _) in enumerate(gen.startup_blocks):
            startup += cost * float(solution.w[i][s].sum())
    a1 = np.array([g.reserve_cost for g in case.generators])
    a2 = np.array([g.tertiary_cost for g in case.generators])
    gen_reserve = float((a1[:, None] * (solution.rplus + solution.rminus)).sum())
    tertiary = float((a2[:, None] * solution.rup).sum())
    breakdown = CostBreakdown(no_load, production, startup, gen_reserve, tertiary)
    scale = max(1.0, abs(solution.objective))
    if abs(breakdown.total - solution.objective) > 1e-3 * scale:
        raise MismatchError(
            f"recomputed {breakdown.total:.6f} vs solver {solution.objective:.6f}")
    return breakdown


# -- independent schedule audit --------------------------------------------------------


@dataclass(frozen=True)
class ConstraintViolation:
    family: str
    amount: float
    gen: str | None = None
    t: int | None = None
    ctg: str | None = None

    def __str__(self):
        where = [self.family]
        if self.gen is not None:
            where.append(self.gen)
        if self.t is not None:
            where.append(f"h{self.t + 1}")
        if self.ctg is not None:
            where.append(self.ctg)
        return f"{'/'.join(where)}: {self.amount:.6g}"


def validate_schedule(case: SccucCase, solution: Solution,
                      tol: float = 1e-6) -> list[ConstraintViolation]:
    """Audit every deterministic constraint of the model by direct arithmetic.

    Works on any Solution (solver output or hand-built); returns one record
    per violated (constraint family, generator, hour, contingency) tuple.
    """
    out: list[ConstraintViolation] = []
    gens = case.generators
    G, T = case.n_gens, case.horizon
    x, y, z = solution.x, solution.y, solution.z
    p, rp, rm, ru = solution.p, solution.rplus, solution.rminus, solution.rup
    alpha = solution.alpha
    pmin = np.array([g.p_min for g in gens])[:, None]
    pmax = np.array([g.p_max for g in gens])[:, None]
    rcap = pmax.copy()
    if case.reserve_cap is not None:
        rcap = np.minimum(rcap, case.reserve_cap)

    def emit(family: str, amount, i=None, t=None, ctg=None):
        out.append(ConstraintViolation(
            family=family, amount=float(amount),
            gen=None if i is None else gens[i].name,
            t=None if t is None else int(t),
            ctg=ctg))

    def scan(family: str, resid: np.ndarray, ctg: str | None = None):
        # resid > tol marks a violation; resid is (G, T)
        for i, t in zip(*np.nonzero(resid > tol)):
            emit(family, resid[i, t], i=int(i), t=int(t), ctg=ctg)

    x_prev = np.concatenate(
        [np.array([[float(g.init_on)] for g in gens]), x[:, :-1]], axis=1)
    scan("logic-link", np.abs(y - z - (x - x_prev)))
    scan("logic-exclusion", y + z - 1.0)
    scan("dispatch-low", pmin * x - p)
    scan("dispatch-high", p - pmax * x)
    scan("reserve-cap-up", rp - rcap * x)
    scan("reserve-cap-down", rm - rcap * x)
    scan("reserve-cap-tertiary", ru - rcap * x)
    scan("tertiary-cover", p - ru.sum(axis=0)[None, :])
    scan("headroom-low", pmin * x - (p - rm))
    scan("headroom-high", p + rp + ru - pmax * x)
    scan("participation-bound", alpha - x)
    scan("participation-low", -alpha)
    # dimensionless identities come back from the engine no tighter than its
    # integer-solution row feasibility tolerance (1e-6), so they share tol
    unit_tol = tol
    for i in case.gens_at_reference:
        for t in np.flatnonzero(np.abs(alpha[i]) > unit_tol):
            emit("participation-reference", abs(alpha[i, t]), i=i, t=int(t))
    for t in np.flatnonzero(np.abs(alpha.sum(axis=0) - 1.0) > unit_tol):
        emit("participation-sum", abs(alpha[:, t].sum() - 1.0), t=int(t))

    sigma_by_t = np.array([total_deviation_stdev(case.wind_model, t)
                           for t in range(T)])
    z_gen = gaussian_quantile(case.risk.eps_gen)
    z_ctg = gaussian_quantile(case.risk.eps_gen_ctg)
    need = z_gen * sigma_by_t[None, :] * alpha
    scan("reserve-cc", need - rm)
    scan("reserve-cc", need - rp)

    for i, gen in enumerate(gens):
        split = p[i] - solution.g[i].sum(axis=0)
        for t in np.flatnonzero(np.abs(split) > tol):
            emit("production-sum", abs(split[t]), i=i, t=int(t))
        widths = np.array([wd for _, wd in gen.cost_blocks])[:, None]
        over = solution.g[i] - widths * x[i][None, :]
        for k, t in zip(*np.nonzero(over > tol)):
            emit("production-block", over[k, t], i=i, t=int(t))
        if solution.g[i].min() < -tol:
            emit("production-block", -solution.g[i].min(), i=i)

        s_count = len(gen.startup_blocks)
        if s_count:
            pick = solution.w[i].sum(axis=0) - y[i]
            for t in np.flatnonzero(np.abs(pick) > tol):
                emit("startup-choice", abs(pick[t]), i=i, t=int(t))
            for t in range(T):
                for s, (cost, lo, hi) in enumerate(gen.startup_blocks):
                    lags = range(lo, (t if hi is None else min(hi, t)) + 1)
                    allowed = sum(z[i, t - lag] for lag in lags)
                    init_off = t + gen.init_down_hours
                    if (gen.init_down_hours > 0 and lo <= init_off
                            and (hi is None or init_off <= hi)):
                        allowed += 1.0
                    if solution.w[i][s, t] > allowed + tol:
                        emit("startup-window", solution.w[i][s, t] - allowed,
                             i=i, t=t)
            costs = np.array([c for c, _, _ in gen.startup_blocks])
            resid = solution.sc[i] - costs @ solution.w[i]
            for t in np.flatnonzero(np.abs(resid) > max(tol, 1e-9 * costs.max())):
                emit("startup-cost", abs(resid[t]), i=i, t=int(t))

        fixed = 1.0 if gen.init_on else 0.0
        span = min(gen.forced_on_hours + gen.forced_off_hours, T)
        for t in range(span):
            if abs(x[i, t] - fixed) > tol:
                emit("forced-status", abs(x[i, t] - fixed), i=i, t=t)

        for t in range(T):
            lo_t = max(0, t - gen.min_up + 1)
            resid = y[i, lo_t:t + 1].sum() - x[i, t]
            if resid > tol:
                emit("min-up", resid, i=i, t=t)
            lo_t = max(0, t - gen.min_down + 1)
            resid = z[i, lo_t:t + 1].sum() + x[i, t] - 1.0
            if resid > tol:
                emit("min-down", resid, i=i, t=t)

        p0 = gen.init_power if gen.init_on else 0.0
        prev = np.concatenate([[p0], p[i, :-1]])
        up = p[i] - prev - gen.ramp_up
        dn = prev - p[i] - gen.ramp_down
        for t in np.flatnonzero(up > tol):
            emit("ramp-up", up[t], i=i, t=int(t))
        for t in np.flatnonzero(dn > tol):
            emit("ramp-down", dn[t], i=i, t=int(t))

    demand_t = case.demand.sum(axis=0)
    wind_t = case.wind_injection.sum(axis=0)
    resid = np.abs(p.sum(axis=0) - (demand_t - wind_t))
    for t in np.flatnonzero(resid > 1e-6):
        emit("balance", resid[t], t=int(t))

    for ctg in case.generator_outages():
        cid, c = ctg.id, ctg.index
        ac = solution.alpha_ctg.get(cid)
        dc = solution.delta_ctg.get(cid)
        label = ctg.name
        if ac is None or dc is None:
            continue  # block never materialized; nothing stored to audit
        scan("ctg-participation-bound", ac - x, ctg=label)
        scan("ctg-participation-low", -ac, ctg=label)
        for t in np.flatnonzero(np.abs(ac.sum(axis=0) - 1.0) > unit_tol):
            emit("ctg-participation-sum", abs(ac[:, t].sum() - 1.0),
                 t=int(t), ctg=label)
        for t in np.flatnonzero(np.abs(ac[c]) > unit_tol):
            emit("outage-unit-response", abs(ac[c, t]), i=c, t=int(t), ctg=label)
        for i in case.gens_at_reference:
            for t in np.flatnonzero(np.abs(ac[i]) > unit_tol):
                emit("participation-reference", abs(ac[i, t]), i=i, t=int(t),
                     ctg=label)
        for t in np.flatnonzero(np.abs(dc.sum(axis=0)) > tol):
            emit("redispatch-balance", abs(dc[:, t].sum()), t=int(t), ctg=label)
        for t in np.flatnonzero(np.abs(dc[c] + p[c]) > tol):
            emit("redispatch-pin", abs(dc[c, t] + p[c, t]), i=c, t=int(t),
                 ctg=label)
        mask = np.ones(G, dtype=bool)
        mask[c] = False
        scan_arr = np.where(mask[:, None], dc - ru, -np.inf)
        scan("redispatch-cap", scan_arr, ctg=label)
        scan("redispatch-low", np.where(mask[:, None], -dc, -np.inf), ctg=label)
        need = z_ctg * sigma_by_t[None, :] * ac
        scan("reserve-cc-outage", need - rm, ctg=label)
        scan("reserve-cc-outage", need - rp, ctg=label)

    if case.line_outages():
        # one shared check: base participation must clear the outage risk level
        need = z_ctg * sigma_by_t[None, :] * alpha
        scan("reserve-cc-line-outage", need - rm)
        scan("reserve-cc-line-outage", need - rp)

    out.sort(key=lambda v: (v.family, -1 if v.t is None else v.t))
    return out
