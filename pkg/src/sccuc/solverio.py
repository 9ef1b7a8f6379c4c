"""Engine plumbing: lazy-cut MILP sessions and a conic feasibility oracle.

Two engines, two roles.  The mixed-integer master runs on HiGHS (through
scipy); lazy constraints are emulated by an iterated re-solve loop, with an
LP-relaxation strengthening pass before the first integer solve so that
most cuts are found cheaply at the root.  Conic feasibility subproblems run
on CVXOPT's cone LP solver through a phase-I minimum-violation program
whose duals yield Farkas-style infeasibility certificates.

Certificates are checked by contraction: the multiplier-weighted sum of the
subproblem constraints must cancel every variable and leave a strictly
positive constant, which no feasible point can satisfy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, milp

import cvxopt
import cvxopt.solvers

from .stochastic import LinearCut, SocConstraint, check_soc
from .ucmodel import MasterModel, Solution

cvxopt.solvers.options["show_progress"] = False


class Infeasible(Exception):
    pass


class Unbounded(Exception):
    pass


class TimeLimit(Exception):
    """Raised when the wall clock runs out; carries the best incumbent."""

    def __init__(self, message: str, solution: Solution | None = None):
        super().__init__(message)
        self.solution = solution


class NumericalFailure(Exception):
    pass


class CutRejected(Exception):
    """A callback produced a cut that a known-feasible point violates."""


@dataclass(frozen=True)
class SolverConfig:
    milp: str = "highs"
    conic: str = "cvxopt"
    time_limit_s: float | None = None
    gap: float = 0.01
    root_rounds: int = 40
    max_rounds: int = 200
    max_cuts_per_round: int = 500
    debug_cuts: bool = False

    def __post_init__(self):
        if self.milp != "highs":
            raise ValueError(f"unknown MILP engine {self.milp!r}")
        if self.conic != "cvxopt":
            raise ValueError(f"unknown conic engine {self.conic!r}")
        if not 0 < self.gap < 1:
            raise ValueError("gap must lie in (0, 1)")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SolverConfig":
        """Build from dotted configuration keys (solver.milp, solver.gap, ...)."""
        kw = {}
        for key, attr in (("solver.milp", "milp"), ("solver.conic", "conic"),
                          ("solver.time_limit_s", "time_limit_s"),
                          ("solver.gap", "gap")):
            if key in mapping:
                kw[attr] = mapping[key]
        return cls(**kw)


class MilpSession:
    """One master model, one engine, many incumbents.

    solve_with_callback re-solves the MILP whenever the incumbent check
    produces new cuts; scipy's HiGHS interface has no native lazy-constraint
    hook, so the single-tree protocol is emulated by a multi-solve loop
    preceded by LP-relaxation cut rounds.  With a deterministic engine the
    loop itself is deterministic.
    """

    def __init__(self, master: MasterModel, config: SolverConfig | None = None):
        self.master = master
        self.config = config or SolverConfig()
        c, integrality, lb, ub, mat, rlb, rub = master.lp_arrays()
        self._c = c
        self._integrality = integrality
        self._bounds = Bounds(lb, ub)
        self._mat = mat
        self._rlb = rlb
        self._rub = rub
        self.cuts: list[LinearCut] = []
        self._cut_keys: set = set()
        self.debug_points: list[np.ndarray] = []
        self.rounds = 0

    # -- cut pool ---------------------------------------------------------

    def absorb(self, cuts: list[LinearCut]) -> int:
        """Add new cuts to the pool; returns how many were actually new."""
        fresh = 0
        for cut in cuts[: self.config.max_cuts_per_round]:
            key = cut.key()
            if key in self._cut_keys:
                continue
            if self.config.debug_cuts:
                for point in self.debug_points:
                    if not cut.satisfied(point, tol=1e-6):
                        raise CutRejected(
                            f"cut {cut.label or cut.origin} violated by a "
                            f"known-feasible point by {cut.violation(point):.3e}")
            self._cut_keys.add(key)
            self.cuts.append(cut)
            fresh += 1
        return fresh

    def _constraints(self):
        if not self.cuts:
            return self._mat, self._rlb, self._rub
        rows = sp.csr_matrix(
            (
                np.concatenate([c.coefs for c in self.cuts]),
                np.concatenate([c.ids for c in self.cuts]),
                np.concatenate([[0], np.cumsum([len(c.ids) for c in self.cuts])]),
            ),
            shape=(len(self.cuts), len(self._c)),
        )
        mat = sp.vstack([self._mat, rows], format="csr")
        rlb = np.concatenate([self._rlb, np.full(len(self.cuts), -np.inf)])
        rub = np.concatenate([self._rub, np.array([c.rhs for c in self.cuts])])
        return mat, rlb, rub

    def _remaining(self, started: float) -> float | None:
        if self.config.time_limit_s is None:
            return None
        return self.config.time_limit_s - (time.monotonic() - started)

    def _run(self, relaxed: bool, remaining: float | None):
        mat, rlb, rub = self._constraints()
        options = {"mip_rel_gap": self.config.gap, "presolve": True}
        if remaining is not None:
            options["time_limit"] = max(0.05, remaining)
        integrality = np.zeros_like(self._integrality) if relaxed else self._integrality
        return milp(
            c=self._c,
            constraints=LinearConstraint(mat, rlb, rub),
            integrality=integrality,
            bounds=self._bounds,
            options=options,
        )

    def _root_pass(self, on_incumbent, started: float):
        for _ in range(self.config.root_rounds):
            remaining = self._remaining(started)
            if remaining is not None and remaining <= 0:
                raise TimeLimit("time limit during root strengthening", None)
            res = self._run(relaxed=True, remaining=remaining)
            if res.status == 2:
                raise Infeasible("LP relaxation infeasible")
            if res.status == 3:
                raise Unbounded("LP relaxation unbounded")
            if res.x is None:
                return
            sol = Solution.from_values(self.master, res.x, res.fun, "lp", gap=1.0)
            if self.absorb(on_incumbent(sol) or []) == 0:
                return

    def solve_with_callback(self, on_incumbent=None) -> Solution:
        """Optimize; re-solve until the incumbent check adds nothing new.

        on_incumbent maps a candidate Solution to a list of valid LinearCuts
        (empty or None when the candidate is acceptable).  It must not
        mutate anything besides a caller-owned log.
        """
        started = time.monotonic()
        best: Solution | None = None
        if on_incumbent is not None:
            self._root_pass(on_incumbent, started)
        while True:
            self.rounds += 1
            remaining = self._remaining(started)
            if remaining is not None and remaining <= 0:
                raise TimeLimit("time limit between rounds", best)
            res = self._run(relaxed=False, remaining=remaining)
            if res.status == 2:
                raise Infeasible(res.message)
            if res.status == 3:
                raise Unbounded(res.message)
            if res.status == 1:
                if res.x is not None:
                    best = Solution.from_values(
                        self.master, res.x, res.fun, "time-limit",
                        gap=float(res.mip_gap) if res.mip_gap is not None else 1.0)
                raise TimeLimit(res.message, best)
            if res.status != 0 or res.x is None:
                raise NumericalFailure(res.message)
            gap = float(res.mip_gap) if res.mip_gap is not None else 0.0
            best = Solution.from_values(self.master, res.x, res.fun, "optimal", gap)
            if on_incumbent is None:
                return best
            cuts = on_incumbent(best) or []
            if self.absorb(cuts) == 0:
                return best
            if self.rounds >= self.config.max_rounds:
                raise NumericalFailure(
                    f"no cut-loop convergence in {self.rounds} rounds")


# -- conic feasibility oracle ---------------------------------------------------------


class ConicSubproblem:
    """Linear equalities/inequalities, bounds, and SOC constraints over R^n."""

    def __init__(self, n: int):
        self.n = n
        self.lb = np.full(n, -np.inf)
        self.ub = np.full(n, np.inf)
        self.equalities: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.inequalities: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.cones: list[SocConstraint] = []

    def set_bounds(self, j: int, lb: float | None = None, ub: float | None = None):
        if lb is not None:
            self.lb[j] = lb
        if ub is not None:
            self.ub[j] = ub

    def add_eq(self, ids, coefs, rhs: float):
        self.equalities.append(
            (np.asarray(ids, dtype=int), np.asarray(coefs, dtype=float), float(rhs)))

    def add_ineq(self, ids, coefs, rhs: float):
        self.inequalities.append(
            (np.asarray(ids, dtype=int), np.asarray(coefs, dtype=float), float(rhs)))

    def add_cone(self, soc: SocConstraint):
        self.cones.append(soc)

    def is_empty(self) -> bool:
        return (not self.equalities and not self.inequalities and not self.cones
                and not np.any(np.isfinite(self.lb))
                and not np.any(np.isfinite(self.ub)))

    def residuals(self, v: np.ndarray) -> float:
        """Worst constraint violation at v (negative means strictly inside)."""
        worst = -np.inf
        for ids, coefs, rhs in self.equalities:
            worst = max(worst, abs(float(coefs @ v[ids]) - rhs))
        for ids, coefs, rhs in self.inequalities:
            worst = max(worst, float(coefs @ v[ids]) - rhs)
        finite = np.isfinite(self.lb)
        if finite.any():
            worst = max(worst, float((self.lb[finite] - v[finite]).max()))
        finite = np.isfinite(self.ub)
        if finite.any():
            worst = max(worst, float((v[finite] - self.ub[finite]).max()))
        for cone in self.cones:
            worst = max(worst, check_soc(cone, v, tol=np.inf).amount)
        return worst


@dataclass
class Certificate:
    """Farkas-style multipliers proving the subproblem empty.

    eq is signed; every other linear multiplier is nonnegative; each cone
    entry is (u0, u) with ||u|| <= u0.  Contracting the constraints with
    these weights cancels all variables and leaves `margin` > 0, which
    certifies that no feasible point exists.
    """

    eq: np.ndarray
    ineq: np.ndarray
    lb_mult: np.ndarray
    ub_mult: np.ndarray
    cones: list[tuple[float, np.ndarray]]
    margin: float = 0.0


@dataclass
class ConicFeasibilityResult:
    feasible: bool
    witness: np.ndarray | None
    certificate: Certificate | None
    max_violation: float


def certificate_margin(sub: ConicSubproblem, cert: Certificate):
    """(constant, |coefficients|_inf) of the multiplier-weighted contraction.

    The weighted sum of constraints reads coef . v + constant <= 0 for every
    feasible v; a sound certificate has coef ~ 0 and constant > 0.
    """
    coef = np.zeros(sub.n)
    const = 0.0
    for (ids, coefs, rhs), lam in zip(sub.equalities, cert.eq):
        coef[ids] += lam * coefs
        const -= lam * rhs
    for (ids, coefs, rhs), lam in zip(sub.inequalities, cert.ineq):
        coef[ids] += lam * coefs
        const -= lam * rhs
    finite = np.isfinite(sub.lb)
    coef[finite] -= cert.lb_mult[finite]
    const += float(cert.lb_mult[finite] @ sub.lb[finite])
    finite = np.isfinite(sub.ub)
    coef[finite] += cert.ub_mult[finite]
    const -= float(cert.ub_mult[finite] @ sub.ub[finite])
    for cone, (u0, u) in zip(sub.cones, cert.cones):
        for weight, expr in zip(u, cone.vector):
            scaled = cone.quantile * float(weight)
            coef[expr.ids] += scaled * expr.coefs
            const += scaled * expr.const
        coef[cone.rhs_slack.ids] -= u0 * cone.rhs_slack.coefs
        const -= u0 * cone.rhs_slack.const
    return const, float(np.abs(coef).max()) if sub.n else 0.0


def _support_mask(sub: ConicSubproblem) -> np.ndarray:
    """Variables touched by any constraint; the rest are free to sit at 0.

    The cone solver rejects systems whose constraint matrix has an empty
    column, so untouched variables are compressed away before the solve.
    """
    seen = np.zeros(sub.n, dtype=bool)
    for ids, coefs, _ in sub.equalities + sub.inequalities:
        seen[np.asarray(ids, dtype=int)[np.asarray(coefs) != 0]] = True
    seen |= np.isfinite(sub.lb)
    seen |= np.isfinite(sub.ub)
    for cone in sub.cones:
        for expr in (sub_expr for sub_expr in (cone.rhs_slack, *cone.vector)):
            seen[np.asarray(expr.ids, dtype=int)[np.asarray(expr.coefs) != 0]] = True
    return seen


def _phase1(sub: ConicSubproblem):
    """CVXOPT arrays for: min s subject to every constraint relaxed by s."""
    support = _support_mask(sub)
    col = np.full(sub.n, -1, dtype=int)
    col[support] = np.arange(int(support.sum()))
    n = int(support.sum())
    rows_G: list[np.ndarray] = []
    rows_h: list[float] = []

    def lin_row(ids, coefs, rhs, relax=True):
        row = np.zeros(n + 1)
        ids = np.asarray(ids, dtype=int)
        coefs = np.asarray(coefs, dtype=float)
        keep = coefs != 0
        np.add.at(row, col[ids[keep]], coefs[keep])
        if relax:
            row[n] = -1.0
        rows_G.append(row)
        rows_h.append(float(rhs))

    for ids, coefs, rhs in sub.equalities:
        lin_row(ids, coefs, rhs)
        lin_row(ids, -coefs, -rhs)
    for ids, coefs, rhs in sub.inequalities:
        lin_row(ids, coefs, rhs)
    lb_rows, ub_rows = [], []
    for j in range(sub.n):
        if np.isfinite(sub.lb[j]):
            lb_rows.append(len(rows_G))
            lin_row([j], [-1.0], -sub.lb[j])
        if np.isfinite(sub.ub[j]):
            ub_rows.append(len(rows_G))
            lin_row([j], [1.0], sub.ub[j])
    linear_cones = []  # cones with empty vectors degenerate to linear rows
    for k, cone in enumerate(sub.cones):
        if len(cone.vector) == 0:
            linear_cones.append((k, len(rows_G)))
            lin_row(cone.rhs_slack.ids, -cone.rhs_slack.coefs,
                    cone.rhs_slack.const)
    lin_row([], [], 1.0)  # s >= -1 keeps phase-I bounded
    n_lin = len(rows_G)

    def cone_row(ids, coefs, offset_s: float):
        row = np.zeros(n + 1)
        ids = np.asarray(ids, dtype=int)
        coefs = np.asarray(coefs, dtype=float)
        keep = coefs != 0
        np.add.at(row, col[ids[keep]], coefs[keep])
        row[n] = offset_s
        rows_G.append(row)

    soc_dims = []
    soc_cones = []
    for k, cone in enumerate(sub.cones):
        if len(cone.vector) == 0:
            continue
        soc_cones.append(k)
        cone_row(cone.rhs_slack.ids, -cone.rhs_slack.coefs, -1.0)
        rows_h.append(float(cone.rhs_slack.const))
        for expr in cone.vector:
            cone_row(expr.ids, -cone.quantile * expr.coefs, 0.0)
            rows_h.append(cone.quantile * float(expr.const))
        soc_dims.append(1 + len(cone.vector))

    G = cvxopt.matrix(np.vstack(rows_G))
    h = cvxopt.matrix(np.array(rows_h))
    c = cvxopt.matrix(np.concatenate([np.zeros(n), [1.0]]))
    dims = {"l": n_lin, "q": soc_dims, "s": []}
    layout = {
        "n_eq": len(sub.equalities),
        "n_ineq": len(sub.inequalities),
        "lb_rows": lb_rows,
        "ub_rows": ub_rows,
        "linear_cones": linear_cones,
        "soc_cones": soc_cones,
        "n_lin": n_lin,
        "soc_dims": soc_dims,
        "support": support,
    }
    return c, G, h, dims, layout


def _certificate_from_duals(sub: ConicSubproblem, zl: np.ndarray,
                            zq: list[np.ndarray], layout) -> Certificate:
    ne, ni = layout["n_eq"], layout["n_ineq"]
    eq = zl[0:2 * ne:2] - zl[1:2 * ne:2] if ne else np.empty(0)
    ineq = zl[2 * ne:2 * ne + ni].copy()
    lb_mult = np.zeros(sub.n)
    ub_mult = np.zeros(sub.n)
    fin_lb = [j for j in range(sub.n) if np.isfinite(sub.lb[j])]
    fin_ub = [j for j in range(sub.n) if np.isfinite(sub.ub[j])]
    for j, row in zip(fin_lb, layout["lb_rows"]):
        lb_mult[j] = zl[row]
    for j, row in zip(fin_ub, layout["ub_rows"]):
        ub_mult[j] = zl[row]
    cones: list[tuple[float, np.ndarray]] = [
        (0.0, np.empty(0)) for _ in sub.cones]
    for k, row in layout["linear_cones"]:
        # a degenerate cone (empty vector) acts as -slack <= 0; its dual u0
        # multiplies the slack exactly like a real cone head would
        cones[k] = (float(zl[row]), np.empty(0))
    for k, block in zip(layout["soc_cones"], zq):
        u0 = float(block[0])
        u = -np.asarray(block[1:]).ravel()  # flip: pairing has -u on the vector
        cones[k] = (u0, u)
    return Certificate(eq=eq, ineq=ineq, lb_mult=lb_mult, ub_mult=ub_mult,
                       cones=cones)


def _normalize(cert: Certificate) -> float:
    scale = 0.0
    for arr in (cert.eq, cert.ineq, cert.lb_mult, cert.ub_mult):
        if len(arr):
            scale = max(scale, float(np.abs(arr).max()))
    for u0, _ in cert.cones:
        scale = max(scale, abs(u0))
    if scale <= 0:
        return 0.0
    cert.eq = cert.eq / scale
    cert.ineq = cert.ineq / scale
    cert.lb_mult = cert.lb_mult / scale
    cert.ub_mult = cert.ub_mult / scale
    cert.cones = [(u0 / scale, u / scale) for u0, u in cert.cones]
    return scale


def conic_feasibility(sub: ConicSubproblem, feas_tol: float = 1e-9,
                      witness_tol: float = 1e-7) -> ConicFeasibilityResult:
    """Feasible(witness) or Infeasible(certificate) for the subproblem.

    Runs a phase-I minimum-violation cone program; its optimum below the
    tolerance yields a witness, otherwise its duals are repackaged into a
    contraction certificate whose soundness is verified before returning.
    """
    if sub.is_empty():
        return ConicFeasibilityResult(True, np.zeros(sub.n), None, 0.0)
    c, G, h, dims, layout = _phase1(sub)
    # the default chol KKT solver chokes on rank-degenerate systems; retry
    # once with regularized LDL before giving up
    attempts = ({}, {"kktsolver": "ldl",
                     "options": {"kktreg": 1e-9, "show_progress": False}})
    out, reason = None, "no attempt"
    for kwargs in attempts:
        try:
            trial = cvxopt.solvers.conelp(c, G, h, dims=dims, **kwargs)
        except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
            reason = f"cone solver failed: {exc}"
            continue
        if trial["status"] == "optimal" and trial["x"] is not None:
            out = trial
            break
        reason = f"phase-I status {trial['status']}"
    if out is None:
        raise NumericalFailure(reason)
    xs = np.asarray(out["x"]).ravel()
    support = layout["support"]
    ns = int(support.sum())
    v = np.zeros(sub.n)
    v[support] = xs[:ns]
    s_star = float(xs[ns])
    worst = sub.residuals(v)
    if worst <= witness_tol:
        return ConicFeasibilityResult(True, v, None, worst)
    if s_star <= feas_tol:
        # phase-I calls it feasible but the point is too sloppy to stand on
        raise NumericalFailure(
            f"witness violates constraints by {worst:.3e}")
    z = np.asarray(out["z"]).ravel()
    zl = z[:layout["n_lin"]]
    zq = []
    at = layout["n_lin"]
    for d in layout["soc_dims"]:
        zq.append(z[at:at + d])
        at += d
    cert = _certificate_from_duals(sub, zl, zq, layout)
    if _normalize(cert) <= 0:
        raise NumericalFailure("vanishing dual certificate")
    margin, coef_norm = certificate_margin(sub, cert)
    if coef_norm > 1e-6 or margin <= 1e-8:
        raise NumericalFailure(
            f"unsound certificate: margin {margin:.3e}, drift {coef_norm:.3e}")
    cert.margin = margin
    return ConicFeasibilityResult(False, None, cert, s_star)
