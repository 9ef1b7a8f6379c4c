"""Monte Carlo audit of a committed schedule under Gaussian wind deviations.

The chance constraints promise bounds on per-constraint violation
probabilities; this module draws wind deviation samples, applies the
schedule's affine recourse exactly as the model defines it, and counts how
often physical limits are actually crossed, in the base case and after
each listed outage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netmodel import Contingency, SccucCase, build_flowmap
from .stochastic import WindModel
from .ucmodel import BuildOptions, Solution
from .solverio import SolverConfig


@dataclass(frozen=True)
class WindRealization:
    """Sampled deviations and the seed that produced them.

    deviations has shape (farms, samples, hours), in MW around the forecast
    mean.  Sampling is untruncated Gaussian; the count of draws that push a
    farm's actual output negative is kept as a quality diagnostic rather
    than being clipped away.
    """

    deviations: np.ndarray
    seed: int
    negative_draws: int

    @property
    def n_samples(self) -> int:
        return self.deviations.shape[1]

    @property
    def horizon(self) -> int:
        return self.deviations.shape[2]

    def omega(self, t: int) -> np.ndarray:
        """Total deviation over farms at hour t, one entry per sample."""
        return self.deviations[:, :, t].sum(axis=0)


def sample_wind(wind_model: WindModel, n: int, seed: int) -> WindRealization:
    """n deviation draws per hour; identical bits for identical seeds."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((wind_model.n_farms, n, wind_model.horizon))
    dev = draws * wind_model.stdev[:, None, :]
    negative = int((dev + wind_model.mean[:, None, :] < 0).sum())
    dev.flags.writeable = False
    return WindRealization(deviations=dev, seed=int(seed),
                           negative_draws=negative)


class DispatchEvaluation:
    """Schedule + recourse pushed through one (possibly outaged) network.

    Produces per-sample unit outputs and line flows hour by hour, so callers
    control how much of the (L x N x T) volume ever exists at once.
    """

    def __init__(self, case: SccucCase, solution: Solution,
                 realization: WindRealization,
                 contingency: Contingency | None = None):
        if realization.horizon != case.horizon:
            raise ValueError("realization horizon differs from the case")
        self.case = case
        self.solution = solution
        self.realization = realization
        self.contingency = contingency
        cid = None if contingency is None else contingency.id
        self.p_effective = solution.p + solution.delta_for(cid)
        self.alpha = solution.alpha_for(cid)
        flowmap = build_flowmap(case, contingency).matrix
        self._fgen = flowmap[:, case.gen_bus]
        self._fwind = flowmap[:, case.wind_bus]
        net_mean = case.wind_injection - case.demand
        self._mean_flow = flowmap @ net_mean

    def outputs(self, t: int) -> np.ndarray:
        """(units, samples) actual generation at hour t."""
        omega = self.realization.omega(t)
        return self.p_effective[:, t, None] - self.alpha[:, t, None] * omega

    def flows(self, t: int) -> np.ndarray:
        """(lines, samples) actual flows at hour t; outaged line rows are 0."""
        dev = self.realization.deviations[:, :, t]
        return (self._fgen @ self.outputs(t) + self._fwind @ dev
                + self._mean_flow[:, t, None])

    def balance_residual(self) -> float:
        """Worst |generation + wind - demand| over all samples and hours."""
        worst = 0.0
        for t in range(self.case.horizon):
            total = self.outputs(t).sum(axis=0)
            wind = (self.case.wind_injection[:, t].sum()
                    + self.realization.omega(t))
            load = self.case.demand[:, t].sum()
            worst = max(worst, float(np.abs(total + wind - load).max()))
        return worst


def evaluate_dispatch(case: SccucCase, solution: Solution,
                      realization: WindRealization,
                      contingency: Contingency | None = None,
                      ) -> DispatchEvaluation:
    return DispatchEvaluation(case, solution, realization, contingency)


@dataclass
class ViolationReport:
    """Per-constraint Monte Carlo exceedance counts.

    Keys are (family, contingency id or None, hour, element index,
    direction): family "p" counts dispatch outside the unit's committed
    operating band, family "flow" counts |flow| beyond the line rating.
    hourly_any[t] counts samples violating anything at hour t, pooled over
    the base case and every listed contingency.
    """

    n_samples: int
    tolerance_mw: float
    counts: dict = field(default_factory=dict)
    hourly_any: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    negative_draws: int = 0

    def probability(self, key) -> float:
        return self.counts.get(key, 0) / self.n_samples

    def worst(self, family: str, contingency="any") -> float:
        best = 0.0
        for key, hits in self.counts.items():
            if key[0] != family:
                continue
            if contingency != "any" and key[1] != contingency:
                continue
            best = max(best, hits / self.n_samples)
        return best

    def total_violations(self) -> int:
        return int(sum(self.counts.values()))

    def rows(self):
        """(family, contingency, hour, index, direction, count, probability)."""
        for key in sorted(self.counts,
                          key=lambda k: (k[2], -1 if k[1] is None else k[1],
                                         k[0], k[3], k[4])):
            fam, cid, t, idx, direction = key
            hits = self.counts[key]
            yield (fam, "" if cid is None else cid, t, idx, direction,
                   hits, hits / self.n_samples)

    def hourly_rows(self):
        for t, hits in enumerate(self.hourly_any):
            yield (t, int(hits), hits / self.n_samples)


def violation_report(case: SccucCase, solution: Solution,
                     realization: WindRealization,
                     tolerance_mw: float = 1e-4) -> ViolationReport:
    """Count limit crossings per constraint, base case and each contingency."""
    T, N = case.horizon, realization.n_samples
    pmin = np.array([g.p_min for g in case.generators])
    pmax = np.array([g.p_max for g in case.generators])
    x = np.round(solution.x)
    report = ViolationReport(n_samples=N, tolerance_mw=tolerance_mw,
                             hourly_any=np.zeros(T, dtype=int),
                             negative_draws=realization.negative_draws)
    caps = np.array([ln.capacity for ln in case.lines])
    scenarios = [None, *case.contingencies]
    evals = [evaluate_dispatch(case, solution, realization, ctg)
             for ctg in scenarios]
    for t in range(T):
        any_hit = np.zeros(N, dtype=bool)
        for ctg, ev in zip(scenarios, evals):
            cid = None if ctg is None else ctg.id
            out = ev.outputs(t)
            lo_band = pmin * x[:, t]
            skip_min = (ctg is not None and ctg.is_generator)
            for i in range(case.n_gens):
                hi = out[i] > pmax[i] + tolerance_mw
                lo = out[i] < lo_band[i] - tolerance_mw
                if skip_min and i == ctg.index:
                    # the lost unit sits at zero by construction
                    lo[:] = False
                if hi.any():
                    report.counts[("p", cid, t, i, +1)] = int(hi.sum())
                    any_hit |= hi
                if lo.any():
                    report.counts[("p", cid, t, i, -1)] = int(lo.sum())
                    any_hit |= lo
            flow = ev.flows(t)
            for k in range(case.n_lines):
                hi = flow[k] > caps[k] + tolerance_mw
                lo = flow[k] < -caps[k] - tolerance_mw
                if hi.any():
                    report.counts[("flow", cid, t, k, +1)] = int(hi.sum())
                    any_hit |= hi
                if lo.any():
                    report.counts[("flow", cid, t, k, -1)] = int(lo.sum())
                    any_hit |= lo
        report.hourly_any[t] = int(any_hit.sum())
    return report


def solve_deterministic(case: SccucCase, reserve_floor: float = 0.005,
                        config: SolverConfig | None = None):
    """Certainty-equivalent schedule: no deviation terms, only a reserve floor.

    reserve_floor=0 on a zero-deviation case coincides with the stochastic
    solver, since nothing else distinguishes the two models there.
    """
    from .algorithms import solve_oa

    options = BuildOptions(deterministic=True,
                           reserve_floor=reserve_floor or None)
    return solve_oa(case, config, options=options)
