"""Gaussian wind model and analytic chance-constraint machinery.

Wind deviations are independent zero-mean Gaussians per farm and hour. Every
random quantity handled here is affine in those deviations, so each chance
constraint reduces to either a linear inequality (reserve constraints, where
the coefficient vector is a multiple of one deviation direction) or a
second-order cone constraint (line flows).

Decision variables are referred to by nonnegative integer ids; an
:class:`AffineExpr` is a sparse linear expression over them. Purely numeric
expressions (no ids) are used when a dispatch is already fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


class DomainError(Exception):
    """Argument outside the mathematical domain of the function."""


class DegenerateCut(Exception):
    """A cut could not be formed because its coefficients vanish."""


class BalanceError(Exception):
    """Nominal injections do not sum to zero."""


class InsufficientData(Exception):
    """Not enough scenarios to estimate moments."""


# -- normal distribution -----------------------------------------------------


def gaussian_cdf(x: float) -> float:
    """Standard normal CDF via erfc (stable in both tails)."""
    return 0.5 * math.erfc(-x / SQRT2)


_ACK_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACK_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACK_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACK_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)


def _inv_cdf_estimate(p: float) -> float:
    # rational approximation, |error| < 1.15e-9 over (0, 1)
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        )
    q = math.sqrt(-2.0 * math.log1p(-p))
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
        (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
    )


def gaussian_quantile(eps: float) -> float:
    """z such that Phi(z) = 1 - eps, to absolute accuracy better than 1e-10.

    Rational estimate polished by Newton steps on the erfc-based CDF; the
    refinement always runs in the smaller tail where the CDF is well scaled.
    """
    if not (isinstance(eps, (int, float)) and 0.0 < eps < 1.0) or math.isnan(eps):
        raise DomainError(f"violation level must lie in (0, 1), got {eps!r}")
    q = min(eps, 1.0 - eps)
    # y = Phi^{-1}(q) <= 0; z = -y for eps <= 0.5, else +y
    y = _inv_cdf_estimate(q)
    y = min(y, 0.0)
    for _ in range(2):
        err = gaussian_cdf(y) - q
        pdf = math.exp(-0.5 * y * y) / SQRT2PI
        if pdf == 0.0:
            break
        y -= err / pdf
    return (-y if eps <= 0.5 else y) + 0.0


# -- wind model ----------------------------------------------------------------


@dataclass(frozen=True)
class WindModel:
    """Forecast mean and fluctuation stdev per farm and hour, in MW."""

    mean: np.ndarray  # (n_farms, horizon)
    stdev: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        stdev = np.atleast_2d(np.asarray(self.stdev, dtype=float))
        if mean.shape != stdev.shape:
            raise ValueError("wind mean and stdev shapes differ")
        if (stdev < 0).any():
            raise ValueError("wind stdev must be nonnegative")
        names = self.names or tuple(f"w{i + 1}" for i in range(mean.shape[0]))
        if len(names) != mean.shape[0]:
            raise ValueError("one name per wind farm required")
        mean = mean.copy()
        stdev = stdev.copy()
        mean.flags.writeable = False
        stdev.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "stdev", stdev)
        object.__setattr__(self, "names", tuple(names))

    @property
    def n_farms(self) -> int:
        return self.mean.shape[0]

    @property
    def horizon(self) -> int:
        return self.mean.shape[1]

    def zeroed(self) -> "WindModel":
        """Same forecast, no fluctuations."""
        return WindModel(mean=self.mean, stdev=np.zeros_like(self.stdev), names=self.names)


def total_deviation_stdev(wind_model: WindModel, t: int) -> float:
    """Stdev of the total deviation (sum over farms) at hour t."""
    if not 0 <= t < wind_model.horizon:
        raise DomainError(f"hour {t} outside horizon {wind_model.horizon}")
    return float(np.sqrt(np.sum(wind_model.stdev[:, t] ** 2)))


def wind_stats_from_scenarios(scenario_matrix) -> WindModel:
    """Per-hour sample mean/stdev from scenario draws.

    Accepts a mapping ``{farm_name: (N, T) array}`` or a 3-d array
    ``(n_farms, N, T)``; hours are treated as independent.
    """
    if isinstance(scenario_matrix, dict):
        names = tuple(scenario_matrix)
        arrays = [np.asarray(scenario_matrix[k], dtype=float) for k in names]
    else:
        cube = np.asarray(scenario_matrix, dtype=float)
        if cube.ndim == 2:
            cube = cube[None]
        if cube.ndim != 3:
            raise ValueError("expected (n_farms, N, T) scenarios")
        names = tuple(f"w{i + 1}" for i in range(cube.shape[0]))
        arrays = list(cube)
    if not arrays:
        raise InsufficientData("no scenarios supplied")
    horizon = arrays[0].shape[1]
    mean = np.empty((len(arrays), horizon))
    stdev = np.empty_like(mean)
    for w, arr in enumerate(arrays):
        if arr.ndim != 2 or arr.shape[1] != horizon:
            raise ValueError("scenario arrays must share one (N, T) shape")
        if arr.shape[0] < 2:
            raise InsufficientData("need at least two scenarios per farm")
        mean[w] = arr.mean(axis=0)
        stdev[w] = arr.std(axis=0, ddof=1)
    return WindModel(mean=mean, stdev=stdev, names=names)


# -- affine expressions over decision variables ---------------------------------


@dataclass(frozen=True)
class AffineExpr:
    """const + sum(coefs * vars[ids]); ids empty means a plain constant."""

    ids: np.ndarray
    coefs: np.ndarray
    const: float = 0.0

    @staticmethod
    def constant(value: float) -> "AffineExpr":
        return AffineExpr(np.empty(0, dtype=int), np.empty(0), float(value))

    @staticmethod
    def of(ids, coefs, const: float = 0.0) -> "AffineExpr":
        return AffineExpr(
            np.asarray(ids, dtype=int).ravel(),
            np.asarray(coefs, dtype=float).ravel(),
            float(const),
        )

    def value(self, point: np.ndarray | None = None) -> float:
        if self.ids.size == 0:
            return self.const
        if point is None:
            raise ValueError("expression references variables but no point given")
        return float(self.const + self.coefs @ point[self.ids])


ORIGIN_OA = "outer-approx"
ORIGIN_BENDERS = "benders-feasibility"
ORIGIN_BLOCK = "contingency-block"


@dataclass(frozen=True)
class LinearCut:
    """coefs . vars[ids] <= rhs, valid for every feasible point."""

    ids: np.ndarray
    coefs: np.ndarray
    rhs: float
    origin: str = ORIGIN_OA
    label: str = ""

    @staticmethod
    def of(ids, coefs, rhs, origin=ORIGIN_OA, label="") -> "LinearCut":
        ids = np.asarray(ids, dtype=int).ravel()
        coefs = np.asarray(coefs, dtype=float).ravel()
        if ids.shape != coefs.shape:
            raise ValueError("cut ids/coefs length mismatch")
        return LinearCut(ids, coefs, float(rhs), origin, label)

    def value(self, point: np.ndarray) -> float:
        return float(self.coefs @ point[self.ids])

    def violation(self, point: np.ndarray) -> float:
        return self.value(point) - self.rhs

    def satisfied(self, point: np.ndarray, tol: float = 1e-6) -> bool:
        return self.violation(point) <= tol

    def key(self) -> tuple:
        """Deduplication key: variable support and rounded coefficients."""
        order = np.argsort(self.ids)
        return (
            tuple(self.ids[order].tolist()),
            tuple(np.round(self.coefs[order], 9).tolist()),
            round(self.rhs, 9),
        )


@dataclass(frozen=True)
class SocConstraint:
    """quantile * ||vector|| <= rhs_slack, all entries affine in decisions."""

    rhs_slack: AffineExpr
    vector: tuple[AffineExpr, ...]
    quantile: float
    label: str = ""

    def vector_at(self, point: np.ndarray | None = None) -> np.ndarray:
        return np.array([e.value(point) for e in self.vector])


@dataclass(frozen=True)
class SocCheck:
    violated: bool
    amount: float  # quantile*||v|| - slack, positive when violated


def check_soc(soc: SocConstraint, point: np.ndarray | None = None, tol: float = 1e-6) -> SocCheck:
    """Evaluate one SOC constraint at a point."""
    amount = soc.quantile * float(np.linalg.norm(soc.vector_at(point))) - soc.rhs_slack.value(point)
    return SocCheck(violated=amount > tol, amount=amount)


def oa_cut(soc: SocConstraint, violating_point: np.ndarray | None = None,
           tol: float = 1e-12) -> LinearCut:
    """Supporting-hyperplane cut of the SOC set at the violating point.

    With u = v*/||v*||, the cut is quantile * u . vector(x) <= rhs_slack(x);
    Cauchy-Schwarz makes it valid for every point of the cone.
    """
    vstar = soc.vector_at(violating_point)
    norm = float(np.linalg.norm(vstar))
    if norm <= tol:
        raise DegenerateCut("vector vanishes at the point; constraint is linear there")
    u = vstar / norm
    weights: dict[int, float] = {}
    rhs = soc.rhs_slack.const
    for w, expr in zip(u, soc.vector):
        rhs -= soc.quantile * w * expr.const
        for vid, coef in zip(expr.ids, expr.coefs):
            weights[int(vid)] = weights.get(int(vid), 0.0) + soc.quantile * w * coef
    for vid, coef in zip(soc.rhs_slack.ids, soc.rhs_slack.coefs):
        weights[int(vid)] = weights.get(int(vid), 0.0) - coef
    ids = np.fromiter(weights.keys(), dtype=int, count=len(weights))
    coefs = np.fromiter(weights.values(), dtype=float, count=len(weights))
    return LinearCut(ids, coefs, float(rhs), origin=ORIGIN_OA, label=soc.label)


# -- affine line flows -----------------------------------------------------------


@dataclass(frozen=True)
class AffineGaussian:
    """nominal + sum_b coeffs_b * omega_b with omega_b ~ N(0, sigmas_b^2)."""

    nominal: float
    coeffs: np.ndarray  # per wind farm
    sigmas: np.ndarray  # per wind farm, at the relevant hour

    def stdev(self) -> float:
        return float(np.sqrt(np.sum((self.coeffs * self.sigmas) ** 2)))

    def prob_below(self, limit: float) -> float:
        """Pr(value <= limit) under the Gaussian model."""
        sd = self.stdev()
        if sd == 0.0:
            return 1.0 if self.nominal <= limit else 0.0
        return gaussian_cdf((limit - self.nominal) / sd)


def flow_affine(flowmap, case, t: int, p: np.ndarray, alpha: np.ndarray,
                delta: np.ndarray | None = None) -> list[AffineGaussian]:
    """Random line flows for a fixed dispatch at hour t.

    p, alpha (and optionally delta) are per-generator vectors; alpha must sum
    to one. Returns one AffineGaussian per line of the map.
    """
    nominal, coeffs = flow_affine_arrays(flowmap, case, t, p, alpha, delta)
    sig = case.wind_model.stdev[:, t]
    coeffs = np.where(sig > 0, coeffs, 0.0)  # omega_b is a.s. zero where sigma_b = 0
    return [AffineGaussian(float(n), c.copy(), sig.copy()) for n, c in zip(nominal, coeffs)]


def flow_affine_arrays(flowmap, case, t: int, p: np.ndarray, alpha: np.ndarray,
                       delta: np.ndarray | None = None):
    """Vectorized core of flow_affine: (nominal (L,), coeffs (L, W))."""
    p = np.asarray(p, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    total = p.copy()
    if delta is not None:
        total = total + np.asarray(delta, dtype=float)
    injection = np.zeros(case.n_buses)
    np.add.at(injection, case.gen_bus, total)
    injection += case.wind_injection[:, t] - case.demand[:, t]
    imbalance = float(injection.sum())
    if abs(imbalance) > 1e-6:
        raise BalanceError(f"nominal injections sum to {imbalance:.3e} MW, not 0")
    if abs(alpha.sum() - 1.0) > 1e-6:
        raise BalanceError(f"participation sums to {alpha.sum():.6f}, not 1")
    M = flowmap.matrix
    nominal = M @ injection
    # response to omega_b: direct injection at b minus alpha-weighted response
    gen_response = M[:, case.gen_bus] @ alpha
    coeffs = M[:, case.wind_bus] - gen_response[:, None]
    return nominal, coeffs


def reformulate_line_cc(affine: AffineGaussian, f_max: float, eps: float):
    """Two SOC constraints equivalent to Pr(|flow| stays within f_max) per tail.

    Returned constraints are numeric (constant expressions); the master model
    builds the symbolic analogues itself.
    """
    if not 0 < eps <= 0.5:
        raise DomainError(f"line violation level must lie in (0, 0.5], got {eps}")
    z = gaussian_quantile(eps)
    vec = tuple(
        AffineExpr.constant(float(c * s)) for c, s in zip(affine.coeffs, affine.sigmas)
    )
    hi = SocConstraint(
        rhs_slack=AffineExpr.constant(f_max - affine.nominal),
        vector=vec, quantile=z, label="flow<=fmax",
    )
    lo = SocConstraint(
        rhs_slack=AffineExpr.constant(f_max + affine.nominal),
        vector=vec, quantile=z, label="flow>=-fmax",
    )
    return hi, lo


def reformulate_reserve_cc(alpha_id: int, r_id: int, sigma_omega: float, eps: float,
                           label: str = "") -> LinearCut:
    """Pr(r >= Omega * alpha) >= 1-eps as the linear row z*sigma*alpha - r <= 0.

    Symmetry of the zero-mean Gaussian makes the same row serve both tails.
    """
    z = gaussian_quantile(eps)
    return LinearCut.of(
        ids=[alpha_id, r_id],
        coefs=[z * sigma_omega, -1.0],
        rhs=0.0,
        origin="reserve-linear",
        label=label,
    )
