"""Quantiles, affine-Gaussian algebra, chance-constraint reformulation, cuts."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures_lib import triangle_case
from sccuc.netmodel import Bus, GeneratorSpec, Line, SccucCase, build_flowmap, load_case
from sccuc.stochastic import (
    AffineExpr,
    AffineGaussian,
    BalanceError,
    DegenerateCut,
    DomainError,
    InsufficientData,
    LinearCut,
    SocConstraint,
    WindModel,
    check_soc,
    flow_affine,
    gaussian_cdf,
    gaussian_quantile,
    oa_cut,
    reformulate_line_cc,
    reformulate_reserve_cc,
    total_deviation_stdev,
    wind_stats_from_scenarios,
)

mpmath.mp.dps = 50


def quantile_oracle(eps: float) -> float:
    """Bisection on the high-precision normal CDF."""
    target = mpmath.mpf(1) - mpmath.mpf(eps)
    cdf = lambda x: (mpmath.erfc(-x / mpmath.sqrt(2))) / 2
    lo, hi = mpmath.mpf(-40), mpmath.mpf(40)
    for _ in range(200):
        mid = (lo + hi) / 2
        if cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


class TestQuantile:
    def test_median(self):
        assert gaussian_quantile(0.5) == 0.0

    def test_frozen_values(self):
        assert gaussian_quantile(0.02) == pytest.approx(2.05375, abs=5e-6)
        assert gaussian_quantile(0.10) == pytest.approx(1.28155, abs=5e-6)
        # tighter, against the oracle directly
        assert gaussian_quantile(0.02) == pytest.approx(quantile_oracle(0.02), abs=1e-12)
        assert gaussian_quantile(0.10) == pytest.approx(quantile_oracle(0.10), abs=1e-12)

    @pytest.mark.parametrize("eps", [1e-9, 1e-6, 1e-3, 0.01, 0.2, 0.4,
                                     0.5, 0.6, 0.9, 0.999, 1 - 1e-7])
    def test_oracle_grid(self, eps):
        assert gaussian_quantile(eps) == pytest.approx(quantile_oracle(eps), abs=1e-10)

    @given(st.floats(1e-8, 1 - 1e-8))
    @settings(max_examples=60, deadline=None)
    def test_inverse_property(self, eps):
        z = gaussian_quantile(eps)
        assert gaussian_cdf(z) == pytest.approx(1 - eps, abs=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            gaussian_quantile(bad)


class TestTotalDeviation:
    def test_single(self):
        wm = WindModel(mean=np.array([[10.0]]), stdev=np.array([[5.0]]))
        assert total_deviation_stdev(wm, 0) == 5.0

    def test_three_four_five(self):
        wm = WindModel(mean=np.zeros((2, 1)), stdev=np.array([[3.0], [4.0]]))
        assert total_deviation_stdev(wm, 0) == pytest.approx(5.0)

    def test_out_of_range(self):
        wm = WindModel(mean=np.zeros((1, 2)), stdev=np.zeros((1, 2)))
        with pytest.raises(DomainError):
            total_deviation_stdev(wm, 2)

    def test_rts96_matches_monte_carlo(self, rts96_dir):
        case = load_case(rts96_dir)
        t = 11
        analytic = total_deviation_stdev(case.wind_model, t)
        rng = np.random.default_rng(123)
        draws = rng.normal(0.0, case.wind_model.stdev[:, t], size=(100_000, 9))
        empirical = draws.sum(axis=1).std(ddof=1)
        assert empirical == pytest.approx(analytic, rel=0.02)


class TestFlowAffine:
    def test_zero_stdev_gives_deterministic_flow(self):
        case = triangle_case(sigma=(0.0, 0.0))
        fm = build_flowmap(case)
        # balanced dispatch at hour 0: net load = 85 - 20 = 65
        p = np.array([40.0, 25.0])
        alpha = np.array([0.6, 0.4])
        affs = flow_affine(fm, case, 0, p, alpha)
        inj = np.array([40.0, 25.0 - 45.0, 20.0 - 40.0])
        expected = fm.matrix @ inj
        for k, aff in enumerate(affs):
            assert np.all(aff.coeffs == 0.0)
            assert aff.stdev() == 0.0
            assert aff.nominal == pytest.approx(expected[k])

    def test_local_absorption(self):
        # one unit and the farm share a bus: fluctuation never leaves the bus
        buses = (
            Bus(id=1, demand=np.array([0.0]), wind_farm=0),
            Bus(id=2, demand=np.array([30.0]), is_reference=True),
        )
        case = SccucCase(
            buses=buses,
            lines=(Line(0, 1, susceptance=0.1, capacity=100.0),),
            generators=(GeneratorSpec(
                name="g", bus=0, p_min=0.0, p_max=50.0,
                cost_blocks=((10.0, 50.0),), no_load_cost=0.0,
                reserve_cost=1.0, tertiary_cost=1.0,
                startup_blocks=((1.0, 1, None),),
                min_up=1, min_down=1, ramp_up=50.0, ramp_down=50.0,
            ),),
            wind_model=WindModel(mean=np.array([[10.0]]), stdev=np.array([[3.0]])),
            contingencies=(), horizon=1,
        )
        fm = build_flowmap(case)
        affs = flow_affine(fm, case, 0, np.array([20.0]), np.array([1.0]))
        assert affs[0].coeffs == pytest.approx([0.0])
        assert affs[0].nominal == pytest.approx(30.0)

    def test_balance_error(self, triangle):
        fm = build_flowmap(triangle)
        with pytest.raises(BalanceError):
            flow_affine(fm, triangle, 0, np.array([10.0, 10.0]), np.array([0.5, 0.5]))

    def test_participation_sum_checked(self, triangle):
        fm = build_flowmap(triangle)
        with pytest.raises(BalanceError):
            flow_affine(fm, triangle, 0, np.array([40.0, 25.0]), np.array([0.5, 0.4]))

    def test_against_sampled_flows(self, triangle):
        # MC oracle: flows recomputed from scratch for sampled omega
        fm = build_flowmap(triangle)
        p = np.array([40.0, 25.0])
        alpha = np.array([0.55, 0.45])
        affs = flow_affine(fm, triangle, 0, p, alpha)
        rng = np.random.default_rng(5)
        sig = triangle.wind_model.stdev[:, 0]
        for _ in range(20):
            omega = rng.normal(0.0, sig)
            total = omega.sum()
            inj = np.zeros(3)
            np.add.at(inj, triangle.gen_bus, p - alpha * total)
            inj += triangle.wind_injection[:, 0] - triangle.demand[:, 0]
            inj[triangle.wind_bus] += omega
            direct = fm.matrix @ inj
            via_affine = [a.nominal + a.coeffs @ omega for a in affs]
            assert via_affine == pytest.approx(list(direct), abs=1e-9)

    def test_stdev_homogeneous_and_permutable(self):
        rng = np.random.default_rng(11)
        coeffs = rng.normal(size=6)
        sig = rng.uniform(0.1, 4.0, size=6)
        aff = AffineGaussian(nominal=1.0, coeffs=coeffs, sigmas=sig)
        doubled = AffineGaussian(nominal=1.0, coeffs=coeffs, sigmas=2 * sig)
        assert doubled.stdev() == pytest.approx(2 * aff.stdev())
        perm = rng.permutation(6)
        shuffled = AffineGaussian(nominal=1.0, coeffs=coeffs[perm], sigmas=sig[perm])
        assert shuffled.stdev() == pytest.approx(aff.stdev())


EPS_Z1 = 1 - gaussian_cdf(1.0)  # makes the quantile exactly 1


class TestLineCc:
    def test_deterministic_reduction(self):
        aff = AffineGaussian(nominal=42.0, coeffs=np.zeros(2), sigmas=np.zeros(2))
        hi, lo = reformulate_line_cc(aff, f_max=50.0, eps=0.3)
        assert not check_soc(hi).violated
        assert not check_soc(lo).violated
        assert hi.rhs_slack.const == pytest.approx(8.0)
        assert lo.rhs_slack.const == pytest.approx(92.0)

    def test_zero_slack_at_unit_quantile(self):
        aff = AffineGaussian(nominal=90.0, coeffs=np.array([1.0]), sigmas=np.array([10.0]))
        hi, lo = reformulate_line_cc(aff, f_max=100.0, eps=EPS_Z1)
        res = check_soc(hi)
        assert not res.violated
        assert res.amount == pytest.approx(0.0, abs=1e-9)

    def test_eps_half_is_deterministic_limit(self):
        aff = AffineGaussian(nominal=90.0, coeffs=np.array([2.0]), sigmas=np.array([10.0]))
        hi, _ = reformulate_line_cc(aff, f_max=100.0, eps=0.5)
        assert hi.quantile == 0.0
        assert not check_soc(hi).violated

    def test_probability_matches_monte_carlo(self, triangle):
        fm = build_flowmap(triangle)
        p = np.array([40.0, 25.0])
        alpha = np.array([0.7, 0.3])
        affs = flow_affine(fm, triangle, 0, p, alpha)
        rng = np.random.default_rng(99)
        n = 100_000
        omega = rng.normal(0.0, triangle.wind_model.stdev[:, 0], size=(n, 1))
        for aff, line in zip(affs, triangle.lines):
            flows = aff.nominal + omega @ aff.coeffs
            for limit in (line.capacity, aff.nominal + 0.5 * max(aff.stdev(), 1.0)):
                analytic = aff.prob_below(limit)
                empirical = float(np.mean(flows <= limit))
                se = math.sqrt(max(analytic * (1 - analytic), 1e-12) / n)
                assert abs(empirical - analytic) <= max(3 * se, 1e-4)


class TestReserveCc:
    def test_alpha_zero_reduces_to_nonneg(self):
        row = reformulate_reserve_cc(0, 1, sigma_omega=100.0, eps=0.02)
        point = np.array([0.0, 0.0])
        assert row.satisfied(point)

    def test_frozen_threshold(self):
        row = reformulate_reserve_cc(0, 1, sigma_omega=100.0, eps=0.02)
        needed = 0.5 * gaussian_quantile(0.02) * 100.0
        assert needed == pytest.approx(102.69, abs=5e-3)
        assert row.satisfied(np.array([0.5, needed + 1e-9]))
        assert not row.satisfied(np.array([0.5, needed - 1e-3]), tol=1e-6)

    def test_eps_half_vacuous(self):
        row = reformulate_reserve_cc(0, 1, sigma_omega=50.0, eps=0.5)
        assert row.satisfied(np.array([1.0, 0.0]))


class TestCheckSoc:
    def test_zero_vector_positive_slack(self):
        soc = SocConstraint(
            rhs_slack=AffineExpr.constant(5.0),
            vector=(AffineExpr.constant(0.0),),
            quantile=2.0,
        )
        assert not check_soc(soc).violated

    def test_three_four_five_violation(self):
        soc = SocConstraint(
            rhs_slack=AffineExpr.constant(4.0),
            vector=(AffineExpr.constant(3.0), AffineExpr.constant(4.0)),
            quantile=1.0,
        )
        res = check_soc(soc)
        assert res.violated
        assert res.amount == pytest.approx(1.0)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_agrees_with_direct_recomputation(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 5))
        n_vars = dim + 1
        point = rng.normal(size=n_vars)
        vec = tuple(
            AffineExpr.of([i], [rng.normal()], rng.normal()) for i in range(dim)
        )
        slack = AffineExpr.of([dim], [1.0], rng.normal())
        z = float(rng.uniform(0.0, 3.0))
        soc = SocConstraint(rhs_slack=slack, vector=vec, quantile=z)
        res = check_soc(soc, point)
        direct = z * math.sqrt(sum(e.value(point) ** 2 for e in vec)) - slack.value(point)
        assert res.amount == pytest.approx(direct, abs=1e-12)
        assert res.violated == (direct > 1e-6)


def _symbolic_soc(dim=2, quantile=1.0):
    # variables 0..dim-1 are the vector entries, variable dim is the slack
    vec = tuple(AffineExpr.of([i], [1.0]) for i in range(dim))
    return SocConstraint(rhs_slack=AffineExpr.of([dim], [1.0]), vector=vec,
                         quantile=quantile)


class TestOaCut:
    def test_axis_aligned(self):
        soc = _symbolic_soc(dim=2)
        cut = oa_cut(soc, np.array([1.0, 0.0, 0.5]))
        weights = dict(zip(cut.ids.tolist(), cut.coefs.tolist()))
        assert weights == pytest.approx({0: 1.0, 1: 0.0, 2: -1.0})
        assert cut.rhs == 0.0

    def test_three_four_gradient(self):
        soc = _symbolic_soc(dim=2)
        point = np.array([3.0, 4.0, 4.0])
        cut = oa_cut(soc, point)
        weights = dict(zip(cut.ids.tolist(), cut.coefs.tolist()))
        assert weights[0] == pytest.approx(0.6)
        assert weights[1] == pytest.approx(0.8)
        assert weights[2] == pytest.approx(-1.0)
        assert cut.violation(point) == pytest.approx(1.0)

    def test_degenerate(self):
        soc = _symbolic_soc(dim=2)
        with pytest.raises(DegenerateCut):
            oa_cut(soc, np.array([0.0, 0.0, 1.0]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=150, deadline=None)
    def test_cut_validity_by_rejection_sampling(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 4))
        z = float(rng.uniform(0.2, 3.0))
        soc = _symbolic_soc(dim=dim, quantile=z)
        violating = rng.normal(size=dim + 1)
        violating[dim] = z * np.linalg.norm(violating[:dim]) - rng.uniform(0.5, 2.0)
        if np.linalg.norm(violating[:dim]) < 1e-9:
            return
        cut = oa_cut(soc, violating)
        assert cut.violation(violating) > 1e-6
        # any feasible point satisfies the cut
        for _ in range(50):
            x = rng.normal(size=dim + 1) * 3
            x[dim] = z * np.linalg.norm(x[:dim]) + rng.uniform(0.0, 3.0)
            assert cut.satisfied(x, tol=1e-9)


class TestScenarioStats:
    def test_identical_scenarios(self):
        arr = np.tile([[5.0, 7.0]], (10, 1))
        wm = wind_stats_from_scenarios({"w1": arr})
        assert np.allclose(wm.mean, [[5.0, 7.0]])
        assert np.allclose(wm.stdev, 0.0)

    def test_two_point_sample(self):
        wm = wind_stats_from_scenarios({"w1": np.array([[0.0], [2.0]])})
        assert wm.mean[0, 0] == pytest.approx(1.0)
        assert wm.stdev[0, 0] == pytest.approx(math.sqrt(2.0))

    def test_recovers_generating_parameters(self):
        rng = np.random.default_rng(42)
        true_mu, true_sigma = 50.0, 8.0
        draws = rng.normal(true_mu, true_sigma, size=(1000, 4))
        wm = wind_stats_from_scenarios({"w1": draws})
        assert np.allclose(wm.mean, true_mu, rtol=0.05)
        assert np.allclose(wm.stdev, true_sigma, rtol=0.05)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            wind_stats_from_scenarios({"w1": np.array([[1.0, 2.0]])})


class TestLinearCut:
    def test_dedupe_key(self):
        a = LinearCut.of([3, 1], [2.0, 1.0], 5.0)
        b = LinearCut.of([1, 3], [1.0, 2.0], 5.0)
        assert a.key() == b.key()

    def test_violation_sign(self):
        cut = LinearCut.of([0], [1.0], 1.0)
        assert cut.violation(np.array([2.0])) == pytest.approx(1.0)
        assert cut.satisfied(np.array([0.5]))
