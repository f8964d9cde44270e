import numpy as np
import pytest

from pstrata import (
    EmptyArmError,
    ObservedCounts,
    ObservedDistribution,
    ParameterError,
    ParameterSet,
    Stratum,
    bootstrap_bounds,
    mixture_bounds,
    observed_distribution,
    population_distribution,
    psace_bounds_monotone,
    psace_bounds_nonmonotone,
    psace_summary,
)
from pstrata.simulation import builtin_scenarios

from conftest import random_params

STRATA_MONO = (Stratum.SS, Stratum.SSBAR, Stratum.SBARSBAR)


def grid_oracle(dist, r, monotonicity, n_grid=10_001):
    """Brute-force bounds: mixture-component bounds on a grid over the feasible region.

    Independent of the closed forms: applies the two-component Bernoulli
    mixture inequality at every grid value of the unidentified proportion
    and takes extrema.
    """
    p = dist.p_s[:, :, r]
    o1 = dist.omega[:, :, 1, r]
    o0 = dist.omega[:, :, 0, r]
    if monotonicity:
        ts = np.array([0.0])
    else:
        lo = max(0.0, p[0, 1] - p[1, 1])
        hi = min(p[0, 1], p[1, 0])
        ts = np.linspace(lo, hi, n_grid)

    def component(cell, w):
        z, s = cell
        with np.errstate(divide="ignore", invalid="ignore"):
            low = np.where(w > 0, np.maximum(0.0, 1.0 - o0[z, s] / w), 0.0)
            high = np.where(w > 0, np.minimum(1.0, o1[z, s] / w), 1.0)
        return low, high

    proportions = {
        Stratum.SS: p[0, 1] - ts,
        Stratum.SSBAR: p[1, 1] - p[0, 1] + ts,
        Stratum.SBARSBAR: p[1, 0] - ts,
        Stratum.SBARS: ts,
    }
    cells = {
        Stratum.SS: ((1, 1), (0, 1)),
        Stratum.SSBAR: ((1, 1), (0, 0)),
        Stratum.SBARSBAR: ((1, 0), (0, 0)),
        Stratum.SBARS: ((1, 0), (0, 1)),
    }
    strata = STRATA_MONO if monotonicity else tuple(Stratum)
    out = {}
    for u in strata:
        w = proportions[u]
        lo1, hi1 = component(cells[u][0], w)
        lo0, hi0 = component(cells[u][1], w)
        lower = np.clip(lo1 - hi0, -1.0, 1.0)
        upper = np.clip(hi1 - lo0, -1.0, 1.0)
        # a crossed component interval means no mixture representation exists
        # at this grid value; the effect is then unconstrained
        crossed = (lo1 > hi1 + 1e-12) | (lo0 > hi0 + 1e-12)
        lower = np.where(crossed, -1.0, lower)
        upper = np.where(crossed, 1.0, upper)
        out[u] = (float(lower.min()), float(upper.max()))
    return out


def random_distribution(gen):
    """A raw random conditional distribution (not necessarily model-generated)."""
    p1 = gen.uniform(size=2)
    p = np.stack([1 - p1, p1], axis=1)[:, :, None]  # (2, 2, 1)
    q = gen.uniform(size=(2, 2, 1))
    omega = np.stack([(1 - q) * p, q * p], axis=2)  # (2, 2, 2, 1)
    return ObservedDistribution(p_s=p, q_y1=q, omega=omega)


class TestMixtureBounds:
    def test_degenerate_mixture(self):
        (lo, hi), second = mixture_bounds(0.37, 1.0)
        assert (lo, hi) == (0.37, 0.37)
        assert second is None

    def test_uninformative_case(self):
        (lo, hi), _ = mixture_bounds(0.5, 0.5)
        assert (lo, hi) == (0.0, 1.0)

    def test_plugin_values(self):
        # max(0, 1 - 0.1/0.5) = 0.8 and min(1, 0.9/0.5) = 1.0
        (lo, hi), (lo2, hi2) = mixture_bounds(0.9, 0.5)
        assert lo == pytest.approx(0.8)
        assert hi == 1.0
        assert (lo2, hi2) == (pytest.approx(0.8), 1.0)

    def test_zero_weight_rejected(self):
        with pytest.raises(ParameterError, match="undefined component"):
            mixture_bounds(0.5, 0.0)


class TestMonotoneBounds:
    def test_point_identification_when_mixing_stratum_vanishes(self):
        """P11 = P01 forces pi_ssbar = 0 and the ss effect collapses to a point."""
        p1 = np.array([0.6, 0.6])
        p = np.stack([1 - p1, p1], axis=1)[:, :, None]
        q = np.array([[0.3, 0.7], [0.2, 0.55]])[:, :, None]
        omega = np.stack([(1 - q) * p, q * p], axis=2)
        dist = ObservedDistribution(p_s=p, q_y1=q, omega=omega)
        result = psace_bounds_monotone(dist, 0)
        point = q[1, 1, 0] - q[0, 1, 0]
        assert result[Stratum.SS].lower == pytest.approx(point, abs=1e-12)
        assert result[Stratum.SS].upper == pytest.approx(point, abs=1e-12)

    def test_zero_q00_boundary(self):
        p1 = np.array([0.5, 0.7])
        p = np.stack([1 - p1, p1], axis=1)[:, :, None]
        q = np.array([[0.0, 0.4], [0.35, 0.6]])[:, :, None]  # q[0,0] = 0
        omega = np.stack([(1 - q) * p, q * p], axis=2)
        dist = ObservedDistribution(p_s=p, q_y1=q, omega=omega)
        result = psace_bounds_monotone(dist, 0)
        assert result[Stratum.SBARSBAR].lower == pytest.approx(q[1, 0, 0], abs=1e-12)
        assert result[Stratum.SBARSBAR].upper == pytest.approx(q[1, 0, 0], abs=1e-12)

    def test_matches_grid_oracle_on_monotone_populations(self):
        gen = np.random.default_rng(21)
        for _ in range(200):
            dist = population_distribution(random_params(gen, 2, True))
            result = psace_bounds_monotone(dist, 0)
            oracle = grid_oracle(dist, 0, True)
            for u in STRATA_MONO:
                assert result[u].lower == pytest.approx(oracle[u][0], abs=1e-9)
                assert result[u].upper == pytest.approx(oracle[u][1], abs=1e-9)


class TestNonmonotoneBounds:
    def test_vacuous_side_condition(self):
        """P01 < P10 leaves the ss stratum possibly empty: bounds are [-1, 1]."""
        p1 = np.array([0.3, 0.2])  # P(S=1|Z=0) = 0.2 < P(S=0|Z=1) = 0.7
        p = np.stack([1 - p1, p1], axis=1)[:, :, None]
        q = np.full((2, 2, 1), 0.5)
        omega = np.stack([(1 - q) * p, q * p], axis=2)
        dist = ObservedDistribution(p_s=p, q_y1=q, omega=omega)
        result = psace_bounds_nonmonotone(dist, 0)
        assert result[Stratum.SS].lower == -1.0
        assert result[Stratum.SS].upper == 1.0
        assert not result[Stratum.SS].informative

    def test_matches_grid_oracle_on_random_distributions(self):
        gen = np.random.default_rng(22)
        for i in range(200):
            if i % 2 == 0:
                dist = population_distribution(random_params(gen, 1, False))
            else:
                dist = random_distribution(gen)
            result = psace_bounds_nonmonotone(dist, 0)
            oracle = grid_oracle(dist, 0, False)
            for u in Stratum:
                assert result[u].lower == pytest.approx(oracle[u][0], abs=1e-9)
                assert result[u].upper == pytest.approx(oracle[u][1], abs=1e-9)

    def test_contains_monotone_interval(self):
        """Zero is in the feasible region whenever P01 <= P11, so the
        non-monotone interval must contain the monotone one there."""
        gen = np.random.default_rng(23)
        checked = 0
        while checked < 200:
            dist = random_distribution(gen)
            if dist.p_s[0, 1, 0] > dist.p_s[1, 1, 0]:
                continue
            mono = psace_bounds_monotone(dist, 0)
            nonmono = psace_bounds_nonmonotone(dist, 0)
            for u in STRATA_MONO:
                assert nonmono[u].lower <= mono[u].lower + 1e-12
                assert nonmono[u].upper >= mono[u].upper - 1e-12
            checked += 1

    def test_true_ace_inside_bounds(self):
        """On model-generated distributions the generating effect lies inside."""
        for name in ("monotone-3", "nonmonotone-3", "monotone-5", "nonmonotone-5"):
            scenario = builtin_scenarios()[name]
            params = scenario.params()
            dist = population_distribution(params)
            ace = psace_summary(params).ace
            for r in range(scenario.n_trials):
                result = psace_bounds_nonmonotone(dist, r)
                for u in params.active:
                    assert result[u].lower - 1e-12 <= ace[u] <= result[u].upper + 1e-12
                if scenario.monotonicity:
                    mono = psace_bounds_monotone(dist, r)
                    for u in STRATA_MONO:
                        assert mono[u].lower - 1e-12 <= ace[u] <= mono[u].upper + 1e-12

    def test_all_bounds_within_unit_interval(self):
        gen = np.random.default_rng(24)
        for _ in range(100):
            dist = random_distribution(gen)
            for result in (psace_bounds_nonmonotone(dist, 0),):
                for b in result.values():
                    assert -1.0 <= b.lower <= b.upper <= 1.0


class TestBootstrap:
    def test_degenerate_counts_reproduce_point(self):
        counts = np.zeros((2, 2, 2, 1), dtype=int)
        counts[1, 1, 1, 0] = 40  # all treated mass in one cell
        counts[0, 0, 0, 0] = 60
        result = bootstrap_bounds(ObservedCounts(counts), 0, False, n_boot=1, seed=5)
        for est in result.estimates.values():
            assert est.ci_lower == pytest.approx(est.lower, abs=1e-12)
            assert est.ci_upper == pytest.approx(est.upper, abs=1e-12)

    def test_same_seed_identical(self, three_trial_conditional):
        counts = ObservedCounts(np.round(three_trial_conditional * 500).astype(int))
        a = bootstrap_bounds(counts, 1, False, n_boot=50, seed=7)
        b = bootstrap_bounds(counts, 1, False, n_boot=50, seed=7)
        assert a == b

    def test_interval_approaches_population_bounds(self, three_trial_params, three_trial_conditional):
        """Point bounds sit on the population bounds at the x10000 scale and the
        percentile interval tightens onto them as the counts grow."""
        pop = psace_bounds_nonmonotone(population_distribution(three_trial_params), 0)

        def ci_errors(scale, seed):
            counts = ObservedCounts(np.round(three_trial_conditional * scale).astype(int))
            result = bootstrap_bounds(counts, 0, False, n_boot=2_000, seed=seed)
            assert result.n_skipped == 0
            errors = {}
            for u, est in result.estimates.items():
                assert est.ci_lower <= est.lower + 1e-12
                assert est.ci_upper >= est.upper - 1e-12
                errors[u] = max(abs(est.ci_lower - pop[u].lower), abs(est.ci_upper - pop[u].upper))
            return result, errors

        coarse, err_coarse = ci_errors(10_000, seed=11)
        for u, est in coarse.estimates.items():
            assert est.lower == pytest.approx(pop[u].lower, abs=0.02)
            assert est.upper == pytest.approx(pop[u].upper, abs=0.02)
        _, err_fine = ci_errors(1_000_000, seed=11)
        for u in err_fine:
            assert err_fine[u] <= max(err_coarse[u], 1e-9)
            assert err_fine[u] < 0.02

    def test_empty_arm_rejected(self):
        counts = np.zeros((2, 2, 2, 1), dtype=int)
        counts[1, 1, 1, 0] = 10
        with pytest.warns(RuntimeWarning):
            oc = ObservedCounts(counts)
        with pytest.raises(EmptyArmError):
            bootstrap_bounds(oc, 0, False, n_boot=10, seed=1)
