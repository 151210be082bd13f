"""Gain quantizers and the finite-state channel chain.

Oracles: scipy.stats.rayleigh (a Rayleigh gain with E{g^2} = gamma has
scale sqrt(gamma / 2)), direct quadrature of the MAE objective, and
hand-derived closed forms for two-level designs.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from wsnpower import (
    ChannelParams,
    FsmcModel,
    ModelValidityError,
    ParameterError,
    QuantizerMethod,
    QuantizerSpec,
    build_channel_fsmc,
    design_mmae_thresholds,
    design_moe_thresholds,
    level_probabilities,
    quantizer_mae,
    sample_gain_in_level,
)


def rayleigh(gamma: float):
    return stats.rayleigh(scale=math.sqrt(gamma / 2.0))


def explicit(boundaries) -> QuantizerSpec:
    return QuantizerSpec(
        levels=len(boundaries) - 1,
        boundaries=tuple(boundaries),
        method=QuantizerMethod.EXPLICIT,
    )


class TestQuantizerSpec:
    def test_reconstruction_is_lower_boundary(self):
        q = explicit([0.0, 1.0, 2.0, math.inf])
        assert q.reconstruction_values == (0.0, 1.0, 2.0)

    @pytest.mark.parametrize(
        "boundaries",
        [
            [0.0, math.inf],  # one level
            [0.1, 1.0, math.inf],  # does not start at 0
            [0.0, 1.0, 2.0],  # does not end at inf
            [0.0, 2.0, 1.0, math.inf],  # not increasing
            [0.0, 1.0, 1.0, math.inf],  # not strictly increasing
        ],
    )
    def test_invalid_boundaries_rejected(self, boundaries):
        with pytest.raises(ParameterError):
            explicit(boundaries)


class TestMoeDesign:
    @pytest.mark.parametrize("levels", [2, 3, 4, 6])
    @pytest.mark.parametrize("gamma", [1.0, 1.5])
    def test_occupancy_profile(self, levels, gamma):
        # Uniform mass 1/(L+1) on the first L-1 levels, 2/(L+1) on the last.
        q = design_moe_thresholds(levels, gamma)
        phi = level_probabilities(q, gamma)
        target = np.full(levels, 1.0 / (levels + 1))
        target[-1] = 2.0 / (levels + 1)
        np.testing.assert_allclose(phi, target, atol=1e-12)

    def test_boundaries_match_rayleigh_quantiles(self):
        q = design_moe_thresholds(4, 1.0)
        ref = rayleigh(1.0).ppf([0.2, 0.4, 0.6])
        np.testing.assert_allclose(q.boundaries[1:-1], ref, rtol=1e-12)

    def test_scale_covariance(self):
        a = np.array(design_moe_thresholds(4, 1.0).boundaries[:-1])
        b = np.array(design_moe_thresholds(4, 2.5).boundaries[:-1])
        np.testing.assert_allclose(b, math.sqrt(2.5) * a, rtol=1e-12)

    def test_rejects_degenerate_args(self):
        with pytest.raises(ParameterError):
            design_moe_thresholds(1, 1.0)
        with pytest.raises(ParameterError):
            design_moe_thresholds(4, 0.0)


class TestMmaeDesign:
    def test_two_level_closed_form(self):
        # With L = 2 and gamma = 1 the single stationarity condition
        # b f(b) = 1 - F(b) collapses to 2 b^2 = 1.
        q = design_mmae_thresholds(2, 1.0)
        assert q.boundaries[1] == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-10)

    @pytest.mark.parametrize("levels", [3, 4, 5])
    def test_stationarity_conditions(self, levels):
        # Each interior boundary must satisfy
        # (b_j - b_{j-1}) f(b_j) = F(b_{j+1}) - F(b_j).
        q = design_mmae_thresholds(levels, 1.0)
        law = rayleigh(1.0)
        b = q.boundaries
        for j in range(1, levels):
            upper = 1.0 if math.isinf(b[j + 1]) else law.cdf(b[j + 1])
            lhs = (b[j] - b[j - 1]) * law.pdf(b[j])
            assert lhs == pytest.approx(upper - law.cdf(b[j]), abs=1e-9)

    def test_local_optimality_of_mae(self):
        q = design_mmae_thresholds(3, 1.0)
        base = quantizer_mae(q, 1.0)
        for j in (1, 2):
            for eps in (-1e-3, 1e-3):
                bumped = list(q.boundaries)
                bumped[j] += eps
                assert quantizer_mae(explicit(bumped), 1.0) >= base - 1e-12

    def test_scale_covariance(self):
        a = np.array(design_mmae_thresholds(4, 1.0).boundaries[:-1])
        b = np.array(design_mmae_thresholds(4, 3.0).boundaries[:-1])
        np.testing.assert_allclose(b, math.sqrt(3.0) * a, rtol=1e-9)


class TestQuantizerMae:
    def test_against_quadrature(self):
        q = explicit([0.0, 0.6, 1.3, math.inf])
        law = rayleigh(1.0)

        def integrand(x):
            level = 0 if x < 0.6 else (1 if x < 1.3 else 2)
            return abs(x - q.reconstruction_values[level]) * law.pdf(x)

        ref = sum(
            integrate.quad(integrand, lo, min(hi, 60.0))[0]
            for lo, hi in zip(q.boundaries[:-1], q.boundaries[1:])
        )
        assert quantizer_mae(q, 1.0) == pytest.approx(ref, rel=1e-8)


class TestLevelProbabilities:
    def test_matches_cdf_differences_and_sums_to_one(self):
        q = explicit([0.0, 0.5, 1.1, 2.0, math.inf])
        gamma = 1.7
        phi = level_probabilities(q, gamma)
        ref = np.diff(rayleigh(gamma).cdf(np.array(q.boundaries[:-1] + (60.0,))))
        ref[-1] = 1.0 - rayleigh(gamma).cdf(2.0)
        np.testing.assert_allclose(phi, ref, atol=1e-12)
        assert phi.sum() == pytest.approx(1.0, abs=1e-14)


class TestChannelFsmc:
    def test_two_level_closed_form_rates(self):
        # Boundary at sqrt(gamma): level-crossing rate N = sqrt(2*pi) f_D e^{-1},
        # so up-move = N T_s / phi_1 and down-move = N T_s / phi_2.
        q = explicit([0.0, 1.0, math.inf])
        p = ChannelParams(mean_square_gain=1.0, doppler_product=0.05, noise_variance=1.0)
        chan = build_channel_fsmc(q, p)
        crossing = math.sqrt(2.0 * math.pi) * 0.05 * math.exp(-1.0)
        assert chan.transition[1, 0] == pytest.approx(crossing / (1.0 - math.exp(-1.0)), rel=1e-12)
        assert chan.transition[0, 1] == pytest.approx(crossing / math.exp(-1.0), rel=1e-12)

    def test_columns_sum_to_one_and_band_structure(self):
        q = design_moe_thresholds(4, 1.5)
        p = ChannelParams(mean_square_gain=1.5, doppler_product=0.05, noise_variance=1.0)
        chan = build_channel_fsmc(q, p)
        np.testing.assert_allclose(chan.transition.sum(axis=0), 1.0, atol=1e-12)
        for k in range(4):
            for l in range(4):
                if abs(k - l) > 1:
                    assert chan.transition[k, l] == 0.0

    def test_stationary_matches_level_probabilities(self):
        q = design_moe_thresholds(4, 1.0)
        p = ChannelParams(mean_square_gain=1.0, doppler_product=0.05, noise_variance=1.0)
        chan = build_channel_fsmc(q, p)
        np.testing.assert_allclose(chan.stationary, level_probabilities(q, 1.0), atol=1e-12)

    def test_fast_fading_rejected_not_clamped(self):
        q = design_moe_thresholds(4, 1.0)
        p = ChannelParams(mean_square_gain=1.0, doppler_product=0.45, noise_variance=1.0)
        with pytest.raises(ModelValidityError, match=r"\d"):
            build_channel_fsmc(q, p)

    def test_transition_matrix_is_frozen(self):
        q = design_moe_thresholds(3, 1.0)
        p = ChannelParams(mean_square_gain=1.0, doppler_product=0.02, noise_variance=1.0)
        chan = build_channel_fsmc(q, p)
        with pytest.raises(ValueError):
            chan.transition[0, 0] = 0.0


class TestFsmcValidation:
    def test_non_column_stochastic_rejected(self):
        bad = np.array([[0.9, 0.5], [0.2, 0.5]])
        with pytest.raises(ModelValidityError, match="column"):
            FsmcModel(state_values=(0.0, 1.0), stationary=(0.5, 0.5), transition=bad)

    def test_out_of_range_entry_rejected(self):
        bad = np.array([[1.2, 0.0], [-0.2, 1.0]])
        with pytest.raises(ModelValidityError):
            FsmcModel(state_values=(0.0, 1.0), stationary=(0.5, 0.5), transition=bad)


class TestSampleGainInLevel:
    def test_draws_stay_inside_the_cell(self):
        q = design_moe_thresholds(4, 1.3)
        rng = np.random.default_rng(7)
        for level in range(1, 5):
            g = sample_gain_in_level(level, q, 1.3, rng, size=4000)
            assert (g >= q.boundaries[level - 1]).all()
            assert (g < q.boundaries[level]).all() or math.isinf(q.boundaries[level])

    def test_distribution_matches_truncated_rayleigh(self):
        q = design_moe_thresholds(4, 1.0)
        law = rayleigh(1.0)
        rng = np.random.default_rng(11)
        for level in (1, 3, 4):
            lo, hi = q.boundaries[level - 1], q.boundaries[level]
            f_lo = law.cdf(lo)
            f_hi = 1.0 if math.isinf(hi) else law.cdf(hi)

            def trunc_cdf(x, f_lo=f_lo, f_hi=f_hi):
                return np.clip((law.cdf(x) - f_lo) / (f_hi - f_lo), 0.0, 1.0)

            g = sample_gain_in_level(level, q, 1.0, rng, size=20000)
            assert stats.kstest(g, trunc_cdf).pvalue > 1e-3

    def test_scalar_draw_and_determinism(self):
        q = design_moe_thresholds(2, 1.0)
        a = sample_gain_in_level(1, q, 1.0, np.random.default_rng(5))
        b = sample_gain_in_level(1, q, 1.0, np.random.default_rng(5))
        assert np.isscalar(a) or np.ndim(a) == 0
        assert a == b

    def test_level_out_of_range(self):
        q = design_moe_thresholds(2, 1.0)
        with pytest.raises(ParameterError):
            sample_gain_in_level(3, q, 1.0, np.random.default_rng(0))
