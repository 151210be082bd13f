"""Local detector rates, censoring statistics, and deployment averaging.

Oracles: scipy.stats.norm for the Gaussian shift family, and direct
quadrature over the deployment radius (a change of variables away from the
intensity-density route the implementation integrates).
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from wsnpower import (
    CensorStats,
    DeploymentModel,
    ModelValidityError,
    ParameterError,
    SensingParams,
    censor_stats_fixed,
    censor_stats_random_disk,
    sample_observation,
)

SNR_3DB_AMPLITUDE = 10.0 ** (3.0 / 20.0)  # 1.412537...


def params_3db(**kwargs) -> SensingParams:
    kwargs.setdefault("pd_bar", 0.9)
    return SensingParams.from_snr_db(3.0, **kwargs)


class TestSensingParams:
    def test_snr_conversion(self):
        p = params_3db()
        assert p.signal_amplitude == pytest.approx(SNR_3DB_AMPLITUDE, rel=1e-14)
        p2 = SensingParams.from_snr_db(3.0, obs_noise_var=4.0, pd_bar=0.9)
        assert p2.signal_amplitude == pytest.approx(2.0 * SNR_3DB_AMPLITUDE, rel=1e-14)

    def test_exactly_one_censoring_mode(self):
        with pytest.raises(ParameterError):
            SensingParams(signal_amplitude=1.0, obs_noise_var=1.0, prior_null=0.5, prior_alt=0.5)
        with pytest.raises(ParameterError):
            SensingParams(
                signal_amplitude=1.0,
                obs_noise_var=1.0,
                prior_null=0.5,
                prior_alt=0.5,
                pd_bar=0.9,
                threshold=0.0,
            )

    def test_priors_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            SensingParams(
                signal_amplitude=1.0, obs_noise_var=1.0, prior_null=0.6, prior_alt=0.5, pd_bar=0.9
            )


class TestFixedCensoring:
    def test_false_alarm_rate_against_norm(self):
        # Fixed-detection censoring: P_f = Q(Qinv(pd) + A / sigma_v).
        c = censor_stats_fixed(params_3db())
        ref = stats.norm.sf(stats.norm.ppf(0.1) + SNR_3DB_AMPLITUDE)
        assert c.p_f == pytest.approx(float(ref), rel=1e-12)
        assert c.p_f == pytest.approx(0.4479, abs=5e-5)
        assert c.p_d == 0.9

    def test_priors_weight_the_transmit_rate(self):
        c = censor_stats_fixed(params_3db())
        assert c.transmit_prior == pytest.approx(0.5 * c.p_f + 0.5 * 0.9, abs=1e-15)
        assert c.transmit_prior == pytest.approx(0.67395, abs=5e-5)
        assert c.silence_prior == pytest.approx(1.0 - c.transmit_prior, abs=1e-15)

    def test_zero_threshold_symmetry(self):
        # The midpoint decision rule: P_f = Q(A / 2 sigma), P_d = 1 - P_f.
        p = SensingParams(
            signal_amplitude=1.3, obs_noise_var=1.0, prior_null=0.5, prior_alt=0.5, threshold=0.0
        )
        c = censor_stats_fixed(p)
        assert c.p_f == pytest.approx(float(stats.norm.sf(0.65)), rel=1e-12)
        assert c.p_d == pytest.approx(1.0 - c.p_f, abs=1e-14)

    def test_threshold_mode_against_norm(self):
        # Transmit iff the log-likelihood ratio (y A - A^2/2) / sigma^2
        # clears tau, i.e. y >= sigma^2 tau / A + A / 2.
        a, tau, var = 1.7, 0.4, 1.3
        p = SensingParams(
            signal_amplitude=a, obs_noise_var=var, prior_null=0.5, prior_alt=0.5, threshold=tau
        )
        c = censor_stats_fixed(p)
        y_star = var * tau / a + a / 2.0
        sigma = math.sqrt(var)
        assert c.p_f == pytest.approx(float(stats.norm.sf(y_star / sigma)), rel=1e-12)
        assert c.p_d == pytest.approx(float(stats.norm.sf((y_star - a) / sigma)), rel=1e-12)

    def test_false_alarm_decreases_with_snr(self):
        rates = [
            censor_stats_fixed(SensingParams.from_snr_db(snr, pd_bar=0.9)).p_f
            for snr in (0.0, 3.0, 6.0, 10.0)
        ]
        assert all(a > b for a, b in zip(rates, rates[1:]))


class TestCensorStatsValidation:
    def test_rates_outside_unit_interval_rejected(self):
        with pytest.raises(ModelValidityError):
            CensorStats(p_f=-0.1, p_d=0.9, silence_prior=0.5, transmit_prior=0.5)

    def test_false_alarm_above_detection_rejected(self):
        with pytest.raises(ModelValidityError):
            CensorStats(p_f=0.95, p_d=0.9, silence_prior=0.5, transmit_prior=0.5)


class TestRandomDiskDeployment:
    def disk(self, power=6.0, r0=1.0, r1=3.0) -> DeploymentModel:
        return DeploymentModel(kind="random_disk", source_power=power, r0_m=r0, r1_m=r1)

    def test_intensity_pdf_normalizes(self):
        d = self.disk()
        z_lo, z_hi = d.intensity_bounds()
        mass, _ = integrate.quad(d.intensity_pdf, z_lo, z_hi)
        assert mass == pytest.approx(1.0, rel=1e-9)

    def test_false_alarm_matches_radius_quadrature(self):
        # Independent route: average Q(Qinv(pd) + (P0 / r^2) / sigma) over
        # r uniform on the annulus.
        p = params_3db()
        d = self.disk()

        def rate_at(r):
            z = d.source_power / r**2
            return float(stats.norm.sf(stats.norm.ppf(0.1) + z / math.sqrt(p.obs_noise_var)))

        ref, err = integrate.quad(rate_at, d.r0_m, d.r1_m)
        ref /= d.r1_m - d.r0_m
        assert err < 1e-9
        c = censor_stats_random_disk(p, d)
        assert c.p_f == pytest.approx(ref, rel=1e-6)
        assert c.p_d == 0.9

    def test_thin_shell_approaches_fixed_deployment(self):
        r = 2.0
        d = self.disk(power=5.0, r0=r * (1 - 5e-4), r1=r * (1 + 5e-4))
        p = params_3db()
        c_disk = censor_stats_random_disk(p, d)
        fixed_amp = SensingParams(
            signal_amplitude=5.0 / r**2,
            obs_noise_var=p.obs_noise_var,
            prior_null=0.5,
            prior_alt=0.5,
            pd_bar=0.9,
        )
        c_fixed = censor_stats_fixed(fixed_amp)
        assert c_disk.p_f == pytest.approx(c_fixed.p_f, rel=1e-4)

    def test_strong_source_degenerates_cleanly(self):
        # At 84 dBW over a 1..100 m annulus every location censors the null
        # almost surely; the statistics must stay valid, not overflow.
        d = DeploymentModel(
            kind="random_disk", source_power=10.0**8.4, r0_m=1.0, r1_m=100.0
        )
        c = censor_stats_random_disk(params_3db(), d)
        assert 0.0 <= c.p_f <= c.p_d <= 1.0
        assert c.p_f == pytest.approx(0.0, abs=1e-12)
        assert c.p_d == 0.9

    def test_validation(self):
        with pytest.raises(ParameterError):
            DeploymentModel(kind="ring")
        with pytest.raises(ParameterError):
            DeploymentModel(kind="random_disk", source_power=1.0, r0_m=3.0, r1_m=1.0)
        with pytest.raises(ParameterError):
            DeploymentModel(
                kind="random_disk", source_power=1.0, r0_m=1.0, r1_m=2.0, path_loss_exp=4.0
            )
        with pytest.raises(ParameterError):
            censor_stats_random_disk(params_3db(), DeploymentModel.fixed())


class TestSampleObservation:
    def test_fixed_moments(self):
        p = params_3db()
        rng = np.random.default_rng(3)
        y0 = sample_observation(0, p, DeploymentModel.fixed(), rng, size=60000)
        y1 = sample_observation(1, p, DeploymentModel.fixed(), rng, size=60000)
        assert y0.mean() == pytest.approx(0.0, abs=0.02)
        assert y1.mean() == pytest.approx(p.signal_amplitude, abs=0.02)
        assert y0.var() == pytest.approx(p.obs_noise_var, rel=0.03)

    def test_scalar_and_validation(self):
        p = params_3db()
        y = sample_observation(1, p, DeploymentModel.fixed(), np.random.default_rng(0))
        assert np.ndim(y) == 0
        with pytest.raises(ParameterError):
            sample_observation(2, p, DeploymentModel.fixed(), np.random.default_rng(0))
