"""Local observation statistics under likelihood-ratio censoring.

A sensor observes a known signal in Gaussian noise and transmits only when
its log-likelihood ratio clears a local threshold. This module computes the
resulting transmit probabilities under each hypothesis (the local false-alarm
and detection rates), the induced silence/transmit priors, and their
integral forms when sensors are deployed uniformly at random in an annulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ModelValidityError, NumericError, ParameterError
from .special import gaussian_q, gaussian_q_inv

_QUADRATURE_REL_TOL = 1e-8


@dataclass(frozen=True)
class SensingParams:
    """Observation model and censoring rule of one sensor.

    Exactly one of ``pd_bar`` (fixed detection rate) or ``threshold`` (fixed
    likelihood-ratio threshold) selects the censoring mode.

    Attributes:
        signal_amplitude: Known signal amplitude A under the alternative.
        obs_noise_var: Observation noise variance.
        prior_null: Prior probability of the null hypothesis.
        prior_alt: Prior probability of the alternative hypothesis.
        pd_bar: Target detection rate in (0, 1), or None.
        threshold: Log-likelihood-ratio censoring threshold, or None.
    """

    signal_amplitude: float
    obs_noise_var: float
    prior_null: float
    prior_alt: float
    pd_bar: float | None = None
    threshold: float | None = None

    def __post_init__(self) -> None:
        if not self.signal_amplitude > 0.0:
            raise ParameterError(f"signal_amplitude must be > 0, got {self.signal_amplitude!r}")
        if not self.obs_noise_var > 0.0:
            raise ParameterError(f"obs_noise_var must be > 0, got {self.obs_noise_var!r}")
        if min(self.prior_null, self.prior_alt) < 0.0 or abs(
            self.prior_null + self.prior_alt - 1.0
        ) > 1e-12:
            raise ParameterError(
                f"priors must be nonnegative and sum to 1, got "
                f"({self.prior_null!r}, {self.prior_alt!r})"
            )
        if (self.pd_bar is None) == (self.threshold is None):
            raise ParameterError("set exactly one of pd_bar or threshold")
        if self.pd_bar is not None and not 0.0 < self.pd_bar < 1.0:
            raise ParameterError(f"pd_bar must be in (0, 1), got {self.pd_bar!r}")

    @classmethod
    def from_snr_db(
        cls,
        snr_s_db: float,
        *,
        obs_noise_var: float = 1.0,
        prior_null: float = 0.5,
        prior_alt: float = 0.5,
        pd_bar: float | None = None,
        threshold: float | None = None,
    ) -> "SensingParams":
        """Builds params from the observation SNR 20*log10(A/sigma_v)."""
        amplitude = math.sqrt(obs_noise_var) * 10.0 ** (snr_s_db / 20.0)
        return cls(
            signal_amplitude=amplitude,
            obs_noise_var=obs_noise_var,
            prior_null=prior_null,
            prior_alt=prior_alt,
            pd_bar=pd_bar,
            threshold=threshold,
        )


@dataclass(frozen=True)
class DeploymentModel:
    """Where sensors sit relative to the observed source.

    Attributes:
        kind: "fixed" (amplitude taken from SensingParams) or "random_disk"
            (sensors uniform in distance over an annulus around the source).
        source_power: Source intensity P0 for random deployment.
        r0_m: Inner deployment radius in meters.
        r1_m: Outer deployment radius in meters.
        path_loss_exp: Path-loss exponent; the annulus density used here
            requires the inverse-square value 2.
    """

    kind: str
    source_power: float | None = None
    r0_m: float | None = None
    r1_m: float | None = None
    path_loss_exp: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "random_disk"):
            raise ParameterError(f"kind must be 'fixed' or 'random_disk', got {self.kind!r}")
        if self.kind == "random_disk":
            if self.source_power is None or not self.source_power > 0.0:
                raise ParameterError(f"source_power must be > 0, got {self.source_power!r}")
            if (
                self.r0_m is None
                or self.r1_m is None
                or not 0.0 < self.r0_m < self.r1_m
            ):
                raise ParameterError(
                    f"radii must satisfy 0 < r0 < r1, got ({self.r0_m!r}, {self.r1_m!r})"
                )
            if self.path_loss_exp != 2.0:
                raise ParameterError(
                    f"the annulus intensity density assumes a path-loss exponent of 2, "
                    f"got {self.path_loss_exp!r}"
                )

    @classmethod
    def fixed(cls) -> "DeploymentModel":
        return cls(kind="fixed")

    def intensity_bounds(self) -> tuple[float, float]:
        """Smallest and largest received intensity over the annulus."""
        return self.source_power / self.r1_m**2, self.source_power / self.r0_m**2

    def intensity_pdf(self, z) -> np.ndarray | float:
        """Density of the received intensity z = P0 / r^2, r uniform."""
        return math.sqrt(self.source_power) / (
            2.0 * np.power(z, 1.5) * (self.r1_m - self.r0_m)
        )


@dataclass(frozen=True)
class CensorStats:
    """Transmit behavior induced by the censoring rule.

    Attributes:
        p_f: Transmit probability under the null (local false-alarm rate).
        p_d: Transmit probability under the alternative (local detection
            rate).
        silence_prior: Marginal probability of staying silent.
        transmit_prior: Marginal probability of transmitting.
    """

    p_f: float
    p_d: float
    silence_prior: float
    transmit_prior: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_f <= 1.0 or not 0.0 <= self.p_d <= 1.0:
            raise ModelValidityError(f"rates must lie in [0, 1]: ({self.p_f!r}, {self.p_d!r})")
        if self.p_f > self.p_d + 1e-12:
            raise ModelValidityError(
                f"false-alarm rate {self.p_f!r} exceeds detection rate {self.p_d!r}"
            )
        if abs(self.silence_prior + self.transmit_prior - 1.0) > 1e-12:
            raise ModelValidityError("silence and transmit priors must sum to 1")


def _stats_from_rates(p: SensingParams, p_f: float, p_d: float) -> CensorStats:
    transmit = p.prior_null * p_f + p.prior_alt * p_d
    return CensorStats(
        p_f=p_f, p_d=p_d, silence_prior=1.0 - transmit, transmit_prior=transmit
    )


def _rates_at_amplitude(p: SensingParams, amplitude: float) -> tuple[float, float]:
    s = amplitude / math.sqrt(p.obs_noise_var)
    if p.pd_bar is not None:
        return gaussian_q(gaussian_q_inv(p.pd_bar) + s), p.pd_bar
    half_snr = amplitude * amplitude / (2.0 * p.obs_noise_var)
    return (
        gaussian_q((p.threshold + half_snr) / s),
        gaussian_q((p.threshold - half_snr) / s),
    )


def censor_stats_fixed(p: SensingParams) -> CensorStats:
    """Censoring statistics for a sensor at a known, fixed amplitude.

    In fixed-threshold mode both rates follow from the Gaussian shift family;
    in fixed-detection mode the threshold is never materialized and the
    false-alarm rate comes from the closed form Q(Qinv(pd_bar) + A/sigma_v).
    """
    p_f, p_d = _rates_at_amplitude(p, p.signal_amplitude)
    return _stats_from_rates(p, p_f, p_d)


def censor_stats_random_disk(p: SensingParams, d: DeploymentModel) -> CensorStats:
    """Censoring statistics averaged over a random annulus deployment.

    The transmit rates are integrated against the received-intensity density
    with adaptive quadrature; the intensity plays the role of the known
    amplitude at each location.

    Raises:
        NumericError: If the quadrature cannot reach its relative tolerance;
            carries the achieved tolerance.
    """
    if d.kind != "random_disk":
        raise ParameterError(f"random-disk statistics need kind='random_disk', got {d.kind!r}")
    z_lo, z_hi = d.intensity_bounds()

    def integrate(which: int) -> float:
        def integrand(z: float) -> float:
            return _rates_at_amplitude(p, z)[which] * d.intensity_pdf(z)

        value, abserr = quad(integrand, z_lo, z_hi, epsrel=_QUADRATURE_REL_TOL, limit=200)
        if value > 0.0 and abserr > 1e-6 * max(value, 1e-12):
            raise NumericError(
                "intensity quadrature did not reach its tolerance",
                achieved_tol=abserr / max(value, 1e-300),
            )
        return min(max(value, 0.0), 1.0)

    p_f = integrate(0)
    p_d = p.pd_bar if p.pd_bar is not None else integrate(1)
    return _stats_from_rates(p, p_f, min(1.0, max(p_d, p_f)))


def sample_observation(
    h: int,
    p: SensingParams,
    d: DeploymentModel,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draws an observation: signal (if the alternative holds) plus noise.

    Under random deployment each draw gets its own location, hence its own
    received amplitude.

    Args:
        h: True hypothesis, 0 or 1.
        p: Observation model.
        d: Deployment; "fixed" uses the known amplitude.
        rng: Random generator owned by the caller.
        size: Optional number of draws; a scalar is returned when omitted.
    """
    if h not in (0, 1):
        raise ParameterError(f"hypothesis must be 0 or 1, got {h!r}")
    n = 1 if size is None else size
    noise = rng.normal(0.0, math.sqrt(p.obs_noise_var), size=n)
    if h == 1:
        if d.kind == "fixed":
            z = np.full(n, p.signal_amplitude)
        else:
            r = rng.uniform(d.r0_m, d.r1_m, size=n)
            z = d.source_power / np.square(r)
        noise = noise + z
    return noise if size is not None else float(noise[0])
