"""Closed-form detection divergence and the per-sensor transmit reward.

Under the Gaussian moment-matching approximation, the divergence between the
received-signal densities under the two hypotheses is a sum of two rational
terms in the received power. This module evaluates that form pointwise,
integrates it in closed form over quantizer cells of a Rayleigh
squared-gain density (via exponential integrals, evaluated in an
overflow-free scaled form), mixes the per-level values through the channel
chain one step ahead, and assembles the immediate reward of spending battery
cells on transmission.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import NumericError, ParameterError
from .fading_channel import FsmcModel, QuantizerSpec
from .special import exp_integral_e1_scaled, exp_integral_ei

__all__ = [
    "JCoefficients",
    "RewardContext",
    "RewardOptions",
    "RewardTable",
    "build_reward_table",
    "exp_integral_ei",
    "immediate_reward",
    "j_bar_level",
    "j_hat_all_levels",
    "j_hat_level",
    "j_pointwise",
]

# Beyond this value of noise_var / (coef * x * gamma) the two closed-form
# pieces cancel catastrophically; the slice integral is evaluated by
# quadrature instead.
_CONDITIONING_LIMIT = 1e6


@dataclass(frozen=True)
class JCoefficients:
    """Coefficients of the rational divergence form, derived from the rates.

    With transmit rates (p_f, p_d), the divergence at received power u is
    (s + a*u)/(s + b*u) + (s + c*u)/(s + d*u) for noise variance s.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < -1e-12:
            raise ParameterError(f"divergence coefficients must be nonnegative: {self}")

    @classmethod
    def from_rates(cls, p_f: float, p_d: float) -> "JCoefficients":
        """Builds the coefficients from the censoring transmit rates."""
        if not 0.0 <= p_f <= 1.0 or not 0.0 <= p_d <= 1.0:
            raise ParameterError(f"rates must lie in [0, 1], got ({p_f!r}, {p_d!r})")
        return cls(
            a=p_f * (1.0 - p_d) + p_d * (p_d - p_f),
            b=p_d * (1.0 - p_d),
            c=p_d * (1.0 - p_f) - p_f * (p_d - p_f),
            d=p_f * (1.0 - p_f),
        )

    @property
    def saturation(self) -> float:
        """Large-power limit a/b + c/d (infinite when a rate is degenerate)."""
        first = self.a / self.b if self.b > 0.0 else math.inf
        second = self.c / self.d if self.d > 0.0 else math.inf
        return first + second


def j_pointwise(g, alpha, coeffs: JCoefficients, noise_var: float):
    """Divergence at a known gain and transmit amplitude.

    Equals exactly 2 when the amplitude is zero or the rates coincide, and
    increases with the received power toward the saturation limit.

    Args:
        g: Channel gain(s), nonnegative.
        alpha: Transmit amplitude(s), nonnegative.
        coeffs: Rational-form coefficients.
        noise_var: Receiver noise variance in the same power units as
            (g * alpha)^2.

    Returns:
        Scalar or array divergence value(s), >= 2.
    """
    u = np.square(np.asarray(g, dtype=float) * np.asarray(alpha, dtype=float))
    s = noise_var
    value = (s + coeffs.a * u) / (s + coeffs.b * u) + (s + coeffs.c * u) / (s + coeffs.d * u)
    return value if value.ndim else float(value)


def _term_antiderivative(
    y: float, x: float, num: float, den: float, gamma: float, noise_var: float
) -> float:
    """Antiderivative at y of (s + num*x*y)/(s + den*x*y) * (1/gamma) e^{-y/gamma}."""
    if math.isinf(y):
        return 0.0
    t = y / gamma
    if den == 0.0:
        return -math.exp(-t) * (1.0 + (num * x / noise_var) * (y + gamma))
    a = noise_var / (den * x * gamma)
    scaled = exp_integral_e1_scaled(t + a)
    return -math.exp(-t) * (num / den + (noise_var * (den - num) / (den**2 * x * gamma)) * scaled)


def _term_slice(
    x: float, y_lo: float, y_hi: float, num: float, den: float, gamma: float, noise_var: float
) -> float:
    """Integral of one rational term against the squared-gain density over a cell."""
    if den > 0.0 and noise_var / (den * x * gamma) > _CONDITIONING_LIMIT:
        # Near-degenerate denominator: the closed form cancels destructively,
        # so integrate directly.
        def integrand(y: float) -> float:
            return (
                (noise_var + num * x * y)
                / (noise_var + den * x * y)
                * math.exp(-y / gamma)
                / gamma
            )

        value, _ = quad(integrand, y_lo, y_hi, epsrel=1e-10, limit=200)
        return value
    return _term_antiderivative(y_hi, x, num, den, gamma, noise_var) - _term_antiderivative(
        y_lo, x, num, den, gamma, noise_var
    )


def j_hat_level(
    level: int,
    alpha: float,
    q: QuantizerSpec,
    coeffs: JCoefficients,
    mean_square_gain: float,
    noise_var: float,
    *,
    normalization: str = "slice",
    omega_form: str = "derived",
) -> float:
    """Divergence mass of one quantizer level at a given amplitude.

    The default "slice" normalization returns the unconditional contribution
    of the level — the integral of the divergence against the squared-gain
    density over the level's cell — so the values sum over levels to the full
    expectation and reduce to twice the level occupancy at zero amplitude.
    The "conditional" normalization divides by the level occupancy, giving
    the conditional expectation within the cell.

    ``omega_form="literal"`` evaluates the closed form with the squared-gain
    scale inverted (an alternative printed convention, kept for comparison);
    the default "derived" form is the one validated against quadrature.

    Args:
        level: 1-based level index in 1..L.
        alpha: Transmit amplitude, >= 0.
        q: Gain quantizer; the top cell extends to infinity and is handled
            by the analytic limit.
        coeffs: Rational-form coefficients.
        mean_square_gain: E{g^2} of the Rayleigh gain.
        noise_var: Receiver noise variance.

    Returns:
        The level's divergence mass (or conditional mean).

    Raises:
        NumericError: If the result is not finite.
    """
    if not 1 <= level <= q.levels:
        raise ParameterError(f"level must be in 1..{q.levels}, got {level}")
    if alpha < 0.0:
        raise ParameterError(f"amplitude must be >= 0, got {alpha!r}")
    if normalization not in ("slice", "conditional"):
        raise ParameterError(f"unknown normalization {normalization!r}")
    if omega_form not in ("derived", "literal"):
        raise ParameterError(f"unknown omega_form {omega_form!r}")

    gamma = mean_square_gain if omega_form == "derived" else 1.0 / mean_square_gain
    lo, hi = q.boundaries[level - 1], q.boundaries[level]
    occupancy = math.exp(-lo * lo / gamma) - (
        0.0 if math.isinf(hi) else math.exp(-hi * hi / gamma)
    )
    if alpha == 0.0:
        mass = 2.0 * occupancy
    else:
        x = alpha * alpha
        y_lo, y_hi = lo * lo, (math.inf if math.isinf(hi) else hi * hi)
        mass = _term_slice(x, y_lo, y_hi, coeffs.a, coeffs.b, gamma, noise_var) + _term_slice(
            x, y_lo, y_hi, coeffs.c, coeffs.d, gamma, noise_var
        )
    if not math.isfinite(mass):
        raise NumericError(
            f"level divergence is not finite at level={level}, alpha={alpha!r}"
        )
    if normalization == "conditional":
        return mass / occupancy
    return mass


def j_hat_all_levels(
    alpha: float,
    q: QuantizerSpec,
    coeffs: JCoefficients,
    mean_square_gain: float,
    noise_var: float,
    **kwargs,
) -> np.ndarray:
    """Vector of ``j_hat_level`` over all levels at one amplitude."""
    return np.array(
        [
            j_hat_level(l, alpha, q, coeffs, mean_square_gain, noise_var, **kwargs)
            for l in range(1, q.levels + 1)
        ]
    )


def j_bar_level(level: int, alpha: float, channel: FsmcModel, j_hat: np.ndarray) -> float:
    """Expected next-slot divergence given the current level.

    Mixes the per-level values with the channel chain's column for the
    current level; with a birth-death chain only the level itself and its
    neighbors contribute.

    Args:
        level: 1-based current level index.
        alpha: Amplitude the ``j_hat`` vector was computed at (documentation
            of intent; not used in the mixing).
        channel: Level chain, column-stochastic.
        j_hat: Per-level divergence values at the same amplitude.
    """
    if not 1 <= level <= channel.n_states:
        raise ParameterError(f"level must be in 1..{channel.n_states}, got {level}")
    j_hat = np.asarray(j_hat, dtype=float)
    if j_hat.shape != (channel.n_states,):
        raise ParameterError(
            f"expected {channel.n_states} per-level values, got shape {j_hat.shape}"
        )
    return float(channel.transition[:, level - 1] @ j_hat)


@dataclass(frozen=True)
class RewardOptions:
    """Switches between documented variants of the reward construction.

    Attributes:
        normalization: "slice" (level masses; default) or "conditional"
            (per-level conditional means) for the cell integrals.
        conditioning: "state" (reward depends on the observed previous-slot
            level; default) or "averaged" (occupancy-weighted over levels,
            making the reward level-independent).
        omega_form: "derived" (default) or "literal" closed-form variant.
    """

    normalization: str = "slice"
    conditioning: str = "state"
    omega_form: str = "derived"

    def __post_init__(self) -> None:
        if self.normalization not in ("slice", "conditional"):
            raise ParameterError(f"unknown normalization {self.normalization!r}")
        if self.conditioning not in ("state", "averaged"):
            raise ParameterError(f"unknown conditioning {self.conditioning!r}")
        if self.omega_form not in ("derived", "literal"):
            raise ParameterError(f"unknown omega_form {self.omega_form!r}")


@dataclass(frozen=True)
class RewardContext:
    """Everything needed to price one sensor's transmissions.

    Attributes:
        quantizer: The sensor's gain quantizer.
        channel: Its level chain.
        coeffs: Divergence coefficients from its censoring rates.
        mean_square_gain: E{g^2} of its fading.
        noise_var: Receiver noise variance (power units of amplitude^2).
        amplitudes: Transmit amplitude per spend level c = 0..K.
        transmit_prior: Marginal transmit probability of the sensor.
        options: Variant switches.
    """

    quantizer: QuantizerSpec
    channel: FsmcModel
    coeffs: JCoefficients
    mean_square_gain: float
    noise_var: float
    amplitudes: tuple[float, ...]
    transmit_prior: float
    options: RewardOptions = field(default_factory=RewardOptions)


@dataclass(frozen=True)
class RewardTable:
    """Immediate reward per (previous-slot level, spend cells).

    Attributes:
        values: Array of shape (levels, spends); column 0 is identically 0
            because silence is not rewarded.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise NumericError("reward table contains non-finite entries")
        if np.any(values[:, 0] != 0.0):
            raise ParameterError("the zero-spend column must be identically 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def write_csv(self, path, sensor_index: int) -> None:
        """Dumps the table as rows of sensor, level, spend_cells, reward."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sensor", "level", "spend_cells", "reward"])
            levels, spends = self.values.shape
            for l in range(levels):
                for c in range(spends):
                    writer.writerow(
                        [sensor_index, l + 1, c, format(self.values[l, c], ".12g")]
                    )


def immediate_reward(level: int, cells: int, ctx: RewardContext) -> float:
    """Reward for prescribing a spend at an observed previous-slot level.

    Spending nothing earns 0 (the constant divergence floor of silence is
    not counted); a positive spend earns the transmit prior times the
    one-step-ahead expected divergence at the spend's amplitude.

    Args:
        level: 1-based previous-slot gain level.
        cells: Spend in battery cells; feasibility is the caller's job.
        ctx: Sensor pricing context.
    """
    if cells < 0 or cells >= len(ctx.amplitudes):
        raise ParameterError(f"cells must be in 0..{len(ctx.amplitudes) - 1}, got {cells}")
    if cells == 0:
        return 0.0
    alpha = ctx.amplitudes[cells]
    j_hat = j_hat_all_levels(
        alpha,
        ctx.quantizer,
        ctx.coeffs,
        ctx.mean_square_gain,
        ctx.noise_var,
        normalization=ctx.options.normalization,
        omega_form=ctx.options.omega_form,
    )
    if ctx.options.conditioning == "averaged":
        phi = np.asarray(ctx.channel.stationary)
        mixed = float(phi @ np.array(
            [j_bar_level(l, alpha, ctx.channel, j_hat) for l in range(1, ctx.quantizer.levels + 1)]
        ))
        return ctx.transmit_prior * mixed
    return ctx.transmit_prior * j_bar_level(level, alpha, ctx.channel, j_hat)


def build_reward_table(ctx: RewardContext) -> RewardTable:
    """Tabulates ``immediate_reward`` over all (level, spend) pairs."""
    levels = ctx.quantizer.levels
    spends = len(ctx.amplitudes)
    values = np.zeros((levels, spends))
    for c in range(1, spends):
        alpha = ctx.amplitudes[c]
        j_hat = j_hat_all_levels(
            alpha,
            ctx.quantizer,
            ctx.coeffs,
            ctx.mean_square_gain,
            ctx.noise_var,
            normalization=ctx.options.normalization,
            omega_form=ctx.options.omega_form,
        )
        j_bar = np.array(
            [j_bar_level(l, alpha, ctx.channel, j_hat) for l in range(1, levels + 1)]
        )
        if ctx.options.conditioning == "averaged":
            phi = np.asarray(ctx.channel.stationary)
            values[:, c] = ctx.transmit_prior * float(phi @ j_bar)
        else:
            values[:, c] = ctx.transmit_prior * j_bar
    return RewardTable(values=values)
