"""Quantized Rayleigh-fading channel models.

Designs gain quantizers (maximum-output-entropy and minimum-mean-absolute-
error), computes Rayleigh level-occupancy probabilities, and builds the
level-crossing-rate birth-death Markov chain over the quantizer levels.

Conventions fixed here: a quantizer with ``levels`` L cells is described by
L + 1 strictly increasing boundaries with ``boundaries[0] == 0`` and
``boundaries[L] == inf``; the reconstruction value of a level is its lower
boundary; transition matrices are column-stochastic with entry (k, l) equal
to Pr(next = k | current = l).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ModelValidityError, NumericError, ParameterError

_MMAE_MAX_ITERATIONS = 200
_COLUMN_SUM_TOL = 1e-12


class QuantizerMethod(enum.Enum):
    """How a quantizer's boundaries were obtained."""

    MOE = "moe"
    MMAE = "mmae"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class QuantizerSpec:
    """A scalar gain quantizer with contiguous cells.

    Attributes:
        levels: Number L >= 2 of quantization levels.
        boundaries: L + 1 strictly increasing thresholds in gain units,
            starting at exactly 0 and ending at the infinity sentinel.
        method: Design method that produced the boundaries.
    """

    levels: int
    boundaries: tuple[float, ...]
    method: QuantizerMethod

    def __post_init__(self) -> None:
        if self.levels < 2:
            raise ParameterError(f"a quantizer needs at least 2 levels, got {self.levels}")
        if len(self.boundaries) != self.levels + 1:
            raise ParameterError(
                f"expected {self.levels + 1} boundaries for {self.levels} levels, "
                f"got {len(self.boundaries)}"
            )
        if self.boundaries[0] != 0.0:
            raise ParameterError(f"first boundary must be exactly 0, got {self.boundaries[0]!r}")
        if not math.isinf(self.boundaries[-1]):
            raise ParameterError(f"last boundary must be +inf, got {self.boundaries[-1]!r}")
        pairs = zip(self.boundaries[:-1], self.boundaries[1:])
        if not all(lo < hi for lo, hi in pairs):
            raise ParameterError(f"boundaries must be strictly increasing, got {self.boundaries}")

    @property
    def reconstruction_values(self) -> tuple[float, ...]:
        """Representative gain of each level: its lower boundary."""
        return self.boundaries[:-1]


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters of one sensor's fading link.

    Attributes:
        mean_square_gain: E{g^2} of the Rayleigh gain (dimensionless).
        doppler_product: Normalized Doppler f_D * T_s in (0, 0.5).
        noise_variance: Receiver noise variance (same power units as the
            squared transmit amplitudes).
    """

    mean_square_gain: float
    doppler_product: float
    noise_variance: float

    def __post_init__(self) -> None:
        if not self.mean_square_gain > 0.0:
            raise ParameterError(f"mean_square_gain must be > 0, got {self.mean_square_gain!r}")
        if not 0.0 < self.doppler_product < 0.5:
            raise ParameterError(f"doppler_product must be in (0, 0.5), got {self.doppler_product!r}")
        if not self.noise_variance > 0.0:
            raise ParameterError(f"noise_variance must be > 0, got {self.noise_variance!r}")


@dataclass(frozen=True)
class FsmcModel:
    """A finite-state Markov chain over representative state values.

    Attributes:
        state_values: Representative value of each of the M states.
        stationary: Stationary probability of each state.
        transition: M x M column-stochastic matrix; entry (k, l) is
            Pr(next = k | current = l).
    """

    state_values: tuple[float, ...]
    stationary: tuple[float, ...]
    transition: np.ndarray

    def __post_init__(self) -> None:
        m = len(self.state_values)
        tr = np.asarray(self.transition, dtype=float)
        if tr.shape != (m, m):
            raise ModelValidityError(f"transition must be {m}x{m}, got {tr.shape}")
        if np.any(tr < 0.0) or np.any(tr > 1.0):
            k, l = np.unravel_index(int(np.argmin(np.where(tr < 0.0, tr, 1.0 - tr))), tr.shape)
            raise ModelValidityError(
                f"transition[{k}, {l}] = {tr[k, l]!r} lies outside [0, 1]"
            )
        col_err = np.abs(tr.sum(axis=0) - 1.0)
        if np.any(col_err > _COLUMN_SUM_TOL):
            l = int(np.argmax(col_err))
            raise ModelValidityError(
                f"column {l} of transition sums to {tr[:, l].sum()!r}, not 1"
            )
        st = np.asarray(self.stationary, dtype=float)
        if st.shape != (m,) or np.any(st < 0.0) or abs(st.sum() - 1.0) > _COLUMN_SUM_TOL:
            raise ModelValidityError(f"stationary vector invalid: {self.stationary}")
        # Freeze the matrix so the dataclass is safely shareable.
        tr.setflags(write=False)
        object.__setattr__(self, "transition", tr)

    @property
    def n_states(self) -> int:
        return len(self.state_values)


def _check_design_args(levels: int, mean_square_gain: float) -> None:
    if levels < 2:
        raise ParameterError(f"quantizer design needs levels >= 2, got {levels}")
    if not mean_square_gain > 0.0:
        raise ParameterError(f"mean_square_gain must be > 0, got {mean_square_gain!r}")


def design_moe_thresholds(levels: int, mean_square_gain: float) -> QuantizerSpec:
    """Designs boundaries that make the level occupancies maximally uniform.

    The closed form places the interior boundaries so that the first L - 1
    levels each carry probability 1/(L + 1) under Rayleigh fading; the last
    level carries the remaining 2/(L + 1).

    Args:
        levels: Number of quantization levels, at least 2.
        mean_square_gain: E{g^2} of the Rayleigh gain.

    Returns:
        The designed quantizer.
    """
    _check_design_args(levels, mean_square_gain)
    interior = [
        math.sqrt(-mean_square_gain * math.log1p(-j / (levels + 1)))
        for j in range(1, levels)
    ]
    return QuantizerSpec(
        levels=levels,
        boundaries=(0.0, *interior, math.inf),
        method=QuantizerMethod.MOE,
    )


def _rayleigh_cdf(x: float, gamma: float) -> float:
    return -math.expm1(-x * x / gamma)


def _rayleigh_pdf(x: float, gamma: float) -> float:
    return (2.0 * x / gamma) * math.exp(-x * x / gamma)


def _mmae_shoot(first: float, levels: int) -> tuple[float, list[float]]:
    """Chains the stationarity recursion from the first interior boundary.

    For unit mean-square gain, optimal boundaries satisfy
    (b_j - b_{j-1}) f(b_j) = F(b_{j+1}) - F(b_j) for j = 1..L-1 with
    b_0 = 0 and b_L = inf. Given b_1 the interior recursion determines
    b_2..b_{L-1}; the returned residual is the last condition, which uses
    F(b_L) = 1.
    """
    bounds = [0.0, first]
    for j in range(1, levels - 1):
        target = _rayleigh_cdf(bounds[j], 1.0) + (bounds[j] - bounds[j - 1]) * _rayleigh_pdf(
            bounds[j], 1.0
        )
        if target >= 1.0:
            return math.inf, bounds
        bounds.append(math.sqrt(-math.log1p(-target)))
    j = levels - 1
    residual = (bounds[j] - bounds[j - 1]) * _rayleigh_pdf(bounds[j], 1.0) - (
        1.0 - _rayleigh_cdf(bounds[j], 1.0)
    )
    return residual, bounds


def design_mmae_thresholds(levels: int, mean_square_gain: float) -> QuantizerSpec:
    """Designs boundaries minimizing E{|g - reconstruction|} for Rayleigh g.

    Reconstruction is the lower boundary of each cell. The stationarity
    system of the mean-absolute-error objective is solved by shooting on the
    first interior boundary with a bracketed root find; boundaries scale with
    sqrt(mean_square_gain), so the solve runs at unit mean-square gain and is
    rescaled exactly.

    Args:
        levels: Number of quantization levels, at least 2.
        mean_square_gain: E{g^2} of the Rayleigh gain.

    Returns:
        The designed quantizer.

    Raises:
        NumericError: If the root find does not converge within the
            iteration budget; carries the last iterate.
    """
    _check_design_args(levels, mean_square_gain)

    def residual(first: float) -> float:
        value, _ = _mmae_shoot(first, levels)
        return value

    # Bracket the root of the shooting residual on a unit-scale grid.
    grid = np.linspace(1e-3, 2.5, 160)
    lo = hi = None
    prev_x, prev_r = grid[0], residual(grid[0])
    for x in grid[1:]:
        r = residual(x)
        if math.isfinite(prev_r) and (prev_r <= 0.0 <= r or r <= 0.0 <= prev_r):
            lo, hi = prev_x, x
            break
        prev_x, prev_r = x, r
    if lo is None:
        raise NumericError(
            f"could not bracket the MMAE stationarity root for levels={levels}",
            last_iterate=prev_x,
        )
    try:
        first = brentq(
            residual, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=_MMAE_MAX_ITERATIONS
        )
    except RuntimeError as exc:  # scipy signals maxiter exhaustion this way
        raise NumericError(
            f"MMAE root find did not converge within {_MMAE_MAX_ITERATIONS} iterations",
            last_iterate=lo,
        ) from exc
    _, bounds = _mmae_shoot(float(first), levels)
    scale = math.sqrt(mean_square_gain)
    return QuantizerSpec(
        levels=levels,
        boundaries=(0.0, *(scale * b for b in bounds[1:]), math.inf),
        method=QuantizerMethod.MMAE,
    )


def quantizer_mae(q: QuantizerSpec, mean_square_gain: float) -> float:
    """Mean absolute quantization error E{|g - reconstruction|}.

    Closed form for Rayleigh g with lower-boundary reconstruction:
    E{g} - sum_l b_l (F(b_{l+1}) - F(b_l)).
    """
    gamma = mean_square_gain
    if not gamma > 0.0:
        raise ParameterError(f"mean_square_gain must be > 0, got {gamma!r}")
    mean_gain = 0.5 * math.sqrt(math.pi * gamma)
    phi = level_probabilities(q, gamma)
    recon = np.asarray(q.reconstruction_values)
    return float(mean_gain - float(recon @ phi))


def level_probabilities(q: QuantizerSpec, mean_square_gain: float) -> np.ndarray:
    """Probability that a Rayleigh gain falls in each quantizer level.

    Args:
        q: Quantizer whose cells partition [0, inf).
        mean_square_gain: E{g^2} of the Rayleigh gain.

    Returns:
        Length-L vector summing to 1.
    """
    if not mean_square_gain > 0.0:
        raise ParameterError(f"mean_square_gain must be > 0, got {mean_square_gain!r}")
    b = np.asarray(q.boundaries)
    surv = np.exp(-np.square(b) / mean_square_gain)
    surv[-1] = 0.0  # e^{-inf} without the inf*0 warning path
    return surv[:-1] - surv[1:]


def _crossing_rate(squared_level: float, gamma: float, doppler: float) -> float:
    """Expected per-slot rate of the envelope crossing sqrt(squared_level)."""
    return math.sqrt(2.0 * math.pi * squared_level / gamma) * doppler * math.exp(
        -squared_level / gamma
    )


def build_channel_fsmc(q: QuantizerSpec, p: ChannelParams) -> FsmcModel:
    """Builds the birth-death chain over quantizer levels from crossing rates.

    Up-transitions from level l use the crossing rate of its upper boundary
    divided by the level's occupancy; down-transitions use the lower
    boundary. Only adjacent levels communicate; the stationary vector is the
    Rayleigh occupancy, which the construction preserves exactly.

    Args:
        q: Gain quantizer defining the levels.
        p: Channel parameters (mean-square gain and Doppler product).

    Returns:
        Column-stochastic chain with the quantizer's reconstruction values
        as state values.

    Raises:
        ModelValidityError: If any implied probability leaves [0, 1] (the
            Doppler product is too large for the quantizer); the chain is
            never silently repaired.
    """
    gamma = p.mean_square_gain
    phi = level_probabilities(q, gamma)
    levels = q.levels
    up = np.zeros(levels)
    down = np.zeros(levels)
    for l in range(levels - 1):
        up[l] = _crossing_rate(q.boundaries[l + 1] ** 2, gamma, p.doppler_product) / phi[l]
    for l in range(1, levels):
        down[l] = _crossing_rate(q.boundaries[l] ** 2, gamma, p.doppler_product) / phi[l]

    transition = np.zeros((levels, levels))
    for l in range(levels):
        if l + 1 < levels:
            _check_probability(up[l], l + 1, l)
            transition[l + 1, l] = up[l]
        if l - 1 >= 0:
            _check_probability(down[l], l - 1, l)
            transition[l - 1, l] = down[l]
        stay = 1.0 - up[l] - down[l]
        _check_probability(stay, l, l)
        transition[l, l] = stay
    return FsmcModel(
        state_values=q.reconstruction_values,
        stationary=tuple(float(x) for x in phi),
        transition=transition,
    )


def _check_probability(value: float, k: int, l: int) -> None:
    if not 0.0 <= value <= 1.0:
        raise ModelValidityError(
            f"implied transition probability ({k}, {l}) = {value!r} lies outside "
            f"[0, 1]; the Doppler product is too large for this quantizer"
        )


def sample_gain_in_level(
    level: int,
    q: QuantizerSpec,
    mean_square_gain: float,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draws a full-precision gain from the Rayleigh law truncated to a level.

    Inverse-CDF sampling on the survival function, so draws land in
    [boundaries[level-1], boundaries[level]) exactly.

    Args:
        level: 1-based level index in 1..L.
        q: Quantizer defining the level support.
        mean_square_gain: E{g^2} of the Rayleigh gain.
        rng: Random generator owned by the caller.
        size: Optional number of draws; a scalar is returned when omitted.

    Returns:
        A gain (or array of gains) inside the level's cell.
    """
    if not 1 <= level <= q.levels:
        raise ParameterError(f"level must be in 1..{q.levels}, got {level}")
    gamma = mean_square_gain
    lo, hi = q.boundaries[level - 1], q.boundaries[level]
    s_lo = math.exp(-lo * lo / gamma)
    s_hi = 0.0 if math.isinf(hi) else math.exp(-hi * hi / gamma)
    u = rng.random(size) if size is not None else rng.random()
    s = s_lo - u * (s_lo - s_hi)
    return np.sqrt(-gamma * np.log(s))
