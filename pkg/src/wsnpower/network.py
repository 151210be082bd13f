"""Whole-network model: per-sensor components plus fusion-side quantities.

A sensor bundles its fading quantizer and level chain, battery and harvest
models, sensing parameters, deployment geometry, and the censoring rates
derived from them. The network adds the receiver noise floor, the total
average transmit-power budget, the discount factor, and the reward-variant
switches, and can price every sensor's actions as reward tables.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

from .divergence_reward import JCoefficients, RewardContext, RewardOptions, RewardTable, build_reward_table
from .energy_model import BatterySpec, HarvestSpec
from .errors import ParameterError, ScopeError
from .fading_channel import ChannelParams, FsmcModel, QuantizerSpec
from .sensing import CensorStats, DeploymentModel, SensingParams


@dataclass(frozen=True)
class SensorModel:
    """One sensor's physical and statistical description.

    Attributes:
        quantizer: Gain quantizer (L levels).
        channel: Gain-level chain matched to the quantizer.
        channel_params: Fading scale / Doppler / quantizer design inputs.
        battery: Cell-quantized battery (capacity K cells).
        harvest: Harvest-state chain and per-state cell income.
        sensing: Local detector parameters.
        deployment: Source-placement model for the local SNR.
        censor: Censoring transmit rates implied by sensing + deployment.
    """

    quantizer: QuantizerSpec
    channel: FsmcModel
    channel_params: ChannelParams
    battery: BatterySpec
    harvest: HarvestSpec
    sensing: SensingParams
    deployment: DeploymentModel
    censor: CensorStats

    def __post_init__(self) -> None:
        if self.channel.n_states != self.quantizer.levels:
            raise ParameterError(
                f"channel chain has {self.channel.n_states} states but the "
                f"quantizer has {self.quantizer.levels} levels"
            )

    @property
    def levels(self) -> int:
        return self.quantizer.levels

    @property
    def harvest_states(self) -> int:
        return self.harvest.n_states

    @property
    def capacity(self) -> int:
        return self.battery.capacity

    @property
    def n_local_states(self) -> int:
        return (self.capacity + 1) * self.levels * self.harvest_states

    @cached_property
    def amplitudes(self) -> tuple[float, ...]:
        """Transmit amplitude (sqrt-mW) per spend c = 0..K."""
        return tuple(self.battery.signal_amplitude(c) for c in range(self.capacity + 1))

    def reward_context(self, noise_var: float, options: RewardOptions) -> RewardContext:
        """Pricing context against a given receiver noise floor."""
        return RewardContext(
            quantizer=self.quantizer,
            channel=self.channel,
            coeffs=JCoefficients.from_rates(self.censor.p_f, self.censor.p_d),
            mean_square_gain=self.channel_params.mean_square_gain,
            noise_var=noise_var,
            amplitudes=self.amplitudes,
            transmit_prior=self.censor.transmit_prior,
            options=options,
        )


@dataclass(frozen=True)
class NetworkModel:
    """The sensors plus everything the fusion side contributes.

    Attributes:
        sensors: At least one sensor; all must share the same battery
            capacity, level count, and harvest-state count (their parameter
            values may differ).
        p_tot_mw: Average total transmit-power budget in mW.
        discount: Discount factor in (0, 1).
        noise_var: Receiver noise variance in mW (so amplitudes are sqrt-mW).
        options: Reward-variant switches shared by all sensors.
    """

    sensors: tuple[SensorModel, ...]
    p_tot_mw: float
    discount: float
    noise_var: float = 1.0
    options: RewardOptions = field(default_factory=RewardOptions)

    def __post_init__(self) -> None:
        if not self.sensors:
            raise ParameterError("a network needs at least one sensor")
        object.__setattr__(self, "sensors", tuple(self.sensors))
        if self.p_tot_mw <= 0.0:
            raise ParameterError(f"p_tot_mw must be > 0, got {self.p_tot_mw!r}")
        if not 0.0 < self.discount < 1.0:
            raise ParameterError(f"discount must lie in (0, 1), got {self.discount!r}")
        if self.noise_var <= 0.0:
            raise ParameterError(f"noise_var must be > 0, got {self.noise_var!r}")
        first = self.sensors[0]
        for k, s in enumerate(self.sensors[1:], start=2):
            if (s.capacity, s.levels, s.harvest_states) != (
                first.capacity,
                first.levels,
                first.harvest_states,
            ):
                raise ScopeError(
                    "sensors must share (capacity, levels, harvest states); "
                    f"sensor 1 has {(first.capacity, first.levels, first.harvest_states)} "
                    f"but sensor {k} has {(s.capacity, s.levels, s.harvest_states)}"
                )

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def capacity(self) -> int:
        return self.sensors[0].capacity

    @property
    def levels(self) -> int:
        return self.sensors[0].levels

    @property
    def harvest_states(self) -> int:
        return self.sensors[0].harvest_states

    @property
    def silence_prob_global(self) -> float:
        """Probability that every sensor censors in a slot."""
        p = 1.0
        for s in self.sensors:
            p *= s.censor.silence_prior
        return p

    def reward_contexts(self) -> tuple[RewardContext, ...]:
        return tuple(s.reward_context(self.noise_var, self.options) for s in self.sensors)

    def reward_tables(self) -> tuple[RewardTable, ...]:
        return tuple(build_reward_table(ctx) for ctx in self.reward_contexts())

    def total_spend_power_mw(self, cells) -> float:
        """Total power of a joint spend vector, one entry per sensor."""
        if len(cells) != self.n_sensors:
            raise ParameterError(
                f"expected {self.n_sensors} spend entries, got {len(cells)}"
            )
        return float(
            sum(s.battery.spend_power_mw(int(c)) for s, c in zip(self.sensors, cells))
        )

    @cached_property
    def model_hash(self) -> str:
        """Canonical 16-hex digest of every defining quantity."""
        h = hashlib.sha256()

        def put(*vals) -> None:
            h.update(json.dumps([repr(v) for v in vals]).encode())

        put(self.n_sensors, self.p_tot_mw, self.discount, self.noise_var)
        put(self.options.normalization, self.options.conditioning, self.options.omega_form)
        for s in self.sensors:
            put(s.quantizer.boundaries, s.channel.state_values, s.channel.stationary)
            h.update(s.channel.transition.tobytes())
            put(s.channel_params.mean_square_gain, s.channel_params.doppler_product)
            put(s.battery.capacity, s.battery.cell_energy_j, s.battery.slot_s)
            put(s.harvest.levels, s.harvest.persistence, s.harvest.chain.stationary)
            h.update(s.harvest.chain.transition.tobytes())
            put(
                s.sensing.signal_amplitude,
                s.sensing.obs_noise_var,
                s.sensing.prior_null,
                s.sensing.prior_alt,
                s.sensing.pd_bar,
                s.sensing.threshold,
            )
            put(s.deployment.kind, s.deployment.source_power, s.deployment.r0_m, s.deployment.r1_m)
            put(s.censor.p_f, s.censor.p_d)
        return h.hexdigest()[:16]
