"""Forward simulation of the detection network under a power policy.

Each slot draws the hypothesis, advances every sensor's fading and harvest
chains, applies the policy's prescribed spend (withheld when the sensor
censors), forms the received signals, and fuses them with the Bayesian
log-likelihood-ratio rule. Estimation runs independent stationary slots
(a warm-up drives the controlled chain to steady state before the measured
slot); trajectory mode keeps whole paths for causality checks; a
discounted-lifetime estimator accumulates rewards over a geometric horizon.

Randomness is organized in fixed-size run blocks, each seeded by
(root seed, stream id, block index), and aggregated in block order, so
results are bit-stable for a given seed regardless of chunking.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .divergence_reward import JCoefficients, j_pointwise
from .errors import FeasibilityError, ParameterError, ScopeError
from .fading_channel import sample_gain_in_level
from .mdp_core import Policy, PolicyScope
from .network import NetworkModel

_BLOCK_RUNS = 65536
_POWER_TOL = 1e-9
_STREAM_EPISODES = 0
_STREAM_TRAJECTORY = 1
_STREAM_LIFETIME = 2


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class McEstimate:
    """Single-slot Monte Carlo estimates.

    Attributes:
        p_e: Prior-weighted error probability of the fusion decision.
        p_e_se: Its standard error (binomial form per hypothesis, weighted).
        avg_j: Mean total divergence of the prescribed amplitudes.
        avg_j_se: Its standard error.
        avg_power_mw: Mean prescribed total transmit power. Censoring makes
            physically drawn power smaller by each sensor's transmit prior.
        violations: Slots whose prescribed power exceeded the budget.
        runs: Number of measured slots.
    """

    p_e: float
    p_e_se: float
    avg_j: float
    avg_j_se: float
    avg_power_mw: float
    violations: int
    runs: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_e <= 1.0:
            raise ParameterError(f"p_e must lie in [0, 1], got {self.p_e!r}")

    def as_row(self) -> dict:
        return {
            "p_e": self.p_e,
            "p_e_se": self.p_e_se,
            "avg_j": self.avg_j,
            "avg_j_se": self.avg_j_se,
            "avg_power_mw": self.avg_power_mw,
            "violations": self.violations,
            "runs": self.runs,
        }


@dataclass(frozen=True)
class EpisodeTrace:
    """Complete per-slot record of simulated trajectories.

    Arrays are indexed [slot, chain] or [slot, chain, sensor]. Slot t's
    state is (battery, level_prev, harvest_prev); level_now/harvest_now are
    that slot's chain draws, which become the next slot's "prev" entries.
    """

    hypothesis: np.ndarray
    battery: np.ndarray
    level_prev: np.ndarray
    harvest_prev: np.ndarray
    level_now: np.ndarray
    harvest_now: np.ndarray
    prescribed_cells: np.ndarray
    spent_cells: np.ndarray
    transmitted: np.ndarray
    gain: np.ndarray
    symbol: np.ndarray
    received: np.ndarray
    statistic: np.ndarray
    decision: np.ndarray
    correct: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.hypothesis.shape[0]

    def write_jsonl(self, path, chain: int = 0) -> None:
        """Dumps one chain as a JSON-lines record per slot."""
        with open(path, "w") as fh:
            for t in range(self.n_slots):
                record = {
                    "slot": t,
                    "hypothesis": int(self.hypothesis[t, chain]),
                    "battery": self.battery[t, chain].tolist(),
                    "level_prev": self.level_prev[t, chain].tolist(),
                    "harvest_prev": self.harvest_prev[t, chain].tolist(),
                    "prescribed_cells": self.prescribed_cells[t, chain].tolist(),
                    "spent_cells": self.spent_cells[t, chain].tolist(),
                    "transmitted": self.transmitted[t, chain].astype(int).tolist(),
                    "gain": [float(v) for v in self.gain[t, chain]],
                    "symbol": [float(v) for v in self.symbol[t, chain]],
                    "received": [float(v) for v in self.received[t, chain]],
                    "statistic": float(self.statistic[t, chain]),
                    "decision": int(self.decision[t, chain]),
                    "correct": bool(self.correct[t, chain]),
                }
                fh.write(json.dumps(record) + "\n")


# ---------------------------------------------------------------------------
# Fusion rule


def fusion_llr(y, gains, amplitudes, p_f, p_d, noise_var: float) -> float:
    """Bayesian fusion statistic of one slot's received vector.

    Each sensor contributes the log-ratio of two-component Gaussian
    mixtures — transmit component centered at its gain-amplitude product,
    silence component at zero — weighted by the transmit rates under the
    two hypotheses. Terms are evaluated through log-sum-exp; a sensor whose
    amplitude (or gain) is zero contributes exactly 0, both mixtures being
    the same density.

    Args:
        y: Received samples, one per sensor.
        gains: Channel gains assumed by the fusion center.
        amplitudes: Transmit amplitudes assumed by the fusion center.
        p_f: Per-sensor transmit rates under the null hypothesis.
        p_d: Per-sensor transmit rates under the alternative.
        noise_var: Receiver noise variance.

    Returns:
        The summed log-likelihood ratio.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mu = np.atleast_1d(np.asarray(gains, dtype=float)) * np.atleast_1d(
        np.asarray(amplitudes, dtype=float)
    )
    p_f = np.broadcast_to(np.asarray(p_f, dtype=float), y.shape)
    p_d = np.broadcast_to(np.asarray(p_d, dtype=float), y.shape)
    if not (y.shape == mu.shape):
        raise ParameterError("y, gains, and amplitudes must have matching lengths")
    total = 0.0
    for k in range(len(y)):
        if mu[k] == 0.0:
            continue
        la = (y[k] * mu[k] - mu[k] ** 2 / 2.0) / noise_var
        total += _mixture_term(la, p_f[k], p_d[k])
    return float(total)


def _log_or_ninf(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def _mixture_term(la, p_f: float, p_d: float):
    num = np.logaddexp(_log_or_ninf(p_d) + la, _log_or_ninf(1.0 - p_d))
    den = np.logaddexp(_log_or_ninf(p_f) + la, _log_or_ninf(1.0 - p_f))
    return num - den


# ---------------------------------------------------------------------------
# Simulation engine


class _SensorSim:
    """Per-sensor constants laid out for vectorized stepping."""

    def __init__(self, sensor, noise_var: float):
        self.capacity = sensor.capacity
        self.levels = sensor.levels
        self.harvest_states = sensor.harvest_states
        self.quantizer = sensor.quantizer
        self.gamma = sensor.channel_params.mean_square_gain
        self.cum_psi = np.cumsum(sensor.channel.transition, axis=0)
        self.cum_phi = np.cumsum(sensor.harvest.chain.transition, axis=0)
        self.harvest_cells = np.asarray(sensor.harvest.levels, dtype=np.int64)
        self.amplitudes = np.asarray(sensor.amplitudes)
        self.cell_power = sensor.battery.cell_power_mw
        self.recon = np.asarray(sensor.quantizer.reconstruction_values)
        self.p_f = sensor.censor.p_f
        self.p_d = sensor.censor.p_d
        self.coeffs = JCoefficients.from_rates(self.p_f, self.p_d)
        self.noise_var = noise_var


def _draw_markov(cum_cols: np.ndarray, current0: np.ndarray, rng) -> np.ndarray:
    """Advances 0-based chain indices one step; columns hold the CDFs."""
    u = rng.random(current0.shape)
    return (u[None, :] > cum_cols[:, current0]).sum(axis=0)


def _draw_gains(sim: _SensorSim, level_now: np.ndarray, rng) -> np.ndarray:
    gains = np.empty(level_now.shape)
    for lev in range(1, sim.levels + 1):
        mask = level_now == lev
        count = int(mask.sum())
        if count:
            gains[mask] = sample_gain_in_level(
                lev, sim.quantizer, sim.gamma, rng, size=count
            )
    return gains


class _PolicyLookup:
    """Maps vectorized states to prescribed spends for either policy scope."""

    def __init__(self, network: NetworkModel, policy):
        n = network.n_sensors
        dims = (network.capacity, network.levels, network.harvest_states)
        if isinstance(policy, Policy):
            if policy.scope is not PolicyScope.GLOBAL:
                raise ScopeError("a single policy must have global scope; pass all local policies")
            policies = (policy,)
        else:
            policies = tuple(policy)
        for p in policies:
            if p.dims != dims or p.n_sensors != n:
                raise ScopeError(
                    f"policy dims {p.dims}/N={p.n_sensors} mismatch network {dims}/N={n}"
                )
        if policies[0].scope is PolicyScope.GLOBAL:
            if len(policies) != 1:
                raise ScopeError("exactly one global policy expected")
            self.global_table = policies[0].table
            self.local_tables = None
        else:
            if sorted(p.sensor for p in policies) != list(range(1, n + 1)):
                raise ScopeError(f"need local policies for every sensor 1..{n}")
            ordered = sorted(policies, key=lambda p: p.sensor)
            self.global_table = None
            self.local_tables = [p.table for p in ordered]
        self.n_local = (dims[0] + 1) * dims[1] * dims[2]
        self.levels = dims[1]
        self.harvest_states = dims[2]

    def prescribed(self, battery: np.ndarray, level: np.ndarray, harvest: np.ndarray) -> np.ndarray:
        """battery/level/harvest are (chains, N); returns (chains, N) spends."""
        local_idx = (battery * self.levels + (level - 1)) * self.harvest_states + (harvest - 1)
        if self.global_table is not None:
            flat = np.zeros(battery.shape[0], dtype=np.int64)
            for k in range(battery.shape[1]):
                flat = flat * self.n_local + local_idx[:, k]
            return self.global_table[flat]
        out = np.empty_like(local_idx)
        for k, table in enumerate(self.local_tables):
            out[:, k] = table[local_idx[:, k]]
        return out


def _shared_priors(network: NetworkModel) -> tuple[float, float]:
    first = network.sensors[0].sensing
    for s in network.sensors[1:]:
        if (s.sensing.prior_null, s.sensing.prior_alt) != (first.prior_null, first.prior_alt):
            raise ScopeError("all sensors must share the hypothesis priors")
    return first.prior_null, first.prior_alt


def _step_states(sims, lookup, battery, level, harvest, zeta1, rng):
    """One controlled-chain step without measurement; returns new states."""
    chains = battery.shape[0]
    h = (rng.random(chains) < zeta1).astype(np.int8)
    prescribed = lookup.prescribed(battery, level, harvest)
    new_b = np.empty_like(battery)
    new_l = np.empty_like(level)
    new_m = np.empty_like(harvest)
    for k, sim in enumerate(sims):
        rate = np.where(h == 1, sim.p_d, sim.p_f)
        w = rng.random(chains) < rate
        spent = np.where(w, prescribed[:, k], 0)
        if np.any(spent > battery[:, k]):
            raise FeasibilityError("policy prescribed more cells than the battery holds")
        l_now = _draw_markov(sim.cum_psi, level[:, k] - 1, rng) + 1
        m_now = _draw_markov(sim.cum_phi, harvest[:, k] - 1, rng) + 1
        income = sim.harvest_cells[m_now - 1]
        new_b[:, k] = np.minimum(battery[:, k] - spent + income, sim.capacity)
        new_l[:, k] = l_now
        new_m[:, k] = m_now
    return new_b, new_l, new_m


def _uniform_states(network: NetworkModel, chains: int, rng):
    n = network.n_sensors
    battery = rng.integers(0, network.capacity + 1, size=(chains, n))
    level = rng.integers(1, network.levels + 1, size=(chains, n))
    harvest = rng.integers(1, network.harvest_states + 1, size=(chains, n))
    return battery, level, harvest


def run_episodes(
    network: NetworkModel,
    policy,
    runs: int,
    seed: int,
    *,
    warmup: int = 100,
    fusion: str = "genie",
) -> McEstimate:
    """Estimates error probability, divergence, and power over iid slots.

    Each run warms the controlled process up from a uniform state draw,
    then measures one slot: hypothesis, censoring, current gains (the
    state's level advanced one step, then a draw within the new level),
    received signals, and the fusion decision against the prior threshold.
    Errors are tallied per hypothesis and weighted by the priors.

    Args:
        network: The model (priors must agree across sensors).
        policy: A global Policy or a sequence of all N local policies.
        runs: Measured slots.
        seed: Root seed; results are bit-stable given it.
        warmup: Controlled-chain slots before each measurement.
        fusion: "genie" (fusion center knows true gains) or "quantized"
            (it reconstructs gains from the previous-slot levels).

    Returns:
        The aggregated estimate.
    """
    if runs <= 0:
        raise ParameterError(f"runs must be > 0, got {runs}")
    if fusion not in ("genie", "quantized"):
        raise ParameterError(f"unknown fusion mode {fusion!r}")
    zeta0, zeta1 = _shared_priors(network)
    tau = math.log(zeta0 / zeta1)
    sims = [_SensorSim(s, network.noise_var) for s in network.sensors]
    lookup = _PolicyLookup(network, policy)
    noise_sd = math.sqrt(network.noise_var)

    n0 = n1 = err0 = err1 = 0
    sum_j = sum_j_sq = sum_power = 0.0
    violations = 0
    start = 0
    block = 0
    while start < runs:
        chains = min(_BLOCK_RUNS, runs - start)
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, _STREAM_EPISODES, block))
        )
        battery, level, harvest = _uniform_states(network, chains, rng)
        for _ in range(warmup):
            battery, level, harvest = _step_states(
                sims, lookup, battery, level, harvest, zeta1, rng
            )
        h = (rng.random(chains) < zeta1).astype(np.int8)
        prescribed = lookup.prescribed(battery, level, harvest)
        statistic = np.zeros(chains)
        j_total = np.zeros(chains)
        power = np.zeros(chains)
        for k, sim in enumerate(sims):
            rate = np.where(h == 1, sim.p_d, sim.p_f)
            w = rng.random(chains) < rate
            level_now = _draw_markov(sim.cum_psi, level[:, k] - 1, rng) + 1
            gains = _draw_gains(sim, level_now, rng)
            amp = sim.amplitudes[prescribed[:, k]]
            symbol = np.where(w, amp, 0.0)
            y = gains * symbol + noise_sd * rng.standard_normal(chains)
            fc_gain = gains if fusion == "genie" else sim.recon[level[:, k] - 1]
            mu = fc_gain * amp
            active = mu != 0.0
            if np.any(active):
                la = (y[active] * mu[active] - mu[active] ** 2 / 2.0) / network.noise_var
                statistic[active] += _mixture_term(la, sim.p_f, sim.p_d)
            j_total += j_pointwise(gains, amp, sim.coeffs, network.noise_var)
            power += sim.cell_power * prescribed[:, k]
        decision = statistic > tau
        wrong = decision != (h == 1)
        n1_block = int((h == 1).sum())
        n0 += chains - n1_block
        n1 += n1_block
        err0 += int(np.count_nonzero(wrong & (h == 0)))
        err1 += int(np.count_nonzero(wrong & (h == 1)))
        sum_j += float(j_total.sum())
        sum_j_sq += float((j_total**2).sum())
        sum_power += float(power.sum())
        violations += int(np.count_nonzero(power > network.p_tot_mw + _POWER_TOL))
        start += chains
        block += 1

    p0 = err0 / n0 if n0 else 0.0
    p1 = err1 / n1 if n1 else 0.0
    var0 = zeta0**2 * p0 * (1.0 - p0) / n0 if n0 else 0.0
    var1 = zeta1**2 * p1 * (1.0 - p1) / n1 if n1 else 0.0
    avg_j = sum_j / runs
    j_var = max(0.0, (sum_j_sq - runs * avg_j**2) / (runs - 1)) if runs > 1 else 0.0
    return McEstimate(
        p_e=zeta0 * p0 + zeta1 * p1,
        p_e_se=math.sqrt(var0 + var1),
        avg_j=avg_j,
        avg_j_se=math.sqrt(j_var / runs),
        avg_power_mw=sum_power / runs,
        violations=violations,
        runs=runs,
    )


def run_trajectory(
    network: NetworkModel,
    policy,
    slots: int,
    seed: int,
    *,
    chains: int = 1,
    fusion: str = "genie",
) -> EpisodeTrace:
    """Simulates full correlated paths and keeps every slot's record.

    Used for causality and closure checks: batteries never go negative or
    above capacity, spends never exceed the charge, and each slot's drawn
    levels become the next slot's observed ones.
    """
    if slots <= 0 or chains <= 0:
        raise ParameterError("slots and chains must be > 0")
    if fusion not in ("genie", "quantized"):
        raise ParameterError(f"unknown fusion mode {fusion!r}")
    zeta0, zeta1 = _shared_priors(network)
    tau = math.log(zeta0 / zeta1)
    sims = [_SensorSim(s, network.noise_var) for s in network.sensors]
    lookup = _PolicyLookup(network, policy)
    noise_sd = math.sqrt(network.noise_var)
    n = network.n_sensors
    rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_TRAJECTORY, 0)))

    shape3 = (slots, chains, n)
    trace = {
        "hypothesis": np.zeros((slots, chains), dtype=np.int8),
        "battery": np.zeros(shape3, dtype=np.int16),
        "level_prev": np.zeros(shape3, dtype=np.int16),
        "harvest_prev": np.zeros(shape3, dtype=np.int16),
        "level_now": np.zeros(shape3, dtype=np.int16),
        "harvest_now": np.zeros(shape3, dtype=np.int16),
        "prescribed_cells": np.zeros(shape3, dtype=np.int16),
        "spent_cells": np.zeros(shape3, dtype=np.int16),
        "transmitted": np.zeros(shape3, dtype=bool),
        "gain": np.zeros(shape3, dtype=np.float32),
        "symbol": np.zeros(shape3, dtype=np.float32),
        "received": np.zeros(shape3, dtype=np.float32),
        "statistic": np.zeros((slots, chains), dtype=np.float64),
        "decision": np.zeros((slots, chains), dtype=np.int8),
        "correct": np.zeros((slots, chains), dtype=bool),
    }
    battery, level, harvest = _uniform_states(network, chains, rng)
    for t in range(slots):
        h = (rng.random(chains) < zeta1).astype(np.int8)
        prescribed = lookup.prescribed(battery, level, harvest)
        trace["hypothesis"][t] = h
        trace["battery"][t] = battery
        trace["level_prev"][t] = level
        trace["harvest_prev"][t] = harvest
        trace["prescribed_cells"][t] = prescribed
        statistic = np.zeros(chains)
        new_b = battery.copy()
        for k, sim in enumerate(sims):
            rate = np.where(h == 1, sim.p_d, sim.p_f)
            w = rng.random(chains) < rate
            spent = np.where(w, prescribed[:, k], 0)
            if np.any(spent > battery[:, k]):
                raise FeasibilityError("policy prescribed more cells than the battery holds")
            level_now = _draw_markov(sim.cum_psi, level[:, k] - 1, rng) + 1
            harvest_now = _draw_markov(sim.cum_phi, harvest[:, k] - 1, rng) + 1
            gains = _draw_gains(sim, level_now, rng)
            amp = sim.amplitudes[prescribed[:, k]]
            symbol = np.where(w, amp, 0.0)
            y = gains * symbol + noise_sd * rng.standard_normal(chains)
            fc_gain = gains if fusion == "genie" else sim.recon[level[:, k] - 1]
            mu = fc_gain * amp
            active = mu != 0.0
            if np.any(active):
                la = (y[active] * mu[active] - mu[active] ** 2 / 2.0) / network.noise_var
                statistic[active] += _mixture_term(la, sim.p_f, sim.p_d)
            income = sim.harvest_cells[harvest_now - 1]
            new_b[:, k] = np.minimum(battery[:, k] - spent + income, sim.capacity)
            trace["level_now"][t, :, k] = level_now
            trace["harvest_now"][t, :, k] = harvest_now
            trace["spent_cells"][t, :, k] = spent
            trace["transmitted"][t, :, k] = w
            trace["gain"][t, :, k] = gains
            trace["symbol"][t, :, k] = symbol
            trace["received"][t, :, k] = y
            level[:, k] = level_now
            harvest[:, k] = harvest_now
        decision = statistic > tau
        trace["statistic"][t] = statistic
        trace["decision"][t] = decision.astype(np.int8)
        trace["correct"][t] = decision == (h == 1)
        battery = new_b
    return EpisodeTrace(**trace)


def run_lifetime_value(
    network: NetworkModel,
    policy,
    anchor,
    runs: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo discounted value of a policy from a fixed start state.

    The discount acts as a per-slot survival probability: each run draws a
    geometric lifetime and sums the undiscounted per-slot network reward —
    each sensor's reward table at its observed level and prescribed spend —
    until death. The mean over runs estimates the discounted value.

    Args:
        network: The model.
        policy: Global policy or all N local policies.
        anchor: Per-sensor (b, l, m) start state: a GlobalState or a
            sequence of triples.
        runs: Independent lifetimes.
        seed: Root seed.

    Returns:
        (estimate, standard error).
    """
    if runs <= 0:
        raise ParameterError(f"runs must be > 0, got {runs}")
    _, zeta1 = _shared_priors(network)
    sims = [_SensorSim(s, network.noise_var) for s in network.sensors]
    lookup = _PolicyLookup(network, policy)
    tables = [t.values for t in network.reward_tables()]
    n = network.n_sensors
    triples = list(getattr(anchor, "locals", anchor))
    if len(triples) == 3 and all(np.isscalar(x) for x in triples):
        triples = [tuple(triples)] * n  # one shared (b, l, m) start
    starts = [(s.b, s.l, s.m) if hasattr(s, "b") else (int(s[0]), int(s[1]), int(s[2])) for s in triples]
    if len(starts) != n:
        raise ScopeError(f"anchor needs {n} per-sensor triples")

    total = 0.0
    total_sq = 0.0
    start_run = 0
    block = 0
    while start_run < runs:
        chains = min(_BLOCK_RUNS, runs - start_run)
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, _STREAM_LIFETIME, block))
        )
        lifetime = rng.geometric(1.0 - network.discount, size=chains) - 1
        battery = np.tile([s[0] for s in starts], (chains, 1))
        level = np.tile([s[1] for s in starts], (chains, 1))
        harvest = np.tile([s[2] for s in starts], (chains, 1))
        reward_acc = np.zeros(chains)
        horizon = int(lifetime.max()) + 1
        for t in range(horizon):
            alive = lifetime >= t
            prescribed = lookup.prescribed(battery, level, harvest)
            slot_reward = np.zeros(chains)
            for k in range(n):
                slot_reward += tables[k][level[:, k] - 1, prescribed[:, k]]
            reward_acc += np.where(alive, slot_reward, 0.0)
            battery, level, harvest = _step_states(
                sims, lookup, battery, level, harvest, zeta1, rng
            )
        total += float(reward_acc.sum())
        total_sq += float((reward_acc**2).sum())
        start_run += chains
        block += 1
    mean = total / runs
    var = max(0.0, (total_sq - runs * mean**2) / (runs - 1)) if runs > 1 else 0.0
    return mean, math.sqrt(var / runs)


# ---------------------------------------------------------------------------
# Parameter sweeps


SWEEP_COLUMNS = (
    "axis",
    "value",
    "p_e",
    "p_e_se",
    "avg_j",
    "avg_j_se",
    "avg_power_mw",
    "violations",
    "runs",
    "seed",
)


def sweep(point_fn, axis: str, values, *, workers: int = 1) -> list[dict]:
    """Evaluates one experiment per axis value, optionally in parallel.

    Args:
        point_fn: Callable (value, point_index) -> row dict (the McEstimate
            fields plus "seed"); must be picklable when workers > 1.
        axis: Axis name recorded in every row.
        values: Axis values, kept in input order.
        workers: Process count; 1 runs inline.

    Returns:
        One dict per value with "axis" and "value" prepended.

    Raises:
        The underlying error, annotated with the failing axis value.
    """
    values = list(values)
    rows: list[dict] = []
    if workers <= 1:
        results = []
        for i, v in enumerate(values):
            try:
                results.append(point_fn(v, i))
            except Exception as e:
                raise _annotate(e, axis, v) from e
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(point_fn, v, i) for i, v in enumerate(values)]
            results = []
            for v, fut in zip(values, futures):
                try:
                    results.append(fut.result())
                except Exception as e:
                    raise _annotate(e, axis, v) from e
    for v, result in zip(values, results):
        row = {"axis": axis, "value": v}
        row.update(result)
        rows.append(row)
    return rows


def _annotate(e: Exception, axis: str, value) -> Exception:
    message = f"{axis}={value!r}: {e}"
    try:
        return type(e)(message)
    except TypeError:
        return RuntimeError(message)


def _format_cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def write_sweep_csv(path, rows) -> None:
    """Writes sweep rows with the fixed column order and a header."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row[c]) for c in SWEEP_COLUMNS) + "\n")
