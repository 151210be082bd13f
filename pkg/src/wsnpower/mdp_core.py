"""Constrained-MDP machinery for the transmit-power control problem.

States are per-sensor triples (battery cells, previous-slot gain level,
previous-slot harvest level). Actions prescribe battery cells to spend.
The average-power constraint is brought into the objective by Lagrangian
relaxation; a centralized solver keeps one multiplier per global state and
iterates value iteration against projected-subgradient multiplier updates,
while a decentralized solver shares a single multiplier across independent
per-sensor problems. Small instances can be checked against a brute-force
policy enumeration oracle.

Throughout, transition kernels are row-stochastic arrays ``T[c][i, j] =
P(next=j | cur=i, spend=c)`` and the silence/transmit split of the
successor distribution — the sensor may censor and then spends nothing —
is folded into the kernels before value iteration.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    FeasibilityError,
    GuardError,
    NonConvergenceError,
    NumericError,
    OscillationError,
    ParameterError,
)
from .network import NetworkModel, SensorModel

_TIE_TOL = 1e-12
_MEMORY_LIMIT_BYTES = 2 * 1024**3
_ORACLE_POLICY_LIMIT = 10**6
_OSCILLATION_WINDOW = 50
_VIOLATION_TOL = 1e-9


# ---------------------------------------------------------------------------
# States and indexing


@dataclass(frozen=True)
class LocalState:
    """One sensor's state: battery cells, gain level, harvest level.

    Attributes:
        b: Battery charge in cells, 0..K.
        l: 1-based quantized-gain level of the previous slot.
        m: 1-based harvest level of the previous slot.
    """

    b: int
    l: int
    m: int

    def __post_init__(self) -> None:
        if self.b < 0 or self.l < 1 or self.m < 1:
            raise ParameterError(f"invalid local state {self}")


@dataclass(frozen=True)
class GlobalState:
    """The network state: one LocalState per sensor."""

    locals: tuple[LocalState, ...]

    def __post_init__(self) -> None:
        if not self.locals:
            raise ParameterError("a global state needs at least one sensor")
        object.__setattr__(self, "locals", tuple(self.locals))

    @property
    def n_sensors(self) -> int:
        return len(self.locals)


def local_state_index(state: LocalState, levels: int, harvest_states: int) -> int:
    """Row-major index of (b, l, m): b slowest, m fastest."""
    if not 1 <= state.l <= levels or not 1 <= state.m <= harvest_states:
        raise ParameterError(f"state {state} outside (levels={levels}, harvest={harvest_states})")
    return (state.b * levels + (state.l - 1)) * harvest_states + (state.m - 1)


def local_state_from_index(index: int, levels: int, harvest_states: int) -> LocalState:
    """Inverse of ``local_state_index``."""
    if index < 0:
        raise ParameterError(f"index must be >= 0, got {index}")
    rest, m0 = divmod(index, harvest_states)
    b, l0 = divmod(rest, levels)
    return LocalState(b=b, l=l0 + 1, m=m0 + 1)


def global_state_index(state: GlobalState, n_local: int, levels: int, harvest_states: int) -> int:
    """Mixed-radix index over sensors; sensor 1 is the most significant digit."""
    idx = 0
    for s in state.locals:
        idx = idx * n_local + local_state_index(s, levels, harvest_states)
    return idx


def global_state_from_index(
    index: int, n_sensors: int, n_local: int, levels: int, harvest_states: int
) -> GlobalState:
    """Inverse of ``global_state_index``."""
    parts = []
    for _ in range(n_sensors):
        index, local_idx = divmod(index, n_local)
        parts.append(local_state_from_index(local_idx, levels, harvest_states))
    return GlobalState(locals=tuple(reversed(parts)))


def state_component_arrays(
    capacity: int, levels: int, harvest_states: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(b, l, m) of every local state index, as three aligned int arrays."""
    b, l0, m0 = np.indices((capacity + 1, levels, harvest_states))
    return b.ravel(), (l0 + 1).ravel(), (m0 + 1).ravel()


# ---------------------------------------------------------------------------
# Transition kernels and rewards


def local_transition(state: LocalState, cells: int, sensor: SensorModel) -> np.ndarray:
    """Distribution over next local states for one prescribed spend.

    The next battery charge is deterministic given the harvest draw: the
    slot's income e(m') is decided by the *new* harvest level, banked after
    the spend. Gain level and harvest level advance independently through
    their chains.

    Args:
        state: Current local state.
        cells: Prescribed spend; must be feasible for ``state.b``.
        sensor: The sensor whose chains and battery apply.

    Returns:
        Dense probability vector over local state indices.

    Raises:
        FeasibilityError: If ``cells`` exceeds the battery charge.
    """
    from .energy_model import battery_step

    levels, harvest_states = sensor.levels, sensor.harvest_states
    if state.b > sensor.capacity:
        raise ParameterError(f"battery {state.b} exceeds capacity {sensor.capacity}")
    if cells > state.b:
        raise FeasibilityError(f"cannot spend {cells} cells from a battery of {state.b}")
    psi_col = sensor.channel.transition[:, state.l - 1]
    phi_col = sensor.harvest.chain.transition[:, state.m - 1]
    out = np.zeros(sensor.n_local_states)
    for m_next in range(1, harvest_states + 1):
        income = sensor.harvest.levels[m_next - 1]
        b_next = int(battery_step(state.b, income, cells, sensor.capacity))
        base = (b_next * levels) * harvest_states + (m_next - 1)
        for l_next in range(1, levels + 1):
            out[base + (l_next - 1) * harvest_states] = (
                psi_col[l_next - 1] * phi_col[m_next - 1]
            )
    return out


def build_local_kernels(sensor: SensorModel) -> np.ndarray:
    """Row-stochastic kernels T[c][cur, next] for every spend c = 0..K.

    Rows whose battery cannot afford c get the dynamics of spending the
    whole battery instead; such (state, action) pairs must be masked out by
    the reward (set to -inf) and are never prescribed.
    """
    from .energy_model import battery_step

    capacity, levels, harvest_states = sensor.capacity, sensor.levels, sensor.harvest_states
    n = sensor.n_local_states
    psi_t = sensor.channel.transition.T  # [cur_l, next_l]
    phi = sensor.harvest.chain.transition  # [next_m, cur_m]
    kernels = np.zeros((capacity + 1, n, n))
    for c in range(capacity + 1):
        t6 = kernels[c].reshape(capacity + 1, levels, harvest_states, capacity + 1, levels, harvest_states)
        for b in range(capacity + 1):
            spend = min(c, b)
            for m_next in range(harvest_states):
                income = sensor.harvest.levels[m_next]
                b_next = int(battery_step(b, income, spend, capacity))
                t6[b, :, :, b_next, :, m_next] += (
                    psi_t[:, None, :] * phi[m_next, :][None, :, None]
                )
    return kernels


def mix_censoring(kernels: np.ndarray, silence_prior: float) -> np.ndarray:
    """Folds the censor-and-stay-silent branch into every action's kernel.

    The effective successor distribution of prescribing c is
    silence_prior * T[0] + (1 - silence_prior) * T[c].
    """
    if not 0.0 <= silence_prior <= 1.0:
        raise ParameterError(f"silence_prior must lie in [0, 1], got {silence_prior!r}")
    return silence_prior * kernels[0][None, :, :] + (1.0 - silence_prior) * kernels


def local_reward_array(sensor: SensorModel, table_values: np.ndarray) -> np.ndarray:
    """Per-(state, spend) rewards with -inf marking infeasible spends."""
    capacity = sensor.capacity
    b_arr, l_arr, _ = state_component_arrays(capacity, sensor.levels, sensor.harvest_states)
    rewards = np.asarray(table_values, dtype=float)[l_arr - 1, :].copy()
    spends = np.arange(capacity + 1)
    rewards[spends[None, :] > b_arr[:, None]] = -np.inf
    return rewards


def modified_reward_global(rewards, powers_mw, lam: float, p_tot_mw: float) -> float:
    """Lagrangian network reward from per-sensor rewards and spend powers.

    Sum of the sensors' rewards minus the multiplier times the excess of
    total spend power over the budget.
    """
    return float(np.sum(rewards) - lam * (np.sum(powers_mw) - p_tot_mw))


def modified_reward_local(reward: float, power_mw: float, lam: float, p_tot_mw: float, n_sensors: int) -> float:
    """Per-sensor Lagrangian reward against an equal share of the budget."""
    return float(reward - lam * (power_mw - p_tot_mw / n_sensors))


# ---------------------------------------------------------------------------
# Value iteration


@dataclass(frozen=True)
class ViResult:
    """Converged value iteration output.

    Attributes:
        value: Fixed-point value estimate per state.
        actions: Greedy action per state (smallest action among near-ties).
        residuals: Sup-norm change per sweep.
    """

    value: np.ndarray
    actions: np.ndarray
    residuals: tuple[float, ...]

    @property
    def sweeps(self) -> int:
        return len(self.residuals)


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Per-row first action whose Q-value is within tolerance of the max."""
    best = np.max(q, axis=1, keepdims=True)
    return np.argmax(q >= best - _TIE_TOL, axis=1)


def value_iteration(
    kernels: np.ndarray,
    rewards: np.ndarray,
    discount: float,
    eps1: float,
    *,
    max_sweeps: int = 100_000,
    initial_value: np.ndarray | None = None,
) -> ViResult:
    """Solves max_a {r(s,a) + eta * E[V(s')]} to the standard stop rule.

    Sweeps start from the zero function (or a warm start) and stop when the
    sup-norm change drops below eps1 * (1 - eta) / (2 * eta), which bounds
    the distance of the greedy policy's value from optimal by eps1.

    Args:
        kernels: Row-stochastic (actions, n, n) kernels, censoring already
            mixed in where applicable.
        rewards: (n, actions) immediate rewards; -inf disables an action.
        discount: eta in (0, 1).
        eps1: Accuracy target of the stop rule.
        max_sweeps: Sweep cap.
        initial_value: Optional warm start instead of zeros.

    Raises:
        NonConvergenceError: If the cap is hit; carries the residual trace.
    """
    if not 0.0 < discount < 1.0:
        raise ParameterError(f"discount must lie in (0, 1), got {discount!r}")
    if eps1 <= 0.0:
        raise ParameterError(f"eps1 must be > 0, got {eps1!r}")
    n_actions, n, _ = kernels.shape
    if rewards.shape != (n, n_actions):
        raise ParameterError(f"rewards shape {rewards.shape} mismatches kernels {kernels.shape}")
    threshold = eps1 * (1.0 - discount) / (2.0 * discount)
    value = np.zeros(n) if initial_value is None else np.array(initial_value, dtype=float)
    residuals: list[float] = []
    for _ in range(max_sweeps):
        q = rewards + discount * (kernels @ value).T
        new_value = np.max(q, axis=1)
        residual = float(np.max(np.abs(new_value - value)))
        residuals.append(residual)
        value = new_value
        if residual < threshold:
            return ViResult(value=value, actions=greedy_actions(q), residuals=tuple(residuals))
    raise NonConvergenceError(
        f"value iteration did not reach residual {threshold:.3g} within {max_sweeps} sweeps",
        trace=tuple(residuals),
    )


# ---------------------------------------------------------------------------
# Policies and reports


class PolicyScope(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


@dataclass(frozen=True)
class Policy:
    """A stationary deterministic spend prescription.

    Attributes:
        scope: GLOBAL (joint table over global states) or LOCAL (one sensor).
        dims: Shared per-sensor dims (capacity K, levels L, harvest states M).
        n_sensors: Network size N; 1 column tables still record the true N.
        table: (n_states, N) spends for GLOBAL; (n_states,) for LOCAL.
        sensor: 1-based sensor index for LOCAL scope, else None.
    """

    scope: PolicyScope
    dims: tuple[int, int, int]
    n_sensors: int
    table: np.ndarray
    sensor: int | None = None

    def __post_init__(self) -> None:
        capacity, levels, harvest_states = self.dims
        n_local = (capacity + 1) * levels * harvest_states
        table = np.asarray(self.table, dtype=np.int64)
        if self.scope is PolicyScope.GLOBAL:
            expected = (n_local**self.n_sensors, self.n_sensors)
            if self.sensor is not None:
                raise ParameterError("global policies carry no sensor index")
        else:
            expected = (n_local,)
            if not (self.sensor and 1 <= self.sensor <= self.n_sensors):
                raise ParameterError(f"local policy needs a sensor index in 1..{self.n_sensors}")
        if table.shape != expected:
            raise ParameterError(f"policy table shape {table.shape}, expected {expected}")
        if table.min() < 0 or table.max() > capacity:
            raise ParameterError("prescribed spends must lie in 0..capacity")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def n_states(self) -> int:
        return self.table.shape[0]


@dataclass(frozen=True)
class SolveReport:
    """Everything a dual-loop solve produced.

    Attributes:
        values: Final Lagrangian value per state — (n_states,) for the
            centralized solver, (N, n_local) stacked for the decentralized.
        policies: The global policy as a 1-tuple, or N local policies.
        final_multipliers: Per-state multipliers (centralized) or a length-1
            array with the shared multiplier (decentralized).
        multiplier_trace: One row per outer iteration; see trace_columns.
        trace_columns: Column names of multiplier_trace.
        residuals: Bellman residuals of every sweep, in execution order.
        sweeps: Total value-iteration sweeps.
        dual_iterations: Outer multiplier updates performed.
    """

    values: np.ndarray
    policies: tuple[Policy, ...]
    final_multipliers: np.ndarray
    multiplier_trace: np.ndarray
    trace_columns: tuple[str, ...]
    residuals: tuple[float, ...]
    sweeps: int
    dual_iterations: int

    @property
    def policy(self) -> Policy:
        if len(self.policies) != 1:
            raise ParameterError("report holds several policies; index .policies directly")
        return self.policies[0]

    def write_multiplier_trace_csv(self, path) -> None:
        _write_csv(path, self.trace_columns, self.multiplier_trace)

    def write_residuals_csv(self, path) -> None:
        rows = np.column_stack(
            [np.arange(1, len(self.residuals) + 1), np.asarray(self.residuals)]
        )
        _write_csv(path, ("sweep", "residual"), rows)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")


# ---------------------------------------------------------------------------
# Centralized solver (per-state multipliers over the global chain)


class _GlobalProblem:
    """Factored evaluation of the joint Bellman operator.

    The value table lives on the (n_local,)*N tensor; per-action
    continuations are built by applying each sensor's kernel along its own
    axis, so the joint kernel is never materialized. The censoring split
    uses the all-silent probability: with it the network evolves as if every
    prescribed spend were zero.
    """

    def __init__(self, network: NetworkModel):
        self.network = network
        self.n_sensors = network.n_sensors
        self.capacity = network.capacity
        sensors = network.sensors
        self.n_local = sensors[0].n_local_states
        self.n_states = self.n_local**self.n_sensors
        bytes_needed = 8 * self.n_states
        if bytes_needed > _MEMORY_LIMIT_BYTES:
            raise GuardError(
                f"global value table needs {self.n_states} states "
                f"({bytes_needed / 1024**3:.1f} GiB > 2 GiB limit); "
                "use the decentralized solver"
            )
        self.kernels = [build_local_kernels(s) for s in sensors]
        tables = network.reward_tables()
        self.rewards = [
            local_reward_array(s, t.values) for s, t in zip(sensors, tables)
        ]
        self.reward_tables = [t.values for t in tables]
        self.powers = [
            np.array([s.battery.spend_power_mw(c) for c in range(self.capacity + 1)])
            for s in sensors
        ]
        self.all_silent = network.silence_prob_global
        # Joint actions sorted by (total power, lexicographic): the scan
        # order below realizes the smallest-spend tie-break.
        combos = list(itertools.product(range(self.capacity + 1), repeat=self.n_sensors))
        combos.sort(key=lambda c: (sum(p[ci] for p, ci in zip(self.powers, c)), c))
        self.actions = np.array(combos, dtype=np.int64)
        self.action_power = np.array(
            [sum(p[ci] for p, ci in zip(self.powers, c)) for c in combos]
        )
        self.shape = (self.n_local,) * self.n_sensors

    def _apply(self, spends, tensor: np.ndarray) -> np.ndarray:
        for axis, (kernel, c) in enumerate(zip(self.kernels, spends)):
            tensor = np.moveaxis(np.tensordot(kernel[c], tensor, axes=(1, axis)), 0, axis)
        return tensor

    def _reward_sum(self, spends) -> np.ndarray:
        total = np.zeros(self.shape)
        for axis, (rewards, c) in enumerate(zip(self.rewards, spends)):
            shape = [1] * self.n_sensors
            shape[axis] = self.n_local
            total = total + rewards[:, c].reshape(shape)
        return total

    def _q_tensors(self, value: np.ndarray, lam: np.ndarray):
        """Yields (action index, Q tensor) in the sorted action order."""
        silent = self._apply((0,) * self.n_sensors, value)
        lam_t = lam.reshape(self.shape)
        eta = self.network.discount
        for a, spends in enumerate(self.actions):
            moved = self._apply(spends, value)
            cont = self.all_silent * silent + (1.0 - self.all_silent) * moved
            q = (
                self._reward_sum(spends)
                - lam_t * (self.action_power[a] - self.network.p_tot_mw)
                + eta * cont
            )
            yield a, q

    def sweep(self, value: np.ndarray, lam: np.ndarray) -> np.ndarray:
        best = np.full(self.shape, -np.inf)
        for _, q in self._q_tensors(value, lam):
            np.maximum(best, q, out=best)
        return best

    def greedy_codes(self, value: np.ndarray, lam: np.ndarray) -> np.ndarray:
        best = self.sweep(value, lam)
        codes = np.full(self.shape, -1, dtype=np.int64)
        for a, q in self._q_tensors(value, lam):
            np.copyto(codes, a, where=(codes < 0) & (q >= best - _TIE_TOL))
        return codes.ravel()

    def value_iterate(
        self, lam: np.ndarray, initial: np.ndarray, eps1: float, max_sweeps: int
    ) -> tuple[np.ndarray, list[float]]:
        eta = self.network.discount
        threshold = eps1 * (1.0 - eta) / (2.0 * eta)
        value = initial
        residuals: list[float] = []
        for _ in range(max_sweeps):
            new_value = self.sweep(value, lam)
            residual = float(np.max(np.abs(new_value - value)))
            residuals.append(residual)
            value = new_value
            if residual < threshold:
                return value, residuals
        raise NonConvergenceError(
            f"global value iteration did not converge within {max_sweeps} sweeps",
            trace=tuple(residuals),
        )

    def project_feasible(self, spends_table: np.ndarray) -> np.ndarray:
        """Greedy per-state spend reduction until the power cap holds.

        At each step the cell with the smallest reward loss per unit power
        is removed (ties go to the lowest sensor index).
        """
        levels = self.network.levels
        harvest = self.network.harvest_states
        p_tot = self.network.p_tot_mw
        cell_power = np.array([s.battery.cell_power_mw for s in self.network.sensors])
        table = spends_table.copy()
        totals = np.array([p[c] for p, c in zip(self.powers, table.T)]).sum(axis=0)
        for idx in np.nonzero(totals > p_tot + _VIOLATION_TOL)[0]:
            state = global_state_from_index(int(idx), self.n_sensors, self.n_local, levels, harvest)
            level = [s.l for s in state.locals]
            cells = table[idx].copy()
            while sum(p[c] for p, c in zip(self.powers, cells)) > p_tot + _VIOLATION_TOL:
                loss = [
                    (self.reward_tables[k][level[k] - 1, cells[k]]
                     - self.reward_tables[k][level[k] - 1, cells[k] - 1]) / cell_power[k]
                    if cells[k] > 0
                    else np.inf
                    for k in range(self.n_sensors)
                ]
                pick = int(np.argmin(loss))
                cells[pick] -= 1
            table[idx] = cells
        return table


def solve_optimal(
    network: NetworkModel,
    *,
    eps1: float = 1e-4,
    eps2: float = 1e-2,
    beta0: float = 0.5,
    max_sweeps: int = 100_000,
    max_dual_iters: int = 500,
) -> SolveReport:
    """Centralized constrained solve with one multiplier per global state.

    Alternates joint value iteration with projected subgradient steps
    lam_s <- [lam_s + beta0/i * (power(s) - budget)]+ on every state's
    multiplier, declaring convergence when every state either sits at zero
    with its constraint satisfied or moved by less than eps2 relatively.
    The converged greedy policy is then projected onto the per-state power
    cap.

    Raises:
        GuardError: If the joint value table would exceed the memory budget.
        OscillationError: If the worst violation stops improving.
        NonConvergenceError: On hitting the outer-iteration cap.
    """
    problem = _GlobalProblem(network)
    n_states = problem.n_states
    lam = np.zeros(n_states)
    value = np.zeros(problem.shape)
    residuals: list[float] = []
    trace: list[tuple[float, float, float]] = []
    violations: list[float] = []
    best_violation = np.inf
    stall = 0
    converged = False
    outer = 0
    for outer in range(1, max_dual_iters + 1):
        value, vi_residuals = problem.value_iterate(lam, value, eps1, max_sweeps)
        residuals.extend(vi_residuals)
        codes = problem.greedy_codes(value, lam)
        gap = problem.action_power[codes] - network.p_tot_mw
        worst = float(np.max(gap, initial=0.0))
        violations.append(worst)
        if worst < best_violation - _VIOLATION_TOL:
            best_violation = worst
            stall = 0
        else:
            stall += 1
            if stall >= _OSCILLATION_WINDOW and best_violation > _VIOLATION_TOL:
                raise OscillationError(
                    f"max power violation stuck at {best_violation:.3g} mW for "
                    f"{_OSCILLATION_WINDOW} outer iterations",
                    trace=tuple(violations),
                )
        new_lam = np.maximum(0.0, lam + (beta0 / outer) * gap)
        trace.append((float(new_lam.max()), float(new_lam.mean()), worst))
        # Zero counts as converged only as a fixed point: a multiplier that
        # just bounced down from a positive value has not settled yet.
        at_zero = (new_lam == 0.0) & (lam == 0.0) & (gap <= _VIOLATION_TOL)
        positive = lam > 0.0
        rel = np.abs(new_lam[positive] - lam[positive]) / lam[positive]
        settled = np.zeros(n_states, dtype=bool)
        settled[positive] = rel < eps2
        if np.all(at_zero | settled):
            lam = new_lam
            converged = True
            break
        lam = new_lam
    if not converged:
        raise NonConvergenceError(
            f"multiplier loop did not converge within {max_dual_iters} iterations",
            trace=tuple(violations),
        )
    spends = problem.actions[codes]
    spends = problem.project_feasible(spends)
    policy = Policy(
        scope=PolicyScope.GLOBAL,
        dims=(network.capacity, network.levels, network.harvest_states),
        n_sensors=network.n_sensors,
        table=spends,
    )
    return SolveReport(
        values=value.ravel().copy(),
        policies=(policy,),
        final_multipliers=lam,
        multiplier_trace=np.array(trace),
        trace_columns=("lambda_max", "lambda_mean", "max_violation_mw"),
        residuals=tuple(residuals),
        sweeps=len(residuals),
        dual_iterations=outer,
    )


# ---------------------------------------------------------------------------
# Decentralized solver (shared multiplier, independent sensors)


def stationary_distribution(chain: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic chain by least squares."""
    n = chain.shape[0]
    a = np.vstack([chain.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    dist, *_ = np.linalg.lstsq(a, b, rcond=None)
    dist = np.maximum(dist, 0.0)
    return dist / dist.sum()


_PRICE_DOUBLINGS = 60
_PRICE_BISECTIONS = 60


def _price_feasible(
    mixed: list[np.ndarray],
    base_rewards: list[np.ndarray],
    powers: list[np.ndarray],
    network: NetworkModel,
    eps1: float,
    max_sweeps: int,
    lam: float,
    values: list[np.ndarray],
    actions: list[np.ndarray],
    residuals: list[float],
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Raises the shared price until the worst joint spend fits the budget.

    Local policies read only their own sensor's state, and the sensors'
    states drift independently, so every combination of per-sensor spends
    eventually co-occurs; the joint power cap therefore binds at the sum of
    per-sensor maxima.  When the converged policies exceed that worst-case
    budget, the smallest uniform multiplier restoring it is found by
    doubling and bisection, re-solving the local problems at each trial
    price.  Pricing (rather than clipping spend tables) keeps each policy's
    channel and battery adaptivity intact.
    """
    share = network.p_tot_mw / network.n_sensors

    def worst(acts: list[np.ndarray]) -> float:
        return sum(float(p[a].max()) for p, a in zip(powers, acts))

    def solve_at(price: float, warm: list[np.ndarray]):
        vals, acts = [], []
        for k, kernels in enumerate(mixed):
            rewards = base_rewards[k] + price * (share - powers[k])[None, :]
            result = value_iteration(
                kernels,
                rewards,
                network.discount,
                eps1,
                max_sweeps=max_sweeps,
                initial_value=warm[k],
            )
            residuals.extend(result.residuals)
            vals.append(result.value)
            acts.append(result.actions)
        return vals, acts

    if worst(actions) <= network.p_tot_mw + _VIOLATION_TOL:
        return lam, values, actions
    lo, hi = lam, max(2.0 * lam, 1e-3)
    sol = solve_at(hi, values)
    for _ in range(_PRICE_DOUBLINGS):
        if worst(sol[1]) <= network.p_tot_mw + _VIOLATION_TOL:
            break
        lo, hi = hi, 2.0 * hi
        sol = solve_at(hi, sol[0])
    else:
        raise NumericError(
            f"no shared price up to {hi:.3g} makes the worst-case joint "
            f"spend fit the budget {network.p_tot_mw!r} mW"
        )
    for _ in range(_PRICE_BISECTIONS):
        mid = 0.5 * (lo + hi)
        trial = solve_at(mid, sol[0])
        if worst(trial[1]) <= network.p_tot_mw + _VIOLATION_TOL:
            hi, sol = mid, trial
        else:
            lo = mid
    return hi, sol[0], sol[1]


def solve_suboptimal(
    network: NetworkModel,
    *,
    eps1: float = 1e-4,
    eps2: float = 1e-2,
    beta0: float = 0.5,
    max_sweeps: int = 100_000,
    max_dual_iters: int = 500,
) -> SolveReport:
    """Decentralized constrained solve with one shared multiplier.

    For a fixed multiplier each sensor solves its own value iteration
    against an equal share of the budget; the multiplier then moves along
    the aggregate subgradient — each sensor's expected spend power under
    its greedy policy's stationary state distribution, summed, minus the
    budget.  The expected-power gap is a deterministic, nonincreasing map
    of the multiplier, so once the subgradient steps straddle its root the
    loop switches to bisection and stops at relative interval width eps2;
    a slack budget converges immediately at zero.  If the converged
    policies could still jointly overdraw the budget in their worst
    states, the shared price is raised further to the smallest value
    restoring worst-case feasibility, so the emitted policies stay within
    the budget at every slot; the reported multiplier is that effective
    price.
    """
    sensors = network.sensors
    n_sensors = network.n_sensors
    capacity = network.capacity
    mixed = [
        mix_censoring(build_local_kernels(s), s.censor.silence_prior) for s in sensors
    ]
    base_rewards = [
        local_reward_array(s, t.values) for s, t in zip(sensors, network.reward_tables())
    ]
    powers = [
        np.array([s.battery.spend_power_mw(c) for c in range(capacity + 1)])
        for s in sensors
    ]
    share = network.p_tot_mw / n_sensors
    values = [np.zeros(s.n_local_states) for s in sensors]
    actions = [np.zeros(s.n_local_states, dtype=np.int64) for s in sensors]
    residuals: list[float] = []
    trace: list[tuple[float, float]] = []

    def evaluate(price: float) -> float:
        for k in range(n_sensors):
            rewards = base_rewards[k] + price * (share - powers[k])[None, :]
            result = value_iteration(
                mixed[k],
                rewards,
                network.discount,
                eps1,
                max_sweeps=max_sweeps,
                initial_value=values[k],
            )
            residuals.extend(result.residuals)
            values[k] = result.value
            actions[k] = result.actions
        total = sum(
            float(
                stationary_distribution(
                    mixed[k][actions[k], np.arange(len(actions[k])), :]
                )
                @ powers[k][actions[k]]
            )
            for k in range(n_sensors)
        )
        gap = total - network.p_tot_mw
        trace.append((price, gap))
        return gap

    lam = 0.0
    gap = evaluate(lam)
    bracket = None
    if gap > _VIOLATION_TOL:
        # Subgradient phase: climb with the beta0/i schedule until the gap
        # changes sign. A stalled climb (tiny relative step, gap still
        # positive) finishes the bracket by doubling instead.
        low = 0.0
        for outer in range(1, max_dual_iters + 1):
            new_lam = lam + (beta0 / outer) * gap
            stalled = lam > 0.0 and abs(new_lam - lam) <= eps2 * lam
            lam = new_lam
            gap = evaluate(lam)
            if gap <= _VIOLATION_TOL:
                bracket = (low, lam)
                break
            low = lam
            if stalled:
                break
        if bracket is None:
            hi = max(2.0 * lam, 1e-3)
            for _ in range(_PRICE_DOUBLINGS):
                if evaluate(hi) <= _VIOLATION_TOL:
                    bracket = (low, hi)
                    break
                low, hi = hi, 2.0 * hi
            else:
                raise NonConvergenceError(
                    f"expected-power gap stayed positive up to multiplier {hi:.3g}",
                    trace=tuple(g for _, g in trace),
                )
    if bracket is not None:
        lo, hi = bracket
        for _ in range(_PRICE_BISECTIONS):
            if hi - lo <= eps2 * hi:
                break
            mid = 0.5 * (lo + hi)
            if evaluate(mid) <= _VIOLATION_TOL:
                hi = mid
            else:
                lo = mid
        gap = evaluate(hi)
        lam = hi
    lam, values, actions = _price_feasible(
        mixed, base_rewards, powers, network, eps1, max_sweeps,
        lam, values, actions, residuals,
    )
    dims = (capacity, network.levels, network.harvest_states)
    policies = tuple(
        Policy(scope=PolicyScope.LOCAL, dims=dims, n_sensors=n_sensors, sensor=k + 1, table=actions[k])
        for k in range(n_sensors)
    )
    return SolveReport(
        values=np.stack(values),
        policies=policies,
        final_multipliers=np.array([lam]),
        multiplier_trace=np.array(trace),
        trace_columns=("lambda", "power_gap_mw"),
        residuals=tuple(residuals),
        sweeps=len(residuals),
        dual_iterations=len(trace),
    )


# ---------------------------------------------------------------------------
# Baselines and oracle


def random_policy(network: NetworkModel, rng: np.random.Generator) -> Policy:
    """Uniform feasible spends: per state, a rejection-sampled joint draw.

    Every draw picks each sensor's spend uniformly over 0..battery and is
    accepted once the total power fits the budget; the all-zero vector is
    always acceptable, so acceptance is certain.
    """
    n_sensors = network.n_sensors
    n_local = network.sensors[0].n_local_states
    n_states = n_local**n_sensors
    if 8 * n_states > _MEMORY_LIMIT_BYTES:
        raise GuardError(f"global policy table needs {n_states} states; over the memory limit")
    levels, harvest = network.levels, network.harvest_states
    powers = [
        np.array([s.battery.spend_power_mw(c) for c in range(network.capacity + 1)])
        for s in network.sensors
    ]
    table = np.zeros((n_states, n_sensors), dtype=np.int64)
    for idx in range(n_states):
        state = global_state_from_index(idx, n_sensors, n_local, levels, harvest)
        batteries = [s.b for s in state.locals]
        while True:
            draw = [int(rng.integers(0, b + 1)) for b in batteries]
            if sum(p[c] for p, c in zip(powers, draw)) <= network.p_tot_mw + _VIOLATION_TOL:
                table[idx] = draw
                break
    return Policy(
        scope=PolicyScope.GLOBAL,
        dims=(network.capacity, levels, harvest),
        n_sensors=n_sensors,
        table=table,
    )


def brute_force_policy_oracle(
    kernels: np.ndarray, rewards: np.ndarray, discount: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact best stationary deterministic policy by full enumeration.

    Every policy is evaluated by solving its linear value equations; the
    first maximizer of the summed value (ties resolved toward smaller
    spends by the ascending enumeration order) is returned. Any multiplier
    must already be folded into ``rewards``.

    Args:
        kernels: (actions, n, n) row-stochastic kernels.
        rewards: (n, actions) rewards; -inf removes an action.
        discount: eta in (0, 1).

    Returns:
        (value of the best policy, its action per state).

    Raises:
        GuardError: If the number of policies exceeds 1e6.
    """
    n_actions, n, _ = kernels.shape
    feasible = [np.nonzero(np.isfinite(rewards[s]))[0] for s in range(n)]
    if any(len(f) == 0 for f in feasible):
        raise ParameterError("every state needs at least one feasible action")
    count = 1
    for f in feasible:
        count *= len(f)
        if count > _ORACLE_POLICY_LIMIT:
            raise GuardError(
                f"policy enumeration exceeds {_ORACLE_POLICY_LIMIT} candidates"
            )
    eye = np.eye(n)
    states = np.arange(n)
    best_value = None
    best_policy = None
    best_sum = -np.inf
    for assignment in itertools.product(*feasible):
        pi = np.asarray(assignment)
        chain = kernels[pi, states, :]
        r_pi = rewards[states, pi]
        value = np.linalg.solve(eye - discount * chain, r_pi)
        total = float(value.sum())
        if total > best_sum + _TIE_TOL:
            best_sum = total
            best_value = value
            best_policy = pi
    return best_value, best_policy


def validate_policy(policy: Policy, network: NetworkModel) -> None:
    """Checks battery feasibility everywhere, plus the power cap if global.

    Raises:
        FeasibilityError: On the first violated state.
    """
    levels, harvest = network.levels, network.harvest_states
    n_local = network.sensors[0].n_local_states
    if policy.scope is PolicyScope.LOCAL:
        b_arr, _, _ = state_component_arrays(network.capacity, levels, harvest)
        bad = np.nonzero(policy.table > b_arr)[0]
        if bad.size:
            raise FeasibilityError(
                f"sensor {policy.sensor} policy overspends at state {int(bad[0])}"
            )
        return
    for idx in range(policy.n_states):
        state = global_state_from_index(idx, policy.n_sensors, n_local, levels, harvest)
        spends = policy.table[idx]
        for k, (s, c) in enumerate(zip(state.locals, spends), start=1):
            if c > s.b:
                raise FeasibilityError(f"sensor {k} overspends at global state {idx}")
        if network.total_spend_power_mw(spends) > network.p_tot_mw + _VIOLATION_TOL:
            raise FeasibilityError(f"power cap violated at global state {idx}")


# ---------------------------------------------------------------------------
# Policy serialization


_HEADER_RE = re.compile(
    r"^# model_hash=(?P<hash>[0-9a-f]+), scope=(?P<scope>global|local:\d+), "
    r"K=(?P<K>\d+), L=(?P<L>\d+), M=(?P<M>\d+), N=(?P<N>\d+), version=(?P<version>\d+)$"
)


def write_policy_csv(path, policy: Policy, model_hash: str) -> None:
    """Writes the versioned tabular policy format.

    Line 1 is a metadata comment (model hash, scope, dims, version); line 2
    names the columns; each further line is a state index and its spends.
    """
    scope = (
        "global" if policy.scope is PolicyScope.GLOBAL else f"local:{policy.sensor}"
    )
    capacity, levels, harvest = policy.dims
    columns = policy.table.reshape(policy.n_states, -1)
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# model_hash={model_hash}, scope={scope}, K={capacity}, L={levels}, "
            f"M={harvest}, N={policy.n_sensors}, version=1\n"
        )
        fh.write("state_index," + ",".join(f"spend_{k+1}" for k in range(columns.shape[1])) + "\n")
        for idx in range(policy.n_states):
            fh.write(f"{idx}," + ",".join(str(int(c)) for c in columns[idx]) + "\n")


def read_policy_csv(path) -> tuple[Policy, dict]:
    """Reads the format written by ``write_policy_csv``.

    Returns:
        The policy and a metadata dict with model_hash, scope, and version.
    """
    with open(path, "r", newline="") as fh:
        header = fh.readline().rstrip("\n")
        match = _HEADER_RE.match(header)
        if match is None:
            raise ParameterError(f"unrecognized policy header: {header!r}")
        fh.readline()  # column names
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    meta = match.groupdict()
    dims = (int(meta["K"]), int(meta["L"]), int(meta["M"]))
    n_sensors = int(meta["N"])
    table = np.array([[int(v) for v in row[1:]] for row in rows], dtype=np.int64)
    indices = np.array([int(row[0]) for row in rows])
    if not np.array_equal(indices, np.arange(len(rows))):
        raise ParameterError("policy rows must enumerate state indices in order")
    if meta["scope"] == "global":
        policy = Policy(
            scope=PolicyScope.GLOBAL, dims=dims, n_sensors=n_sensors, table=table
        )
    else:
        sensor = int(meta["scope"].split(":")[1])
        policy = Policy(
            scope=PolicyScope.LOCAL,
            dims=dims,
            n_sensors=n_sensors,
            sensor=sensor,
            table=table[:, 0],
        )
    return policy, {
        "model_hash": meta["hash"],
        "scope": meta["scope"],
        "version": int(meta["version"]),
    }
