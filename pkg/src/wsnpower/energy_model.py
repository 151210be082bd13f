"""Energy harvesting and finite-battery dynamics.

Energy is tracked in integer battery cells throughout; transmit amplitudes
are derived quantities of the per-cell energy and the slot length. The
harvest process is a tridiagonal Markov chain over a strictly increasing set
of cell amounts, parameterized by a persistence probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FeasibilityError, ParameterError
from .fading_channel import FsmcModel


@dataclass(frozen=True)
class BatterySpec:
    """Finite battery geometry and timing.

    Attributes:
        capacity: Battery size K in cells; states are 0..K.
        cell_energy_j: Energy per cell in Joules.
        slot_s: Slot length in seconds.
    """

    capacity: int
    cell_energy_j: float
    slot_s: float

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ParameterError(f"capacity must be >= 1 cell, got {self.capacity}")
        if not self.cell_energy_j > 0.0:
            raise ParameterError(f"cell_energy_j must be > 0, got {self.cell_energy_j!r}")
        if not self.slot_s > 0.0:
            raise ParameterError(f"slot_s must be > 0, got {self.slot_s!r}")

    @property
    def cell_power_mw(self) -> float:
        """Transmit power of one cell spent over one slot, in mW."""
        return 1e3 * self.cell_energy_j / self.slot_s

    def spend_power_mw(self, cells) -> np.ndarray | float:
        """Transmit power in mW when spending the given number of cells."""
        return np.asarray(cells, dtype=float) * self.cell_power_mw if np.ndim(cells) else (
            float(cells) * self.cell_power_mw
        )

    def signal_amplitude(self, cells) -> np.ndarray | float:
        """Transmit amplitude whose square is the spend power in mW.

        All detection-side quantities (divergence, fusion, noise variances)
        work in this sqrt-mW amplitude scale so that a unit noise variance
        means 1 mW.
        """
        return np.sqrt(self.spend_power_mw(cells))

    def amplitude_si(self, cells) -> np.ndarray | float:
        """Transmit amplitude in SI units: sqrt(cells * cell_energy_j / slot_s)."""
        return np.sqrt(np.asarray(cells, dtype=float) * self.cell_energy_j / self.slot_s) if np.ndim(
            cells
        ) else math.sqrt(float(cells) * self.cell_energy_j / self.slot_s)


@dataclass(frozen=True)
class HarvestSpec:
    """Markov energy-arrival process in battery-cell units.

    Attributes:
        levels: Strictly increasing nonnegative harvest amounts, in cells.
        chain: Column-stochastic chain over the levels.
        persistence: Probability of staying in the current harvest state.
    """

    levels: tuple[int, ...]
    chain: FsmcModel
    persistence: float

    def __post_init__(self) -> None:
        if any(e < 0 or e != int(e) for e in self.levels):
            raise ParameterError(f"harvest levels must be nonnegative integers, got {self.levels}")
        if not all(a < b for a, b in zip(self.levels[:-1], self.levels[1:])):
            raise ParameterError(f"harvest levels must be strictly increasing, got {self.levels}")
        if len(self.levels) != self.chain.n_states:
            raise ParameterError(
                f"{len(self.levels)} levels but chain has {self.chain.n_states} states"
            )

    @property
    def n_states(self) -> int:
        return len(self.levels)


def build_harvest_chain(persistence: float, n_states: int, levels) -> HarvestSpec:
    """Builds the tridiagonal harvest chain.

    Boundary states stay with the persistence probability and move inward
    with the remainder; interior states stay with the persistence probability
    and split the remainder between both neighbors.

    Args:
        persistence: Stay probability in (0, 1).
        n_states: Number of harvest states M >= 2.
        levels: M strictly increasing nonnegative cell amounts.

    Returns:
        The harvest process with its exact stationary distribution.
    """
    if not 0.0 < persistence < 1.0:
        raise ParameterError(f"persistence must be in (0, 1), got {persistence!r}")
    if n_states < 2:
        raise ParameterError(f"need at least 2 harvest states, got {n_states}")
    levels = tuple(int(e) for e in levels)
    if len(levels) != n_states:
        raise ParameterError(f"expected {n_states} levels, got {len(levels)}")

    rho = persistence
    move = 1.0 - rho
    transition = np.zeros((n_states, n_states))
    for m in range(n_states):
        transition[m, m] = rho
        if m == 0:
            transition[1, 0] = move
        elif m == n_states - 1:
            transition[m - 1, m] = move
        else:
            transition[m - 1, m] = 0.5 * move
            transition[m + 1, m] = 0.5 * move

    stationary = _birth_death_stationary(transition)
    return HarvestSpec(
        levels=levels,
        chain=FsmcModel(
            state_values=tuple(float(e) for e in levels),
            stationary=stationary,
            transition=transition,
        ),
        persistence=persistence,
    )


def _birth_death_stationary(transition: np.ndarray) -> tuple[float, ...]:
    """Stationary law of a tridiagonal column-stochastic chain.

    Detailed balance gives pi_{m+1}/pi_m as the ratio of the up-rate from m
    to the down-rate from m+1.
    """
    m = transition.shape[0]
    weights = np.ones(m)
    for i in range(m - 1):
        up = transition[i + 1, i]
        down = transition[i, i + 1]
        weights[i + 1] = weights[i] * up / down
    weights /= weights.sum()
    return tuple(float(w) for w in weights)


def battery_step(b, e, spent_cells, capacity: int):
    """Next battery level: min(max(b + e - spent, 0), capacity).

    Accepts scalars or aligned integer arrays.

    Args:
        b: Current battery level(s) in 0..capacity.
        e: Harvested cells this slot, nonnegative.
        spent_cells: Cells spent this slot; must not exceed b.
        capacity: Battery size K.

    Raises:
        ParameterError: If a level or harvest amount is out of range.
        FeasibilityError: If any spend exceeds its battery level.
    """
    b = np.asarray(b)
    e = np.asarray(e)
    spent = np.asarray(spent_cells)
    if np.any(b < 0) or np.any(b > capacity):
        raise ParameterError(f"battery level outside 0..{capacity}")
    if np.any(e < 0):
        raise ParameterError("harvested cells must be nonnegative")
    if np.any(spent < 0):
        raise ParameterError("spent cells must be nonnegative")
    if np.any(spent > b):
        raise FeasibilityError("spend exceeds the battery level that issued it")
    nxt = np.minimum(np.maximum(b + e - spent, 0), capacity)
    return nxt if nxt.ndim else int(nxt)


def feasible_spend_set(b: int) -> tuple[int, ...]:
    """Spend options at battery level b: the cells 0..b in ascending order."""
    if b < 0:
        raise ParameterError(f"battery level must be nonnegative, got {b}")
    return tuple(range(int(b) + 1))
