"""Fleet aggregation, the optimal aggregate transition, and disaggregation.

The set of feasible *aggregate* charging profiles of a fleet is again a
permutahedron whose generator is the componentwise sum of the device
generators.  Charging ``u`` in the current stage moves the aggregate
state by merging the band of the generator that brackets ``u``; that
successor majorizes the post-state of every feasible way of splitting
``u`` across devices, so it is the best reachable state.  Splitting
proportionally within the active band realizes it exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    InfeasibleActionError,
    InfeasibleFleetError,
    InvalidInputError,
    TerminalStageError,
)
from .flexibility import RTOL, DeviceSpec, Generator, device_generator

__all__ = [
    "FleetState",
    "aggregate_generator",
    "band_index",
    "transition",
    "disaggregate",
    "apply_actions",
]


@dataclass(frozen=True, eq=False)
class FleetState:
    """Per-device remaining demands at a stage boundary.

    ``horizon`` is the number of stages still available; every demand
    must be completable within it at the device's power cap.
    """

    specs: tuple
    demands: np.ndarray
    horizon: int

    def __post_init__(self):
        specs = tuple(self.specs)
        x = np.array(self.demands, dtype=float)
        if x.ndim != 1 or x.size != len(specs):
            raise InvalidInputError("demands must match the device list")
        horizon = int(self.horizon)
        if horizon < 0:
            raise InvalidInputError("horizon must be nonnegative")
        u = np.array([s.u_max for s in specs], dtype=float)
        cap = horizon * u
        tol = RTOL * (1.0 + cap)
        bad = (x < -tol) | (x > cap + tol)
        if np.any(bad):
            raise InfeasibleFleetError([specs[i].id for i in np.flatnonzero(bad)])
        x = np.clip(x, 0.0, None)
        x.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "demands", x)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "_u_max", u)

    @classmethod
    def from_specs(cls, specs, horizon) -> "FleetState":
        """Fresh fleet with every device at its initial demand."""
        return cls(tuple(specs), np.array([s.initial_demand for s in specs]), horizon)

    @property
    def size(self) -> int:
        return len(self.specs)

    @property
    def u_max(self) -> np.ndarray:
        return self._u_max


def _device_caps(fleet):
    """(q, r, u) arrays: cap-stages count, remainder entry, power caps."""
    m = fleet.horizon
    u = fleet.u_max
    x = fleet.demands
    q = np.minimum(np.floor_divide(x, u).astype(int), m - 1)
    r = x - q * u
    return q, r, u


def aggregate_generator(fleet: FleetState) -> Generator:
    """Generator of the fleet's aggregate flexibility set.

    Componentwise sum of the device generators; an empty fleet yields
    the all-zero generator.  Runs in O(N + m) by bucketing devices on
    the number of stages they must spend at the cap.
    """
    m = fleet.horizon
    if m < 1:
        raise InvalidInputError("aggregate generator needs at least one stage")
    if fleet.size == 0:
        return Generator(np.zeros(m))
    u = fleet.u_max
    cap = m * u
    tol = RTOL * (1.0 + cap)
    bad = fleet.demands > cap + tol
    if np.any(bad):
        raise InfeasibleFleetError([fleet.specs[i].id for i in np.flatnonzero(bad)])
    q, r, u = _device_caps(fleet)
    # Device l contributes u_l to the last q_l slots and r_l just before them.
    cap_mass = np.bincount(q, weights=u, minlength=m)
    rem_mass = np.bincount(m - 1 - q, weights=r, minlength=m)
    tail = np.cumsum(cap_mass[::-1])  # tail[j]: mass from devices capped >= m-j stages
    agg = np.concatenate(([0.0], tail[:-1])) + rem_mass
    return Generator(agg)


def band_index(g: Generator, u) -> int:
    """Index k (1-based) of the band [g^k, g^{k+1}] holding the action ``u``.

    At a shared breakpoint the larger band index wins, which matches the
    half-open policy bands used by the recourse weights.  A length-1
    generator has no band and yields 0.
    """
    u = float(u)
    lo, hi = g.values[0], g.values[-1]
    tol = RTOL * (1.0 + max(abs(lo), abs(hi)))
    if u < lo - tol or u > hi + tol:
        raise InfeasibleActionError(f"action {u} outside [{lo}, {hi}]")
    if g.m == 1:
        return 0
    u = min(max(u, lo), hi)
    return int(min(np.searchsorted(g.values, u, side="right"), g.m - 1))


def transition(g: Generator, u) -> Generator:
    """Optimal successor generator after charging ``u`` in the current stage.

    Merges the band around ``u``: entries below it survive, the band
    collapses to ``g^k + g^{k+1} - u``, entries above shift down one
    slot.  Energy is conserved: the successor total is ``total - u``.
    """
    if g.m == 1:
        raise TerminalStageError("no successor state after the final stage")
    k = band_index(g, u)  # validates feasibility
    v = g.values
    h = np.empty(g.m - 1)
    h[: k - 1] = v[: k - 1]
    h[k - 1] = v[k - 1] + v[k] - float(u)
    h[k:] = v[k + 1 :]
    return Generator(h)


def disaggregate(fleet: FleetState, u) -> np.ndarray:
    """Per-device actions realizing the optimal aggregate transition.

    Locates the active band of the aggregate generator and splits ``u``
    proportionally within each device's own band: with
    theta = (u - v~^k) / (v~^{k+1} - v~^k), device l charges
    ``v_l^k + theta * (v_l^{k+1} - v_l^k)``.  Each action is feasible by
    construction, the actions sum to ``u``, and applying them yields a
    fleet whose aggregate generator equals ``transition(v~, u)``.
    """
    u = float(u)
    if fleet.size == 0:
        if abs(u) > RTOL:
            raise InfeasibleActionError("empty fleet can only take action 0")
        return np.zeros(0)
    agg = aggregate_generator(fleet)
    m = fleet.horizon
    if m == 1:
        total = agg.values[0]
        if abs(u - total) > RTOL * (1.0 + abs(total)):
            raise InfeasibleActionError(
                f"final stage forces the aggregate action {total}, got {u}"
            )
        return fleet.demands.copy()
    k = band_index(agg, u)
    width = agg.values[k] - agg.values[k - 1]
    theta = 0.0 if width <= 0.0 else (u - agg.values[k - 1]) / width
    theta = min(max(theta, 0.0), 1.0)
    q, r, umax = _device_caps(fleet)
    pivot = m - 1 - q  # 0-based slot of each device's remainder entry
    vk = _component(k - 1, pivot, r, umax)
    vk1 = _component(k, pivot, r, umax)
    return vk + theta * (vk1 - vk)


def _component(i, pivot, r, umax):
    """Entry i (0-based) of every device generator, vectorized over devices."""
    return np.where(i < pivot, 0.0, np.where(i == pivot, r, umax))


def apply_actions(fleet: FleetState, actions) -> FleetState:
    """Advance the fleet one stage: decrement demands by the actions taken.

    Every action must lie in its device's admissible power interval for
    the current state.
    """
    a = np.asarray(actions, dtype=float)
    if a.shape != fleet.demands.shape:
        raise InvalidInputError("one action per device required")
    m = fleet.horizon
    if m < 1:
        raise TerminalStageError("fleet horizon is exhausted")
    u = fleet.u_max
    x = fleet.demands
    lo = np.maximum(0.0, x - (m - 1) * u)
    hi = np.minimum(u, x)
    tol = RTOL * (1.0 + hi)
    bad = (a < lo - tol) | (a > hi + tol)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InfeasibleActionError(
            f"device {fleet.specs[i].id!r}: action {a[i]} outside "
            f"[{lo[i]}, {hi[i]}]"
        )
    new_x = np.clip(x - a, 0.0, (m - 1) * u if m > 1 else 0.0)
    return FleetState(fleet.specs, new_x, m - 1)
