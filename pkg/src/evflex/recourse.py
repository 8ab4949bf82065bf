"""Exact expected recourse of the aggregate charging problem.

The expected cost-to-go of a fleet entering stage t is *linear* in the
aggregate generator: V_t(g) = sum_i W_t^i g^i with nonincreasing weight
vectors W_t that depend only on the price process, never on the fleet.
The weights obey a backward recursion built from a single primitive,
the expected clamped price:

    W_T = (mean of the final stage price),
    W_t^i = E[ clamp(c_t; W_{t+1}^i, W_{t+1}^{i-1}) ],

with sentinels +inf and -inf at the ends.  The optimal aggregate action
under an observed price c is the generator entry whose index counts the
next-stage weights above c, and the recourse as a function of the
action is piecewise affine with breakpoints at the generator entries,
slope -W_{t+1}^k on the k-th piece.

Everything here is closed form; one backward sweep over the price model
replaces iterative cut generation.
"""

from dataclasses import dataclass

import numpy as np

from .aggregate import FleetState, aggregate_generator, apply_actions, disaggregate, transition
from .errors import InvalidInputError, TerminalStageError
from .flexibility import RTOL, Generator
from .pricing import PriceModel

__all__ = [
    "WeightTable",
    "PiecewiseAffine",
    "SolveResult",
    "SimulationResult",
    "compute_weights",
    "expected_value",
    "optimal_action",
    "stage_value",
    "pwa",
    "solve",
    "simulate",
    "price_response",
]


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Per-stage weight vectors W_1 .. W_T.

    ``stage(t)`` (1-based) has length T - t + 1 and pairs with the
    aggregate generator *entering* stage t, before the stage price is
    observed.  Entries are nonincreasing: they are the ordered expected
    marginal future prices of one more unit of flexibility.
    """

    stages: tuple

    def __post_init__(self):
        stages = tuple(np.asarray(w, dtype=float) for w in self.stages)
        T = len(stages)
        if T < 1:
            raise InvalidInputError("weight table needs at least one stage")
        for t0, w in enumerate(stages):
            if w.shape != (T - t0,):
                raise InvalidInputError(
                    f"stage {t0 + 1} weights must have length {T - t0}, got {w.shape}"
                )
            if not np.all(np.isfinite(w)):
                raise InvalidInputError("weights must be finite")
            tol = RTOL * (1.0 + float(np.max(np.abs(w))))
            if np.any(np.diff(w) > tol):
                raise InvalidInputError(f"stage {t0 + 1} weights are not nonincreasing")
            w.flags.writeable = False
        object.__setattr__(self, "stages", stages)

    @property
    def T(self) -> int:
        return len(self.stages)

    def stage(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.T:
            raise InvalidInputError(f"stage {t} outside 1..{self.T}")
        return self.stages[t - 1]


@dataclass(frozen=True, eq=False)
class PiecewiseAffine:
    """Continuous convex piecewise-affine function on [b_1, b_m].

    Piece k (1-based, k = 1..m-1) covers [breakpoints[k-1],
    breakpoints[k]] with value intercepts[k-1] + slopes[k-1] * u.
    Zero-width pieces are retained so piece k always matches weight
    index k.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        a = np.asarray(self.intercepts, dtype=float)
        if b.ndim != 1 or b.size < 2 or s.shape != (b.size - 1,) or a.shape != s.shape:
            raise InvalidInputError("need m breakpoints with m-1 slopes and intercepts")
        if np.any(np.diff(b) < -RTOL * (1.0 + np.max(np.abs(b)))):
            raise InvalidInputError("breakpoints must be ascending")
        stol = RTOL * (1.0 + float(np.max(np.abs(s))))
        if np.any(np.diff(s) < -stol):
            raise InvalidInputError("slopes must be nondecreasing (convexity)")
        left = a[:-1] + s[:-1] * b[1:-1]
        right = a[1:] + s[1:] * b[1:-1]
        vtol = RTOL * (1.0 + np.maximum(np.abs(left), np.abs(right)))
        if np.any(np.abs(left - right) > vtol):
            raise InvalidInputError("pieces do not agree at interior breakpoints")
        for arr in (b, s, a):
            arr.flags.writeable = False
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "intercepts", a)

    @property
    def num_pieces(self) -> int:
        return self.slopes.size

    def zero_width_pieces(self) -> np.ndarray:
        """Indices (0-based) of degenerate pieces kept for traceability."""
        return np.flatnonzero(np.diff(self.breakpoints) == 0.0)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = np.clip(
            np.searchsorted(self.breakpoints, u, side="right") - 1,
            0,
            self.num_pieces - 1,
        )
        out = self.intercepts[k] + self.slopes[k] * u
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SolveResult:
    expected_cost: float
    weights: WeightTable
    first_stage_pwa: "PiecewiseAffine | None"


@dataclass(frozen=True)
class SimulationResult:
    mean: float
    stderr: float


def compute_weights(model: PriceModel) -> WeightTable:
    """Backward weight recursion over the price model.

    Independent of the fleet; costs O(T^2) clamp queries after the
    per-stage prefix sums.
    """
    T = model.T
    weights = [None] * T
    weights[T - 1] = np.array([model.stages[T - 1].mean()])
    for t0 in range(T - 2, -1, -1):
        nxt = weights[t0 + 1]
        dist = model.stages[t0]
        m = T - t0
        w = np.empty(m)
        for i in range(m):
            lo = nxt[i] if i < m - 1 else -np.inf
            hi = nxt[i - 1] if i > 0 else np.inf
            w[i] = dist.expected_clamp(lo, hi)
        weights[t0] = w
    return WeightTable(tuple(weights))


def expected_value(table: WeightTable, t: int, g: Generator) -> float:
    """Expected cost-to-go of entering stage t with aggregate generator g."""
    w = table.stage(t)
    if g.m != w.size:
        raise InvalidInputError(
            f"stage {t} expects a generator of length {w.size}, got {g.m}"
        )
    return float(w @ g.values)


def optimal_action(table: WeightTable, t: int, g: Generator, c):
    """Optimal aggregate action after observing the stage-t price ``c``.

    Returns ``(u, j_star)`` where ``j_star`` is 1 plus the number of
    next-stage weights strictly above ``c`` and ``u = g^{j_star}``: a
    price above every weight charges the minimum, below every weight
    the maximum.  At the final stage the action is forced to ``g^1``.
    """
    _check_state(table, t, g)
    if t == table.T:
        return float(g.values[0]), 1
    w_next = table.stage(t + 1)
    j_star = 1 + int(np.count_nonzero(w_next > c))
    return float(g.values[j_star - 1]), j_star


def stage_value(table: WeightTable, t: int, g: Generator, c) -> float:
    """Optimal cost-to-go at stage t after observing the price ``c``."""
    _check_state(table, t, g)
    c = float(c)
    if t == table.T:
        return c * float(g.values[0])
    u, _ = optimal_action(table, t, g, c)
    return c * u + expected_value(table, t + 1, transition(g, u))


def pwa(table: WeightTable, t: int, g: Generator) -> PiecewiseAffine:
    """Expected recourse as a function of the stage-t aggregate action.

    Breakpoints are the generator entries; on piece k the slope is
    ``-W_{t+1}^k`` and the intercept collects the weighted generator
    entries outside the active band.  Zero-width pieces are kept.
    """
    _check_state(table, t, g)
    if t == table.T:
        raise TerminalStageError("no recourse beyond the final stage")
    w = table.stage(t + 1)
    v = g.values
    prefix = np.cumsum(w * v[:-1])  # sum_{i <= k} W^i g^i
    suffix = np.cumsum((w * v[1:])[::-1])[::-1]  # sum_{i >= k} W^i g^{i+1}
    return PiecewiseAffine(v, -w, prefix + suffix)


def solve(fleet: FleetState, model: PriceModel) -> SolveResult:
    """Exact expected cost and recourse structure for a fleet.

    The expected cost averages over the first stage price as well; the
    first-stage piecewise-affine recourse is ``None`` for a one-stage
    horizon (the action is forced there).
    """
    if fleet.horizon != model.T:
        raise InvalidInputError(
            f"fleet horizon {fleet.horizon} != price model stages {model.T}"
        )
    table = compute_weights(model)
    g = aggregate_generator(fleet)
    cost = expected_value(table, 1, g)
    first = pwa(table, 1, g) if model.T >= 2 else None
    return SolveResult(cost, table, first)


def simulate(fleet: FleetState, model: PriceModel, paths: int, seed) -> SimulationResult:
    """Monte Carlo rollout of the exact policy with device-level dispatch.

    Prices are drawn stage-by-stage from a numpy ``default_rng(seed)``
    stream (all paths of stage 1 first, then stage 2, and so on), so
    results are reproducible bit-for-bit for a given seed.  Every
    rollout must finish with all demands at zero.
    """
    paths = int(paths)
    if paths < 1:
        raise InvalidInputError("need at least one path")
    if fleet.horizon != model.T:
        raise InvalidInputError("fleet horizon must match the price model")
    table = compute_weights(model)
    rng = np.random.default_rng(seed)
    prices = np.column_stack(
        [model.stages[t0].sample_many(rng, paths) for t0 in range(model.T)]
    )
    total_demand = float(fleet.demands.sum())
    costs = np.empty(paths)
    for p in range(paths):
        state = fleet
        cost = 0.0
        for t in range(1, model.T + 1):
            c = float(prices[p, t - 1])
            g = aggregate_generator(state)
            u, _ = optimal_action(table, t, g, c)
            state = apply_actions(state, disaggregate(state, u))
            cost += c * u
        if state.size and float(np.max(state.demands)) > RTOL * (1.0 + total_demand):
            raise RuntimeError("rollout left unmet demand; policy bug")
        costs[p] = cost
    mean = float(costs.mean())
    stderr = float(costs.std(ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0
    return SimulationResult(mean, stderr)


def price_response(fleet: FleetState, model: PriceModel, price_grid):
    """Optimal first-stage aggregate consumption over a grid of observed prices.

    Returns an array of (price, power) rows; the power column is
    nonincreasing and saturates at the aggregate power bounds.
    """
    grid = np.asarray(price_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("price grid must be a nonempty 1-d vector")
    table = compute_weights(model)
    g = aggregate_generator(fleet)
    if model.T == 1:
        u = np.full(grid.size, float(g.values[0]))
    else:
        w_next = table.stage(2)
        ascending = w_next[::-1]
        above = w_next.size - np.searchsorted(ascending, grid, side="right")
        u = g.values[above]  # j* - 1 == count of weights above the price
    return np.column_stack((grid, u))


def _check_state(table, t, g):
    if not 1 <= t <= table.T:
        raise InvalidInputError(f"stage {t} outside 1..{table.T}")
    if g.m != table.T - t + 1:
        raise InvalidInputError(
            f"stage {t} expects a generator of length {table.T - t + 1}, got {g.m}"
        )
