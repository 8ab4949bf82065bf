"""Independent brute-force verifiers.

Nothing here shares code paths with the fast solver: the scenario tree
builds the full deterministic-equivalent LP over price histories, the
permutation LP enumerates all orderings, and the support function works
from the rearrangement pairing.  Oracles never approximate; anything
too large to enumerate raises instead of truncating.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .aggregate import FleetState
from .errors import (
    InfeasibleActionError,
    InfeasibleFleetError,
    InstanceTooLargeError,
    InvalidInputError,
)
from .flexibility import RTOL, Generator
from .pricing import PriceModel
from .simplex import LinearProgram, solve_lp

MAX_TREE_NODES = 10_000
MAX_PERM_LENGTH = 8


@dataclass(frozen=True)
class TreeNode:
    """One price-history prefix: the price observed at ``stage`` plus ancestry."""

    stage: int
    price: float
    prob: float
    parent: int


@dataclass(frozen=True)
class ScenarioTree:
    """All price-history prefixes of a model, root first.

    Node 0 is a sentinel root (stage 0, probability 1, no price); the
    children of each node enumerate the next stage's support, and their
    probabilities sum to the parent's.
    """

    nodes: tuple

    @classmethod
    def build(cls, model: PriceModel, max_nodes: int = MAX_TREE_NODES) -> "ScenarioTree":
        nodes = [TreeNode(0, np.nan, 1.0, -1)]
        frontier = [0]
        for t in range(1, model.T + 1):
            dist = model.stages[t - 1]
            grown = len(nodes) - 1 + len(frontier) * dist.support.size
            if grown + 1 > max_nodes:
                raise InstanceTooLargeError(
                    f"scenario tree would exceed {max_nodes} nodes at stage {t}"
                )
            new_frontier = []
            for parent in frontier:
                p_parent = nodes[parent].prob
                for price, prob in zip(dist.support, dist.probs):
                    new_frontier.append(len(nodes))
                    nodes.append(TreeNode(t, float(price), p_parent * float(prob), parent))
            frontier = new_frontier
        return cls(tuple(nodes))

    @property
    def decision_nodes(self):
        return [i for i, nd in enumerate(self.nodes) if nd.stage >= 1]

    def leaves(self, T):
        return [i for i, nd in enumerate(self.nodes) if nd.stage == T]

    def path(self, leaf):
        """Node indices from the stage-1 ancestor down to ``leaf``."""
        out = []
        i = leaf
        while i > 0:
            out.append(i)
            i = self.nodes[i].parent
        return out[::-1]


@dataclass(frozen=True)
class ScenarioTreeResult:
    value: float
    #: rows are the stage-1 price atoms in support order, columns the devices
    first_stage_actions: np.ndarray


def scenario_tree_value(fleet: FleetState, model: PriceModel) -> ScenarioTreeResult:
    """Exact value of the charging problem by one deterministic-equivalent LP.

    One decision per device per price-history node keeps the policy
    measurable; along every root-to-leaf path each device's actions must
    add up to its initial demand.
    """
    if fleet.horizon != model.T:
        raise InvalidInputError("fleet horizon must match the price model")
    tree = ScenarioTree.build(model)
    decision = tree.decision_nodes
    col_of = {node: k for k, node in enumerate(decision)}
    N = fleet.size
    n_vars = len(decision) * N
    if N == 0:
        return ScenarioTreeResult(0.0, np.zeros((model.stages[0].support.size, 0)))

    u_max = fleet.u_max
    objective = np.zeros(n_vars)
    bounds = []
    for node in decision:
        nd = tree.nodes[node]
        k = col_of[node]
        objective[k * N : (k + 1) * N] = nd.prob * nd.price
    for _ in decision:
        bounds.extend((0.0, float(u)) for u in u_max)

    constraints = []
    for leaf in tree.leaves(model.T):
        path_cols = [col_of[i] for i in tree.path(leaf)]
        for l in range(N):
            row = np.zeros(n_vars)
            for k in path_cols:
                row[k * N + l] = 1.0
            constraints.append((row, "==", float(fleet.demands[l])))

    sol = solve_lp(LinearProgram(objective, constraints, bounds))
    if sol.status == "infeasible":
        raise InfeasibleFleetError([s.id for s in fleet.specs],
                                   "scenario tree LP infeasible")
    if sol.status != "optimal":
        raise RuntimeError(f"scenario tree LP ended {sol.status}")

    first_nodes = [i for i in decision if tree.nodes[i].stage == 1]
    first = np.array(
        [sol.x[col_of[i] * N : col_of[i] * N + N] for i in first_nodes]
    )
    return ScenarioTreeResult(float(sol.objective), first)


def perm_lp_bruteforce(cost, g: Generator) -> float:
    """min over all permutations of cost . permuted(g); reference for the sort LP."""
    c = np.asarray(cost, dtype=float)
    if c.size != g.m:
        raise InvalidInputError("cost and generator lengths differ")
    if g.m > MAX_PERM_LENGTH:
        raise InstanceTooLargeError(f"{g.m}! permutations is too many to enumerate")
    best = np.inf
    for perm in itertools.permutations(g.values):
        best = min(best, float(c @ np.array(perm)))
    return best


def support_function(g: Generator, direction) -> float:
    """max of direction . u over the permutahedron (descending pairing)."""
    d = np.asarray(direction, dtype=float)
    if d.size != g.m:
        raise InvalidInputError("direction and generator lengths differ")
    return float(np.sort(d)[::-1] @ g.values[::-1])


def random_feasible_disaggregation(fleet: FleetState, u, rng) -> np.ndarray:
    """A feasible but arbitrary split of the aggregate action ``u``.

    Randomized water-filling: every device starts at its lower bound and
    the remainder is poured into devices in random order up to their
    upper bounds.  Used to generate the alternative policies that the
    optimal transition must dominate.
    """
    m = fleet.horizon
    x = fleet.demands
    caps = fleet.u_max
    lo = np.maximum(0.0, x - (m - 1) * caps)
    hi = np.minimum(caps, x)
    u = float(u)
    tol = RTOL * (1.0 + abs(u))
    if u < lo.sum() - tol or u > hi.sum() + tol:
        raise InfeasibleActionError(
            f"aggregate action {u} outside [{lo.sum()}, {hi.sum()}]"
        )
    actions = lo.copy()
    remainder = min(max(u - lo.sum(), 0.0), (hi - lo).sum())
    for l in rng.permutation(fleet.size):
        if remainder <= 0:
            break
        pour = min(remainder, hi[l] - actions[l])
        actions[l] += pour
        remainder -= pour
    return actions
