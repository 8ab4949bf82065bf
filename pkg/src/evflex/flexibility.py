"""Per-device charging flexibility and permutahedron primitives.

A device that must absorb a fixed amount of energy before a deadline,
subject to a per-stage power cap, has a set of feasible future charging
profiles equal to the permutahedron of a simple sorted vector, its
*generator*.  Everything the rest of the package needs from these
polytopes reduces to cheap vector arithmetic on generators: Minkowski
sums are componentwise sums, linear programs are solved by sorting,
membership is a majorization check, and the coordinate projection is
just the (first, last) entry pair.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDeviceError, InvalidInputError

#: Relative tolerance used for all floating-point comparisons on generators.
RTOL = 1e-9


def _scale(*arrays):
    """Tolerance scale: one plus the largest magnitude across the inputs."""
    return 1.0 + max(float(np.max(np.abs(a))) if a.size else 0.0 for a in arrays)


@dataclass(frozen=True)
class DeviceSpec:
    """Static charging parameters of one device.

    ``u_max`` is the per-stage power cap (energy per stage, stages have
    unit duration) and must be strictly positive.  ``initial_demand`` is
    the energy the device still requires at the start of the horizon.
    Feasibility against a horizon (demand <= T * u_max) is checked when a
    fleet is assembled, not here.
    """

    id: str
    u_max: float
    initial_demand: float

    def __post_init__(self):
        if not np.isfinite(self.u_max) or self.u_max <= 0:
            raise InvalidInputError(f"device {self.id!r}: u_max must be positive")
        if not np.isfinite(self.initial_demand) or self.initial_demand < 0:
            raise InvalidInputError(f"device {self.id!r}: demand must be nonnegative")


@dataclass(frozen=True, eq=False)
class Generator:
    """Ascending generator vector of a permutahedron.

    Construction sorts away round-off inversions but rejects genuine
    order violations (anything beyond ``RTOL`` relative) so that bugs in
    callers surface instead of being silently repaired.  The stored
    array is read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InvalidInputError("generator must be a nonempty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("generator entries must be finite")
        if np.any(np.diff(v) < -RTOL * _scale(v)):
            raise InvalidInputError("generator entries are not ascending")
        v = np.sort(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        """Number of stages the generator spans."""
        return self.values.size

    @property
    def total(self) -> float:
        """Total energy carried by the polytope (invariant over its points)."""
        return float(self.values.sum())

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"Generator({np.array2string(self.values, separator=', ')})"


def device_generator(remaining_demand, u_max, m) -> Generator:
    """Generator of one device's feasible future charging profiles.

    The vector has ``m`` entries: zeros for the stages the device can
    afford to idle, one fractional remainder, then ``u_max`` for every
    stage it must run flat out.  A fully saturated device (demand equal
    to ``m * u_max``) charges at the cap in every stage.

    Args:
        remaining_demand: energy still required, nonnegative.
        u_max: per-stage power cap, positive.
        m: number of stages remaining, at least 1.

    Raises:
        InvalidInputError: on a negative demand or bad parameters.
        InfeasibleDeviceError: when the demand cannot be met by the
            deadline even charging at the cap throughout.
    """
    m = int(m)
    if m < 1:
        raise InvalidInputError("horizon m must be at least 1")
    if u_max <= 0:
        raise InvalidInputError("u_max must be positive")
    x = float(remaining_demand)
    if x < 0:
        raise InvalidInputError("remaining demand must be nonnegative")
    cap = m * u_max
    if x > cap + RTOL * (1.0 + cap):
        raise InfeasibleDeviceError(
            f"demand {x} exceeds the reachable energy {cap} over {m} stages"
        )
    x = min(x, cap)
    q = min(int(x // u_max), m - 1)  # stages forced to run at the cap
    v = np.empty(m)
    v[: m - q - 1] = 0.0
    v[m - q - 1] = x - q * u_max
    v[m - q :] = u_max
    return Generator(v)


def _check_equal_length(n_a, n_b):
    if n_a != n_b:
        raise InvalidInputError(f"length mismatch: {n_a} != {n_b}")


def minkowski_generator(a: Generator, b: Generator) -> Generator:
    """Generator of the Minkowski sum of two permutahedra (componentwise sum)."""
    _check_equal_length(a.m, b.m)
    return Generator(a.values + b.values)


def _partial_sums_dominated(inner_sorted, outer_sorted, tol):
    """Every top-k partial sum of ``inner`` bounded by ``outer``'s (both ascending)."""
    inner_tops = np.cumsum(inner_sorted[::-1])
    outer_tops = np.cumsum(outer_sorted[::-1])
    return bool(np.all(inner_tops <= outer_tops + tol))


def majorizes(a: Generator, b: Generator) -> bool:
    """True when ``b`` majorizes ``a``, i.e. the polytope of ``a`` sits inside ``b``'s.

    Requires equal totals; every sum of the k largest entries of ``a``
    must stay below the matching sum for ``b``.
    """
    _check_equal_length(a.m, b.m)
    tol = RTOL * _scale(a.values, b.values)
    if abs(a.total - b.total) > tol:
        return False
    return _partial_sums_dominated(a.values, b.values, tol)


def min_lp(cost, g: Generator):
    """Minimize ``cost . u`` over the permutahedron of ``g`` by sorting.

    The optimal value pairs the costs sorted descending with the
    ascending generator entries.  The returned vertex places the
    smallest generator entries at the positions of the largest costs;
    equal costs keep their original order (stable sort), so the vertex
    is reproducible.

    Returns:
        (value, vertex) with ``vertex`` a point of the polytope
        achieving ``value``.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 1:
        raise InvalidInputError("cost must be a 1-d vector")
    _check_equal_length(c.size, g.m)
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("cost entries must be finite")
    order = np.argsort(-c, kind="stable")  # descending, ties by original index
    value = float(c[order] @ g.values)
    vertex = np.empty(g.m)
    vertex[order] = g.values
    return value, vertex


def admissible_interval(g: Generator):
    """Feasible instantaneous power: the polytope projected on any coordinate."""
    return float(g.values[0]), float(g.values[-1])


def contains(g: Generator, profile) -> bool:
    """Membership test: equal total and the sorted profile majorized by ``g``."""
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1:
        raise InvalidInputError("profile must be a 1-d vector")
    _check_equal_length(p.size, g.m)
    tol = RTOL * _scale(g.values, p)
    if abs(float(p.sum()) - g.total) > tol:
        return False
    return _partial_sums_dominated(np.sort(p), g.values, tol)
