"""Stage-wise independent discrete price process.

Each stage carries its own discrete marginal distribution of the
imbalance price.  The only nontrivial query the solver needs is the
expected clamped price E[min(max(c, lo), hi)], served in O(log n) per
call from prefix sums over the sorted support.  Distributions can be
built from raw settlement-period records, synthesized from normal laws,
or written down directly; prices may be negative throughout.
"""

import csv
import datetime
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import IncompleteDataError, InvalidInputError, ParseError

_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StageDistribution:
    """Discrete price distribution for one stage.

    The support is kept strictly ascending; duplicate prices passed to
    the constructor are merged by summing their probabilities.
    """

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if s.ndim != 1 or p.ndim != 1 or s.size != p.size or s.size == 0:
            raise InvalidInputError("support and probs must be matching 1-d vectors")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(p))):
            raise InvalidInputError("support and probs must be finite")
        if np.any(p < 0):
            raise InvalidInputError("probabilities must be nonnegative")
        if abs(float(p.sum()) - 1.0) > _PROB_TOL:
            raise InvalidInputError(f"probabilities sum to {p.sum()!r}, expected 1")
        s, inverse = np.unique(s, return_inverse=True)
        p = np.bincount(inverse, weights=p, minlength=s.size)
        cum_p = np.concatenate(([0.0], np.cumsum(p)))
        cum_ps = np.concatenate(([0.0], np.cumsum(p * s)))
        for name, arr in (("support", s), ("probs", p)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_cum_p", cum_p)
        object.__setattr__(self, "_cum_ps", cum_ps)

    @classmethod
    def from_samples(cls, prices) -> "StageDistribution":
        """Equal-weight empirical distribution of the observed prices."""
        prices = np.asarray(prices, dtype=float)
        if prices.size == 0:
            raise InvalidInputError("need at least one price sample")
        return cls(prices, np.full(prices.size, 1.0 / prices.size))

    @classmethod
    def point_mass(cls, price) -> "StageDistribution":
        return cls(np.array([price]), np.array([1.0]))

    def mean(self) -> float:
        return float(self._cum_ps[-1])

    def min_price(self) -> float:
        return float(self.support[0])

    def prob_below(self, a) -> float:
        """P(c < a), strict."""
        i = np.searchsorted(self.support, a, side="left")
        return float(self._cum_p[i])

    def expected_clamp(self, lo, hi) -> float:
        """E[min(max(c, lo), hi)]; the bounds may be -inf / +inf."""
        if np.isnan(lo) or np.isnan(hi) or lo > hi:
            raise InvalidInputError(f"need lo <= hi, got ({lo}, {hi})")
        i_lo = np.searchsorted(self.support, lo, side="left")
        i_hi = np.searchsorted(self.support, hi, side="right")
        i_hi = max(i_hi, i_lo)
        below = float(self._cum_p[i_lo])
        above = float(self._cum_p[-1] - self._cum_p[i_hi])
        value = float(self._cum_ps[i_hi] - self._cum_ps[i_lo])
        if below > 0.0:
            value += lo * below
        if above > 0.0:
            value += hi * above
        return value

    def three_term_weight(self, w_lo, w_hi) -> float:
        """Three-term truncated expectation, equal to ``expected_clamp``.

        P(c < w_lo) w_lo + P(c >= w_hi) w_hi + E[c; w_lo <= c < w_hi],
        with boundary atoms assigned half-open (low side in, high side
        out).  Kept as an independent formulation for cross-checking.
        """
        if np.isnan(w_lo) or np.isnan(w_hi) or w_lo > w_hi:
            raise InvalidInputError(f"need w_lo <= w_hi, got ({w_lo}, {w_hi})")
        i_lo = np.searchsorted(self.support, w_lo, side="left")
        i_hi = np.searchsorted(self.support, w_hi, side="left")
        below = float(self._cum_p[i_lo])
        above = float(self._cum_p[-1] - self._cum_p[i_hi])
        value = float(self._cum_ps[i_hi] - self._cum_ps[i_lo])
        if below > 0.0:
            value += w_lo * below
        if above > 0.0:
            value += w_hi * above
        return value

    def sample(self, rng) -> float:
        """One inverse-CDF draw from a caller-owned numpy generator."""
        return float(self.support[self._draw_index(rng.random())])

    def sample_many(self, rng, size) -> np.ndarray:
        return self.support[self._draw_index(rng.random(size))]

    def _draw_index(self, u):
        idx = np.searchsorted(self._cum_p[1:], u, side="right")
        return np.minimum(idx, self.support.size - 1)


@dataclass(frozen=True, eq=False)
class PriceModel:
    """Sequence of per-stage price distributions (stage-wise independent)."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise InvalidInputError("a price model needs at least one stage")
        if not all(isinstance(s, StageDistribution) for s in stages):
            raise InvalidInputError("stages must be StageDistribution instances")
        object.__setattr__(self, "stages", stages)

    @property
    def T(self) -> int:
        return len(self.stages)

    def stage(self, t: int) -> StageDistribution:
        """Distribution of the stage-``t`` price, ``t`` counted from 1."""
        if not 1 <= t <= self.T:
            raise InvalidInputError(f"stage {t} outside 1..{self.T}")
        return self.stages[t - 1]


def from_records(records, periods_per_day: int) -> PriceModel:
    """Empirical price model from (date, period, price) records.

    Stage t is the equal-weight empirical distribution of all prices
    observed at settlement period t; records may arrive in any order.

    Raises:
        InvalidInputError: a record's period falls outside 1..periods_per_day.
        IncompleteDataError: some period has no records at all.
    """
    P = int(periods_per_day)
    if P < 1:
        raise InvalidInputError("periods_per_day must be at least 1")
    buckets = [[] for _ in range(P)]
    for date, period, price in records:
        period = int(period)
        if not 1 <= period <= P:
            raise InvalidInputError(f"period {period} outside 1..{P} (date {date})")
        buckets[period - 1].append(float(price))
    missing = [t + 1 for t in range(P) if not buckets[t]]
    if missing:
        raise IncompleteDataError(missing)
    return PriceModel(tuple(StageDistribution.from_samples(b) for b in buckets))


def read_price_csv(path):
    """Parse a ``date,period,price`` CSV into records for ``from_records``.

    The header line is required.  ``date`` must be ISO (YYYY-MM-DD),
    ``period`` a positive integer, ``price`` a decimal (negative allowed).
    """
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "empty file, expected header 'date,period,price'")
        if [h.strip() for h in header] != ["date", "period", "price"]:
            raise ParseError(1, f"bad header {header!r}, expected date,period,price")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(lineno, f"expected 3 fields, got {len(row)}")
            date_s, period_s, price_s = (f.strip() for f in row)
            try:
                date = datetime.date.fromisoformat(date_s)
            except ValueError:
                raise ParseError(lineno, f"bad ISO date {date_s!r}")
            try:
                period = int(period_s)
                if period < 1:
                    raise ValueError
            except ValueError:
                raise ParseError(lineno, f"bad period {period_s!r}")
            try:
                price = float(price_s)
                if not np.isfinite(price):
                    raise ValueError
            except ValueError:
                raise ParseError(lineno, f"bad price {price_s!r}")
            records.append((date, period, price))
    return records


def synthetic_normal(means, stds, grid: int) -> PriceModel:
    """Per-stage normal laws discretized on equiprobable quantile midpoints.

    Stage t places mass 1/grid on the quantiles at (j - 0.5) / grid of
    N(means[t], stds[t]); a zero deviation collapses to a point mass.
    """
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    grid = int(grid)
    if means.ndim != 1 or means.size == 0 or means.shape != stds.shape:
        raise InvalidInputError("means and stds must be matching 1-d vectors")
    if np.any(stds < 0) or not np.all(np.isfinite(means)) or not np.all(np.isfinite(stds)):
        raise InvalidInputError("stds must be finite and nonnegative")
    if grid < 1:
        raise InvalidInputError("grid must be at least 1")
    z = np.array([NormalDist().inv_cdf((j + 0.5) / grid) for j in range(grid)])
    stages = []
    for mu, sd in zip(means, stds):
        if sd == 0.0:
            stages.append(StageDistribution.point_mass(mu))
        else:
            stages.append(StageDistribution(mu + sd * z, np.full(grid, 1.0 / grid)))
    return PriceModel(tuple(stages))
