"""Threshold search space: discrete value sets, pairing constraints, sampling.

A control vector has d = 2*tau coordinates. Coordinate j in [0, tau) is the
lower threshold of pair j and coordinate j + tau is its upper threshold. Two
analytic constraints apply:

* c1 -- in discrete mode every coordinate must be a member of its value set;
  in continuous mode it must lie inside [min, max] of that set.
* c2 -- lower <= upper for every pair (non-strict).

Control vectors are plain float64 numpy arrays; the space object carries all
structure (which set a coordinate belongs to, pairing, mode).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

MEMBERSHIP_ATOL = 1e-9

# Mixed into per-row seeds so repair streams never collide with the batch
# stream derived from the same key.
_REPAIR_TAG = 0x5E9A1


class DimensionMismatchError(ValueError):
    """Vector length does not match the space dimensionality (structural)."""


class EnumerationCeilingError(RuntimeError):
    """Admissible-set enumeration would exceed the configured ceiling."""

    def __init__(self, count: int, ceiling: int):
        self.count = count
        self.ceiling = ceiling
        super().__init__(
            f"admissible set has {count} vectors, above the ceiling of {ceiling}"
        )


class DiscreteSet:
    """Ordered, strictly increasing set of threshold levels (meters)."""

    __slots__ = ("values",)

    def __init__(self, values):
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("a threshold set needs at least one value")
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise ValueError("threshold set values must be strictly increasing")
        vals.setflags(write=False)
        self.values = vals

    @classmethod
    def from_range(cls, vmin: float, vmax: float, step: float) -> "DiscreteSet":
        """Uniform grid min..max inclusive; cardinality (max-min)/step + 1."""
        if step <= 0:
            raise ValueError("step must be positive")
        n = int(round((vmax - vmin) / step)) + 1
        if n < 1 or abs(vmin + (n - 1) * step - vmax) > MEMBERSHIP_ATOL:
            raise ValueError(f"range ({vmin}, {vmax}) is not a whole number of steps {step}")
        return cls(vmin + step * np.arange(n))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        return isinstance(other, DiscreteSet) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"DiscreteSet({self.values[0]}..{self.values[-1]}, n={len(self)})"

    @property
    def min(self) -> float:
        return float(self.values[0])

    @property
    def max(self) -> float:
        return float(self.values[-1])

    def contains(self, v: float) -> bool:
        i = np.searchsorted(self.values, v)
        for j in (i - 1, i):
            if 0 <= j < self.values.size and abs(self.values[j] - v) <= MEMBERSHIP_ATOL:
                return True
        return False

    def nearest(self, v: float) -> float:
        return float(self.values[self.nearest_index(v)])

    def nearest_index(self, v: float) -> int:
        i = int(np.searchsorted(self.values, v))
        if i <= 0:
            return 0
        if i >= self.values.size:
            return self.values.size - 1
        # midpoint ties resolve to the lower member
        return i if (v - self.values[i - 1]) > (self.values[i] - v) else i - 1

    def index_of(self, v: float) -> int:
        i = self.nearest_index(v)
        if abs(self.values[i] - v) > MEMBERSHIP_ATOL:
            raise ValueError(f"{v} is not a member of {self!r}")
        return i


@dataclass(frozen=True)
class ValidityReport:
    """Per-constraint outcome of a vector check."""

    c1_ok: bool
    c2_ok: bool
    c1_violations: tuple[int, ...] = ()  # flat coordinate indices
    c2_violations: tuple[int, ...] = ()  # pair indices

    @property
    def admissible(self) -> bool:
        return self.c1_ok and self.c2_ok


@dataclass(frozen=True)
class ThresholdSpace:
    """Search space of tau (lower, upper) threshold pairs.

    mode "discrete" enforces set membership (c1); mode "continuous" relaxes
    c1 to the interval [min, max] of each set while keeping the pairing
    constraint c2.
    """

    lower_sets: tuple[DiscreteSet, ...]
    upper_sets: tuple[DiscreteSet, ...]
    mode: str = "discrete"
    _sets: tuple[DiscreteSet, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.lower_sets) != len(self.upper_sets):
            raise ValueError("lower and upper set lists must have equal length")
        if not self.lower_sets:
            raise ValueError("space needs at least one threshold pair")
        if self.mode not in ("discrete", "continuous"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for j, (lo, up) in enumerate(zip(self.lower_sets, self.upper_sets)):
            if lo.min > up.max:
                raise ValueError(f"pair {j} admits no ordered (lower, upper) combination")
        object.__setattr__(self, "_sets", tuple(self.lower_sets) + tuple(self.upper_sets))

    @property
    def tau(self) -> int:
        return len(self.lower_sets)

    @property
    def d(self) -> int:
        return 2 * self.tau

    def set_for(self, i: int) -> DiscreteSet:
        return self._sets[i]

    def role(self, i: int) -> tuple[str, int]:
        """("lower"|"upper", pair index) of flat coordinate i."""
        if i < self.tau:
            return "lower", i
        return "upper", i - self.tau

    def bounds(self, i: int) -> tuple[float, float]:
        s = self._sets[i]
        return s.min, s.max

    def validate(self, x) -> ValidityReport:
        """Check c1 and c2 independently; raises on wrong dimensionality."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimensionMismatchError(
                f"expected a vector of length {self.d}, got shape {x.shape}"
            )
        c1_bad = []
        for i, v in enumerate(x):
            s = self._sets[i]
            if self.mode == "discrete":
                if not s.contains(v):
                    c1_bad.append(i)
            elif not (s.min - MEMBERSHIP_ATOL <= v <= s.max + MEMBERSHIP_ATOL):
                c1_bad.append(i)
        c2_bad = [j for j in range(self.tau) if x[j] > x[j + self.tau]]
        return ValidityReport(
            c1_ok=not c1_bad,
            c2_ok=not c2_bad,
            c1_violations=tuple(c1_bad),
            c2_violations=tuple(c2_bad),
        )

    def is_admissible(self, x) -> bool:
        return self.validate(x).admissible

    def with_sets(self, lower_sets, upper_sets) -> "ThresholdSpace":
        return ThresholdSpace(tuple(lower_sets), tuple(upper_sets), self.mode)


def encode(x) -> np.ndarray:
    """Numeric feature vector for surrogate input (identity on thresholds)."""
    return np.ascontiguousarray(x, dtype=np.float64)


def pair_combination_counts(space: ThresholdSpace) -> np.ndarray:
    """Number of ordered (lower, upper) combinations per pair, discrete mode."""
    counts = np.empty(space.tau, dtype=np.int64)
    for j in range(space.tau):
        lo = space.lower_sets[j].values
        up = space.upper_sets[j].values
        # for each lower value a, count upper members >= a
        counts[j] = int(np.sum(up.size - np.searchsorted(up, lo - MEMBERSHIP_ATOL)))
    return counts


def count_admissible(space: ThresholdSpace) -> int:
    """Total admissible vectors (c1 and c2) in discrete mode."""
    if space.mode != "discrete":
        raise ValueError("admissible counting requires discrete mode")
    total = 1
    for c in pair_combination_counts(space):
        total *= int(c)  # python ints: the product overflows int64 fast
    return total


def enumerate_admissible(space: ThresholdSpace, ceiling: int = 10**6) -> np.ndarray:
    """All admissible vectors, duplicate-free, deterministic order.

    Rows are ordered by pair-wise lexicographic (lower, upper) combination
    index. Refuses with :class:`EnumerationCeilingError` when the admissible
    count exceeds ``ceiling``.
    """
    if space.mode != "discrete":
        raise ValueError("enumeration requires discrete mode")
    total = count_admissible(space)
    if total > ceiling:
        raise EnumerationCeilingError(total, ceiling)

    per_pair: list[np.ndarray] = []
    for j in range(space.tau):
        lo = space.lower_sets[j].values
        up = space.upper_sets[j].values
        combos = [(a, b) for a in lo for b in up if a <= b + MEMBERSHIP_ATOL]
        per_pair.append(np.asarray(combos, dtype=np.float64))

    out = np.empty((total, space.d), dtype=np.float64)
    for row, picks in enumerate(itertools.product(*(range(len(c)) for c in per_pair))):
        for j, k in enumerate(picks):
            out[row, j] = per_pair[j][k, 0]
            out[row, j + space.tau] = per_pair[j][k, 1]
    return out


def _snap_columns(space: ThresholdSpace, vals: np.ndarray) -> np.ndarray:
    """Snap each column to the nearest member of its set (discrete mode only)."""
    if space.mode != "discrete":
        return vals
    out = np.empty_like(vals)
    for i in range(space.d):
        grid = space.set_for(i).values
        if grid.size == 1:
            out[:, i] = grid[0]
            continue
        idx = np.clip(np.searchsorted(grid, vals[:, i]), 1, grid.size - 1)
        left = grid[idx - 1]
        right = grid[idx]
        out[:, i] = np.where((vals[:, i] - left) > (right - vals[:, i]), right, left)
    return out


def _map_unit(space: ThresholdSpace, u: np.ndarray) -> np.ndarray:
    """Map unit-interval samples to coordinate values, snapping when discrete."""
    vals = np.empty_like(u)
    for i in range(space.d):
        lo, hi = space.bounds(i)
        vals[:, i] = lo + u[:, i] * (hi - lo)
    return _snap_columns(space, vals)


def _resample_pair(space: ThresholdSpace, j: int, rng: np.random.Generator) -> tuple[float, float]:
    slo = space.lower_sets[j]
    sup = space.upper_sets[j]
    if space.mode == "discrete":
        a = float(slo.values[rng.integers(0, len(slo))])
        b = float(sup.values[rng.integers(0, len(sup))])
    else:
        a = slo.min + rng.random() * (slo.max - slo.min)
        b = sup.min + rng.random() * (sup.max - sup.min)
    return a, b


def repair_c2_rows(space: ThresholdSpace, vals: np.ndarray, seed_key: tuple) -> np.ndarray:
    """Enforce lower <= upper on every row, in place.

    Repair sequence per violating pair: swap the two values; snap each to its
    own set (the swapped values came from the sibling set); if the pair still
    violates, resample that pair only until it is admissible. Resampling uses
    a per-row stream derived from ``seed_key`` so earlier rows are unaffected
    by how many rows a batch holds.
    """
    tau = space.tau
    lo = vals[:, :tau]
    up = vals[:, tau:]
    swap = lo > up
    if np.any(swap):
        lo_swapped = np.where(swap, up, lo)
        up_swapped = np.where(swap, lo, up)
        vals[:, :tau] = lo_swapped
        vals[:, tau:] = up_swapped
        vals[:] = _snap_columns(space, vals)
    still = np.nonzero(vals[:, :tau] > vals[:, tau:])
    for r, j in zip(*still):
        rng = np.random.default_rng(np.random.SeedSequence(seed_key + (_REPAIR_TAG, int(r), int(j))))
        for _ in range(1000):
            a, b = _resample_pair(space, int(j), rng)
            if a > b:
                a, b = b, a
            if space.mode == "discrete":
                a = space.lower_sets[j].nearest(a)
                b = space.upper_sets[j].nearest(b)
            if a <= b:
                vals[r, j] = a
                vals[r, j + tau] = b
                break
        else:  # pragma: no cover - space constructor guarantees a solution exists
            raise RuntimeError(f"could not repair pair {j}")
    return vals


def lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample on the unit cube: one point per stratum per axis."""
    if n < 1:
        raise ValueError("need at least one sample")
    strata = np.empty((n, d), dtype=np.float64)
    for i in range(d):
        strata[:, i] = rng.permutation(n)
    return (strata + rng.random((n, d))) / n


def lhs_sample(space: ThresholdSpace, n: int, seed) -> np.ndarray:
    """Latin hypercube design of n admissible vectors.

    Each coordinate is stratified into n equal slices with exactly one draw
    per slice, mapped onto the coordinate's range (nearest set member in
    discrete mode), then pair-repaired for c2.
    """
    rng = np.random.default_rng(seed)
    u = lhs_unit(n, space.d, rng)
    vals = _map_unit(space, u)
    key = seed if isinstance(seed, tuple) else (int(seed),)
    return repair_c2_rows(space, vals, key)


def sample_admissible(space: ThresholdSpace, n: int, seed_key: tuple) -> np.ndarray:
    """n admissible vectors drawn coordinate-wise uniformly, then c2-repaired.

    Streams are nested in n: the first k rows of a size-n draw equal the
    size-k draw for the same key (set-uniform in discrete mode, interval
    uniform in continuous mode).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    u = rng.random((n, space.d))
    vals = np.empty_like(u)
    for i in range(space.d):
        s = space.set_for(i)
        if space.mode == "discrete":
            idx = np.minimum((u[:, i] * len(s)).astype(np.int64), len(s) - 1)
            vals[:, i] = s.values[idx]
        else:
            vals[:, i] = s.min + u[:, i] * (s.max - s.min)
    return repair_c2_rows(space, vals, seed_key)
