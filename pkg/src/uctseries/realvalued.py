"""Quantization-based density estimation for bounded real-valued series.

A dyadic partition of a half-open interval turns reals into symbols; a
depth-weighted mixture of finite-alphabet estimators over successively
finer quantizations, divided by the Lebesgue measure of the quantized
cells, yields a density estimate whose per-letter log-loss converges to
the relative entropy rate of the source.  Conditional densities are
piecewise constant on the finest partition, so event probabilities and
expectations of piecewise-linear functions integrate in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import (
    MixtureEstimator,
    log2_sum,
    order_weight,
    r_log2prob,
)
from .seqmodel import Alphabet, SymbolSeq

__all__ = [
    "DensityEstimator",
    "DomainError",
    "Partition",
    "PiecewiseConstantDensity",
    "conditional_density",
    "density_log2",
    "event_probability",
    "expectation",
    "quantize",
    "sign_process_generate",
]

DEFAULT_MAX_DEPTH = 8


class DomainError(ValueError):
    """A value lies outside the configured half-open domain."""


def default_order_cap(depth: int) -> int:
    # High Markov orders are vacuous once the alphabet grows: 2^depth
    # cells leave too few windows per context at desk scale.
    return 8 if depth <= 2 else 2


@dataclass(frozen=True)
class Partition:
    """Dyadic partition of [lower, upper) into 2**depth equal cells."""

    lower: float
    upper: float
    depth: int

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValueError("domain upper bound must exceed lower bound")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")

    @property
    def cells(self) -> int:
        return 1 << self.depth

    @property
    def cell_measure(self) -> float:
        return (self.upper - self.lower) / self.cells

    def cell_index(self, values) -> np.ndarray:
        """Cell of each value; values equal to the upper bound are rejected."""
        arr = np.asarray(values, dtype=float).reshape(-1)
        bad = np.nonzero((arr < self.lower) | (arr >= self.upper))[0]
        if bad.size:
            i = int(bad[0])
            raise DomainError(
                f"value {arr[i]!r} at index {i} outside [{self.lower}, {self.upper})"
            )
        scaled = (arr - self.lower) / (self.upper - self.lower)
        idx = np.floor(scaled * self.cells).astype(np.int64)
        return np.minimum(idx, self.cells - 1)

    def cell_bounds(self, i: int) -> tuple[float, float]:
        w = self.cell_measure
        return self.lower + i * w, self.lower + (i + 1) * w

    def edges(self) -> np.ndarray:
        return self.lower + self.cell_measure * np.arange(self.cells + 1)

    def alphabet(self) -> Alphabet:
        return Alphabet.of_size(self.cells)


def quantize(values, partition, domain=None) -> SymbolSeq:
    """Map reals to cell-index symbols; `partition` may be a depth int."""
    if not isinstance(partition, Partition):
        if domain is None:
            raise ValueError("quantize needs a Partition or a depth plus domain")
        partition = Partition(domain[0], domain[1], int(partition))
    return SymbolSeq(partition.alphabet(), partition.cell_index(values))


@dataclass(frozen=True)
class PiecewiseConstantDensity:
    """Density that is constant between consecutive breakpoints."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) + 1:
            raise ValueError("need exactly one more breakpoint than value")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly increasing")
        if any(v < 0 for v in self.values):
            raise ValueError("density values must be nonnegative")

    def __call__(self, x: float) -> float:
        i = np.searchsorted(self.breakpoints, x, side="right") - 1
        if i < 0 or i >= len(self.values):
            return 0.0
        return self.values[int(i)]

    def integral(self, lo: float, hi: float) -> float:
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        left = np.clip(bp[:-1], lo, hi)
        right = np.clip(bp[1:], lo, hi)
        return float(((right - left) * vals).sum())

    @classmethod
    def uniform(cls, lower: float, upper: float) -> "PiecewiseConstantDensity":
        return cls((lower, upper), (1.0 / (upper - lower),))


class DensityEstimator:
    """Sequential density estimate over [lower, upper).

    Mixes, over depths 0..max_depth, a finite-alphabet mixture estimator
    of the depth-s quantized sequence divided by the Lebesgue measure of
    its cells, with depth weights w_1..w_{max_depth+1}.  The weights are
    used as-is (a strict sub-probability, conservative for log-loss)
    unless renormalize is set.
    """

    def __init__(self, lower: float, upper: float,
                 max_depth: int = DEFAULT_MAX_DEPTH,
                 renormalize: bool = False,
                 order_cap=default_order_cap):
        if not upper > lower:
            raise ValueError("domain upper bound must exceed lower bound")
        self.lower = float(lower)
        self.upper = float(upper)
        self.max_depth = int(max_depth)
        self.renormalize = bool(renormalize)
        self.partitions = [Partition(lower, upper, s) for s in range(max_depth + 1)]
        self._estimators = [
            MixtureEstimator(p.alphabet(), order_cap(s)) if s else None
            for s, p in enumerate(self.partitions)
        ]
        weights = np.array([order_weight(s + 1) for s in range(max_depth + 1)])
        if renormalize:
            weights = weights / weights.sum()
        self._log2_weights = np.log2(weights)
        self.t = 0

    # depth 0 is the single-cell partition: its quantized measure is
    # identically 1, so only the volume term survives (estimator None).

    def _log2_volume(self, s: int) -> float:
        return math.log2(self.partitions[s].cell_measure)

    def append(self, x: float) -> None:
        for s in range(1, self.max_depth + 1):
            cell = int(self.partitions[s].cell_index([x])[0])
            self._estimators[s].append(cell)
        self.partitions[0].cell_index([x])  # domain check even at depth 0
        self.t += 1

    def consume(self, values) -> "DensityEstimator":
        for x in np.asarray(values, dtype=float).reshape(-1):
            self.append(float(x))
        return self

    def depth_log2_terms(self) -> np.ndarray:
        """Per-depth log2 of weight * quantized probability / cell volume^t."""
        terms = np.empty(self.max_depth + 1)
        for s in range(self.max_depth + 1):
            mu = 0.0 if s == 0 else self._estimators[s].log2prob
            terms[s] = self._log2_weights[s] + mu - self.t * self._log2_volume(s)
        return terms

    @property
    def log2_density(self) -> float:
        """log2 of the joint density of everything consumed so far."""
        return log2_sum(self.depth_log2_terms())

    def conditional_cell_log2densities(self) -> np.ndarray:
        """log2 conditional density over the finest-partition cells.

        The conditional density given the consumed history is piecewise
        constant on the 2^max_depth finest cells.
        """
        terms = self.depth_log2_terms()
        joint = log2_sum(terms)
        finest = self.partitions[self.max_depth].cells
        out = np.full(finest, -math.inf)
        for s in range(self.max_depth + 1):
            weight = terms[s] - joint
            if s == 0:
                cond = np.zeros(1)
            else:
                cond = self._estimators[s].conditional_log2probs()
            block = finest >> s  # finest cells per depth-s cell
            contrib = weight + np.repeat(cond, block) - self._log2_volume(s)
            out = np.logaddexp2(out, contrib)
        return out

    def conditional_log2_density(self, x: float) -> float:
        cell = int(self.partitions[self.max_depth].cell_index([x])[0])
        return float(self.conditional_cell_log2densities()[cell])


def density_log2(values, lower: float, upper: float,
                 max_depth: int = DEFAULT_MAX_DEPTH,
                 renormalize: bool = False,
                 order_cap=default_order_cap) -> float:
    """Batch log2 joint density of a real sequence (fast path).

    Equivalent to consuming the sequence with DensityEstimator but
    evaluated per depth with the batch mixture, which is much faster.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    t = values.size
    terms = []
    for s in range(max_depth + 1):
        part = Partition(lower, upper, s)
        w = order_weight(s + 1)
        if s == 0:
            part.cell_index(values)  # domain check
            mu = 0.0
        else:
            q = quantize(values, part)
            mu = r_log2prob(q, order_cap(s))
        terms.append(math.log2(w) + mu - t * math.log2(part.cell_measure))
    total = log2_sum(terms)
    if renormalize:
        weights = sum(order_weight(s + 1) for s in range(max_depth + 1))
        total -= math.log2(weights)
    return float(total)


def _history_estimator(history, lower, upper, max_depth, renormalize,
                       order_cap) -> DensityEstimator:
    est = DensityEstimator(lower, upper, max_depth=max_depth,
                           renormalize=renormalize, order_cap=order_cap)
    if history is not None and len(np.atleast_1d(history)):
        est.consume(history)
    return est


def conditional_density(x_next: float, history, lower: float, upper: float,
                        max_depth: int = DEFAULT_MAX_DEPTH,
                        renormalize: bool = False,
                        order_cap=default_order_cap) -> float:
    """log2 conditional density of the next value given the history."""
    est = _history_estimator(history, lower, upper, max_depth, renormalize,
                             order_cap)
    return est.conditional_log2_density(float(x_next))


def event_probability(intervals, history, lower: float, upper: float,
                      max_depth: int = DEFAULT_MAX_DEPTH,
                      renormalize: bool = False,
                      order_cap=default_order_cap,
                      estimator: DensityEstimator | None = None) -> float:
    """Probability of a finite union of disjoint intervals under the
    conditional.

    The conditional density is piecewise constant on the finest cells, so
    the integral is an exact sum of cell overlaps.
    """
    est = estimator or _history_estimator(history, lower, upper, max_depth,
                                          renormalize, order_cap)
    dens = np.exp2(est.conditional_cell_log2densities())
    edges = est.partitions[est.max_depth].edges()
    total = 0.0
    for pair in intervals:
        lo, hi = float(pair[0]), float(pair[1])
        if hi < lo:
            raise ValueError(f"malformed interval ({lo}, {hi})")
        if lo < est.lower or hi > est.upper:
            raise DomainError("interval extends outside the domain")
        left = np.clip(edges[:-1], lo, hi)
        right = np.clip(edges[1:], lo, hi)
        total += float(((right - left) * dens).sum())
    return total


def expectation(f_breakpoints, f_values, history, lower: float, upper: float,
                max_depth: int = DEFAULT_MAX_DEPTH,
                renormalize: bool = False,
                order_cap=default_order_cap,
                bound: float | None = None,
                estimator: DensityEstimator | None = None) -> float:
    """Integral of a piecewise-linear function against the conditional.

    The function is given as a table (breakpoints, values) that must
    cover the whole domain; exact closed form since the density is
    piecewise constant and the integrand piecewise linear.
    """
    xs = np.asarray(f_breakpoints, dtype=float)
    ys = np.asarray(f_values, dtype=float)
    if xs.ndim != 1 or xs.size != ys.size or xs.size < 2:
        raise ValueError("function table needs matching breakpoint/value arrays")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("function breakpoints must be strictly increasing")
    if xs[0] > lower or xs[-1] < upper:
        raise ValueError("function table has gaps: it must cover the domain")
    if bound is not None and np.abs(ys).max() > bound + 1e-12:
        raise ValueError("function values exceed the declared bound")
    est = estimator or _history_estimator(history, lower, upper, max_depth,
                                          renormalize, order_cap)
    dens = np.exp2(est.conditional_cell_log2densities())
    edges = est.partitions[est.max_depth].edges()
    grid = np.union1d(edges, np.clip(xs, lower, upper))
    grid = grid[(grid >= lower) & (grid <= upper)]
    f_at = np.interp(grid, xs, ys)
    mids = 0.5 * (grid[:-1] + grid[1:])
    cells = np.minimum(
        ((mids - lower) / (upper - lower) * dens.size).astype(int), dens.size - 1
    )
    seg = (grid[1:] - grid[:-1]) * 0.5 * (f_at[:-1] + f_at[1:]) * dens[cells]
    return float(seg.sum())


def sign_process_generate(alpha_param: float, t: int, seed: int = 0) -> np.ndarray:
    """Markov process on [-1, 1) whose density depends on the previous sign.

    Given the previous value y, the next value is negative with
    probability 1/2 + alpha_param * sign(y) (sign(0) counts positive) and
    uniform within its chosen half.  Deterministic per seed.
    """
    if not 0.0 < alpha_param < 0.5:
        raise ValueError("alpha_param must lie strictly between 0 and 1/2")
    if t < 1:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    # Flip probability is 1/2 + alpha regardless of the current sign, so
    # the sign chain reduces to i.i.d. flip indicators.
    first_negative = rng.random() < 0.5
    flips = rng.random(t - 1) < 0.5 + alpha_param
    negative = np.empty(t, dtype=bool)
    negative[0] = first_negative
    negative[1:] = first_negative ^ (np.cumsum(flips) % 2).astype(bool)
    u = rng.random(t)
    return np.where(negative, u - 1.0, u)
