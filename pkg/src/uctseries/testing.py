"""Empirical entropy and the compression-based hypothesis tests.

Both finite-alphabet tests compare a codelength against a reference bit
count and reject when the code wins by more than log2(1/alpha) bits: the
identity test references -log2 of a fully specified null, the serial
independence test references the order-m empirical entropy.  Ties accept.
The partition scheme lifts either test to real-valued data by quantizing
through a sequence of partitions, spending level alpha * w_i on the i-th.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .coding import CodelengthProvider, ideal_r_provider
from .estimators import (
    DEFAULT_MAX_EXPLICIT_ORDER,
    MarkovSource,
    order_weight,
)
from .realvalued import Partition, PiecewiseConstantDensity, quantize
from .seqmodel import as_sample_arrays, pair_counts

__all__ = [
    "EmpiricalEntropy",
    "EntropyRate",
    "NullModel",
    "TestReport",
    "empirical_entropy",
    "identity_test",
    "partition_meta_test",
    "serial_independence_test",
]

NullModel = MarkovSource

_HUGE = float(np.finfo(float).max)


@dataclass(frozen=True)
class EmpiricalEntropy:
    """Plug-in conditional entropy of a fixed order, in bits per symbol."""

    order: int
    value: float
    window_count: int


def empirical_entropy(x, k: int) -> EmpiricalEntropy:
    """Order-k empirical entropy from sliding-window counts (0 log 0 = 0).

    Every sample must be longer than k; the normalizer is the total
    number of (k+1)-windows, t - k*r over r samples.
    """
    if k < 0:
        raise ValueError("order must be nonnegative")
    alphabet, samples = as_sample_arrays(x)
    if any(arr.size <= k for arr in samples):
        raise ValueError(f"every sample must be longer than the order k={k}")
    windows = sum(arr.size - k for arr in samples)
    acc = 0.0
    for row in pair_counts(x, k).values():
        total = row.sum()
        nz = row[row > 0]
        acc -= float((nz * (np.log2(nz) - math.log2(total))).sum())
    value = acc / windows
    return EmpiricalEntropy(order=k, value=value, window_count=windows)


@dataclass(frozen=True)
class EntropyRate:
    """Conditional entropies h_0 >= h_1 >= ... and their limit for a source."""

    orders: tuple[float, ...]
    limit: float

    @classmethod
    def of_source(cls, source: MarkovSource, max_order: int = 8) -> "EntropyRate":
        hs = tuple(source.conditional_entropy(k) for k in range(max_order + 1))
        return cls(orders=hs, limit=source.entropy_rate())


@dataclass
class TestReport:
    """Outcome of one test: reject iff statistic_bits > threshold_bits."""

    test: str
    alpha: float
    statistic_bits: float
    threshold_bits: float
    verdict: str
    provider: str
    order: int | None
    lengths: list[int]
    sub_reports: list["TestReport"] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.verdict == "reject"

    def to_dict(self) -> dict:
        def clamp(v):
            if v == math.inf:
                return _HUGE
            if v == -math.inf:
                return -_HUGE
            return v

        out = {
            "test": self.test,
            "alpha": self.alpha,
            "statistic_bits": clamp(self.statistic_bits),
            "threshold_bits": clamp(self.threshold_bits),
            "verdict": self.verdict,
            "provider": self.provider,
            "order": self.order,
            "lengths": self.lengths,
            "sub_reports": [r.to_dict() for r in self.sub_reports],
        }
        if self.details:
            out["details"] = self.details
        return out


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")


def _verdict(statistic: float, threshold: float) -> str:
    return "reject" if statistic > threshold else "accept"


def identity_test(x, null: NullModel, alpha: float,
                  provider: CodelengthProvider | None = None) -> TestReport:
    """Goodness-of-fit test of a fully specified null source.

    Rejects when the provider's codelength undercuts -log2 null(x) by
    more than log2(1/alpha) bits.  A null that assigns the data
    probability zero is rejected outright.
    """
    _check_alpha(alpha)
    if provider is None:
        provider = ideal_r_provider()
    _, samples = as_sample_arrays(x)
    null_bits = -null.log2prob(x)
    statistic = math.inf if null_bits == math.inf else null_bits - provider.codelength(x)
    threshold = -math.log2(alpha)
    return TestReport(
        test="identity",
        alpha=alpha,
        statistic_bits=statistic,
        threshold_bits=threshold,
        verdict=_verdict(statistic, threshold),
        provider=provider.name,
        order=null.order,
        lengths=[int(arr.size) for arr in samples],
    )


def serial_independence_test(x, m: int, alpha: float,
                             provider: CodelengthProvider | None = None) -> TestReport:
    """Test of the hypothesis that the source is Markov of order <= m.

    Rejects when the provider's codelength undercuts the empirical
    entropy total (t - r*m) * h*_m by more than log2(1/alpha) bits.
    """
    _check_alpha(alpha)
    if provider is None:
        provider = ideal_r_provider()
    _, samples = as_sample_arrays(x)
    ent = empirical_entropy(x, m)
    statistic = ent.window_count * ent.value - provider.codelength(x)
    threshold = math.log2(1.0 / alpha)
    return TestReport(
        test="serial-independence",
        alpha=alpha,
        statistic_bits=statistic,
        threshold_bits=threshold,
        verdict=_verdict(statistic, threshold),
        provider=provider.name,
        order=m,
        lengths=[int(arr.size) for arr in samples],
    )


# ---------------------------------------------------------------------------
# Partition scheme for real-valued data


def _cell_probs(null_density, partition: Partition) -> np.ndarray:
    """Null probability of every cell: exact for piecewise-constant
    densities, adaptive quadrature (rtol 1e-8) for callables."""
    probs = np.empty(partition.cells)
    for i in range(partition.cells):
        lo, hi = partition.cell_bounds(i)
        if isinstance(null_density, PiecewiseConstantDensity):
            probs[i] = null_density.integral(lo, hi)
        else:
            val, _ = integrate.quad(null_density, lo, hi, epsrel=1e-8, limit=200)
            probs[i] = val
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"null density integrates to {total!r} over the domain")
    return probs / total


def partition_meta_test(data, alpha: float, kind: str = "si",
                        max_depth: int = 8,
                        domain: tuple[float, float] = (0.0, 1.0),
                        null_density=None,
                        provider_factory=None,
                        scheme=None,
                        max_explicit_order: int = DEFAULT_MAX_EXPLICIT_ORDER,
                        ) -> TestReport:
    """Run a finite-alphabet test on successively finer quantizations.

    The i-th sub-test runs at level alpha * w_i (the mixture weights, so
    the levels sum to at most alpha) on data quantized by the i-th
    partition; dyadic partitions of the domain by default.  Rejects iff
    any sub-test rejects.  Checking stops at the first partition whose
    maximum achievable statistic t*log2(cells) cannot exceed its
    threshold, or after max_depth partitions.

    kind "si" tests serial independence of i.i.d. data (order 0 only:
    quantizing can inflate the memory of a Markov chain, so higher orders
    are not meaningful here); kind "id" tests a null given as a density
    over the domain, quantized cell by cell.
    """
    _check_alpha(alpha)
    if kind not in ("si", "id"):
        raise ValueError("kind must be 'si' or 'id'")
    if kind == "id" and null_density is None:
        raise ValueError("identity meta-test needs a null density")
    data = np.asarray(data, dtype=float).reshape(-1)
    t = data.size
    if provider_factory is None:
        provider_factory = lambda partition: ideal_r_provider(max_explicit_order)
    if scheme is None:
        scheme = [Partition(domain[0], domain[1], depth) for depth in
                  range(1, max_depth + 1)]
    else:
        scheme = list(scheme)[:max_depth]
    if scheme:
        # validate the domain up front, even if every sub-test is skipped
        Partition(scheme[0].lower, scheme[0].upper, 0).cell_index(data)

    subs: list[TestReport] = []
    i_stop = None
    provider_name = None
    for i, partition in enumerate(scheme, start=1):
        level = alpha * order_weight(i)
        max_statistic = t * math.log2(partition.cells)
        if max_statistic <= -math.log2(level):
            i_stop = i
            break
        quantized = quantize(data, partition)
        provider = provider_factory(partition)
        provider_name = provider.name
        if kind == "si":
            sub = serial_independence_test(quantized, 0, level, provider)
        else:
            null = NullModel.iid(quantized.alphabet, _cell_probs(null_density, partition))
            sub = identity_test(quantized, null, level, provider)
        sub.details["partition_depth"] = partition.depth
        subs.append(sub)

    margins = [s.statistic_bits - s.threshold_bits for s in subs]
    statistic = max(margins) if margins else 0.0
    report = TestReport(
        test=f"partition-{kind}",
        alpha=alpha,
        statistic_bits=statistic,
        threshold_bits=0.0,
        verdict=_verdict(statistic, 0.0),
        provider=provider_name or "none",
        order=0,
        lengths=[t],
        sub_reports=subs,
        details={"i_stop": i_stop, "partitions_checked": len(subs)},
    )
    return report
