"""Sequential probability estimators in the base-2 log domain.

Implements the add-one (Laplace) and add-half (Krichevsky-Trofimov style)
estimators, their fixed-order Markov extensions with multi-sample support,
and the order-weighted mixture measure that serves simultaneously as a
consistent probability estimator and as the ideal codelength of a
universal compressor.

Probabilities are plain floats holding base-2 logarithms (`LogProb`,
always <= 0, -inf for zero); sums of probabilities go through
``numpy.logaddexp2`` or :func:`log2_sum`.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .seqmodel import (
    Alphabet,
    AlphabetMismatchError,
    MultiSample,
    SymbolSeq,
    as_sample_arrays,
)

__all__ = [
    "KtState",
    "LogProb",
    "MarkovSource",
    "MixtureEstimator",
    "MonteCarloEstimate",
    "PairAlphabet",
    "avg_kl_error",
    "kt_cond_log2prob",
    "kt_log2prob",
    "laplace_cond_log2prob",
    "laplace_log2prob",
    "log2_sum",
    "order_weight",
    "order_weight_tail",
    "r_cond_log2prob",
    "r_log2prob",
    "side_info_cond_log2prob",
    "side_info_cond_log2probs",
]

LogProb = float  # base-2 logarithm of a probability; -inf encodes zero

_LN2 = math.log(2.0)
DEFAULT_MAX_EXPLICIT_ORDER = 16


def log2_sum(terms) -> LogProb:
    """log2 of a sum of probabilities given as base-2 logs."""
    arr = np.asarray(list(terms), dtype=float)
    if arr.size == 0:
        return -math.inf
    m = arr.max()
    if not np.isfinite(m):
        return m
    return float(m + np.log2(np.exp2(arr - m).sum()))


def order_weight(i: int) -> float:
    """Weight of mixture component i (1-indexed); the weights sum to one."""
    if i < 1:
        raise ValueError("order weights are indexed from 1")
    if i == 1:
        return 1.0 - 1.0 / math.log2(3.0)
    return 1.0 / math.log2(i + 1) - 1.0 / math.log2(i + 2)


def order_weight_tail(k: int) -> float:
    """Sum of all weights from index k on (closed form by telescoping)."""
    if k <= 1:
        return 1.0
    return 1.0 / math.log2(k + 1)


# ---------------------------------------------------------------------------
# Laplace (add-one) estimator, order 0


def laplace_cond_log2prob(a: int, x: SymbolSeq) -> LogProb:
    """log2 of (nu(a) + 1) / (t + |A|)."""
    size = x.alphabet.size
    nu = int((x.symbols == int(a)).sum())
    return math.log2((nu + 1.0) / (len(x) + size))


def laplace_log2prob(x: SymbolSeq) -> LogProb:
    """Chain product of add-one conditionals, evaluated in closed form.

    The product telescopes to  prod_a nu(a)! * (|A|-1)! / (t+|A|-1)!.
    """
    size = x.alphabet.size
    nu = np.bincount(x.symbols, minlength=size) if len(x) else np.zeros(size)
    val = gammaln(nu + 1.0).sum() + gammaln(size) - gammaln(len(x) + size)
    return float(val / _LN2)


# ---------------------------------------------------------------------------
# Add-half estimator of fixed Markov order (batch evaluation)


def _window_counts(samples: list[np.ndarray], m: int, size: int):
    """Pair counts nu(v a) and context totals nu-bar(v) over all samples.

    Windows of length m+1 are confined within each sample.  Returns two
    count arrays (contexts themselves are not needed by the estimators).
    """
    chunks = [arr for arr in samples if arr.size >= m + 1]
    if not chunks:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if size ** (m + 1) < 2 ** 62:
        powers = size ** np.arange(m, -1, -1, dtype=np.int64)
        codes = []
        for arr in chunks:
            win = np.lib.stride_tricks.sliding_window_view(arr, m + 1)
            codes.append(win @ powers)
        allc = np.concatenate(codes)
        pair_codes, pair = np.unique(allc, return_counts=True)
        ctx_codes = pair_codes // size
        _, inverse = np.unique(ctx_codes, return_inverse=True)
        ctx = np.bincount(inverse, weights=pair)
        return pair, ctx.astype(np.int64)
    # alphabet too large for integer window codes: compare rows directly
    windows = np.concatenate(
        [np.lib.stride_tricks.sliding_window_view(arr, m + 1) for arr in chunks]
    )
    uniq, pair = np.unique(windows, axis=0, return_counts=True)
    _, inverse = np.unique(uniq[:, :m], axis=0, return_inverse=True)
    ctx = np.bincount(inverse, weights=pair)
    return pair, ctx.astype(np.int64)


def kt_log2prob(x, m: int) -> LogProb:
    """Exact log2 probability of the order-m add-half estimator.

    The first min(m, t_i) letters of every sample are priced at 1/|A|;
    the rest comes from the pooled window counts through log-gamma.
    """
    if m < 0:
        raise ValueError("order must be nonnegative")
    alphabet, samples = as_sample_arrays(x)
    size = alphabet.size
    prefix_bits = sum(min(m, arr.size) for arr in samples) * math.log2(size)
    pair, ctx = _window_counts(samples, m, size)
    num = gammaln(pair + 0.5).sum() - pair.size * gammaln(0.5)
    den = gammaln(ctx + size / 2.0).sum() - ctx.size * gammaln(size / 2.0)
    return float(-prefix_bits + (num - den) / _LN2)


# ---------------------------------------------------------------------------
# Sequential states


class KtState:
    """Sequential add-half estimator of fixed Markov order.

    Consumes one symbol at a time, tracks log2 of the probability of
    everything consumed so far, and exposes next-symbol conditionals.
    The first `order` letters of each sample are priced uniformly.
    """

    __slots__ = ("alphabet", "order", "log2prob", "_counts", "_ctx", "_pos")

    def __init__(self, alphabet: Alphabet, order: int):
        if order < 0:
            raise ValueError("order must be nonnegative")
        self.alphabet = alphabet
        self.order = order
        self.log2prob: LogProb = 0.0
        self._counts: dict[tuple, list[float]] = {}
        self._ctx: list[int] = []
        self._pos = 0

    def conditional_probs(self) -> list[float]:
        size = self.alphabet.size
        if self._pos < self.order:
            return [1.0 / size] * size
        row = self._counts.get(tuple(self._ctx))
        if row is None:
            return [1.0 / size] * size
        total = sum(row) + size / 2.0
        return [(c + 0.5) / total for c in row]

    def conditional_log2prob(self, a: int) -> LogProb:
        return math.log2(self.conditional_probs()[int(a)])

    def append(self, a: int) -> None:
        a = int(a)
        size = self.alphabet.size
        if self._pos < self.order:
            self.log2prob -= math.log2(size)
        else:
            key = tuple(self._ctx)
            row = self._counts.get(key)
            if row is None:
                row = [0.0] * size
                self._counts[key] = row
            total = sum(row) + size / 2.0
            self.log2prob += math.log2((row[a] + 0.5) / total)
            row[a] += 1.0
        if self.order:
            self._ctx.append(a)
            if len(self._ctx) > self.order:
                self._ctx.pop(0)
        self._pos += 1

    def new_sample(self) -> None:
        self._ctx = []
        self._pos = 0

    def consume(self, x) -> "KtState":
        _, samples = as_sample_arrays(x)
        for j, arr in enumerate(samples):
            if j:
                self.new_sample()
            for a in arr:
                self.append(int(a))
        return self


def kt_cond_log2prob(a: int, state: KtState) -> LogProb:
    """Next-symbol conditional of an order-m add-half state."""
    return state.conditional_log2prob(a)


class MixtureEstimator:
    """Order-weighted mixture of add-half Markov estimators.

    Explicit states cover orders 0..max_explicit_order; all higher orders
    are priced by the uniform measure, whose weight has the closed form
    1/log2(max_explicit_order + 3).  The mixture is exact whenever
    max_explicit_order >= total length - 1, is a proper measure for every
    length (conditionals sum to one), and `truncated` flags inputs long
    enough for the uniform tail to stand in for unpriced orders.

    Conditionals are maintained through posterior component weights, so
    no per-order probability ever underflows.
    """

    def __init__(self, alphabet: Alphabet,
                 max_explicit_order: int = DEFAULT_MAX_EXPLICIT_ORDER):
        if max_explicit_order < 0:
            raise ValueError("max_explicit_order must be nonnegative")
        self.alphabet = alphabet
        self.max_explicit_order = max_explicit_order
        self.states = [KtState(alphabet, i) for i in range(max_explicit_order + 1)]
        self._weights = [order_weight(i + 1) for i in range(max_explicit_order + 1)]
        self._weights.append(order_weight_tail(max_explicit_order + 2))
        self.log2prob: LogProb = 0.0
        self.total_length = 0
        self._max_sample_length = 0
        self._pos = 0

    @property
    def truncated(self) -> bool:
        return self._max_sample_length - 1 > self.max_explicit_order

    def conditional_probs(self) -> np.ndarray:
        size = self.alphabet.size
        probs = np.full(size, self._weights[-1] / size)
        for w, st in zip(self._weights, self.states):
            if w:
                probs += w * np.asarray(st.conditional_probs())
        return probs

    def conditional_log2probs(self) -> np.ndarray:
        return np.log2(self.conditional_probs())

    def conditional_log2prob(self, a: int) -> LogProb:
        return float(np.log2(self.conditional_probs()[int(a)]))

    def append(self, a: int) -> None:
        a = int(a)
        size = self.alphabet.size
        joint = [self._weights[-1] / size]
        for w, st in zip(self._weights, self.states):
            joint.append(w * st.conditional_probs()[a])
            st.append(a)
        step = sum(joint)
        self.log2prob += math.log2(step)
        self._weights = [j / step for j in joint[1:]] + [joint[0] / step]
        self.total_length += 1
        self._pos += 1
        self._max_sample_length = max(self._max_sample_length, self._pos)

    def new_sample(self) -> None:
        for st in self.states:
            st.new_sample()
        self._pos = 0

    def consume(self, x) -> "MixtureEstimator":
        _, samples = as_sample_arrays(x)
        for j, arr in enumerate(samples):
            if j:
                self.new_sample()
            for a in arr:
                self.append(int(a))
        return self


# ---------------------------------------------------------------------------
# Mixture measure, batch evaluation


def r_log2prob(x, max_explicit_order: int = DEFAULT_MAX_EXPLICIT_ORDER) -> LogProb:
    """log2 of the order-weighted mixture probability of x.

    Orders above min(max_explicit_order, longest sample - 1) all reduce to
    the uniform measure |A|^-t, so their weighted sum has a closed form
    and the result is exact whenever max_explicit_order is not binding.
    """
    alphabet, samples = as_sample_arrays(x)
    t = sum(arr.size for arr in samples)
    if t == 0:
        return 0.0
    longest = max(arr.size for arr in samples)
    explicit = min(max_explicit_order, longest - 1)
    terms = [
        math.log2(order_weight(i + 1)) + kt_log2prob(x, i)
        for i in range(explicit + 1)
    ]
    terms.append(
        math.log2(order_weight_tail(explicit + 2)) - t * math.log2(alphabet.size)
    )
    return log2_sum(terms)


def r_cond_log2prob(word, x,
                    max_explicit_order: int = DEFAULT_MAX_EXPLICIT_ORDER) -> LogProb:
    """log2 of the mixture conditional probability of `word` given x.

    For a plain sequence the word extends it; for a multi-sample the word
    is evaluated as an additional independent sample.
    """
    word = np.atleast_1d(np.asarray(word, dtype=np.int64))
    return r_log2prob(x.extended(word), max_explicit_order) - r_log2prob(
        x, max_explicit_order
    )


# ---------------------------------------------------------------------------
# Side information over a product alphabet


@dataclass(frozen=True)
class PairAlphabet:
    """Product alphabet X x Y with bijective index pairing."""

    x_alphabet: Alphabet
    y_alphabet: Alphabet

    @property
    def product(self) -> Alphabet:
        labels = tuple(
            f"{lx},{ly}"
            for lx in self.x_alphabet.labels
            for ly in self.y_alphabet.labels
        )
        return Alphabet(labels)

    def pair_index(self, ix: int, iy: int) -> int:
        if not (0 <= ix < self.x_alphabet.size and 0 <= iy < self.y_alphabet.size):
            raise AlphabetMismatchError("pair component out of range")
        return ix * self.y_alphabet.size + iy

    def unpair(self, k: int) -> tuple[int, int]:
        return divmod(int(k), self.y_alphabet.size)


def side_info_cond_log2probs(pair_alphabet: PairAlphabet, history, y_next: int,
                             estimator=None) -> np.ndarray:
    """log2 conditionals of the next x symbol given paired history and y.

    `history` is an iterable of (x, y) index pairs; `estimator` is any
    sequential estimator over the product alphabet (fresh mixture by
    default).  The returned vector is normalized over x.
    """
    if estimator is None:
        estimator = MixtureEstimator(pair_alphabet.product)
    for ix, iy in history:
        estimator.append(pair_alphabet.pair_index(ix, iy))
    cond = estimator.conditional_probs()
    ny = pair_alphabet.y_alphabet.size
    column = np.asarray(
        [cond[ix * ny + int(y_next)] for ix in range(pair_alphabet.x_alphabet.size)]
    )
    return np.log2(column / column.sum())


def side_info_cond_log2prob(x_next: int, history, y_next: int,
                            pair_alphabet: PairAlphabet, estimator=None) -> LogProb:
    probs = side_info_cond_log2probs(pair_alphabet, history, y_next, estimator)
    return float(probs[int(x_next)])


# ---------------------------------------------------------------------------
# Fully specified sources (truth models, test nulls, simulation inputs)


def _ctx_index(ctx, size: int) -> int:
    idx = 0
    for s in ctx:
        idx = idx * size + int(s)
    return idx


class MarkovSource:
    """A fully specified source of finite Markov order over a finite alphabet.

    The conditional table has one row per length-`order` context (contexts
    enumerated in lexicographic order) and one column per symbol; rows
    must sum to one within 1e-9.  The distribution of the first `order`
    letters defaults to the stationary distribution of the context chain.
    """

    def __init__(self, alphabet: Alphabet, order: int, table,
                 initial=None):
        self.alphabet = alphabet
        self.order = int(order)
        if self.order < 0:
            raise ValueError("order must be nonnegative")
        size = alphabet.size
        tbl = np.asarray(table, dtype=float).reshape(size ** self.order, size)
        if np.any(tbl < 0):
            raise ValueError("conditional probabilities must be nonnegative")
        if np.abs(tbl.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("conditional table rows must sum to 1 (tol 1e-9)")
        self.table = tbl
        if initial is None:
            self.initial = self._stationary()
        else:
            self.initial = np.asarray(initial, dtype=float).reshape(size ** self.order)
            if abs(self.initial.sum() - 1.0) > 1e-9 or np.any(self.initial < 0):
                raise ValueError("initial distribution must be a probability vector")

    # -- construction helpers

    @classmethod
    def iid(cls, alphabet: Alphabet, probs) -> "MarkovSource":
        return cls(alphabet, 0, np.asarray(probs, dtype=float).reshape(1, -1))

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "MarkovSource":
        return cls.iid(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))

    def _context_index(self, ctx) -> int:
        return _ctx_index(ctx, self.alphabet.size)

    def _stationary(self) -> np.ndarray:
        size = self.alphabet.size
        n = size ** self.order
        if self.order == 0:
            return np.ones(1)
        trans = np.zeros((n, n))
        for v in range(n):
            nxt = (v * size) % n
            for a in range(size):
                trans[nxt + a, v] += self.table[v, a]
        vals, vecs = np.linalg.eig(trans)
        k = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, k])
        pi = np.clip(pi, 0.0, None)
        if pi.sum() <= 0:
            pi = np.ones(n)
        return pi / pi.sum()

    # -- probabilities

    def _block_log2probs(self, n: int) -> np.ndarray:
        """log2 probabilities of all length-n blocks under stationarity."""
        size = self.alphabet.size
        if n == 0:
            return np.zeros(1)
        if n <= self.order:
            p = self.initial.reshape([size] * self.order)
            axes = tuple(range(n, self.order))
            marg = p.sum(axis=axes) if axes else p
            with np.errstate(divide="ignore"):
                return np.log2(marg.reshape(-1))
        with np.errstate(divide="ignore"):
            logp = np.log2(self.initial)
            logt = np.log2(self.table)
        for _ in range(self.order, n):
            # extend every block by one letter, then re-key by last `order`
            m = logp.size
            ctx = np.arange(m) % (size ** self.order)
            logp = (logp[:, None] + logt[ctx]).reshape(-1)
        return logp

    def log2prob(self, x) -> LogProb:
        """Exact log2 probability; independent samples multiply."""
        alphabet, samples = as_sample_arrays(x)
        if alphabet.size != self.alphabet.size:
            raise AlphabetMismatchError("sequence alphabet size differs from source")
        total = 0.0
        size = self.alphabet.size
        with np.errstate(divide="ignore"):
            logt = np.log2(self.table)
        for arr in samples:
            t = arr.size
            head = min(t, self.order)
            if head:
                blocks = self._block_log2probs(head)
                total += float(blocks[self._context_index(arr[:head])])
            if t > self.order:
                m = self.order
                if m:
                    powers = size ** np.arange(m - 1, -1, -1, dtype=np.int64)
                    ctx = np.lib.stride_tricks.sliding_window_view(arr[:-1], m) @ powers
                else:
                    ctx = np.zeros(t, dtype=np.int64)
                total += float(logt[ctx, arr[m:]].sum())
        return total

    def conditional(self, ctx) -> np.ndarray:
        """Next-symbol distribution given at least `order` trailing symbols."""
        ctx = list(ctx)[-self.order:] if self.order else []
        return self.table[self._context_index(ctx)]

    # -- sampling

    def sample(self, t: int, rng) -> SymbolSeq:
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        size = self.alphabet.size
        out = np.empty(t, dtype=np.int64)
        if t == 0:
            return SymbolSeq(self.alphabet, out)
        if self.order == 0:
            out[:] = rng.choice(size, size=t, p=self.table[0])
            return SymbolSeq(self.alphabet, out)
        ctx = int(rng.choice(self.initial.size, p=self.initial))
        head = []
        rem = ctx
        for _ in range(self.order):
            head.append(rem % size)
            rem //= size
        head.reverse()
        n_head = min(t, self.order)
        out[:n_head] = head[:n_head]
        mod = size ** self.order
        cum_rows = [row.cumsum().tolist() for row in self.table]
        u = rng.random(max(t - self.order, 0)).tolist()
        for i in range(self.order, t):
            a = bisect.bisect_right(cum_rows[ctx], u[i - self.order])
            a = min(a, size - 1)  # guard against cumulative rounding at 1.0
            out[i] = a
            ctx = (ctx * size + a) % mod
        return SymbolSeq(self.alphabet, out)

    # -- entropy rates

    def entropy_rate(self) -> float:
        """Limiting entropy in bits per symbol (equals h_m for this order)."""
        return self.conditional_entropy(self.order)

    def conditional_entropy(self, k: int) -> float:
        """Order-k conditional entropy h_k under stationarity."""
        hk1 = self._block_entropy(k + 1)
        hk = self._block_entropy(k)
        return hk1 - hk

    def _block_entropy(self, n: int) -> float:
        logp = self._block_log2probs(n)
        p = np.exp2(logp)
        mask = p > 0
        return float(-(p[mask] * logp[mask]).sum())

    # -- parameter file format (see README: "source parameter files")

    @classmethod
    def from_text(cls, text: str) -> "MarkovSource":
        size = order = None
        rows: list[tuple[tuple, np.ndarray]] = []
        initial = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "alphabet":
                size = int(parts[1])
            elif parts[0] == "order":
                order = int(parts[1])
            elif parts[0] == "initial":
                initial = np.asarray([float(v) for v in parts[1:]])
            else:
                if size is None or order is None:
                    raise ValueError(
                        f"line {lineno}: alphabet and order must come first"
                    )
                if order == 0:
                    ctx_token, probs = "", parts
                else:
                    ctx_token, probs = parts[0], parts[1:]
                if len(ctx_token) != order:
                    raise ValueError(f"line {lineno}: context must have {order} symbols")
                ctx = tuple(int(c) for c in ctx_token)
                if any(c >= size for c in ctx):
                    raise ValueError(f"line {lineno}: context symbol out of range")
                if len(probs) != size:
                    raise ValueError(f"line {lineno}: expected {size} probabilities")
                rows.append((ctx, np.asarray([float(v) for v in probs])))
        if size is None or order is None:
            raise ValueError("source file must declare alphabet size and order")
        alphabet = Alphabet.of_size(size)
        table = np.full((size ** order, size), np.nan)
        for ctx, probs in rows:
            table[_ctx_index(ctx, size)] = probs
        if np.isnan(table).any():
            raise ValueError("conditional table is missing contexts")
        return cls(alphabet, order, table, initial=initial)

    @classmethod
    def from_file(cls, path) -> "MarkovSource":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        lines = [f"alphabet {self.alphabet.size}", f"order {self.order}"]
        if self.order:
            lines.append("initial " + " ".join(repr(float(p)) for p in self.initial))
        size = self.alphabet.size
        for v in range(size ** self.order):
            digits = []
            rem = v
            for _ in range(self.order):
                digits.append(str(rem % size))
                rem //= size
            ctx = "".join(reversed(digits))
            probs = " ".join(repr(float(p)) for p in self.table[v])
            lines.append(f"{ctx} {probs}" if ctx else probs)
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Error measurement


@dataclass(frozen=True)
class MonteCarloEstimate:
    value: float
    stderr: float
    trials: int


def avg_kl_error(truth: MarkovSource, measure_log2prob, t: int,
                 trials: int = 200, seed: int = 0) -> MonteCarloEstimate:
    """Monte Carlo per-letter log-loss redundancy of an estimator.

    Samples sequences of length t from `truth` and averages
    (log2 truth(x) - log2 estimate(x)) / t.  A zero-probability estimate
    on sampled data yields +inf.
    """
    rng = np.random.default_rng(seed)
    vals = np.empty(trials)
    for i in range(trials):
        x = truth.sample(t, rng)
        est = measure_log2prob(x)
        if est == -math.inf:
            return MonteCarloEstimate(math.inf, math.nan, trials)
        vals[i] = (truth.log2prob(x) - est) / t
    stderr = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return MonteCarloEstimate(float(vals.mean()), stderr, trials)
