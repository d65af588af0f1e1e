"""Alphabets, symbol sequences, multi-sample collections and window counts.

Symbols are dense integer indices; string labels exist only at the I/O
boundary.  All statistics are sliding-window based and windows never
straddle sample boundaries, so the counts of several independent samples
are the sums of the per-sample counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Alphabet",
    "AlphabetMismatchError",
    "ContextCounts",
    "MultiSample",
    "SymbolSeq",
    "as_sample_arrays",
    "build_counts",
    "count_occurrences",
    "pair_counts",
]


class AlphabetMismatchError(ValueError):
    """Sequences or words over different alphabets were combined."""


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set; labels are for parsing and reporting only.

    A single-letter alphabet is allowed: it arises naturally from trivial
    one-cell quantizers and every formula degrades gracefully to it.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("alphabet labels must be pairwise distinct")

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def of_size(cls, size: int) -> "Alphabet":
        """Alphabet with default labels "0", "1", ..., str(size - 1)."""
        if size < 1:
            raise ValueError("alphabet size must be positive")
        return cls(tuple(str(i) for i in range(size)))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise AlphabetMismatchError(f"unknown symbol label {label!r}") from None


def _check_same_alphabet(a: Alphabet, b: Alphabet) -> None:
    if a.labels != b.labels:
        raise AlphabetMismatchError(
            f"alphabets differ: {a.labels!r} vs {b.labels!r}"
        )


@dataclass(eq=False)
class SymbolSeq:
    """A finite sequence of symbol indices over one alphabet."""

    alphabet: Alphabet
    symbols: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= self.alphabet.size):
            raise ValueError("symbol index out of alphabet range")
        self.symbols = arr

    def __len__(self) -> int:
        return int(self.symbols.size)

    @classmethod
    def from_labels(cls, alphabet: Alphabet, tokens) -> "SymbolSeq":
        return cls(alphabet, np.array([alphabet.index(t) for t in tokens], dtype=np.int64))

    def to_labels(self) -> list[str]:
        return [self.alphabet.labels[i] for i in self.symbols]

    def extended(self, word) -> "SymbolSeq":
        """New sequence with `word` (indices) appended."""
        extra = np.asarray(word, dtype=np.int64).reshape(-1)
        return SymbolSeq(self.alphabet, np.concatenate([self.symbols, extra]))


@dataclass(eq=False)
class MultiSample:
    """Several independent samples from one source, evaluated jointly.

    Window statistics are summed per sample and never cross a boundary.
    """

    samples: list[SymbolSeq]

    def __post_init__(self):
        if not self.samples:
            raise ValueError("multi-sample must contain at least one sample")
        for s in self.samples[1:]:
            _check_same_alphabet(self.samples[0].alphabet, s.alphabet)

    @property
    def alphabet(self) -> Alphabet:
        return self.samples[0].alphabet

    @property
    def total_length(self) -> int:
        return sum(len(s) for s in self.samples)

    def __len__(self) -> int:
        return self.total_length

    def extended(self, word) -> "MultiSample":
        """New multi-sample with `word` appended as an additional sample."""
        extra = SymbolSeq(self.alphabet, np.asarray(word, dtype=np.int64))
        return MultiSample(self.samples + [extra])


def as_sample_arrays(x) -> tuple[Alphabet, list[np.ndarray]]:
    """Normalize a SymbolSeq or MultiSample to (alphabet, list of arrays)."""
    if isinstance(x, SymbolSeq):
        return x.alphabet, [x.symbols]
    if isinstance(x, MultiSample):
        return x.alphabet, [s.symbols for s in x.samples]
    raise TypeError(f"expected SymbolSeq or MultiSample, got {type(x).__name__}")


def _coerce_word(x_alphabet: Alphabet, v) -> np.ndarray:
    if isinstance(v, SymbolSeq):
        _check_same_alphabet(x_alphabet, v.alphabet)
        return v.symbols
    arr = np.asarray(v, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= x_alphabet.size):
        raise AlphabetMismatchError("word symbol outside the sequence alphabet")
    return arr


def count_occurrences(x, v) -> int:
    """Number of sliding windows equal to the word `v`, summed per sample.

    A sample shorter than `v` contributes no window.
    """
    alphabet, samples = as_sample_arrays(x)
    word = _coerce_word(alphabet, v)
    k = word.size
    if k < 1:
        raise ValueError("word must be nonempty")
    total = 0
    for arr in samples:
        if arr.size < k:
            continue
        windows = np.lib.stride_tricks.sliding_window_view(arr, k)
        total += int((windows == word).all(axis=1).sum())
    return total


class ContextCounts:
    """Occurrence counts nu(v a) for every context v up to a maximum order.

    `table(k)` maps a context word of length k to the per-symbol vector of
    counts of (k+1)-windows starting with that context.  Supports
    incremental `append` with explicit `new_sample` boundaries; appending
    one symbol at a time is equivalent to a batch rebuild.
    """

    def __init__(self, alphabet: Alphabet, max_order: int):
        if max_order < 0:
            raise ValueError("max_order must be nonnegative")
        self.alphabet = alphabet
        self.max_order = max_order
        self._tables: list[dict[tuple, np.ndarray]] = [
            {} for _ in range(max_order + 1)
        ]
        self._suffix: list[int] = []   # last max_order symbols of the open sample
        self._pos = 0                  # symbols consumed in the open sample
        self._closed: list[int] = []   # lengths of closed samples
        self.total_length = 0

    def append(self, symbol: int) -> None:
        a = int(symbol)
        if not 0 <= a < self.alphabet.size:
            raise ValueError("symbol index out of alphabet range")
        for k in range(min(self._pos, self.max_order) + 1):
            ctx = tuple(self._suffix[len(self._suffix) - k:])
            row = self._tables[k].get(ctx)
            if row is None:
                row = np.zeros(self.alphabet.size, dtype=np.int64)
                self._tables[k][ctx] = row
            row[a] += 1
        self._suffix.append(a)
        if len(self._suffix) > self.max_order:
            self._suffix.pop(0)
        self._pos += 1
        self.total_length += 1

    def new_sample(self) -> None:
        """Close the open sample; subsequent appends start a fresh one."""
        self._closed.append(self._pos)
        self._suffix = []
        self._pos = 0

    @property
    def sample_lengths(self) -> list[int]:
        return self._closed + [self._pos]

    def table(self, k: int) -> dict[tuple, np.ndarray]:
        if not 0 <= k <= self.max_order:
            raise ValueError("context length exceeds max_order")
        return self._tables[k]

    def pair_count(self, v, a: int) -> int:
        """nu(v a) for a context v with len(v) <= max_order."""
        row = self._tables[len(tuple(v))].get(tuple(int(s) for s in v))
        return 0 if row is None else int(row[int(a)])

    def context_total(self, v) -> int:
        """nu-bar(v) = sum_a nu(v a)."""
        row = self._tables[len(tuple(v))].get(tuple(int(s) for s in v))
        return 0 if row is None else int(row.sum())


def pair_counts(x, k: int) -> dict[tuple, np.ndarray]:
    """Counts of (k+1)-windows grouped by their length-k context prefix.

    Vectorized batch construction, independent of the incremental path.
    """
    alphabet, samples = as_sample_arrays(x)
    table: dict[tuple, np.ndarray] = {}
    for arr in samples:
        if arr.size < k + 1:
            continue
        windows = np.lib.stride_tricks.sliding_window_view(arr, k + 1)
        uniq, counts = np.unique(windows, axis=0, return_counts=True)
        for row, n in zip(uniq, counts):
            ctx = tuple(int(s) for s in row[:k])
            dest = table.get(ctx)
            if dest is None:
                dest = np.zeros(alphabet.size, dtype=np.int64)
                table[ctx] = dest
            dest[int(row[k])] += int(n)
    return table


def build_counts(x, max_order: int) -> ContextCounts:
    """Materialize ContextCounts for all context lengths up to max_order."""
    alphabet, samples = as_sample_arrays(x)
    cc = ContextCounts(alphabet, max_order)
    for j, arr in enumerate(samples):
        if j:
            cc.new_sample()
        for a in arr:
            cc.append(int(a))
    return cc
