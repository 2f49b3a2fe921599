"""
FM-index over a byte text.

Rows (positions in the BWT) and text positions are 1-based and inclusive.
The sentinel, byte 0x00, is appended to the text and occupies position n+1;
it sorts below every other symbol.

locate(row) returns the text position of the BWT symbol at that row, so the
suffix at the row starts one position later (the sentinel row wraps to 1).
"""

import bisect
import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterator, List, Union

import numpy as np

from .errors import IndexBuildError, PositionError

logger = logging.getLogger(__name__)

SENTINEL = 0
SENTINEL_DISPLAY = "$"
DEFAULT_SAMPLE_RATE = 32
DEFAULT_RANK_STEP = 64

Symbols = Union[bytes, bytearray, memoryview, str]


def as_symbols(data: Symbols) -> bytes:
    """Normalize text or pattern input to bytes (str is read as latin-1)."""
    if isinstance(data, str):
        return data.encode("latin-1")
    return bytes(data)


@dataclass(frozen=True)
class Interval:
    """A range of sorted-suffix rows; empty iff lo > hi."""
    lo: int
    hi: int

    @classmethod
    def of(cls, lo: int, hi: int) -> "Interval":
        return cls(lo, hi) if lo <= hi else EMPTY

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def __len__(self) -> int:
        return max(0, self.hi - self.lo + 1)

    def __contains__(self, row: int) -> bool:
        return self.lo <= row <= self.hi

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.lo, self.hi + 1))

    def to_list(self) -> List[int]:
        if self.is_empty:
            return []
        return [self.lo, self.hi]

    def __str__(self) -> str:
        if self.is_empty:
            return "[]"
        if self.lo == self.hi:
            return f"[{self.lo}]"
        return f"[{self.lo}, {self.hi}]"


EMPTY = Interval(1, 0)


def suffix_array(data: bytes) -> np.ndarray:
    """
    0-based suffix array by prefix doubling.

    data must end with a unique symbol smaller than every other one.
    """
    size = len(data)
    rank = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    k = 1
    while True:
        second = np.full(size, -1, dtype=np.int64)
        if k < size:
            second[: size - k] = rank[k:]
        order = np.lexsort((second, rank))

        first_keys = rank[order]
        second_keys = second[order]
        boundary = np.empty(size, dtype=bool)
        boundary[0] = True
        boundary[1:] = (first_keys[1:] != first_keys[:-1]) | (second_keys[1:] != second_keys[:-1])

        rank = np.empty(size, dtype=np.int64)
        rank[order] = np.cumsum(boundary) - 1
        if boundary.all():
            return order
        k *= 2


class BwtIndex:
    """
    BWT-based index supporting backward search, locate and antilocate.

    Immutable after construction; all queries are read-only.

    Example:
        >>> index = BwtIndex.build("mississippi", sample_rate=4)
        >>> index.backward_search("ip")
        Interval(lo=3, hi=3)
    """

    def __init__(
        self,
        bwt: bytes,
        sample_rate: int,
        locate_samples: Dict[int, int],
        antilocate_samples: Dict[int, int],
        rank_step: int = DEFAULT_RANK_STEP,
    ):
        """
        Assemble an index from its stored parts.

        Args:
            bwt: BWT of text+sentinel, sentinel as byte 0x00
            sample_rate: spacing of sampled text positions
            locate_samples: sampled row -> text position
            antilocate_samples: sampled text position -> row
            rank_step: spacing of rank checkpoints
        """
        if bwt.count(SENTINEL) != 1:
            raise IndexBuildError("BWT must contain exactly one sentinel")
        if sample_rate < 1 or rank_step < 1:
            raise IndexBuildError("sample_rate and rank_step must be positive")

        self.bwt = bytes(bwt)
        self.n = len(self.bwt) - 1
        self.sample_rate = sample_rate
        self.rank_step = rank_step
        self.locate_samples = dict(locate_samples)
        self.antilocate_samples = dict(antilocate_samples)

        column = np.frombuffer(self.bwt, dtype=np.uint8)
        counts = np.bincount(column, minlength=256)

        self.alphabet = bytes(c for c in range(1, 256) if counts[c])
        self._symbols: List[int] = [SENTINEL] + list(self.alphabet)
        self._code = [-1] * 256
        for code, symbol in enumerate(self._symbols):
            self._code[symbol] = code

        # cum_counts[c]: number of BWT symbols strictly smaller than c
        self.cum_counts: List[int] = [0] * 256
        running = 0
        for c in range(256):
            self.cum_counts[c] = running
            running += int(counts[c])
        self._first_rows = [self.cum_counts[s] + 1 for s in self._symbols]

        blocks = len(self.bwt) // rank_step
        self._checkpoints = np.zeros((blocks + 1, len(self._symbols)), dtype=np.int64)
        self._occurrences: List[np.ndarray] = []
        for code, symbol in enumerate(self._symbols):
            mask = column == symbol
            self._checkpoints[1:, code] = np.cumsum(mask)[rank_step - 1::rank_step][:blocks]
            self._occurrences.append(np.flatnonzero(mask) + 1)

    @classmethod
    def build(
        cls,
        text: Symbols,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        rank_step: int = DEFAULT_RANK_STEP,
    ) -> "BwtIndex":
        """Build the index of text; both sample sets use sample_rate."""
        try:
            data = as_symbols(text)
        except UnicodeEncodeError as e:
            raise IndexBuildError(f"text is not over a byte alphabet: {e}") from e
        if not data:
            raise IndexBuildError("cannot index an empty text")
        if SENTINEL in data:
            raise IndexBuildError("text contains the reserved sentinel byte 0x00")
        if sample_rate < 1:
            raise IndexBuildError(f"sample_rate must be positive, got {sample_rate}")

        started = time.perf_counter()
        n = len(data)
        terminated = data + bytes([SENTINEL])
        order = suffix_array(terminated)
        column = np.frombuffer(terminated, dtype=np.uint8)
        bwt = column[order - 1].tobytes()

        positions = np.where(order == 0, n + 1, order)
        sampled = np.flatnonzero((positions % sample_rate == 0) | (positions == n + 1))
        locate_samples = {int(r) + 1: int(positions[r]) for r in sampled}
        antilocate_samples = {pos: row for row, pos in locate_samples.items()}

        index = cls(bwt, sample_rate, locate_samples, antilocate_samples, rank_step)
        logger.info(
            f"✅ Index built: n={n}, sigma={len(index.alphabet)}, "
            f"samples={len(locate_samples)} in {time.perf_counter() - started:.3f}s"
        )
        return index

    # ------------------------------------------------------------------
    # rank / select / LF
    # ------------------------------------------------------------------

    def rank(self, symbol: int, i: int) -> int:
        """Occurrences of symbol in bwt[1..i]."""
        code = self._code[symbol]
        if code < 0:
            return 0
        block = i // self.rank_step
        return int(self._checkpoints[block, code]) + self.bwt.count(symbol, block * self.rank_step, i)

    def select(self, symbol: int, k: int) -> int:
        """Row of the k-th occurrence of symbol in the BWT."""
        return int(self._occurrences[self._code[symbol]][k - 1])

    def lf(self, row: int) -> int:
        """Row of the suffix starting one position earlier (cyclically)."""
        symbol = self.bwt[row - 1]
        return self.cum_counts[symbol] + self.rank(symbol, row)

    def psi(self, row: int) -> int:
        """Inverse of lf: row of the suffix starting one position later."""
        code = bisect.bisect_right(self._first_rows, row) - 1
        symbol = self._symbols[code]
        return self.select(symbol, row - self.cum_counts[symbol])

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    @property
    def alphabet_size(self) -> int:
        return len(self.alphabet)

    def backward_search(self, pattern: Symbols) -> Interval:
        """Interval of rows whose suffixes start with pattern."""
        try:
            symbols = as_symbols(pattern)
        except UnicodeEncodeError:
            return EMPTY

        lo, hi = 1, self.n + 1
        for symbol in reversed(symbols):
            if symbol == SENTINEL or self._code[symbol] < 0:
                return EMPTY
            base = self.cum_counts[symbol]
            lo = base + self.rank(symbol, lo - 1) + 1
            hi = base + self.rank(symbol, hi)
            if lo > hi:
                return EMPTY
        return Interval(lo, hi)

    def count(self, pattern: Symbols) -> int:
        return len(self.backward_search(pattern))

    def locate(self, row: int) -> int:
        """Text position of the BWT symbol at row."""
        self._check_row(row)
        steps = 0
        while row not in self.locate_samples:
            row = self.lf(row)
            steps += 1
        return self.wrap(self.locate_samples[row] + steps)

    def antilocate(self, position: int) -> int:
        """Row whose BWT symbol is the text symbol at position."""
        if not 1 <= position <= self.n + 1:
            raise PositionError(f"text position {position} outside 1..{self.n + 1}")
        sampled = self.antilocate_samples.get(position)
        if sampled is not None:
            return sampled

        # position 0 of the cyclic text is the sentinel at n+1
        below = (position // self.sample_rate) * self.sample_rate
        above = below + self.sample_rate
        if above > self.n:
            above = self.n + 1

        if position - below < above - position:
            row = self.antilocate_samples[below or self.n + 1]
            for _ in range(position - below):
                row = self.psi(row)
        else:
            row = self.antilocate_samples[above]
            for _ in range(above - position):
                row = self.lf(row)
        return row

    def suffix_start(self, row: int) -> int:
        """Text position where the suffix at row starts."""
        return self.wrap(self.locate(row) + 1)

    def row_of_suffix(self, position: int) -> int:
        """Row of the suffix starting at position (n+1 is the sentinel suffix)."""
        if not 1 <= position <= self.n + 1:
            raise PositionError(f"suffix start {position} outside 1..{self.n + 1}")
        return self.antilocate(self.wrap(position - 1))

    def locate_all(self, interval: Interval, pattern_len: int = 0) -> List[int]:
        """Sorted start positions of the occurrences behind an interval."""
        if interval.is_empty:
            return []
        starts = sorted(self.suffix_start(row) for row in interval)
        if pattern_len:
            starts = [s for s in starts if s + pattern_len - 1 <= self.n]
        return starts

    def extract(self, start: int, end: int) -> bytes:
        """Text symbols start..end recovered from the index."""
        if start == end + 1:
            return b""
        if not 1 <= start <= end <= self.n:
            raise PositionError(f"range {start}..{end} outside 1..{self.n}")
        row = self.row_of_suffix(end + 1)
        out = bytearray()
        for _ in range(end - start + 1):
            out.append(self.bwt[row - 1])
            row = self.lf(row)
        out.reverse()
        return bytes(out)

    def invert(self) -> bytes:
        """The indexed text, without the sentinel."""
        return self.extract(1, self.n)

    def bwt_text(self) -> str:
        return self.bwt.decode("latin-1").replace(chr(SENTINEL), SENTINEL_DISPLAY)

    def wrap(self, position: int) -> int:
        """Reduce a position into 1..n+1 (the text is cyclic through the sentinel)."""
        return (position - 1) % (self.n + 1) + 1

    def _check_row(self, row: int):
        if not 1 <= row <= self.n + 1:
            raise PositionError(f"row {row} outside 1..{self.n + 1}")

    def __repr__(self) -> str:
        return f"BwtIndex(n={self.n}, sigma={len(self.alphabet)}, sample_rate={self.sample_rate})"


def build_index(text: Symbols, sample_rate: int = DEFAULT_SAMPLE_RATE) -> BwtIndex:
    """Build an index with the given sample rate."""
    return BwtIndex.build(text, sample_rate=sample_rate)
