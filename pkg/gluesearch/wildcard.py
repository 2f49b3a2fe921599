"""
Wildcard pattern matching over a BwtIndex.

A pattern such as b"s??s" is split into maximal wildcard-free sub-patterns
and the gaps between them. Matching starts from the sub-pattern with the
fewest occurrences and checks the other sub-patterns one at a time, each
check being one antilocate plus an interval membership test.

Leading and trailing wildcards are dropped; reported starts refer to the
first concrete symbol (add WildcardPattern.leading to recover the start of
the full pattern).
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple

from .errors import WildcardPatternError
from .fm_index import EMPTY, BwtIndex, Interval, Symbols, as_symbols
from .glue import glue

logger = logging.getLogger(__name__)

WILDCARD = ord("?")


@dataclass(frozen=True)
class WildcardPattern:
    subpatterns: Tuple[bytes, ...]
    gaps: Tuple[int, ...]
    leading: int = 0
    trailing: int = 0

    @property
    def total_wildcards(self) -> int:
        return sum(self.gaps)

    @property
    def span(self) -> int:
        """Length of an exact match."""
        return sum(len(p) for p in self.subpatterns) + self.total_wildcards


@dataclass
class WildcardStats:
    pivot: int = -1
    pivot_occurrences: int = 0
    candidates_per_round: List[int] = field(default_factory=list)
    locate_calls: int = 0
    antilocate_calls: int = 0

    @property
    def max_candidates(self) -> int:
        return max(self.candidates_per_round, default=0)

    def to_dict(self) -> Dict:
        return {
            "pivot": self.pivot,
            "pivot_occurrences": self.pivot_occurrences,
            "candidates_per_round": list(self.candidates_per_round),
            "locate_calls": self.locate_calls,
            "antilocate_calls": self.antilocate_calls,
        }


def _runs(data: bytes) -> List[Tuple[bool, bytes]]:
    """(is_wildcard, run) for each maximal run."""
    return [(wild, bytes(group)) for wild, group in itertools.groupby(data, key=lambda c: c == WILDCARD)]


def parse_wildcard_pattern(text: Symbols) -> WildcardPattern:
    """Split a '?' pattern into sub-patterns and gap widths."""
    runs = _runs(as_symbols(text))
    leading = trailing = 0
    if runs and runs[0][0]:
        leading = len(runs.pop(0)[1])
    if runs and runs[-1][0]:
        trailing = len(runs.pop()[1])
    if not runs:
        raise WildcardPatternError(f"pattern {text!r} has no concrete symbol")

    subpatterns = tuple(run for wild, run in runs if not wild)
    gaps = tuple(len(run) for wild, run in runs if wild)
    return WildcardPattern(subpatterns, gaps, leading, trailing)


def _extend(
    index: BwtIndex,
    wp: WildcardPattern,
    gap_choices: Callable[[int], Iterable[int]],
    stats: WildcardStats,
) -> Set[Tuple[int, int]]:
    """
    Grow matches outwards from the pivot sub-pattern.

    A candidate is (start of its leftmost matched sub-pattern, start of its
    rightmost one). Extension goes right to the last sub-pattern, then left
    to the first. Returns the surviving (start, end) spans.
    """
    intervals = [index.backward_search(sub) for sub in wp.subpatterns]
    if any(interval.is_empty for interval in intervals):
        return set()

    t = len(wp.subpatterns)
    pivot = min(range(t), key=lambda h: (len(intervals[h]), h))
    stats.pivot = pivot
    stats.pivot_occurrences = len(intervals[pivot])

    candidates = {(start, start) for start in index.locate_all(intervals[pivot])}
    stats.locate_calls += len(intervals[pivot])
    stats.candidates_per_round.append(len(candidates))

    def matches(h: int, q: int) -> bool:
        if not 1 <= q <= index.n:
            return False
        stats.antilocate_calls += 1
        return index.row_of_suffix(q) in intervals[h]

    for h in range(pivot, t - 1):
        width = len(wp.subpatterns[h])
        candidates = {
            (left, right + width + gap)
            for left, right in candidates
            for gap in gap_choices(wp.gaps[h])
            if matches(h + 1, right + width + gap)
        }
        stats.candidates_per_round.append(len(candidates))

    for h in range(pivot, 0, -1):
        width = len(wp.subpatterns[h - 1])
        candidates = {
            (left - gap - width, right)
            for left, right in candidates
            for gap in gap_choices(wp.gaps[h - 1])
            if matches(h - 1, left - gap - width)
        }
        stats.candidates_per_round.append(len(candidates))

    last = len(wp.subpatterns[-1])
    return {(left, right + last - 1) for left, right in candidates}


def match_exact(index: BwtIndex, wp: WildcardPattern, stats: Optional[WildcardStats] = None) -> List[int]:
    """Starts of matches where every wildcard consumes exactly one symbol."""
    stats = stats if stats is not None else WildcardStats()
    spans = _extend(index, wp, lambda width: (width,), stats)
    return sorted(start for start, _ in spans)


def match_flexible(index: BwtIndex, wp: WildcardPattern, stats: Optional[WildcardStats] = None) -> List[Tuple[int, int]]:
    """Spans of matches where gap j consumes anywhere from 0 to w_j symbols."""
    stats = stats if stats is not None else WildcardStats()
    spans = _extend(index, wp, lambda width: range(width + 1), stats)
    return sorted(spans)


class WildcardTemplate:
    """
    A wildcard pattern prepared once against an index.

    The intervals of its concrete runs are found up front; fill() then
    computes the interval of the pattern with its wildcards replaced by the
    given symbols through a chain of glues, with no further backward search.

    Example:
        >>> template = WildcardTemplate(index, "s??s")
        >>> template.locate("is")
        [4]
    """

    def __init__(self, index: BwtIndex, pattern: Symbols):
        data = as_symbols(pattern)
        parse_wildcard_pattern(data)
        self.index = index
        self.pattern = data
        self.wildcards = data.count(WILDCARD)
        self._segments = _runs(data)
        self._run_intervals: Dict[bytes, Interval] = {
            run: index.backward_search(run) for wild, run in self._segments if not wild
        }
        self._symbol_intervals: Dict[int, Interval] = {
            symbol: index.backward_search(bytes([symbol])) for symbol in index.alphabet
        }

    def fill(self, symbols: Symbols) -> Interval:
        """Interval of the pattern with its wildcards replaced, left to right, by symbols."""
        fill = as_symbols(symbols)
        if len(fill) != self.wildcards:
            raise WildcardPatternError(f"pattern has {self.wildcards} wildcards, got {len(fill)} symbols")

        pieces: List[Tuple[Interval, int]] = []
        filled = iter(fill)
        for wild, run in self._segments:
            if wild:
                pieces.extend((self._symbol_intervals.get(next(filled), EMPTY), 1) for _ in run)
            else:
                pieces.append((self._run_intervals[run], len(run)))

        interval, length = pieces[0]
        for piece, piece_len in pieces[1:]:
            if interval.is_empty:
                return EMPTY
            interval = glue(self.index, interval, length, piece)
            length += piece_len
        return interval

    def locate(self, symbols: Symbols) -> List[int]:
        """Sorted start positions of the filled-in pattern."""
        return self.index.locate_all(self.fill(symbols), len(self.pattern))
