"""
Interval gluing: the interval of P1P2 from the intervals of P1 and P2.

For a row i in P1's interval, f(i) = antilocate(locate(i) + |P1|) is the row
of the suffix that follows that occurrence of P1. f is strictly increasing
on a genuine pattern interval, so rows whose f lands below P2's interval
come first, rows landing inside it form the answer, and the rest follow.
Two binary searches find the answer's endpoints.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Tuple

from .fm_index import EMPTY, BwtIndex, Interval

logger = logging.getLogger(__name__)


@dataclass
class GlueStats:
    """Index call counts for one or more glue calls."""
    locate_calls: int = 0
    antilocate_calls: int = 0
    comparisons: int = 0

    def merge(self, other: "GlueStats"):
        self.locate_calls += other.locate_calls
        self.antilocate_calls += other.antilocate_calls
        self.comparisons += other.comparisons

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def glue_image(index: BwtIndex, row: int, len_p1: int) -> int:
    """f(row): the row of the suffix starting right after P1's occurrence at row."""
    return index.antilocate(index.wrap(index.locate(row) + len_p1))


def _first_true(lo: int, hi: int, predicate: Callable[[int], bool], stats: GlueStats) -> int:
    """Least row in [lo, hi) satisfying a monotone predicate, or hi."""
    while lo < hi:
        mid = (lo + hi) // 2
        stats.comparisons += 1
        if predicate(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def glue_with_stats(
    index: BwtIndex,
    interval_p1: Interval,
    len_p1: int,
    interval_p2: Interval,
) -> Tuple[Interval, GlueStats]:
    """
    Glue two pattern intervals and report the index calls spent.

    Both intervals must be genuine backward-search intervals of nonempty
    patterns; anything else gives unspecified output. Each endpoint search
    visits at most ceil(log2(|interval_p1| + 1)) rows.
    """
    stats = GlueStats()
    if interval_p1.is_empty or interval_p2.is_empty:
        return EMPTY, stats
    if len_p1 < 1:
        raise ValueError(f"len_p1 must be positive, got {len_p1}")

    def image(row: int) -> int:
        stats.locate_calls += 1
        stats.antilocate_calls += 1
        return glue_image(index, row, len_p1)

    end = interval_p1.hi + 1
    lo = _first_true(interval_p1.lo, end, lambda row: image(row) >= interval_p2.lo, stats)
    hi = _first_true(interval_p1.lo, end, lambda row: image(row) > interval_p2.hi, stats) - 1

    result = Interval.of(lo, hi)
    logger.debug(f"glue {interval_p1} +{len_p1} {interval_p2} -> {result} ({stats.antilocate_calls} antilocates)")
    return result, stats


def glue(index: BwtIndex, interval_p1: Interval, len_p1: int, interval_p2: Interval) -> Interval:
    """Interval of P1P2 given the intervals of P1 (of length len_p1) and P2."""
    return glue_with_stats(index, interval_p1, len_p1, interval_p2)[0]
