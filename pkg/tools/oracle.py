#!/usr/bin/env python3
"""
Brute-force reference answers for the index and matching code.

Everything here works on plain slices and full sorts. It imports nothing
from the gluesearch algorithms except the Interval type, so the results
can be trusted as ground truth in tests.
"""

import re
from dataclasses import dataclass
from typing import List, Set, Tuple, Union

from gluesearch.fm_index import Interval

SENTINEL = b"\x00"

Text = Union[str, bytes]


def _bytes(text: Text) -> bytes:
    return text.encode("latin-1") if isinstance(text, str) else bytes(text)


@dataclass
class OracleSuffixTable:
    """text + sentinel with its suffix starts in sorted order (1-based)."""
    text: bytes
    sorted_starts: List[int]

    @classmethod
    def build(cls, text: Text) -> "OracleSuffixTable":
        data = _bytes(text)
        if not data:
            raise ValueError("text must be nonempty")
        if SENTINEL in data:
            raise ValueError("text contains the sentinel")
        data += SENTINEL
        starts = sorted(range(1, len(data) + 1), key=lambda s: data[s - 1:])
        return cls(data, starts)

    def suffix(self, start: int) -> bytes:
        return self.text[start - 1:]

    def interval(self, pattern: Text) -> Interval:
        """Rows whose suffixes start with pattern, found by scanning every row."""
        pat = _bytes(pattern)
        rows = [row for row, s in enumerate(self.sorted_starts, start=1) if self.suffix(s).startswith(pat)]
        if not rows:
            return Interval(1, 0)
        return Interval(rows[0], rows[-1])


def oracle_bwt(text: Text) -> str:
    """BWT of text + sentinel, with '$' for the sentinel."""
    table = OracleSuffixTable.build(text)
    data = table.text
    # the symbol before the suffix at s is data[s-2]; the suffix at 1 wraps to the sentinel
    column = bytes(data[s - 2] for s in table.sorted_starts)
    return column.decode("latin-1").replace("\x00", "$")


def oracle_occurrences(text: Text, pattern: Text) -> List[int]:
    data, pat = _bytes(text), _bytes(pattern)
    return [p + 1 for p in range(len(data) - len(pat) + 1) if data[p:p + len(pat)] == pat]


def oracle_interval(text: Text, pattern: Text) -> Interval:
    return OracleSuffixTable.build(text).interval(pattern)


def _matches_at(data: bytes, pattern: bytes, p: int) -> bool:
    """Does pattern, with '?' matching any symbol, occur at 0-based p?"""
    if p < 0 or p + len(pattern) > len(data):
        return False
    return all(c == 0x3F or data[p + k] == c for k, c in enumerate(pattern))


def _strip(pattern: bytes) -> bytes:
    return pattern.strip(b"?")


def oracle_wildcard_exact(text: Text, pattern: Text) -> List[int]:
    """Starts (1-based) where pattern matches with each '?' taking one symbol; boundary '?' dropped."""
    data, pat = _bytes(text), _strip(_bytes(pattern))
    return [p + 1 for p in range(len(data)) if _matches_at(data, pat, p)]


def oracle_wildcard_flexible(text: Text, pattern: Text) -> List[Tuple[int, int]]:
    """Spans where each run of w '?' may take anywhere from 0 to w symbols."""
    data, pat = _bytes(text), _strip(_bytes(pattern))
    runs = re.findall(rb"[^?]+|\?+", pat)
    subpatterns = [run for run in runs if not run.startswith(b"?")]
    gaps = [len(run) for run in runs if run.startswith(b"?")]

    spans: Set[Tuple[int, int]] = set()

    def extend(h: int, start: int, pos: int):
        sub = subpatterns[h]
        if data[pos:pos + len(sub)] != sub:
            return
        end = pos + len(sub)
        if h == len(subpatterns) - 1:
            spans.add((start + 1, end))
            return
        for gap in range(gaps[h] + 1):
            extend(h + 1, start, end + gap)

    for p in range(len(data)):
        extend(0, p, p)
    return sorted(spans)
