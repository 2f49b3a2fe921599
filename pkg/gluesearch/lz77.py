"""
Greedy non-overlapping LZ77 parsing of patterns.

Each phrase is either a literal symbol or a copy of an earlier stretch of
the already-parsed input. Copies never overlap the position they start at,
and on equal lengths the leftmost source wins.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Union

from .errors import LZ77FormatError
from .fm_index import Symbols, as_symbols

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Literal:
    """A single symbol with no earlier occurrence to copy from."""
    symbol: int

    def __str__(self) -> str:
        return f"L {format_symbol(self.symbol)}"


@dataclass(frozen=True)
class Copy:
    """length symbols copied from 1-based position src of the parsed prefix."""
    src: int
    length: int

    def __str__(self) -> str:
        return f"C {self.src} {self.length}"


Phrase = Union[Literal, Copy]


@dataclass
class ParseResult:
    """Phrases of a parse plus where each input pattern ends."""
    phrases: List[Phrase] = field(default_factory=list)
    pattern_boundaries: List[int] = field(default_factory=list)

    @property
    def phrase_count(self) -> int:
        return len(self.phrases)

    @property
    def total_length(self) -> int:
        return self.pattern_boundaries[-1] if self.pattern_boundaries else 0

    def to_dict(self) -> Dict:
        return {
            "phrase_count": self.phrase_count,
            "total_length": self.total_length,
            "pattern_boundaries": list(self.pattern_boundaries),
            "phrases": [str(p) for p in self.phrases],
        }


def format_symbol(symbol: int) -> str:
    """Printable non-space ASCII as itself, anything else as 0xHH."""
    if 33 <= symbol <= 126:
        return chr(symbol)
    return f"0x{symbol:02x}"


def _parse_symbol(token: str) -> int:
    if len(token) == 1 and 33 <= ord(token) <= 126:
        return ord(token)
    if len(token) == 4 and token.startswith("0x"):
        try:
            return int(token[2:], 16)
        except ValueError:
            pass
    raise LZ77FormatError(f"bad literal symbol {token!r}")


def _parse_range(data: bytes, begin: int, end: int, phrases: List[Phrase]):
    """Greedily parse data[begin:end]; sources may start anywhere before the cursor."""
    pos = begin
    while pos < end:
        src = 0
        length = 0
        while pos + length < end:
            found = data.find(data[pos:pos + length + 1], src, pos)
            if found < 0:
                break
            src = found
            length += 1

        if length == 0:
            phrases.append(Literal(data[pos]))
            pos += 1
        else:
            phrases.append(Copy(src + 1, length))
            pos += length


def parse(text: Symbols) -> ParseResult:
    """Greedy leftmost parse of a single sequence."""
    data = as_symbols(text)
    result = ParseResult()
    _parse_range(data, 0, len(data), result.phrases)
    if data:
        result.pattern_boundaries.append(len(data))
    logger.debug(f"Parsed {len(data)} symbols into {result.phrase_count} phrases")
    return result


def parse_multi(patterns: Iterable[Symbols]) -> ParseResult:
    """
    Parse the concatenation of patterns.

    Copies may reach back into earlier patterns but every phrase ends at or
    before the end of the pattern it starts in.
    """
    pieces = [as_symbols(p) for p in patterns]
    data = b"".join(pieces)
    result = ParseResult()
    begin = 0
    for piece in pieces:
        end = begin + len(piece)
        _parse_range(data, begin, end, result.phrases)
        result.pattern_boundaries.append(end)
        begin = end
    logger.debug(f"Parsed {len(pieces)} patterns ({len(data)} symbols) into {result.phrase_count} phrases")
    return result


def decode(phrases: Iterable[Phrase]) -> bytes:
    """Expand phrases back into the symbol sequence."""
    out = bytearray()
    for phrase in phrases:
        if isinstance(phrase, Literal):
            out.append(phrase.symbol)
            continue
        if phrase.src < 1 or phrase.length < 1 or phrase.src + phrase.length - 1 > len(out):
            raise LZ77FormatError(
                f"copy (src={phrase.src}, len={phrase.length}) is not inside the {len(out)} symbols decoded so far"
            )
        start = phrase.src - 1
        out += out[start:start + phrase.length]
    return bytes(out)


def dump_phrases(result: ParseResult) -> str:
    """Textual dump: one phrase per line, then a B line with the boundaries."""
    lines = [str(p) for p in result.phrases]
    lines.append(" ".join(["B"] + [str(b) for b in result.pattern_boundaries]))
    return "\n".join(lines) + "\n"


def load_phrases(dump: str) -> ParseResult:
    """Inverse of dump_phrases."""
    result = ParseResult()
    for number, line in enumerate(dump.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        tag, args = fields[0], fields[1:]
        try:
            if tag == "L" and len(args) == 1:
                result.phrases.append(Literal(_parse_symbol(args[0])))
            elif tag == "C" and len(args) == 2:
                result.phrases.append(Copy(int(args[0]), int(args[1])))
            elif tag == "B":
                result.pattern_boundaries = [int(a) for a in args]
            else:
                raise LZ77FormatError(f"unknown phrase line {line!r}")
        except ValueError as e:
            raise LZ77FormatError(f"line {number}: {e}") from e
    return result
