"""
Storage Layer - binary formats for indexes and grammars.

Both formats are little-endian, start with a 4-byte magic and a version
byte, and end with a CRC32 of every preceding byte. Encoding is
deterministic: the same index or grammar always yields the same bytes.
"""

import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, Iterable, List, Union

import numpy as np

from .errors import GrammarFormatError, IndexBuildError, IndexFormatError
from .fm_index import BwtIndex
from .grammar import Grammar, Terminal

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"BWTG"
GRAMMAR_MAGIC = b"SLPG"
FORMAT_VERSION = 1

_U64 = struct.Struct("<Q")
_CRC = struct.Struct("<I")
_PAIR_DTYPE = np.dtype("<u8")

PathLike = Union[str, Path]


class _Reader:
    """Sequential reader over a checksummed payload."""

    def __init__(self, payload: bytes, magic: bytes, error: type):
        self.error = error
        if len(payload) < len(magic) + 1 + _CRC.size:
            raise error("payload truncated")
        body, (crc,) = payload[:-_CRC.size], _CRC.unpack(payload[-_CRC.size:])
        if body[:len(magic)] != magic:
            raise error(f"bad magic {body[:len(magic)]!r}, expected {magic!r}")
        if body[len(magic)] != FORMAT_VERSION:
            raise error(f"unsupported version {body[len(magic)]}")
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise error("checksum mismatch")
        self.body = body
        self.offset = len(magic) + 1

    def take(self, size: int) -> bytes:
        if size < 0 or self.offset + size > len(self.body):
            raise self.error("payload truncated")
        chunk = self.body[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u64(self) -> int:
        return _U64.unpack(self.take(_U64.size))[0]

    def u64_pairs(self) -> List[tuple]:
        count = self.u64()
        raw = np.frombuffer(self.take(count * 2 * _PAIR_DTYPE.itemsize), dtype=_PAIR_DTYPE)
        return [(int(a), int(b)) for a, b in raw.reshape(count, 2)]

    def finish(self):
        if self.offset != len(self.body):
            raise self.error(f"{len(self.body) - self.offset} trailing bytes")


def _seal(body: bytearray) -> bytes:
    body += _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)
    return bytes(body)


def _pairs_bytes(pairs: List[tuple]) -> bytes:
    return _U64.pack(len(pairs)) + np.array(pairs, dtype=_PAIR_DTYPE).reshape(len(pairs), 2).tobytes()


# ----------------------------------------------------------------------
# index
# ----------------------------------------------------------------------

def index_to_bytes(index: BwtIndex) -> bytes:
    body = bytearray(INDEX_MAGIC)
    body.append(FORMAT_VERSION)
    body += _U64.pack(index.n)
    body += _U64.pack(len(index.alphabet))
    body += _U64.pack(index.sample_rate)
    body += index.alphabet
    body += index.bwt
    body += _pairs_bytes(sorted(index.locate_samples.items()))
    body += _pairs_bytes(sorted(index.antilocate_samples.items()))
    return _seal(body)


def index_from_bytes(payload: bytes) -> BwtIndex:
    reader = _Reader(payload, INDEX_MAGIC, IndexFormatError)
    n = reader.u64()
    sigma = reader.u64()
    sample_rate = reader.u64()
    alphabet = reader.take(sigma)
    bwt = reader.take(n + 1)
    locate_samples = dict(reader.u64_pairs())
    antilocate_samples = dict(reader.u64_pairs())
    reader.finish()

    try:
        index = BwtIndex(bwt, sample_rate, locate_samples, antilocate_samples)
    except IndexBuildError as e:
        raise IndexFormatError(f"inconsistent index payload: {e}") from e
    if index.alphabet != alphabet:
        raise IndexFormatError("stored alphabet does not match the BWT")
    if n + 1 not in antilocate_samples:
        raise IndexFormatError("sentinel position is not sampled")
    return index


def save_index(index: BwtIndex, path: PathLike):
    """Write index to path."""
    payload = index_to_bytes(index)
    Path(path).write_bytes(payload)
    logger.info(f"💾 Index saved: {path} ({len(payload)} bytes)")


def load_index(path: PathLike) -> BwtIndex:
    """Read an index written by save_index."""
    index = index_from_bytes(Path(path).read_bytes())
    logger.info(f"✅ Index loaded: {path} (n={index.n}, sigma={index.alphabet_size})")
    return index


# ----------------------------------------------------------------------
# grammar
# ----------------------------------------------------------------------

def serialize_grammar(grammar: Grammar, roots: Iterable[int]) -> bytes:
    """
    Encode the rules reachable from roots.

    Rules are renumbered densely in id order, so children precede parents;
    the stored root ids use the new numbering.
    """
    roots = list(roots)
    live = grammar.reachable(roots)
    renumber = _renumbering(live)

    body = bytearray(GRAMMAR_MAGIC)
    body.append(FORMAT_VERSION)
    body += _U64.pack(len(live))
    for old in live:
        rule = grammar.rules[old]
        if isinstance(rule, Terminal):
            body.append(0)
            body.append(rule.symbol)
        else:
            body.append(1)
            body += _U64.pack(renumber[rule.left])
            body += _U64.pack(renumber[rule.right])
    body += _U64.pack(len(roots))
    for root in roots:
        body += _U64.pack(renumber[root])
    return _seal(body)


def _renumbering(live: List[int]) -> Dict[int, int]:
    return {old: new for new, old in enumerate(live)}


def serialized_roots(grammar: Grammar, roots: Iterable[int]) -> List[int]:
    """Ids that serialize_grammar stores for roots."""
    roots = list(roots)
    renumber = _renumbering(grammar.reachable(roots))
    return [renumber[r] for r in roots]


def deserialize_grammar(payload: bytes) -> Grammar:
    """Decode a grammar; its roots are the stored root list."""
    reader = _Reader(payload, GRAMMAR_MAGIC, GrammarFormatError)
    grammar = Grammar()
    ids: List[int] = []
    for position in range(reader.u64()):
        tag = reader.take(1)[0]
        if tag == 0:
            ids.append(grammar.terminal(reader.take(1)[0]))
        elif tag == 1:
            left, right = reader.u64(), reader.u64()
            if left >= position or right >= position:
                raise GrammarFormatError(
                    f"rule {position} refers to rule {max(left, right)} that is not defined before it"
                )
            ids.append(grammar.pair(ids[left], ids[right]))
        else:
            raise GrammarFormatError(f"rule {position} has unknown tag {tag}")

    roots = []
    for _ in range(reader.u64()):
        root = reader.u64()
        if root >= len(ids):
            raise GrammarFormatError(f"root {root} refers to a missing rule")
        roots.append(ids[root])
    reader.finish()
    grammar.roots = roots
    return grammar


def save_grammar(grammar: Grammar, roots: Iterable[int], path: PathLike):
    payload = serialize_grammar(grammar, roots)
    Path(path).write_bytes(payload)
    logger.info(f"💾 Grammar saved: {path} ({len(payload)} bytes)")
