"""
Shard wire protocol.

A frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
object. Every object carries a "type" field:

    load_plan -> ack      grammar (base64), roots, pattern_lens, mode
    search    -> result   counts, positions (global, locate mode only)
    shutdown  -> ack
    any       -> error    message
"""

import asyncio
import base64
import binascii
import json
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from gluesearch.core import MAX_FRAME
from gluesearch.errors import GlueSearchError, GrammarFormatError
from gluesearch.grammar import Grammar
from gluesearch.storage import deserialize_grammar

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct(">I")


class MessageType(str, Enum):
    """Types of protocol messages."""
    LOAD_PLAN = "load_plan"
    SEARCH = "search"
    SHUTDOWN = "shutdown"
    ACK = "ack"
    RESULT = "result"
    ERROR = "error"


class SearchMode(str, Enum):
    COUNT = "count"
    LOCATE = "locate"


class ShardError(GlueSearchError):
    """Base exception for the distributed layer."""
    pass


class ProtocolError(ShardError):
    """Raised for malformed frames or when a shard answers with an error."""
    pass


class FrameTooLargeError(ProtocolError):
    """Raised when a frame exceeds the configured limit."""
    pass


class ShardUnreachableError(ShardError):
    """Raised when a shard cannot be contacted."""
    pass


class PartialResultError(ShardError):
    """Raised when some shards did not answer; carries what the others returned."""

    def __init__(self, failed: List[int], results: Optional[List["ShardResult"]] = None):
        self.failed = list(failed)
        self.results = list(results or [])
        super().__init__(f"shards unreachable: {', '.join(str(s) for s in self.failed)}")


# ----------------------------------------------------------------------
# framing
# ----------------------------------------------------------------------

def encode_payload(message: Dict[str, Any]) -> bytes:
    return json.dumps(message, separators=(",", ":")).encode("utf-8")


def decode_payload(payload: bytes) -> Dict[str, Any]:
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"malformed frame: {e}") from e
    if not isinstance(message, dict) or not isinstance(message.get("type"), str):
        raise ProtocolError("malformed frame: expected a JSON object with a type")
    return message


def encode_frame(message: Dict[str, Any], max_frame: int = MAX_FRAME) -> bytes:
    payload = encode_payload(message)
    if len(payload) > max_frame:
        raise FrameTooLargeError(f"frame of {len(payload)} bytes exceeds {max_frame}")
    return FRAME_HEADER.pack(len(payload)) + payload


async def read_frame(reader: asyncio.StreamReader, max_frame: int = MAX_FRAME) -> Optional[bytes]:
    """Raw payload of the next frame, or None on a clean end of stream."""
    try:
        header = await reader.readexactly(FRAME_HEADER.size)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            return None
        raise ProtocolError("stream ended inside a frame header") from e
    (size,) = FRAME_HEADER.unpack(header)
    if size > max_frame:
        raise FrameTooLargeError(f"frame of {size} bytes exceeds {max_frame}")
    try:
        return await reader.readexactly(size)
    except asyncio.IncompleteReadError as e:
        raise ProtocolError(f"stream ended after {len(e.partial)} of {size} payload bytes") from e


async def write_frame(writer: asyncio.StreamWriter, message: Dict[str, Any], max_frame: int = MAX_FRAME):
    writer.write(encode_frame(message, max_frame))
    await writer.drain()


def ack_message() -> Dict[str, Any]:
    return {"type": MessageType.ACK.value}


def error_message(text: str) -> Dict[str, Any]:
    return {"type": MessageType.ERROR.value, "message": text}


# ----------------------------------------------------------------------
# payload types
# ----------------------------------------------------------------------

@dataclass
class ShardSpec:
    """Where a shard's text sits in the whole text."""
    shard_id: int
    global_offset: int
    length: int
    overlap: int = 0

    @property
    def core_len(self) -> int:
        """Characters owned by this shard (the overlap belongs to the next one)."""
        return self.length - self.overlap

    def to_global(self, local: int) -> int:
        return local + self.global_offset - 1

    def to_dict(self) -> Dict[str, int]:
        return {
            "shard_id": self.shard_id,
            "global_offset": self.global_offset,
            "length": self.length,
            "overlap": self.overlap,
        }


@dataclass
class QueryPlan:
    """Serialized grammar plus per-pattern metadata, built once and broadcast."""
    grammar: bytes
    roots: List[int]
    pattern_lens: List[int]
    mode: SearchMode = SearchMode.COUNT

    def to_message(self) -> Dict[str, Any]:
        return {
            "type": MessageType.LOAD_PLAN.value,
            "grammar": base64.b64encode(self.grammar).decode("ascii"),
            "roots": list(self.roots),
            "pattern_lens": list(self.pattern_lens),
            "mode": self.mode.value,
        }

    @classmethod
    def from_message(cls, message: Dict[str, Any]) -> "QueryPlan":
        try:
            grammar = base64.b64decode(message["grammar"], validate=True)
            roots = [int(r) for r in message["roots"]]
            lens = [int(n) for n in message["pattern_lens"]]
            mode = SearchMode(message.get("mode", SearchMode.COUNT.value))
        except (KeyError, TypeError, ValueError, binascii.Error) as e:
            raise ProtocolError(f"malformed plan: {e}") from e
        if len(roots) != len(lens):
            raise ProtocolError(f"plan has {len(roots)} roots but {len(lens)} pattern lengths")
        return cls(grammar, roots, lens, mode)

    def decode_grammar(self) -> Grammar:
        """The plan's grammar, with roots checked against the declared lengths."""
        try:
            grammar = deserialize_grammar(self.grammar)
        except GrammarFormatError as e:
            raise ProtocolError(f"plan grammar rejected: {e}") from e
        if grammar.roots != self.roots:
            raise ProtocolError("plan roots do not match the grammar's roots")
        for root, length in zip(self.roots, self.pattern_lens):
            if grammar.exp_len[root] != length:
                raise ProtocolError(f"root {root} expands to {grammar.exp_len[root]} symbols, plan says {length}")
        return grammar


@dataclass
class ShardResult:
    """One shard's answer: a count per pattern and, in locate mode, global starts."""
    shard_id: int
    counts: List[int] = field(default_factory=list)
    positions: Optional[List[List[int]]] = None

    def to_message(self) -> Dict[str, Any]:
        message: Dict[str, Any] = {"type": MessageType.RESULT.value, "counts": list(self.counts)}
        if self.positions is not None:
            message["positions"] = [list(p) for p in self.positions]
        return message

    @classmethod
    def from_message(cls, shard_id: int, message: Dict[str, Any]) -> "ShardResult":
        if message.get("type") == MessageType.ERROR.value:
            raise ProtocolError(f"shard {shard_id}: {message.get('message', 'unknown error')}")
        if message.get("type") != MessageType.RESULT.value:
            raise ProtocolError(f"shard {shard_id}: expected result, got {message.get('type')!r}")
        try:
            counts = [int(c) for c in message["counts"]]
            positions = message.get("positions")
            if positions is not None:
                positions = [[int(p) for p in group] for group in positions]
        except (KeyError, TypeError, ValueError) as e:
            raise ProtocolError(f"shard {shard_id}: malformed result: {e}") from e
        return cls(shard_id, counts, positions)

    def to_dict(self) -> Dict[str, Any]:
        data = self.to_message()
        data.pop("type")
        data["shard_id"] = self.shard_id
        return data
