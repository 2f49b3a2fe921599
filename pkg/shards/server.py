"""
Shard server: one index, one cached query plan, framed requests.

The same ShardServer answers both the TCP listener and the in-process
loopback transport; handle_frame is the only entry point for a request.
"""

import asyncio
import logging
from typing import Any, Dict, List, Optional

from gluesearch.core import GlueSearchConfig
from gluesearch.errors import GlueSearchError
from gluesearch.fm_index import BwtIndex
from gluesearch.grammar import Grammar
from gluesearch.grammar_search import search_grammar_parallel_async

from .protocol import (
    FrameTooLargeError,
    MessageType,
    ProtocolError,
    QueryPlan,
    SearchMode,
    ShardResult,
    ShardSpec,
    ack_message,
    decode_payload,
    error_message,
    read_frame,
    write_frame,
)

logger = logging.getLogger(__name__)


def count_overlapping(text: bytes, pattern: bytes) -> int:
    """Occurrences of pattern in text, overlapping ones included."""
    total = 0
    start = text.find(pattern)
    while start >= 0:
        total += 1
        start = text.find(pattern, start + 1)
    return total


class ShardServer:
    """
    Serves searches over one shard's index.

    Example:
        >>> server = ShardServer(index, ShardSpec(0, 1, index.n))
        >>> port = await server.start("127.0.0.1", 0)
        >>> await server.wait_closed()
    """

    def __init__(
        self,
        index: BwtIndex,
        spec: Optional[ShardSpec] = None,
        config: Optional[GlueSearchConfig] = None,
    ):
        self.index = index
        self.spec = spec or ShardSpec(0, 1, index.n)
        self.config = config or GlueSearchConfig()
        if self.spec.length != index.n or not 0 <= self.spec.overlap < max(index.n, 1):
            raise ValueError(f"shard spec {self.spec.to_dict()} does not fit an index of length {index.n}")

        self.plan: Optional[QueryPlan] = None
        self._grammar: Optional[Grammar] = None
        self._patterns: List[bytes] = []
        # occurrences starting here are reported by the next shard
        self._tail = index.extract(self.spec.core_len + 1, index.n) if self.spec.overlap else b""

        self._lock = asyncio.Lock()
        self._server: Optional[asyncio.AbstractServer] = None
        self.shutdown_event = asyncio.Event()
        self.requests_served = 0

    # ------------------------------------------------------------------
    # request handling
    # ------------------------------------------------------------------

    async def handle_frame(self, payload: bytes) -> Dict[str, Any]:
        """Reply to one raw frame payload; failures become error replies."""
        try:
            message = decode_payload(payload)
        except ProtocolError as e:
            logger.warning(f"⚠️ Shard {self.spec.shard_id}: {e}")
            return error_message(str(e))

        handlers = {
            MessageType.LOAD_PLAN.value: self._load_plan,
            MessageType.SEARCH.value: self._search,
            MessageType.SHUTDOWN.value: self._shutdown,
        }
        handler = handlers.get(message["type"])
        if handler is None:
            return error_message(f"unknown message type {message['type']!r}")

        async with self._lock:
            self.requests_served += 1
            try:
                return await handler(message)
            except GlueSearchError as e:
                logger.warning(f"⚠️ Shard {self.spec.shard_id} rejected {message['type']}: {e}")
                return error_message(str(e))

    async def _load_plan(self, message: Dict[str, Any]) -> Dict[str, Any]:
        plan = QueryPlan.from_message(message)
        grammar = plan.decode_grammar()
        self.plan = plan
        self._grammar = grammar
        self._patterns = [grammar.expand(root) for root in plan.roots] if self._tail else []
        logger.info(
            f"Shard {self.spec.shard_id}: plan loaded ({len(plan.roots)} patterns, "
            f"{len(grammar)} rules, mode={plan.mode.value})"
        )
        return ack_message()

    async def _search(self, message: Dict[str, Any]) -> Dict[str, Any]:
        if self.plan is None:
            return error_message("no plan loaded")
        intervals = await search_grammar_parallel_async(
            self.index, self._grammar, self.plan.roots, self.config.workers
        )

        result = ShardResult(self.spec.shard_id)
        if self.plan.mode == SearchMode.LOCATE:
            result.positions = []
            for interval, length in zip(intervals, self.plan.pattern_lens):
                starts = self.index.locate_all(interval, length)
                owned = [self.spec.to_global(s) for s in starts if s <= self.spec.core_len]
                result.positions.append(owned)
                result.counts.append(len(owned))
        else:
            for k, interval in enumerate(intervals):
                count = len(interval)
                if self._tail and count:
                    count -= count_overlapping(self._tail, self._patterns[k])
                result.counts.append(count)

        logger.debug(f"Shard {self.spec.shard_id}: counts {result.counts}")
        return result.to_message()

    async def _shutdown(self, message: Dict[str, Any]) -> Dict[str, Any]:
        logger.info(f"🛑 Shard {self.spec.shard_id}: shutdown requested")
        self.shutdown_event.set()
        return ack_message()

    # ------------------------------------------------------------------
    # TCP transport
    # ------------------------------------------------------------------

    async def _handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        peer = writer.get_extra_info("peername")
        try:
            while True:
                try:
                    payload = await read_frame(reader, self.config.max_frame)
                except FrameTooLargeError as e:
                    logger.warning(f"⚠️ Closing connection from {peer}: {e}")
                    break
                if payload is None:
                    break
                reply = await self.handle_frame(payload)
                await write_frame(writer, reply, self.config.max_frame)
                if self.shutdown_event.is_set():
                    break
        except (ConnectionError, ProtocolError) as e:
            logger.warning(f"⚠️ Connection from {peer} dropped: {e}")
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except ConnectionError:
                pass

    async def start(self, host: Optional[str] = None, port: Optional[int] = None) -> int:
        """Start listening; returns the bound port (pass 0 for an ephemeral one)."""
        host = host if host is not None else self.config.host
        port = port if port is not None else self.config.port
        self._server = await asyncio.start_server(self._handle_connection, host, port)
        bound = self._server.sockets[0].getsockname()[1]
        logger.info(f"✅ Shard {self.spec.shard_id} listening on {host}:{bound} (n={self.index.n})")
        return bound

    async def wait_closed(self):
        """Run until a shutdown message arrives, then stop listening."""
        await self.shutdown_event.wait()
        await self.stop()

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
            logger.info(f"✅ Shard {self.spec.shard_id} stopped")


async def shard_serve(
    index: BwtIndex,
    host: str,
    port: int,
    spec: Optional[ShardSpec] = None,
    config: Optional[GlueSearchConfig] = None,
) -> int:
    """Serve index on host:port until shut down; returns the exit code."""
    server = ShardServer(index, spec, config)
    await server.start(host, port)
    try:
        await server.wait_closed()
    finally:
        await server.stop()
    return 0
