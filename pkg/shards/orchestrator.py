"""
Orchestrator: preprocess patterns once, broadcast the plan, merge shard answers.
"""

import asyncio
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from gluesearch.core import GlueSearchConfig, prepare_patterns
from gluesearch.fm_index import BwtIndex, Symbols, as_symbols
from gluesearch.storage import serialize_grammar, serialized_roots

from .protocol import (
    MessageType,
    PartialResultError,
    ProtocolError,
    QueryPlan,
    SearchMode,
    ShardResult,
    ShardSpec,
    ShardUnreachableError,
    decode_payload,
    encode_payload,
    read_frame,
    write_frame,
)
from .server import ShardServer

logger = logging.getLogger(__name__)


def shard_text(text: Symbols, q: int, overlap: int) -> List[Tuple[ShardSpec, bytes]]:
    """
    Cut text into q near-equal pieces, each extended right by overlap symbols.

    The first n % q pieces are one symbol longer. Extensions are clipped at
    the end of the text, so the last shard never overlaps anything.
    """
    data = as_symbols(text)
    n = len(data)
    if q < 1 or q > n:
        raise ValueError(f"cannot cut {n} symbols into {q} shards")
    if not 0 <= overlap < n:
        raise ValueError(f"overlap must be in 0..{n - 1}, got {overlap}")

    size, extra = divmod(n, q)
    shards = []
    start = 0
    for shard_id in range(q):
        end = start + size + (1 if shard_id < extra else 0)
        stop = min(end + overlap, n)
        spec = ShardSpec(shard_id, start + 1, stop - start, stop - end)
        shards.append((spec, data[start:stop]))
        start = end
    return shards


# ----------------------------------------------------------------------
# transports
# ----------------------------------------------------------------------

class LoopbackClient:
    """Talks to an in-process ShardServer through the same JSON payloads as TCP."""

    def __init__(self, server: ShardServer):
        self.server = server
        self.shard_id = server.spec.shard_id

    async def request(self, message: Dict[str, Any]) -> Dict[str, Any]:
        reply = await self.server.handle_frame(encode_payload(message))
        return decode_payload(encode_payload(reply))

    async def send_raw(self, payload: bytes) -> Dict[str, Any]:
        return await self.server.handle_frame(payload)

    async def close(self):
        pass


class TcpClient:
    """
    Framed connection to a running shard.

    Connecting is retried with exponential backoff; each request is bounded
    by the configured timeout.
    """

    def __init__(self, shard_id: int, host: str, port: int, config: Optional[GlueSearchConfig] = None):
        self.shard_id = shard_id
        self.host = host
        self.port = port
        self.config = config or GlueSearchConfig()
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None

    async def __aenter__(self):
        await self.connect()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()

    async def connect(self):
        if self._writer is not None:
            return
        for attempt in range(self.config.max_retries):
            try:
                self._reader, self._writer = await asyncio.wait_for(
                    asyncio.open_connection(self.host, self.port), self.config.timeout
                )
                logger.debug(f"Connected to shard {self.shard_id} at {self.host}:{self.port}")
                return
            except asyncio.TimeoutError:
                logger.warning(f"Shard {self.shard_id} connect timeout (attempt {attempt + 1})")
            except OSError as e:
                logger.warning(f"Shard {self.shard_id} connect error (attempt {attempt + 1}): {e}")

            if attempt < self.config.max_retries - 1:
                await asyncio.sleep(self.config.retry_delay * (2 ** attempt))

        raise ShardUnreachableError(
            f"shard {self.shard_id} at {self.host}:{self.port} unreachable after {self.config.max_retries} attempts"
        )

    async def request(self, message: Dict[str, Any]) -> Dict[str, Any]:
        await self.connect()
        try:
            await write_frame(self._writer, message, self.config.max_frame)
            payload = await asyncio.wait_for(read_frame(self._reader, self.config.max_frame), self.config.timeout)
        except (asyncio.TimeoutError, OSError) as e:
            await self.close()
            raise ShardUnreachableError(f"shard {self.shard_id}: {str(e) or 'request timed out'}") from e
        if payload is None:
            await self.close()
            raise ShardUnreachableError(f"shard {self.shard_id} closed the connection")
        return decode_payload(payload)

    async def close(self):
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except ConnectionError:
                pass
            self._writer = None
            self._reader = None


# ----------------------------------------------------------------------
# orchestration
# ----------------------------------------------------------------------

@dataclass
class AggregatedResult:
    """Per-pattern totals merged over all shards."""
    patterns: List[bytes]
    mode: SearchMode
    counts: List[int] = field(default_factory=list)
    positions: Optional[List[List[int]]] = None
    shard_results: List[ShardResult] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        records = []
        for k, pattern in enumerate(self.patterns):
            record: Dict[str, Any] = {
                "pattern": pattern.decode("utf-8", errors="replace"),
                "count": self.counts[k],
            }
            if self.positions is not None:
                record["positions"] = self.positions[k]
            records.append(record)
        return {
            "mode": self.mode.value,
            "shards": len(self.shard_results),
            "results": records,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def merge_results(
    patterns: List[bytes], mode: SearchMode, results: Sequence[ShardResult]
) -> AggregatedResult:
    """Sum counts, or union positions by global start, in shard id order."""
    results = sorted(results, key=lambda r: r.shard_id)
    aggregated = AggregatedResult(patterns, mode, shard_results=list(results))
    if mode == SearchMode.LOCATE:
        aggregated.positions = []
        for k in range(len(patterns)):
            merged = sorted({p for r in results if r.positions for p in r.positions[k]})
            aggregated.positions.append(merged)
            aggregated.counts.append(len(merged))
    else:
        aggregated.counts = [sum(r.counts[k] for r in results) for k in range(len(patterns))]
    return aggregated


class Orchestrator:
    """
    Drives a set of shard clients.

    The grammar for the patterns is built and serialized once per query,
    however many shards there are; plans_serialized counts those builds.
    """

    def __init__(self, clients: Sequence[Any]):
        self.clients = list(clients)
        self.plans_serialized = 0

    def build_plan(self, patterns: Sequence[Symbols], mode: SearchMode) -> Tuple[List[bytes], QueryPlan]:
        prepared = prepare_patterns(patterns)
        payload = serialize_grammar(prepared.grammar, prepared.roots)
        self.plans_serialized += 1
        roots = serialized_roots(prepared.grammar, prepared.roots)
        plan = QueryPlan(payload, roots, prepared.pattern_lens, mode)
        logger.info(f"Plan built: {len(prepared.patterns)} patterns, {len(payload)} bytes")
        return prepared.patterns, plan

    async def _broadcast(
        self, message: Dict[str, Any], clients: Optional[Sequence[Any]] = None
    ) -> Tuple[List[Tuple[Any, Dict[str, Any]]], List[int]]:
        clients = self.clients if clients is None else list(clients)
        replies = await asyncio.gather(
            *(client.request(message) for client in clients), return_exceptions=True
        )
        answered, failed = [], []
        for client, reply in zip(clients, replies):
            if isinstance(reply, ShardUnreachableError):
                logger.warning(f"⚠️ {reply}")
                failed.append(client.shard_id)
            elif isinstance(reply, BaseException):
                raise reply
            else:
                answered.append((client, reply))
        return answered, failed

    async def run(self, patterns: Sequence[Symbols], mode: SearchMode = SearchMode.COUNT) -> AggregatedResult:
        encoded, plan = self.build_plan(patterns, mode)

        answered, failed = await self._broadcast(plan.to_message())
        for client, reply in answered:
            if reply.get("type") != MessageType.ACK.value:
                raise ProtocolError(f"shard {client.shard_id} rejected the plan: {reply.get('message', reply)}")

        # only shards holding this plan are searched
        loaded = [client for client, _ in answered]
        answered, search_failed = await self._broadcast({"type": MessageType.SEARCH.value}, loaded)
        failed = sorted(set(failed) | set(search_failed))
        results = [ShardResult.from_message(client.shard_id, reply) for client, reply in answered]
        if failed:
            raise PartialResultError(failed, results)

        aggregated = merge_results(encoded, mode, results)
        logger.info(f"✅ Query over {len(results)} shards: counts {aggregated.counts}")
        return aggregated

    async def shutdown(self):
        """Ask every reachable shard to stop."""
        await self._broadcast({"type": MessageType.SHUTDOWN.value})

    async def close(self):
        for client in self.clients:
            await client.close()


def loopback_cluster(
    text: Symbols, q: int, overlap: int, config: Optional[GlueSearchConfig] = None
) -> List[LoopbackClient]:
    """Index each shard of text in-process and return a client per shard."""
    config = config or GlueSearchConfig()
    clients = []
    for spec, piece in shard_text(text, q, overlap):
        index = BwtIndex.build(piece, sample_rate=config.sample_rate, rank_step=config.rank_step)
        clients.append(LoopbackClient(ShardServer(index, spec, config)))
    return clients


async def orchestrate(
    patterns: Sequence[Symbols],
    clients: Sequence[Any],
    mode: SearchMode = SearchMode.COUNT,
) -> AggregatedResult:
    """Preprocess patterns once, search every shard and merge the answers."""
    orchestrator = Orchestrator(clients)
    try:
        return await orchestrator.run(patterns, mode)
    finally:
        await orchestrator.close()
