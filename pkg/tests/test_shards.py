"""
Sharded Search Tests

Tests for the shard protocol, server and orchestrator including:
- Frame encoding and decoding
- Text sharding
- Loopback clusters
- TCP shards, retries and partial results
"""

import asyncio
import inspect
import socket
import struct

import pytest

from gluesearch.core import MAX_FRAME, GlueSearchConfig, prepare_patterns
from gluesearch.fm_index import BwtIndex
from gluesearch.storage import serialize_grammar, serialized_roots
from shards.orchestrator import (
    LoopbackClient,
    Orchestrator,
    TcpClient,
    loopback_cluster,
    merge_results,
    orchestrate,
    shard_text,
)
from shards.protocol import (
    FrameTooLargeError,
    MessageType,
    PartialResultError,
    ProtocolError,
    QueryPlan,
    SearchMode,
    ShardResult,
    ShardSpec,
    ShardUnreachableError,
    decode_payload,
    encode_frame,
    read_frame,
    write_frame,
)
from shards.server import ShardServer, count_overlapping, shard_serve
from tools.oracle import oracle_occurrences

from .conftest import RANDOM_INSTANCES, mixed_patterns, random_instance, random_substrings, random_text


def plan_for(patterns, mode=SearchMode.COUNT) -> QueryPlan:
    prepared = prepare_patterns(patterns)
    return QueryPlan(
        serialize_grammar(prepared.grammar, prepared.roots),
        serialized_roots(prepared.grammar, prepared.roots),
        prepared.pattern_lens,
        mode,
    )


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class RejectingClient:
    """A shard that refuses every plan."""

    shard_id = 7

    async def request(self, message):
        if message["type"] == MessageType.LOAD_PLAN.value:
            return {"type": "error", "message": "grammar rejected"}
        return {"type": "result", "counts": [0]}

    async def close(self):
        pass


class PlanDroppingClient(LoopbackClient):
    """A loopback shard whose plan loads fail once drop_plans is set."""

    def __init__(self, server):
        super().__init__(server)
        self.drop_plans = False
        self.searches = 0

    async def request(self, message):
        if message["type"] == MessageType.LOAD_PLAN.value and self.drop_plans:
            raise ShardUnreachableError(f"shard {self.shard_id} dropped the plan")
        if message["type"] == MessageType.SEARCH.value:
            self.searches += 1
        return await super().request(message)


# =============================================================================
# Protocol Tests
# =============================================================================

class TestFraming:
    """Tests for length-prefixed JSON frames."""

    def test_encode_frame(self):
        frame = encode_frame({"type": "search"})
        (size,) = struct.unpack(">I", frame[:4])
        assert size == len(frame) - 4
        assert decode_payload(frame[4:]) == {"type": "search"}

    def test_frame_too_large(self):
        with pytest.raises(FrameTooLargeError):
            encode_frame({"type": "search", "pad": "x" * 100}, max_frame=50)

    def test_default_limit_matches_config(self):
        assert GlueSearchConfig().max_frame == MAX_FRAME
        for function in (encode_frame, read_frame, write_frame):
            assert inspect.signature(function).parameters["max_frame"].default == MAX_FRAME

    @pytest.mark.parametrize("payload", [b"not json", b"[1, 2]", b'{"kind": "search"}', b"\xff\xfe"])
    def test_decode_rejects_malformed(self, payload):
        with pytest.raises(ProtocolError):
            decode_payload(payload)

    @pytest.mark.asyncio
    async def test_read_frames_until_eof(self):
        reader = asyncio.StreamReader()
        reader.feed_data(encode_frame({"type": "ack"}) + encode_frame({"type": "search"}))
        reader.feed_eof()
        assert decode_payload(await read_frame(reader)) == {"type": "ack"}
        assert decode_payload(await read_frame(reader)) == {"type": "search"}
        assert await read_frame(reader) is None

    @pytest.mark.asyncio
    async def test_read_truncated_frame(self):
        reader = asyncio.StreamReader()
        reader.feed_data(encode_frame({"type": "ack"})[:-2])
        reader.feed_eof()
        with pytest.raises(ProtocolError):
            await read_frame(reader)

    @pytest.mark.asyncio
    async def test_read_oversized_frame(self):
        reader = asyncio.StreamReader()
        reader.feed_data(struct.pack(">I", 1000))
        with pytest.raises(FrameTooLargeError):
            await read_frame(reader, max_frame=100)


class TestMessages:
    """Tests for plan and result messages."""

    def test_plan_round_trip(self):
        plan = plan_for(["i", "ip"], SearchMode.LOCATE)
        decoded = QueryPlan.from_message(plan.to_message())
        assert decoded == plan
        grammar = decoded.decode_grammar()
        assert [grammar.expand(r) for r in decoded.roots] == [b"i", b"ip"]

    def test_plan_missing_field(self):
        message = plan_for(["i"]).to_message()
        del message["roots"]
        with pytest.raises(ProtocolError):
            QueryPlan.from_message(message)

    def test_plan_length_mismatch(self):
        message = plan_for(["i", "p"]).to_message()
        message["pattern_lens"] = [1]
        with pytest.raises(ProtocolError):
            QueryPlan.from_message(message)

    def test_plan_wrong_lengths_rejected(self):
        plan = plan_for(["ip"])
        plan.pattern_lens = [3]
        with pytest.raises(ProtocolError):
            plan.decode_grammar()

    def test_result_round_trip(self):
        result = ShardResult(2, [1, 0], [[5], []])
        assert ShardResult.from_message(2, result.to_message()) == result
        assert result.to_dict() == {"shard_id": 2, "counts": [1, 0], "positions": [[5], []]}

    def test_error_reply_raises(self):
        with pytest.raises(ProtocolError, match="shard 3"):
            ShardResult.from_message(3, {"type": "error", "message": "no plan loaded"})

    def test_partial_result_error(self):
        error = PartialResultError([1, 4], [ShardResult(0, [2])])
        assert error.failed == [1, 4]
        assert error.results[0].counts == [2]
        assert "1, 4" in str(error)


# =============================================================================
# Sharding Tests
# =============================================================================

class TestShardText:
    """Tests for cutting a text into overlapping shards."""

    def test_single_shard(self):
        [(spec, piece)] = shard_text("mississippi", 1, 0)
        assert piece == b"mississippi"
        assert spec == ShardSpec(0, 1, 11, 0)

    def test_two_shards_with_overlap(self):
        (first, a), (second, b) = shard_text("mississippi", 2, 1)
        assert (a, first.global_offset, first.overlap) == (b"mississ", 1, 1)
        assert (b, second.global_offset, second.overlap) == (b"sippi", 7, 0)
        assert first.core_len == 6

    def test_overlap_clipped_at_text_end(self):
        (first, a), (second, b) = shard_text("mississippi", 2, 10)
        assert a == b"mississippi"
        assert first.overlap == 5
        assert b == b"sippi"

    def test_reassembly(self, rng):
        for _ in range(10):
            text = random_text(rng, rng.randint(5, 200)).encode()
            q = rng.randint(1, 5)
            overlap = rng.randint(0, 4)
            shards = shard_text(text, q, overlap)
            assert b"".join(piece[:spec.core_len] for spec, piece in shards) == text
            for spec, piece in shards:
                assert text[spec.global_offset - 1:spec.global_offset - 1 + spec.length] == piece

    @pytest.mark.parametrize("q,overlap", [(0, 0), (12, 0), (2, 11), (2, -1)])
    def test_bad_arguments(self, q, overlap):
        with pytest.raises(ValueError):
            shard_text("mississippi", q, overlap)

    def test_to_global(self):
        assert ShardSpec(1, 7, 5).to_global(2) == 8


# =============================================================================
# Server Tests
# =============================================================================

class TestShardServer:
    """Tests for ShardServer request handling."""

    def test_count_overlapping(self):
        assert count_overlapping(b"aaaa", b"aa") == 3
        assert count_overlapping(b"sippi", b"i") == 2
        assert count_overlapping(b"abc", b"x") == 0

    @pytest.mark.asyncio
    async def test_load_plan_then_locate(self):
        _, (spec, piece) = shard_text("mississippi", 2, 1)
        client = LoopbackClient(ShardServer(BwtIndex.build(piece, sample_rate=2), spec))

        reply = await client.request(plan_for(["ip"], SearchMode.LOCATE).to_message())
        assert reply == {"type": "ack"}
        reply = await client.request({"type": "search"})
        assert reply == {"type": "result", "counts": [1], "positions": [[8]]}

    @pytest.mark.asyncio
    async def test_search_before_plan(self, mississippi_index):
        client = LoopbackClient(ShardServer(mississippi_index))
        reply = await client.request({"type": "search"})
        assert reply == {"type": "error", "message": "no plan loaded"}

    @pytest.mark.asyncio
    async def test_malformed_frame(self, mississippi_index):
        client = LoopbackClient(ShardServer(mississippi_index))
        reply = await client.send_raw(b"{broken")
        assert reply["type"] == "error"

    @pytest.mark.asyncio
    async def test_unknown_message_type(self, mississippi_index):
        client = LoopbackClient(ShardServer(mississippi_index))
        reply = await client.request({"type": "dance"})
        assert reply["type"] == "error"
        assert "dance" in reply["message"]

    @pytest.mark.asyncio
    async def test_bad_plan_keeps_old_plan(self, mississippi_index):
        client = LoopbackClient(ShardServer(mississippi_index))
        await client.request(plan_for(["s"]).to_message())

        broken = plan_for(["ip"]).to_message()
        broken["grammar"] = "!!!"
        assert (await client.request(broken))["type"] == "error"
        assert (await client.request({"type": "search"}))["counts"] == [4]

    @pytest.mark.asyncio
    async def test_shutdown_sets_event(self, mississippi_index):
        server = ShardServer(mississippi_index)
        reply = await LoopbackClient(server).request({"type": "shutdown"})
        assert reply == {"type": "ack"}
        assert server.shutdown_event.is_set()
        assert server.requests_served == 1

    def test_spec_must_fit_index(self, mississippi_index):
        with pytest.raises(ValueError):
            ShardServer(mississippi_index, ShardSpec(0, 1, 5))
        with pytest.raises(ValueError):
            ShardServer(mississippi_index, ShardSpec(0, 1, 11, 11))


# =============================================================================
# Orchestrator Tests
# =============================================================================

class TestLoopbackCluster:
    """Tests for in-process clusters."""

    @pytest.mark.asyncio
    async def test_counts_with_overlap(self):
        clients = loopback_cluster("mississippi", 2, 10, GlueSearchConfig(sample_rate=4))
        aggregated = await orchestrate(["i", "p", "ip"], clients)
        assert aggregated.counts == [4, 2, 1]
        assert aggregated.mode == SearchMode.COUNT
        assert len(aggregated.shard_results) == 2

    @pytest.mark.asyncio
    async def test_single_shard_matches_local_search(self, random_corpus):
        text, patterns = random_corpus
        clients = loopback_cluster(text, 1, 0, GlueSearchConfig(sample_rate=8))
        aggregated = await orchestrate(patterns, clients, SearchMode.LOCATE)
        assert aggregated.positions == [oracle_occurrences(text, p) for p in patterns]

    @pytest.mark.asyncio
    @pytest.mark.parametrize("q", [2, 3, 5])
    async def test_counts_match_oracle(self, rng, q):
        text = random_text(rng, 2000)
        patterns = random_substrings(rng, text, 20, max_len=10)
        overlap = max(len(p) for p in patterns) - 1
        clients = loopback_cluster(text, q, overlap, GlueSearchConfig(sample_rate=16, workers=2))
        aggregated = await orchestrate(patterns, clients)
        assert aggregated.counts == [len(oracle_occurrences(text, p)) for p in patterns]

    @pytest.mark.asyncio
    @pytest.mark.parametrize("q", [2, 4])
    async def test_positions_match_oracle(self, rng, q):
        text = random_text(rng, 800)
        patterns = random_substrings(rng, text, 15, max_len=6)
        clients = loopback_cluster(text, q, 5, GlueSearchConfig(sample_rate=8))
        aggregated = await orchestrate(patterns, clients, SearchMode.LOCATE)
        expected = [oracle_occurrences(text, p) for p in patterns]
        assert aggregated.positions == expected
        assert aggregated.counts == [len(p) for p in expected]

    @pytest.mark.asyncio
    async def test_random_instances_match_oracle(self, rng):
        for k in range(RANDOM_INSTANCES):
            text, alphabet = random_instance(rng, max_len=600)
            patterns = mixed_patterns(rng, text, alphabet, 6)
            q = rng.choice([1, 2, 3, 5])
            overlap = max(len(p) for p in patterns) - 1
            mode = SearchMode.LOCATE if k % 2 else SearchMode.COUNT
            config = GlueSearchConfig(sample_rate=rng.choice([1, 8, 32]), workers=rng.choice([1, 2, 4, 8]))

            aggregated = await orchestrate(patterns, loopback_cluster(text, q, overlap, config), mode)
            expected = [oracle_occurrences(text, p) for p in patterns]
            assert aggregated.counts == [len(e) for e in expected]
            if mode == SearchMode.LOCATE:
                assert aggregated.positions == expected

    @pytest.mark.asyncio
    async def test_plan_built_once(self):
        orchestrator = Orchestrator(loopback_cluster("mississippi", 3, 3, GlueSearchConfig(sample_rate=4)))
        await orchestrator.run(["ss", "i"])
        assert orchestrator.plans_serialized == 1

    @pytest.mark.asyncio
    async def test_rejected_plan(self):
        clients = loopback_cluster("mississippi", 1, 0) + [RejectingClient()]
        with pytest.raises(ProtocolError, match="shard 7"):
            await orchestrate(["i"], clients)

    @pytest.mark.asyncio
    async def test_shard_missing_plan_is_not_searched(self):
        config = GlueSearchConfig(sample_rate=4)
        healthy, flaky = loopback_cluster("mississippi", 2, 10, config)
        flaky = PlanDroppingClient(flaky.server)
        orchestrator = Orchestrator([healthy, flaky])
        assert (await orchestrator.run(["ss"])).counts == [2]

        flaky.drop_plans = True
        with pytest.raises(PartialResultError) as info:
            await orchestrator.run(["i", "p", "ip"])
        assert info.value.failed == [1]
        assert [r.shard_id for r in info.value.results] == [0]
        assert info.value.results[0].counts == [2, 0, 0]
        assert flaky.searches == 1

    @pytest.mark.asyncio
    async def test_first_plan_dropped_reports_partial(self):
        healthy, flaky = loopback_cluster("mississippi", 2, 10, GlueSearchConfig(sample_rate=4))
        flaky = PlanDroppingClient(flaky.server)
        flaky.drop_plans = True
        with pytest.raises(PartialResultError) as info:
            await orchestrate(["ss"], [healthy, flaky])
        assert info.value.failed == [1]
        assert flaky.searches == 0

    def test_merge_results(self):
        results = [ShardResult(1, [1], [[9]]), ShardResult(0, [2], [[2, 9]])]
        merged = merge_results([b"i"], SearchMode.LOCATE, results)
        assert merged.positions == [[2, 9]]
        assert merged.counts == [2]
        assert merged.to_dict()["results"] == [{"pattern": "i", "count": 2, "positions": [2, 9]}]

    def test_to_json(self):
        merged = merge_results([b"i"], SearchMode.COUNT, [ShardResult(0, [4])])
        assert merged.to_json() == '{"mode": "count", "shards": 1, "results": [{"pattern": "i", "count": 4}]}'


# =============================================================================
# TCP Tests
# =============================================================================

@pytest.mark.integration
class TestTcpShards:
    """Tests for shards served over local TCP."""

    @pytest.mark.asyncio
    async def test_query_and_shutdown(self, fast_config):
        servers = []
        for spec, piece in shard_text("mississippi", 2, 10):
            server = ShardServer(BwtIndex.build(piece, sample_rate=4), spec, fast_config)
            port = await server.start("127.0.0.1", 0)
            servers.append((server, port))
        waiters = [asyncio.create_task(server.wait_closed()) for server, _ in servers]

        clients = [TcpClient(k, "127.0.0.1", port, fast_config) for k, (_, port) in enumerate(servers)]
        orchestrator = Orchestrator(clients)
        try:
            aggregated = await orchestrator.run(["i", "p", "ip"], SearchMode.LOCATE)
            await orchestrator.shutdown()
        finally:
            await orchestrator.close()

        assert aggregated.counts == [4, 2, 1]
        assert aggregated.positions == [[2, 5, 8, 11], [9, 10], [8]]
        await asyncio.wait_for(asyncio.gather(*waiters), 5)

    @pytest.mark.asyncio
    async def test_unreachable_shard(self):
        config = GlueSearchConfig(timeout=1.0, max_retries=2, retry_delay=0.01)
        with pytest.raises(ShardUnreachableError):
            await TcpClient(3, "127.0.0.1", free_port(), config).request({"type": "search"})

    @pytest.mark.asyncio
    async def test_partial_result(self, fast_config):
        config = GlueSearchConfig(timeout=1.0, max_retries=1, retry_delay=0.0)
        clients = loopback_cluster("mississippi", 1, 0, fast_config)
        clients.append(TcpClient(1, "127.0.0.1", free_port(), config))

        with pytest.raises(PartialResultError) as info:
            await orchestrate(["ss"], clients)
        assert info.value.failed == [1]
        assert info.value.results[0].counts == [2]

    @pytest.mark.asyncio
    async def test_malformed_frame_keeps_connection(self, mississippi_index, fast_config):
        server = ShardServer(mississippi_index, config=fast_config)
        port = await server.start("127.0.0.1", 0)
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", port)
            writer.write(struct.pack(">I", 5) + b"oops!")
            await writer.drain()
            assert decode_payload(await read_frame(reader))["type"] == "error"

            writer.write(encode_frame({"type": "search"}))
            await writer.drain()
            assert decode_payload(await read_frame(reader))["message"] == "no plan loaded"
            writer.close()
            await writer.wait_closed()
        finally:
            await server.stop()

    @pytest.mark.asyncio
    async def test_oversized_frame_closes_connection(self, mississippi_index):
        server = ShardServer(mississippi_index, config=GlueSearchConfig(max_frame=64))
        port = await server.start("127.0.0.1", 0)
        try:
            reader, writer = await asyncio.open_connection("127.0.0.1", port)
            writer.write(struct.pack(">I", 1000))
            await writer.drain()
            assert await asyncio.wait_for(reader.read(), 5) == b""
            writer.close()
        finally:
            await server.stop()

    @pytest.mark.asyncio
    async def test_tcp_client_context_manager(self, mississippi_index, fast_config):
        server = ShardServer(mississippi_index, config=fast_config)
        port = await server.start("127.0.0.1", 0)
        try:
            async with TcpClient(0, "127.0.0.1", port, fast_config) as client:
                assert await client.request(plan_for(["ss"]).to_message()) == {"type": "ack"}
                assert (await client.request({"type": "search"}))["counts"] == [2]
        finally:
            await server.stop()

    @pytest.mark.network
    @pytest.mark.asyncio
    async def test_shard_serve_exit_code(self, mississippi_index):
        config = GlueSearchConfig(timeout=2.0, max_retries=10, retry_delay=0.05)
        port = free_port()
        task = asyncio.create_task(shard_serve(mississippi_index, "127.0.0.1", port, config=config))

        async with TcpClient(0, "127.0.0.1", port, config) as client:
            assert await client.request({"type": "shutdown"}) == {"type": "ack"}
        assert await asyncio.wait_for(task, 5) == 0
