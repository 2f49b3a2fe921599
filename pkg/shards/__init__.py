"""
Sharded search: one orchestrator preprocesses the patterns, every shard searches.
"""

from .orchestrator import (
    AggregatedResult,
    LoopbackClient,
    Orchestrator,
    TcpClient,
    loopback_cluster,
    merge_results,
    orchestrate,
    shard_text,
)
from .protocol import (
    FrameTooLargeError,
    MessageType,
    PartialResultError,
    ProtocolError,
    QueryPlan,
    SearchMode,
    ShardError,
    ShardResult,
    ShardSpec,
    ShardUnreachableError,
)
from .server import ShardServer, shard_serve

__all__ = [
    "AggregatedResult",
    "FrameTooLargeError",
    "LoopbackClient",
    "MessageType",
    "Orchestrator",
    "PartialResultError",
    "ProtocolError",
    "QueryPlan",
    "SearchMode",
    "ShardError",
    "ShardResult",
    "ShardServer",
    "ShardSpec",
    "ShardUnreachableError",
    "TcpClient",
    "loopback_cluster",
    "merge_results",
    "orchestrate",
    "shard_serve",
    "shard_text",
]
