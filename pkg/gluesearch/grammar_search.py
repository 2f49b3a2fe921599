"""
Grammar-driven pattern search.

Every rule reachable from the pattern roots gets its interval exactly once:
terminals by a one-symbol backward search, pairs by gluing their children's
intervals. Rules are visited level by level in height order, so a rule's
children are always resolved before it; rules of equal height never depend
on each other and can be resolved concurrently.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .fm_index import EMPTY, BwtIndex, Interval
from .glue import GlueStats, glue_with_stats
from .grammar import Grammar, Terminal

logger = logging.getLogger(__name__)


class IntervalMemo:
    """rule id -> (interval, expansion length)"""

    def __init__(self):
        self._entries: Dict[int, Tuple[Interval, int]] = {}

    def put(self, rule_id: int, interval: Interval, length: int):
        self._entries[rule_id] = (interval, length)

    def get(self, rule_id: int) -> Optional[Tuple[Interval, int]]:
        return self._entries.get(rule_id)

    def interval(self, rule_id: int) -> Interval:
        return self._entries[rule_id][0]

    def __contains__(self, rule_id: int) -> bool:
        return rule_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class LevelSchedule:
    """Reachable rule ids grouped by height, lowest level first."""
    levels: List[List[int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self) -> Iterator[List[int]]:
        return iter(self.levels)

    def sizes(self) -> List[int]:
        return [len(level) for level in self.levels]


@dataclass
class SearchStats:
    glue_calls: int = 0
    short_circuits: int = 0
    terminal_searches: int = 0
    level_sizes: List[int] = field(default_factory=list)
    glue: GlueStats = field(default_factory=GlueStats)

    def merge(self, other: "SearchStats"):
        self.glue_calls += other.glue_calls
        self.short_circuits += other.short_circuits
        self.terminal_searches += other.terminal_searches
        self.glue.merge(other.glue)

    def to_dict(self) -> Dict:
        return {
            "glue_calls": self.glue_calls,
            "short_circuits": self.short_circuits,
            "terminal_searches": self.terminal_searches,
            "level_sizes": list(self.level_sizes),
            "glue": self.glue.to_dict(),
        }


def level_schedule(grammar: Grammar, roots: Sequence[int]) -> LevelSchedule:
    """Group the rules reachable from roots by height; ids ascend within a level."""
    by_height: Dict[int, List[int]] = {}
    for rule_id in grammar.reachable(roots):
        by_height.setdefault(grammar.height[rule_id], []).append(rule_id)
    return LevelSchedule([by_height[h] for h in sorted(by_height)])


def _resolve(index: BwtIndex, grammar: Grammar, rule_id: int, memo: IntervalMemo, stats: SearchStats):
    rule = grammar.rules[rule_id]
    if isinstance(rule, Terminal):
        interval = index.backward_search(bytes([rule.symbol]))
        stats.terminal_searches += 1
    else:
        left, left_len = memo.get(rule.left)
        right = memo.interval(rule.right)
        if left.is_empty or right.is_empty:
            interval = EMPTY
            stats.short_circuits += 1
        else:
            interval, calls = glue_with_stats(index, left, left_len, right)
            stats.glue_calls += 1
            stats.glue.merge(calls)
    memo.put(rule_id, interval, grammar.exp_len[rule_id])


def _resolve_block(index: BwtIndex, grammar: Grammar, block: List[int], memo: IntervalMemo) -> SearchStats:
    stats = SearchStats()
    for rule_id in block:
        _resolve(index, grammar, rule_id, memo, stats)
    return stats


def multi_search(
    index: BwtIndex,
    grammar: Grammar,
    roots: Sequence[int],
    stats: Optional[SearchStats] = None,
) -> List[Interval]:
    """One interval per root, sharing a single memo across all of them."""
    stats = stats if stats is not None else SearchStats()
    schedule = level_schedule(grammar, roots)
    stats.level_sizes = schedule.sizes()

    memo = IntervalMemo()
    for level in schedule:
        for rule_id in level:
            _resolve(index, grammar, rule_id, memo, stats)

    logger.debug(f"multi_search: {len(roots)} roots, {len(memo)} rules, {stats.glue_calls} glues")
    return [memo.interval(root) for root in roots]


def search_grammar(index: BwtIndex, grammar: Grammar, root: int) -> Interval:
    """Interval of expand(root)."""
    return multi_search(index, grammar, [root])[0]


def partition(items: List[int], parts: int) -> List[List[int]]:
    """Split items into at most parts contiguous blocks of near-equal size."""
    parts = min(parts, len(items))
    if parts == 0:
        return []
    size, extra = divmod(len(items), parts)
    blocks = []
    start = 0
    for k in range(parts):
        end = start + size + (1 if k < extra else 0)
        blocks.append(items[start:end])
        start = end
    return blocks


async def search_grammar_parallel_async(
    index: BwtIndex,
    grammar: Grammar,
    roots: Sequence[int],
    workers: int,
    stats: Optional[SearchStats] = None,
) -> List[Interval]:
    """
    Same output as multi_search, with each level spread over worker threads.

    Levels run strictly in order; inside a level the rules are cut into
    contiguous blocks, one per worker.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    stats = stats if stats is not None else SearchStats()
    schedule = level_schedule(grammar, roots)
    stats.level_sizes = schedule.sizes()

    memo = IntervalMemo()
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="glue") as pool:
        for level in schedule:
            block_stats = await asyncio.gather(*(
                loop.run_in_executor(pool, _resolve_block, index, grammar, block, memo)
                for block in partition(level, workers)
            ))
            for partial in block_stats:
                stats.merge(partial)

    logger.debug(f"parallel search: {len(schedule)} levels on {workers} workers, {stats.glue_calls} glues")
    return [memo.interval(root) for root in roots]


def search_grammar_parallel(
    index: BwtIndex,
    grammar: Grammar,
    roots: Sequence[int],
    workers: int,
    stats: Optional[SearchStats] = None,
) -> List[Interval]:
    """Blocking wrapper around search_grammar_parallel_async."""
    return asyncio.run(search_grammar_parallel_async(index, grammar, roots, workers, stats))
