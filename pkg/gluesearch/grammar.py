"""
AVL-balanced straight-line programs built from LZ77 parses.

Rules are never mutated: split, join and extract only add rules, so every
root handed out earlier keeps expanding to the same string. Rule ids are
assigned in creation order, which is also a topological order (children
always have smaller ids than their parents).
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import GrammarError
from .lz77 import Literal, ParseResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Terminal:
    symbol: int


@dataclass(frozen=True)
class Pair:
    left: int
    right: int


Rule = Union[Terminal, Pair]


class Grammar:
    """
    A persistent AVL-grammar.

    exp_len[i] and height[i] describe rule i; terminals have height 0 and a
    pair sits one above its taller child. Identical pairs and terminals are
    shared, so a rule id names one distinct non-terminal.
    """

    def __init__(self):
        self.rules: List[Rule] = []
        self.exp_len: List[int] = []
        self.height: List[int] = []
        self.roots: List[int] = []
        self._pairs: Dict[Tuple[int, int], int] = {}
        self._terminals: Dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.rules)

    @property
    def root(self) -> Optional[int]:
        """The root when the grammar has exactly one, else None."""
        return self.roots[0] if len(self.roots) == 1 else None

    # ------------------------------------------------------------------
    # rule creation
    # ------------------------------------------------------------------

    def terminal(self, symbol: int) -> int:
        if not 0 <= symbol <= 255:
            raise GrammarError(f"terminal symbol {symbol} is not a byte")
        existing = self._terminals.get(symbol)
        if existing is not None:
            return existing
        rule_id = self._append(Terminal(symbol), 1, 0)
        self._terminals[symbol] = rule_id
        return rule_id

    def pair(self, left: int, right: int) -> int:
        """Rule expanding to left's expansion followed by right's; no rebalancing."""
        self._check(left)
        self._check(right)
        existing = self._pairs.get((left, right))
        if existing is not None:
            return existing
        rule_id = self._append(
            Pair(left, right),
            self.exp_len[left] + self.exp_len[right],
            1 + max(self.height[left], self.height[right]),
        )
        self._pairs[(left, right)] = rule_id
        return rule_id

    def _append(self, rule: Rule, length: int, height: int) -> int:
        self.rules.append(rule)
        self.exp_len.append(length)
        self.height.append(height)
        return len(self.rules) - 1

    def _check(self, rule_id: int):
        if not isinstance(rule_id, int) or not 0 <= rule_id < len(self.rules):
            raise GrammarError(f"unknown rule id {rule_id!r}")

    # ------------------------------------------------------------------
    # AVL concatenation
    # ------------------------------------------------------------------

    def join(self, a: int, b: int) -> int:
        """Root expanding to expand(a) + expand(b), AVL balance preserved."""
        self._check(a)
        self._check(b)
        ha, hb = self.height[a], self.height[b]
        if abs(ha - hb) <= 1:
            return self.pair(a, b)
        if ha > hb:
            return self._join_right(a, b)
        return self._join_left(a, b)

    def _join_right(self, a: int, b: int) -> int:
        # a is at least two levels taller than b: hang b off a's right spine
        rule = self.rules[a]
        if self.height[rule.right] <= self.height[b] + 1:
            merged = self.pair(rule.right, b)
        else:
            merged = self._join_right(rule.right, b)
        return self._rebalance_right(rule.left, merged)

    def _join_left(self, a: int, b: int) -> int:
        rule = self.rules[b]
        if self.height[rule.left] <= self.height[a] + 1:
            merged = self.pair(a, rule.left)
        else:
            merged = self._join_left(a, rule.left)
        return self._rebalance_left(merged, rule.right)

    def _rebalance_right(self, left: int, right: int) -> int:
        """pair(left, right) where right may be two levels taller."""
        if self.height[right] <= self.height[left] + 1:
            return self.pair(left, right)
        inner, outer = self.rules[right].left, self.rules[right].right
        if self.height[outer] >= self.height[inner]:
            return self.pair(self.pair(left, inner), outer)
        grand = self.rules[inner]
        return self.pair(self.pair(left, grand.left), self.pair(grand.right, outer))

    def _rebalance_left(self, left: int, right: int) -> int:
        """pair(left, right) where left may be two levels taller."""
        if self.height[left] <= self.height[right] + 1:
            return self.pair(left, right)
        outer, inner = self.rules[left].left, self.rules[left].right
        if self.height[outer] >= self.height[inner]:
            return self.pair(outer, self.pair(inner, right))
        grand = self.rules[inner]
        return self.pair(self.pair(outer, grand.left), self.pair(grand.right, right))

    # ------------------------------------------------------------------
    # split / extract
    # ------------------------------------------------------------------

    def _prefix(self, node: int, k: int) -> int:
        """First k symbols of node, 1 <= k <= exp_len."""
        if k == self.exp_len[node]:
            return node
        rule = self.rules[node]
        left_len = self.exp_len[rule.left]
        if k <= left_len:
            return self._prefix(rule.left, k)
        return self.join(rule.left, self._prefix(rule.right, k - left_len))

    def _suffix(self, node: int, i: int) -> int:
        """Symbols i..exp_len of node, i >= 1."""
        if i == 1:
            return node
        rule = self.rules[node]
        left_len = self.exp_len[rule.left]
        if i > left_len:
            return self._suffix(rule.right, i - left_len)
        return self.join(self._suffix(rule.left, i), rule.right)

    def _extract(self, node: int, i: int, j: int) -> int:
        if i == 1 and j == self.exp_len[node]:
            return node
        rule = self.rules[node]
        left_len = self.exp_len[rule.left]
        if j <= left_len:
            return self._extract(rule.left, i, j)
        if i > left_len:
            return self._extract(rule.right, i - left_len, j - left_len)
        return self.join(self._suffix(rule.left, i), self._prefix(rule.right, j - left_len))

    def split(self, root: int, k: int) -> Tuple[int, int]:
        """Roots for the first k symbols of root and for the rest."""
        self._check(root)
        if not 1 <= k < self.exp_len[root]:
            raise GrammarError(f"split position {k} outside 1..{self.exp_len[root] - 1}")
        return self._prefix(root, k), self._suffix(root, k + 1)

    def extract(self, root: int, start: int, end: int) -> int:
        """Root for symbols start..end (1-based, inclusive) of root."""
        self._check(root)
        if not 1 <= start <= end <= self.exp_len[root]:
            raise GrammarError(f"range {start}..{end} outside 1..{self.exp_len[root]}")
        return self._extract(root, start, end)

    def split_patterns(self, boundaries: Sequence[int], root: Optional[int] = None) -> List[int]:
        """
        Cut root at the given pattern end positions.

        boundaries must be strictly increasing and end at exp_len(root). The
        resulting roots replace self.roots.
        """
        if root is None:
            root = self.root
        if not boundaries:
            if root is not None:
                raise GrammarError("boundaries must end at the total length")
            self.roots = []
            return []
        if root is None:
            raise GrammarError("grammar has no single root to split")
        self._check(root)

        previous = 0
        for b in boundaries:
            if b <= previous:
                raise GrammarError(f"boundaries must be strictly increasing and positive: {list(boundaries)}")
            previous = b
        if previous != self.exp_len[root]:
            raise GrammarError(f"last boundary {previous} != total length {self.exp_len[root]}")

        result = []
        rest = root
        consumed = 0
        for b in boundaries[:-1]:
            head, rest = self.split(rest, b - consumed)
            result.append(head)
            consumed = b
        result.append(rest)

        self.roots = result
        return result

    # ------------------------------------------------------------------
    # inspection
    # ------------------------------------------------------------------

    def expand(self, root: int) -> bytes:
        self._check(root)
        out = bytearray()
        stack = [root]
        while stack:
            rule = self.rules[stack.pop()]
            if isinstance(rule, Terminal):
                out.append(rule.symbol)
            else:
                stack.append(rule.right)
                stack.append(rule.left)
        return bytes(out)

    def reachable(self, roots: Iterable[int]) -> List[int]:
        """Ids of all rules reachable from roots, ascending."""
        seen = set()
        stack = []
        for root in roots:
            self._check(root)
            stack.append(root)
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            rule = self.rules[node]
            if isinstance(rule, Pair):
                stack.append(rule.left)
                stack.append(rule.right)
        return sorted(seen)

    def live_rule_count(self, roots: Optional[Iterable[int]] = None) -> int:
        return len(self.reachable(self.roots if roots is None else roots))

    def is_balanced(self, roots: Optional[Iterable[int]] = None) -> bool:
        for node in self.reachable(self.roots if roots is None else roots):
            rule = self.rules[node]
            if isinstance(rule, Pair) and abs(self.height[rule.left] - self.height[rule.right]) > 1:
                return False
        return True

    def stats(self) -> Dict:
        return {
            "rules": len(self.rules),
            "live_rules": self.live_rule_count(),
            "roots": len(self.roots),
            "root_heights": [self.height[r] for r in self.roots],
        }

    # ------------------------------------------------------------------
    # construction from a parse
    # ------------------------------------------------------------------

    @classmethod
    def from_lz77(cls, parse: ParseResult) -> "Grammar":
        """
        Build a grammar for the decoded parse, phrase by phrase.

        A literal joins a terminal onto the right end; a copy extracts its
        source range from the grammar built so far and joins that instead.
        """
        grammar = cls()
        root: Optional[int] = None
        for number, phrase in enumerate(parse.phrases, start=1):
            if isinstance(phrase, Literal):
                piece = grammar.terminal(phrase.symbol)
            else:
                built = grammar.exp_len[root] if root is not None else 0
                if phrase.src < 1 or phrase.length < 1 or phrase.src + phrase.length - 1 > built:
                    raise GrammarError(
                        f"phrase {number} copies {phrase.src}..{phrase.src + phrase.length - 1} "
                        f"but only {built} symbols precede it"
                    )
                piece = grammar.extract(root, phrase.src, phrase.src + phrase.length - 1)
            root = piece if root is None else grammar.join(root, piece)

        grammar.roots = [] if root is None else [root]
        logger.debug(
            f"Grammar from {parse.phrase_count} phrases: {len(grammar)} rules, "
            f"height {grammar.height[root] if root is not None else 0}"
        )
        return grammar
