"""
GlueSearch - FM-index search with interval gluing and grammar-preprocessed patterns
"""

from .core import (
    GlueSearchConfig,
    PatternResult,
    PreparedPatterns,
    prepare_patterns,
    search_patterns,
    search_prepared,
)
from .errors import (
    ConfigError,
    GlueSearchError,
    GrammarError,
    GrammarFormatError,
    IndexBuildError,
    IndexFormatError,
    LZ77FormatError,
    PositionError,
    WildcardPatternError,
)
from .fm_index import EMPTY, BwtIndex, Interval, build_index
from .glue import GlueStats, glue, glue_image, glue_with_stats
from .grammar import Grammar, Pair, Terminal
from .grammar_search import (
    IntervalMemo,
    LevelSchedule,
    SearchStats,
    level_schedule,
    multi_search,
    search_grammar,
    search_grammar_parallel,
    search_grammar_parallel_async,
)
from .lz77 import Copy, Literal, ParseResult, decode, parse, parse_multi
from .storage import deserialize_grammar, load_index, save_index, serialize_grammar
from .wildcard import (
    WildcardPattern,
    WildcardStats,
    WildcardTemplate,
    match_exact,
    match_flexible,
    parse_wildcard_pattern,
)

__version__ = "1.0.0"
