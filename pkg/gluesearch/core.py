"""
GlueSearch Core - configuration and the pattern preprocessing pipeline
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import yaml
from dotenv import load_dotenv

from .errors import ConfigError, GrammarError
from .fm_index import BwtIndex, Interval, Symbols, as_symbols
from .grammar import Grammar
from .grammar_search import SearchStats, multi_search, search_grammar_parallel
from .lz77 import ParseResult, parse_multi

logger = logging.getLogger(__name__)

ENV_PREFIX = "GLUESEARCH_"
MAX_FRAME = 64 * 1024 * 1024

# YAML section -> fields read from it
_SECTIONS = {
    "index": ("sample_rate", "rank_step"),
    "search": ("workers",),
    "distributed": ("overlap", "host", "port", "max_frame", "timeout", "max_retries", "retry_delay"),
}


@dataclass
class GlueSearchConfig:
    """Configuration for GlueSearch"""
    # Index settings
    sample_rate: int = 32
    rank_step: int = 64

    # Search settings
    workers: int = 1

    # Distributed settings
    overlap: int = 0
    host: str = "127.0.0.1"
    port: int = 7070
    max_frame: int = MAX_FRAME
    timeout: float = 10.0
    max_retries: int = 3
    retry_delay: float = 0.2

    log_level: str = "INFO"

    def __post_init__(self):
        for name in ("sample_rate", "rank_step", "workers", "max_frame", "max_retries"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.overlap < 0:
            raise ConfigError(f"overlap must be non-negative, got {self.overlap}")
        if not 0 <= self.port <= 65535:
            raise ConfigError(f"port out of range: {self.port}")
        if self.timeout <= 0 or self.retry_delay < 0:
            raise ConfigError("timeout must be positive and retry_delay non-negative")
        if not isinstance(logging.getLevelName(self.log_level.upper()), int):
            raise ConfigError(f"unknown log level {self.log_level!r}")

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "GlueSearchConfig":
        """Load configuration from YAML file"""
        with open(path) as f:
            try:
                config = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigError(f"{path}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"{path}: expected a mapping at the top level")
        for section in (*_SECTIONS, "logging"):
            if not isinstance(config.get(section) or {}, dict):
                raise ConfigError(f"{path}: section {section!r} must be a mapping")

        values: Dict[str, Any] = {}
        for section, names in _SECTIONS.items():
            for name in names:
                if name in (config.get(section) or {}):
                    values[name] = config[section][name]
        if "level" in (config.get("logging") or {}):
            values["log_level"] = config["logging"]["level"]
        try:
            return cls(**values)
        except (TypeError, AttributeError) as e:
            raise ConfigError(f"{path}: {e}") from e

    def with_env(self, environ: Optional[Mapping[str, str]] = None) -> "GlueSearchConfig":
        """Apply GLUESEARCH_<FIELD> overrides; a .env file is read when environ is not given."""
        if environ is None:
            load_dotenv()
            environ = os.environ

        overrides: Dict[str, Any] = {}
        for f in fields(self):
            raw = environ.get(ENV_PREFIX + f.name.upper())
            if raw is None:
                continue
            try:
                overrides[f.name] = type(getattr(self, f.name))(raw)
            except ValueError as e:
                raise ConfigError(f"{ENV_PREFIX}{f.name.upper()}={raw!r}: {e}") from e
        return replace(self, **overrides)

    def with_overrides(self, **values: Any) -> "GlueSearchConfig":
        """Apply explicit values, skipping those left as None."""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    @classmethod
    def load(
        cls,
        path: Optional[Union[str, Path]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> "GlueSearchConfig":
        """Defaults, then the YAML file, then the environment."""
        config = cls.from_yaml(path) if path else cls()
        return config.with_env(environ)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class PreparedPatterns:
    """Patterns turned into one AVL-grammar with a root per pattern."""
    patterns: List[bytes]
    parse: ParseResult
    grammar: Grammar
    roots: List[int]

    @property
    def pattern_lens(self) -> List[int]:
        return [len(p) for p in self.patterns]

    def stats(self) -> Dict[str, Any]:
        return {
            "patterns": len(self.patterns),
            "phrases": self.parse.phrase_count,
            "rules": len(self.grammar),
            "live_rules": self.grammar.live_rule_count(self.roots),
            "root_heights": [self.grammar.height[r] for r in self.roots],
        }


def prepare_patterns(patterns: Sequence[Symbols]) -> PreparedPatterns:
    """Parse the patterns together, build the grammar and split it per pattern."""
    encoded = [as_symbols(p) for p in patterns]
    for number, pattern in enumerate(encoded, start=1):
        if not pattern:
            raise GrammarError(f"pattern {number} is empty")

    parse = parse_multi(encoded)
    grammar = Grammar.from_lz77(parse)
    roots = grammar.split_patterns(parse.pattern_boundaries)
    logger.info(
        f"Prepared {len(encoded)} patterns: z={parse.phrase_count}, "
        f"rules={len(grammar)}, live={grammar.live_rule_count(roots)}"
    )
    return PreparedPatterns(encoded, parse, grammar, roots)


@dataclass
class PatternResult:
    """Search outcome for one pattern."""
    pattern: bytes
    interval: Interval
    positions: Optional[List[int]] = None

    @property
    def count(self) -> int:
        return len(self.interval)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "pattern": self.pattern.decode("utf-8", errors="replace"),
            "count": self.count,
            "interval": self.interval.to_list(),
        }
        if self.positions is not None:
            data["positions"] = self.positions
        return data


def search_prepared(
    index: BwtIndex,
    prepared: PreparedPatterns,
    workers: int = 1,
    locate: bool = True,
    stats: Optional[SearchStats] = None,
) -> List[PatternResult]:
    """Search every prepared pattern through the shared grammar."""
    if workers == 1:
        intervals = multi_search(index, prepared.grammar, prepared.roots, stats)
    else:
        intervals = search_grammar_parallel(index, prepared.grammar, prepared.roots, workers, stats)

    return [
        PatternResult(
            pattern,
            interval,
            index.locate_all(interval, len(pattern)) if locate else None,
        )
        for pattern, interval in zip(prepared.patterns, intervals)
    ]


def search_patterns(
    index: BwtIndex,
    patterns: Sequence[Symbols],
    workers: int = 1,
    locate: bool = True,
    stats: Optional[SearchStats] = None,
) -> List[PatternResult]:
    """Preprocess patterns once and search them all through the grammar."""
    return search_prepared(index, prepare_patterns(patterns), workers, locate, stats)
