"""
Pytest configuration and fixtures for the GlueSearch test suite.
"""

import os
import random
import string
import sys

import pytest

# Repo root on the path for gluesearch, shards and tools
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from gluesearch.core import GlueSearchConfig
from gluesearch.fm_index import BwtIndex
from gluesearch.grammar import Grammar


MISSISSIPPI = "mississippi"
FIBONACCI_WORD = "abaababaabaab"

# alphabet sizes 2, 4 and 26 for the randomized suites
ALPHABETS = ("ab", "acgt", string.ascii_lowercase)
RANDOM_INSTANCES = 200


# ============================================================================
# Index Fixtures
# ============================================================================

@pytest.fixture
def mississippi_index():
    """Index of "mississippi" with a sample rate small enough to force walks."""
    return BwtIndex.build(MISSISSIPPI, sample_rate=4)


@pytest.fixture
def dense_index():
    """Same text, every position sampled."""
    return BwtIndex.build(MISSISSIPPI, sample_rate=1)


@pytest.fixture
def sparse_index():
    """Same text, only the sentinel sampled."""
    return BwtIndex.build(MISSISSIPPI, sample_rate=64)


# ============================================================================
# Grammar Fixtures
# ============================================================================

@pytest.fixture
def fibonacci_grammar():
    """
    The seven-rule grammar for "abaababaabaab".

    Returns (grammar, ids) where ids maps X1..X7 to rule ids:
    X1 -> b, X2 -> a, X3 -> X2 X1, X4 -> X3 X2, X5 -> X4 X3, X6 -> X5 X4, X7 -> X6 X5
    """
    grammar = Grammar()
    ids = {}
    ids["X1"] = grammar.terminal(ord("b"))
    ids["X2"] = grammar.terminal(ord("a"))
    ids["X3"] = grammar.pair(ids["X2"], ids["X1"])
    ids["X4"] = grammar.pair(ids["X3"], ids["X2"])
    ids["X5"] = grammar.pair(ids["X4"], ids["X3"])
    ids["X6"] = grammar.pair(ids["X5"], ids["X4"])
    ids["X7"] = grammar.pair(ids["X6"], ids["X5"])
    grammar.roots = [ids["X7"]]
    return grammar, ids


# ============================================================================
# Random Input Fixtures
# ============================================================================

@pytest.fixture
def rng():
    """Seeded generator so failures reproduce."""
    return random.Random(20240601)


def random_text(rng: random.Random, length: int, alphabet: str = "acgt") -> str:
    return "".join(rng.choice(alphabet) for _ in range(length))


def random_substrings(rng: random.Random, text: str, count: int, max_len: int = 8):
    """Substrings of text, plus the occasional pattern that is likely absent."""
    patterns = []
    for k in range(count):
        length = rng.randint(1, max_len)
        start = rng.randrange(len(text) - length + 1)
        pattern = text[start:start + length]
        if k % 10 == 9:
            pattern = pattern[:-1] + "n"
        patterns.append(pattern)
    return patterns


def random_instance(rng: random.Random, max_len: int = 2000, min_len: int = 20):
    """(text, alphabet) with the alphabet drawn from ALPHABETS."""
    alphabet = ALPHABETS[rng.randrange(len(ALPHABETS))]
    return random_text(rng, rng.randint(min_len, max_len), alphabet), alphabet


def mixed_patterns(rng: random.Random, text: str, alphabet: str, count: int, max_len: int = 8):
    """Substrings of text alternating with random strings, which are often absent."""
    patterns = []
    for k in range(count):
        length = rng.randint(1, max_len)
        if k % 2:
            patterns.append(random_text(rng, length, alphabet))
        else:
            start = rng.randrange(len(text) - length + 1)
            patterns.append(text[start:start + length])
    return patterns


@pytest.fixture
def random_corpus(rng):
    """A 600-symbol DNA-like text with 50 patterns drawn from it."""
    text = random_text(rng, 600)
    return text, random_substrings(rng, text, 50)


# ============================================================================
# Config Fixtures
# ============================================================================

@pytest.fixture
def fast_config():
    """Config with short timeouts for socket tests."""
    return GlueSearchConfig(sample_rate=4, timeout=2.0, max_retries=2, retry_delay=0.01)


# ============================================================================
# Pytest Configuration
# ============================================================================

def pytest_configure(config):
    """Configure custom markers."""
    config.addinivalue_line("markers", "slow: marks tests as slow")
    config.addinivalue_line("markers", "integration: marks tests as integration tests")
    config.addinivalue_line("markers", "network: marks tests that serve on a pre-chosen local port")


def pytest_collection_modifyitems(config, items):
    """Modify test collection to skip network and slow tests by default."""
    skip_network = pytest.mark.skip(reason="Network tests disabled")
    skip_slow = pytest.mark.skip(reason="Slow tests disabled")

    for item in items:
        if "network" in item.keywords and not config.getoption("--network"):
            item.add_marker(skip_network)
        if "slow" in item.keywords and not config.getoption("--run-slow"):
            item.add_marker(skip_slow)


def pytest_addoption(parser):
    """Add custom command line options."""
    parser.addoption(
        "--network",
        action="store_true",
        default=False,
        help="Run tests that open local sockets"
    )
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run slow tests"
    )
