"""
GlueSearch Test Suite

This package contains tests for:
- FM-index construction, locate and antilocate
- Interval gluing
- LZ77 parsing and AVL-grammars
- Grammar-driven multi-pattern search
- Wildcard matching
- Sharded search over loopback and TCP
- The run.py command line
"""

__version__ = "1.0.0"
