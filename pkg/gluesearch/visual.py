"""
🎨 Visual - terminal rendering of build summaries and --stats

Everything here goes to stderr so that result records on stdout stay
machine-readable.
"""

from typing import Any, Mapping, Optional, Sequence

from rich import box
from rich.console import Console
from rich.table import Table

console = Console(stderr=True)


def stats_table(title: str, rows: Mapping[str, Any]) -> Table:
    """Two-column table of named values."""
    table = Table(title=title, box=box.SIMPLE, show_header=False)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="green")
    for name, value in rows.items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(v) for v in value) or "-"
        table.add_row(name, str(value))
    return table


def level_table(level_sizes: Sequence[int]) -> Table:
    table = Table(title="📶 Level schedule", box=box.SIMPLE)
    table.add_column("Height", justify="right", style="cyan")
    table.add_column("Rules", justify="right", style="green")
    for height, size in enumerate(level_sizes):
        table.add_row(str(height), str(size))
    return table


def show_stats(title: str, rows: Mapping[str, Any], level_sizes: Optional[Sequence[int]] = None,
               out: Optional[Console] = None):
    out = out or console
    out.print(stats_table(title, rows))
    if level_sizes:
        out.print(level_table(level_sizes))


def show_build_summary(n: int, sigma: int, sample_rate: int, size: int, elapsed: float,
                       out: Optional[Console] = None):
    show_stats(
        "✅ Index built",
        {
            "text length (n)": n,
            "alphabet size": sigma,
            "sample rate": sample_rate,
            "index bytes": size,
            "build seconds": f"{elapsed:.3f}",
        },
        out=out,
    )
