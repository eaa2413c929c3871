"""
Writers module for emitting experiment artifacts as CSV or JSON.

Floats are written with 17 significant digits so that repeated runs with
the same inputs produce byte-identical files.
"""

import csv
import json
import sys
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, TextIO

FLOAT_FORMAT = ".17g"


@dataclass(frozen=True)
class Table:
    """
    Rows of an artifact with a fixed header.

    Attributes:
        columns: Column names
        rows: One tuple per row, matching the columns
    """

    columns: tuple[str, ...]
    rows: list[tuple[Any, ...]] = field(default_factory=list)

    def as_dict(self) -> dict[str, Any]:
        """Return the table as columns and rows for a JSON document."""
        return {
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
        }


def format_value(value: Any) -> str:
    """Format one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def write_csv(table: Table, stream: TextIO) -> None:
    """Write a table with its header row."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow(format_value(value) for value in row)


def write_json(document: Any, stream: TextIO) -> None:
    """
    Write a JSON document.

    Raises:
        ValueError: If the document contains NaN or infinity
    """
    json.dump(document, stream, indent=2, allow_nan=False)
    stream.write("\n")


@contextmanager
def open_output(path: str | None) -> Iterator[TextIO]:
    """Open ``path`` for writing, or yield standard output for None."""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as stream:
        yield stream


def series_rows(*columns: Sequence[float]) -> list[tuple[float, ...]]:
    """Zip sampled series into rows of Python floats."""
    return [tuple(float(x) for x in row) for row in zip(*columns, strict=True)]
