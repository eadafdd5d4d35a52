from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

SYNTAX_ERROR = "SyntaxError"
UNKNOWN_TABLE = "UnknownTable"
UNKNOWN_COLUMN = "UnknownColumn"

DIAGNOSTIC_KINDS = (SYNTAX_ERROR, UNKNOWN_TABLE, UNKNOWN_COLUMN)


@dataclass(frozen=True)
class SqlDiagnostic:
    kind: str
    detail: str
    location: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in DIAGNOSTIC_KINDS:
            raise ValueError(f"unknown diagnostic kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass
class ParseResult:
    ok: bool
    statement: object = None
    diagnostic: Optional[SqlDiagnostic] = None


@dataclass
class Lineage:
    """The <Tables, Fields> half of a demonstration record."""

    tables: set[str] = field(default_factory=set)
    fields: set[tuple[str, str]] = field(default_factory=set)
    unresolved_columns: set[str] = field(default_factory=set)

    def check(self) -> None:
        for t, _ in self.fields:
            if t not in self.tables:
                raise AssertionError(f"field table {t!r} missing from tables")
