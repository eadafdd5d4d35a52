"""Catalog validation of SQL: the diagnostics that drive reflection and
authorization."""
from __future__ import annotations

from .diagnostics import SqlDiagnostic, UNKNOWN_COLUMN, UNKNOWN_TABLE
from .lineage import extract_lineage
from .parser import parse

# Dialects with best-effort column validation only (dialect functions and
# semi-structured access vary too widely to resolve columns reliably).
PERMISSIVE_DIALECTS = {"hive", "spark", "flink"}


def validate(sql: str, dialect: str = "embedded", catalog=None) -> list[SqlDiagnostic]:
    """Empty list iff the SQL parses and every referenced table/column is
    known to the catalog. One diagnostic per distinct problem."""
    result = parse(sql, dialect)
    if not result.ok:
        return [result.diagnostic]
    if catalog is None:
        return []

    lineage = extract_lineage(sql, dialect, catalog)
    diagnostics: list[SqlDiagnostic] = []
    seen: set[tuple[str, str]] = set()

    def add(kind: str, detail: str) -> None:
        key = (kind, detail)
        if key not in seen:
            seen.add(key)
            diagnostics.append(SqlDiagnostic(kind, detail))

    known_tables = []
    for table in sorted(lineage.tables):
        if catalog.has_table(table):
            known_tables.append(catalog.table(table))
        else:
            add(UNKNOWN_TABLE, f"table {table!r} does not exist")

    if dialect in PERMISSIVE_DIALECTS:
        return diagnostics

    for table, column in sorted(lineage.fields):
        if catalog.has_table(table) and catalog.table(table).field(column) is None:
            add(UNKNOWN_COLUMN, f"column {column!r} does not exist in table {table!r}")

    for column in sorted(lineage.unresolved_columns):
        if not any(t.field(column) is not None for t in known_tables):
            add(UNKNOWN_COLUMN, f"column {column!r} does not exist in any referenced table")

    return diagnostics
