"""SQL execution contracts. The embedded engine (sqlite-backed) is the only
live executor at desk scale; the other dialects are connection contracts
whose stub drivers raise NotConfigured until a real driver is wired in.
"""
from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import ExecutionError, NotConfigured

DEFAULT_ROW_LIMIT = 1000


@dataclass
class ExecutionResult:
    columns: list[str]
    rows: list[tuple]
    row_count: int
    elapsed: float
    truncated: bool = False

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ExecutionError("row arity does not match column count")

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "rows": [list(r) for r in self.rows],
            "row_count": self.row_count,
            "truncated": self.truncated,
        }

    def as_records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


@dataclass
class ConnectionProfile:
    name: str
    dialect: str
    dsn: str = ""


class EmbeddedConnection:
    """In-process sqlite connection; fixtures load via DDL+INSERT scripts."""

    dialect = "embedded"

    def __init__(self, database: str = ":memory:"):
        self._conn = sqlite3.connect(database, check_same_thread=False)

    def load_script(self, script_sql: str) -> None:
        self._conn.executescript(script_sql)

    def execute(self, sql: str, row_limit: int = DEFAULT_ROW_LIMIT) -> ExecutionResult:
        start = time.perf_counter()
        try:
            cursor = self._conn.execute(sql)
        except sqlite3.Error as exc:
            raise ExecutionError(str(exc)) from exc
        columns = [d[0] for d in cursor.description] if cursor.description else []
        rows = cursor.fetchmany(row_limit + 1)
        truncated = len(rows) > row_limit
        if truncated:
            rows = rows[:row_limit]
        elapsed = time.perf_counter() - start
        return ExecutionResult(
            columns=columns,
            rows=[tuple(r) for r in rows],
            row_count=len(rows),
            elapsed=elapsed,
            truncated=truncated,
        )

    def close(self) -> None:
        self._conn.close()


class StubConnection:
    """Placeholder for mysql/postgresql/hive/spark/flink profiles."""

    def __init__(self, profile: ConnectionProfile):
        self.profile = profile
        self.dialect = profile.dialect

    def execute(self, sql: str, row_limit: int = DEFAULT_ROW_LIMIT) -> ExecutionResult:
        raise NotConfigured(
            f"no live driver for dialect {self.profile.dialect!r} "
            f"(profile {self.profile.name!r})"
        )


def open_connection(profile: ConnectionProfile):
    if profile.dialect == "embedded":
        conn = EmbeddedConnection(profile.dsn or ":memory:")
        return conn
    return StubConnection(profile)
