"""Schema semantic governance: thematic domains, governed table schemas,
dialect annotations and per-user column grants.

The catalog is the single source of truth the rest of the engine validates
against. Registration is strict: every field needs a description, names must
be unique, dialects must come from the declared set. Grants are allow-list
only; access checks are default-deny.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    DuplicateField,
    EmptyDescription,
    UnknownDialect,
    UnknownDomain,
    UnknownTable,
)

DIALECTS = ("mysql", "postgresql", "hive", "spark", "flink", "embedded")

ALL_COLUMNS = "ALL"


@dataclass(frozen=True)
class FieldSpec:
    name: str
    data_type: str
    description: str
    enum_values: Optional[dict[str, str]] = None
    nested_keys: Optional[dict[str, str]] = None

    def validate(self) -> None:
        if not self.name:
            raise DuplicateField("field name must be non-empty")
        if not self.description or not self.description.strip():
            raise EmptyDescription(f"field {self.name!r} has no description")


@dataclass(frozen=True)
class TableSchema:
    table_name: str
    fields: tuple[FieldSpec, ...]
    dialect: str = "embedded"
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))

    def validate(self) -> None:
        if not self.table_name:
            raise UnknownTable("table_name must be non-empty")
        if self.dialect not in DIALECTS:
            raise UnknownDialect(f"dialect {self.dialect!r} not in {DIALECTS}")
        seen = set()
        for f in self.fields:
            f.validate()
            key = f.name.lower()
            if key in seen:
                raise DuplicateField(f"duplicate field {f.name!r} in {self.table_name!r}")
            seen.add(key)

    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def field(self, name: str) -> Optional[FieldSpec]:
        low = name.lower()
        for f in self.fields:
            if f.name.lower() == low:
                return f
        return None


@dataclass(frozen=True)
class ThematicDomain:
    domain_id: str
    tables: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))


@dataclass(frozen=True)
class AccessGrant:
    user_id: str
    table_name: str
    columns: frozenset[str] | str = ALL_COLUMNS  # frozenset of names, or ALL

    def covers(self, column: str) -> bool:
        if self.columns == ALL_COLUMNS:
            return True
        return column.lower() in {c.lower() for c in self.columns}


@dataclass
class AuthVerdict:
    allowed: bool
    missing: list[tuple[str, str]] = field(default_factory=list)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.allowed


class Catalog:
    """In-memory registry of domains, tables and grants.

    Reads are lock-free on immutable snapshots; writes take the writer lock
    and swap whole entries, so registration is atomic per table.
    """

    def __init__(self):
        self._tables: dict[str, TableSchema] = {}
        self._domains: dict[str, ThematicDomain] = {}
        self._grants: list[AccessGrant] = []
        self._write_lock = threading.Lock()

    # -- tables -------------------------------------------------------------

    def register_table(self, schema: TableSchema) -> str:
        schema.validate()
        with self._write_lock:
            self._tables[schema.table_name.lower()] = schema
        return schema.table_name

    def table(self, name: str) -> TableSchema:
        try:
            return self._tables[name.lower()]
        except KeyError:
            raise UnknownTable(f"table {name!r} is not registered") from None

    def has_table(self, name: str) -> bool:
        return name.lower() in self._tables

    def tables(self) -> list[TableSchema]:
        return list(self._tables.values())

    # -- domains ------------------------------------------------------------

    def register_domain(self, domain: ThematicDomain) -> str:
        if not domain.tables:
            raise UnknownDomain(f"domain {domain.domain_id!r} has no tables")
        for t in domain.tables:
            if not self.has_table(t):
                raise UnknownTable(f"domain {domain.domain_id!r} references unknown table {t!r}")
        with self._write_lock:
            self._domains[domain.domain_id] = domain
        return domain.domain_id

    def domain(self, domain_id: str) -> ThematicDomain:
        try:
            return self._domains[domain_id]
        except KeyError:
            raise UnknownDomain(f"domain {domain_id!r} is not registered") from None

    def has_domain(self, domain_id: str) -> bool:
        return domain_id in self._domains

    def domain_schemas(self, domain_id: str) -> list[TableSchema]:
        return [self.table(t) for t in self.domain(domain_id).tables]

    # -- grants -------------------------------------------------------------

    def add_grant(self, grant: AccessGrant) -> None:
        schema = self.table(grant.table_name)  # raises UnknownTable
        if grant.columns != ALL_COLUMNS:
            known = {f.lower() for f in schema.field_names()}
            bad = {c for c in grant.columns if c.lower() not in known}
            if bad:
                raise UnknownTable(
                    f"grant on {grant.table_name!r} names unknown columns {sorted(bad)}"
                )
        with self._write_lock:
            self._grants.append(grant)

    def grants_for(self, user_id: str) -> list[AccessGrant]:
        return [g for g in self._grants if g.user_id == user_id]

    def check_access(self, user_id: str, referenced: Iterable[tuple[str, str]]) -> AuthVerdict:
        """Default-deny column-level check: every (table, column) pair must be
        covered by some grant; the denial lists every missing pair."""
        refs = sorted(set((t, c) for t, c in referenced))
        for t, _ in refs:
            if not self.has_table(t):
                raise UnknownTable(f"referenced table {t!r} is not in the catalog")
        grants = self.grants_for(user_id)
        missing = []
        for t, c in refs:
            ok = any(g.table_name.lower() == t.lower() and g.covers(c) for g in grants)
            if not ok:
                missing.append((t, c))
        if missing:
            return AuthVerdict(False, missing, reason="inadequate authorization")
        return AuthVerdict(True)

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "domains": [
                {"domain_id": d.domain_id, "tables": list(d.tables)}
                for d in self._domains.values()
            ],
            "tables": [
                {
                    "table_name": t.table_name,
                    "dialect": t.dialect,
                    "description": t.description,
                    "fields": [
                        {
                            "name": f.name,
                            "data_type": f.data_type,
                            "description": f.description,
                            **({"enum_values": f.enum_values} if f.enum_values else {}),
                            **({"nested_keys": f.nested_keys} if f.nested_keys else {}),
                        }
                        for f in t.fields
                    ],
                }
                for t in self._tables.values()
            ],
            "grants": [
                {
                    "user_id": g.user_id,
                    "table_name": g.table_name,
                    "columns": "ALL" if g.columns == ALL_COLUMNS else sorted(g.columns),
                }
                for g in self._grants
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "Catalog":
        cat = cls()
        for t in doc.get("tables", []):
            cat.register_table(
                TableSchema(
                    table_name=t["table_name"],
                    dialect=t.get("dialect", "embedded"),
                    description=t.get("description", ""),
                    fields=tuple(
                        FieldSpec(
                            name=f["name"],
                            data_type=f.get("data_type", ""),
                            description=f.get("description", ""),
                            enum_values=f.get("enum_values"),
                            nested_keys=f.get("nested_keys"),
                        )
                        for f in t.get("fields", [])
                    ),
                )
            )
        for d in doc.get("domains", []):
            cat.register_domain(ThematicDomain(d["domain_id"], tuple(d["tables"])))
        for g in doc.get("grants", []):
            cols = g.get("columns", "ALL")
            cat.add_grant(
                AccessGrant(
                    user_id=g["user_id"],
                    table_name=g["table_name"],
                    columns=ALL_COLUMNS if cols == "ALL" else frozenset(cols),
                )
            )
        return cat

    @classmethod
    def load(cls, path: str | Path) -> "Catalog":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
