"""Table/column lineage extraction: the <Query, SQL> to <Query, Tables,
Fields> transform.

Lineage reports base tables only; CTEs and derived tables are traced
through to their underlying tables. Unqualified columns resolve through
the catalog when exactly one in-scope table can own them, otherwise they
land in ``unresolved_columns``.
"""
from __future__ import annotations

from typing import Optional

from ..errors import NotParsed
from . import nodes as n
from .diagnostics import Lineage
from .parser import parse


class _Source:
    """One FROM-clause source visible in a scope."""

    def __init__(self, label: Optional[str], base: Optional[str],
                 columns: Optional[set[str]], exposed: Optional[dict]):
        self.label = label.lower() if label else None  # alias or bare name
        self.base = base            # base table name (None for derived)
        self.columns = columns      # known column set, lowercased, or None
        self.exposed = exposed      # derived: output name -> (table, col) | None

    def owns(self, column: str) -> Optional[bool]:
        """True/False when membership is known, None when unknowable."""
        low = column.lower()
        if self.columns is not None:
            return low in self.columns
        if self.exposed is not None:
            return low in self.exposed
        return None

    def resolve(self, column: str) -> Optional[tuple[str, str]]:
        if self.base is not None:
            return (self.base, column)
        if self.exposed is not None:
            return self.exposed.get(column.lower())
        return None


class _Scope:
    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.sources: list[_Source] = []

    def find_qualified(self, qualifier: str) -> Optional[_Source]:
        low = qualifier.lower()
        scope: Optional[_Scope] = self
        while scope is not None:
            for s in scope.sources:
                if s.label == low:
                    return s
                if s.base is not None and s.base.lower() == low:
                    return s
            scope = scope.parent
        return None

    def candidates(self, column: str) -> tuple[list[_Source], bool]:
        """Sources that may own the column, and whether ownership was
        decidable for all sources in the nearest scope that had any."""
        scope: Optional[_Scope] = self
        while scope is not None:
            if scope.sources:
                owners, unknown = [], False
                for s in scope.sources:
                    verdict = s.owns(column)
                    if verdict is True:
                        owners.append(s)
                    elif verdict is None:
                        unknown = True
                if owners or not unknown:
                    return owners, True
                return list(scope.sources), False
            scope = scope.parent
        return [], True


class _Extractor:
    def __init__(self, catalog=None):
        self.catalog = catalog
        self.out = Lineage()

    # -- helpers ------------------------------------------------------------

    def _catalog_columns(self, table: str) -> Optional[set[str]]:
        if self.catalog is not None and self.catalog.has_table(table):
            return {f.lower() for f in self.catalog.table(table).field_names()}
        return None

    def _record(self, table: str, column: str) -> None:
        self.out.tables.add(table)
        self.out.fields.add((table, column))

    # -- query walk ---------------------------------------------------------

    def query(self, query: n.Query, parent: Optional[_Scope], ctes_env: dict) -> dict:
        """Analyze a query; returns its exposed output-column map."""
        env = dict(ctes_env)
        for cte in query.ctes:
            exposed = self.query(cte.query, parent, env)
            if cte.columns:
                values = list(exposed.values())
                exposed = {
                    c.lower(): (values[i] if i < len(values) else None)
                    for i, c in enumerate(cte.columns)
                }
            env[cte.name.lower()] = exposed

        exposed = self.body(query.body, parent, env, query.order_by)
        return exposed

    def body(self, body, parent, env, order_by=()) -> dict:
        if isinstance(body, n.SetOp):
            left = self.body(body.left, parent, env)
            self.body(body.right, parent, env)
            if order_by:
                # ORDER BY over a set op refers to output columns; nothing to add
                pass
            return left
        return self.core(body, parent, env, order_by)

    def core(self, core: n.SelectCore, parent, env, order_by=()) -> dict:
        scope = _Scope(parent)
        if core.from_ is not None:
            self._add_sources(core.from_, scope, env)

        alias_map = {
            item.alias.lower(): item.expr
            for item in core.items
            if isinstance(item, n.SelectItem) and item.alias
        }

        for item in core.items:
            self._expr(item.expr, scope, env, select_aliases={})
        for clause in (core.where, core.having):
            self._expr(clause, scope, env, select_aliases=alias_map)
        for g in core.group_by:
            self._expr(g, scope, env, select_aliases=alias_map)
        for o in order_by:
            self._expr(o.expr, scope, env, select_aliases=alias_map)

        return self._exposed(core, scope)

    def _add_sources(self, node, scope: _Scope, env: dict) -> None:
        if isinstance(node, n.Join):
            self._add_sources(node.left, scope, env)
            self._add_sources(node.right, scope, env)
            if node.on is not None:
                self._expr(node.on, scope, env, select_aliases={})
            for col in node.using:
                self._unqualified(col, scope)
        elif isinstance(node, n.BaseTable):
            low = node.name.lower()
            if low in env:
                scope.sources.append(
                    _Source(node.alias or node.name, None, None, env[low])
                )
            else:
                self.out.tables.add(node.name)
                scope.sources.append(
                    _Source(node.alias or node.name, node.name,
                            self._catalog_columns(node.name), None)
                )
        elif isinstance(node, n.DerivedTable):
            exposed = self.query(node.query, scope.parent, env)
            scope.sources.append(_Source(node.alias, None, None, exposed))

    def _exposed(self, core: n.SelectCore, scope: _Scope) -> dict:
        exposed: dict = {}
        for item in core.items:
            if isinstance(item.expr, n.Star):
                if item.expr.qualifier:
                    src = scope.find_qualified(item.expr.qualifier)
                    sources = [src] if src else []
                else:
                    sources = scope.sources
                for s in sources:
                    if s.columns is not None and s.base is not None:
                        for c in s.columns:
                            exposed[c] = (s.base, c)
                    elif s.exposed is not None:
                        exposed.update(s.exposed)
                continue
            name = item.alias
            origin = None
            if isinstance(item.expr, n.Column):
                name = name or item.expr.name
                origin = self._resolve(item.expr, scope)
            if name:
                exposed[name.lower()] = origin
        return exposed

    # -- expression walk ----------------------------------------------------

    def _expr(self, expr, scope: _Scope, env: dict, select_aliases: dict) -> None:
        if expr is None:
            return
        for node in n.walk_expr(expr):
            if isinstance(node, n.Column):
                if node.table is None and node.name.lower() in select_aliases:
                    continue  # reference to a select alias; its expr was walked
                self._column(node, scope)
            elif isinstance(node, n.Star):
                self._star(node, scope)
            elif isinstance(node, (n.Subquery, n.Exists)):
                self.query(node.query, scope, env)
            elif isinstance(node, n.InSubquery):
                self.query(node.query, scope, env)

    def _column(self, col: n.Column, scope: _Scope) -> None:
        resolved = self._resolve(col, scope)
        if resolved is not None:
            self._record(*resolved)
        elif col.table is None:
            # a derived-table column tracing to a computed expression is
            # already covered inside the subquery; only truly ambiguous
            # names count as unresolved
            if not self._known_derived(col, scope):
                self.out.unresolved_columns.add(col.name)

    def _known_derived(self, col: n.Column, scope: _Scope) -> bool:
        owners, decided = scope.candidates(col.name)
        return decided and len(owners) == 1 and owners[0].base is None

    def _resolve(self, col: n.Column, scope: _Scope) -> Optional[tuple[str, str]]:
        if col.table is not None:
            src = scope.find_qualified(col.table)
            if src is None:
                return None
            return src.resolve(col.name)
        return self._unqualified(col.name, scope)

    def _unqualified(self, column: str, scope: _Scope) -> Optional[tuple[str, str]]:
        owners, decided = scope.candidates(column)
        if decided:
            if len(owners) == 1:
                return owners[0].resolve(column)
            return None
        # membership unknown for at least one source
        base_sources = [s for s in owners if s.base is not None]
        if len(owners) == 1 and base_sources:
            return base_sources[0].resolve(column)
        if len(base_sources) == 1 and len(owners) == len(base_sources):
            return base_sources[0].resolve(column)
        return None

    def _star(self, star: n.Star, scope: _Scope) -> None:
        sources = scope.sources
        if star.qualifier:
            src = scope.find_qualified(star.qualifier)
            sources = [src] if src else []
        for s in sources:
            if s.base is not None and s.columns is not None:
                for c in s.columns:
                    self._record(s.base, c)


def extract_lineage(sql: str, dialect: str = "embedded", catalog=None) -> Lineage:
    """Extract base tables and resolvable (table, column) pairs from SQL.

    Raises NotParsed when the SQL does not parse; call parse() first for a
    diagnostic instead.
    """
    result = parse(sql, dialect)
    if not result.ok:
        raise NotParsed(str(result.diagnostic))
    extractor = _Extractor(catalog)
    extractor.query(result.statement, None, {})
    extractor.out.check()
    return extractor.out
