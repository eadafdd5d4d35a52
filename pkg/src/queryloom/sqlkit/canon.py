"""Canonical AST forms for exact-match comparison.

Normalizes keyword/identifier case, literal spelling, ``!=`` vs ``<>``,
cosmetic table aliases, and select-item aliases (references in
GROUP/HAVING/ORDER are inlined before aliases are dropped). Structural
differences - extra columns, different clauses - stay visible.
"""
from __future__ import annotations

from typing import Optional

from . import nodes as n
from .parser import parse


def canonicalize(sql: str, dialect: str = "embedded") -> Optional[tuple]:
    """Canonical nested-tuple form of the statement, or None if unparseable."""
    result = parse(sql, dialect)
    if not result.ok:
        return None
    return _query(result.statement, {})


def canonical_equal(a: str, b: str, dialect: str = "embedded") -> bool:
    ca, cb = canonicalize(a, dialect), canonicalize(b, dialect)
    return ca is not None and ca == cb


def _query(query: n.Query, outer_aliases: dict) -> tuple:
    table_aliases = dict(outer_aliases)
    cte_names = {c.name.lower() for c in query.ctes}
    _collect_aliases(query.body, table_aliases, cte_names)

    ctes = tuple(
        (c.name.lower(), tuple(col.lower() for col in c.columns),
         _query(c.query, table_aliases))
        for c in query.ctes
    )
    body = _body(query.body, table_aliases)

    select_aliases, items = _select_alias_map(query.body, table_aliases)
    order = tuple(
        ("order", _resolve_ref(o.expr, table_aliases, select_aliases, items),
         "desc" if o.desc else "asc")
        for o in query.order_by
    )
    return (
        "query", ctes, body, order,
        _expr(query.limit, table_aliases, {}),
        _expr(query.offset, table_aliases, {}),
    )


def _collect_aliases(body, table_aliases: dict, cte_names: set) -> None:
    if isinstance(body, n.SetOp):
        _collect_aliases(body.left, table_aliases, cte_names)
        _collect_aliases(body.right, table_aliases, cte_names)
        return

    def visit(node):
        if node is None:
            return
        if isinstance(node, n.Join):
            visit(node.left)
            visit(node.right)
        elif isinstance(node, n.BaseTable):
            if node.alias and node.name.lower() not in cte_names:
                table_aliases[node.alias.lower()] = node.name.lower()

    if isinstance(body, n.SelectCore):
        visit(body.from_)


def _select_alias_map(body, table_aliases: dict):
    core = body
    while isinstance(core, n.SetOp):
        core = core.left
    aliases = {}
    items = list(core.items)
    for item in core.items:
        if item.alias:
            aliases[item.alias.lower()] = item.expr
    return aliases, items


def _body(body, table_aliases: dict) -> tuple:
    if isinstance(body, n.SetOp):
        return ("setop", body.op, _body(body.left, table_aliases),
                _body(body.right, table_aliases))
    return _core(body, table_aliases)


def _core(core: n.SelectCore, table_aliases: dict) -> tuple:
    select_aliases = {
        item.alias.lower(): item.expr for item in core.items if item.alias
    }
    items = tuple(
        _expr(item.expr, table_aliases, {}) for item in core.items
    )
    where = _expr(core.where, table_aliases, select_aliases)
    group = tuple(
        _resolve_ref(g, table_aliases, select_aliases, list(core.items))
        for g in core.group_by
    )
    having = _expr(core.having, table_aliases, select_aliases)
    return ("select", core.distinct, items, where, group, having)


def _resolve_ref(expr, table_aliases: dict, select_aliases: dict, items: list) -> tuple:
    """GROUP/ORDER entries may name a select alias or an ordinal; inline the
    underlying expression so cosmetic aliases cannot affect equality."""
    if isinstance(expr, n.Column) and expr.table is None \
            and expr.name.lower() in select_aliases:
        expr = select_aliases[expr.name.lower()]
    elif isinstance(expr, n.Literal) and expr.kind == "num":
        idx = int(expr.value) - 1
        if float(expr.value) == int(expr.value) and 0 <= idx < len(items):
            expr = items[idx].expr
    return _expr(expr, table_aliases, select_aliases)


def _expr(expr, ta: dict, sa: dict):
    if expr is None:
        return None
    if isinstance(expr, n.Column):
        if expr.table is None and expr.name.lower() in sa:
            return _expr(sa[expr.name.lower()], ta, {})
        table = expr.table.lower() if expr.table else None
        table = ta.get(table, table)
        return ("col", table, expr.name.lower())
    if isinstance(expr, n.Literal):
        if expr.kind == "num":
            return ("num", float(expr.value))
        return (expr.kind, expr.value)
    if isinstance(expr, n.Star):
        qual = expr.qualifier.lower() if expr.qualifier else None
        return ("star", ta.get(qual, qual))
    if isinstance(expr, n.Func):
        return ("func", expr.name.lower(), expr.distinct, expr.star,
                tuple(_expr(a, ta, sa) for a in expr.args))
    if isinstance(expr, n.Binary):
        op = "<>" if expr.op == "!=" else expr.op
        return ("bin", op, _expr(expr.left, ta, sa), _expr(expr.right, ta, sa))
    if isinstance(expr, n.Unary):
        return ("un", expr.op, _expr(expr.operand, ta, sa))
    if isinstance(expr, n.Case):
        return ("case", _expr(expr.operand, ta, sa),
                tuple((_expr(c, ta, sa), _expr(r, ta, sa)) for c, r in expr.whens),
                _expr(expr.else_, ta, sa))
    if isinstance(expr, n.InList):
        return ("in", expr.negated, _expr(expr.expr, ta, sa),
                tuple(_expr(i, ta, sa) for i in expr.items))
    if isinstance(expr, n.InSubquery):
        return ("insub", expr.negated, _expr(expr.expr, ta, sa), _query(expr.query, ta))
    if isinstance(expr, n.Between):
        return ("between", expr.negated, _expr(expr.expr, ta, sa),
                _expr(expr.low, ta, sa), _expr(expr.high, ta, sa))
    if isinstance(expr, n.Like):
        return ("like", expr.negated, _expr(expr.expr, ta, sa),
                _expr(expr.pattern, ta, sa))
    if isinstance(expr, n.IsNull):
        return ("isnull", expr.negated, _expr(expr.expr, ta, sa))
    if isinstance(expr, n.Exists):
        return ("exists", expr.negated, _query(expr.query, ta))
    if isinstance(expr, n.Subquery):
        return ("subq", _query(expr.query, ta))
    if isinstance(expr, n.Cast):
        return ("cast", _expr(expr.expr, ta, sa), expr.type_name.lower())
    raise TypeError(f"cannot canonicalize {type(expr).__name__}")
