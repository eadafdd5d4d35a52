"""AST node types for the SELECT subset the engine analyzes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


# --- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Column:
    table: Optional[str]
    name: str


@dataclass(frozen=True)
class Literal:
    kind: str  # "num" | "str" | "null" | "bool"
    value: object


@dataclass(frozen=True)
class Star:
    qualifier: Optional[str] = None


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple = ()
    distinct: bool = False
    star: bool = False


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Case:
    operand: Optional[object]
    whens: tuple  # of (condition, result)
    else_: Optional[object] = None


@dataclass(frozen=True)
class InList:
    expr: object
    items: tuple
    negated: bool = False


@dataclass(frozen=True)
class InSubquery:
    expr: object
    query: object
    negated: bool = False


@dataclass(frozen=True)
class Between:
    expr: object
    low: object
    high: object
    negated: bool = False


@dataclass(frozen=True)
class Like:
    expr: object
    pattern: object
    negated: bool = False


@dataclass(frozen=True)
class IsNull:
    expr: object
    negated: bool = False


@dataclass(frozen=True)
class Exists:
    query: object
    negated: bool = False


@dataclass(frozen=True)
class Subquery:
    query: object


@dataclass(frozen=True)
class Cast:
    expr: object
    type_name: str


# --- table expressions -----------------------------------------------------

@dataclass(frozen=True)
class BaseTable:
    name: str
    alias: Optional[str] = None


@dataclass(frozen=True)
class DerivedTable:
    query: object
    alias: str


@dataclass(frozen=True)
class Join:
    kind: str  # "inner" | "left" | "right" | "full" | "cross"
    left: object
    right: object
    on: Optional[object] = None
    using: tuple = ()


# --- query structure -------------------------------------------------------

@dataclass(frozen=True)
class SelectItem:
    expr: object
    alias: Optional[str] = None


@dataclass(frozen=True)
class SelectCore:
    items: tuple
    distinct: bool = False
    from_: Optional[object] = None
    where: Optional[object] = None
    group_by: tuple = ()
    having: Optional[object] = None


@dataclass(frozen=True)
class SetOp:
    op: str  # "union" | "union all" | "intersect" | "except"
    left: object
    right: object


@dataclass(frozen=True)
class OrderItem:
    expr: object
    desc: bool = False


@dataclass(frozen=True)
class Cte:
    name: str
    columns: tuple
    query: object


@dataclass(frozen=True)
class Query:
    body: object  # SelectCore or SetOp
    ctes: tuple = ()
    order_by: tuple = ()
    limit: Optional[object] = None
    offset: Optional[object] = None


def walk_expr(node):
    """Yield node and every expression node under it, without descending
    into subqueries (their scopes differ)."""
    if node is None:
        return
    yield node
    if isinstance(node, Binary):
        yield from walk_expr(node.left)
        yield from walk_expr(node.right)
    elif isinstance(node, Unary):
        yield from walk_expr(node.operand)
    elif isinstance(node, Func):
        for a in node.args:
            yield from walk_expr(a)
    elif isinstance(node, Case):
        yield from walk_expr(node.operand)
        for cond, res in node.whens:
            yield from walk_expr(cond)
            yield from walk_expr(res)
        yield from walk_expr(node.else_)
    elif isinstance(node, InList):
        yield from walk_expr(node.expr)
        for it in node.items:
            yield from walk_expr(it)
    elif isinstance(node, InSubquery):
        yield from walk_expr(node.expr)
    elif isinstance(node, Between):
        yield from walk_expr(node.expr)
        yield from walk_expr(node.low)
        yield from walk_expr(node.high)
    elif isinstance(node, Like):
        yield from walk_expr(node.expr)
        yield from walk_expr(node.pattern)
    elif isinstance(node, IsNull):
        yield from walk_expr(node.expr)
    elif isinstance(node, Cast):
        yield from walk_expr(node.expr)
