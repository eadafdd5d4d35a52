"""Tokenizer and recursive-descent parser for the analyzed SELECT subset.

Covers: WITH/CTEs, joins, subqueries (FROM, IN, EXISTS, scalar), CASE,
BETWEEN/LIKE/IN/IS NULL, set operations, GROUP/HAVING/ORDER/LIMIT, and
generic function calls (which absorbs most dialect-specific functions such
as get_json_object or YEAR).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import nodes as n
from .diagnostics import ParseResult, SqlDiagnostic, SYNTAX_ERROR


class SqlSyntaxError(Exception):
    def __init__(self, message: str, pos: int = 0):
        super().__init__(message)
        self.pos = pos


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT QIDENT STRING NUMBER OP EOF
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper()


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<num>\d+\.\d*|\.\d+|\d+)
  | (?P<ident>[A-Za-z_¡-￿][A-Za-z0-9_$¡-￿]*)
  | (?P<bq>`(?:[^`]|``)*`)
  | (?P<dq>"(?:[^"\\]|\\.|"")*")
  | (?P<sq>'(?:[^'\\]|\\.|'')*')
  | (?P<op><>|!=|<=|>=|\|\||<|>|=|\+|-|\*|/|%|\(|\)|,|\.|;)
    """,
    re.VERBOSE | re.DOTALL,
)

RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET",
    "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "OUTER", "ON", "USING",
    "AS", "AND", "OR", "NOT", "IN", "IS", "NULL", "LIKE", "BETWEEN", "CASE",
    "WHEN", "THEN", "ELSE", "END", "UNION", "ALL", "DISTINCT", "EXISTS",
    "INTERSECT", "EXCEPT", "BY", "ASC", "DESC", "WITH", "CAST",
}

# Dialects where a double-quoted token is a string literal, not an identifier.
_DQ_STRING_DIALECTS = {"mysql", "hive", "spark", "flink", "embedded"}


def _unescape(body: str, quote: str) -> str:
    body = body.replace(quote + quote, quote)
    return re.sub(r"\\(.)", r"\1", body)


def tokenize(sql: str, dialect: str = "embedded") -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    length = len(sql)
    while pos < length:
        m = _TOKEN_RE.match(sql, pos)
        if not m:
            raise SqlSyntaxError(f"unexpected character {sql[pos]!r}", pos)
        if m.lastgroup == "ws":
            pass
        elif m.lastgroup == "num":
            tokens.append(Token("NUMBER", m.group(), pos))
        elif m.lastgroup == "ident":
            tokens.append(Token("IDENT", m.group(), pos))
        elif m.lastgroup == "bq":
            tokens.append(Token("QIDENT", _unescape(m.group()[1:-1], "`"), pos))
        elif m.lastgroup == "dq":
            body = _unescape(m.group()[1:-1], '"')
            if dialect in _DQ_STRING_DIALECTS:
                tokens.append(Token("STRING", body, pos))
            else:
                tokens.append(Token("QIDENT", body, pos))
        elif m.lastgroup == "sq":
            tokens.append(Token("STRING", _unescape(m.group()[1:-1], "'"), pos))
        else:
            tokens.append(Token("OP", m.group(), pos))
        pos = m.end()
    tokens.append(Token("EOF", "", length))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.upper in words

    def take_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.next()
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.take_kw(word):
            raise SqlSyntaxError(f"expected {word}, got {self.peek().text!r}", self.peek().pos)

    def at_op(self, op: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text == op

    def take_op(self, op: str) -> bool:
        if self.at_op(op):
            self.next()
            return True
        return False

    def expect_op(self, op: str) -> None:
        if not self.take_op(op):
            raise SqlSyntaxError(f"expected {op!r}, got {self.peek().text!r}", self.peek().pos)

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind == "QIDENT" or (tok.kind == "IDENT" and tok.upper not in RESERVED):
            self.next()
            return tok.text
        raise SqlSyntaxError(f"expected identifier, got {tok.text!r}", tok.pos)

    # -- query --------------------------------------------------------------

    def parse_statement(self) -> n.Query:
        query = self.parse_query()
        self.take_op(";")
        if self.peek().kind != "EOF":
            tok = self.peek()
            raise SqlSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return query

    def parse_query(self) -> n.Query:
        ctes: list[n.Cte] = []
        if self.take_kw("WITH"):
            while True:
                name = self.ident()
                cols: tuple = ()
                if self.take_op("("):
                    col_list = [self.ident()]
                    while self.take_op(","):
                        col_list.append(self.ident())
                    self.expect_op(")")
                    cols = tuple(col_list)
                self.expect_kw("AS")
                self.expect_op("(")
                sub = self.parse_query()
                self.expect_op(")")
                ctes.append(n.Cte(name, cols, sub))
                if not self.take_op(","):
                    break

        body = self.parse_select_core()
        while True:
            if self.at_kw("UNION"):
                self.next()
                op = "union all" if self.take_kw("ALL") else "union"
                body = n.SetOp(op, body, self.parse_select_core())
            elif self.take_kw("INTERSECT"):
                body = n.SetOp("intersect", body, self.parse_select_core())
            elif self.take_kw("EXCEPT"):
                body = n.SetOp("except", body, self.parse_select_core())
            else:
                break

        order_by: tuple = ()
        if self.take_kw("ORDER"):
            self.expect_kw("BY")
            items = [self.parse_order_item()]
            while self.take_op(","):
                items.append(self.parse_order_item())
            order_by = tuple(items)

        limit = offset = None
        if self.take_kw("LIMIT"):
            limit = self.parse_expr()
            if self.take_op(","):  # LIMIT offset, count
                offset, limit = limit, self.parse_expr()
            elif self.take_kw("OFFSET"):
                offset = self.parse_expr()
        return n.Query(body=body, ctes=tuple(ctes), order_by=order_by, limit=limit, offset=offset)

    def parse_order_item(self) -> n.OrderItem:
        expr = self.parse_expr()
        desc = False
        if self.take_kw("DESC"):
            desc = True
        else:
            self.take_kw("ASC")
        return n.OrderItem(expr, desc)

    def parse_select_core(self) -> n.SelectCore:
        self.expect_kw("SELECT")
        distinct = False
        if self.take_kw("DISTINCT"):
            distinct = True
        else:
            self.take_kw("ALL")

        items = [self.parse_select_item()]
        while self.take_op(","):
            items.append(self.parse_select_item())

        from_ = None
        if self.take_kw("FROM"):
            from_ = self.parse_table_expr()

        where = self.parse_expr() if self.take_kw("WHERE") else None

        group_by: tuple = ()
        if self.take_kw("GROUP"):
            self.expect_kw("BY")
            exprs = [self.parse_expr()]
            while self.take_op(","):
                exprs.append(self.parse_expr())
            group_by = tuple(exprs)

        having = self.parse_expr() if self.take_kw("HAVING") else None
        return n.SelectCore(
            items=tuple(items), distinct=distinct, from_=from_,
            where=where, group_by=group_by, having=having,
        )

    def parse_select_item(self):
        if self.take_op("*"):
            return n.SelectItem(n.Star(None))
        # qualified star: ident '.' '*'
        tok = self.peek()
        if tok.kind in ("IDENT", "QIDENT") and tok.upper not in RESERVED:
            if self.peek(1).kind == "OP" and self.peek(1).text == "." \
                    and self.peek(2).kind == "OP" and self.peek(2).text == "*":
                qual = self.ident()
                self.next()  # .
                self.next()  # *
                return n.SelectItem(n.Star(qual))
        expr = self.parse_expr()
        alias = None
        if self.take_kw("AS"):
            alias = self.ident()
        else:
            tok = self.peek()
            if tok.kind == "QIDENT" or (tok.kind == "IDENT" and tok.upper not in RESERVED):
                alias = self.ident()
        return n.SelectItem(expr, alias)

    # -- table expressions --------------------------------------------------

    def parse_table_expr(self):
        left = self.parse_table_ref()
        while True:
            if self.take_op(","):
                left = n.Join("cross", left, self.parse_table_ref())
                continue
            kind = None
            if self.at_kw("JOIN"):
                kind = "inner"
            elif self.at_kw("INNER", "LEFT", "RIGHT", "FULL", "CROSS"):
                kw = self.next().upper
                kind = kw.lower()
                self.take_kw("OUTER")
            if kind is None:
                break
            self.expect_kw("JOIN")
            right = self.parse_table_ref()
            on = None
            using: tuple = ()
            if self.take_kw("ON"):
                on = self.parse_expr()
            elif self.take_kw("USING"):
                self.expect_op("(")
                cols = [self.ident()]
                while self.take_op(","):
                    cols.append(self.ident())
                self.expect_op(")")
                using = tuple(cols)
            left = n.Join(kind, left, right, on, using)
        return left

    def parse_table_ref(self):
        if self.take_op("("):
            if self.at_kw("SELECT", "WITH"):
                sub = self.parse_query()
                self.expect_op(")")
                self.take_kw("AS")
                alias = self.ident()
                return n.DerivedTable(sub, alias)
            inner = self.parse_table_expr()
            self.expect_op(")")
            return inner
        name = self.ident()
        # dotted table names (db.table) collapse to the trailing part
        while self.take_op("."):
            name = self.ident()
        alias = None
        if self.take_kw("AS"):
            alias = self.ident()
        else:
            tok = self.peek()
            if tok.kind == "QIDENT" or (tok.kind == "IDENT" and tok.upper not in RESERVED):
                alias = self.ident()
        return n.BaseTable(name, alias)

    # -- expressions --------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.take_kw("OR"):
            left = n.Binary("or", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_not()
        while self.take_kw("AND"):
            left = n.Binary("and", left, self.parse_not())
        return left

    def parse_not(self):
        if self.take_kw("NOT"):
            return n.Unary("not", self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self):
        left = self.parse_additive()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("=", "<>", "!=", "<", "<=", ">", ">="):
                self.next()
                op = "<>" if tok.text == "!=" else tok.text
                left = n.Binary(op, left, self.parse_additive())
                continue
            negated = False
            save = self.i
            if self.take_kw("NOT"):
                negated = True
            if self.take_kw("IN"):
                self.expect_op("(")
                if self.at_kw("SELECT", "WITH"):
                    sub = self.parse_query()
                    self.expect_op(")")
                    left = n.InSubquery(left, sub, negated)
                else:
                    items = [self.parse_expr()]
                    while self.take_op(","):
                        items.append(self.parse_expr())
                    self.expect_op(")")
                    left = n.InList(left, tuple(items), negated)
                continue
            if self.take_kw("LIKE"):
                left = n.Like(left, self.parse_additive(), negated)
                continue
            if self.take_kw("BETWEEN"):
                low = self.parse_additive()
                self.expect_kw("AND")
                high = self.parse_additive()
                left = n.Between(left, low, high, negated)
                continue
            if negated:
                self.i = save  # NOT belonged to an enclosing context
                break
            if self.take_kw("IS"):
                neg = self.take_kw("NOT")
                self.expect_kw("NULL")
                left = n.IsNull(left, neg)
                continue
            break
        return left

    def parse_additive(self):
        left = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("+", "-", "||"):
                self.next()
                left = n.Binary(tok.text, left, self.parse_multiplicative())
            else:
                break
        return left

    def parse_multiplicative(self):
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("*", "/", "%"):
                self.next()
                left = n.Binary(tok.text, left, self.parse_unary())
            else:
                break
        return left

    def parse_unary(self):
        if self.at_op("-") or self.at_op("+"):
            op = self.next().text
            return n.Unary(op, self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()

        if tok.kind == "NUMBER":
            self.next()
            return n.Literal("num", float(tok.text))
        if tok.kind == "STRING":
            self.next()
            return n.Literal("str", tok.text)

        if self.take_op("("):
            if self.at_kw("SELECT", "WITH"):
                sub = self.parse_query()
                self.expect_op(")")
                return n.Subquery(sub)
            expr = self.parse_expr()
            self.expect_op(")")
            return expr

        if tok.kind == "IDENT":
            upper = tok.upper
            if upper == "NULL":
                self.next()
                return n.Literal("null", None)
            if upper in ("TRUE", "FALSE"):
                self.next()
                return n.Literal("bool", upper == "TRUE")
            if upper == "CASE":
                return self.parse_case()
            if upper == "CAST":
                self.next()
                self.expect_op("(")
                expr = self.parse_expr()
                self.expect_kw("AS")
                type_parts = [self.next().text]
                while not self.at_op(")") and self.peek().kind != "EOF":
                    type_parts.append(self.next().text)
                self.expect_op(")")
                return n.Cast(expr, " ".join(type_parts))
            if upper == "EXISTS":
                self.next()
                self.expect_op("(")
                sub = self.parse_query()
                self.expect_op(")")
                return n.Exists(sub)
            if upper == "NOT":
                self.next()
                return n.Unary("not", self.parse_not())

        # identifier: column reference or function call
        if tok.kind in ("IDENT", "QIDENT"):
            # function call: bare identifier followed by "(" (reserved words
            # like LEFT are not callable here; none of ours collide in practice)
            if tok.kind == "IDENT" and self.peek(1).kind == "OP" and self.peek(1).text == "(" \
                    and tok.upper not in RESERVED:
                name = self.next().text
                self.next()  # (
                return self.parse_func_tail(name)
            name = self.ident()
            if self.take_op("."):
                col = self.ident()
                return n.Column(name, col)
            return n.Column(None, name)

        raise SqlSyntaxError(f"unexpected token {tok.text!r}", tok.pos)

    def parse_func_tail(self, name: str):
        if self.take_op(")"):
            return n.Func(name)
        if self.take_op("*"):
            self.expect_op(")")
            return n.Func(name, star=True)
        distinct = self.take_kw("DISTINCT")
        args = [self.parse_expr()]
        while self.take_op(","):
            args.append(self.parse_expr())
        self.expect_op(")")
        return n.Func(name, tuple(args), distinct=distinct)

    def parse_case(self):
        self.expect_kw("CASE")
        operand = None
        if not self.at_kw("WHEN"):
            operand = self.parse_expr()
        whens = []
        while self.take_kw("WHEN"):
            cond = self.parse_expr()
            self.expect_kw("THEN")
            whens.append((cond, self.parse_expr()))
        if not whens:
            raise SqlSyntaxError("CASE without WHEN", self.peek().pos)
        else_ = self.parse_expr() if self.take_kw("ELSE") else None
        self.expect_kw("END")
        return n.Case(operand, tuple(whens), else_)


def parse(sql: str, dialect: str = "embedded") -> ParseResult:
    """Parse one SELECT statement; returns a diagnostic instead of raising."""
    if not sql or not sql.strip():
        return ParseResult(False, diagnostic=SqlDiagnostic(SYNTAX_ERROR, "empty statement"))
    try:
        tokens = tokenize(sql, dialect)
        query = _Parser(tokens).parse_statement()
        return ParseResult(True, statement=query)
    except SqlSyntaxError as exc:
        return ParseResult(
            False,
            diagnostic=SqlDiagnostic(SYNTAX_ERROR, str(exc), (exc.pos, exc.pos)),
        )
