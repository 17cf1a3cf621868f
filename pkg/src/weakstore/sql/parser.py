"""Hand-rolled tokenizer and recursive-descent parser for the SQL subset.

Supported statement forms, case-insensitive keywords, ';'-terminated:

    CREATE TABLE t (c1, c2, ...)          -- first column is the primary key
    SELECT c, ... | * FROM t [WHERE p]
    INSERT INTO t VALUES (v, ...)
    DELETE FROM t [WHERE p]
    UPDATE t SET c = v, ... [WHERE p]
    BEGIN
    COMMIT

Predicates combine column-vs-constant and column-vs-column comparisons
(=, !=, <>, <, <=, >, >=) with AND/OR/NOT and parentheses.  Joins,
nested queries, and aggregation are rejected up front.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from ..history import Value


class SqlError(Exception):
    """Base class for SQL front-end failures."""


class SqlSyntaxError(SqlError):
    def __init__(self, message: str, position: int, expected: Optional[str] = None):
        self.position = position
        self.expected = expected
        suffix = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at position {position}{suffix}")


class UnknownTable(SqlError):
    pass


class UnknownColumn(SqlError):
    pass


STAR = "*"

_UNSUPPORTED = {
    "join",
    "inner",
    "outer",
    "cross",
    "union",
    "group",
    "order",
    "having",
    "limit",
    "distinct",
}

_RESERVED = _UNSUPPORTED | {
    "select",
    "from",
    "where",
    "insert",
    "into",
    "values",
    "delete",
    "update",
    "set",
    "create",
    "table",
    "and",
    "or",
    "not",
    "begin",
    "commit",
    "true",
    "false",
    "null",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>'(?:[^']|'')*')
  | (?P<sym><=|>=|!=|<>|=|<|>|\(|\)|,|;|\*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int | ident | str | sym | end
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        out.append(Token(kind, m.group(), m.start()))
    out.append(Token("end", "", len(text)))
    return out


# ---------------------------------------------------------------------------
# statement forms


@dataclass(frozen=True)
class ColumnRef:
    name: str


@dataclass(frozen=True)
class Literal:
    value: Value


Operand = Union[ColumnRef, Literal]


@dataclass(frozen=True)
class Comparison:
    op: str  # = != < <= > >=
    left: Operand
    right: Operand


@dataclass(frozen=True)
class NotExpr:
    expr: "Predicate"


@dataclass(frozen=True)
class AndExpr:
    items: tuple["Predicate", ...]


@dataclass(frozen=True)
class OrExpr:
    items: tuple["Predicate", ...]


Predicate = Union[Comparison, NotExpr, AndExpr, OrExpr]


@dataclass(frozen=True)
class Select:
    columns: "tuple[str, ...] | str"  # column names or STAR
    table: str
    where: Optional[Predicate]


@dataclass(frozen=True)
class Insert:
    table: str
    values: tuple[Value, ...]


@dataclass(frozen=True)
class Delete:
    table: str
    where: Optional[Predicate]


@dataclass(frozen=True)
class Update:
    table: str
    assignments: tuple[tuple[str, Value], ...]
    where: Optional[Predicate]


@dataclass(frozen=True)
class CreateTable:
    table: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class BeginTxn:
    pass


@dataclass(frozen=True)
class CommitTxn:
    pass


SqlStatement = Union[Select, Insert, Delete, Update, CreateTable, BeginTxn, CommitTxn]


def predicate_columns(pred: Optional[Predicate]) -> list[str]:
    """Column names referenced by a predicate, in first-appearance order."""
    out: list[str] = []

    def walk(p) -> None:
        if isinstance(p, Comparison):
            for side in (p.left, p.right):
                if isinstance(side, ColumnRef) and side.name not in out:
                    out.append(side.name)
        elif isinstance(p, NotExpr):
            walk(p.expr)
        elif isinstance(p, (AndExpr, OrExpr)):
            for item in p.items:
                walk(item)

    if pred is not None:
        walk(pred)
    return out


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list[Token], schema):
        self.tokens = tokens
        self.i = 0
        self.schema = schema

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, expected: str) -> SqlSyntaxError:
        tok = self.peek()
        got = tok.value or "end of input"
        return SqlSyntaxError(f"unexpected {got!r}", tok.pos, expected)

    def keyword(self) -> Optional[str]:
        tok = self.peek()
        if tok.kind == "ident":
            return tok.value.lower()
        return None

    def expect_keyword(self, word: str) -> None:
        if self.keyword() != word:
            raise self.error(word.upper())
        self.next()

    def expect_sym(self, sym: str) -> None:
        tok = self.peek()
        if tok.kind != "sym" or tok.value != sym:
            raise self.error(repr(sym))
        self.next()

    def ident(self, what: str) -> str:
        self.check_unsupported()
        tok = self.peek()
        if tok.kind != "ident" or tok.value.lower() in _RESERVED:
            raise self.error(what)
        return self.next().value

    def check_unsupported(self) -> None:
        word = self.keyword()
        if word in _UNSUPPORTED:
            raise SqlSyntaxError(f"unsupported: {word.upper()}", self.peek().pos)

    # -- literals ----------------------------------------------------------

    def literal(self) -> Value:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return int(tok.value)
        if tok.kind == "str":
            self.next()
            return tok.value[1:-1].replace("''", "'")
        word = self.keyword()
        if word in ("true", "false"):
            self.next()
            return word == "true"
        if word == "null":
            self.next()
            return None
        raise self.error("a literal")

    # -- predicates --------------------------------------------------------

    def predicate(self, table: str) -> Predicate:
        items = [self.and_expr(table)]
        while self.keyword() == "or":
            self.next()
            items.append(self.and_expr(table))
        return items[0] if len(items) == 1 else OrExpr(tuple(items))

    def and_expr(self, table: str) -> Predicate:
        items = [self.not_expr(table)]
        while self.keyword() == "and":
            self.next()
            items.append(self.not_expr(table))
        return items[0] if len(items) == 1 else AndExpr(tuple(items))

    def not_expr(self, table: str) -> Predicate:
        if self.keyword() == "not":
            self.next()
            return NotExpr(self.not_expr(table))
        tok = self.peek()
        if tok.kind == "sym" and tok.value == "(":
            self.next()
            inner = self.predicate(table)
            self.expect_sym(")")
            return inner
        return self.comparison(table)

    def comparison(self, table: str) -> Comparison:
        left = self.operand(table)
        tok = self.peek()
        if tok.kind != "sym" or tok.value not in ("=", "!=", "<>", "<", "<=", ">", ">="):
            raise self.error("a comparison operator")
        self.next()
        op = "!=" if tok.value == "<>" else tok.value
        right = self.operand(table)
        return Comparison(op, left, right)

    def operand(self, table: str) -> Operand:
        self.check_unsupported()
        tok = self.peek()
        if tok.kind == "ident" and tok.value.lower() not in (
            "true",
            "false",
            "null",
        ):
            name = self.next().value
            self.check_column(table, name)
            return ColumnRef(name)
        return Literal(self.literal())

    # -- schema lookups ----------------------------------------------------

    def check_table(self, name: str) -> None:
        if not self.schema.has_table(name):
            raise UnknownTable(f"unknown table {name!r}")

    def check_column(self, table: str, column: str) -> None:
        if column not in self.schema.columns(table):
            raise UnknownColumn(f"unknown column {column!r} in table {table!r}")

    # -- statements --------------------------------------------------------

    def statement(self) -> SqlStatement:
        self.check_unsupported()
        word = self.keyword()
        if word == "select":
            return self.select()
        if word == "insert":
            return self.insert()
        if word == "delete":
            return self.delete()
        if word == "update":
            return self.update()
        if word == "create":
            return self.create()
        if word == "begin":
            self.next()
            return BeginTxn()
        if word == "commit":
            self.next()
            return CommitTxn()
        raise self.error("a statement keyword")

    def select(self) -> Select:
        self.expect_keyword("select")
        self.check_unsupported()
        tok = self.peek()
        columns: "tuple[str, ...] | str"
        if tok.kind == "sym" and tok.value == "*":
            self.next()
            columns = STAR
            names: list[str] = []
        else:
            if tok.kind == "sym" and tok.value == "(":
                raise SqlSyntaxError("unsupported: nested query", tok.pos)
            names = [self.ident("a column name")]
            while self.peek().value == "," and self.peek().kind == "sym":
                self.next()
                names.append(self.ident("a column name"))
            columns = tuple(names)
        self.expect_keyword("from")
        table = self.ident("a table name")
        self.check_table(table)
        self.check_unsupported()
        for name in names:
            self.check_column(table, name)
        where = None
        if self.keyword() == "where":
            self.next()
            where = self.predicate(table)
        self.finish()
        return Select(columns, table, where)

    def insert(self) -> Insert:
        self.expect_keyword("insert")
        self.expect_keyword("into")
        table = self.ident("a table name")
        self.check_table(table)
        self.expect_keyword("values")
        self.expect_sym("(")
        values = [self.literal()]
        while self.peek().kind == "sym" and self.peek().value == ",":
            self.next()
            values.append(self.literal())
        self.expect_sym(")")
        self.finish()
        width = len(self.schema.columns(table))
        if len(values) != width:
            raise SqlSyntaxError(
                f"INSERT supplies {len(values)} values for {width} columns",
                self.peek().pos,
            )
        return Insert(table, tuple(values))

    def delete(self) -> Delete:
        self.expect_keyword("delete")
        self.expect_keyword("from")
        table = self.ident("a table name")
        self.check_table(table)
        where = None
        if self.keyword() == "where":
            self.next()
            where = self.predicate(table)
        self.finish()
        return Delete(table, where)

    def update(self) -> Update:
        self.expect_keyword("update")
        table = self.ident("a table name")
        self.check_table(table)
        self.expect_keyword("set")
        assignments = [self.assignment(table)]
        while self.peek().kind == "sym" and self.peek().value == ",":
            self.next()
            assignments.append(self.assignment(table))
        where = None
        if self.keyword() == "where":
            self.next()
            where = self.predicate(table)
        self.finish()
        return Update(table, tuple(assignments), where)

    def assignment(self, table: str) -> tuple[str, Value]:
        column = self.ident("a column name")
        self.check_column(table, column)
        self.expect_sym("=")
        return (column, self.literal())

    def create(self) -> CreateTable:
        self.expect_keyword("create")
        self.expect_keyword("table")
        table = self.ident("a table name")
        self.expect_sym("(")
        columns = [self.ident("a column name")]
        while self.peek().kind == "sym" and self.peek().value == ",":
            self.next()
            columns.append(self.ident("a column name"))
        self.expect_sym(")")
        self.finish()
        if len(set(columns)) != len(columns):
            raise SqlSyntaxError("duplicate column names", self.peek().pos)
        return CreateTable(table, tuple(columns))

    def finish(self) -> None:
        if self.peek().kind == "sym" and self.peek().value == ";":
            self.next()
        self.check_unsupported()
        if self.peek().kind != "end":
            raise self.error("end of statement")


def parse(text: str, schema) -> SqlStatement:
    """Parse one statement against a schema; table and column references
    must resolve."""
    return _Parser(tokenize(text), schema).statement()


def iter_statements(text: str):
    """Split a script on ';' terminators, respecting string literals."""
    current = []
    in_string = False
    i = 0
    while i < len(text):
        ch = text[i]
        if in_string:
            current.append(ch)
            if ch == "'":
                if i + 1 < len(text) and text[i + 1] == "'":
                    current.append("'")
                    i += 1
                else:
                    in_string = False
        elif ch == "'":
            in_string = True
            current.append(ch)
        elif ch == ";":
            stmt = "".join(current).strip()
            if stmt:
                yield stmt
            current = []
        else:
            current.append(ch)
        i += 1
    tail = "".join(current).strip()
    if tail:
        yield tail
