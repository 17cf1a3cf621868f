"""Statement execution over the key-value store.

Every cell of a table lives at its own key, and row membership lives in
boolean "has" keys.  A scan reads the has key of every primary-key value
ever inserted (the registry), then the predicate columns of present
rows, then whatever the statement needs for passing rows.  All reads and
writes flow through the session handle, so the configured isolation
level applies cell by cell.

The registry is shared metadata, not store state: it only bounds which
has keys a scan must read.  Whether a row is visible is still decided by
the has-key read under the isolation level.
"""

from __future__ import annotations

import threading
from typing import Optional

from ..history import Value, is_value, values_equal
from ..store import SessionHandle
from .parser import (
    AndExpr,
    BeginTxn,
    ColumnRef,
    CommitTxn,
    Comparison,
    CreateTable,
    Delete,
    Insert,
    Literal,
    NotExpr,
    OrExpr,
    Predicate,
    Select,
    SqlError,
    SqlStatement,
    STAR,
    UnknownTable,
    Update,
    iter_statements,
    parse,
    predicate_columns,
)


class DuplicateKey(SqlError):
    """INSERT with a primary-key value the store already holds."""


class TableExists(SqlError):
    pass


class SqlTypeError(SqlError):
    """Ordered comparison over incompatible value types."""


# ---------------------------------------------------------------------------
# key encoding


def _escape(component: str) -> str:
    return component.replace("\\", "\\\\").replace(":", "\\:")


def encode_pk(value: Value) -> str:
    """Primary-key values rendered as key components.

    Plain decimal for ints and raw text for strings keeps keys readable
    (a table's key values are homogeneous in practice); ':' and '\\' are
    escaped so decoding stays unambiguous.
    """
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    return _escape(str(value))


def encode_cell_key(table: str, pkey_val: Value, column: str) -> str:
    return f"t:{_escape(table)}:r:{encode_pk(pkey_val)}:c:{_escape(column)}"


def encode_has_key(table: str, pkey_val: Value) -> str:
    return f"t:{_escape(table)}:has:{encode_pk(pkey_val)}"


# ---------------------------------------------------------------------------
# schema and registry


class Schema:
    """Table name -> ordered column list; the first column is the primary key."""

    def __init__(self):
        self._tables: dict[str, list[str]] = {}

    def add_table(self, name: str, columns: list[str]) -> None:
        if name in self._tables:
            raise TableExists(f"table {name!r} already exists")
        if not columns:
            raise SqlError("a table needs at least one column")
        if len(set(columns)) != len(columns):
            raise SqlError("column names must be unique")
        self._tables[name] = list(columns)

    def has_table(self, name: str) -> bool:
        return name in self._tables

    def columns(self, table: str) -> list[str]:
        try:
            return self._tables[table]
        except KeyError:
            raise UnknownTable(f"unknown table {table!r}") from None

    def pkey(self, table: str) -> str:
        return self.columns(table)[0]

    def tables(self) -> list[str]:
        return sorted(self._tables)


class TableRegistry:
    """Grow-only record of every primary-key value ever inserted per table.

    Guarded by its own lock because sessions on different threads insert
    concurrently; iteration order is ascending by key encoding so scans
    are deterministic.
    """

    def __init__(self):
        self._values: dict[str, dict[tuple, Value]] = {}
        self._mu = threading.Lock()

    def register(self, table: str, pkey_val: Value) -> None:
        if not is_value(pkey_val):
            raise SqlError(f"primary key must be a scalar, got {pkey_val!r}")
        shaped = (type(pkey_val).__name__, pkey_val)
        with self._mu:
            self._values.setdefault(table, {})[shaped] = pkey_val

    def values(self, table: str) -> list[Value]:
        with self._mu:
            vals = list(self._values.get(table, {}).values())
        return sorted(vals, key=encode_pk)


# ---------------------------------------------------------------------------
# set-variable operations over has keys


def set_add(session: SessionHandle, table: str, pkey_val: Value) -> bool:
    """Add a primary-key value; False when the store already shows it."""
    key = encode_has_key(table, pkey_val)
    if session.read(key) is True:
        return False
    session.write(key, True)
    return True


def set_remove(session: SessionHandle, table: str, pkey_val: Value) -> bool:
    """Remove a primary-key value; False when the store shows it absent."""
    key = encode_has_key(table, pkey_val)
    if session.read(key) is not True:
        return False
    session.write(key, False)
    return True


def set_elements(session: SessionHandle, table: str, registry: TableRegistry) -> list[Value]:
    """Primary-key values whose has key currently reads true."""
    out = []
    for value in registry.values(table):
        if session.read(encode_has_key(table, value)) is True:
            out.append(value)
    return out


# ---------------------------------------------------------------------------
# predicate evaluation


def _eval_comparison(cmp: Comparison, row: dict[str, Value]) -> bool:
    def resolve(side):
        if isinstance(side, ColumnRef):
            return row[side.name]
        return side.value

    left, right = resolve(cmp.left), resolve(cmp.right)
    if left is None or right is None:
        return False  # comparisons with null are false
    if cmp.op == "=":
        return values_equal(left, right)
    if cmp.op == "!=":
        return not values_equal(left, right)
    ordered_ok = (
        isinstance(left, str)
        and isinstance(right, str)
    ) or (
        isinstance(left, int)
        and isinstance(right, int)
        and not isinstance(left, bool)
        and not isinstance(right, bool)
    )
    if not ordered_ok:
        raise SqlTypeError(
            f"cannot order {left!r} against {right!r} with {cmp.op}"
        )
    if cmp.op == "<":
        return left < right
    if cmp.op == "<=":
        return left <= right
    if cmp.op == ">":
        return left > right
    return left >= right


def eval_predicate(pred: Optional[Predicate], row: dict[str, Value]) -> bool:
    if pred is None:
        return True
    if isinstance(pred, Comparison):
        return _eval_comparison(pred, row)
    if isinstance(pred, NotExpr):
        return not eval_predicate(pred.expr, row)
    if isinstance(pred, AndExpr):
        return all(eval_predicate(p, row) for p in pred.items)
    if isinstance(pred, OrExpr):
        return any(eval_predicate(p, row) for p in pred.items)
    raise SqlError(f"unknown predicate node {pred!r}")


# ---------------------------------------------------------------------------
# engine


class SqlEngine:
    """Schema + registry + statement execution for one store.

    Statements outside an explicit BEGIN run in an implicit transaction
    that always commits (there is no rollback in the model), including
    when the statement itself fails.
    """

    def __init__(self, schema: Optional[Schema] = None, registry: Optional[TableRegistry] = None):
        self.schema = schema or Schema()
        self.registry = registry or TableRegistry()

    def parse(self, text: str) -> SqlStatement:
        return parse(text, self.schema)

    def execute_text(self, session: SessionHandle, text: str):
        """Parse and run a script; returns the last statement's result."""
        result = None
        ran = False
        for stmt_text in iter_statements(text):
            result = self.execute(session, self.parse(stmt_text))
            ran = True
        if not ran:
            raise SqlError("empty statement")
        return result

    def execute(self, session: SessionHandle, stmt: SqlStatement):
        if isinstance(stmt, BeginTxn):
            session.begin()
            return None
        if isinstance(stmt, CommitTxn):
            session.commit()
            return None
        if isinstance(stmt, CreateTable):
            # DDL mutates local schema only; nothing reaches the store
            self.schema.add_table(stmt.table, list(stmt.columns))
            return None
        implicit = session.live_txn is None
        if implicit:
            session.begin()
        try:
            return self._run(session, stmt)
        finally:
            if implicit:
                session.commit()

    def _run(self, session: SessionHandle, stmt: SqlStatement):
        if isinstance(stmt, Select):
            return self._select(session, stmt)
        if isinstance(stmt, Insert):
            return self._insert(session, stmt)
        if isinstance(stmt, Delete):
            return self._delete(session, stmt)
        if isinstance(stmt, Update):
            return self._update(session, stmt)
        raise SqlError(f"unknown statement {stmt!r}")

    def _scan(self, session: SessionHandle, table: str, where):
        """Yield (pkey_val, predicate-column cells) for rows passing the filter."""
        where_cols = predicate_columns(where)
        for pkey_val in set_elements(session, table, self.registry):
            row = {
                c: session.read(encode_cell_key(table, pkey_val, c))
                for c in where_cols
            }
            if eval_predicate(where, row):
                yield pkey_val

    def _select(self, session: SessionHandle, stmt: Select) -> list[dict[str, Value]]:
        columns = (
            self.schema.columns(stmt.table)
            if stmt.columns is STAR
            else list(stmt.columns)
        )
        rows = []
        for pkey_val in self._scan(session, stmt.table, stmt.where):
            rows.append(
                {
                    c: session.read(encode_cell_key(stmt.table, pkey_val, c))
                    for c in columns
                }
            )
        return rows

    def _insert(self, session: SessionHandle, stmt: Insert) -> int:
        pkey_val = stmt.values[0]
        self.registry.register(stmt.table, pkey_val)
        if not set_add(session, stmt.table, pkey_val):
            raise DuplicateKey(
                f"table {stmt.table!r} already has a row with key {pkey_val!r}"
            )
        for column, value in zip(self.schema.columns(stmt.table), stmt.values):
            session.write(encode_cell_key(stmt.table, pkey_val, column), value)
        return 1

    def _delete(self, session: SessionHandle, stmt: Delete) -> int:
        count = 0
        for pkey_val in list(self._scan(session, stmt.table, stmt.where)):
            if set_remove(session, stmt.table, pkey_val):
                count += 1
        return count

    def _update(self, session: SessionHandle, stmt: Update) -> int:
        count = 0
        for pkey_val in list(self._scan(session, stmt.table, stmt.where)):
            for column, value in stmt.assignments:
                session.write(encode_cell_key(stmt.table, pkey_val, column), value)
            count += 1
        return count
