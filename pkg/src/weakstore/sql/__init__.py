"""SQL-subset front end compiled onto the key-value store.

A table is a set of primary-key values plus one key per cell.  Row
membership lives in boolean "has" keys (the set's characteristic
function), so every statement turns into plain reads and writes that the
configured isolation level governs cell by cell.
"""

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
    Select,
    SqlError,
    SqlStatement,
    SqlSyntaxError,
    STAR,
    UnknownColumn,
    UnknownTable,
    Update,
    iter_statements,
    parse,
)
from .engine import (
    DuplicateKey,
    Schema,
    SqlEngine,
    SqlTypeError,
    TableExists,
    TableRegistry,
    encode_cell_key,
    encode_has_key,
    encode_pk,
    set_add,
    set_elements,
    set_remove,
)

__all__ = [
    "AndExpr",
    "BeginTxn",
    "ColumnRef",
    "CommitTxn",
    "Comparison",
    "CreateTable",
    "Delete",
    "DuplicateKey",
    "Insert",
    "Literal",
    "NotExpr",
    "OrExpr",
    "STAR",
    "Schema",
    "Select",
    "SqlEngine",
    "SqlError",
    "SqlStatement",
    "SqlSyntaxError",
    "SqlTypeError",
    "TableExists",
    "TableRegistry",
    "UnknownColumn",
    "UnknownTable",
    "Update",
    "encode_cell_key",
    "encode_has_key",
    "encode_pk",
    "iter_statements",
    "parse",
    "set_add",
    "set_elements",
    "set_remove",
]
