"""weakstore: a mock transactional key-value store for isolation testing.

The store answers each read with a value drawn at random from the set of
all values the configured isolation level permits, so a test suite can
observe weakly-isolated behaviors that a production store would almost
never produce.  The package also ships a SQL-subset front end compiled
onto the key-value core, an offline history checker, brute-force
enumeration oracles, and an HTTP/CLI surface.
"""

from .history import (
    History,
    HistoryError,
    HistoryFormatError,
    InvalidSource,
    LiveTransactionExists,
    Operation,
    TransactionLog,
    TxnNotLive,
    Value,
    new_history,
    prefix,
    reads_of,
    writes_of,
)
from .isolation import (
    CAUSAL,
    LEVELS,
    READ_COMMITTED,
    SERIALIZABILITY,
    Axiom,
    IsolationLevel,
    Verdict,
    Violation,
    brute_force_satisfies,
    derived_edges,
    get_level,
    satisfies,
    satisfies_with_order,
    valid_read_sources,
)
from .store import (
    InternalNoCandidate,
    NoLiveTransaction,
    SessionHandle,
    Store,
    StoreConfig,
)
from .program import Program, parse_program, program_to_json, run_program

__all__ = [
    "Axiom",
    "CAUSAL",
    "History",
    "HistoryError",
    "HistoryFormatError",
    "InternalNoCandidate",
    "InvalidSource",
    "IsolationLevel",
    "LEVELS",
    "LiveTransactionExists",
    "NoLiveTransaction",
    "Operation",
    "Program",
    "READ_COMMITTED",
    "SERIALIZABILITY",
    "SessionHandle",
    "Store",
    "StoreConfig",
    "TransactionLog",
    "TxnNotLive",
    "Value",
    "Verdict",
    "Violation",
    "brute_force_satisfies",
    "derived_edges",
    "get_level",
    "new_history",
    "parse_program",
    "prefix",
    "program_to_json",
    "reads_of",
    "run_program",
    "satisfies",
    "satisfies_with_order",
    "valid_read_sources",
    "writes_of",
]
