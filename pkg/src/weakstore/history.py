"""Execution-history data model.

A history records everything a program did to the store in one execution:
a transaction log per transaction (its operations in program order), a
session order grouping transactions into per-connection sequences, and a
write-read relation mapping every external read to the transaction whose
write supplied its value.  Isolation levels are judged against this
structure alone; the store keeps no other state.

Every history carries a distinguished initial transaction that
conceptually writes ``default_value`` to every key.  It is never
materialized: a key that no transaction has overwritten reads as the
default, sourced from the initial transaction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional, Union

Value = Union[int, str, bool, None]

READ = "r"
WRITE = "w"

_VALUE_TYPES = (bool, int, str)


class HistoryError(Exception):
    """Base class for violations of the history API contracts."""


class LiveTransactionExists(HistoryError):
    """A session tried to start a transaction while one is still open."""


class TxnNotLive(HistoryError):
    """An operation was appended to a committed (or unknown) transaction."""


class InvalidSource(HistoryError):
    """A read was given a source that cannot justify its value."""


class HistoryFormatError(HistoryError):
    """A serialized history does not match the expected schema."""


def is_value(v: Any) -> bool:
    return v is None or isinstance(v, _VALUE_TYPES)


def values_equal(a: Value, b: Value) -> bool:
    # bool is an int subclass in Python; 1 and True must stay distinct so
    # that equality survives serialization round-trips.
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _value_shape(v: Value):
    return (type(v).__name__, v)


@dataclass(frozen=True)
class Operation:
    """A single read or write event on one key."""

    op_id: int
    kind: str  # READ or WRITE
    key: str
    value: Value

    def is_read(self) -> bool:
        return self.kind == READ

    def is_write(self) -> bool:
        return self.kind == WRITE

    def __repr__(self) -> str:
        return f"{self.kind}#{self.op_id}({self.key}={self.value!r})"


@dataclass
class TransactionLog:
    """A transaction identifier plus its operations in program order."""

    txn_id: int
    ops: list[Operation] = field(default_factory=list)
    committed: bool = False


def reads_of(txn: TransactionLog) -> list[Operation]:
    """External reads of a transaction, in program order.

    A read is external unless an earlier operation of the same
    transaction wrote the same key; such covered reads take their value
    from inside the transaction and never carry a write-read edge.
    """
    written: set[str] = set()
    out = []
    for op in txn.ops:
        if op.kind == WRITE:
            written.add(op.key)
        elif op.key not in written:
            out.append(op)
    return out


def writes_of(txn: TransactionLog) -> dict[str, Operation]:
    """The final write per key, as a key -> operation mapping.

    When a transaction writes a key several times, only the last write is
    visible to other transactions.
    """
    out: dict[str, Operation] = {}
    for op in txn.ops:
        if op.kind == WRITE:
            out[op.key] = op
    return out


def new_history(default_value: Value) -> "History":
    """A fresh history holding only the initial transaction."""
    return History(default_value)


class History:
    """Transaction logs + session order + write-read relation.

    Mutations preserve the structural invariants by construction: reads
    may only source committed transactions, so the write-read relation
    always points backwards in time and its union with the session order
    stays acyclic.  Arbitrary (e.g. deserialized) instances are validated
    by :meth:`check_well_formed`.

    A History is single-writer: one logical thread mutates it at a time.
    """

    def __init__(self, default_value: Value = None, init_txn_id: int = 0):
        if not is_value(default_value):
            raise HistoryError(f"default value must be a scalar, got {default_value!r}")
        self.default_value = default_value
        self.init_txn = init_txn_id
        self._txns: dict[int, TransactionLog] = {
            init_txn_id: TransactionLog(init_txn_id, [], committed=True)
        }
        self._sessions: dict[str, list[int]] = {}
        self._session_of: dict[int, str] = {}
        self._wr: dict[int, int] = {}  # read op id -> source txn id
        self._ops: dict[int, tuple[int, Operation]] = {}  # op id -> (txn id, op)
        self._writers: dict[str, set[int]] = {}  # key -> txn ids with any write
        self._next_txn = init_txn_id + 1
        self._next_op = 0

    # ------------------------------------------------------------------
    # queries

    def txn(self, txn_id: int) -> TransactionLog:
        return self._txns[txn_id]

    def txn_ids(self) -> list[int]:
        return sorted(self._txns)

    def __len__(self) -> int:
        return len(self._txns)

    def __contains__(self, txn_id: int) -> bool:
        return txn_id in self._txns

    @property
    def sessions(self) -> dict[str, tuple[int, ...]]:
        return {s: tuple(seq) for s, seq in self._sessions.items()}

    def session_of(self, txn_id: int) -> Optional[str]:
        """Session id of a transaction; None for the initial transaction."""
        return self._session_of.get(txn_id)

    def session_position(self, txn_id: int) -> int:
        return self._sessions[self._session_of[txn_id]].index(txn_id)

    def is_committed(self, txn_id: int) -> bool:
        return self._txns[txn_id].committed

    def operation(self, op_id: int) -> tuple[int, Operation]:
        """(owning txn id, operation) for an operation id."""
        return self._ops[op_id]

    def last_write(self, txn_id: int, key: str) -> Optional[Operation]:
        for op in reversed(self._txns[txn_id].ops):
            if op.kind == WRITE and op.key == key:
                return op
        return None

    def writes_key(self, txn_id: int, key: str) -> bool:
        if txn_id == self.init_txn:
            return True  # initial transaction writes every key
        return txn_id in self._writers.get(key, ())

    def final_write_value(self, txn_id: int, key: str) -> Value:
        if txn_id == self.init_txn:
            return self.default_value
        op = self.last_write(txn_id, key)
        if op is None:
            raise KeyError(f"txn {txn_id} has no write to {key!r}")
        return op.value

    def key_writers(self, key: str) -> list[int]:
        """Transactions with an explicit write to key (initial txn excluded)."""
        return sorted(self._writers.get(key, ()))

    def external_reads(self, txn_id: int) -> list[Operation]:
        return reads_of(self._txns[txn_id])

    def wr_source(self, op_id: int) -> int:
        return self._wr[op_id]

    def wr_items(self) -> Iterator[tuple[int, int]]:
        """(read op id, source txn id) pairs."""
        return iter(self._wr.items())

    def lift_wr(self, key: Optional[str] = None) -> set[tuple[int, int]]:
        """Write-read pairs lifted to transactions, optionally per key."""
        out = set()
        for op_id, src in self._wr.items():
            reader, op = self._ops[op_id]
            if key is None or op.key == key:
                out.add((src, reader))
        return out

    def so_edges(self) -> list[tuple[int, int]]:
        """Covering edges of the session order.

        The initial transaction precedes every session's first transaction,
        and each session's transactions chain in sequence; the full order
        is the transitive closure of these edges.
        """
        edges = []
        for seq in self._sessions.values():
            prev = self.init_txn
            for tid in seq:
                edges.append((prev, tid))
                prev = tid
        return edges

    def so_pairs(self) -> set[tuple[int, int]]:
        """The session order as a full relation on transactions."""
        pairs = set()
        for tid in self._txns:
            if tid != self.init_txn:
                pairs.add((self.init_txn, tid))
        for seq in self._sessions.values():
            for i, a in enumerate(seq):
                for b in seq[i + 1 :]:
                    pairs.add((a, b))
        return pairs

    def live_txn(self, session: str) -> Optional[int]:
        seq = self._sessions.get(session)
        if seq and not self._txns[seq[-1]].committed:
            return seq[-1]
        return None

    # ------------------------------------------------------------------
    # mutation

    def begin_txn(self, session: str) -> int:
        """Append a fresh empty transaction to a session's sequence."""
        seq = self._sessions.setdefault(session, [])
        if seq and not self._txns[seq[-1]].committed:
            raise LiveTransactionExists(
                f"session {session!r} already has live transaction {seq[-1]}"
            )
        tid = self._next_txn
        self._next_txn += 1
        self._txns[tid] = TransactionLog(tid)
        seq.append(tid)
        self._session_of[tid] = session
        return tid

    def _require_live(self, txn_id: int) -> TransactionLog:
        txn = self._txns.get(txn_id)
        if txn is None or txn.committed:
            raise TxnNotLive(f"transaction {txn_id} is not live")
        return txn

    def append_write(self, txn_id: int, key: str, value: Value) -> int:
        txn = self._require_live(txn_id)
        if not isinstance(key, str) or not key:
            raise HistoryError(f"key must be a non-empty string, got {key!r}")
        if not is_value(value):
            raise HistoryError(f"value must be a scalar, got {value!r}")
        op = Operation(self._next_op, WRITE, key, value)
        self._next_op += 1
        txn.ops.append(op)
        self._ops[op.op_id] = (txn_id, op)
        self._writers.setdefault(key, set()).add(txn_id)
        return op.op_id

    def append_read(self, txn_id: int, key: str, value: Value, source: int) -> int:
        """Append an external read with its write-read source.

        The source must be committed, distinct from the reader, and its
        final write to the key must carry exactly this value (the initial
        transaction supplies the default for every key).
        """
        txn = self._require_live(txn_id)
        if source == txn_id:
            raise InvalidSource("a transaction cannot source its own read")
        src = self._txns.get(source)
        if src is None:
            raise InvalidSource(f"unknown source transaction {source}")
        if not src.committed:
            raise InvalidSource(f"source transaction {source} is not committed")
        if self.last_write(txn_id, key) is not None:
            raise InvalidSource(
                f"txn {txn_id} already wrote {key!r}; in-transaction reads are local"
            )
        if source == self.init_txn:
            if not values_equal(value, self.default_value):
                raise InvalidSource(
                    f"initial transaction writes {self.default_value!r} to {key!r}, "
                    f"not {value!r}"
                )
        else:
            w = self.last_write(source, key)
            if w is None:
                raise InvalidSource(f"txn {source} has no write to {key!r}")
            if not values_equal(w.value, value):
                raise InvalidSource(
                    f"txn {source} last wrote {w.value!r} to {key!r}, not {value!r}"
                )
        op = Operation(self._next_op, READ, key, value)
        self._next_op += 1
        txn.ops.append(op)
        self._ops[op.op_id] = (txn_id, op)
        self._wr[op.op_id] = source
        return op.op_id

    def append_local_read(self, txn_id: int, key: str) -> Operation:
        """Record a read covered by this transaction's own write.

        Carries no write-read edge; the value is the last in-transaction
        write to the key.
        """
        txn = self._require_live(txn_id)
        w = self.last_write(txn_id, key)
        if w is None:
            raise HistoryError(f"txn {txn_id} has no write to {key!r} to read locally")
        op = Operation(self._next_op, READ, key, w.value)
        self._next_op += 1
        txn.ops.append(op)
        self._ops[op.op_id] = (txn_id, op)
        return op

    def commit_txn(self, txn_id: int) -> None:
        self._require_live(txn_id).committed = True

    # ------------------------------------------------------------------
    # undo hooks for tentative extension (enumerators, read validation)

    def _pop_last_op(self, txn_id: int) -> None:
        txn = self._txns[txn_id]
        op = txn.ops.pop()
        assert op.op_id == self._next_op - 1, "ops must be retracted in LIFO order"
        self._next_op -= 1
        del self._ops[op.op_id]
        self._wr.pop(op.op_id, None)
        if op.kind == WRITE and self.last_write(txn_id, op.key) is None:
            self._writers[op.key].discard(txn_id)

    def _pop_last_txn(self, session: str) -> None:
        seq = self._sessions[session]
        tid = seq.pop()
        assert tid == self._next_txn - 1, "txns must be retracted in LIFO order"
        assert not self._txns[tid].ops, "retract ops before retracting the txn"
        self._next_txn -= 1
        del self._txns[tid]
        del self._session_of[tid]
        if not seq:
            del self._sessions[session]

    def _set_committed(self, txn_id: int, flag: bool) -> None:
        self._txns[txn_id].committed = flag

    # ------------------------------------------------------------------
    # validation

    def check_well_formed(self) -> None:
        """Raise HistoryError if any structural invariant is broken."""
        init = self._txns.get(self.init_txn)
        if init is None or not init.committed or init.ops:
            raise HistoryError("initial transaction must exist, be committed, and be empty")
        if self.init_txn in self._session_of:
            raise HistoryError("initial transaction must not belong to a session")
        for tid, txn in self._txns.items():
            if tid != self.init_txn and self._session_of.get(tid) is None:
                raise HistoryError(f"transaction {tid} belongs to no session")
            written: set[str] = set()
            last: dict[str, Value] = {}
            for op in txn.ops:
                if op.kind == WRITE:
                    written.add(op.key)
                    last[op.key] = op.value
                elif op.key in written:
                    if not values_equal(op.value, last[op.key]):
                        raise HistoryError(
                            f"covered read {op!r} in txn {tid} does not return the "
                            f"last in-transaction write {last[op.key]!r}"
                        )
                    if op.op_id in self._wr:
                        raise HistoryError(
                            f"covered read {op!r} in txn {tid} must not carry a "
                            "write-read edge"
                        )
                else:
                    if op.op_id not in self._wr:
                        raise HistoryError(
                            f"external read {op!r} in txn {tid} has no source"
                        )
        for op_id, src_id in self._wr.items():
            reader, op = self._ops[op_id]
            if not op.is_read():
                raise HistoryError(f"write-read edge on non-read operation {op!r}")
            if src_id == reader:
                raise HistoryError(f"read {op!r} sources its own transaction")
            src = self._txns.get(src_id)
            if src is None:
                raise HistoryError(f"read {op!r} sources unknown transaction {src_id}")
            if not src.committed:
                raise HistoryError(f"read {op!r} sources uncommitted transaction {src_id}")
            if src_id == self.init_txn:
                if not values_equal(op.value, self.default_value):
                    raise HistoryError(
                        f"read {op!r} sources the initial transaction but does not "
                        f"return the default value {self.default_value!r}"
                    )
            else:
                w = self.last_write(src_id, op.key)
                if w is None or not values_equal(w.value, op.value):
                    raise HistoryError(
                        f"read {op!r} does not match the final write of txn {src_id}"
                    )
        if self._cycle_in(self.so_edges() + sorted(self.lift_wr())) is not None:
            raise HistoryError("session order and write-read relation form a cycle")

    def _cycle_in(self, edges: Iterable[tuple[int, int]]) -> Optional[list[int]]:
        adj: dict[int, list[int]] = {tid: [] for tid in self._txns}
        for a, b in edges:
            adj[a].append(b)
        WHITE, GREY, BLACK = 0, 1, 2
        color = {tid: WHITE for tid in adj}
        stack: list[int] = []

        def visit(node: int) -> Optional[list[int]]:
            color[node] = GREY
            stack.append(node)
            for nxt in adj[node]:
                if color[nxt] == GREY:
                    return stack[stack.index(nxt) :]
                if color[nxt] == WHITE:
                    found = visit(nxt)
                    if found is not None:
                        return found
            stack.pop()
            color[node] = BLACK
            return None

        for tid in sorted(adj):
            if color[tid] == WHITE:
                found = visit(tid)
                if found is not None:
                    return found
        return None

    # ------------------------------------------------------------------
    # serialization

    def serialize(self) -> dict:
        sessions = []
        for seq in self._sessions.values():
            sessions.append(
                [
                    {
                        "id": tid,
                        "ops": [
                            {"op": op.kind, "key": op.key, "value": op.value, "id": op.op_id}
                            for op in self._txns[tid].ops
                        ],
                        "committed": self._txns[tid].committed,
                    }
                    for tid in seq
                ]
            )
        return {
            "sessions": sessions,
            "wr": [
                {"read_op": op_id, "source_txn": src}
                for op_id, src in sorted(self._wr.items())
            ],
            "init": {"txn": self.init_txn, "default": self.default_value},
        }

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps(self.serialize(), indent=indent)

    @classmethod
    def parse(cls, data: Any) -> "History":
        """Rebuild a history from its serialized form, validating strictly.

        Unknown fields and any structural violation raise
        HistoryFormatError.
        """

        def fail(msg: str) -> HistoryFormatError:
            return HistoryFormatError(msg)

        if not isinstance(data, dict):
            raise fail("history must be a JSON object")
        if set(data) != {"sessions", "wr", "init"}:
            raise fail(f"history object must have exactly the fields sessions/wr/init, got {sorted(data)}")
        init = data["init"]
        if not isinstance(init, dict) or set(init) != {"txn", "default"}:
            raise fail("init must be an object with fields txn/default")
        if not isinstance(init["txn"], int) or isinstance(init["txn"], bool):
            raise fail("init.txn must be an integer")
        if not is_value(init["default"]):
            raise fail("init.default must be a scalar")
        h = cls(init["default"], init_txn_id=init["txn"])
        if not isinstance(data["sessions"], list):
            raise fail("sessions must be an array of arrays")
        max_op = -1
        for i, seq in enumerate(data["sessions"]):
            if not isinstance(seq, list):
                raise fail("sessions must be an array of arrays")
            session = str(i)
            for txn_obj in seq:
                if not isinstance(txn_obj, dict) or set(txn_obj) != {"id", "ops", "committed"}:
                    raise fail("transaction must be an object with fields id/ops/committed")
                tid = txn_obj["id"]
                if not isinstance(tid, int) or isinstance(tid, bool):
                    raise fail("transaction id must be an integer")
                if tid in h._txns:
                    raise fail(f"duplicate transaction id {tid}")
                if not isinstance(txn_obj["committed"], bool):
                    raise fail("committed must be a boolean")
                if not isinstance(txn_obj["ops"], list):
                    raise fail("ops must be an array")
                ops = []
                for op_obj in txn_obj["ops"]:
                    if not isinstance(op_obj, dict) or set(op_obj) != {"op", "key", "value", "id"}:
                        raise fail("operation must be an object with fields op/key/value/id")
                    if op_obj["op"] not in (READ, WRITE):
                        raise fail(f"operation kind must be '{READ}' or '{WRITE}'")
                    if not isinstance(op_obj["key"], str) or not op_obj["key"]:
                        raise fail("operation key must be a non-empty string")
                    if not is_value(op_obj["value"]):
                        raise fail("operation value must be a scalar")
                    op_id = op_obj["id"]
                    if not isinstance(op_id, int) or isinstance(op_id, bool):
                        raise fail("operation id must be an integer")
                    if op_id in h._ops:
                        raise fail(f"duplicate operation id {op_id}")
                    op = Operation(op_id, op_obj["op"], op_obj["key"], op_obj["value"])
                    ops.append(op)
                    h._ops[op_id] = (tid, op)
                    max_op = max(max_op, op_id)
                    if op.kind == WRITE:
                        h._writers.setdefault(op.key, set()).add(tid)
                h._txns[tid] = TransactionLog(tid, ops, committed=txn_obj["committed"])
                h._sessions.setdefault(session, []).append(tid)
                h._session_of[tid] = session
        if not isinstance(data["wr"], list):
            raise fail("wr must be an array")
        for entry in data["wr"]:
            if not isinstance(entry, dict) or set(entry) != {"read_op", "source_txn"}:
                raise fail("wr entry must be an object with fields read_op/source_txn")
            op_id, src = entry["read_op"], entry["source_txn"]
            if op_id not in h._ops:
                raise fail(f"wr entry references unknown operation {op_id}")
            if src not in h._txns:
                raise fail(f"wr entry references unknown transaction {src}")
            if op_id in h._wr:
                raise fail(f"operation {op_id} has multiple write-read sources")
            h._wr[op_id] = src
        h._next_txn = max(h._txns) + 1
        h._next_op = max_op + 1
        try:
            h.check_well_formed()
        except HistoryError as exc:
            raise fail(str(exc)) from exc
        return h

    @classmethod
    def parse_json(cls, text: str) -> "History":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise HistoryFormatError(f"invalid JSON: {exc}") from exc
        return cls.parse(data)

    # ------------------------------------------------------------------
    # structural equality (session names are not part of the structure)

    def _shape(self):
        return (
            _value_shape(self.default_value),
            self.init_txn,
            tuple(
                tuple(
                    (
                        tid,
                        self._txns[tid].committed,
                        tuple(
                            (op.op_id, op.kind, op.key, _value_shape(op.value))
                            for op in self._txns[tid].ops
                        ),
                    )
                    for tid in seq
                )
                for seq in self._sessions.values()
            ),
            tuple(sorted(self._wr.items())),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, History):
            return NotImplemented
        return self._shape() == other._shape()

    __hash__ = None  # type: ignore[assignment]


def prefix(h: History, co: Iterable[int], n: int) -> tuple[History, tuple[int, ...]]:
    """Restrict a (history, commit order) pair to the first n transactions.

    The commit order must cover exactly the history's transactions and
    extend its session order and write-read relation; otherwise the
    restriction would orphan reads or sessions and a ValueError is raised.
    """
    co = tuple(co)
    if sorted(co) != sorted(h.txn_ids()):
        raise ValueError("commit order must cover exactly the history's transactions")
    if not 0 < n <= len(co):
        raise ValueError(f"prefix length {n} out of range")
    keep = set(co[:n])
    if h.init_txn not in keep:
        raise ValueError("prefix must retain the initial transaction")
    out = History(h.default_value, init_txn_id=h.init_txn)
    for session, seq in h.sessions.items():
        kept_seq = [tid for tid in seq if tid in keep]
        for i, tid in enumerate(seq):
            if tid in keep and any(t not in keep for t in seq[:i]):
                raise ValueError("commit order does not extend the session order")
        for tid in kept_seq:
            txn = h.txn(tid)
            out._txns[tid] = TransactionLog(tid, list(txn.ops), committed=txn.committed)
            out._sessions.setdefault(session, []).append(tid)
            out._session_of[tid] = session
            for op in txn.ops:
                out._ops[op.op_id] = (tid, op)
                if op.kind == WRITE:
                    out._writers.setdefault(op.key, set()).add(tid)
    for op_id, src in h.wr_items():
        reader, _ = h.operation(op_id)
        if reader in keep:
            if src not in keep:
                raise ValueError("commit order does not extend the write-read relation")
            out._wr[op_id] = src
    out._next_txn = max(out._txns) + 1
    out._next_op = max((op_id for op_id in out._ops), default=-1) + 1
    out.check_well_formed()
    return out, co[:n]
