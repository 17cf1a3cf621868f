"""Isolation levels as constraint systems over histories.

A level is a conjunction of axioms.  Each axiom is a universally
quantified implication of one fixed shape: whenever a read takes its
value from transaction t1 on key k, every other transaction t2 that also
writes k and stands in a level-specific relation phi to the reading
point must commit before t1.  A history satisfies a level iff some
strict total order over its transactions (a commit order) extends the
write-read relation and the session order while meeting every such
constraint.

For Read Committed and Causal, phi never mentions the commit order, so
the forced edges are a function of the history alone and satisfaction
reduces to acyclicity of (session order) + (write-read) + (forced
edges); any topological order is a witness.  The Serializability axiom's
phi is the commit order itself, so satisfaction is decided by a
backtracking search over order extensions with reads-see-latest-writer
pruning (intended for small, test-sized histories).

Levels are table-driven: a level is just a tuple of phi builders, so
further levels can be registered without touching the checking core.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional

from .history import History, Value, writes_of

OPERATION = "operation"
TRANSACTION = "transaction"


class IsolationError(Exception):
    """Base class for misuse of the isolation API."""


class MissingCommitOrder(IsolationError):
    """A commit-order-dependent axiom was evaluated without one."""


class CoverageMismatch(IsolationError):
    """A commit order does not cover exactly the history's transactions."""


class TooLarge(IsolationError):
    """The history exceeds the brute-force enumeration cap."""


class TxnStateError(IsolationError):
    """The reader transaction is not in a state that admits external reads."""


PhiBuilder = Callable[[History, Optional[tuple[int, ...]]], set[tuple[int, int]]]


@dataclass(frozen=True)
class Axiom:
    """One constraint schema instance.

    ``phi`` produces, for a history (and commit order where needed), the
    set of (t2, alpha) pairs satisfying the axiom's relation; ``alpha``
    says whether the second component names a read operation or the
    transaction containing it.  phi must be monotonic: extending the
    history or the order may only grow the pair set (property-tested).
    """

    name: str
    alpha: str  # OPERATION or TRANSACTION
    needs_commit_order: bool
    phi: PhiBuilder


@dataclass(frozen=True)
class IsolationLevel:
    name: str
    axioms: tuple[Axiom, ...]

    @property
    def co_dependent(self) -> bool:
        return any(ax.needs_commit_order for ax in self.axioms)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Violation:
    """Diagnostic payload for an unsatisfied level.

    ``cycle``, when present, is a closed path in the must-precede graph
    (listed once, without repeating the first transaction).
    """

    axiom: str
    key: Optional[str] = None
    t1: Optional[int] = None
    t2: Optional[int] = None
    alpha: Optional[int] = None
    cycle: Optional[tuple[int, ...]] = None
    reason: str = ""

    def describe(self) -> str:
        parts = [f"axiom {self.axiom} violated"]
        if self.key is not None:
            parts.append(f"key {self.key!r}")
        if self.t1 is not None and self.t2 is not None:
            parts.append(f"txn {self.t2} must precede txn {self.t1} but cannot")
        if self.cycle:
            parts.append("cycle " + " -> ".join(str(t) for t in self.cycle))
        if self.reason:
            parts.append(self.reason)
        return "; ".join(parts)


@dataclass
class Verdict:
    """Outcome of a satisfaction check, with witness or diagnostics."""

    satisfied: bool
    commit_order: Optional[tuple[int, ...]] = None
    violation: Optional[Violation] = None

    def __bool__(self) -> bool:
        return self.satisfied


# ---------------------------------------------------------------------------
# phi builders


def _phi_read_committed(h: History, co) -> set[tuple[int, int]]:
    """(t2, read op): an earlier external read of the same transaction
    already took a value from t2 (the write-read relation composed with
    program order, restricted to the reads that can instantiate an
    axiom)."""
    pairs: set[tuple[int, int]] = set()
    for tid in h.txn_ids():
        sources: set[int] = set()
        written: set[str] = set()
        for op in h.txn(tid).ops:
            if op.is_write():
                written.add(op.key)
                continue
            if op.key in written:
                continue  # covered read, carries no source
            for t2 in sources:
                pairs.add((t2, op.op_id))
            sources.add(h.wr_source(op.op_id))
    return pairs


def _phi_causal_past(h: History, co) -> set[tuple[int, int]]:
    """(t2, t3): t3 is reachable from t2 through write-read and session
    order edges (the transitive closure, i.e. t2 is in t3's causal past)."""
    adj: dict[int, set[int]] = {}
    for a, b in h.so_edges():
        adj.setdefault(a, set()).add(b)
    for a, b in h.lift_wr():
        adj.setdefault(a, set()).add(b)
    pairs: set[tuple[int, int]] = set()
    for start in h.txn_ids():
        seen: set[int] = set()
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    pairs.add((start, nxt))
                    stack.append(nxt)
    return pairs


def _phi_commit_order(h: History, co) -> set[tuple[int, int]]:
    if co is None:
        raise MissingCommitOrder("serializability needs a commit order for phi")
    co = tuple(co)
    return {(co[i], co[j]) for i in range(len(co)) for j in range(i + 1, len(co))}


READ_COMMITTED = IsolationLevel(
    "read-committed",
    (Axiom("read-committed", OPERATION, False, _phi_read_committed),),
)
CAUSAL = IsolationLevel(
    "causal",
    (Axiom("causal", TRANSACTION, False, _phi_causal_past),),
)
SERIALIZABILITY = IsolationLevel(
    "serializability",
    (Axiom("serializability", TRANSACTION, True, _phi_commit_order),),
)

LEVELS: dict[str, IsolationLevel] = {
    lvl.name: lvl for lvl in (READ_COMMITTED, CAUSAL, SERIALIZABILITY)
}


def get_level(level: "IsolationLevel | str") -> IsolationLevel:
    if isinstance(level, IsolationLevel):
        return level
    try:
        return LEVELS[level]
    except KeyError:
        raise IsolationError(
            f"unknown isolation level {level!r}; known: {sorted(LEVELS)}"
        ) from None


# ---------------------------------------------------------------------------
# forced-edge derivation


def _edge_details(
    h: History, level: IsolationLevel, co: Optional[tuple[int, ...]]
) -> Iterator[tuple[int, int, str, str, int]]:
    """All (t2, t1, axiom, key, alpha) instantiations forcing t2 before t1."""
    if level.co_dependent and co is None:
        raise MissingCommitOrder(f"level {level.name} requires a commit order")
    phis = [(ax, ax.phi(h, co)) for ax in level.axioms]
    for op_id, t1 in sorted(h.wr_items()):
        reader, op = h.operation(op_id)
        writers = h.key_writers(op.key)
        for ax, pairs in phis:
            alpha = op_id if ax.alpha == OPERATION else reader
            if (h.init_txn, alpha) in pairs and h.init_txn != t1:
                yield (h.init_txn, t1, ax.name, op.key, alpha)
            for t2 in writers:
                if t2 != t1 and (t2, alpha) in pairs:
                    yield (t2, t1, ax.name, op.key, alpha)


def derived_edges(
    h: History, level: "IsolationLevel | str", co: Optional[Iterable[int]] = None
) -> set[tuple[int, int]]:
    """Must-precede transaction pairs forced by the level's axioms."""
    level = get_level(level)
    co = tuple(co) if co is not None else None
    return {(t2, t1) for t2, t1, _, _, _ in _edge_details(h, level, co)}


# ---------------------------------------------------------------------------
# graph helpers


def _topological_order(
    nodes: Iterable[int], edges: Iterable[tuple[int, int]]
) -> Optional[tuple[int, ...]]:
    """Deterministic (smallest id first) topological order, or None."""
    nodes = sorted(set(nodes))
    indeg = {n: 0 for n in nodes}
    adj: dict[int, list[int]] = {n: [] for n in nodes}
    for a, b in set(edges):
        adj[a].append(b)
        indeg[b] += 1
    ready = [n for n in nodes if indeg[n] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for m in adj[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    if len(out) != len(nodes):
        return None
    return tuple(out)


def _find_cycle(
    nodes: Iterable[int], edges: Iterable[tuple[int, int]]
) -> Optional[list[int]]:
    adj: dict[int, list[int]] = {n: [] for n in set(nodes)}
    for a, b in sorted(set(edges)):
        adj[a].append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in adj}
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

    for n in sorted(adj):
        if color[n] == WHITE:
            found = visit(n)
            if found is not None:
                return found
    return None


# ---------------------------------------------------------------------------
# satisfaction


def satisfies(h: History, level: "IsolationLevel | str") -> Verdict:
    """Decide whether some commit order validates the level's axioms.

    Commit-order-free levels reduce to a single acyclicity check over the
    saturated must-precede graph.  Serializability runs a backtracking
    order search with reads-see-latest pruning; both paths return a
    witness commit order on success and a Violation on failure.
    """
    level = get_level(level)
    if not level.co_dependent:
        details = list(_edge_details(h, level, None))
        base = set(h.so_edges()) | h.lift_wr()
        edges = base | {(t2, t1) for t2, t1, _, _, _ in details}
        order = _topological_order(h.txn_ids(), edges)
        if order is not None:
            return Verdict(True, order)
        cycle = _find_cycle(h.txn_ids(), edges)
        assert cycle is not None
        on_cycle = set(zip(cycle, cycle[1:] + cycle[:1]))
        detail = next((d for d in details if (d[0], d[1]) in on_cycle), None)
        if detail is not None:
            t2, t1, axiom, key, alpha = detail
            violation = Violation(axiom, key, t1, t2, alpha, tuple(cycle))
        else:
            violation = Violation(level.name, cycle=tuple(cycle))
        return Verdict(False, None, violation)
    return _satisfies_serializable(h, level)


def _satisfies_serializable(h: History, level: IsolationLevel) -> Verdict:
    txns = h.txn_ids()
    preds: dict[int, set[int]] = {t: set() for t in txns}
    for a, b in h.so_edges():
        preds[b].add(a)
    for a, b in h.lift_wr():
        preds[b].add(a)
    reads_by_txn = {
        t: [(op.key, h.wr_source(op.op_id), op.op_id) for op in h.external_reads(t)]
        for t in txns
    }
    write_keys = {t: tuple(writes_of(h.txn(t))) for t in txns}

    placed: list[int] = []
    placed_set: set[int] = set()
    last_writer: dict[str, int] = {}
    deepest: tuple[int, Optional[Violation]] = (-1, None)

    def current_writer(key: str) -> Optional[int]:
        if key in last_writer:
            return last_writer[key]
        return h.init_txn if h.init_txn in placed_set else None

    def blocked_by(t: int) -> Optional[Violation]:
        for key, src, op_id in reads_by_txn[t]:
            lw = current_writer(key)
            if lw != src:
                return Violation(
                    level.axioms[0].name,
                    key,
                    src,
                    lw,
                    t,
                    None,
                    reason="read cannot see its source at any extension point",
                )
        return None

    def search() -> bool:
        nonlocal deepest
        if len(placed) == len(txns):
            return True
        for t in txns:
            if t in placed_set or not preds[t] <= placed_set:
                continue
            violation = blocked_by(t)
            if violation is not None:
                if len(placed) > deepest[0]:
                    deepest = (len(placed), violation)
                continue
            placed.append(t)
            placed_set.add(t)
            saved = [(k, last_writer.get(k)) for k in write_keys[t]]
            for k in write_keys[t]:
                last_writer[k] = t
            if search():
                return True
            for k, prev in saved:
                if prev is None:
                    del last_writer[k]
                else:
                    last_writer[k] = prev
            placed.pop()
            placed_set.discard(t)
        return False

    if search():
        return Verdict(True, tuple(placed))
    violation = deepest[1] or Violation(
        level.name, reason="no commit order extends the history's relations"
    )
    return Verdict(False, None, violation)


def satisfies_with_order(
    h: History, co: Iterable[int], level: "IsolationLevel | str"
) -> bool:
    """Direct evaluation: does this specific commit order validate the level?

    Checks that the order extends write-read and session order and that
    every forced edge (derived with this order where the level needs it)
    is consistent with it.
    """
    level = get_level(level)
    co = tuple(co)
    if len(set(co)) != len(co) or sorted(co) != h.txn_ids():
        raise CoverageMismatch(
            "commit order must contain every transaction of the history exactly once"
        )
    pos = {t: i for i, t in enumerate(co)}
    for a, b in h.lift_wr():
        if pos[a] >= pos[b]:
            return False
    for a, b in h.so_edges():
        if pos[a] >= pos[b]:
            return False
    for t2, t1, _, _, _ in _edge_details(h, level, co):
        if pos[t2] >= pos[t1]:
            return False
    return True


def brute_force_satisfies(
    h: History, level: "IsolationLevel | str", cap: int = 8
) -> Verdict:
    """Ground-truth satisfaction by exhausting all commit orders.

    Enumerates every total order extending write-read and session order
    and evaluates the axioms directly on each; independent of the
    saturation and search paths in :func:`satisfies`.
    """
    level = get_level(level)
    txns = h.txn_ids()
    if len(txns) > cap:
        raise TooLarge(f"history has {len(txns)} transactions, cap is {cap}")
    preds: dict[int, set[int]] = {t: set() for t in txns}
    for a, b in h.so_edges():
        preds[b].add(a)
    for a, b in h.lift_wr():
        preds[b].add(a)

    placed: list[int] = []
    placed_set: set[int] = set()

    def search() -> Optional[tuple[int, ...]]:
        if len(placed) == len(txns):
            co = tuple(placed)
            return co if satisfies_with_order(h, co, level) else None
        for t in txns:
            if t in placed_set or not preds[t] <= placed_set:
                continue
            placed.append(t)
            placed_set.add(t)
            found = search()
            if found is not None:
                return found
            placed.pop()
            placed_set.discard(t)
        return None

    co = search()
    if co is not None:
        return Verdict(True, co)
    return Verdict(
        False,
        None,
        Violation(level.name, reason="no commit order validates the axioms"),
    )


# ---------------------------------------------------------------------------
# read-source computation for the executor


def valid_read_sources(
    h: History,
    reader_txn: int,
    key: str,
    level: "IsolationLevel | str",
    exec_order: Optional[Iterable[int]] = None,
) -> list[tuple[int, Value]]:
    """Committed transactions whose final write to key this read may return.

    Each candidate is tried by tentatively appending the read with its
    write-read edge and checking satisfaction; for Serializability the
    serial execution order so far stands in as the candidate commit
    order.  The result is sorted by transaction id so seeded runs are
    reproducible.
    """
    level = get_level(level)
    if h.is_committed(reader_txn):
        raise TxnStateError(f"reader transaction {reader_txn} is not live")
    if h.last_write(reader_txn, key) is not None:
        raise IsolationError(
            f"txn {reader_txn} already wrote {key!r}; the read is local"
        )
    if level.co_dependent:
        if exec_order is None:
            raise MissingCommitOrder(
                f"level {level.name} needs the execution order to validate reads"
            )
        exec_order = tuple(exec_order)
    candidates = [h.init_txn] + [
        t
        for t in h.key_writers(key)
        if t != reader_txn and t != h.init_txn and h.is_committed(t)
    ]
    out: list[tuple[int, Value]] = []
    for t in sorted(candidates):
        value = h.final_write_value(t, key)
        h.append_read(reader_txn, key, value, t)
        try:
            if level.co_dependent:
                ok = satisfies_with_order(h, exec_order, level)
            else:
                ok = bool(satisfies(h, level))
        finally:
            h._pop_last_op(reader_txn)
        if ok:
            out.append((t, value))
    return out
