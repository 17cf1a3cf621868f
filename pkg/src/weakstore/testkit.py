"""Enumeration oracles, coverage measurement, and workload generators.

Two independent exhaustive semantics for the same programs:

- `baseline_enumerate` interleaves sessions at instruction granularity.
  A read may return the final write of any committed transaction (live
  transactions are invisible); no isolation checking happens during the
  run, and the collected final histories are filtered by satisfaction at
  the end.

- `serial_enumerate` runs whole transactions one at a time, validating
  every read against the isolation level at the moment it executes —
  exactly what the store does, minus the randomness.

For the shipped levels the two agree: executing transactions serially
loses no weakly-consistent behavior, because any satisfying commit order
can replay the history serially, with every prefix still satisfying the
level.  The test suite checks this set equality on random programs.

Histories are compared up to identifier renaming: the canonical form
keys transactions by (session, position) and rewrites read sources to
those coordinates, so the two semantics' different id assignments do not
matter.  Observable states (the vectors of external-read returns) drive
the coverage metric: how many distinct vectors a strategy has produced.
"""

from __future__ import annotations

import random
from typing import Iterable

from .history import History, Value, _value_shape
from .isolation import IsolationLevel, get_level, satisfies, valid_read_sources
from .program import (
    AssignInstr,
    IfInstr,
    Instr,
    Program,
    ProgramError,
    ReadInstr,
    WriteInstr,
    _as_bool,
    _eval_key,
    const,
    eval_expr,
    var,
)


class BudgetExceeded(Exception):
    """The enumeration outgrew its node cap."""


Canonical = tuple


def _session_sort_key(name: str):
    return (len(name), name)


def canonical_history(h: History) -> Canonical:
    """Identifier-independent form: transactions keyed by (session,
    position), read sources rewritten to those coordinates."""
    sessions = sorted(h.sessions.items(), key=lambda kv: _session_sort_key(kv[0]))
    coord: dict[int, tuple] = {h.init_txn: ("init",)}
    for si, (_, seq) in enumerate(sessions):
        for ti, tid in enumerate(seq):
            coord[tid] = (si, ti)
    external = dict(h.wr_items())
    out = []
    for _, seq in sessions:
        txns = []
        for tid in seq:
            ops = []
            for op in h.txn(tid).ops:
                src = coord[external[op.op_id]] if op.op_id in external else None
                ops.append((op.kind, op.key, _value_shape(op.value), src))
            txns.append((tuple(ops), h.is_committed(tid)))
        out.append(tuple(txns))
    return (_value_shape(h.default_value), tuple(out))


def observable_vector(h: History) -> tuple[Value, ...]:
    """External-read returns in canonical order: sessions by id, then
    program order within the session."""
    external = dict(h.wr_items())
    out: list[Value] = []
    for _, seq in sorted(h.sessions.items(), key=lambda kv: _session_sort_key(kv[0])):
        for tid in seq:
            for op in h.txn(tid).ops:
                if op.op_id in external:
                    out.append(op.value)
    return tuple(out)


def freeze_observable(vector: Iterable[Value]) -> tuple:
    """Hashable form of an observable state (bools stay distinct from ints)."""
    return tuple(_value_shape(v) for v in vector)


def coverage(vectors: Iterable[tuple[Value, ...]]) -> int:
    """Number of distinct observable states in a collection of runs."""
    return len({freeze_observable(vec) for vec in vectors})


# ---------------------------------------------------------------------------
# baseline semantics: arbitrary interleavings, no isolation checking


class _Budget:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def spend(self) -> None:
        self.used += 1
        if self.used > self.cap:
            raise BudgetExceeded(f"enumeration exceeded {self.cap} steps")


def _final_histories_baseline(
    program: Program, default_value: Value, node_cap: int
) -> dict[Canonical, History]:
    h = History(default_value)
    cursor = [0] * len(program.sessions)
    live: dict[int, tuple[int, list[Instr], dict]] = {}
    budget = _Budget(node_cap)
    found: dict[Canonical, History] = {}

    def commit_if_done(i: int) -> bool:
        tid, todo, _ = live[i]
        if todo:
            return False
        h.commit_txn(tid)
        del live[i]
        return True

    def uncommit(i: int, tid: int, todo: list, env: dict) -> None:
        h._set_committed(tid, False)
        live[i] = (tid, todo, env)

    def explore() -> None:
        moved = False
        for i in range(len(program.sessions)):
            if i in live:
                moved = True
                step(i)
            elif cursor[i] < len(program.sessions[i]):
                moved = True
                spawn(i)
        if not moved and not live:
            canon = canonical_history(h)
            if canon not in found:
                found[canon] = History.parse(h.serialize())

    def spawn(i: int) -> None:
        budget.spend()
        tid = h.begin_txn(str(i))
        todo = list(program.sessions[i][cursor[i]])
        cursor[i] += 1
        env: dict = {}
        live[i] = (tid, todo, env)
        committed = commit_if_done(i)
        explore()
        if committed:
            uncommit(i, tid, todo, env)
        del live[i]
        cursor[i] -= 1
        h._pop_last_txn(str(i))

    def step(i: int) -> None:
        tid, todo, env = live[i]
        instr = todo[0]
        if isinstance(instr, IfInstr):
            budget.spend()
            if _as_bool(eval_expr(instr.cond, env), "guard condition"):
                todo[0] = instr.then
                step(i)
                todo[0] = instr
            else:
                todo.pop(0)
                committed = commit_if_done(i)
                explore()
                if committed:
                    uncommit(i, tid, todo, env)
                todo.insert(0, instr)
            return
        if isinstance(instr, AssignInstr):
            budget.spend()
            prev = env.get(instr.var, _MISSING)
            env[instr.var] = eval_expr(instr.expr, env)
            _after_step(i, tid, todo, env, instr)
            _restore(env, instr.var, prev)
            return
        if isinstance(instr, WriteInstr):
            budget.spend()
            key = _eval_key(instr.key, env)
            h.append_write(tid, key, eval_expr(instr.value, env))
            _after_step(i, tid, todo, env, instr)
            h._pop_last_op(tid)
            return
        if isinstance(instr, ReadInstr):
            key = _eval_key(instr.key, env)
            prev = env.get(instr.var, _MISSING)
            if h.last_write(tid, key) is not None:
                budget.spend()
                op = h.append_local_read(tid, key)
                env[instr.var] = op.value
                _after_step(i, tid, todo, env, instr)
                h._pop_last_op(tid)
                _restore(env, instr.var, prev)
                return
            candidates = [h.init_txn] + [
                t
                for t in h.key_writers(key)
                if t != tid and t != h.init_txn and h.is_committed(t)
            ]
            for source in sorted(candidates):
                budget.spend()
                value = h.final_write_value(source, key)
                h.append_read(tid, key, value, source)
                env[instr.var] = value
                _after_step(i, tid, todo, env, instr)
                h._pop_last_op(tid)
                _restore(env, instr.var, prev)
            return
        raise ProgramError(f"unknown instruction {instr!r}")

    def _after_step(i: int, tid: int, todo: list, env: dict, instr: Instr) -> None:
        todo.pop(0)
        committed = commit_if_done(i)
        explore()
        if committed:
            uncommit(i, tid, todo, env)
        todo.insert(0, instr)

    explore()
    return found


_MISSING = object()


def _restore(env: dict, name: str, prev) -> None:
    if prev is _MISSING:
        env.pop(name, None)
    else:
        env[name] = prev


def baseline_enumerate(
    program: Program,
    level: "IsolationLevel | str",
    default_value: Value = 0,
    node_cap: int = 10**6,
) -> set[Canonical]:
    """All final histories of the interleaving semantics that satisfy the
    level, as a canonical set."""
    level = get_level(level)
    finals = _final_histories_baseline(program, default_value, node_cap)
    return {canon for canon, h in finals.items() if satisfies(h, level)}


def baseline_history_pool(
    program: Program, default_value: Value = 0, node_cap: int = 10**6
) -> dict[Canonical, History]:
    """Unfiltered final histories of the interleaving semantics, for
    callers that filter by several levels without re-enumerating."""
    return _final_histories_baseline(program, default_value, node_cap)


# ---------------------------------------------------------------------------
# serial semantics: one transaction at a time, reads validated as they run


def serial_enumerate(
    program: Program,
    level: "IsolationLevel | str",
    default_value: Value = 0,
    node_cap: int = 10**6,
) -> set[Canonical]:
    """All histories the serial store can produce for the program under
    the level, across every scheduling and read-source choice."""
    level = get_level(level)
    h = History(default_value)
    exec_order = [h.init_txn]
    cursor = [0] * len(program.sessions)
    current: list = [None]  # (session, tid, todo, env) or None
    budget = _Budget(node_cap)
    found: set[Canonical] = set()

    def explore() -> None:
        if current[0] is None:
            pending = [
                i for i in range(len(program.sessions)) if cursor[i] < len(program.sessions[i])
            ]
            if not pending:
                found.add(canonical_history(h))
                return
            for i in pending:
                spawn(i)
        else:
            step()

    def spawn(i: int) -> None:
        budget.spend()
        tid = h.begin_txn(str(i))
        exec_order.append(tid)
        todo = list(program.sessions[i][cursor[i]])
        cursor[i] += 1
        current[0] = (i, tid, todo, env := {})
        committed = finish_if_done()
        explore()
        if committed:
            h._set_committed(tid, False)
            current[0] = (i, tid, todo, env)
        current[0] = None
        cursor[i] -= 1
        exec_order.pop()
        h._pop_last_txn(str(i))

    def finish_if_done() -> bool:
        i, tid, todo, env = current[0]
        if todo:
            return False
        h.commit_txn(tid)
        current[0] = None
        return True

    def after_step(instr: Instr) -> None:
        i, tid, todo, env = current[0]
        todo.pop(0)
        committed = finish_if_done()
        explore()
        if committed:
            h._set_committed(tid, False)
            current[0] = (i, tid, todo, env)
        todo.insert(0, instr)

    def step() -> None:
        i, tid, todo, env = current[0]
        instr = todo[0]
        if isinstance(instr, IfInstr):
            budget.spend()
            if _as_bool(eval_expr(instr.cond, env), "guard condition"):
                todo[0] = instr.then
                step()
                todo[0] = instr
            else:
                after_step(instr)
            return
        if isinstance(instr, AssignInstr):
            budget.spend()
            prev = env.get(instr.var, _MISSING)
            env[instr.var] = eval_expr(instr.expr, env)
            after_step(instr)
            _restore(env, instr.var, prev)
            return
        if isinstance(instr, WriteInstr):
            budget.spend()
            h.append_write(tid, _eval_key(instr.key, env), eval_expr(instr.value, env))
            after_step(instr)
            h._pop_last_op(tid)
            return
        if isinstance(instr, ReadInstr):
            key = _eval_key(instr.key, env)
            prev = env.get(instr.var, _MISSING)
            if h.last_write(tid, key) is not None:
                budget.spend()
                op = h.append_local_read(tid, key)
                env[instr.var] = op.value
                after_step(instr)
                h._pop_last_op(tid)
                _restore(env, instr.var, prev)
                return
            for source, value in valid_read_sources(
                h, tid, key, level, exec_order=tuple(exec_order)
            ):
                budget.spend()
                h.append_read(tid, key, value, source)
                env[instr.var] = value
                after_step(instr)
                h._pop_last_op(tid)
                _restore(env, instr.var, prev)
            return
        raise ProgramError(f"unknown instruction {instr!r}")

    explore()
    return found


def enumerate_observables(
    program: Program,
    level: "IsolationLevel | str",
    default_value: Value = 0,
    node_cap: int = 10**6,
) -> set[tuple]:
    """Distinct observable states over all serial executions."""
    finals = serial_enumerate(program, level, default_value, node_cap)
    states = set()
    for canon in finals:
        states.add(_canonical_observable(canon))
    return states


def _canonical_observable(canon: Canonical) -> tuple:
    _, sessions = canon
    out = []
    for txns in sessions:
        for ops, _ in txns:
            for kind, _key, value, src in ops:
                if kind == "r" and src is not None:
                    out.append(value)
    return tuple(out)


# ---------------------------------------------------------------------------
# random workloads


def random_history(
    rng: random.Random,
    max_txns: int = 6,
    max_ops: int = 3,
    keys: tuple[str, ...] = ("k1", "k2"),
    values: tuple[Value, ...] = (1, 2),
    max_sessions: int = 3,
) -> History:
    """A structurally valid history with randomly chosen read sources.

    Transactions are built one at a time and committed immediately, with
    each external read sourcing a uniformly chosen committed writer of
    its key (or the initial transaction), so well-formedness holds by
    construction while satisfaction of any given level does not.
    """
    h = History(0)
    n = rng.randint(1, max(1, max_txns - 1))
    sessions = [f"s{i}" for i in range(rng.randint(1, max_sessions))]
    for _ in range(n):
        tid = h.begin_txn(rng.choice(sessions))
        for _ in range(rng.randint(1, max_ops)):
            key = rng.choice(keys)
            if rng.random() < 0.5:
                h.append_write(tid, key, rng.choice(values))
            elif h.last_write(tid, key) is not None:
                h.append_local_read(tid, key)
            else:
                candidates = [h.init_txn] + [
                    t for t in h.key_writers(key) if t != tid and h.is_committed(t)
                ]
                source = rng.choice(sorted(candidates))
                h.append_read(tid, key, h.final_write_value(source, key), source)
        h.commit_txn(tid)
    return h


def random_program(
    rng: random.Random,
    max_sessions: int = 2,
    max_txns: int = 2,
    max_ops: int = 3,
    keys: tuple[str, ...] = ("k1", "k2"),
    values: tuple[int, ...] = (1, 2),
    guard_chance: float = 0.15,
) -> Program:
    """A small random workload of guarded reads and writes.

    Guards are equality tests on previously read variables so every
    control path stays enumerable.
    """
    sessions = []
    for _ in range(rng.randint(1, max_sessions)):
        txns = []
        for _ in range(rng.randint(1, max_txns)):
            instrs: list[Instr] = []
            read_vars: list[str] = []
            for k in range(rng.randint(1, max_ops)):
                key = rng.choice(keys)
                if rng.random() < 0.5:
                    write = WriteInstr(const(key), const(rng.choice(values)))
                    if read_vars and rng.random() < guard_chance:
                        instrs.append(
                            IfInstr(
                                {"eq": [var(rng.choice(read_vars)), const(rng.choice(values + (0,)))]},
                                write,
                            )
                        )
                    else:
                        instrs.append(write)
                else:
                    name = f"v{len(read_vars)}"
                    instrs.append(ReadInstr(const(key), name))
                    read_vars.append(name)
            txns.append(instrs)
        sessions.append(txns)
    return Program(sessions)


def estimated_paths(program: Program, source_fanout: int = 3) -> int:
    """Coarse upper bound on interleaving-semantics paths, used to skip
    pathological random programs before enumerating them."""
    import math

    steps = []
    reads = 0
    for session in program.sessions:
        count = 0
        for txn in session:
            count += 1 + len(txn)
            for instr in txn:
                target = instr.then if isinstance(instr, IfInstr) else instr
                if isinstance(target, ReadInstr):
                    reads += 1
        steps.append(count)
    total = sum(steps)
    interleavings = math.factorial(total)
    for s in steps:
        interleavings //= math.factorial(s)
    return interleavings * (source_fanout**reads)
