"""Workload programs: sessions of transactions of guarded instructions.

A program is a list of sessions, each a list of transactions, each a
list of instructions: write a key, read a key into a variable, assign a
variable, or guard another instruction with a condition.  Variables are
transaction-scoped.  Expressions are a small total language over store
values: constants, variables, equality, boolean connectives, string
concatenation, and multisets encoded as canonical comma-joined sorted
strings (so multiset values stay plain scalars in the store).

`run_program` drives a Store over a program: it repeatedly picks, with
the seeded generator, a session that still has transactions and runs
that session's next transaction to completion, so whole transactions
serialize while reads supply the weak behaviors.

Programs are serializable to JSON; `observe` replays a program against a
history it produced to recover which reads ran and what they returned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Union

from .history import History, Value, is_value
from .store import Store, StoreConfig


class ProgramError(Exception):
    """Malformed program, expression, or assertion."""


# ---------------------------------------------------------------------------
# multisets as canonical strings

MSET_SEP = ","


def mset_items(encoded: str) -> list[str]:
    if not isinstance(encoded, str):
        raise ProgramError(f"multiset value must be a string, got {encoded!r}")
    return [] if encoded == "" else encoded.split(MSET_SEP)


def mset_encode(items: list[str]) -> str:
    for item in items:
        if not item or MSET_SEP in item:
            raise ProgramError(f"invalid multiset element {item!r}")
    return MSET_SEP.join(sorted(items))


# ---------------------------------------------------------------------------
# expressions

Expr = dict

_EXPR_OPS = {
    "const": 1,
    "var": 1,
    "obs": 1,
    "eq": 2,
    "ne": 2,
    "not": 1,
    "and": None,
    "or": None,
    "concat": None,
    "mset_add": 2,
    "mset_remove_all": 2,
    "mset_union": 2,
    "mset_contains": 2,
    "mset_size": 1,
}


def check_expr(expr: Any, allow_obs: bool = False) -> None:
    if not isinstance(expr, dict) or len(expr) != 1:
        raise ProgramError(f"expression must be a single-key object, got {expr!r}")
    (op, arg), = expr.items()
    if op not in _EXPR_OPS:
        raise ProgramError(f"unknown expression operator {op!r}")
    if op == "const":
        if not is_value(arg):
            raise ProgramError(f"const must hold a scalar, got {arg!r}")
        return
    if op in ("var", "obs"):
        if op == "obs" and not allow_obs:
            raise ProgramError("obs references are only allowed in assertions")
        if not isinstance(arg, str) or not arg:
            raise ProgramError(f"{op} must name a non-empty string, got {arg!r}")
        return
    if op in ("not", "mset_size"):
        check_expr(arg, allow_obs)
        return
    if not isinstance(arg, list):
        raise ProgramError(f"operator {op!r} takes a list of operands")
    arity = _EXPR_OPS[op]
    if arity is not None and len(arg) != arity:
        raise ProgramError(f"operator {op!r} takes exactly {arity} operands")
    if arity is None and len(arg) < 2:
        raise ProgramError(f"operator {op!r} takes at least 2 operands")
    for sub in arg:
        check_expr(sub, allow_obs)


def _values_eq(a: Value, b: Value) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _as_bool(v: Value, what: str) -> bool:
    if not isinstance(v, bool):
        raise ProgramError(f"{what} must be boolean, got {v!r}")
    return v


def eval_expr(
    expr: Expr, env: Mapping[str, Value], obs: Optional[Mapping[str, Value]] = None
) -> Value:
    (op, arg), = expr.items()
    if op == "const":
        return arg
    if op == "var":
        if arg not in env:
            raise ProgramError(f"variable {arg!r} read before assignment")
        return env[arg]
    if op == "obs":
        if obs is None:
            raise ProgramError("obs references are only allowed in assertions")
        return obs.get(arg)
    if op == "eq":
        return _values_eq(eval_expr(arg[0], env, obs), eval_expr(arg[1], env, obs))
    if op == "ne":
        return not _values_eq(eval_expr(arg[0], env, obs), eval_expr(arg[1], env, obs))
    if op == "not":
        return not _as_bool(eval_expr(arg, env, obs), "operand of not")
    if op == "and":
        return all(_as_bool(eval_expr(e, env, obs), "operand of and") for e in arg)
    if op == "or":
        return any(_as_bool(eval_expr(e, env, obs), "operand of or") for e in arg)
    if op == "concat":
        parts = []
        for e in arg:
            v = eval_expr(e, env, obs)
            if isinstance(v, bool) or not isinstance(v, (str, int)):
                raise ProgramError(f"concat operands must be strings or ints, got {v!r}")
            parts.append(str(v))
        return "".join(parts)
    if op == "mset_add":
        items = mset_items(_as_str(eval_expr(arg[0], env, obs)))
        items.append(_as_str(eval_expr(arg[1], env, obs)))
        return mset_encode(items)
    if op == "mset_remove_all":
        items = mset_items(_as_str(eval_expr(arg[0], env, obs)))
        drop = _as_str(eval_expr(arg[1], env, obs))
        return mset_encode([i for i in items if i != drop])
    if op == "mset_union":
        left = mset_items(_as_str(eval_expr(arg[0], env, obs)))
        right = mset_items(_as_str(eval_expr(arg[1], env, obs)))
        return mset_encode(left + right)
    if op == "mset_contains":
        items = mset_items(_as_str(eval_expr(arg[0], env, obs)))
        return _as_str(eval_expr(arg[1], env, obs)) in items
    if op == "mset_size":
        return len(mset_items(_as_str(eval_expr(arg, env, obs))))
    raise ProgramError(f"unknown expression operator {op!r}")


def _as_str(v: Value) -> str:
    if not isinstance(v, str):
        raise ProgramError(f"expected a string value, got {v!r}")
    return v


def const(v: Value) -> Expr:
    return {"const": v}


def var(name: str) -> Expr:
    return {"var": name}


# ---------------------------------------------------------------------------
# instructions


@dataclass(frozen=True)
class WriteInstr:
    key: Expr
    value: Expr


@dataclass(frozen=True)
class ReadInstr:
    key: Expr
    var: str
    obs: Optional[str] = None  # label for assertions / reports


@dataclass(frozen=True)
class AssignInstr:
    var: str
    expr: Expr


@dataclass(frozen=True)
class IfInstr:
    cond: Expr
    then: "Instr"


Instr = Union[WriteInstr, ReadInstr, AssignInstr, IfInstr]


@dataclass(frozen=True)
class Assertion:
    """A predicate over labeled read results that must hold on every run."""

    name: str
    predicate: Expr


@dataclass
class Program:
    """sessions[i][j] is the instruction list of session i's j-th transaction."""

    sessions: list[list[list[Instr]]]
    assertions: list[Assertion] = field(default_factory=list)

    def session_ids(self) -> list[str]:
        return [str(i) for i in range(len(self.sessions))]

    def read_labels(self) -> list[str]:
        out = []

        def walk(instr: Instr) -> None:
            if isinstance(instr, ReadInstr) and instr.obs:
                out.append(instr.obs)
            elif isinstance(instr, IfInstr):
                walk(instr.then)

        for session in self.sessions:
            for txn in session:
                for instr in txn:
                    walk(instr)
        return out


# ---------------------------------------------------------------------------
# execution


def _eval_key(expr: Expr, env: Mapping[str, Value]) -> str:
    key = eval_expr(expr, env)
    if not isinstance(key, str) or not key:
        raise ProgramError(f"key expression must produce a non-empty string, got {key!r}")
    return key


def _exec_instr(handle, instr: Instr) -> None:
    if isinstance(instr, IfInstr):
        if _as_bool(eval_expr(instr.cond, handle.vars), "guard condition"):
            _exec_instr(handle, instr.then)
    elif isinstance(instr, AssignInstr):
        handle.vars[instr.var] = eval_expr(instr.expr, handle.vars)
    elif isinstance(instr, WriteInstr):
        handle.write(_eval_key(instr.key, handle.vars), eval_expr(instr.value, handle.vars))
    elif isinstance(instr, ReadInstr):
        handle.vars[instr.var] = handle.read(_eval_key(instr.key, handle.vars))
    else:
        raise ProgramError(f"unknown instruction {instr!r}")


def run_program(program: Program, config: StoreConfig) -> History:
    """Execute the whole program serially; returns the final history."""
    store = Store(config)
    handles = [store.session(str(i)) for i in range(len(program.sessions))]
    cursor = [0] * len(program.sessions)
    while True:
        pending = [i for i, c in enumerate(cursor) if c < len(program.sessions[i])]
        if not pending:
            break
        i = store.rng.choice(pending)
        instrs = program.sessions[i][cursor[i]]
        cursor[i] += 1
        handle = handles[i]
        handle.begin()
        for instr in instrs:
            _exec_instr(handle, instr)
        handle.commit()
    return store.history


# ---------------------------------------------------------------------------
# observation: replay a program against a history it produced


@dataclass
class Observation:
    """What a run's reads returned.

    ``vector`` lists external-read values in canonical order (sessions by
    id, then program order); ``labels`` maps each executed labeled read to
    its value.
    """

    vector: tuple[Value, ...]
    labels: dict[str, Value]


def observe(program: Program, h: History) -> Observation:
    """Replay the program's control flow against a history it produced.

    The history fixes every read's value, which fixes every guard, so the
    replay is deterministic; misalignment raises ProgramError.
    """
    vector: list[Value] = []
    labels: dict[str, Value] = {}
    sessions = h.sessions
    wr_reads = {op_id for op_id, _ in h.wr_items()}
    for i, session_txns in enumerate(program.sessions):
        txn_ids = sessions.get(str(i), ())
        if len(txn_ids) != len(session_txns):
            raise ProgramError(
                f"session {i} ran {len(txn_ids)} transactions, program has "
                f"{len(session_txns)}"
            )
        for tid, instrs in zip(txn_ids, session_txns):
            ops = iter(h.txn(tid).ops)
            env: dict[str, Value] = {}

            def replay(instr: Instr) -> None:
                if isinstance(instr, IfInstr):
                    if _as_bool(eval_expr(instr.cond, env), "guard condition"):
                        replay(instr.then)
                elif isinstance(instr, AssignInstr):
                    env[instr.var] = eval_expr(instr.expr, env)
                elif isinstance(instr, WriteInstr):
                    op = next(ops, None)
                    if op is None or not op.is_write() or op.key != _eval_key(instr.key, env):
                        raise ProgramError(f"history does not align with write of {instr}")
                elif isinstance(instr, ReadInstr):
                    op = next(ops, None)
                    if op is None or not op.is_read() or op.key != _eval_key(instr.key, env):
                        raise ProgramError(f"history does not align with read of {instr}")
                    env[instr.var] = op.value
                    if op.op_id in wr_reads:
                        vector.append(op.value)
                    if instr.obs:
                        labels[instr.obs] = op.value
                else:
                    raise ProgramError(f"unknown instruction {instr!r}")

            for instr in instrs:
                replay(instr)
            if next(ops, None) is not None:
                raise ProgramError(f"transaction {tid} has operations the program lacks")
    return Observation(tuple(vector), labels)


def evaluate_assertions(program: Program, observation: Observation) -> dict[str, bool]:
    """True per assertion iff its predicate holds for this run's reads."""
    out = {}
    for assertion in program.assertions:
        out[assertion.name] = _as_bool(
            eval_expr(assertion.predicate, {}, obs=observation.labels),
            f"assertion {assertion.name!r}",
        )
    return out


# ---------------------------------------------------------------------------
# JSON form


def _instr_to_json(instr: Instr) -> dict:
    if isinstance(instr, WriteInstr):
        return {"op": "write", "key": instr.key, "value": instr.value}
    if isinstance(instr, ReadInstr):
        out = {"op": "read", "key": instr.key, "var": instr.var}
        if instr.obs:
            out["obs"] = instr.obs
        return out
    if isinstance(instr, AssignInstr):
        return {"op": "assign", "var": instr.var, "expr": instr.expr}
    if isinstance(instr, IfInstr):
        return {"op": "if", "cond": instr.cond, "then": _instr_to_json(instr.then)}
    raise ProgramError(f"unknown instruction {instr!r}")


def program_to_json(program: Program) -> dict:
    return {
        "sessions": [
            [[_instr_to_json(i) for i in txn] for txn in session]
            for session in program.sessions
        ],
        "assertions": [
            {"name": a.name, "predicate": a.predicate} for a in program.assertions
        ],
    }


def _instr_from_json(data: Any) -> Instr:
    if not isinstance(data, dict) or "op" not in data:
        raise ProgramError(f"instruction must be an object with an 'op' tag: {data!r}")
    op = data["op"]
    fields = set(data)
    if op == "write":
        if fields != {"op", "key", "value"}:
            raise ProgramError("write takes exactly key and value")
        check_expr(data["key"])
        check_expr(data["value"])
        return WriteInstr(data["key"], data["value"])
    if op == "read":
        if not fields <= {"op", "key", "var", "obs"} or not {"key", "var"} <= fields:
            raise ProgramError("read takes key, var and an optional obs label")
        check_expr(data["key"])
        if not isinstance(data["var"], str) or not data["var"]:
            raise ProgramError("read target must be a non-empty variable name")
        obs = data.get("obs")
        if obs is not None and (not isinstance(obs, str) or not obs):
            raise ProgramError("obs label must be a non-empty string")
        return ReadInstr(data["key"], data["var"], obs)
    if op == "assign":
        if fields != {"op", "var", "expr"}:
            raise ProgramError("assign takes exactly var and expr")
        if not isinstance(data["var"], str) or not data["var"]:
            raise ProgramError("assign target must be a non-empty variable name")
        check_expr(data["expr"])
        return AssignInstr(data["var"], data["expr"])
    if op == "if":
        if fields != {"op", "cond", "then"}:
            raise ProgramError("if takes exactly cond and then")
        check_expr(data["cond"])
        return IfInstr(data["cond"], _instr_from_json(data["then"]))
    raise ProgramError(f"unknown instruction kind {op!r}")


def parse_program(data: Any) -> Program:
    if not isinstance(data, dict) or not set(data) <= {"sessions", "assertions"}:
        raise ProgramError("program must be an object with sessions and optional assertions")
    if "sessions" not in data or not isinstance(data["sessions"], list):
        raise ProgramError("program needs a sessions array")
    sessions = []
    for session in data["sessions"]:
        if not isinstance(session, list):
            raise ProgramError("each session must be an array of transactions")
        txns = []
        for txn in session:
            if not isinstance(txn, list):
                raise ProgramError("each transaction must be an array of instructions")
            txns.append([_instr_from_json(i) for i in txn])
        sessions.append(txns)
    assertions = []
    for a in data.get("assertions", []):
        if not isinstance(a, dict) or set(a) != {"name", "predicate"}:
            raise ProgramError("assertion must have exactly name and predicate")
        if not isinstance(a["name"], str) or not a["name"]:
            raise ProgramError("assertion name must be a non-empty string")
        check_expr(a["predicate"], allow_obs=True)
        assertions.append(Assertion(a["name"], a["predicate"]))
    program = Program(sessions, assertions)
    labels = program.read_labels()
    if len(labels) != len(set(labels)):
        raise ProgramError("read labels must be unique")
    return program


def parse_program_json(text: str) -> Program:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProgramError(f"invalid JSON: {exc}") from exc
    return parse_program(data)
