import json

import pytest

from weakstore import StoreConfig, parse_program, program_to_json, run_program, satisfies
from weakstore.program import (
    AssignInstr,
    Assertion,
    IfInstr,
    Program,
    ProgramError,
    ReadInstr,
    WriteInstr,
    const,
    evaluate_assertions,
    eval_expr,
    mset_encode,
    mset_items,
    observe,
    var,
)


def cross_read_program():
    """Two sessions each write their key, then read the other's."""
    return Program(
        sessions=[
            [
                [
                    WriteInstr(const("k1"), const(1)),
                    ReadInstr(const("k2"), "x2", obs="left"),
                ]
            ],
            [
                [
                    WriteInstr(const("k2"), const(1)),
                    ReadInstr(const("k1"), "x1", obs="right"),
                ]
            ],
        ],
        assertions=[
            Assertion(
                "not-both-stale",
                {
                    "not": {
                        "and": [
                            {"eq": [{"obs": "left"}, {"const": 0}]},
                            {"eq": [{"obs": "right"}, {"const": 0}]},
                        ]
                    }
                },
            )
        ],
    )


def test_multiset_encoding_is_canonical():
    assert mset_encode(["b", "a", "a"]) == "a,a,b"
    assert mset_items("") == []
    assert mset_items("a,a,b") == ["a", "a", "b"]
    with pytest.raises(ProgramError):
        mset_encode(["has,comma"])


def test_expression_evaluation():
    env = {"cart": "I", "x": 3}
    assert eval_expr({"mset_add": [var("cart"), const("I")]}, env) == "I,I"
    assert eval_expr({"mset_remove_all": [const("I,I,J"), const("I")]}, env) == "J"
    assert eval_expr({"mset_union": [const("a"), const("b,a")]}, env) == "a,a,b"
    assert eval_expr({"mset_contains": [const("a,b"), const("b")]}, env) is True
    assert eval_expr({"mset_size": const("a,b")}, env) == 2
    assert eval_expr({"concat": [const("node:"), const(2)]}, env) == "node:2"
    assert eval_expr({"eq": [var("x"), const(3)]}, env) is True
    assert eval_expr({"eq": [const(1), const(True)]}, env) is False
    with pytest.raises(ProgramError):
        eval_expr(var("missing"), env)
    with pytest.raises(ProgramError):
        eval_expr({"not": const(1)}, env)


def test_guards_select_branches():
    program = Program(
        sessions=[
            [
                [
                    ReadInstr(const("k"), "v"),
                    IfInstr(
                        {"eq": [var("v"), const(0)]},
                        WriteInstr(const("k"), const(1)),
                    ),
                    IfInstr(
                        {"ne": [var("v"), const(0)]},
                        WriteInstr(const("k"), const(2)),
                    ),
                ]
            ]
        ]
    )
    h = run_program(program, StoreConfig(level="serializability", seed=0))
    txn = h.txn(h.sessions["0"][0])
    writes = [op.value for op in txn.ops if op.is_write()]
    assert writes == [1]


def test_run_program_is_deterministic():
    program = cross_read_program()
    cfg = StoreConfig(level="causal", seed=11)
    assert run_program(program, cfg) == run_program(program, cfg)


def test_single_session_program_is_always_serializable():
    program = Program(
        sessions=[
            [
                [WriteInstr(const("k"), const(1)), ReadInstr(const("k"), "a")],
                [ReadInstr(const("k"), "b")],
            ]
        ]
    )
    for seed in range(5):
        h = run_program(program, StoreConfig(level="causal", seed=seed))
        assert satisfies(h, "serializability")


def test_cross_read_program_reaches_both_stale_under_causal_only():
    program = cross_read_program()

    def outcomes(level):
        seen = set()
        for seed in range(60):
            h = run_program(program, StoreConfig(level=level, seed=seed))
            obs = observe(program, h)
            seen.add((obs.labels["left"], obs.labels["right"]))
        return seen

    assert (0, 0) in outcomes("causal")
    assert (0, 0) not in outcomes("serializability")


def test_observe_recovers_vector_and_labels():
    program = cross_read_program()
    h = run_program(program, StoreConfig(level="causal", seed=4))
    obs = observe(program, h)
    assert len(obs.vector) == 2
    assert set(obs.labels) == {"left", "right"}


def test_assertion_evaluation():
    program = cross_read_program()
    for seed in (0, 1, 2, 3):
        h = run_program(program, StoreConfig(level="causal", seed=seed))
        obs = observe(program, h)
        outcome = evaluate_assertions(program, obs)
        expected = not (obs.labels["left"] == 0 and obs.labels["right"] == 0)
        assert outcome["not-both-stale"] == expected


def test_program_json_round_trip():
    program = cross_read_program()
    data = json.loads(json.dumps(program_to_json(program)))
    again = parse_program(data)
    assert program_to_json(again) == program_to_json(program)


def test_parse_program_rejects_malformed_input():
    with pytest.raises(ProgramError):
        parse_program({"sessions": [[[{"op": "noop"}]]]})
    with pytest.raises(ProgramError):
        parse_program({"sessions": [[[{"op": "write", "key": {"const": "k"}}]]]})
    with pytest.raises(ProgramError):
        parse_program({"sessions": "nope"})
    with pytest.raises(ProgramError):
        parse_program(
            {
                "sessions": [],
                "assertions": [{"name": "a", "predicate": {"obs": "x"}, "extra": 1}],
            }
        )


def test_duplicate_read_labels_rejected():
    data = {
        "sessions": [
            [
                [
                    {"op": "read", "key": {"const": "k"}, "var": "a", "obs": "same"},
                    {"op": "read", "key": {"const": "k"}, "var": "b", "obs": "same"},
                ]
            ]
        ]
    }
    with pytest.raises(ProgramError):
        parse_program(data)
