import random

import pytest

from weakstore import History, new_history, satisfies
from weakstore.program import Program, ReadInstr, WriteInstr, const
from weakstore.testkit import (
    BudgetExceeded,
    baseline_enumerate,
    baseline_history_pool,
    canonical_history,
    coverage,
    estimated_paths,
    observable_vector,
    random_history,
    random_program,
    serial_enumerate,
)
from test_program import cross_read_program

LEVELS = ("read-committed", "causal", "serializability")


def test_canonical_form_ignores_identifiers():
    def build(extra_first):
        h = new_history(0)
        if extra_first:  # burn transaction and operation ids
            t = h.begin_txn("scratch")
            h.append_write(t, "x", 1)
            h.commit_txn(t)
        t1 = h.begin_txn("a")
        h.append_write(t1, "k", 1)
        h.commit_txn(t1)
        t2 = h.begin_txn("b")
        h.append_read(t2, "k", 1, t1)
        h.commit_txn(t2)
        return h

    plain = canonical_history(build(False))
    shifted = canonical_history(build(True))
    assert plain != shifted  # scratch session is part of the structure
    # rebuild without the scratch session but with shifted ids
    h = History(0, init_txn_id=7)
    t1 = h.begin_txn("a")
    h.append_write(t1, "k", 1)
    h.commit_txn(t1)
    t2 = h.begin_txn("b")
    h.append_read(t2, "k", 1, t1)
    h.commit_txn(t2)
    assert canonical_history(h) == plain


def test_single_transaction_program_has_one_history_per_level():
    program = Program([[[WriteInstr(const("k"), const(1)), ReadInstr(const("k"), "v")]]])
    for level in LEVELS:
        assert len(serial_enumerate(program, level)) == 1
        assert len(baseline_enumerate(program, level)) == 1


def test_cross_read_sets_match_between_semantics():
    program = cross_read_program()
    for level in LEVELS:
        assert baseline_enumerate(program, level) == serial_enumerate(program, level)
    causal = serial_enumerate(program, "causal")
    serializable = serial_enumerate(program, "serializability")
    assert serializable < causal  # the both-stale history is causal-only


def test_serial_members_satisfy_their_level():
    program = cross_read_program()
    for level in LEVELS:
        pool = baseline_history_pool(program)
        kept = serial_enumerate(program, level)
        for canon, history in pool.items():
            assert (canon in kept) == bool(satisfies(history, level))


def test_cart_anomaly_state_is_causal_only():
    from weakstore.benchmarks import build_shopping_cart
    from weakstore.testkit import enumerate_observables

    bench = build_shopping_cart(threads=3, ops_per_thread=2)

    def reader_pairs(level):
        states = enumerate_observables(
            bench.program, level, default_value=bench.default_value
        )
        # the last two entries of each vector are the reader session's gets
        return {tuple(v[-2:]) for v in states}

    empty_then_doubled = ((("str", ""), ("str", "I,I")))
    assert empty_then_doubled in reader_pairs("causal")
    assert empty_then_doubled not in reader_pairs("serializability")


def test_budget_cap_raises():
    program = Program(
        [
            [[WriteInstr(const("k"), const(1)), ReadInstr(const("k2"), "a")]],
            [[WriteInstr(const("k2"), const(1)), ReadInstr(const("k"), "b")]],
        ]
    )
    with pytest.raises(BudgetExceeded):
        baseline_enumerate(program, "causal", node_cap=3)


def test_random_program_equivalence_sample():
    rng = random.Random(42)
    checked = 0
    while checked < 25:
        program = random_program(rng)
        if estimated_paths(program) > 100_000:
            continue
        pool = baseline_history_pool(program)
        for level in LEVELS:
            baseline = {c for c, h in pool.items() if satisfies(h, level)}
            serial = serial_enumerate(program, level)
            assert baseline == serial, f"semantics disagree under {level}"
        checked += 1


def test_random_histories_are_well_formed():
    rng = random.Random(7)
    for _ in range(200):
        h = random_history(rng)
        h.check_well_formed()
        assert History.parse(h.serialize()) == h


def test_observable_vector_orders_by_session_then_position():
    h = new_history(0)
    t1 = h.begin_txn("1")
    h.append_read(t1, "a", 0, h.init_txn)
    h.commit_txn(t1)
    t0 = h.begin_txn("0")
    h.append_read(t0, "b", 0, h.init_txn)
    h.append_write(t0, "b", 1)
    h.append_local_read(t0, "b")  # local: not observable
    h.commit_txn(t0)
    assert observable_vector(h) == (0, 0)


def test_coverage_counts_distinct_vectors():
    assert coverage([(0, 1), (0, 1), (1, 0)]) == 2
    assert coverage([]) == 0
    assert coverage([(1,), (True,)]) == 2  # bool and int stay distinct
