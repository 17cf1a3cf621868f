"""Microbenchmark workloads with correctness assertions.

Four small storage-backed applications, each parameterized by client
thread count and operations per thread, each shipping an assertion that
holds on every serializable run but breaks under weaker levels:

- shopping cart: concurrent add and delete of the same item; a reader
  must never see the cart empty and then doubled.
- Treiber stack: pop attempts race compare-and-swap transactions on the
  head key; no two sessions may pop the same node.
- Twitter: one user tweets from two devices while a follower refreshes
  their feed; tweets already seen must not vanish from a later refresh.
- courseware: students enroll subject to capacity while a course is
  concurrently removed; capacity must hold and removed courses must not
  retain enrollments.

Multiset-valued keys (carts, feeds, enrollments) use the canonical
comma-joined string encoding from the program expression language.
"""

from __future__ import annotations

from dataclasses import dataclass

from .history import Value
from .program import (
    Assertion,
    AssignInstr,
    Expr,
    IfInstr,
    Program,
    ReadInstr,
    WriteInstr,
    const,
    var,
)


@dataclass(frozen=True)
class Benchmark:
    name: str
    program: Program
    default_value: Value
    description: str


def _and_all(clauses: list[Expr]) -> Expr:
    if not clauses:
        return const(True)
    if len(clauses) == 1:
        return clauses[0]
    return {"and": clauses}


def _never_pair(first: Expr, second: Expr) -> Expr:
    return {"not": {"and": [first, second]}}


def _obs(name: str) -> Expr:
    return {"obs": name}


def _eq(a: Expr, b: Expr) -> Expr:
    return {"eq": [a, b]}


def _contains(m: Expr, e: Expr) -> Expr:
    return {"mset_contains": [m, e]}


# ---------------------------------------------------------------------------
# shopping cart


def build_shopping_cart(threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    """One adder and one deleter race over a cart holding one instance
    of item I; every other slot is a cart read.  The assertion: no
    session may observe the empty cart followed by the doubled one."""
    if threads < 2:
        raise ValueError("shopping cart needs an adder and a deleter")
    key = const("cart:u")
    add_item = [
        ReadInstr(key, "c"),
        AssignInstr("c2", {"mset_add": [var("c"), const("I")]}),
        WriteInstr(key, var("c2")),
    ]
    delete_item = [
        ReadInstr(key, "c"),
        AssignInstr("c2", {"mset_remove_all": [var("c"), const("I")]}),
        WriteInstr(key, var("c2")),
    ]

    sessions = []
    reader_gets: list[list[str]] = []
    for s in range(threads):
        txns = []
        labels = []
        if s == 0:
            txns.append(add_item)
        elif s == 1:
            txns.append(delete_item)
        while len(txns) < ops_per_thread:
            label = f"get_{s}_{len(txns)}"
            labels.append(label)
            txns.append([ReadInstr(key, "g", obs=label)])
        sessions.append(txns)
        if s >= 2:  # the assertion watches the dedicated reader sessions
            reader_gets.append(labels)

    clauses = []
    for labels in reader_gets:
        for before, after in zip(labels, labels[1:]):
            clauses.append(
                _never_pair(
                    _eq(_obs(before), const("")),
                    _eq(_obs(after), const("I,I")),
                )
            )
    program = Program(
        sessions,
        [Assertion("item-reappears-after-deletion", _and_all(clauses))],
    )
    return Benchmark(
        "shopping-cart",
        program,
        "I",
        "concurrent add/delete of one item with sequential cart reads",
    )


# ---------------------------------------------------------------------------
# Treiber stack


def build_treiber_stack(threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    """Each session attempts to pop the whole stack with one
    compare-and-swap transaction per level; a pop succeeds when its CAS
    read returns the node it targets.  The assertion: no node is popped
    by two sessions."""
    if threads < 3:
        raise ValueError("treiber stack needs two poppers and an observer")
    depth = ops_per_thread
    tops = [f"n{depth - i}" for i in range(depth)] + [""]
    head = const("head")
    poppers = threads - 1
    sessions = []
    for s in range(poppers):
        txns = []
        for i in range(depth):
            label = f"cas_{s}_{i}"
            txns.append(
                [
                    ReadInstr(head, "cur", obs=label),
                    IfInstr(
                        _eq(var("cur"), const(tops[i])),
                        WriteInstr(head, const(tops[i + 1])),
                    ),
                ]
            )
        sessions.append(txns)
    sessions.append(
        [[ReadInstr(head, "top", obs=f"peek_{i}")] for i in range(ops_per_thread)]
    )

    clauses = []
    for i in range(depth):
        for a in range(poppers):
            for b in range(a + 1, poppers):
                clauses.append(
                    _never_pair(
                        _eq(_obs(f"cas_{a}_{i}"), const(tops[i])),
                        _eq(_obs(f"cas_{b}_{i}"), const(tops[i])),
                    )
                )
    program = Program(sessions, [Assertion("element-popped-twice", _and_all(clauses))])
    return Benchmark(
        "treiber-stack",
        program,
        tops[0],
        "concurrent pops as CAS transactions over a shared head key",
    )


# ---------------------------------------------------------------------------
# Twitter


def build_twitter(threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    """User B tweets from several sessions; user A follows B and then
    refreshes the news feed.  The assertion: a tweet shown by one
    refresh never disappears from the next."""
    if threads < 3:
        raise ValueError("twitter needs two tweeter sessions and a reader")
    tweets_key = const("tweets:B")
    following_key = const("following:A")
    tweet_ids = []
    sessions = []
    for s in range(threads - 1):
        txns = []
        for i in range(ops_per_thread):
            tweet = f"t{s}_{i}"
            tweet_ids.append(tweet)
            txns.append(
                [
                    ReadInstr(tweets_key, "t"),
                    WriteInstr(tweets_key, {"mset_add": [var("t"), const(tweet)]}),
                ]
            )
        sessions.append(txns)

    reader = [
        [
            ReadInstr(following_key, "f"),
            WriteInstr(following_key, {"mset_add": [var("f"), const("B")]}),
        ]
    ]
    feeds = []
    for i in range(ops_per_thread - 1):
        label = f"feed_{i}"
        feeds.append(label)
        reader.append(
            [
                ReadInstr(following_key, "fw", obs=f"fw_{i}"),
                ReadInstr(tweets_key, "nf", obs=label),
            ]
        )
    sessions.append(reader)

    clauses = []
    for before, after in zip(feeds, feeds[1:]):
        for tweet in tweet_ids:
            clauses.append(
                _never_pair(
                    _contains(_obs(before), const(tweet)),
                    {"not": _contains(_obs(after), const(tweet))},
                )
            )
    program = Program(sessions, [Assertion("missing-tweets-in-feed", _and_all(clauses))])
    return Benchmark(
        "twitter",
        program,
        "",
        "tweets from two devices with follower feed refreshes",
    )


# ---------------------------------------------------------------------------
# courseware


def build_courseware_overflow(threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    """Students race to take the single seat of a course that an admin
    session opens concurrently: a student enrolls only after seeing the
    course open and the roster empty.  The assertion: at most one
    student can have passed that check."""
    if threads < 3:
        raise ValueError("courseware overflow needs an admin and two students")
    enrolled = const("enrolled:c")
    active = const("active:c")
    admin = [[WriteInstr(active, const("open"))]]
    while len(admin) < ops_per_thread:
        admin.append([ReadInstr(enrolled, "o", obs=f"watch_{len(admin)}")])

    sessions = [admin]
    passed = []
    for s in range(threads - 1):
        student = f"s{s}"
        open_and_free = {"and": [_eq(var("a"), const("open")), _eq(var("e"), const(""))]}
        passed.append(
            {
                "and": [
                    _eq(_obs(f"active_{s}"), const("open")),
                    _eq(_obs(f"roster_{s}"), const("")),
                ]
            }
        )
        txns = [
            [WriteInstr(const(f"registered:{student}"), const("yes"))],
            [
                ReadInstr(active, "a", obs=f"active_{s}"),
                ReadInstr(enrolled, "e", obs=f"roster_{s}"),
                IfInstr(
                    open_and_free,
                    WriteInstr(enrolled, {"mset_add": [var("e"), const(student)]}),
                ),
            ],
        ]
        while len(txns) < ops_per_thread:
            txns.append([ReadInstr(enrolled, "x", obs=f"recheck_{s}_{len(txns)}")])
        sessions.append(txns)

    clauses = []
    for a in range(threads - 1):
        for b in range(a + 1, threads - 1):
            clauses.append(_never_pair(passed[a], passed[b]))
    program = Program(sessions, [Assertion("course-registration-overflow", _and_all(clauses))])
    return Benchmark(
        "courseware-overflow",
        program,
        "",
        "capacity-one enrollment raced by two students",
    )


def build_courseware_removal(threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    """A student enrolls in a course being removed; removal clears the
    enrollment set.  The assertion: a check that sees the course removed
    must see nobody enrolled."""
    if threads < 3:
        raise ValueError("courseware removal needs a student, an admin, and a checker")
    active = const("active:c")
    enrolled = const("enrolled:c")
    student = [
        [WriteInstr(const("registered:s0"), const("yes"))],
        [
            ReadInstr(active, "a", obs="student_active"),
            IfInstr(_eq(var("a"), const("")), ReadInstr(enrolled, "e")),
            IfInstr(
                _eq(var("a"), const("")),
                WriteInstr(enrolled, {"mset_add": [var("e"), const("s0")]}),
            ),
        ],
    ]
    while len(student) < ops_per_thread:
        student.append([ReadInstr(enrolled, "x", obs=f"self_{len(student)}")])

    admin = [
        [ReadInstr(active, "pre", obs="admin_pre")],
        [WriteInstr(active, const("removed")), WriteInstr(enrolled, const(""))],
    ]
    while len(admin) < ops_per_thread:
        admin.append([ReadInstr(enrolled, "post", obs=f"admin_post_{len(admin)}")])

    checker = [
        [
            ReadInstr(active, "ca", obs="check_active"),
            ReadInstr(enrolled, "ce", obs="check_enrolled"),
        ]
    ]
    while len(checker) < ops_per_thread:
        checker.append([ReadInstr(enrolled, "w", obs=f"watch_{len(checker)}")])

    sessions = [student, admin, checker]
    for extra in range(threads - 3):
        sessions.append(
            [[ReadInstr(enrolled, "w", obs=f"extra_{extra}_{i}")] for i in range(ops_per_thread)]
        )

    clauses = [
        _never_pair(
            _eq(_obs("check_active"), const("removed")),
            {"ne": [_obs("check_enrolled"), const("")]},
        )
    ]
    program = Program(sessions, [Assertion("removed-course-registration", _and_all(clauses))])
    return Benchmark(
        "courseware-removal",
        program,
        "",
        "enrollment racing a course removal that clears the roster",
    )


MICROBENCHMARKS = {
    "shopping-cart": build_shopping_cart,
    "treiber-stack": build_treiber_stack,
    "twitter": build_twitter,
    "courseware-overflow": build_courseware_overflow,
    "courseware-removal": build_courseware_removal,
}


def build_benchmark(name: str, threads: int = 3, ops_per_thread: int = 3) -> Benchmark:
    try:
        builder = MICROBENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; known: {sorted(MICROBENCHMARKS)}") from None
    return builder(threads, ops_per_thread)
