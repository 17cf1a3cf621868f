"""Hand-built histories exercising known-good and known-bad shapes."""

from weakstore import new_history


def monotonic_read_violation():
    """Two reads in one transaction observe writers out of order.

    t1 writes k1=1; t2 writes k1=2 then k2=2; t3 reads k2=2 (from t2)
    and then k1=1 (from t1).  Read committed forces t2 before t1 in any
    commit order, so an order placing t1 first is invalid, but the
    history as a whole is still satisfiable.
    """
    h = new_history(0)
    t1 = h.begin_txn("a")
    h.append_write(t1, "k1", 1)
    h.commit_txn(t1)
    t2 = h.begin_txn("b")
    h.append_write(t2, "k1", 2)
    h.append_write(t2, "k2", 2)
    h.commit_txn(t2)
    t3 = h.begin_txn("c")
    h.append_read(t3, "k2", 2, t2)
    h.append_read(t3, "k1", 1, t1)
    h.commit_txn(t3)
    return h, (t1, t2, t3)


def causal_stale_read():
    """A read ignores a writer sitting in its own causal past.

    t2 overwrites k1 after reading it from t1; t4 reads t2's value and
    writes k2; t3 reads k2 from t4 (putting t2 in its causal past) yet
    still reads k1 from t1.  No commit order can place t2 both before
    and after t1, so causal consistency is unsatisfiable.
    """
    h = new_history(0)
    t1 = h.begin_txn("a")
    h.append_write(t1, "k1", 1)
    h.commit_txn(t1)
    t2 = h.begin_txn("b")
    h.append_read(t2, "k1", 1, t1)
    h.append_write(t2, "k1", 2)
    h.commit_txn(t2)
    t4 = h.begin_txn("d")
    h.append_read(t4, "k1", 2, t2)
    h.append_write(t4, "k2", 1)
    h.commit_txn(t4)
    t3 = h.begin_txn("c")
    h.append_read(t3, "k1", 1, t1)
    h.append_read(t3, "k2", 1, t4)
    h.commit_txn(t3)
    return h, (t1, t2, t3, t4)


def cart_reappearance():
    """Deleted item reappears doubled: weakly consistent, not serializable.

    The cart starts holding one instance of item I.  One session adds I
    (cart becomes I,I), another removes every I (cart becomes empty),
    and a reader session then sees the empty cart followed by the
    doubled one.
    """
    h = new_history("I")
    ta = h.begin_txn("adder")
    h.append_read(ta, "cart", "I", h.init_txn)
    h.append_write(ta, "cart", "I,I")
    h.commit_txn(ta)
    td = h.begin_txn("deleter")
    h.append_read(td, "cart", "I", h.init_txn)
    h.append_write(td, "cart", "")
    h.commit_txn(td)
    tr1 = h.begin_txn("reader")
    h.append_read(tr1, "cart", "", td)
    h.commit_txn(tr1)
    tr2 = h.begin_txn("reader")
    h.append_read(tr2, "cart", "I,I", ta)
    h.commit_txn(tr2)
    return h, (ta, td, tr1, tr2)


def write_both_read_other_state():
    """Mid-execution state of two cross-reading sessions.

    Session "1" ran a full transaction writing k1=1 and reading k2 from
    the initial state; session "2" has begun a transaction and written
    k2=1 but not yet read k1.
    """
    h = new_history(0)
    t1 = h.begin_txn("1")
    h.append_write(t1, "k1", 1)
    h.append_read(t1, "k2", 0, h.init_txn)
    h.commit_txn(t1)
    t2 = h.begin_txn("2")
    h.append_write(t2, "k2", 1)
    return h, (t1, t2)
