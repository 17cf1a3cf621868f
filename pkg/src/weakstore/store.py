"""Serial transaction executor over a history.

Transactions run one at a time behind a single global lock held from
begin to commit; concurrency between sessions is simulated entirely in
the handling of reads.  A read of a key the transaction already wrote
returns that value locally.  Any other read collects every committed
transaction whose final write to the key the isolation level permits as
a source, then returns one of them uniformly at random from a seeded
generator.  With the delay option disabled, identical (config, workload,
seed) triples replay identical histories.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass
from typing import Optional

from .history import History, LiveTransactionExists, Value
from .isolation import IsolationLevel, get_level, valid_read_sources


class StoreError(Exception):
    """Base class for executor misuse."""


class NoLiveTransaction(StoreError):
    """The session tried to operate outside a transaction."""


class BeginTimeout(StoreError):
    """Timed out waiting for another session to release the store."""


class InternalNoCandidate(StoreError):
    """A read found no isolation-valid source.

    This never happens for the shipped levels (every read can fall back
    to some committed write); seeing it indicates a bug in the isolation
    engine, so it is kept as a distinct, loud failure.
    """


@dataclass
class StoreConfig:
    level: "IsolationLevel | str" = "serializability"
    seed: int = 0
    latest_per_session: bool = False
    delay_max_ms: int = 0
    default_value: Value = 0

    def resolved_level(self) -> IsolationLevel:
        return get_level(self.level)


class Store:
    """One shared store instance; sessions interact through handles.

    All access funnels through one mutual-exclusion region: `begin`
    blocks until no other session holds a live transaction, and `commit`
    releases it.  Handles may live on different threads.
    """

    def __init__(self, config: StoreConfig):
        self.config = config
        self.level = config.resolved_level()
        self.history = History(config.default_value)
        self.exec_order: list[int] = [self.history.init_txn]
        self.rng = random.Random(config.seed)
        self._cond = threading.Condition()
        self._owner: Optional[str] = None
        self._session_count = 0

    def session(self, session_id: Optional[str] = None) -> "SessionHandle":
        if session_id is None:
            session_id = f"s{self._session_count}"
        self._session_count += 1
        return SessionHandle(self, session_id)

    # ------------------------------------------------------------------

    def begin(self, session_id: str, timeout: Optional[float] = None) -> int:
        if self.config.delay_max_ms > 0:
            # jitter what little scheduling freedom real client threads
            # have; pointless (and skipped) for single-threaded drivers
            time.sleep(self.rng.uniform(0, self.config.delay_max_ms) / 1000.0)
        with self._cond:
            if self._owner == session_id:
                raise LiveTransactionExists(
                    f"session {session_id!r} already has a live transaction"
                )
            if not self._cond.wait_for(lambda: self._owner is None, timeout):
                raise BeginTimeout(
                    f"session {session_id!r} timed out waiting for the store lock"
                )
            txn = self.history.begin_txn(session_id)
            self._owner = session_id
            self.exec_order.append(txn)
            return txn

    def _require_owner(self, session_id: str) -> int:
        if self._owner != session_id:
            raise NoLiveTransaction(
                f"session {session_id!r} has no live transaction"
            )
        txn = self.history.live_txn(session_id)
        assert txn is not None
        return txn

    def write(self, session_id: str, key: str, value: Value) -> None:
        with self._cond:
            txn = self._require_owner(session_id)
            self.history.append_write(txn, key, value)

    def read(self, session_id: str, key: str) -> Value:
        with self._cond:
            txn = self._require_owner(session_id)
            local = self.history.last_write(txn, key)
            if local is not None:
                self.history.append_local_read(txn, key)
                return local.value
            sources = valid_read_sources(
                self.history, txn, key, self.level, exec_order=tuple(self.exec_order)
            )
            if self.config.latest_per_session:
                sources = self._latest_per_session(sources)
            if not sources:
                raise InternalNoCandidate(
                    f"no valid source for read of {key!r} in txn {txn} "
                    f"under {self.level.name}"
                )
            source, value = self.rng.choice(sources)
            self.history.append_read(txn, key, value, source)
            return value

    def commit(self, session_id: str) -> None:
        with self._cond:
            txn = self._require_owner(session_id)
            self.history.commit_txn(txn)
            self._owner = None
            self._cond.notify_all()

    # ------------------------------------------------------------------

    def _latest_per_session(
        self, sources: list[tuple[int, Value]]
    ) -> list[tuple[int, Value]]:
        """Keep only each session's latest valid write (the initial
        transaction counts as its own session)."""
        best: dict[Optional[str], tuple[int, int, Value]] = {}
        for tid, value in sources:
            session = self.history.session_of(tid)
            pos = -1 if session is None else self.history.session_position(tid)
            cur = best.get(session)
            if cur is None or pos > cur[0]:
                best[session] = (pos, tid, value)
        return sorted((tid, value) for _, tid, value in best.values())


class SessionHandle:
    """A client connection: at most one live transaction at a time.

    Carries the transaction-scoped variable valuation used by program
    execution; `begin` resets it.
    """

    def __init__(self, store: Store, session_id: str):
        self.store = store
        self.session_id = session_id
        self.vars: dict[str, Value] = {}

    @property
    def live_txn(self) -> Optional[int]:
        return self.store.history.live_txn(self.session_id)

    def begin(self, timeout: Optional[float] = None) -> int:
        self.vars = {}
        return self.store.begin(self.session_id, timeout)

    def read(self, key: str) -> Value:
        return self.store.read(self.session_id, key)

    def write(self, key: str, value: Value) -> None:
        self.store.write(self.session_id, key, value)

    def commit(self) -> None:
        self.store.commit(self.session_id)
