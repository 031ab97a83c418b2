import enum
import itertools
import threading
from collections import deque

from .errors import UsageError


class TxnState(enum.Enum):
    ACTIVE = "active"
    COMMITTED = "committed"
    ABORTED = "aborted"


class Transaction:
    __slots__ = ("id", "state", "label", "abort_reason")

    def __init__(self, txn_id, label=None):
        self.id = txn_id
        self.state = TxnState.ACTIVE
        self.label = label
        self.abort_reason = None

    def __repr__(self):
        return f"Transaction({self.id}, {self.state.value})"


class TransactionManager:
    """Hands out ids 0, 1, 2, ... and finishes transactions.

    Commit writes back every dirty page, drops the transaction's pins and
    releases its locks. Abort does the same minus the write-back; no data is
    rolled back.

    With ``record_history`` the (id, label) of each commit is appended while
    the committer still holds its locks, so the log order is a valid serial
    order of the committed transactions.
    """

    def __init__(self, pool, locks, record_history=False, history_limit=100_000):
        self.pool = pool
        self.locks = locks
        self._ids = itertools.count()
        self._id_mutex = threading.Lock()
        self.history = deque(maxlen=history_limit) if record_history else None
        self._history_mutex = threading.Lock()

    def begin(self, label=None):
        with self._id_mutex:
            txn_id = next(self._ids)
        return Transaction(txn_id, label)

    def commit(self, txn):
        if txn.state is not TxnState.ACTIVE:
            raise UsageError(f"transaction {txn.id} is {txn.state.value}")
        try:
            self.pool.release_pins(txn.id)
            # Pins of other live sessions must survive (table lock mode).
            self.pool.flush_all(reset_pins=False)
            if self.history is not None:
                with self._history_mutex:
                    self.history.append((txn.id, txn.label))
        finally:
            self.locks.release_all(txn.id)
        txn.state = TxnState.COMMITTED

    def abort(self, txn, reason=None):
        if txn.state is not TxnState.ACTIVE:
            return
        try:
            self.pool.release_pins(txn.id)
        finally:
            self.locks.release_all(txn.id)
        txn.state = TxnState.ABORTED
        txn.abort_reason = reason
