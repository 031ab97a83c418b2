"""Lock table: a system-wide Global mode plus per-table Shared/Exclusive modes.

Only Shared/Shared is compatible. Waiters poll a condition variable and give
up after ``wait_timeout``; there is no deadlock detection, so a cycle of
waiters resolves only by timing out.
"""

import enum
import threading
import time
from dataclasses import dataclass

from .config import POLL_INTERVAL, WAIT_TIMEOUT
from .errors import LOCK_ABORT_MESSAGE, AbortError, UsageError


class LockMode(enum.Enum):
    GLOBAL = "global"
    SHARED = "shared"
    EXCLUSIVE = "exclusive"


def compatible(a, b):
    return a is LockMode.SHARED and b is LockMode.SHARED


@dataclass(frozen=True)
class LockTarget:
    table: str = None  # None means the whole system

    @classmethod
    def system(cls):
        return cls(None)

    @classmethod
    def of_table(cls, name):
        return cls(name)

    @property
    def is_system(self):
        return self.table is None

    def __str__(self):
        return "system" if self.table is None else f"table {self.table}"


SYSTEM = LockTarget.system()


class LockTable:
    def __init__(self, poll_interval=POLL_INTERVAL, wait_timeout=WAIT_TIMEOUT):
        self.poll_interval = poll_interval
        self.wait_timeout = wait_timeout
        self.held = {}  # LockTarget -> {txn_id: LockMode}
        self._cv = threading.Condition()

    def _grantable(self, txn_id, target, mode):
        for tgt, holders in self.held.items():
            for other, other_mode in holders.items():
                if other == txn_id:
                    continue
                # Global is system-wide: it clashes with anything held anywhere.
                if mode is LockMode.GLOBAL or other_mode is LockMode.GLOBAL:
                    return False
                if tgt == target and not compatible(mode, other_mode):
                    return False
        return True

    def acquire(self, txn_id, target, mode):
        if (mode is LockMode.GLOBAL) != target.is_system:
            raise UsageError(f"{mode.value} lock cannot be taken on {target}")
        deadline = time.monotonic() + self.wait_timeout
        with self._cv:
            while True:
                current = self.held.get(target, {}).get(txn_id)
                if current is mode or current is LockMode.EXCLUSIVE:
                    return
                if self._grantable(txn_id, target, mode):
                    self.held.setdefault(target, {})[txn_id] = mode
                    self._cv.notify_all()
                    return
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise AbortError(LOCK_ABORT_MESSAGE)
                self._cv.wait(min(self.poll_interval, remaining))

    def release_all(self, txn_id):
        with self._cv:
            for target in list(self.held):
                holders = self.held[target]
                if holders.pop(txn_id, None) is not None and not holders:
                    del self.held[target]
            self._cv.notify_all()

    def locks_held(self, txn_id):
        with self._cv:
            return {t: h[txn_id] for t, h in self.held.items() if txn_id in h}

    def holders(self, target):
        with self._cv:
            return dict(self.held.get(target, {}))
