"""Exception hierarchy.

Every error's ``str()`` is the exact text the server puts after ``ERR``.
"""


class DBError(Exception):
    """Base class for all database errors."""


class StorageError(DBError):
    pass


class EncodeError(DBError):
    pass


class InvalidQuery(DBError):
    def __init__(self, detail):
        super().__init__(f"invalid query: {detail}")
        self.detail = detail


class ExecutionError(DBError):
    pass


class CatalogError(DBError):
    pass


class UsageError(DBError):
    """API misuse: double unpin, commit of a finished transaction, ..."""


class AbortError(DBError):
    """A transaction was aborted by a timeout; the message is sent verbatim."""


BUFFER_ABORT_MESSAGE = "Buffer Manager Abort: not enough space"
LOCK_ABORT_MESSAGE = "Lock Manager Abort: lock timeout"
