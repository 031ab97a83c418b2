"""Fixed-size buffer pool with pin counting and timed waits for a free slot."""

import threading
import time
from collections import Counter

from .config import POLL_INTERVAL, POOL_SIZE, WAIT_TIMEOUT
from .errors import BUFFER_ABORT_MESSAGE, AbortError, UsageError
from .storage import Page


class Buffer:
    __slots__ = ("index", "page", "block", "pin_count", "dirty", "owners")

    def __init__(self, index, block_size):
        self.index = index
        self.page = Page(block_size)
        self.block = None
        self.pin_count = 0
        self.dirty = False
        # owner -> outstanding pins; pins taken without an owner are not tracked
        self.owners = Counter()

    def __repr__(self):
        return f"Buffer({self.index}, block={self.block}, pins={self.pin_count}, dirty={self.dirty})"


class BufferPool:
    def __init__(self, files, size=POOL_SIZE, poll_interval=POLL_INTERVAL,
                 wait_timeout=WAIT_TIMEOUT):
        if size < 1:
            raise ValueError("pool size must be positive")
        self.files = files
        self.poll_interval = poll_interval
        self.wait_timeout = wait_timeout
        self.buffers = tuple(Buffer(i, files.block_size) for i in range(size))
        self._cv = threading.Condition()
        self.disk_reads = 0
        self.disk_writes = 0

    def __len__(self):
        return len(self.buffers)

    def _find(self, block):
        for buf in self.buffers:
            if buf.block == block:
                return buf
        return None

    def _free(self):
        for buf in self.buffers:
            if buf.pin_count == 0:
                return buf
        return None

    def _write_back(self, buf):
        if buf.dirty:
            self.files.write_block(buf.block, buf.page)
            self.disk_writes += 1
            buf.dirty = False

    def _link(self, buf, block):
        self._write_back(buf)
        buf.block = None
        self.files.read_into(block, buf.page)
        self.disk_reads += 1
        buf.block = block

    def _take(self, buf, owner):
        buf.pin_count += 1
        if owner is not None:
            buf.owners[owner] += 1
        return buf

    def pin(self, block, owner=None):
        """Pin ``block`` into a buffer and return it as the handle.

        Re-runs the whole lookup on every wake-up; raises AbortError once
        ``wait_timeout`` passes with every buffer pinned.
        """
        deadline = time.monotonic() + self.wait_timeout
        with self._cv:
            while True:
                buf = self._find(block)
                if buf is not None:
                    return self._take(buf, owner)
                buf = self._free()
                if buf is not None:
                    self._link(buf, block)
                    return self._take(buf, owner)
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise AbortError(BUFFER_ABORT_MESSAGE)
                self._cv.wait(min(self.poll_interval, remaining))

    def unpin(self, buf, owner=None):
        with self._cv:
            if buf.pin_count == 0:
                raise UsageError("unpin of a buffer that is not pinned")
            if owner is not None:
                if buf.owners[owner] == 0:
                    raise UsageError(f"owner {owner} holds no pin on buffer {buf.index}")
                buf.owners[owner] -= 1
                if not buf.owners[owner]:
                    del buf.owners[owner]
            buf.pin_count -= 1
            if buf.pin_count == 0:
                self._cv.notify_all()

    def mark_dirty(self, buf):
        with self._cv:
            if buf.pin_count == 0 or buf.block is None:
                raise UsageError("mark_dirty on an unpinned buffer")
            buf.dirty = True

    def flush_all(self, reset_pins=True):
        """Write every dirty buffer; by default also drop every pin."""
        with self._cv:
            for buf in self.buffers:
                if buf.block is not None:
                    self._write_back(buf)
                if reset_pins:
                    buf.pin_count = 0
                    buf.owners.clear()
            self._cv.notify_all()

    def release_pins(self, owner):
        """Drop every pin still held by ``owner``; returns how many were dropped."""
        dropped = 0
        with self._cv:
            for buf in self.buffers:
                n = buf.owners.pop(owner, 0)
                if n:
                    buf.pin_count -= n
                    dropped += n
            if dropped:
                self._cv.notify_all()
        return dropped

    def pins_held(self, owner):
        with self._cv:
            return sum(buf.owners.get(owner, 0) for buf in self.buffers)

    def discard_table(self, table_name):
        """Unlink every buffer holding a block of ``table_name`` without writing it."""
        with self._cv:
            for buf in self.buffers:
                if buf.block is not None and buf.block.table_name == table_name:
                    if buf.pin_count:
                        raise UsageError(f"table {table_name} still has pinned buffers")
                    buf.block = None
                    buf.dirty = False
                    buf.page.clear()
            self._cv.notify_all()

    def snapshot(self):
        """(block, pin_count, dirty) per buffer, for tests and introspection."""
        with self._cv:
            return [(b.block, b.pin_count, b.dirty) for b in self.buffers]
