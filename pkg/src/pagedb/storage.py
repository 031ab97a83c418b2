"""Block-addressed table files and the fixed-width record codec.

On disk a table is ``<data_dir>/<name>.tbl``: a run of ``block_size`` byte
blocks. Each block starts with a 4-byte little-endian occupancy count,
followed by ``occupancy`` records of ``record_size`` bytes, then zeros.
"""

import os
import struct
import threading
from dataclasses import dataclass

from .catalog import TABLE_SUFFIX, FieldType, is_identifier
from .config import BLOCK_SIZE, HEADER_SIZE, INT_WIDTH, VARCHAR_WIDTH
from .errors import EncodeError, StorageError

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1

_HEADER = struct.Struct("<I")


@dataclass(frozen=True)
class BlockId:
    table_name: str
    block_number: int

    def __post_init__(self):
        if not is_identifier(self.table_name):
            raise StorageError(f"bad table name: {self.table_name!r}")
        if self.block_number < 0:
            raise StorageError("block number must be non-negative")


class Page:
    """In-memory image of one block; always exactly ``size`` bytes."""

    __slots__ = ("data",)

    def __init__(self, size=BLOCK_SIZE, data=None):
        if data is None:
            self.data = bytearray(size)
        else:
            if len(data) != size:
                raise StorageError(f"page must be {size} bytes, got {len(data)}")
            self.data = bytearray(data)

    def __len__(self):
        return len(self.data)

    def __eq__(self, other):
        return isinstance(other, Page) and self.data == other.data

    def __bytes__(self):
        return bytes(self.data)

    @property
    def occupancy(self):
        return _HEADER.unpack_from(self.data, 0)[0]

    @occupancy.setter
    def occupancy(self, count):
        _HEADER.pack_into(self.data, 0, count)

    def load(self, data):
        self.data[:] = data

    def clear(self):
        self.data[:] = bytes(len(self.data))


class RecordLayout:
    def __init__(self, schema, varchar_width=VARCHAR_WIDTH, block_size=BLOCK_SIZE):
        self.schema = schema
        self.varchar_width = varchar_width
        self.block_size = block_size
        self.types = [ftype for _, ftype in schema.fields]
        fmt = "".join("i" if t is FieldType.INT else f"{varchar_width}s" for t in self.types)
        self._struct = struct.Struct("<" + fmt)
        self.record_size = self._struct.size
        self.records_per_block = (block_size - HEADER_SIZE) // self.record_size
        if self.records_per_block < 1:
            raise StorageError(
                f"record of {self.record_size} bytes does not fit a {block_size}-byte block"
            )
        assert self.record_size == sum(
            INT_WIDTH if t is FieldType.INT else varchar_width for t in self.types
        )
        self._str_cols = [i for i, t in enumerate(self.types) if t is FieldType.VARCHAR]

    def slot_offset(self, slot):
        return HEADER_SIZE + slot * self.record_size

    def check_values(self, values):
        if len(values) != len(self.types):
            raise EncodeError(
                f"table {self.schema.table_name} expects {len(self.types)} values, got {len(values)}"
            )
        for (name, ftype), value in zip(self.schema.fields, values):
            if ftype is FieldType.INT:
                if type(value) is not int:
                    raise EncodeError(f"type mismatch: column {name} is INT")
                if not INT_MIN <= value <= INT_MAX:
                    raise EncodeError(f"integer out of range for column {name}")
            else:
                if not isinstance(value, str):
                    raise EncodeError(f"type mismatch: column {name} is VARCHAR")
                try:
                    raw = value.encode("ascii")
                except UnicodeEncodeError:
                    raise EncodeError(f"non-ascii string for column {name}") from None
                if len(raw) > self.varchar_width:
                    raise EncodeError(
                        f"string too long for column {name} (max {self.varchar_width} bytes)"
                    )
                if b"\x00" in raw:
                    raise EncodeError(f"NUL byte in string for column {name}")

    def encode(self, values):
        self.check_values(values)
        args = [v.encode("ascii") if isinstance(v, str) else v for v in values]
        return self._struct.pack(*args)

    def _fix(self, rec):
        if not self._str_cols:
            return rec
        rec = list(rec)
        for i in self._str_cols:
            rec[i] = rec[i].rstrip(b"\x00").decode("ascii")
        return tuple(rec)

    def decode(self, raw):
        if len(raw) != self.record_size:
            raise EncodeError(f"record must be {self.record_size} bytes, got {len(raw)}")
        return self._fix(self._struct.unpack(raw))

    def decode_block(self, page):
        """All occupied records of a page, in slot order."""
        count = page.occupancy
        if count > self.records_per_block:
            raise StorageError(f"corrupt block header: occupancy {count}")
        end = HEADER_SIZE + count * self.record_size
        recs = self._struct.iter_unpack(memoryview(page.data)[HEADER_SIZE:end])
        if not self._str_cols:
            return list(recs)
        return [self._fix(r) for r in recs]

    def read_slot(self, page, slot):
        off = self.slot_offset(slot)
        return self._fix(self._struct.unpack_from(page.data, off))

    def write_slot(self, page, slot, values):
        off = self.slot_offset(slot)
        page.data[off : off + self.record_size] = self.encode(values)


def encode_record(layout, values):
    return layout.encode(values)


def decode_record(layout, raw):
    return layout.decode(raw)


class FileManager:
    """All table-file I/O. Calls touching one file are serialized."""

    def __init__(self, data_dir, block_size=BLOCK_SIZE):
        self.data_dir = data_dir
        self.block_size = block_size
        os.makedirs(data_dir, exist_ok=True)
        self._locks = {}
        self._locks_mutex = threading.Lock()

    def path(self, table_name):
        if not is_identifier(table_name):
            raise StorageError(f"bad table name: {table_name!r}")
        return os.path.join(self.data_dir, table_name + TABLE_SUFFIX)

    def _lock(self, table_name):
        with self._locks_mutex:
            lock = self._locks.get(table_name)
            if lock is None:
                lock = self._locks[table_name] = threading.Lock()
            return lock

    def _size(self, path):
        try:
            return os.path.getsize(path)
        except FileNotFoundError:
            raise StorageError(f"no file for table {os.path.basename(path)[:-4]}") from None

    def exists(self, table_name):
        return os.path.exists(self.path(table_name))

    def create_table_file(self, table_name):
        path = self.path(table_name)
        with self._lock(table_name):
            try:
                open(path, "xb").close()
            except FileExistsError:
                raise StorageError(f"file already exists for table {table_name}") from None

    def block_count(self, table_name):
        path = self.path(table_name)
        with self._lock(table_name):
            return self._size(path) // self.block_size

    def read_block(self, block):
        path = self.path(block.table_name)
        with self._lock(block.table_name):
            count = self._size(path) // self.block_size
            if block.block_number >= count:
                raise StorageError(f"block out of range: {block.table_name}#{block.block_number}")
            with open(path, "rb") as f:
                f.seek(block.block_number * self.block_size)
                data = f.read(self.block_size)
        return Page(self.block_size, data)

    def read_into(self, block, page):
        page.load(bytes(self.read_block(block)))

    def write_block(self, block, page):
        if len(page) != self.block_size:
            raise StorageError(f"page must be {self.block_size} bytes")
        path = self.path(block.table_name)
        with self._lock(block.table_name):
            count = self._size(path) // self.block_size
            if block.block_number > count:
                raise StorageError(f"block out of range: {block.table_name}#{block.block_number}")
            try:
                with open(path, "r+b") as f:
                    f.seek(block.block_number * self.block_size)
                    f.write(page.data)
            except OSError as e:
                raise StorageError(f"write failed for {block.table_name}: {e}") from e

    def append_block(self, table_name):
        path = self.path(table_name)
        with self._lock(table_name):
            size = self._size(path)
            number = size // self.block_size
            try:
                with open(path, "r+b") as f:
                    f.seek(number * self.block_size)
                    f.write(bytes(self.block_size))
            except OSError as e:
                raise StorageError(f"append failed for {table_name}: {e}") from e
        return BlockId(table_name, number)

    def delete_table_file(self, table_name):
        path = self.path(table_name)
        with self._lock(table_name):
            try:
                os.remove(path)
            except FileNotFoundError:
                raise StorageError(f"no file for table {table_name}") from None
