"""In-memory table metadata, mirrored to a line-oriented catalog file.

Catalog file format, one newline-terminated line per table::

    <name>|<field>:<INT|VARCHAR>|<field>:<INT|VARCHAR>...
"""

import enum
import os
import re
import threading
from dataclasses import dataclass

from .errors import CatalogError, ExecutionError

CATALOG_FILE = "catalog.edb"
TABLE_SUFFIX = ".tbl"

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_identifier(name):
    return isinstance(name, str) and IDENT_RE.match(name) is not None


class FieldType(enum.Enum):
    INT = "INT"
    VARCHAR = "VARCHAR"


@dataclass(frozen=True)
class Schema:
    table_name: str
    fields: tuple  # ((name, FieldType), ...)

    def __post_init__(self):
        if not is_identifier(self.table_name):
            raise CatalogError(f"bad table name: {self.table_name!r}")
        if not self.fields:
            raise CatalogError("a table needs at least one field")
        names = [name for name, _ in self.fields]
        if len(set(names)) != len(names):
            raise CatalogError(f"duplicate field name in table {self.table_name}")
        for name, ftype in self.fields:
            if not is_identifier(name) or not isinstance(ftype, FieldType):
                raise CatalogError(f"bad field definition: {name!r}")

    @property
    def field_names(self):
        return [name for name, _ in self.fields]

    def index_of(self, name):
        for i, (fname, _) in enumerate(self.fields):
            if fname == name:
                return i
        raise ExecutionError(f"unknown column: {name}")

    def to_line(self):
        parts = [self.table_name]
        parts.extend(f"{name}:{ftype.value}" for name, ftype in self.fields)
        return "|".join(parts)

    @classmethod
    def from_line(cls, line):
        name, *cols = line.split("|")
        fields = []
        for col in cols:
            fname, _, tname = col.partition(":")
            try:
                fields.append((fname, FieldType(tname)))
            except ValueError:
                raise CatalogError(f"corrupt catalog line: {line!r}") from None
        return cls(name, tuple(fields))


class Catalog:
    """Table name -> Schema. Mutations rewrite the catalog file atomically."""

    def __init__(self, data_dir):
        self.data_dir = data_dir
        self.path = os.path.join(data_dir, CATALOG_FILE)
        self._schemas = {}
        self._mutex = threading.Lock()
        self._load()

    def _load(self):
        if not os.path.exists(self.path):
            return
        with open(self.path, encoding="ascii") as f:
            for line in f:
                line = line.rstrip("\n")
                if line:
                    schema = Schema.from_line(line)
                    self._schemas[schema.table_name] = schema

    def _save(self):
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="ascii", newline="\n") as f:
            for name in sorted(self._schemas):
                f.write(self._schemas[name].to_line() + "\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.path)

    def check_files(self):
        """Raise CatalogError unless catalog entries and .tbl files agree."""
        on_disk = {
            entry[: -len(TABLE_SUFFIX)]
            for entry in os.listdir(self.data_dir)
            if entry.endswith(TABLE_SUFFIX)
        }
        registered = set(self._schemas)
        if on_disk != registered:
            missing = sorted(registered - on_disk)
            orphans = sorted(on_disk - registered)
            raise CatalogError(
                f"catalog mismatch: missing files {missing}, unregistered files {orphans}"
            )

    def register_table(self, schema):
        with self._mutex:
            if schema.table_name in self._schemas:
                raise CatalogError(f"table already exists: {schema.table_name}")
            self._schemas[schema.table_name] = schema
            self._save()

    def unregister_table(self, name):
        with self._mutex:
            if name not in self._schemas:
                raise CatalogError(f"no such table: {name}")
            del self._schemas[name]
            self._save()

    def get_schema(self, name):
        try:
            return self._schemas[name]
        except KeyError:
            raise CatalogError(f"no such table: {name}") from None

    def has_table(self, name):
        return name in self._schemas

    def list_tables(self):
        return sorted(self._schemas)
