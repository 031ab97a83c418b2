"""A small paged relational database: server, terminal client and join benchmark."""

from .config import Config
from .engine import Engine, Ok, ResultSet, RowsAffected
from .errors import (
    AbortError,
    CatalogError,
    DBError,
    EncodeError,
    ExecutionError,
    InvalidQuery,
    StorageError,
    UsageError,
)
from .parser import parse, render, tokenize

__version__ = "0.1.0"

__all__ = [
    "AbortError", "CatalogError", "Config", "DBError", "EncodeError", "Engine",
    "ExecutionError", "InvalidQuery", "Ok", "ResultSet", "RowsAffected", "StorageError",
    "UsageError", "parse", "render", "tokenize",
]
