"""Query executor: six statement handlers over full scans through the pool."""

import operator
from dataclasses import dataclass, field

from .buffer import BufferPool
from .catalog import Catalog, FieldType, Schema
from .config import Config
from .errors import CatalogError, DBError, ExecutionError
from .locks import SYSTEM, LockMode, LockTable, LockTarget
from .parser import Const, CreateTable, DropTable, Insert, Select, Update, parse
from .storage import BlockId, FileManager, RecordLayout
from .txn import TransactionManager

_OPS = {"=": operator.eq, "<>": operator.ne, "<": operator.lt, ">": operator.gt}


@dataclass
class Ok:
    count: int = 0


@dataclass
class RowsAffected:
    count: int


@dataclass
class ResultSet:
    columns: list
    rows: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.rows)


def _value_type(value):
    return FieldType.INT if isinstance(value, int) else FieldType.VARCHAR


class Scope:
    """Column resolution over one or two tables.

    ``resolve`` maps a FieldRef to (side, index, type); side 0 is the first
    FROM table, side 1 the second.
    """

    def __init__(self, schemas):
        self.schemas = schemas

    def resolve(self, ref):
        hits = []
        for side, schema in enumerate(self.schemas):
            if ref.table is not None and ref.table != schema.table_name:
                continue
            for idx, (name, ftype) in enumerate(schema.fields):
                if name == ref.name:
                    hits.append((side, idx, ftype))
        if not hits:
            raise ExecutionError(f"unknown column: {ref}")
        if len(hits) > 1:
            raise ExecutionError(f"ambiguous column: {ref}")
        return hits[0]


def _getter(side, idx):
    if side == 0:
        return lambda ra, rb: ra[idx]
    return lambda ra, rb: rb[idx]


def compile_term(term, scope):
    """Type-check a term and turn it into ``fn(row_a, row_b) -> bool``."""
    op = _OPS[term.op]
    sides = []
    for expr in (term.lhs, term.rhs):
        if isinstance(expr, Const):
            sides.append(("const", expr.value, _value_type(expr.value)))
        else:
            side, idx, ftype = scope.resolve(expr)
            sides.append((side, idx, ftype))
    (ls, lv, lt), (rs, rv, rt) = sides
    if lt is not rt:
        raise ExecutionError(
            f"type mismatch: cannot compare {lt.value} with {rt.value} in {term.op} term"
        )
    if ls == "const" and rs == "const":
        result = op(lv, rv)
        return lambda ra, rb: result
    if rs == "const":
        if ls == 0:
            return lambda ra, rb: op(ra[lv], rv)
        return lambda ra, rb: op(rb[lv], rv)
    if ls == "const":
        if rs == 0:
            return lambda ra, rb: op(lv, ra[rv])
        return lambda ra, rb: op(lv, rb[rv])
    if (ls, rs) == (0, 1):
        return lambda ra, rb: op(ra[lv], rb[rv])
    if (ls, rs) == (1, 0):
        return lambda ra, rb: op(rb[lv], ra[rv])
    left, right = _getter(ls, lv), _getter(rs, rv)
    return lambda ra, rb: op(left(ra, rb), right(ra, rb))


def compile_predicate(terms, scope):
    fns = [compile_term(t, scope) for t in terms]
    if not fns:
        return lambda ra, rb: True
    if len(fns) == 1:
        return fns[0]

    def conj(ra, rb):
        for fn in fns:
            if not fn(ra, rb):
                return False
        return True

    return conj


def _projector(select, scope):
    """Returns (column names, fn(row_a, row_b) -> output tuple)."""
    schemas = scope.schemas
    if select.is_star:
        if len(schemas) == 1:
            return schemas[0].field_names, lambda ra, rb: ra
        columns = [f"{s.table_name}.{n}" for s in schemas for n in s.field_names]
        return columns, lambda ra, rb: ra + rb
    slots = [scope.resolve(ref)[:2] for ref in select.projection]
    columns = [str(ref) for ref in select.projection]
    if all(side == 0 for side, _ in slots):
        get = operator.itemgetter(*[i for _, i in slots])
        if len(slots) == 1:
            return columns, lambda ra, rb: (get(ra),)
        return columns, lambda ra, rb: get(ra)

    def project(ra, rb):
        return tuple(ra[i] if side == 0 else rb[i] for side, i in slots)

    return columns, project


class Engine:
    """Owns storage, catalog, buffer pool, lock table and transaction manager."""

    def __init__(self, config=None, **overrides):
        if config is None:
            config = Config(**overrides)
        elif overrides:
            raise TypeError("pass either a Config or keyword overrides")
        self.config = config
        self.files = FileManager(config.data_dir, config.block_size)
        self.catalog = Catalog(config.data_dir)
        self.catalog.check_files()
        self.pool = BufferPool(self.files, config.pool_size,
                               config.poll_interval, config.wait_timeout)
        self.locks = LockTable(config.poll_interval, config.wait_timeout)
        self.txns = TransactionManager(self.pool, self.locks, config.record_history)
        self._layouts = {}

    # --- plumbing ----------------------------------------------------------

    def layout(self, table):
        schema = self.catalog.get_schema(table)
        cached = self._layouts.get(table)
        if cached is None or cached.schema is not schema:
            cached = RecordLayout(schema, self.config.varchar_width, self.config.block_size)
            self._layouts[table] = cached
        return cached

    def scan(self, txn, table, layout=None):
        """Yield every record of ``table`` in file order.

        Each block is decoded while pinned and unpinned before its rows are
        handed out, so a paused generator holds no pins.
        """
        layout = layout or self.layout(table)
        owner = txn.id
        for number in range(self.files.block_count(table)):
            buf = self.pool.pin(BlockId(table, number), owner)
            try:
                rows = layout.decode_block(buf.page)
            finally:
                self.pool.unpin(buf, owner)
            yield from rows

    def _acquire_locks(self, stmt, txn):
        if self.config.lock_mode == "global":
            self.locks.acquire(txn.id, SYSTEM, LockMode.GLOBAL)
        elif isinstance(stmt, Select):
            for table in stmt.tables:
                self.locks.acquire(txn.id, LockTarget.of_table(table), LockMode.SHARED)
        else:
            self.locks.acquire(txn.id, LockTarget.of_table(stmt.table), LockMode.EXCLUSIVE)

    # --- entry points ------------------------------------------------------

    def execute(self, stmt, txn):
        self._acquire_locks(stmt, txn)
        if isinstance(stmt, CreateTable):
            return self.create_table(txn, stmt)
        if isinstance(stmt, DropTable):
            return self.drop_table(txn, stmt.table)
        if isinstance(stmt, Insert):
            return self.insert(txn, stmt.table, stmt.values)
        if isinstance(stmt, Update):
            return self.update(txn, stmt)
        if isinstance(stmt, Select):
            if not stmt.is_join:
                return self.select(txn, stmt)
            if self.config.join_impl == "hash":
                return self.hash_join(txn, stmt)
            return self.nested_loop_join(txn, stmt)
        raise TypeError(f"not a statement: {stmt!r}")

    def run(self, text):
        """Parse and execute one statement as its own transaction."""
        stmt = parse(text)
        txn = self.txns.begin(label=text)
        try:
            outcome = self.execute(stmt, txn)
            self.txns.commit(txn)
        except BaseException as e:
            self.txns.abort(txn, str(e) if isinstance(e, DBError) else repr(e))
            raise
        return outcome

    def close(self):
        self.pool.flush_all()

    # --- handlers ----------------------------------------------------------

    def create_table(self, txn, stmt):
        if self.catalog.has_table(stmt.table):
            raise CatalogError(f"table already exists: {stmt.table}")
        schema = Schema(stmt.table, tuple(stmt.fields))
        RecordLayout(schema, self.config.varchar_width, self.config.block_size)
        self.files.create_table_file(stmt.table)
        try:
            self.catalog.register_table(schema)
        except DBError:
            self.files.delete_table_file(stmt.table)
            raise
        return Ok()

    def drop_table(self, txn, table):
        self.catalog.unregister_table(table)
        self._layouts.pop(table, None)
        self.pool.discard_table(table)
        self.files.delete_table_file(table)
        return Ok()

    def insert(self, txn, table, values):
        layout = self.layout(table)
        record = layout.encode(list(values))
        owner = txn.id
        count = self.files.block_count(table)
        if count:
            buf = self.pool.pin(BlockId(table, count - 1), owner)
            try:
                used = buf.page.occupancy
                if used < layout.records_per_block:
                    off = layout.slot_offset(used)
                    buf.page.data[off : off + layout.record_size] = record
                    buf.page.occupancy = used + 1
                    self.pool.mark_dirty(buf)
                    return RowsAffected(1)
            finally:
                self.pool.unpin(buf, owner)
        block = self.files.append_block(table)
        buf = self.pool.pin(block, owner)
        try:
            off = layout.slot_offset(0)
            buf.page.data[off : off + layout.record_size] = record
            buf.page.occupancy = 1
            self.pool.mark_dirty(buf)
        finally:
            self.pool.unpin(buf, owner)
        return RowsAffected(1)

    def update(self, txn, stmt):
        layout = self.layout(stmt.table)
        schema = layout.schema
        target = schema.index_of(stmt.set_field)
        ftype = schema.fields[target][1]
        if _value_type(stmt.set_value) is not ftype:
            raise ExecutionError(f"type mismatch: column {stmt.set_field} is {ftype.value}")
        pred = compile_predicate(stmt.where.terms, Scope([schema]))
        # validates the new value (length, range) before touching any page
        probe = [0 if t is FieldType.INT else "" for t in layout.types]
        probe[target] = stmt.set_value
        layout.check_values(probe)

        owner = txn.id
        changed = 0
        for number in range(self.files.block_count(stmt.table)):
            buf = self.pool.pin(BlockId(stmt.table, number), owner)
            try:
                dirty = False
                for slot, rec in enumerate(layout.decode_block(buf.page)):
                    if pred(rec, None):
                        rec = list(rec)
                        rec[target] = stmt.set_value
                        layout.write_slot(buf.page, slot, rec)
                        dirty = True
                        changed += 1
                if dirty:
                    self.pool.mark_dirty(buf)
            finally:
                self.pool.unpin(buf, owner)
        return RowsAffected(changed)

    def select(self, txn, stmt):
        (table,) = stmt.tables
        layout = self.layout(table)
        scope = Scope([layout.schema])
        pred = compile_predicate(stmt.where.terms, scope)
        columns, project = _projector(stmt, scope)
        rows = [project(r, None) for r in self.scan(txn, table, layout) if pred(r, None)]
        return ResultSet(columns, rows)

    def _join_setup(self, stmt):
        a, b = stmt.tables
        if a == b:
            raise ExecutionError(f"self-join is not supported: {a}")
        la, lb = self.layout(a), self.layout(b)
        scope = Scope([la.schema, lb.schema])
        columns, project = _projector(stmt, scope)
        return la, lb, scope, columns, project

    def nested_loop_join(self, txn, stmt):
        """Cross product of both tables in outer-major file order, filtered."""
        la, lb, scope, columns, project = self._join_setup(stmt)
        pred = compile_predicate(stmt.where.terms, scope)
        a, b = stmt.tables
        rows = []
        for ra in self.scan(txn, a, la):
            for rb in self.scan(txn, b, lb):
                if pred(ra, rb):
                    rows.append(project(ra, rb))
        return ResultSet(columns, rows)

    def hash_join(self, txn, stmt):
        """Equi-join via a hash table on the smaller input.

        Falls back to the nested loop when no term equates a field of the
        first table with a field of the second.
        """
        la, lb, scope, columns, project = self._join_setup(stmt)
        keys_a, keys_b, residual = [], [], []
        for term in stmt.where.terms:
            compile_term(term, scope)  # type and name checks for every term
            if term.op == "=" and not isinstance(term.lhs, Const) and not isinstance(term.rhs, Const):
                ls, li, _ = scope.resolve(term.lhs)
                rs, ri, _ = scope.resolve(term.rhs)
                if (ls, rs) == (0, 1):
                    keys_a.append(li)
                    keys_b.append(ri)
                    continue
                if (ls, rs) == (1, 0):
                    keys_a.append(ri)
                    keys_b.append(li)
                    continue
            residual.append(term)
        if not keys_a:
            return self.nested_loop_join(txn, stmt)

        check = compile_predicate(residual, scope)
        a, b = stmt.tables
        rows_a = list(self.scan(txn, a, la))
        rows_b = list(self.scan(txn, b, lb))
        key_a = operator.itemgetter(*keys_a)
        key_b = operator.itemgetter(*keys_b)
        out = []
        if len(rows_b) <= len(rows_a):
            table = {}
            for rb in rows_b:
                table.setdefault(key_b(rb), []).append(rb)
            for ra in rows_a:
                for rb in table.get(key_a(ra), ()):
                    if check(ra, rb):
                        out.append(project(ra, rb))
        else:
            table = {}
            for ra in rows_a:
                table.setdefault(key_a(ra), []).append(ra)
            for rb in rows_b:
                for ra in table.get(key_b(rb), ()):
                    if check(ra, rb):
                        out.append(project(ra, rb))
        return ResultSet(columns, out)
