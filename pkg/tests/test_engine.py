import os
import random

import pytest

from pagedb.catalog import CatalogError
from pagedb.engine import Ok, ResultSet, RowsAffected
from pagedb.errors import EncodeError, ExecutionError, StorageError
from pagedb.parser import FieldRef, Insert, Select, parse, render

from .oracle import (
    INT,
    Oracle,
    rand_equijoin,
    rand_predicate,
    rand_rows,
    rand_schema,
)


def run_all(engine, *statements):
    return [engine.run(s) for s in statements]


def file_bytes(engine, table):
    with open(engine.files.path(table), "rb") as f:
        return f.read()


def pins_all_zero(engine):
    return all(pins == 0 for _, pins, _ in engine.pool.snapshot())


class TestDDL:
    def test_create(self, engine):
        assert engine.run("CREATE TABLE t (a INT)") == Ok()
        assert engine.catalog.list_tables() == ["t"]
        assert engine.files.block_count("t") == 0

    def test_duplicate_create(self, engine):
        engine.run("CREATE TABLE t (a INT)")
        with pytest.raises(CatalogError, match="table already exists"):
            engine.run("CREATE TABLE t (b INT)")

    def test_record_too_wide(self, make_engine):
        e = make_engine(block_size=64)
        e.run("CREATE TABLE ok (a VARCHAR, b VARCHAR, c VARCHAR)")
        with pytest.raises(StorageError, match="does not fit"):
            e.run("CREATE TABLE t (a VARCHAR, b VARCHAR, c VARCHAR, d INT)")
        assert e.catalog.list_tables() == ["ok"]
        assert not os.path.exists(e.files.path("t"))

    def test_drop(self, engine):
        run_all(engine, "CREATE TABLE t (a INT)", "CREATE TABLE u (a INT)", "DROP TABLE t")
        with pytest.raises(CatalogError, match="no such table"):
            engine.run("SELECT * FROM t")
        with pytest.raises(CatalogError, match="no such table"):
            engine.run("DROP TABLE t")
        assert engine.catalog.list_tables() == ["u"]
        assert not os.path.exists(engine.files.path("t"))

    def test_drop_frees_buffers(self, make_engine):
        e = make_engine(pool_size=2)
        run_all(e, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)")
        assert any(blk is not None and blk.table_name == "t" for blk, _, _ in e.pool.snapshot())
        e.run("DROP TABLE t")
        assert all(blk is None for blk, _, _ in e.pool.snapshot())

    def test_recreate_after_drop(self, engine):
        run_all(engine, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)",
                "DROP TABLE t", "CREATE TABLE t (b VARCHAR)", 'INSERT INTO t VALUES ("z")')
        assert engine.run("SELECT * FROM t").rows == [("z",)]


class TestInsert:
    def test_insert_then_scan(self, engine):
        engine.run("CREATE TABLE t (a INT)")
        assert engine.run("INSERT INTO t VALUES (7)") == RowsAffected(1)
        assert engine.run("SELECT * FROM t").rows == [(7,)]

    @pytest.mark.parametrize("values", ["(1, 2)", '("x")', '(1, "x")'])
    def test_bad_insert_leaves_file(self, engine, values):
        run_all(engine, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)")
        before = file_bytes(engine, "t")
        with pytest.raises(EncodeError):
            engine.run(f"INSERT INTO t VALUES {values}")
        assert file_bytes(engine, "t") == before

    def test_string_too_long(self, engine):
        engine.run("CREATE TABLE t (s VARCHAR)")
        engine.run(f'INSERT INTO t VALUES ("{"x" * 20}")')
        with pytest.raises(EncodeError, match="too long"):
            engine.run(f'INSERT INTO t VALUES ("{"x" * 21}")')

    def test_blocks_fill_up(self, engine):
        engine.run("CREATE TABLE t (a INT, b VARCHAR)")
        rpb = engine.layout("t").records_per_block
        assert rpb == (4096 - 4) // 24
        for i in range(3 * rpb):
            engine.run(f'INSERT INTO t VALUES ({i}, "r{i}")')
        assert engine.files.block_count("t") == 3
        assert engine.run("SELECT a FROM t").rows == [(i,) for i in range(3 * rpb)]

    def test_on_disk_format(self, engine):
        run_all(engine, "CREATE TABLE t (a INT, s VARCHAR)",
                'INSERT INTO t VALUES (1, "hi")', 'INSERT INTO t VALUES (-2, "")')
        data = file_bytes(engine, "t")
        assert len(data) == 4096
        expected = (b"\x02\x00\x00\x00" + b"\x01\x00\x00\x00" + b"hi" + bytes(18)
                    + b"\xfe\xff\xff\xff" + bytes(20))
        assert data[: len(expected)] == expected
        assert data[len(expected):] == bytes(4096 - len(expected))


class TestUpdate:
    def test_update_all(self, engine):
        engine.run("CREATE TABLE t (a INT)")
        for i in range(5):
            engine.run(f"INSERT INTO t VALUES ({i})")
        assert engine.run("UPDATE t SET a = 9") == RowsAffected(5)
        assert engine.run("SELECT * FROM t").rows == [(9,)] * 5

    def test_no_match_leaves_bytes(self, engine):
        run_all(engine, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)")
        before = file_bytes(engine, "t")
        assert engine.run("UPDATE t SET a = 5 WHERE a > 100") == RowsAffected(0)
        assert file_bytes(engine, "t") == before

    def test_table1_statement(self, engine):
        engine.run("CREATE TABLE table1 (col1 VARCHAR, col2 INT)")
        rng = random.Random(3)
        rows = [(f"v{i}", rng.randint(0, 4)) for i in range(40)]
        for r in rows:
            engine.run(f'INSERT INTO table1 VALUES ("{r[0]}", {r[1]})')
        out = engine.run('UPDATE table1 SET col1 = "str" WHERE col2 = 2')
        expected = [("str", b) if b == 2 else (a, b) for a, b in rows]
        assert out.count == sum(b == 2 for _, b in rows)
        assert engine.run("SELECT * FROM table1").rows == expected

    def test_type_checks(self, engine):
        engine.run("CREATE TABLE t (a INT, s VARCHAR)")
        with pytest.raises(ExecutionError, match="type mismatch"):
            engine.run('UPDATE t SET a = "x"')
        with pytest.raises(ExecutionError, match="unknown column"):
            engine.run("UPDATE t SET zz = 1")
        with pytest.raises(EncodeError):
            engine.run(f'UPDATE t SET s = "{"y" * 21}"')


class TestSelect:
    def test_star_in_insert_order(self, engine):
        engine.run("CREATE TABLE t (a INT, b VARCHAR)")
        for i in range(4):
            engine.run(f'INSERT INTO t VALUES ({i}, "s{i}")')
        out = engine.run("SELECT * FROM t")
        assert out.columns == ["a", "b"]
        assert out.rows == [(i, f"s{i}") for i in range(4)]

    def test_no_match_keeps_header(self, engine):
        engine.run("CREATE TABLE t (a INT, b VARCHAR)")
        engine.run('INSERT INTO t VALUES (1, "x")')
        assert engine.run("SELECT b FROM t WHERE a = 2") == ResultSet(["b"], [])

    def test_projection_and_qualified(self, engine):
        run_all(engine, "CREATE TABLE t (a INT, b VARCHAR)", 'INSERT INTO t VALUES (1, "x")')
        out = engine.run("SELECT b, t.a FROM t WHERE t.b = \"x\"")
        assert out.columns == ["b", "t.a"] and out.rows == [("x", 1)]

    @pytest.mark.parametrize("query,err", [
        ("SELECT zz FROM t", "unknown column"),
        ("SELECT u.a FROM t", "unknown column"),
        ('SELECT * FROM t WHERE a = "1"', "type mismatch"),
        ("SELECT * FROM t WHERE a = b", "type mismatch"),
    ])
    def test_errors(self, engine, query, err):
        engine.run("CREATE TABLE t (a INT, b VARCHAR)")
        with pytest.raises(ExecutionError, match=err):
            engine.run(query)

    def test_constant_only_predicate(self, engine):
        run_all(engine, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)")
        assert engine.run("SELECT * FROM t WHERE 1 = 1").rows == [(1,)]
        assert engine.run('SELECT * FROM t WHERE "a" > "b"').rows == []

    @pytest.mark.parametrize("seed", range(25))
    def test_random_select_matches_oracle(self, engine, seed):
        rng = random.Random(seed)
        fields = rand_schema(rng, "c")
        rows = rand_rows(rng, fields, 50, domain=5)
        cols = [f"c{i} {t.value}" for i, (_, t) in enumerate(fields)]
        engine.run(f"CREATE TABLE t ({', '.join(cols)})")
        oracle = Oracle()
        oracle.execute(parse(f"CREATE TABLE t ({', '.join(cols)})"))
        for r in rows:
            stmt = Insert("t", r)
            engine.run(render(stmt))
            oracle.execute(stmt)
        columns = [(FieldRef(n), t) for n, t in fields]
        for _ in range(5):
            stmt = Select((), ("t",), rand_predicate(rng, columns, 5))
            out = engine.run(render(stmt))
            assert (out.columns, out.rows) == oracle.select(stmt)
        assert pins_all_zero(engine)


def seed_tables(engine, rows_a, rows_b, fa=(("k", INT), ("x", INT)), fb=(("k", INT), ("y", INT))):
    oracle = Oracle()
    for name, fields, rows in (("a", fa, rows_a), ("b", fb, rows_b)):
        cols = ", ".join(f"{n} {t.value}" for n, t in fields)
        for text in [f"CREATE TABLE {name} ({cols})"] + [render(Insert(name, r)) for r in rows]:
            engine.run(text)
            oracle.execute(parse(text))
    return oracle


class TestJoin:
    def test_single_match(self, engine):
        seed_tables(engine, [(1, 10), (2, 20)], [(2, 200), (3, 300)])
        out = engine.nested_loop_join(engine.txns.begin(), parse("SELECT * FROM a, b WHERE a.k = b.k"))
        assert out.columns == ["a.k", "a.x", "b.k", "b.y"]
        assert out.rows == [(2, 20, 2, 200)]

    def test_cross_product(self, engine):
        seed_tables(engine, [(1, 1), (2, 2), (3, 3)], [(7, 7), (8, 8)])
        out = engine.run("SELECT a.x, y FROM a, b")
        assert out.rows == [(x, y) for x in (1, 2, 3) for y in (7, 8)]

    def test_empty_side(self, engine):
        seed_tables(engine, [(1, 1)], [])
        assert engine.run("SELECT * FROM a, b").rows == []

    def test_ambiguous(self, engine):
        seed_tables(engine, [(1, 1)], [(1, 1)])
        with pytest.raises(ExecutionError, match="ambiguous column: k"):
            engine.run("SELECT k FROM a, b")
        with pytest.raises(ExecutionError, match="ambiguous"):
            engine.run("SELECT * FROM a, b WHERE k = 1")

    def test_self_join_rejected(self, engine):
        seed_tables(engine, [(1, 1)], [])
        with pytest.raises(ExecutionError, match="self-join"):
            engine.run("SELECT * FROM a, a")

    def test_hash_fallback_without_equality(self, engine):
        seed_tables(engine, [(i, i) for i in range(6)], [(i, -i) for i in range(5)])
        stmt = parse("SELECT * FROM a, b WHERE a.k < b.k")
        txn = engine.txns.begin()
        assert engine.hash_join(txn, stmt) == engine.nested_loop_join(txn, stmt)

    def test_all_duplicate_keys(self, engine):
        seed_tables(engine, [(5, i) for i in range(7)], [(5, i) for i in range(4)])
        stmt = parse("SELECT * FROM a, b WHERE a.k = b.k")
        txn = engine.txns.begin()
        h = engine.hash_join(txn, stmt)
        n = engine.nested_loop_join(txn, stmt)
        assert len(h.rows) == 28
        assert sorted(h.rows) == sorted(n.rows)

    def test_join_symmetry(self, engine):
        rng = random.Random(9)
        seed_tables(engine, [(rng.randint(0, 5), i) for i in range(30)],
                    [(rng.randint(0, 5), i) for i in range(20)])
        ab = engine.run("SELECT a.x, b.y FROM a, b WHERE a.k = b.k")
        ba = engine.run("SELECT a.x, b.y FROM b, a WHERE b.k = a.k")
        assert sorted(ab.rows) == sorted(ba.rows)

    @pytest.mark.parametrize("seed", range(30))
    def test_random_joins_match_oracle(self, engine, seed):
        rng = random.Random(1000 + seed)
        fa, fb = rand_schema(rng, "p"), rand_schema(rng, "q")
        domain = rng.choice([0, 2, 10])
        oracle = seed_tables(engine, rand_rows(rng, fa, rng.randint(0, 25), domain),
                             rand_rows(rng, fb, rng.randint(0, 25), domain), fa, fb)
        pred = rand_equijoin(rng, "a", fa, "b", fb, domain)
        if pred is None:
            cols = [(FieldRef(n, "a"), t) for n, t in fa] + [(FieldRef(n, "b"), t) for n, t in fb]
            pred = rand_predicate(rng, cols, domain)
        stmt = Select((), ("a", "b"), pred)
        txn = engine.txns.begin()
        nested = engine.nested_loop_join(txn, stmt)
        hashed = engine.hash_join(txn, stmt)
        columns, rows = oracle.select(stmt)
        assert (nested.columns, nested.rows) == (columns, rows)
        assert sorted(hashed.rows) == sorted(rows)
        engine.txns.commit(txn)
        assert pins_all_zero(engine)


def test_table_lock_mode_statement_locks(make_engine):
    e = make_engine(lock_mode="table")
    run_all(e, "CREATE TABLE t (a INT)", "INSERT INTO t VALUES (1)")
    txn = e.txns.begin()
    e.execute(parse("SELECT * FROM t"), txn)
    assert {str(k): v.value for k, v in e.locks.locks_held(txn.id).items()} == {"table t": "shared"}
    e.txns.commit(txn)
    txn = e.txns.begin()
    e.execute(parse("UPDATE t SET a = 2"), txn)
    assert [v.value for v in e.locks.locks_held(txn.id).values()] == ["exclusive"]
    e.txns.commit(txn)


def test_global_lock_mode_takes_global(engine):
    engine.run("CREATE TABLE t (a INT)")
    txn = engine.txns.begin()
    engine.execute(parse("SELECT * FROM t"), txn)
    assert [str(k) for k in engine.locks.locks_held(txn.id)] == ["system"]
    engine.txns.commit(txn)
