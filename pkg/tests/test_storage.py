import os

import pytest
from hypothesis import given, strategies as st

from pagedb.catalog import FieldType, Schema
from pagedb.config import BLOCK_SIZE, HEADER_SIZE
from pagedb.errors import EncodeError, StorageError
from pagedb.storage import (
    BlockId,
    FileManager,
    Page,
    RecordLayout,
    decode_record,
    encode_record,
)

INT, VARCHAR = FieldType.INT, FieldType.VARCHAR


@pytest.fixture
def fm(tmp_path):
    files = FileManager(str(tmp_path))
    files.create_table_file("t")
    return files


def page_of(byte):
    return Page(BLOCK_SIZE, bytes([byte]) * BLOCK_SIZE)


def layout(*types):
    return RecordLayout(Schema("t", tuple((f"c{i}", t) for i, t in enumerate(types))))


class TestBlocks:
    def test_empty_file_has_no_blocks(self, fm):
        assert fm.block_count("t") == 0

    def test_append_numbers_blocks(self, fm):
        assert fm.append_block("t") == BlockId("t", 0)
        assert fm.append_block("t") == BlockId("t", 1)
        assert fm.block_count("t") == 2
        assert os.path.getsize(fm.path("t")) == 2 * BLOCK_SIZE

    def test_appended_block_is_zero(self, fm):
        b = fm.append_block("t")
        assert bytes(fm.read_block(b)) == bytes(BLOCK_SIZE)

    def test_read_returns_file_bytes(self, fm):
        with open(fm.path("t"), "wb") as f:
            f.write(bytes(range(256)) * (BLOCK_SIZE // 256))
        assert bytes(fm.read_block(BlockId("t", 0))) == bytes(range(256)) * (BLOCK_SIZE // 256)

    def test_write_read_round_trip(self, fm):
        fm.write_block(BlockId("t", 0), page_of(7))
        assert fm.read_block(BlockId("t", 0)) == page_of(7)

    def test_last_write_wins(self, fm):
        fm.write_block(BlockId("t", 0), page_of(1))
        fm.write_block(BlockId("t", 0), page_of(2))
        assert fm.read_block(BlockId("t", 0)) == page_of(2)
        assert fm.block_count("t") == 1

    def test_write_at_count_extends(self, fm):
        fm.append_block("t")
        fm.write_block(BlockId("t", 1), page_of(3))
        assert os.path.getsize(fm.path("t")) == 2 * BLOCK_SIZE

    def test_write_past_count_rejected(self, fm):
        with pytest.raises(StorageError, match="block out of range"):
            fm.write_block(BlockId("t", 1), page_of(3))

    def test_read_out_of_range(self, fm):
        fm.append_block("t")
        fm.append_block("t")
        with pytest.raises(StorageError, match="block out of range"):
            fm.read_block(BlockId("t", 3))

    def test_missing_file(self, fm):
        with pytest.raises(StorageError):
            fm.block_count("nope")
        with pytest.raises(StorageError):
            fm.read_block(BlockId("nope", 0))

    def test_delete(self, fm):
        fm.create_table_file("u")
        fm.append_block("u")
        fm.delete_table_file("t")
        with pytest.raises(StorageError):
            fm.read_block(BlockId("t", 0))
        with pytest.raises(StorageError):
            fm.delete_table_file("t")
        assert fm.block_count("u") == 1

    def test_page_size_enforced(self):
        with pytest.raises(StorageError):
            Page(BLOCK_SIZE, b"x")

    def test_block_id_validation(self):
        with pytest.raises(StorageError):
            BlockId("1bad", 0)
        with pytest.raises(StorageError):
            BlockId("t", -1)


class TestRecords:
    def test_layout_arithmetic(self):
        lay = layout(INT, VARCHAR, INT)
        assert lay.record_size == 4 + 20 + 4
        assert lay.records_per_block == (BLOCK_SIZE - HEADER_SIZE) // 28

    def test_zero_int(self):
        assert encode_record(layout(INT), [0]) == b"\x00\x00\x00\x00"

    def test_little_endian(self):
        assert decode_record(layout(INT), b"\x01\x00\x00\x00") == (1,)
        assert encode_record(layout(INT), [-1]) == b"\xff\xff\xff\xff"

    def test_varchar_padding(self):
        raw = encode_record(layout(VARCHAR), ["ab"])
        assert raw == b"ab" + bytes(18)
        assert decode_record(layout(VARCHAR), bytes(20)) == ("",)

    def test_too_long_string(self):
        encode_record(layout(VARCHAR), ["x" * 20])
        with pytest.raises(EncodeError, match="too long"):
            encode_record(layout(VARCHAR), ["x" * 21])

    @pytest.mark.parametrize("values", [[], [1, 2], ["a"], [2**31], [True]])
    def test_bad_values(self, values):
        with pytest.raises(EncodeError):
            encode_record(layout(INT), values)

    def test_wrong_length_decode(self):
        with pytest.raises(EncodeError):
            decode_record(layout(INT), bytes(5))

    def test_record_too_wide_for_block(self):
        with pytest.raises(StorageError):
            RecordLayout(Schema("t", (("a", VARCHAR),)), varchar_width=100, block_size=64)

    def test_slots_do_not_span_blocks(self):
        lay = layout(VARCHAR, VARCHAR, INT)
        last = lay.slot_offset(lay.records_per_block - 1)
        assert last + lay.record_size <= BLOCK_SIZE


_strings = st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126,
                                          blacklist_characters='"'), max_size=20)


@st.composite
def typed_records(draw):
    types = draw(st.lists(st.sampled_from([INT, VARCHAR]), min_size=1, max_size=5))
    values = [
        draw(st.integers(-(2**31), 2**31 - 1)) if t is INT else draw(_strings)
        for t in types
    ]
    return types, values


@given(typed_records())
def test_encode_decode_round_trip(rec):
    types, values = rec
    lay = layout(*types)
    raw = encode_record(lay, values)
    assert len(raw) == lay.record_size
    assert decode_record(lay, raw) == tuple(values)


@given(st.lists(st.integers(-(2**31), 2**31 - 1), max_size=50))
def test_block_decode_respects_occupancy(values):
    lay = layout(INT)
    page = Page()
    for slot, v in enumerate(values):
        lay.write_slot(page, slot, [v])
    page.occupancy = len(values)
    page.data[lay.slot_offset(len(values)) : lay.slot_offset(len(values)) + 4] = b"\x07\x00\x00\x00"
    assert lay.decode_block(page) == [(v,) for v in values]
